// Copyright 2026 The unroll-tuner Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef UNROLL_TUNER_ARCHIVE_HPP_
#define UNROLL_TUNER_ARCHIVE_HPP_

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include <Eigen/Core>

#include "unroll_tuner/error.hpp"

namespace unroll_tuner {

// Line-oriented text container shared by the model files:
//
//   <magic> <version>
//   <key> <count> <v0> <v1> ...
//
// Floating-point values use the shortest text that reads back to the same
// bits.
template <typename T>
std::string format_value(T value) {
  if constexpr (std::is_floating_point_v<T> && !std::is_same_v<T, long double>) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ptr);
  } else {
    return std::to_string(value);
  }
}

template <typename T>
bool parse_value(std::string_view text, T& out) {
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

class ArchiveWriter {
 public:
  ArchiveWriter(std::string_view magic, int version) {
    out_ << magic << " " << version << "\n";
  }

  template <typename T>
  void values(std::string_view key, const std::vector<T>& v) {
    out_ << key << " " << v.size();
    for (const auto& x : v) out_ << " " << format_value(x);
    out_ << "\n";
  }

  template <typename T>
  void value(std::string_view key, T v) {
    values(key, std::vector<T>{v});
  }

  void text(std::string_view key, std::string_view v) { out_ << key << " 1 " << v << "\n"; }

  // Row-major dump of an Eigen matrix, preceded by its shape.
  template <typename Derived>
  void matrix(std::string_view key, const Eigen::MatrixBase<Derived>& m) {
    using Scalar = typename Derived::Scalar;
    std::vector<Scalar> flat;
    flat.reserve(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) flat.push_back(m(r, c));
    }
    value(std::string(key) + ".shape.rows", static_cast<std::int64_t>(m.rows()));
    value(std::string(key) + ".shape.cols", static_cast<std::int64_t>(m.cols()));
    values(key, flat);
  }

  void end() { out_ << "end\n"; }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

class ArchiveReader {
 public:
  // Throws Error{FormatVersionMismatch} when the magic or version differ.
  ArchiveReader(std::string text, std::string_view magic, int version) : in_(std::move(text)) {
    std::string m;
    int v = -1;
    in_ >> m >> v;
    if (m != magic || v != version) {
      throw Error(ErrorCode::FormatVersionMismatch,
                  "expected " + std::string(magic) + " " + std::to_string(version) + ", found " +
                      m + " " + std::to_string(v));
    }
  }

  template <typename T>
  std::vector<T> values(std::string_view key) {
    std::string k;
    long long n = -1;
    in_ >> k >> n;
    if (!in_ || k != key || n < 0) corrupt("expected field '" + std::string(key) + "'");
    std::vector<T> out(static_cast<std::size_t>(n));
    for (auto& x : out) {
      std::string token;
      in_ >> token;
      if (!in_ || !parse_value(token, x)) corrupt("bad value in '" + std::string(key) + "'");
    }
    return out;
  }

  template <typename T>
  T value(std::string_view key) {
    const auto v = values<T>(key);
    if (v.size() != 1) corrupt("field '" + std::string(key) + "' must hold one value");
    return v[0];
  }

  std::string text(std::string_view key) {
    std::string k;
    long long n = -1;
    std::string v;
    in_ >> k >> n >> v;
    if (!in_ || k != key || n != 1) corrupt("expected field '" + std::string(key) + "'");
    return v;
  }

  template <typename Scalar>
  Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> matrix(std::string_view key,
                                                                 Eigen::Index rows,
                                                                 Eigen::Index cols) {
    const auto r = value<std::int64_t>(std::string(key) + ".shape.rows");
    const auto c = value<std::int64_t>(std::string(key) + ".shape.cols");
    if (r != rows || c != cols) {
      corrupt("'" + std::string(key) + "' has shape " + std::to_string(r) + "x" +
              std::to_string(c) + ", expected " + std::to_string(rows) + "x" +
              std::to_string(cols));
    }
    const auto flat = values<Scalar>(key);
    if (static_cast<Eigen::Index>(flat.size()) != rows * cols) {
      corrupt("'" + std::string(key) + "' holds the wrong number of values");
    }
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> m(rows, cols);
    std::size_t k = 0;
    for (Eigen::Index i = 0; i < rows; ++i) {
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = flat[k++];
    }
    return m;
  }

  void end() {
    std::string k;
    in_ >> k;
    if (k != "end") corrupt("missing end marker");
  }

  [[noreturn]] static void corrupt(const std::string& message) {
    throw Error(ErrorCode::CorruptFile, message);
  }

 private:
  std::istringstream in_;
};

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace unroll_tuner

#endif  // UNROLL_TUNER_ARCHIVE_HPP_
