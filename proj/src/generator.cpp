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

#include "unroll_tuner/generator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <set>

#include "unroll_tuner/error.hpp"
#include "unroll_tuner/interpreter.hpp"

namespace unroll_tuner {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Rng::Rng(std::uint64_t seed) {
  std::uint64_t state = seed;
  for (auto& word : s_) word = splitmix64(state);
}

Rng Rng::stream(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t state = seed;
  const std::uint64_t a = splitmix64(state);
  state = index ^ 0x6a09e667f3bcc909ULL;
  const std::uint64_t b = splitmix64(state);
  return Rng(a ^ (b * 0x9e3779b97f4a7c15ULL));
}

namespace {
inline std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
}  // namespace

std::uint64_t Rng::next() {
  const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = rotl(s_[3], 45);
  return result;
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi <= lo) return lo;
  const std::uint64_t range = static_cast<std::uint64_t>(hi) - static_cast<std::uint64_t>(lo) + 1;
  if (range == 0) return static_cast<std::int64_t>(next());
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t x = next();
  while (x >= limit) x = next();
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(lo) + x % range);
}

double Rng::uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::string_view to_string(TransformKind kind) {
  switch (kind) {
    case TransformKind::Tile2: return "tile2";
    case TransformKind::Tile3: return "tile3";
    case TransformKind::Interchange: return "interchange";
    case TransformKind::Parallelize: return "parallelize";
  }
  return "?";
}

void check_config(const GenConfig& cfg) {
  const auto fail = [](const std::string& m) { throw Error(ErrorCode::InvalidConfig, m); };
  if (cfg.depth_min < 1 || cfg.depth_max > 4 || cfg.depth_min > cfg.depth_max) {
    fail("depth range must satisfy 1 <= min <= max <= 4");
  }
  if (cfg.extent_choices.empty()) fail("extent_choices is empty");
  for (auto e : cfg.extent_choices) {
    if (!is_power_of_two(e) || e > 2048) fail("extent " + std::to_string(e) + " is not a power of two <= 2048");
  }
  if (cfg.max_inputs < 1) fail("max_inputs must be at least 1");
  if (cfg.dtype_choices.empty()) fail("dtype_choices is empty");
  if (cfg.schedules_per_program < 1) fail("schedules_per_program must be at least 1");
  if (cfg.max_leaves < 1) fail("max_leaves must be at least 1");
  if (cfg.access_probability < 0.5 || cfg.access_probability > 1.0) {
    fail("access_probability must lie in [0.5, 1]");
  }
}

namespace {

struct InputPattern {
  std::string name;
  std::vector<std::string> iterators;
};

class ProgramBuilder {
 public:
  ProgramBuilder(const GenConfig& cfg, Rng& rng) : cfg_(cfg), rng_(rng) {}

  Program build(std::uint64_t index) {
    Program p;
    p.name = "gen" + std::to_string(index);
    const int depth = static_cast<int>(rng_.uniform_int(cfg_.depth_min, cfg_.depth_max));
    for (int l = 0; l < depth; ++l) {
      const auto extent = rng_.pick(std::span<const std::int64_t>(cfg_.extent_choices));
      p.iterators.push_back(Iterator{"i" + std::to_string(l), 0, extent, l});
    }
    dtype_ = rng_.pick(std::span<const DataType>(cfg_.dtype_choices));

    const int inputs = static_cast<int>(rng_.uniform_int(1, cfg_.max_inputs));
    for (int k = 0; k < inputs; ++k) {
      std::vector<std::string> names;
      for (const auto& it : p.iterators) names.push_back(it.name);
      rng_.shuffle(names);
      names.resize(static_cast<std::size_t>(rng_.uniform_int(1, depth)));
      patterns_.push_back(InputPattern{"in" + std::to_string(k), std::move(names)});
    }

    // Log-uniform leaf count: small and large bodies are equally common.
    const double span = std::log(static_cast<double>(cfg_.max_leaves) + 1.0);
    const int leaves = std::clamp(static_cast<int>(std::exp(rng_.uniform(0.0, span))), 1,
                                  cfg_.max_leaves);
    p.body = tree(leaves);

    std::vector<IndexExpr> out_index;
    for (const auto& it : p.iterators) out_index.push_back(idx(it.name));
    p.output = BufferAccess{"out", dtype_, std::move(out_index), AccessMode::Store};
    for (const auto& pattern : patterns_) {
      if (used_.count(pattern.name)) {
        p.inputs.push_back(
            BufferDecl{pattern.name, static_cast<int>(pattern.iterators.size()), dtype_});
      }
    }
    return p;
  }

 private:
  Expr constant_leaf() {
    if (is_integral(dtype_)) return constant(static_cast<double>(rng_.uniform_int(1, 9)), dtype_);
    return constant(static_cast<double>(rng_.uniform_int(1, 16)) / 4.0, dtype_);
  }

  Expr leaf() {
    if (!rng_.bernoulli(cfg_.access_probability)) return constant_leaf();
    const auto& pattern = patterns_[static_cast<std::size_t>(
        rng_.uniform_int(0, static_cast<std::int64_t>(patterns_.size()) - 1))];
    used_.insert(pattern.name);
    std::vector<IndexExpr> indices;
    for (const auto& name : pattern.iterators) {
      const std::int64_t offset = rng_.bernoulli(0.8) ? 0 : rng_.uniform_int(1, 2);
      indices.push_back(idx(name, offset));
    }
    return load(pattern.name, dtype_, std::move(indices));
  }

  Expr tree(int leaves) {
    if (leaves == 1) return leaf();
    const auto kind = static_cast<BinOpKind>(rng_.uniform_int(0, 3));
    if (kind == BinOpKind::Div) return Expr(kind, tree(leaves - 1), constant_leaf());
    const int left = static_cast<int>(rng_.uniform_int(1, leaves - 1));
    Expr l = tree(left);
    Expr r = tree(leaves - left);
    return Expr(kind, std::move(l), std::move(r));
  }

  const GenConfig& cfg_;
  Rng& rng_;
  DataType dtype_ = DataType::Float64;
  std::vector<InputPattern> patterns_;
  std::set<std::string> used_;
};

std::int64_t random_factor(Rng& rng, std::int64_t extent) {
  const std::int64_t cap = std::min<std::int64_t>(kMaxSplitFactor, extent);
  std::vector<std::int64_t> choices;
  for (std::int64_t f = kMinSplitFactor; f <= cap; f *= 2) choices.push_back(f);
  if (choices.empty()) return 0;
  return rng.pick(std::span<const std::int64_t>(choices));
}

std::optional<Transform> random_transform(Rng& rng, TransformKind kind,
                                          const ScheduledProgram& sp) {
  const int depth = sp.depth();
  const auto extent = [&](int l) { return sp.current_iterators()[static_cast<std::size_t>(l)].extent(); };
  switch (kind) {
    case TransformKind::Tile2: {
      if (depth < 2 || depth + 2 > kMaxDepth) return std::nullopt;
      const int a = static_cast<int>(rng.uniform_int(0, depth - 2));
      const auto fa = random_factor(rng, extent(a));
      const auto fb = random_factor(rng, extent(a + 1));
      if (fa == 0 || fb == 0) return std::nullopt;
      return Tile2{a, a + 1, fa, fb};
    }
    case TransformKind::Tile3: {
      if (depth < 3 || depth + 3 > kMaxDepth) return std::nullopt;
      const int a = static_cast<int>(rng.uniform_int(0, depth - 3));
      const auto fa = random_factor(rng, extent(a));
      const auto fb = random_factor(rng, extent(a + 1));
      const auto fc = random_factor(rng, extent(a + 2));
      if (fa == 0 || fb == 0 || fc == 0) return std::nullopt;
      return Tile3{a, a + 1, a + 2, fa, fb, fc};
    }
    case TransformKind::Interchange: {
      if (depth < 2) return std::nullopt;
      const int a = static_cast<int>(rng.uniform_int(0, depth - 1));
      int b = static_cast<int>(rng.uniform_int(0, depth - 2));
      if (b >= a) ++b;
      return Interchange{std::min(a, b), std::max(a, b)};
    }
    case TransformKind::Parallelize:
      if (depth < 1 || sp.parallel_level()) return std::nullopt;
      return Parallelize{0};
  }
  return std::nullopt;
}

std::uint64_t text_hash(const std::string& text) { return fnv1a(text.data(), text.size()); }

}  // namespace

Program gen_program(const GenConfig& cfg, std::uint64_t index) {
  check_config(cfg);
  Rng rng = Rng::stream(cfg.seed, index);
  return ProgramBuilder(cfg, rng).build(index);
}

std::vector<ScheduledProgram> gen_schedules(const GenConfig& cfg, const Program& p) {
  check_config(cfg);
  Rng rng = Rng::stream(cfg.seed ^ 0x5c4ed01e5ULL, text_hash(to_text(p)));
  std::vector<ScheduledProgram> out;
  out.emplace_back(p);
  for (int s = 1; s < cfg.schedules_per_program; ++s) {
    ScheduledProgram sp(p);
    if (!cfg.allowed_transforms.empty()) {
      const int wanted = static_cast<int>(rng.uniform_int(1, 3));
      int applied = 0;
      for (int attempt = 0; attempt < 8 && applied < wanted; ++attempt) {
        const auto kind = rng.pick(std::span<const TransformKind>(cfg.allowed_transforms));
        const auto t = random_transform(rng, kind, sp);
        if (!t) continue;
        try {
          ScheduledProgram next = apply_transform(sp, *t);
          if (next.depth() > kMaxDepth) continue;
          sp = std::move(next);
          ++applied;
        } catch (const Error&) {
        }
      }
    }
    out.push_back(std::move(sp));
  }
  return out;
}

}  // namespace unroll_tuner
