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

#include "unroll_tuner/interpreter.hpp"

#include <cstring>
#include <limits>
#include <type_traits>

#include "unroll_tuner/error.hpp"

namespace unroll_tuner {

std::size_t Buffer::size() const {
  return std::visit([](const auto& v) { return v.size(); }, values);
}

double Buffer::at(std::size_t flat) const {
  return std::visit([flat](const auto& v) { return static_cast<double>(v[flat]); }, values);
}

std::uint64_t Buffer::checksum() const {
  return std::visit(
      [](const auto& v) { return fnv1a(v.data(), v.size() * sizeof(v[0])); }, values);
}

std::uint64_t fnv1a(const void* data, std::size_t bytes, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

double initial_value(int ordinal, std::int64_t flat, DataType dtype) {
  const std::int64_t v = ((flat * 7 + ordinal * 3 + 1) % 11) - 5;
  return is_integral(dtype) ? static_cast<double>(v) : static_cast<double>(v) / 4.0;
}

namespace {

template <typename T>
T wrap_op(BinOpKind kind, T a, T b) {
  if constexpr (std::is_integral_v<T>) {
    using U = std::make_unsigned_t<T>;
    switch (kind) {
      case BinOpKind::Add: return static_cast<T>(static_cast<U>(a) + static_cast<U>(b));
      case BinOpKind::Sub: return static_cast<T>(static_cast<U>(a) - static_cast<U>(b));
      case BinOpKind::Mul: return static_cast<T>(static_cast<U>(a) * static_cast<U>(b));
      case BinOpKind::Div:
        if (b == 0) return 0;
        if (a == std::numeric_limits<T>::min() && b == -1) return a;
        return static_cast<T>(a / b);
    }
  } else {
    switch (kind) {
      case BinOpKind::Add: return a + b;
      case BinOpKind::Sub: return a - b;
      case BinOpKind::Mul: return a * b;
      case BinOpKind::Div: return a / b;
    }
  }
  return T{};
}

// Affine address of an access in terms of the base iterators.
struct Address {
  std::string buffer;
  std::vector<std::int64_t> coeff;  // per base iterator
  std::int64_t constant = 0;
};

Address make_address(const Program& p, const BufferAccess& a,
                     const std::vector<std::int64_t>& shape) {
  Address addr{a.buffer, std::vector<std::int64_t>(p.iterators.size(), 0), 0};
  std::int64_t stride = 1;
  for (std::size_t d = a.indices.size(); d-- > 0;) {
    const IndexExpr& index = a.indices[d];
    addr.constant += stride * index.offset;
    for (const auto& name : index.iterators) {
      for (std::size_t k = 0; k < p.iterators.size(); ++k) {
        if (p.iterators[k].name == name) addr.coeff[k] += stride;
      }
    }
    stride *= shape[d];
  }
  return addr;
}

template <typename T>
class Executor {
 public:
  Executor(const ScheduledProgram& sp, const InterpretOptions& options)
      : sp_(sp), p_(sp.base()), options_(options) {
    const auto validation = validate_program(p_);
    if (!validation.ok()) throw Error(ErrorCode::InvalidProgram, validation.summary());

    const auto shapes = buffer_shapes(p_);
    for (const auto& [name, shape] : shapes) {
      std::int64_t n = 1;
      for (auto e : shape) n *= e;
      Buffer b{name, p_.dtype(), shape, std::vector<T>(static_cast<std::size_t>(n), T{})};
      auto& data = std::get<std::vector<T>>(b.values);
      for (std::size_t ordinal = 0; ordinal < p_.inputs.size(); ++ordinal) {
        if (p_.inputs[ordinal].name != name) continue;
        for (std::int64_t i = 0; i < n; ++i) {
          data[i] = static_cast<T>(initial_value(static_cast<int>(ordinal), i, p_.dtype()));
        }
      }
      result_.buffers.emplace(name, std::move(b));
    }
    result_.output_name = p_.output.buffer;
    compile(p_.body);
    store_ = make_address(p_, p_.output, shapes.at(p_.output.buffer));
    store_data_ = &std::get<std::vector<T>>(result_.buffers.at(p_.output.buffer).values);

    original_.assign(p_.iterators.size(), 0);
    current_.assign(sp_.current_iterators().size(), 0);
    for (int k = 0; k < p_.depth(); ++k) guarded_.push_back(sp_.needs_guard(k));
  }

  Execution run() {
    if (sp_.depth() == 0) {
      visit();
    } else {
      run_level(0);
    }
    return std::move(result_);
  }

 private:
  struct Op {
    enum Kind { Const, Load, Bin } kind;
    T value{};
    int address = -1;
    BinOpKind bin = BinOpKind::Add;
  };

  void compile(const Expr& e) {
    if (const auto* c = e.as_constant()) {
      code_.push_back(Op{Op::Const, static_cast<T>(c->value), -1, BinOpKind::Add});
    } else if (const auto* a = e.as_access()) {
      const auto& buf = result_.buffers.at(a->buffer);
      addresses_.push_back(make_address(p_, *a, buf.shape));
      load_data_.push_back(&std::get<std::vector<T>>(buf.values));
      code_.push_back(Op{Op::Load, T{}, static_cast<int>(addresses_.size()) - 1, BinOpKind::Add});
    } else {
      const BinOp& b = *e.as_binop();
      compile(*b.left);
      compile(*b.right);
      code_.push_back(Op{Op::Bin, T{}, -1, b.kind});
    }
  }

  std::int64_t flat(const Address& a) const {
    std::int64_t f = a.constant;
    for (std::size_t k = 0; k < original_.size(); ++k) f += a.coeff[k] * original_[k];
    return f;
  }

  void run_level(int level) {
    const Iterator& loop = sp_.current_iterators()[level];
    const bool innermost = level == sp_.depth() - 1;
    if (!innermost) {
      for (std::int64_t v = loop.lower; v < loop.upper; ++v) {
        current_[level] = v;
        run_level(level + 1);
      }
      return;
    }
    const std::int64_t u = sp_.effective_unroll();
    if (u <= 1) {
      for (std::int64_t v = loop.lower; v < loop.upper; ++v) {
        current_[level] = v;
        visit();
      }
      return;
    }
    const std::int64_t main = sp_.main_trips();
    for (std::int64_t j = 0; j < main; ++j) {
      for (std::int64_t r = 0; r < u; ++r) {
        current_[level] = loop.lower + j * u + r;
        visit();
      }
    }
    for (std::int64_t v = loop.lower + main * u; v < loop.upper; ++v) {
      current_[level] = v;
      visit();
    }
  }

  void visit() {
    const auto& map = sp_.index_map();
    const auto& offset = sp_.index_offset();
    for (std::size_t k = 0; k < original_.size(); ++k) {
      std::int64_t v = offset(static_cast<Eigen::Index>(k));
      for (std::size_t j = 0; j < current_.size(); ++j) {
        v += map(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) * current_[j];
      }
      if (guarded_[k] && v >= p_.iterators[k].upper) return;
      original_[k] = v;
    }
    stack_.clear();
    for (const Op& op : code_) {
      switch (op.kind) {
        case Op::Const: stack_.push_back(op.value); break;
        case Op::Load:
          stack_.push_back((*load_data_[op.address])[flat(addresses_[op.address])]);
          break;
        case Op::Bin: {
          const T rhs = stack_.back();
          stack_.pop_back();
          stack_.back() = wrap_op(op.bin, stack_.back(), rhs);
          break;
        }
      }
    }
    const std::int64_t target = flat(store_);
    (*store_data_)[target] = stack_.back();
    ++result_.body_evaluations;
    if (options_.record_stores) result_.store_trace.push_back(target);
  }

  const ScheduledProgram& sp_;
  const Program& p_;
  InterpretOptions options_;
  Execution result_;
  std::vector<Op> code_;
  std::vector<Address> addresses_;
  std::vector<const std::vector<T>*> load_data_;
  Address store_;
  std::vector<T>* store_data_ = nullptr;
  std::vector<std::int64_t> original_;
  std::vector<std::int64_t> current_;
  std::vector<bool> guarded_;
  std::vector<T> stack_;
};

}  // namespace

Execution interpret(const ScheduledProgram& sp, const InterpretOptions& options) {
  switch (sp.base().dtype()) {
    case DataType::Int32: return Executor<std::int32_t>(sp, options).run();
    case DataType::Int64: return Executor<std::int64_t>(sp, options).run();
    case DataType::Float32: return Executor<float>(sp, options).run();
    case DataType::Float64: return Executor<double>(sp, options).run();
  }
  throw Error(ErrorCode::InvalidProgram, "unknown dtype");
}

Execution interpret(const Program& p, const InterpretOptions& options) {
  return interpret(ScheduledProgram(p), options);
}

}  // namespace unroll_tuner
