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

#ifndef UNROLL_TUNER_IR_HPP_
#define UNROLL_TUNER_IR_HPP_

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>

namespace unroll_tuner {

enum class DataType { Int32 = 0, Int64 = 1, Float32 = 2, Float64 = 3 };

inline constexpr int kNumDataTypes = 4;

std::string_view to_string(DataType dtype);
std::optional<DataType> parse_data_type(std::string_view text);
inline bool is_integral(DataType dtype) {
  return dtype == DataType::Int32 || dtype == DataType::Int64;
}

// A loop level. Bounds are constant; `upper` is exclusive.
struct Iterator {
  std::string name;
  std::int64_t lower = 0;
  std::int64_t upper = 1;
  int level = 0;

  std::int64_t extent() const { return upper - lower; }
  friend bool operator==(const Iterator&, const Iterator&) = default;
};

// One subscript of an access: a sum of iterators plus a constant offset,
// e.g. `x+2` or `y1+k_y`.
struct IndexExpr {
  std::vector<std::string> iterators;
  std::int64_t offset = 0;

  friend bool operator==(const IndexExpr&, const IndexExpr&) = default;
};

enum class AccessMode { Load, Store };

struct BufferAccess {
  std::string buffer;
  DataType dtype = DataType::Float64;
  std::vector<IndexExpr> indices;
  AccessMode mode = AccessMode::Load;

  friend bool operator==(const BufferAccess&, const BufferAccess&) = default;
};

enum class BinOpKind { Add = 0, Sub = 1, Mul = 2, Div = 3 };

std::string_view to_string(BinOpKind kind);

class Expr;

struct Constant {
  double value = 0.0;
  DataType dtype = DataType::Float64;

  friend bool operator==(const Constant&, const Constant&) = default;
};

struct BinOp {
  BinOpKind kind = BinOpKind::Add;
  std::shared_ptr<const Expr> left;
  std::shared_ptr<const Expr> right;
};

// Immutable binary expression tree. Copies share structure.
class Expr {
 public:
  using Node = std::variant<Constant, BufferAccess, BinOp>;

  Expr() : node_(std::make_shared<const Node>(Constant{})) {}
  Expr(Constant c) : node_(std::make_shared<const Node>(std::move(c))) {}
  Expr(BufferAccess a) : node_(std::make_shared<const Node>(std::move(a))) {}
  Expr(BinOpKind kind, Expr left, Expr right);

  const Node& node() const { return *node_; }

  const Constant* as_constant() const { return std::get_if<Constant>(node_.get()); }
  const BufferAccess* as_access() const { return std::get_if<BufferAccess>(node_.get()); }
  const BinOp* as_binop() const { return std::get_if<BinOp>(node_.get()); }

  friend bool operator==(const Expr& a, const Expr& b);

 private:
  std::shared_ptr<const Node> node_;
};

Expr constant(double value, DataType dtype);
Expr load(std::string buffer, DataType dtype, std::vector<IndexExpr> indices);
IndexExpr idx(std::string iterator, std::int64_t offset = 0);

inline Expr operator+(Expr a, Expr b) { return Expr(BinOpKind::Add, std::move(a), std::move(b)); }
inline Expr operator-(Expr a, Expr b) { return Expr(BinOpKind::Sub, std::move(a), std::move(b)); }
inline Expr operator*(Expr a, Expr b) { return Expr(BinOpKind::Mul, std::move(a), std::move(b)); }
inline Expr operator/(Expr a, Expr b) { return Expr(BinOpKind::Div, std::move(a), std::move(b)); }

struct BufferDecl {
  std::string name;
  int rank = 1;
  DataType dtype = DataType::Float64;

  friend bool operator==(const BufferDecl&, const BufferDecl&) = default;
};

// A single computation: one perfectly nested loop nest whose innermost body
// stores `body` into `output`. The output buffer may also be loaded by the
// body (accumulation, as in matrix multiplication).
struct Program {
  std::string name;
  std::vector<Iterator> iterators;  // outer to inner
  Expr body;
  BufferAccess output;
  std::vector<BufferDecl> inputs;

  DataType dtype() const { return output.dtype; }
  int depth() const { return static_cast<int>(iterators.size()); }
  const Iterator* find_iterator(std::string_view name) const;
};

enum class ViolationCode {
  DanglingIterator,
  RankMismatch,
  NonPositiveExtent,
  DtypeConflict,
  UnknownBuffer,
  NegativeIndex,
  DuplicateName,
  LevelMismatch,
  OutputNotStore,
  // schedule-level
  UnknownLevel,
  FactorNotPowerOfTwo,
  FactorOutOfRange,
  DuplicateUnroll,
  DuplicateParallelize,
  NonAdjacentLevels,
  DepthExceedsMax,
};

std::string_view to_string(ViolationCode code);

struct Violation {
  ViolationCode code;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(ViolationCode code) const;
  std::string summary() const;
};

ValidationReport validate_program(const Program& p);

// Rows of the op histogram.
enum class OpKind { Add = 0, Sub = 1, Mul = 2, Div = 3, Load = 4, Store = 5 };
inline constexpr int kNumOpKinds = 6;

// Static per-innermost-iteration counts; rows are OpKind, columns DataType.
using OpHistogram = Eigen::Matrix<std::int64_t, kNumOpKinds, kNumDataTypes>;

OpHistogram op_histogram(const Program& p);
inline std::int64_t op_count(const OpHistogram& h, OpKind kind) {
  return h.row(static_cast<int>(kind)).sum();
}

std::int64_t innermost_trip_count(const Program& p);

// Number of leaves (constants and accesses) of the body tree.
std::int64_t leaf_count(const Expr& e);

// Load accesses of the body in left-to-right tree order.
std::vector<BufferAccess> load_accesses(const Expr& e);

// Names of the iterators used by an access, without duplicates, in first-use
// order.
std::vector<std::string> access_iterators(const BufferAccess& a);

// Extent of every dimension of every buffer touched by the program, derived
// from the iteration domain (max index + 1). Requires a valid program.
std::map<std::string, std::vector<std::int64_t>> buffer_shapes(const Program& p);

// Line-oriented text form:
//   program <name>
//   iter <name> <lower> <upper>        (outer to inner)
//   input <buffer> <rank> <dtype>
//   output <buffer>[<index>, ...] [<dtype>]
//   body <expression>
Program parse_program(std::string_view text);
std::string to_text(const Program& p);

std::string to_text(const Expr& e);
std::string to_text(const BufferAccess& a);

// Shortest decimal text that round-trips to the same double.
std::string format_double(double value);

}  // namespace unroll_tuner

#endif  // UNROLL_TUNER_IR_HPP_
