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

#include "unroll_tuner/ir.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "text_util.hpp"
#include "unroll_tuner/error.hpp"

namespace unroll_tuner {

std::string_view to_string(DataType dtype) {
  switch (dtype) {
    case DataType::Int32: return "int32";
    case DataType::Int64: return "int64";
    case DataType::Float32: return "float32";
    case DataType::Float64: return "float64";
  }
  return "?";
}

std::optional<DataType> parse_data_type(std::string_view text) {
  if (text == "int32") return DataType::Int32;
  if (text == "int64") return DataType::Int64;
  if (text == "float32") return DataType::Float32;
  if (text == "float64") return DataType::Float64;
  return std::nullopt;
}

std::string_view to_string(BinOpKind kind) {
  switch (kind) {
    case BinOpKind::Add: return "+";
    case BinOpKind::Sub: return "-";
    case BinOpKind::Mul: return "*";
    case BinOpKind::Div: return "/";
  }
  return "?";
}

std::string_view to_string(ViolationCode code) {
  switch (code) {
    case ViolationCode::DanglingIterator: return "dangling iterator";
    case ViolationCode::RankMismatch: return "rank mismatch";
    case ViolationCode::NonPositiveExtent: return "non-positive extent";
    case ViolationCode::DtypeConflict: return "dtype conflict";
    case ViolationCode::UnknownBuffer: return "unknown buffer";
    case ViolationCode::NegativeIndex: return "negative index";
    case ViolationCode::DuplicateName: return "duplicate name";
    case ViolationCode::LevelMismatch: return "level mismatch";
    case ViolationCode::OutputNotStore: return "output not a store";
    case ViolationCode::UnknownLevel: return "UnknownLevel";
    case ViolationCode::FactorNotPowerOfTwo: return "FactorNotPowerOfTwo";
    case ViolationCode::FactorOutOfRange: return "FactorOutOfRange";
    case ViolationCode::DuplicateUnroll: return "at most one Unroll";
    case ViolationCode::DuplicateParallelize: return "at most one Parallelize";
    case ViolationCode::NonAdjacentLevels: return "NonAdjacentLevels";
    case ViolationCode::DepthExceedsMax: return "DepthExceedsMax";
  }
  return "?";
}

Expr::Expr(BinOpKind kind, Expr left, Expr right)
    : node_(std::make_shared<const Node>(
          BinOp{kind, std::make_shared<const Expr>(std::move(left)),
                std::make_shared<const Expr>(std::move(right))})) {}

bool operator==(const Expr& a, const Expr& b) {
  if (a.node_ == b.node_) return true;
  if (a.node_->index() != b.node_->index()) return false;
  if (const auto* ca = a.as_constant()) return *ca == *b.as_constant();
  if (const auto* aa = a.as_access()) return *aa == *b.as_access();
  const auto* x = a.as_binop();
  const auto* y = b.as_binop();
  return x->kind == y->kind && *x->left == *y->left && *x->right == *y->right;
}

Expr constant(double value, DataType dtype) { return Expr(Constant{value, dtype}); }

Expr load(std::string buffer, DataType dtype, std::vector<IndexExpr> indices) {
  return Expr(BufferAccess{std::move(buffer), dtype, std::move(indices), AccessMode::Load});
}

IndexExpr idx(std::string iterator, std::int64_t offset) {
  return IndexExpr{{std::move(iterator)}, offset};
}

const Iterator* Program::find_iterator(std::string_view name) const {
  for (const auto& it : iterators) {
    if (it.name == name) return &it;
  }
  return nullptr;
}

bool ValidationReport::has(ViolationCode code) const {
  return std::any_of(violations.begin(), violations.end(),
                     [code](const Violation& v) { return v.code == code; });
}

std::string ValidationReport::summary() const {
  if (ok()) return "ok";
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += std::string(to_string(v.code)) + ": " + v.message;
  }
  return out;
}

namespace {

template <typename F>
void visit_leaves(const Expr& e, F&& f) {
  if (const auto* b = e.as_binop()) {
    visit_leaves(*b->left, f);
    visit_leaves(*b->right, f);
  } else {
    f(e);
  }
}

template <typename F>
void visit_binops(const Expr& e, F&& f) {
  if (const auto* b = e.as_binop()) {
    f(*b);
    visit_binops(*b->left, f);
    visit_binops(*b->right, f);
  }
}

void check_access(const Program& p, const BufferAccess& a,
                  const std::map<std::string, BufferDecl>& decls, ValidationReport& report) {
  const auto decl = decls.find(a.buffer);
  if (decl == decls.end()) {
    report.violations.push_back({ViolationCode::UnknownBuffer, "buffer '" + a.buffer + "'"});
  } else {
    if (static_cast<int>(a.indices.size()) != decl->second.rank) {
      report.violations.push_back(
          {ViolationCode::RankMismatch, "access to '" + a.buffer + "' has " +
                                            std::to_string(a.indices.size()) + " indices, rank is " +
                                            std::to_string(decl->second.rank)});
    }
    if (decl->second.dtype != a.dtype) {
      report.violations.push_back({ViolationCode::DtypeConflict,
                                   "access to '" + a.buffer + "' disagrees with its declaration"});
    }
  }
  if (a.dtype != p.dtype()) {
    report.violations.push_back(
        {ViolationCode::DtypeConflict, "access to '" + a.buffer + "' is " +
                                           std::string(to_string(a.dtype)) + ", program is " +
                                           std::string(to_string(p.dtype()))});
  }
  for (const auto& index : a.indices) {
    std::int64_t min_value = index.offset;
    bool resolved = true;
    for (const auto& name : index.iterators) {
      const Iterator* it = p.find_iterator(name);
      if (it == nullptr) {
        report.violations.push_back({ViolationCode::DanglingIterator,
                                     "iterator '" + name + "' in access to '" + a.buffer + "'"});
        resolved = false;
      } else {
        min_value += it->lower;
      }
    }
    if (resolved && min_value < 0) {
      report.violations.push_back(
          {ViolationCode::NegativeIndex, "access to '" + a.buffer + "' reaches index " +
                                             std::to_string(min_value)});
    }
  }
}

}  // namespace

ValidationReport validate_program(const Program& p) {
  ValidationReport report;
  std::set<std::string> names;
  for (std::size_t k = 0; k < p.iterators.size(); ++k) {
    const Iterator& it = p.iterators[k];
    if (!names.insert(it.name).second) {
      report.violations.push_back({ViolationCode::DuplicateName, "iterator '" + it.name + "'"});
    }
    if (it.upper <= it.lower) {
      report.violations.push_back(
          {ViolationCode::NonPositiveExtent,
           "iterator '" + it.name + "' has extent " + std::to_string(it.upper - it.lower)});
    }
    if (it.level != static_cast<int>(k)) {
      report.violations.push_back({ViolationCode::LevelMismatch,
                                   "iterator '" + it.name + "' at position " + std::to_string(k) +
                                       " declares level " + std::to_string(it.level)});
    }
  }

  std::map<std::string, BufferDecl> decls;
  for (const auto& in : p.inputs) {
    if (!decls.emplace(in.name, in).second) {
      report.violations.push_back({ViolationCode::DuplicateName, "buffer '" + in.name + "'"});
    }
    if (in.dtype != p.dtype()) {
      report.violations.push_back(
          {ViolationCode::DtypeConflict, "input '" + in.name + "' is " +
                                             std::string(to_string(in.dtype)) + ", program is " +
                                             std::string(to_string(p.dtype()))});
    }
  }
  if (decls.count(p.output.buffer) != 0) {
    report.violations.push_back(
        {ViolationCode::DuplicateName, "output '" + p.output.buffer + "' is also an input"});
  }
  decls[p.output.buffer] =
      BufferDecl{p.output.buffer, static_cast<int>(p.output.indices.size()), p.output.dtype};

  if (p.output.mode != AccessMode::Store) {
    report.violations.push_back({ViolationCode::OutputNotStore, p.output.buffer});
  }
  check_access(p, p.output, decls, report);

  visit_leaves(p.body, [&](const Expr& leaf) {
    if (const auto* c = leaf.as_constant()) {
      if (c->dtype != p.dtype()) {
        report.violations.push_back({ViolationCode::DtypeConflict,
                                     "constant " + format_double(c->value) + " is " +
                                         std::string(to_string(c->dtype))});
      } else if (is_integral(c->dtype) && c->value != std::trunc(c->value)) {
        report.violations.push_back({ViolationCode::DtypeConflict,
                                     "non-integral constant " + format_double(c->value)});
      }
    } else if (const auto* a = leaf.as_access()) {
      if (a->mode != AccessMode::Load) {
        report.violations.push_back(
            {ViolationCode::DtypeConflict, "store access inside the body: " + a->buffer});
      }
      check_access(p, *a, decls, report);
    }
  });
  return report;
}

OpHistogram op_histogram(const Program& p) {
  OpHistogram h = OpHistogram::Zero();
  visit_binops(p.body, [&](const BinOp& b) {
    // Operation type follows the operands; validated programs are single-typed.
    h(static_cast<int>(b.kind), static_cast<int>(p.dtype())) += 1;
  });
  visit_leaves(p.body, [&](const Expr& leaf) {
    if (const auto* a = leaf.as_access()) {
      h(static_cast<int>(OpKind::Load), static_cast<int>(a->dtype)) += 1;
    }
  });
  h(static_cast<int>(OpKind::Store), static_cast<int>(p.output.dtype)) += 1;
  return h;
}

std::int64_t innermost_trip_count(const Program& p) {
  std::int64_t trips = 1;
  for (const auto& it : p.iterators) trips *= it.extent();
  return trips;
}

std::int64_t leaf_count(const Expr& e) {
  std::int64_t n = 0;
  visit_leaves(e, [&](const Expr&) { ++n; });
  return n;
}

std::vector<BufferAccess> load_accesses(const Expr& e) {
  std::vector<BufferAccess> out;
  visit_leaves(e, [&](const Expr& leaf) {
    if (const auto* a = leaf.as_access()) out.push_back(*a);
  });
  return out;
}

std::vector<std::string> access_iterators(const BufferAccess& a) {
  std::vector<std::string> out;
  for (const auto& index : a.indices) {
    for (const auto& name : index.iterators) {
      if (std::find(out.begin(), out.end(), name) == out.end()) out.push_back(name);
    }
  }
  return out;
}

std::map<std::string, std::vector<std::int64_t>> buffer_shapes(const Program& p) {
  std::map<std::string, std::vector<std::int64_t>> shapes;
  const auto account = [&](const BufferAccess& a) {
    auto& shape = shapes[a.buffer];
    if (shape.size() < a.indices.size()) shape.resize(a.indices.size(), 1);
    for (std::size_t d = 0; d < a.indices.size(); ++d) {
      std::int64_t max_value = a.indices[d].offset;
      for (const auto& name : a.indices[d].iterators) {
        const Iterator* it = p.find_iterator(name);
        if (it != nullptr) max_value += it->upper - 1;
      }
      shape[d] = std::max(shape[d], max_value + 1);
    }
  };
  for (const auto& in : p.inputs) shapes[in.name].assign(static_cast<std::size_t>(in.rank), 1);
  account(p.output);
  for (const auto& a : load_accesses(p.body)) account(a);
  return shapes;
}

// ---------------------------------------------------------------------------
// Text form

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

namespace {

std::string index_text(const IndexExpr& index) {
  std::string out;
  for (const auto& name : index.iterators) {
    if (!out.empty()) out += '+';
    out += name;
  }
  if (index.offset > 0) {
    out += (out.empty() ? "" : "+") + std::to_string(index.offset);
  } else if (index.offset < 0) {
    out += std::to_string(index.offset);
  } else if (out.empty()) {
    out = "0";
  }
  return out;
}

int precedence(BinOpKind kind) {
  return (kind == BinOpKind::Add || kind == BinOpKind::Sub) ? 1 : 2;
}

void expr_text(const Expr& e, std::string& out) {
  if (const auto* c = e.as_constant()) {
    out += format_double(c->value);
  } else if (const auto* a = e.as_access()) {
    out += to_text(*a);
  } else {
    const BinOp& b = *e.as_binop();
    const int prec = precedence(b.kind);
    const auto child = [&](const Expr& sub, bool right) {
      const auto* sb = sub.as_binop();
      // Left-associative: a right child of equal precedence needs parentheses
      // to keep the tree shape through a round trip.
      const bool paren = sb != nullptr && (precedence(sb->kind) < prec ||
                                           (right && precedence(sb->kind) == prec));
      if (paren) out += '(';
      expr_text(sub, out);
      if (paren) out += ')';
    };
    child(*b.left, false);
    out += ' ';
    out += to_string(b.kind);
    out += ' ';
    child(*b.right, true);
  }
}

class ExprParser {
 public:
  ExprParser(std::string_view text, int line) : text_(text), line_(line) {}

  struct RawAccess {
    std::string buffer;
    std::vector<IndexExpr> indices;
  };

  // Constants and accesses get their dtype later, once declarations are known.
  Expr parse_expression(DataType dtype) {
    dtype_ = dtype;
    Expr e = parse_sum();
    skip_space();
    if (pos_ != text_.size()) fail("unexpected '" + std::string(1, text_[pos_]) + "'");
    return e;
  }

  RawAccess parse_access_only() {
    RawAccess a = parse_access();
    skip_space();
    if (pos_ != text_.size()) fail("trailing text after access");
    return a;
  }

  std::vector<RawAccess> accesses;
  std::map<std::string, DataType>* buffer_types = nullptr;

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(line_) + ": " + what + " in '" + std::string(text_) + "'");
  }

  void skip_space() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t')) ++pos_;
  }

  bool peek(char c) {
    skip_space();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  void expect(char c) {
    if (!peek(c)) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string identifier() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_')) {
      ++pos_;
    }
    std::string_view id = text_.substr(start, pos_ - start);
    if (!detail::is_identifier(id)) fail("expected identifier");
    return std::string(id);
  }

  std::int64_t integer() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    const auto v = detail::parse_int(text_.substr(start, pos_ - start));
    if (!v) fail("expected integer");
    return *v;
  }

  double number(bool negative) {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' ||
            text_[pos_] == 'e' || text_[pos_] == 'E' ||
            ((text_[pos_] == '-' || text_[pos_] == '+') && pos_ > start &&
             (text_[pos_ - 1] == 'e' || text_[pos_ - 1] == 'E')))) {
      ++pos_;
    }
    const auto v = detail::parse_double(text_.substr(start, pos_ - start));
    if (!v) fail("expected number");
    return negative ? -*v : *v;
  }

  IndexExpr parse_index() {
    IndexExpr index;
    int sign = 1;
    for (;;) {
      skip_space();
      if (pos_ >= text_.size()) fail("unterminated index");
      const char c = text_[pos_];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        index.offset += sign * integer();
      } else {
        if (sign < 0) fail("negated iterator in index");
        index.iterators.push_back(identifier());
      }
      if (peek('+')) {
        ++pos_;
        sign = 1;
      } else if (peek('-')) {
        ++pos_;
        sign = -1;
      } else {
        break;
      }
    }
    return index;
  }

  RawAccess parse_access() {
    RawAccess a;
    a.buffer = identifier();
    expect('[');
    a.indices.push_back(parse_index());
    while (peek(',')) {
      ++pos_;
      a.indices.push_back(parse_index());
    }
    expect(']');
    return a;
  }

  Expr parse_sum() {
    Expr e = parse_product();
    for (;;) {
      if (peek('+')) {
        ++pos_;
        e = Expr(BinOpKind::Add, e, parse_product());
      } else if (peek('-')) {
        ++pos_;
        e = Expr(BinOpKind::Sub, e, parse_product());
      } else {
        return e;
      }
    }
  }

  Expr parse_product() {
    Expr e = parse_factor();
    for (;;) {
      if (peek('*')) {
        ++pos_;
        e = Expr(BinOpKind::Mul, e, parse_factor());
      } else if (peek('/')) {
        ++pos_;
        e = Expr(BinOpKind::Div, e, parse_factor());
      } else {
        return e;
      }
    }
  }

  Expr parse_factor() {
    skip_space();
    if (pos_ >= text_.size()) fail("unexpected end of expression");
    const char c = text_[pos_];
    if (c == '(') {
      ++pos_;
      Expr e = parse_sum();
      expect(')');
      return e;
    }
    if (c == '-') {
      ++pos_;
      return constant(number(true), dtype_);
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
      return constant(number(false), dtype_);
    }
    RawAccess raw = parse_access();
    DataType dt = dtype_;
    if (buffer_types != nullptr) {
      const auto found = buffer_types->find(raw.buffer);
      if (found != buffer_types->end()) dt = found->second;
    }
    return load(raw.buffer, dt, std::move(raw.indices));
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_;
  DataType dtype_ = DataType::Float64;
};

}  // namespace

std::string to_text(const BufferAccess& a) {
  std::string out = a.buffer + "[";
  for (std::size_t d = 0; d < a.indices.size(); ++d) {
    if (d != 0) out += ", ";
    out += index_text(a.indices[d]);
  }
  out += "]";
  return out;
}

std::string to_text(const Expr& e) {
  std::string out;
  expr_text(e, out);
  return out;
}

std::string to_text(const Program& p) {
  std::ostringstream os;
  os << "program " << p.name << '\n';
  for (const auto& it : p.iterators) {
    os << "iter " << it.name << ' ' << it.lower << ' ' << it.upper << '\n';
  }
  for (const auto& in : p.inputs) {
    os << "input " << in.name << ' ' << in.rank << ' ' << to_string(in.dtype) << '\n';
  }
  os << "output " << to_text(p.output) << ' ' << to_string(p.output.dtype) << '\n';
  os << "body " << to_text(p.body) << '\n';
  return os.str();
}

Program parse_program(std::string_view text) {
  Program p;
  bool have_name = false;
  std::optional<std::pair<std::string, int>> body_text;
  std::optional<std::pair<std::string, int>> output_text;
  std::optional<DataType> output_dtype;

  const auto lines = detail::logical_lines(text);
  for (std::size_t n = 0; n < lines.size(); ++n) {
    const std::string_view line = lines[n];
    const int line_no = static_cast<int>(n) + 1;
    if (line.empty()) continue;
    const auto tokens = detail::split_ws(line);
    const std::string_view directive = tokens[0];
    const auto fail = [&](const std::string& what) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line_no) + ": " + what);
    };
    const auto rest = [&]() {
      return std::string(detail::trim(line.substr(directive.size())));
    };

    if (directive == "program") {
      if (tokens.size() != 2 || !detail::is_identifier(tokens[1])) fail("expected 'program <name>'");
      if (have_name) fail("duplicate 'program' directive");
      p.name = std::string(tokens[1]);
      have_name = true;
    } else if (directive == "iter") {
      if (tokens.size() != 4 || !detail::is_identifier(tokens[1])) {
        fail("expected 'iter <name> <lower> <upper>'");
      }
      const auto lo = detail::parse_int(tokens[2]);
      const auto hi = detail::parse_int(tokens[3]);
      if (!lo || !hi) fail("iterator bounds must be integers");
      p.iterators.push_back(
          Iterator{std::string(tokens[1]), *lo, *hi, static_cast<int>(p.iterators.size())});
    } else if (directive == "input") {
      if (tokens.size() != 4 || !detail::is_identifier(tokens[1])) {
        fail("expected 'input <buffer> <rank> <dtype>'");
      }
      const auto rank = detail::parse_int(tokens[2]);
      const auto dt = parse_data_type(tokens[3]);
      if (!rank || *rank < 1) fail("input rank must be a positive integer");
      if (!dt) fail("unknown dtype '" + std::string(tokens[3]) + "'");
      p.inputs.push_back(BufferDecl{std::string(tokens[1]), static_cast<int>(*rank), *dt});
    } else if (directive == "output") {
      if (output_text) fail("duplicate 'output' directive");
      std::string body = rest();
      const std::size_t close = body.rfind(']');
      if (close == std::string::npos) fail("expected 'output <buffer>[...]'");
      const std::string tail(detail::trim(std::string_view(body).substr(close + 1)));
      if (!tail.empty()) {
        output_dtype = parse_data_type(tail);
        if (!output_dtype) fail("unknown dtype '" + tail + "'");
      }
      output_text = {body.substr(0, close + 1), line_no};
    } else if (directive == "body") {
      if (body_text) fail("duplicate 'body' directive");
      body_text = {rest(), line_no};
    } else {
      fail("unknown directive '" + std::string(directive) + "'");
    }
  }
  if (!have_name) throw Error(ErrorCode::ParseError, "missing 'program' directive");
  if (!output_text) throw Error(ErrorCode::ParseError, "missing 'output' directive");
  if (!body_text) throw Error(ErrorCode::ParseError, "missing 'body' directive");

  DataType dtype = DataType::Float64;
  if (output_dtype) {
    dtype = *output_dtype;
  } else if (!p.inputs.empty()) {
    dtype = p.inputs.front().dtype;
  }

  ExprParser out_parser(output_text->first, output_text->second);
  auto raw_out = out_parser.parse_access_only();
  p.output = BufferAccess{raw_out.buffer, dtype, std::move(raw_out.indices), AccessMode::Store};

  std::map<std::string, DataType> types;
  for (const auto& in : p.inputs) types[in.name] = in.dtype;
  types[p.output.buffer] = dtype;
  ExprParser body_parser(body_text->first, body_text->second);
  body_parser.buffer_types = &types;
  p.body = body_parser.parse_expression(dtype);
  return p;
}

}  // namespace unroll_tuner
