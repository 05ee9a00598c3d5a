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

#include "unroll_tuner/schedule.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "text_util.hpp"
#include "unroll_tuner/error.hpp"

namespace unroll_tuner {

bool is_unroll_factor(std::int64_t u) { return unroll_class_index(u) >= 0; }

int unroll_class_index(std::int64_t u) {
  for (std::size_t k = 0; k < kUnrollFactors.size(); ++k) {
    if (kUnrollFactors[k] == u) return static_cast<int>(k);
  }
  return -1;
}

std::int64_t clamp_unroll_factor(std::int64_t u, std::int64_t extent) {
  if (u <= 0 || u <= extent) return u;
  std::int64_t p = 1;
  while (p * 2 <= extent) p *= 2;
  return p;
}

namespace {

void check_level(const ScheduledProgram& sp, int level) {
  if (level < 0 || level >= sp.depth()) {
    throw Error(ErrorCode::UnknownLevel, "level " + std::to_string(level) + " (depth " +
                                             std::to_string(sp.depth()) + ")");
  }
}

void check_factor(std::int64_t factor) {
  if (factor < 1 || !is_power_of_two(factor)) {
    throw Error(ErrorCode::FactorNotPowerOfTwo, "factor " + std::to_string(factor));
  }
  if (factor < kMinSplitFactor || factor > kMaxSplitFactor) {
    throw Error(ErrorCode::FactorOutOfRange, "factor " + std::to_string(factor) + " outside [" +
                                                 std::to_string(kMinSplitFactor) + ", " +
                                                 std::to_string(kMaxSplitFactor) + "]");
  }
}

}  // namespace

// In-place loop surgery shared by the transforms.
class ScheduleBuilder {
 public:
  static void renumber(ScheduledProgram& sp) {
    for (std::size_t k = 0; k < sp.loops_.size(); ++k) sp.loops_[k].level = static_cast<int>(k);
  }

  static void split(ScheduledProgram& sp, int level, std::int64_t factor, std::string outer,
                    std::string inner, LoopRole outer_role, LoopRole inner_role) {
    const Iterator loop = sp.loops_[level];
    const LoopOrigin origin = sp.origins_[level];
    const std::int64_t n = loop.extent();
    if (outer.empty()) outer = loop.name + "_o";
    if (inner.empty()) inner = loop.name + "_i";

    const auto rows = sp.index_map_.rows();
    const auto cols = sp.index_map_.cols();
    IndexMatrix map(rows, cols + 1);
    map.leftCols(level) = sp.index_map_.leftCols(level);
    map.col(level) = factor * sp.index_map_.col(level);
    map.col(level + 1) = sp.index_map_.col(level);
    map.rightCols(cols - level - 1) = sp.index_map_.rightCols(cols - level - 1);
    sp.index_offset_ += loop.lower * sp.index_map_.col(level);
    sp.index_map_ = std::move(map);

    sp.loops_[level] = Iterator{std::move(outer), 0, (n + factor - 1) / factor, level};
    sp.loops_.insert(sp.loops_.begin() + level + 1, Iterator{std::move(inner), 0, factor, level + 1});
    sp.origins_[level] = LoopOrigin{outer_role, factor, origin.parallel};
    sp.origins_.insert(sp.origins_.begin() + level + 1, LoopOrigin{inner_role, factor, false});
    renumber(sp);
  }

  static void permute(ScheduledProgram& sp, const std::vector<int>& order) {
    // order[k] = old position of the loop that ends up at position k
    std::vector<Iterator> loops;
    std::vector<LoopOrigin> origins;
    IndexMatrix map(sp.index_map_.rows(), sp.index_map_.cols());
    for (std::size_t k = 0; k < order.size(); ++k) {
      loops.push_back(sp.loops_[order[k]]);
      origins.push_back(sp.origins_[order[k]]);
      map.col(static_cast<Eigen::Index>(k)) = sp.index_map_.col(order[k]);
    }
    sp.loops_ = std::move(loops);
    sp.origins_ = std::move(origins);
    sp.index_map_ = std::move(map);
    renumber(sp);
  }

  static void swap(ScheduledProgram& sp, int a, int b) {
    std::vector<int> order(sp.loops_.size());
    std::iota(order.begin(), order.end(), 0);
    std::swap(order[a], order[b]);
    permute(sp, order);
  }

  static void tile(ScheduledProgram& sp, std::span<const int> levels,
                   std::span<const std::int64_t> factors) {
    for (std::size_t k = 0; k < levels.size(); ++k) {
      check_level(sp, levels[k]);
      check_factor(factors[k]);
      if (k > 0 && levels[k] != levels[k - 1] + 1) {
        throw Error(ErrorCode::NonAdjacentLevels, "tiled levels must be consecutive");
      }
    }
    const int first = levels.front();
    const int count = static_cast<int>(levels.size());
    // Split from the innermost tiled level outwards so indices stay valid.
    for (int k = count - 1; k >= 0; --k) {
      split(sp, first + k, factors[k], "", "", LoopRole::TileOuter, LoopRole::TileInner);
    }
    // Now: a_o a_i b_o b_i ...; bring all outer loops in front of the inner ones.
    std::vector<int> order(sp.loops_.size());
    std::iota(order.begin(), order.end(), 0);
    for (int k = 0; k < count; ++k) {
      order[first + k] = first + 2 * k;
      order[first + count + k] = first + 2 * k + 1;
    }
    permute(sp, order);
  }
};

ScheduledProgram::ScheduledProgram(Program base) : base_(std::move(base)) {
  loops_ = base_.iterators;
  ScheduleBuilder::renumber(*this);
  origins_.assign(loops_.size(), LoopOrigin{});
  const auto n = static_cast<Eigen::Index>(loops_.size());
  index_map_ = IndexMatrix::Identity(n, n);
  index_offset_ = IndexVector::Zero(n);
}

std::int64_t ScheduledProgram::effective_unroll() const {
  if (unroll_ == 0 || loops_.empty()) return 0;
  return clamp_unroll_factor(unroll_, loops_.back().extent());
}

std::int64_t ScheduledProgram::main_trips() const {
  const std::int64_t n = loops_.empty() ? 1 : loops_.back().extent();
  const std::int64_t u = effective_unroll();
  return u == 0 ? n : n / u;
}

std::int64_t ScheduledProgram::remainder_extent() const {
  const std::int64_t u = effective_unroll();
  if (u == 0 || loops_.empty()) return 0;
  return loops_.back().extent() % u;
}

std::optional<int> ScheduledProgram::parallel_level() const {
  for (std::size_t k = 0; k < origins_.size(); ++k) {
    if (origins_[k].parallel) return static_cast<int>(k);
  }
  return std::nullopt;
}

bool ScheduledProgram::interchange_applied() const {
  return std::any_of(applied_.begin(), applied_.end(),
                     [](const Transform& t) { return std::holds_alternative<Interchange>(t); });
}

bool ScheduledProgram::needs_guard(int base_level) const {
  std::int64_t max_value = index_offset_(base_level);
  for (Eigen::Index j = 0; j < index_map_.cols(); ++j) {
    max_value += index_map_(base_level, j) * (loops_[j].upper - 1);
  }
  return max_value > base_.iterators[base_level].upper - 1;
}

bool ScheduledProgram::needs_any_guard() const {
  for (int k = 0; k < base_.depth(); ++k) {
    if (needs_guard(k)) return true;
  }
  return false;
}

std::int64_t ScheduledProgram::trip_count() const {
  std::int64_t trips = 1;
  for (const auto& loop : loops_) trips *= loop.extent();
  return trips;
}

ScheduledProgram apply_transform(const ScheduledProgram& sp, const Transform& t) {
  if (const auto* u = std::get_if<Unroll>(&t)) return apply_unroll(sp, u->factor);

  ScheduledProgram out = sp;
  if (const auto* s = std::get_if<Split>(&t)) {
    check_level(out, s->level);
    check_factor(s->factor);
    ScheduleBuilder::split(out, s->level, s->factor, s->outer_name, s->inner_name,
                           LoopRole::SplitOuter, LoopRole::SplitInner);
  } else if (const auto* x = std::get_if<Interchange>(&t)) {
    check_level(out, x->level_a);
    check_level(out, x->level_b);
    ScheduleBuilder::swap(out, x->level_a, x->level_b);
  } else if (const auto* t2 = std::get_if<Tile2>(&t)) {
    const std::array<int, 2> levels{t2->level_a, t2->level_b};
    const std::array<std::int64_t, 2> factors{t2->factor_a, t2->factor_b};
    ScheduleBuilder::tile(out, levels, factors);
  } else if (const auto* t3 = std::get_if<Tile3>(&t)) {
    const std::array<int, 3> levels{t3->level_a, t3->level_b, t3->level_c};
    const std::array<std::int64_t, 3> factors{t3->factor_a, t3->factor_b, t3->factor_c};
    ScheduleBuilder::tile(out, levels, factors);
  } else if (const auto* p = std::get_if<Parallelize>(&t)) {
    check_level(out, p->level);
    if (out.parallel_level()) {
      throw Error(ErrorCode::DuplicateTransform, "at most one Parallelize per schedule");
    }
    out.origins_[p->level].parallel = true;
  }
  out.applied_.push_back(t);
  return out;
}

ScheduledProgram apply_unroll(const ScheduledProgram& sp, std::int64_t u) {
  if (!is_unroll_factor(u)) {
    throw Error(ErrorCode::InvalidFactor,
                "unroll factor " + std::to_string(u) + " not in {0,2,4,8,16,32,64}");
  }
  if (u == 0) return sp;
  if (sp.unroll_ != 0) throw Error(ErrorCode::DuplicateTransform, "at most one Unroll per schedule");
  ScheduledProgram out = sp;
  out.unroll_ = u;
  out.applied_.push_back(Unroll{u});
  const std::int64_t extent = out.loops_.empty() ? 1 : out.loops_.back().extent();
  if (u > extent) {
    warn("unroll factor " + std::to_string(u) + " exceeds innermost extent " +
         std::to_string(extent) + "; clamped to " + std::to_string(out.effective_unroll()));
  }
  return out;
}

ScheduledProgram merge_split(const ScheduledProgram& sp, int level) {
  if (sp.applied_.empty() || !std::holds_alternative<Split>(sp.applied_.back())) {
    throw Error(ErrorCode::InvalidConfig, "merge_split needs a Split as the last transform");
  }
  const int split_level = std::get<Split>(sp.applied_.back()).level;
  if (level != split_level || level + 1 >= sp.depth()) {
    throw Error(ErrorCode::UnknownLevel, "no split outer loop at level " + std::to_string(level));
  }
  // Replaying without the last transform restores the exact pre-split state.
  std::vector<Transform> rest(sp.applied_.begin(), sp.applied_.end() - 1);
  return schedule(sp.base_, rest);
}

ScheduledProgram schedule(const Program& p, std::span<const Transform> transforms) {
  ScheduledProgram sp(p);
  for (const auto& t : transforms) sp = apply_transform(sp, t);
  return sp;
}

ScheduledProgram without_unroll(const ScheduledProgram& sp) {
  std::vector<Transform> kept;
  for (const auto& t : sp.applied()) {
    if (!std::holds_alternative<Unroll>(t)) kept.push_back(t);
  }
  return schedule(sp.base(), kept);
}

ValidationReport validate_schedule(const Program& p, std::span<const Transform> transforms) {
  ValidationReport report = validate_program(p);
  if (!report.ok()) return report;

  ScheduledProgram sp(p);
  bool seen_unroll = false;
  bool seen_parallel = false;
  for (std::size_t n = 0; n < transforms.size(); ++n) {
    const Transform& t = transforms[n];
    const std::string where = "transform " + std::to_string(n) + " (" + to_text(t) + ")";
    if (const auto* u = std::get_if<Unroll>(&t)) {
      if (seen_unroll) {
        report.violations.push_back({ViolationCode::DuplicateUnroll, where});
        continue;
      }
      seen_unroll = true;
      if (u->factor != 0 && !is_power_of_two(u->factor)) {
        report.violations.push_back({ViolationCode::FactorNotPowerOfTwo, where});
        continue;
      }
      if (!is_unroll_factor(u->factor)) {
        report.violations.push_back({ViolationCode::FactorOutOfRange, where});
        continue;
      }
    }
    if (std::holds_alternative<Parallelize>(t)) {
      if (seen_parallel) {
        report.violations.push_back({ViolationCode::DuplicateParallelize, where});
        continue;
      }
      seen_parallel = true;
    }
    try {
      sp = apply_transform(sp, t);
    } catch (const Error& e) {
      ViolationCode code = ViolationCode::UnknownLevel;
      switch (e.code()) {
        case ErrorCode::FactorNotPowerOfTwo: code = ViolationCode::FactorNotPowerOfTwo; break;
        case ErrorCode::FactorOutOfRange: code = ViolationCode::FactorOutOfRange; break;
        case ErrorCode::NonAdjacentLevels: code = ViolationCode::NonAdjacentLevels; break;
        default: break;
      }
      report.violations.push_back({code, where + ": " + e.what()});
    }
  }
  if (sp.depth() > kMaxDepth) {
    report.violations.push_back({ViolationCode::DepthExceedsMax,
                                 "depth " + std::to_string(sp.depth()) + " after scheduling"});
  }
  return report;
}

ValidationReport validate_schedule(const ScheduledProgram& sp) {
  return validate_schedule(sp.base(), sp.applied());
}

// ---------------------------------------------------------------------------
// Text form

std::string to_text(const Transform& t) {
  std::ostringstream os;
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, Split>) {
          os << "split " << x.level << ' ' << x.factor;
        } else if constexpr (std::is_same_v<T, Interchange>) {
          os << "interchange " << x.level_a << ' ' << x.level_b;
        } else if constexpr (std::is_same_v<T, Tile2>) {
          os << "tile2 " << x.level_a << ' ' << x.level_b << ' ' << x.factor_a << ' ' << x.factor_b;
        } else if constexpr (std::is_same_v<T, Tile3>) {
          os << "tile3 " << x.level_a << ' ' << x.level_b << ' ' << x.level_c << ' ' << x.factor_a
             << ' ' << x.factor_b << ' ' << x.factor_c;
        } else if constexpr (std::is_same_v<T, Unroll>) {
          os << "unroll " << x.factor;
        } else {
          os << "parallelize " << x.level;
        }
      },
      t);
  return os.str();
}

bool is_schedule_directive(std::string_view word) {
  return word == "split" || word == "interchange" || word == "tile2" || word == "tile3" ||
         word == "parallelize" || word == "unroll";
}

Transform parse_transform(std::string_view line) {
  const auto tokens = detail::split_ws(detail::trim(line));
  if (tokens.empty()) throw Error(ErrorCode::ParseError, "empty schedule line");
  std::vector<std::int64_t> args;
  for (std::size_t k = 1; k < tokens.size(); ++k) {
    const auto v = detail::parse_int(tokens[k]);
    if (!v) throw Error(ErrorCode::ParseError, "non-integer argument in '" + std::string(line) + "'");
    args.push_back(*v);
  }
  const auto need = [&](std::size_t n) {
    if (args.size() != n) {
      throw Error(ErrorCode::ParseError, "'" + std::string(tokens[0]) + "' takes " +
                                             std::to_string(n) + " arguments");
    }
  };
  const auto lvl = [](std::int64_t v) { return static_cast<int>(v); };
  const std::string_view cmd = tokens[0];
  if (cmd == "split") {
    need(2);
    return Split{lvl(args[0]), args[1], "", ""};
  }
  if (cmd == "interchange") {
    need(2);
    return Interchange{lvl(args[0]), lvl(args[1])};
  }
  if (cmd == "tile2") {
    need(4);
    return Tile2{lvl(args[0]), lvl(args[1]), args[2], args[3]};
  }
  if (cmd == "tile3") {
    need(6);
    return Tile3{lvl(args[0]), lvl(args[1]), lvl(args[2]), args[3], args[4], args[5]};
  }
  if (cmd == "parallelize") {
    need(1);
    return Parallelize{lvl(args[0])};
  }
  if (cmd == "unroll") {
    need(1);
    return Unroll{args[0]};
  }
  throw Error(ErrorCode::ParseError, "unknown schedule command '" + std::string(cmd) + "'");
}

ProgramFile parse_program_file(std::string_view text) {
  std::string program_text;
  std::vector<Transform> transforms;
  const auto lines = detail::split(text, '\n');
  for (const auto raw : lines) {
    std::string_view line = raw;
    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    const auto tokens = detail::split_ws(line);
    if (!tokens.empty() && is_schedule_directive(tokens[0])) {
      transforms.push_back(parse_transform(line));
      program_text += '\n';  // keep line numbers aligned
    } else {
      program_text += std::string(raw) + '\n';
    }
  }
  return ProgramFile{parse_program(program_text), std::move(transforms)};
}

std::string to_text(const ProgramFile& file) {
  std::string out = to_text(file.program);
  for (const auto& t : file.schedule) out += to_text(t) + '\n';
  return out;
}

std::string to_text(const ScheduledProgram& sp) {
  return to_text(ProgramFile{sp.base(), sp.applied()});
}

}  // namespace unroll_tuner
