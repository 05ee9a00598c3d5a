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

#include "unroll_tuner/featurize.hpp"

#include "text_util.hpp"

namespace unroll_tuner {

std::string_view to_string(ScalerMode mode) {
  return mode == ScalerMode::Standardize ? "standardize" : "normalize";
}

const std::vector<std::string>& feature_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    const auto levels = [&](const std::string& prefix) {
      for (int k = 0; k < kMaxDepth; ++k) n.push_back(prefix + std::to_string(k));
    };
    n.push_back("depth");
    levels("span");
    levels("load");
    n.insert(n.end(), {"loads", "stores", "leaves", "add", "sub", "mul", "div", "dtype"});
    levels("tile");
    levels("tilef");
    n.push_back("interch");
    levels("par");
    return n;
  }();
  return names;
}

std::string csv_header() {
  std::string out;
  for (const auto& name : feature_names()) out += name + ",";
  return out + "label";
}

std::vector<int> data_loaded_columns() {
  std::vector<int> cols;
  for (int k = 0; k < kMaxDepth; ++k) cols.push_back(1 + kMaxDepth + k);
  return cols;
}

std::array<std::int64_t, FeatureVector::kWidth> FeatureVector::values() const {
  std::array<std::int64_t, kWidth> v{};
  std::size_t i = 0;
  const auto put = [&](std::int64_t x) { v[i++] = x; };
  put(depth);
  for (auto x : span) put(x);
  for (auto x : data_loaded) put(x);
  put(load_count);
  put(store_count);
  put(leaf_count);
  for (auto x : op_counts) put(x);
  put(dtype_flag);
  for (auto x : tile_applied) put(x);
  for (auto x : tile_factor) put(x);
  put(interchange_applied);
  for (auto x : parallel_level_flag) put(x);
  return v;
}

FeatureVector FeatureVector::from_values(std::span<const std::int64_t> v) {
  if (v.size() != static_cast<std::size_t>(kWidth)) {
    throw Error(ErrorCode::DimensionMismatch, "feature vector needs " + std::to_string(kWidth) +
                                                  " values, got " + std::to_string(v.size()));
  }
  FeatureVector fv;
  std::size_t i = 0;
  const auto get = [&]() { return v[i++]; };
  fv.depth = get();
  for (auto& x : fv.span) x = get();
  for (auto& x : fv.data_loaded) x = get();
  fv.load_count = get();
  fv.store_count = get();
  fv.leaf_count = get();
  for (auto& x : fv.op_counts) x = get();
  fv.dtype_flag = get();
  for (auto& x : fv.tile_applied) x = get();
  for (auto& x : fv.tile_factor) x = get();
  fv.interchange_applied = get();
  for (auto& x : fv.parallel_level_flag) x = get();
  return fv;
}

FeatureVector::Levels data_loaded_per_level(const ScheduledProgram& sp) {
  if (sp.depth() > kMaxDepth) {
    throw Error(ErrorCode::DepthExceedsMax, "depth " + std::to_string(sp.depth()) + " > " +
                                                std::to_string(kMaxDepth));
  }
  const Program& p = sp.base();
  const IndexMatrix& map = sp.index_map();
  const auto& loops = sp.current_iterators();

  FeatureVector::Levels loaded{};
  for (const auto& access : load_accesses(p.body)) {
    // Current loops this access depends on.
    std::vector<bool> uses(loops.size(), false);
    for (const auto& name : access_iterators(access)) {
      for (int k = 0; k < p.depth(); ++k) {
        if (p.iterators[k].name != name) continue;
        for (std::size_t j = 0; j < loops.size(); ++j) {
          if (map(k, static_cast<Eigen::Index>(j)) != 0) uses[j] = true;
        }
      }
    }
    for (std::size_t level = 0; level < loops.size(); ++level) {
      std::int64_t words = 1;
      bool varies = false;
      for (std::size_t j = level; j < loops.size(); ++j) {
        if (!uses[j]) continue;
        words *= loops[j].extent();
        varies = true;
      }
      if (varies) loaded[level] += words;
    }
  }
  return loaded;
}

FeatureVector extract_features(const ScheduledProgram& sp) {
  if (sp.depth() > kMaxDepth) {
    throw Error(ErrorCode::DepthExceedsMax, "depth " + std::to_string(sp.depth()) + " > " +
                                                std::to_string(kMaxDepth));
  }
  const Program& p = sp.base();
  FeatureVector fv;
  fv.depth = sp.depth();
  const auto& loops = sp.current_iterators();
  const auto& origins = sp.loop_origins();
  for (std::size_t k = 0; k < loops.size(); ++k) {
    fv.span[k] = loops[k].extent();
    if (origins[k].role == LoopRole::TileOuter || origins[k].role == LoopRole::TileInner) {
      fv.tile_applied[k] = 1;
      fv.tile_factor[k] = origins[k].factor;
    }
    fv.parallel_level_flag[k] = origins[k].parallel ? 1 : 0;
  }
  fv.data_loaded = data_loaded_per_level(sp);

  const OpHistogram h = op_histogram(p);
  fv.load_count = op_count(h, OpKind::Load);
  fv.store_count = op_count(h, OpKind::Store);
  fv.leaf_count = leaf_count(p.body);
  fv.op_counts = {op_count(h, OpKind::Add), op_count(h, OpKind::Sub), op_count(h, OpKind::Mul),
                  op_count(h, OpKind::Div)};
  fv.dtype_flag = static_cast<std::int64_t>(p.dtype());
  fv.interchange_applied = sp.interchange_applied() ? 1 : 0;
  return fv;
}

std::string encode_csv_row(const FeatureVector& fv, int label) {
  if (!is_unroll_factor(label)) {
    throw Error(ErrorCode::LabelNotInClassSet, "label " + std::to_string(label));
  }
  std::string out;
  for (auto v : fv.values()) out += std::to_string(v) + ",";
  return out + std::to_string(label);
}

std::pair<FeatureVector, int> decode_csv_row(std::string_view line) {
  const auto fields = detail::split(detail::trim(line), ',');
  if (fields.size() != static_cast<std::size_t>(FeatureVector::kWidth) + 1) {
    throw Error(ErrorCode::MalformedRow, "expected " + std::to_string(FeatureVector::kWidth + 1) +
                                             " fields, got " + std::to_string(fields.size()));
  }
  std::vector<std::int64_t> values;
  values.reserve(fields.size());
  for (const auto field : fields) {
    const auto v = detail::parse_int(field);
    if (!v || *v < 0) {
      throw Error(ErrorCode::MalformedRow, "field '" + std::string(field) + "' is not a count");
    }
    values.push_back(*v);
  }
  const int label = static_cast<int>(values.back());
  if (!is_unroll_factor(label)) {
    throw Error(ErrorCode::LabelNotInClassSet, "label " + std::to_string(label));
  }
  values.pop_back();
  return {FeatureVector::from_values(values), label};
}

}  // namespace unroll_tuner
