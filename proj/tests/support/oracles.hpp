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

// Brute-force reference implementations shared by the unit and acceptance
// tests. They enumerate instead of reasoning about formulas.

#ifndef UNROLL_TUNER_TESTS_ORACLES_HPP_
#define UNROLL_TUNER_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "unroll_tuner/featurize.hpp"
#include "unroll_tuner/generator.hpp"
#include "unroll_tuner/schedule.hpp"

namespace unroll_tuner::oracle {

// For every level L: fix the loops above L at their first value, run the
// loops at L and below, and count the distinct addresses each load touches.
// A load touching a single address is loop-invariant and counts 0.
inline FeatureVector::Levels data_loaded(const ScheduledProgram& sp) {
  const Program& p = sp.base();
  const auto& loops = sp.current_iterators();
  const int depth = sp.depth();
  std::map<std::string, int> base_level;
  for (int k = 0; k < p.depth(); ++k) base_level[p.iterators[k].name] = k;
  const auto accesses = load_accesses(p.body);

  FeatureVector::Levels out{};
  for (int level = 0; level < depth; ++level) {
    std::vector<std::set<std::vector<std::int64_t>>> seen(accesses.size());
    IndexVector cur(depth);
    for (int j = 0; j < depth; ++j) cur(j) = loops[j].lower;
    while (true) {
      const IndexVector orig = sp.index_map() * cur + sp.index_offset();
      bool inside = true;
      for (int k = 0; k < p.depth(); ++k) inside = inside && orig(k) < p.iterators[k].upper;
      if (inside) {
        for (std::size_t a = 0; a < accesses.size(); ++a) {
          std::vector<std::int64_t> addr;
          for (const auto& ix : accesses[a].indices) {
            std::int64_t v = ix.offset;
            for (const auto& name : ix.iterators) v += orig(base_level.at(name));
            addr.push_back(v);
          }
          seen[a].insert(addr);
        }
      }
      int j = depth - 1;
      while (j >= level && ++cur(j) == loops[j].upper) {
        cur(j) = loops[j].lower;
        --j;
      }
      if (j < level) break;
    }
    for (const auto& s : seen) {
      if (s.size() > 1) out[level] += static_cast<std::int64_t>(s.size());
    }
  }
  return out;
}

// Random program with depth <= max_depth and every extent drawn from
// [min_extent, max_extent].
inline Program small_program(std::uint64_t seed, std::uint64_t index, int max_depth,
                             std::int64_t min_extent, std::int64_t max_extent) {
  GenConfig cfg;
  cfg.seed = seed;
  cfg.depth_max = max_depth;
  cfg.extent_choices = {2};
  cfg.max_leaves = 16;
  Program p = gen_program(cfg, index);
  Rng rng = Rng::stream(seed ^ 0xe47e, index);
  for (auto& it : p.iterators) it.upper = it.lower + rng.uniform_int(min_extent, max_extent);
  return p;
}

// Label of the k nearest rows by exhaustive distance computation; distance
// ties go to the lower row index, vote ties to the smaller label.
inline int knn(const Eigen::MatrixXd& x, const std::vector<int>& labels, int k,
               const Eigen::RowVectorXd& q) {
  std::vector<bool> used(static_cast<std::size_t>(x.rows()), false);
  std::map<int, int> votes;
  for (int round = 0; round < k; ++round) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index arg = -1;
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      if (used[static_cast<std::size_t>(r)]) continue;
      const double d = (x.row(r) - q).squaredNorm();
      if (d < best) {
        best = d;
        arg = r;
      }
    }
    used[static_cast<std::size_t>(arg)] = true;
    ++votes[labels[static_cast<std::size_t>(arg)]];
  }
  int label = votes.begin()->first;
  for (const auto& [l, n] : votes) {
    if (n > votes[label]) label = l;
  }
  return label;
}

// Smallest weighted Gini impurity over every (feature, threshold) pair where
// thresholds are the midpoints between consecutive distinct values.
inline double best_gini(const Eigen::MatrixXd& x, const std::vector<int>& labels) {
  const auto gini = [](const std::map<int, int>& c, int n) {
    double s = 0;
    for (const auto& [l, m] : c) s += std::pow(static_cast<double>(m) / n, 2);
    return 1.0 - s;
  };
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index f = 0; f < x.cols(); ++f) {
    std::vector<double> values(x.col(f).data(), x.col(f).data() + x.rows());
    std::sort(values.begin(), values.end());
    values.erase(std::unique(values.begin(), values.end()), values.end());
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
      const double t = (values[i] + values[i + 1]) / 2;
      std::map<int, int> left, right;
      int nl = 0, nr = 0;
      for (Eigen::Index r = 0; r < x.rows(); ++r) {
        if (x(r, f) < t) {
          ++left[labels[static_cast<std::size_t>(r)]];
          ++nl;
        } else {
          ++right[labels[static_cast<std::size_t>(r)]];
          ++nr;
        }
      }
      const int n = nl + nr;
      best = std::min(best, (nl * gini(left, nl) + nr * gini(right, nr)) / n);
    }
  }
  return best;
}

}  // namespace unroll_tuner::oracle

#endif  // UNROLL_TUNER_TESTS_ORACLES_HPP_
