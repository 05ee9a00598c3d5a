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

#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "unroll_tuner/error.hpp"
#include "unroll_tuner/eval.hpp"
#include "unroll_tuner/featurize.hpp"
#include "unroll_tuner/generator.hpp"

namespace unroll_tuner {
namespace {

using Levels = FeatureVector::Levels;

Levels levels(std::initializer_list<std::int64_t> v) {
  Levels out{};
  std::copy(v.begin(), v.end(), out.begin());
  return out;
}

Levels loaded(std::string_view name, std::int64_t size) {
  return data_loaded_per_level(ScheduledProgram(benchmark_program(name, size)));
}

TEST(FeaturizeTest, MatmulFeatures) {
  for (std::int64_t m : {8, 16, 64, 100}) {
    const auto fv = extract_features(ScheduledProgram(benchmark_program("MMxM", m)));
    EXPECT_EQ(fv.depth, 3);
    EXPECT_EQ(fv.load_count, 3);
    EXPECT_EQ(fv.store_count, 1);
    EXPECT_EQ(fv.data_loaded, levels({3 * m * m, m * m + 2 * m, 2 * m}));
    EXPECT_EQ(fv.span, levels({m, m, m}));
  }
}

TEST(FeaturizeTest, BenchmarkTables) {
  EXPECT_EQ(loaded("SMM", 256), levels({131072, 512}));
  EXPECT_EQ(loaded("RGB_gray", 4 * 8), levels({3 * 32 * 32, 3 * 32}));
  EXPECT_EQ(loaded("Blur", 16), levels({3 * 16 * 16 * 16, 3 * 16 * 16, 3 * 16}));
}

TEST(FeaturizeTest, RgbGrayLevelY) {
  Program p = benchmark_program("RGB_gray", 8);
  for (auto& it : p.iterators) it.upper = 4;
  EXPECT_EQ(data_loaded_per_level(ScheduledProgram(p))[1], 12);
  EXPECT_EQ(oracle::data_loaded(ScheduledProgram(p))[1], 12);
}

TEST(FeaturizeTest, ConstantBodyHasNoLoads) {
  const auto fv = extract_features(
      ScheduledProgram(parse_program("program c\niter i 0 8\niter j 0 8\noutput o[i, j]\nbody 2\n")));
  EXPECT_EQ(fv.load_count, 0);
  EXPECT_EQ(fv.data_loaded, Levels{});
}

TEST(FeaturizeTest, PaddingAndFlags) {
  const Program p = benchmark_program("MMxM", 64);
  const auto sp = schedule(p, std::vector<Transform>{Tile2{0, 1, 16, 8}, Parallelize{0}});
  const auto fv = extract_features(sp);
  EXPECT_EQ(fv.depth, 5);
  EXPECT_EQ(fv.span, levels({4, 8, 16, 8, 64}));
  EXPECT_EQ(fv.tile_applied, levels({1, 1, 1, 1, 0}));
  EXPECT_EQ(fv.tile_factor, levels({16, 8, 16, 8, 0}));
  EXPECT_EQ(fv.parallel_level_flag, levels({1}));
  EXPECT_EQ(fv.interchange_applied, 0);
  for (int k = fv.depth; k < kMaxDepth; ++k) {
    EXPECT_EQ(fv.span[k], 0);
    EXPECT_EQ(fv.data_loaded[k], 0);
  }
  // Recomputed on the tiled nest rather than copied from the base.
  EXPECT_EQ(fv.data_loaded, oracle::data_loaded(sp));
  EXPECT_NE(fv.data_loaded, extract_features(ScheduledProgram(p)).data_loaded);
}

TEST(FeaturizeTest, UnrollIsNotAFeature) {
  const auto sp = ScheduledProgram(benchmark_program("SMM", 64));
  EXPECT_EQ(extract_features(apply_unroll(sp, 8)), extract_features(sp));
}

TEST(FeaturizeTest, HeaderMatchesSchema) {
  std::string want = "depth";
  for (const char* p : {"span", "load"}) {
    for (int k = 0; k < 7; ++k) want += "," + std::string(p) + std::to_string(k);
  }
  want += ",loads,stores,leaves,add,sub,mul,div,dtype";
  for (const char* p : {"tile", "tilef"}) {
    for (int k = 0; k < 7; ++k) want += "," + std::string(p) + std::to_string(k);
  }
  want += ",interch";
  for (int k = 0; k < 7; ++k) want += ",par" + std::to_string(k);
  EXPECT_EQ(csv_header(), want + ",label");
  EXPECT_EQ(static_cast<int>(feature_names().size()), FeatureVector::kWidth);
}

TEST(FeaturizeTest, CsvRowRoundTrip) {
  GenConfig cfg;
  cfg.seed = 31;
  for (std::uint64_t i = 0; i < 50; ++i) {
    for (const auto& sp : gen_schedules(cfg, gen_program(cfg, i))) {
      const auto fv = extract_features(sp);
      const std::string row = encode_csv_row(fv, 16);
      EXPECT_EQ(row.substr(row.rfind(',') + 1), "16");
      const auto [back, label] = decode_csv_row(row);
      EXPECT_EQ(back, fv);
      EXPECT_EQ(label, 16);
    }
  }
}

TEST(FeaturizeTest, CsvLabelOutsideClassSet) {
  try {
    encode_csv_row(FeatureVector{}, 5);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LabelNotInClassSet);
  }
}

TEST(FeaturizeTest, DepthLimit) {
  const Program p = benchmark_program("Conv_layer", 256);
  EXPECT_EQ(extract_features(ScheduledProgram(p)).depth, 7);
  const auto deeper = schedule(p, std::vector<Transform>{Split{0, 2}});
  try {
    extract_features(deeper);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DepthExceedsMax);
  }
}

using Matrix = Eigen::MatrixXd;

TEST(ScalerTest, DropsConstantColumns) {
  Matrix x(4, 3);
  x << 1, 5, 0,  //
      2, 5, 1,   //
      3, 5, 0,   //
      4, 5, 1;
  const auto s = Scaler<double>::fit(x, ScalerMode::Standardize, {});
  EXPECT_EQ(s.dropped_columns(), std::vector<int>{1});
  EXPECT_EQ(s.output_width(), 2);
}

TEST(ScalerTest, StandardizedMoments) {
  Rng rng(5);
  Matrix x(200, 6);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = rng.uniform(-50, 50) * (c + 1) + 7 * c;
  }
  const auto s = Scaler<double>::fit(x, ScalerMode::Standardize, {0, 2});
  const Matrix t = s.transform(x);
  for (Eigen::Index c = 0; c < t.cols(); ++c) {
    const double mean = t.col(c).mean();
    const double var = (t.col(c).array() - mean).square().mean();
    EXPECT_LT(std::abs(mean), 1e-9);
    EXPECT_LT(std::abs(std::sqrt(var) - 1.0), 1e-9);
  }
}

TEST(ScalerTest, HandComputedThreeRows) {
  // Column 0: 1,2,3 -> mean 2, std sqrt(2/3). Column 1: 2000,4000,9000
  // rescaled by 1000 -> 2,4,9, mean 5, std sqrt(26/3).
  Matrix x(3, 2);
  x << 1, 2000,  //
      2, 4000,   //
      3, 9000;
  const auto s = Scaler<double>::fit(x, ScalerMode::Standardize, {1});
  const Matrix t = s.transform(x);
  const double s0 = std::sqrt(2.0 / 3.0);
  const double s1 = std::sqrt(26.0 / 3.0);
  EXPECT_NEAR(t(0, 0), -1 / s0, 1e-12);
  EXPECT_NEAR(t(2, 0), 1 / s0, 1e-12);
  EXPECT_NEAR(t(0, 1), -3 / s1, 1e-12);
  EXPECT_NEAR(t(2, 1), 4 / s1, 1e-12);
  const auto n = Scaler<double>::fit(x, ScalerMode::Normalize, {1});
  const Matrix u = n.transform(x);
  EXPECT_NEAR(u(1, 0), 0.5, 1e-12);
  EXPECT_NEAR(u(1, 1), 2.0 / 7.0, 1e-12);
}

TEST(ScalerTest, EmptyTrainingSet) {
  EXPECT_THROW(Scaler<double>::fit(Matrix(0, 3), ScalerMode::Standardize), Error);
}

TEST(ScalerTest, DefaultRescaleSetIsDataLoaded) {
  const auto cols = data_loaded_columns();
  ASSERT_EQ(cols.size(), 7u);
  for (int k = 0; k < 7; ++k) EXPECT_EQ(feature_names()[cols[k]], "load" + std::to_string(k));
}

// Per-level loads equal a brute-force count over the executed nest.
TEST(FeaturizePropertyTest, MatchesBruteForce) {
  for (std::uint64_t i = 0; i < 100; ++i) {
    const Program p = oracle::small_program(41, i, 3, 2, 6);
    const ScheduledProgram sp(p);
    ASSERT_EQ(data_loaded_per_level(sp), oracle::data_loaded(sp)) << to_text(p);
  }
}

TEST(FeaturizePropertyTest, MatchesBruteForceOnDivisibleSchedules) {
  GenConfig cfg;
  cfg.seed = 42;
  cfg.depth_max = 3;
  cfg.extent_choices = {2, 4, 8};
  cfg.max_leaves = 10;
  for (std::uint64_t i = 0; i < 40; ++i) {
    for (const auto& sp : gen_schedules(cfg, gen_program(cfg, i))) {
      // The address-counting oracle cannot tell an extent-1 loop from an
      // invariant access, so those nests are left to the structural tests.
      const auto& loops = sp.current_iterators();
      if (sp.needs_any_guard() || std::any_of(loops.begin(), loops.end(), [](const Iterator& it) {
            return it.extent() < 2;
          })) {
        continue;
      }
      ASSERT_EQ(data_loaded_per_level(sp), oracle::data_loaded(sp)) << to_text(sp);
    }
  }
}

}  // namespace
}  // namespace unroll_tuner
