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

#include "unroll_tuner/baselines.hpp"

namespace unroll_tuner {

int majority_label(const std::map<int, std::int64_t>& votes) {
  if (votes.empty()) throw Error(ErrorCode::EmptyTrainingSet, "no votes");
  int best = votes.begin()->first;
  std::int64_t best_count = votes.begin()->second;
  for (const auto& [label, count] : votes) {
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  }
  return best;
}

}  // namespace unroll_tuner
