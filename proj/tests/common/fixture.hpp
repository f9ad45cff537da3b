// Copyright 2026 The msrec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Five users, eight items, three providers; every expected value in the
// tests is counted by hand from the tables below.
#pragma once

#include <cstdint>
#include <vector>

#include "msrec/metrics.hpp"

namespace msrec::fixture {

// Items 0-2 belong to provider 0, items 3-4 to provider 1, items 5-7 to 2.
inline std::vector<std::int32_t> provider_of() { return {0, 0, 0, 1, 1, 2, 2, 2}; }

inline std::vector<std::vector<std::int32_t>> lists() {
  return {{0, 3, 5}, {0, 1, 6}, {3, 4, 0}, {5, 6, 7}, {1, 3, 6}};
}

// (user, item, rating, predicted)
inline std::vector<TestRating> test() {
  return {
      {0, 0, 5.0, 4.5}, {0, 3, 2.0, 3.0}, {0, 2, 4.0, 4.0},
      {1, 1, 4.0, 3.5}, {1, 6, 3.0, 4.0},
      {2, 3, 5.0, 5.0}, {2, 4, 1.0, 2.0}, {2, 0, 3.0, 3.5},
      {3, 7, 4.0, 3.0},
      {4, 6, 5.0, 4.0}, {4, 0, 3.0, 3.0},
  };
}

// Provider p targets user u when u + p is even.
inline bool target(std::int32_t p, std::int32_t u) { return (u + p) % 2 == 0; }

inline EvalContext context() {
  return EvalContext({0, 1, 2, 3, 4}, lists(), test(), provider_of(), 3, 4.0, target);
}

// Provider 1 is the sensitive provider; items 3, 4, 5 are sensitive items.
inline constexpr bool kProviderSensitive[3] = {false, true, false};
inline constexpr bool kItemSensitive[8] = {false, false, false, true, true, true, false, false};

}  // namespace msrec::fixture
