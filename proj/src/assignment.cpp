// Copyright 2026 The wsinuc Authors. All Rights Reserved.
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

#include <algorithm>
#include <cmath>
#include <limits>

#include "wsinuc/errors.hpp"
#include "wsinuc/matchloss.hpp"

namespace wsinuc {
namespace {

// Shortest-augmenting-path Hungarian on an n x m matrix with n <= m.
// Returns, for each row, its assigned column.
std::vector<int> solve(size_t n, size_t m, const std::vector<double>& a) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0), v(m + 1, 0), minv(m + 1);
  std::vector<size_t> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (size_t i = 1; i <= n; ++i) {
    p[0] = i;
    size_t j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const size_t i0 = p[j0];
      double delta = inf;
      size_t j1 = 0;
      for (size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> row_to_col(n, -1);
  for (size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) row_to_col[p[j] - 1] = static_cast<int>(j - 1);
  }
  return row_to_col;
}

}  // namespace

Assignment assign(const CostMatrix& cost) {
  for (double c : cost.data) {
    if (!std::isfinite(c)) throw UsageError("cost matrix entries must be finite");
  }
  Assignment out;
  if (cost.rows == 0 || cost.cols == 0) return out;
  if (cost.rows <= cost.cols) {
    const auto r2c = solve(cost.rows, cost.cols, cost.data);
    for (size_t i = 0; i < cost.rows; ++i) out.pairs.emplace_back(static_cast<int>(i), r2c[i]);
  } else {
    std::vector<double> t(cost.data.size());
    for (size_t i = 0; i < cost.rows; ++i) {
      for (size_t j = 0; j < cost.cols; ++j) t[j * cost.rows + i] = cost.at(i, j);
    }
    const auto c2r = solve(cost.cols, cost.rows, t);
    for (size_t j = 0; j < cost.cols; ++j) out.pairs.emplace_back(c2r[j], static_cast<int>(j));
    std::sort(out.pairs.begin(), out.pairs.end());
  }
  for (const auto& [i, j] : out.pairs) out.total_cost += cost.at(i, j);
  return out;
}

}  // namespace wsinuc
