/*
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "rqk/bench.hpp"
#include "rqk/errors.hpp"

using namespace rqk;

namespace {

const BenchRow *find_row(const BenchResult &r, std::size_t n, std::size_t m, BenchMethod method) {
  for (const auto &row : r.rows)
    if (row.n == n && row.m == m && row.method == method) return &row;
  return nullptr;
}

}  // namespace

TEST(BenchDensity, ArmsAgreeOnSmallCell) {
  const BenchResult r = bench_density({10}, {4});
  ASSERT_EQ(r.rows.size(), 3u);
  for (BenchMethod method : {BenchMethod::NaiveCholesky, BenchMethod::RqkCholesky, BenchMethod::RqkEigen}) {
    const BenchRow *row = find_row(r, 10, 4, method);
    ASSERT_NE(row, nullptr) << to_string(method);
    EXPECT_EQ(row->replicates, 5);
    EXPECT_GT(row->median_seconds, 0.0);
  }
  EXPECT_TRUE(r.notes.empty());
}

TEST(BenchDensity, DisagreementAborts) {
  BenchOptions o;
  o.agreement_tol = -1.0;  // nothing can agree
  EXPECT_THROW(bench_density({10}, {4}, o), Error);
}

TEST(BenchDensity, RequiresFiveReplicates) {
  BenchOptions o;
  o.replicates = 4;
  EXPECT_THROW(bench_density({10}, {2}, o), Error);
}

TEST(BenchDensity, DenseCapSkipsNaiveArm) {
  BenchOptions o;
  o.dense_cap = 30;
  const BenchResult r = bench_density({10}, {2, 4}, o);
  EXPECT_NE(find_row(r, 10, 2, BenchMethod::NaiveCholesky), nullptr);
  EXPECT_EQ(find_row(r, 10, 4, BenchMethod::NaiveCholesky), nullptr);
  EXPECT_NE(find_row(r, 10, 4, BenchMethod::RqkCholesky), nullptr);
  EXPECT_EQ(r.notes.size(), 1u);
}

TEST(BenchDensity, SpecializedBeatsNaiveAtTwoFunctions) {
  const BenchResult r = bench_density({100}, {2});
  EXPECT_LT(find_row(r, 100, 2, BenchMethod::RqkCholesky)->median_seconds,
            find_row(r, 100, 2, BenchMethod::NaiveCholesky)->median_seconds);
}

TEST(BenchCsv, HeaderAndRows) {
  const BenchResult r = bench_density({8}, {2, 3});
  std::ostringstream out;
  write_bench_csv(out, r);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "n,m,method,median_seconds,replicates");
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4) << line;
  }
  EXPECT_EQ(rows, 6);
}

TEST(FitSlopes, RecoversPowerLaw) {
  BenchResult r;
  for (std::size_t m : {2, 4, 8, 16}) {
    r.rows.push_back({100, m, BenchMethod::RqkCholesky, 1e-3 * static_cast<double>(m), 5, 0});
    r.rows.push_back({100, m, BenchMethod::NaiveCholesky, 1e-5 * std::pow(static_cast<double>(m), 3.0), 5, 0});
  }
  r.rows.push_back({50, 2, BenchMethod::RqkEigen, 1.0, 5, 0});  // single m: no slope
  const auto slopes = fit_slopes(r);
  ASSERT_EQ(slopes.size(), 2u);
  for (const auto &s : slopes) {
    EXPECT_EQ(s.n, 100u);
    EXPECT_NEAR(s.slope_m, s.method == BenchMethod::RqkCholesky ? 1.0 : 3.0, 1e-12);
  }
}

TEST(BenchMap, SmokeRun) {
  const BenchResult r = bench_map({100}, {4});
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].method, BenchMethod::RqkCholesky);
  EXPECT_EQ(r.rows[0].failures, 0);
  EXPECT_GT(r.rows[0].median_seconds, 0.0);
}
