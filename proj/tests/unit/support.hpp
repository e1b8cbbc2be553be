/*
 * Copyright 2026 The multien Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <doctest.h>

#include "multien/error.hpp"
#include "multien/timeseries.hpp"

namespace multien::test {

inline bool rel_close(double a, double b, double tol) {
  const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
  return std::abs(a - b) <= tol * scale;
}

inline std::vector<double> gaussian(std::size_t n, std::mt19937_64& rng, double mean = 0.0,
                                    double sd = 1.0) {
  std::normal_distribution<double> d(mean, sd);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

inline TimeSeriesTable make_table(std::vector<std::string> names,
                                  std::vector<std::vector<double>> cols,
                                  Timestamp start = 0) {
  return TimeSeriesTable(start, kSecondsPerHour, to_source_ids(names), std::move(cols));
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("multien_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

// Code of the Error thrown by `fn`; fails the test when nothing is thrown.
template <typename Fn>
ErrorCode error_code(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a multien::Error");
  return ErrorCode::kIo;
}

inline std::filesystem::path data_path(const std::string& name) {
  return std::filesystem::path(MULTIEN_TEST_DATA) / name;
}

}  // namespace multien::test
