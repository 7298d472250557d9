// Copyright 2026 The mobexp Authors
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

#ifndef MOBEXP_CORE_H_
#define MOBEXP_CORE_H_

#include <array>
#include <compare>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mobexp {

// Bad or inconsistent input data. Maps to CLI exit status 1.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A value required by a window or join is absent.
class MissingDataError : public DataError {
 public:
  using DataError::DataError;
};

// Invalid configuration or option combination. Maps to CLI exit status 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using PoiId = std::string;
using ZctaId = std::string;
using CbgId = std::string;

// Calendar day, stored as days since 1970-01-01.
class Date {
 public:
  constexpr Date() = default;
  constexpr explicit Date(std::int32_t days_since_epoch)
      : days_(days_since_epoch) {}

  static Date FromYmd(int year, unsigned month, unsigned day);
  // Parses YYYY-MM-DD. Throws DataError on anything else.
  static Date Parse(std::string_view iso);

  std::string ToString() const;
  int year() const;
  unsigned month() const;
  unsigned day() const;

  // Monday of the ISO week containing this date.
  Date WeekStart() const;
  bool IsMonday() const { return WeekStart() == *this; }

  constexpr std::int32_t days() const { return days_; }
  constexpr Date operator+(int n) const { return Date(days_ + n); }
  constexpr Date operator-(int n) const { return Date(days_ - n); }
  constexpr int operator-(Date other) const { return days_ - other.days_; }
  constexpr auto operator<=>(const Date&) const = default;

 private:
  std::int32_t days_ = 0;
};

// Dwell-time buckets [e_0,e_1), ..., [e_{k-1}, inf) with one representative
// duration per bucket, in minutes.
class BucketScheme {
 public:
  // `lower_edges` holds e_0..e_{k-1}; e_0 must be 0 and the last bucket is
  // open-ended.
  BucketScheme(std::vector<double> lower_edges,
               std::vector<double> representatives);

  // [0,5), [5,20), [20,60), [60,inf) with representatives 2.5, 12.5, 40, 60.
  static BucketScheme Default();

  std::size_t size() const { return mu_.size(); }
  const std::vector<double>& lower_edges() const { return edges_; }
  const std::vector<double>& representatives() const { return mu_; }
  double upper_edge(std::size_t i) const {
    return i + 1 < edges_.size() ? edges_[i + 1]
                                 : std::numeric_limits<double>::infinity();
  }

  bool operator==(const BucketScheme&) const = default;

 private:
  std::vector<double> edges_;
  std::vector<double> mu_;
};

struct CrosswalkLink {
  ZctaId zcta;
  double weight = 1.0;
  bool operator==(const CrosswalkLink&) const = default;
};

// CBG -> ZCTA allocation weights. Weights of each CBG sum to one.
class Crosswalk {
 public:
  Crosswalk() = default;
  // Weights whose sum is within 1e-6 of one are renormalized; anything else
  // throws DataError naming the CBG.
  explicit Crosswalk(std::map<CbgId, std::vector<CrosswalkLink>> links);

  static Crosswalk Identity(std::span<const std::string> ids);

  const std::vector<CrosswalkLink>* Find(const CbgId& cbg) const;
  const std::map<CbgId, std::vector<CrosswalkLink>>& links() const {
    return links_;
  }
  std::vector<ZctaId> Zctas() const;
  // Throws DataError when a referenced ZCTA is not in `registry`.
  void CheckRegistry(const std::vector<ZctaId>& registry) const;

  bool operator==(const Crosswalk&) const = default;

 private:
  std::map<CbgId, std::vector<CrosswalkLink>> links_;
};

inline constexpr std::size_t kSocioCount = 6;
inline constexpr std::array<std::string_view, kSocioCount> kSocioNames = {
    "income_log", "low_edu", "poor", "age65", "black", "transit"};

// Static socioeconomic covariates of a ZCTA. Index 0 is the natural log of
// mean household income; the rest are population fractions.
struct SocioRow {
  std::array<double, kSocioCount> values{};
  double income_log() const { return values[0]; }
  bool operator==(const SocioRow&) const = default;
};

using Socioeconomics = std::map<ZctaId, SocioRow>;

// Throws DataError when a row violates the covariate bounds.
void ValidateSocioRow(const SocioRow& row);

// ZCTA -> income quintile in 1..5, 1 being the lowest income.
using IncomeClass = std::map<ZctaId, int>;

// ln(1 + x). Throws std::domain_error for negative or NaN input.
double Log1pTransform(double x);

// Equal-count quintiles over ZCTAs. Ties in income are broken by ascending
// ZCTA id. Needs at least five ZCTAs (ConfigError otherwise).
IncomeClass IncomeQuintiles(const std::map<ZctaId, double>& incomes);

// Sum of series over [t - length, t). Throws MissingDataError naming the
// first absent day.
double WindowSum(const std::map<Date, double>& series, Date t, int length = 7);

// Trailing 7-day mean: value at t averages the raw values on [t-6, t], using
// whatever part of that window exists at the start of the series. Days must
// be contiguous and ascending (DataError otherwise).
std::vector<std::pair<Date, double>> MovingAverage7(
    std::span<const std::pair<Date, double>> series);

enum class AggregateMode { kSum, kWeightedMean };

struct ZctaAggregate {
  std::map<ZctaId, double> values;
  std::vector<std::string> warnings;
};

// Pushes CBG-level values through the crosswalk. In kSum mode each CBG value
// is split by its crosswalk weights. In kWeightedMean mode the result is the
// mean weighted by crosswalk weight times `weights` (1 when absent); ZCTAs
// with zero total weight are omitted and reported in `warnings`.
ZctaAggregate AggregateCbgToZcta(const std::map<CbgId, double>& values,
                                 const std::map<CbgId, double>* weights,
                                 const Crosswalk& crosswalk,
                                 AggregateMode mode);

// Runs fn(begin, end) over [0, n) split into contiguous chunks, one per
// worker. Chunk boundaries depend only on n and threads.
void ParallelFor(std::size_t n, int threads,
                 const std::function<void(std::size_t, std::size_t)>& fn);

}  // namespace mobexp

#endif  // MOBEXP_CORE_H_
