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

#ifndef MOBEXP_EXPOSURE_H_
#define MOBEXP_EXPOSURE_H_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mobexp/core.h"
#include "mobexp/ingest.h"

namespace mobexp {

// Contact Exposure Index (CEI)
//
// Within one POI-hour every visitor is assumed to arrive at the start of the
// hour, to be spread uniformly over the floor, and to be in contact with
// every other visitor for as long as both are present. The contact duration
// of a pair is therefore the shorter of the two dwell times, and the hour's
// total contact duration tau is the sum over unordered pairs. CEI divides
// tau by sqrt(floor area), giving minutes per foot, and sums over hours and
// POIs for coarser scopes.

// Visits per dwell bucket for one hour; real-valued after allocation.
using BucketCounts = std::vector<double>;

// n = hour_count * shares. Hours with fewer than two visits cannot hold a
// contact and yield the zero vector.
BucketCounts AllocateDwellToHour(std::uint32_t hour_count,
                                 std::span<const double> shares);
std::vector<BucketCounts> AllocateDwellToHours(const HourCounts& hours,
                                               std::span<const double> shares);

// Worst-case total pairwise contact duration (minutes) for bucket counts `n`
// under `scheme`, with every visit in bucket i dwelling mu_i:
//
//   tau = sum_i mu_i * [ n_i (n_i - 1) / 2 + n_i * sum_{j>i} n_j ]
//
// Pairs inside bucket i meet for mu_i; a pair split across buckets i < j
// meets for mu_i. The within-bucket term is floored at 0 so fractional
// counts below one contribute no pairs, and tau is 0 whenever sum(n) <= 1.
// Throws std::domain_error for negative or non-finite counts, or when `n`
// and `scheme` differ in length.
double ContactDuration(std::span<const double> n, const BucketScheme& scheme);

// Brute-force sum over unordered pairs of min(dwell_a, dwell_b).
double ContactDurationOracle(std::span<const double> dwell_minutes);

// tau / sqrt(area). Throws std::domain_error for nonpositive area.
double CeiPoiHour(double tau_minutes, double area_sqft);

struct PoiHourCei {
  PoiId poi;
  Date date;
  int hour = 0;
  double value = 0.0;
};

struct PoiDayCei {
  PoiId poi;
  Date date;
  double value = 0.0;
  bool operator==(const PoiDayCei&) const = default;
};

struct ZctaDayCei {
  ZctaId zcta;
  Date date;
  double value = 0.0;
  bool operator==(const ZctaDayCei&) const = default;
};

struct CeiAggregates {
  std::vector<PoiDayCei> poi_day;  // sorted by (poi, date)
  std::vector<ZctaDayCei> zcta_day;  // sorted by (zcta, date)
};

// POI-day = sum of the POI's hourly values; ZCTA-day (destination) = sum of
// POI-days over POIs located in the ZCTA. Throws DataError for a POI absent
// from `pois` and for duplicate (poi, date, hour) keys.
CeiAggregates AggregateCei(std::span<const PoiHourCei> records,
                           std::span<const Poi> pois);

// Sums ZCTA-day values of two disjoint runs.
std::vector<ZctaDayCei> MergeZctaDays(std::span<const ZctaDayCei> a,
                                      std::span<const ZctaDayCei> b);

struct CeiRunOptions {
  int threads = 1;
};

struct CeiRun {
  std::vector<PoiDayCei> poi_day;
  std::vector<ZctaDayCei> zcta_day;
  std::size_t skipped_unknown_poi = 0;  // visit rows for POIs not in `pois`
  std::size_t skipped_missing_dwell = 0;  // POI-days with no dwell row
};

// Full POI-hour -> POI-day -> ZCTA-day pass over a visit table. Visits of
// POIs outside `pois` (e.g. removed by FilterPois) are skipped and counted.
// POI-days are evaluated in parallel; every value and every sum is computed
// in a fixed order, so results do not depend on `threads`.
CeiRun ComputeCei(const VisitTable& visits, const DwellDistribution& dwell,
                  std::span<const Poi> pois, const BucketScheme& scheme,
                  const CeiRunOptions& options = {});

struct OriginAttribution {
  std::vector<ZctaDayCei> attributed;  // sorted by (zcta, date)
  // CEI of POI-days with no recorded origin visitors, per date.
  std::map<Date, double> unattributed;
};

// Splits each POI-day CEI across the origin ZCTAs of that week's visitors,
// proportionally to visitor counts.
OriginAttribution AttributeToOrigins(std::span<const PoiDayCei> poi_day,
                                     const OriginTable& origins);

inline constexpr std::string_view kRemainderLabel = "other";
inline constexpr std::string_view kAllLabel = "all";

// Industry label -> NAICS codes or code prefixes ("7225" covers 722511).
using IndustryGroups = std::map<std::string, std::vector<std::string>>;

// Resolves a NAICS code to its group label, or kRemainderLabel. Throws
// ConfigError when two groups can claim the same code.
class IndustryClassifier {
 public:
  explicit IndustryClassifier(const IndustryGroups& groups);
  const std::string& Label(const std::string& naics) const;
  std::vector<std::string> Labels() const;  // groups, then remainder

 private:
  std::vector<std::pair<std::string, std::string>> prefixes_;  // prefix, label
  std::vector<std::string> labels_;
  std::string remainder_{kRemainderLabel};
};

struct IndustryDayCei {
  std::string label;
  Date date;
  double cei = 0.0;
  std::optional<double> share;  // absent when the day's total is zero
};

// Per-label daily totals, plus the remainder label for ungrouped POIs, for
// every date present in `poi_day`. Shares are against the all-POI total.
std::vector<IndustryDayCei> DecomposeByIndustry(
    std::span<const PoiDayCei> poi_day, std::span<const Poi> pois,
    const IndustryGroups& groups);

using PeriodFn = std::function<std::string(Date)>;

// "YYYY-MM", except March which is split into "YYYY-03a" (1st-14th) and
// "YYYY-03b" (15th onwards).
std::string MonthPeriodSplitMarch(Date date);

struct PerVisitCei {
  std::string label;
  std::string period;
  std::optional<double> value;  // absent without multi-person visits
};

// Group-period CEI divided by the group-period count of visits made in hours
// with at least two visits. Covers every industry label, the remainder and
// kAllLabel.
std::vector<PerVisitCei> CeiPerVisit(std::span<const PoiDayCei> poi_day,
                                     const VisitTable& visits,
                                     std::span<const Poi> pois,
                                     const IndustryGroups& groups,
                                     const PeriodFn& period =
                                         MonthPeriodSplitMarch);

}  // namespace mobexp

#endif  // MOBEXP_EXPOSURE_H_
