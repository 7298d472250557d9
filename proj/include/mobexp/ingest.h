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

#ifndef MOBEXP_INGEST_H_
#define MOBEXP_INGEST_H_

#include <array>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "mobexp/core.h"

namespace mobexp {

// Input file names inside a pipeline input directory.
inline constexpr const char* kPoiFile = "pois.csv";
inline constexpr const char* kPatternsFile = "patterns.csv";
inline constexpr const char* kDistancingFile = "social_distancing.csv";
inline constexpr const char* kCasesFile = "cases.csv";
inline constexpr const char* kSocioFile = "socioeconomics.csv";
inline constexpr const char* kCrosswalkFile = "crosswalk.csv";

struct Poi {
  PoiId id;
  std::string naics;  // exactly six digits
  double area_sqft = 0.0;
  ZctaId zcta;
  std::optional<PoiId> enclosed_by;

  bool operator==(const Poi&) const = default;
};

// (identifier, day) key shared by every per-entity daily or weekly table.
struct IdDate {
  std::string id;
  Date date;
  auto operator<=>(const IdDate&) const = default;
};

using HourCounts = std::array<std::uint32_t, 24>;
// (poi, date) -> visits per hour of day.
using VisitTable = std::map<IdDate, HourCounts>;
// (poi, Monday of week) -> dwell-bucket shares summing to one.
using DwellDistribution = std::map<IdDate, std::vector<double>>;
// (poi, Monday of week) -> visitors per origin ZCTA.
using OriginTable = std::map<IdDate, std::map<ZctaId, double>>;

struct VisitPatterns {
  VisitTable visits;
  DwellDistribution dwell;
  OriginTable origins;
  bool operator==(const VisitPatterns&) const = default;
};

struct DeviceDay {
  std::int64_t devices = 0;
  double prop_home = 0.0;
  double time_home_frac = 0.0;
  bool operator==(const DeviceDay&) const = default;
};
// (cbg, date) -> device statistics.
using DeviceDayStats = std::map<IdDate, DeviceDay>;
// (zcta, date) -> new positive cases.
using CasesSeries = std::map<IdDate, std::int64_t>;

struct Rejection {
  std::size_t line = 0;
  std::string reason;
};

// Per-file accounting: input_rows == accepted + rejected.size().
struct IngestReport {
  std::string file;
  std::size_t input_rows = 0;
  std::size_t accepted = 0;
  std::vector<Rejection> rejected;
  std::vector<std::string> warnings;
};

struct ReadOptions {
  // A file whose rejected share exceeds this aborts with DataError.
  double max_reject_fraction = 0.10;
};

template <typename T>
struct Ingested {
  T table;
  IngestReport report;
};

Ingested<std::vector<Poi>> ReadPoiCatalog(const std::filesystem::path& path,
                                          const ReadOptions& options = {});

// Drops every POI whose enclosure chain reaches a hospital (NAICS 622xxx).
// Hospitals themselves are kept. Throws DataError on an enclosure cycle.
std::vector<Poi> FilterPois(std::span<const Poi> pois);

// Weekly patterns file, one row per (poi, week):
//   poi_id,week_start,visits_by_hour,dwell_0..dwell_{k-1},visitor_home_cbgs
// visits_by_hour holds 168 ';'-separated counts (day-major from week_start,
// a Monday); visitor_home_cbgs holds 'cbg:count' pairs separated by ';'.
// Rows for POIs outside `known_pois` (when given) are rejected. Dwell shares
// within 1e-6 of summing to one are renormalized, others rejected.
Ingested<VisitPatterns> ReadVisitPatterns(const std::filesystem::path& path,
                                          const BucketScheme& scheme,
                                          const Crosswalk& crosswalk,
                                          const std::set<PoiId>* known_pois,
                                          const ReadOptions& options = {});

// cbg,date,devices,prop_home,median_time_home_minutes
Ingested<DeviceDayStats> ReadSocialDistancing(
    const std::filesystem::path& path, const ReadOptions& options = {});

enum class CasesFormat { kDaily, kCumulative };

// zcta,date,new_cases (daily) or zcta,date,cumulative_cases (cumulative).
// Cumulative input is differenced per ZCTA; negative differences are floored
// at zero with a warning. Duplicate (zcta, date) keys throw DataError.
Ingested<CasesSeries> ReadCases(const std::filesystem::path& path,
                                CasesFormat format = CasesFormat::kDaily,
                                const ReadOptions& options = {});

// zcta,income_log,low_edu,poor,age65,black,transit
Ingested<Socioeconomics> ReadSocioeconomics(const std::filesystem::path& path,
                                            const ReadOptions& options = {});

// cbg,zcta[,weight]. Any invalid row is fatal.
Crosswalk ReadCrosswalk(const std::filesystem::path& path);

// Writers for the input schemas above.
void WritePoiCatalog(const std::filesystem::path& path,
                     std::span<const Poi> pois);
// Origins are written at CBG level through `zcta_to_cbg`.
void WriteVisitPatterns(const std::filesystem::path& path,
                        const VisitPatterns& patterns,
                        const BucketScheme& scheme,
                        const std::map<ZctaId, CbgId>& zcta_to_cbg);
void WriteSocialDistancing(const std::filesystem::path& path,
                           const DeviceDayStats& stats);
void WriteCases(const std::filesystem::path& path, const CasesSeries& cases);
void WriteSocioeconomics(const std::filesystem::path& path,
                         const Socioeconomics& socio);
void WriteCrosswalk(const std::filesystem::path& path,
                    const Crosswalk& crosswalk);

// Every table after ingest, in memory.
struct Dataset {
  std::vector<Poi> pois;
  VisitPatterns patterns;
  DeviceDayStats devices;
  CasesSeries cases;
  Socioeconomics socio;
  Crosswalk crosswalk;
  bool operator==(const Dataset&) const = default;
};

// Canonical dump: one flat CSV per table (canonical_*.csv) with exact
// number formatting. ReadCanonical(WriteCanonical(d)) == d.
std::vector<std::filesystem::path> WriteCanonical(
    const std::filesystem::path& dir, const Dataset& data);
Dataset ReadCanonical(const std::filesystem::path& dir);

}  // namespace mobexp

#endif  // MOBEXP_INGEST_H_
