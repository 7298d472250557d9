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

#ifndef MOBEXP_PIPELINE_H_
#define MOBEXP_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mobexp/core.h"
#include "mobexp/distancing.h"
#include "mobexp/exposure.h"
#include "mobexp/ingest.h"
#include "mobexp/sem.h"

namespace mobexp::pipeline {

enum class CeiAttribution { kDestination, kOrigin };

// Twelve high-traffic destination types keyed by NAICS code.
IndustryGroups DefaultIndustryGroups();

// Everything a stage needs. Paths and thread count do not enter the config
// digest; every other field does.
struct RunConfig {
  std::filesystem::path input_dir = ".";
  std::filesystem::path output_dir = "out";
  std::optional<Date> start_date;  // first model day t
  std::optional<Date> end_date;    // last model day t, inclusive
  std::uint64_t seed = 42;
  int threads = 1;
  CeiAttribution attribution = CeiAttribution::kOrigin;
  PropHomeMode prop_home_mode = PropHomeMode::kWeightedMean;
  BucketScheme scheme = BucketScheme::Default();
  int window = 7;
  int lag = 1;
  std::size_t min_rows = 30;
  IndustryGroups industry_groups = DefaultIndustryGroups();
  CasesFormat cases_format = CasesFormat::kDaily;
  ReadOptions read;
  sem::FitOptions fit;
  std::size_t synth_zctas = 100;
  std::size_t synth_pois = 1000;

  // Stable text form of the digested fields.
  std::string Canonical() const;
};

// Stage names in dependency order.
inline const std::vector<std::string>& StageNames() {
  static const std::vector<std::string> kStages = {
      "ingest validate", "cei compute", "cei decompose", "sdm aggregate",
      "panel build",     "sem fit",     "report emit"};
  return kStages;
}

// Output file names.
inline constexpr const char* kCeiPoiDay = "cei_poi_day.csv";
inline constexpr const char* kCeiZctaDay = "cei_zcta_day.csv";
inline constexpr const char* kCeiUnattributed = "cei_unattributed.csv";
inline constexpr const char* kCeiIndustryDay = "cei_industry_day.csv";
inline constexpr const char* kCeiPerVisit = "cei_per_visit.csv";
inline constexpr const char* kDistancingDay = "distancing_zcta_day.csv";
inline constexpr const char* kMobilityWindow = "mobility_window.csv";
inline constexpr const char* kPanel = "panel.csv";
inline constexpr const char* kPanelDays = "panel_days.csv";
inline constexpr const char* kSemSeries = "sem_series.csv";
inline constexpr const char* kSemDays = "sem_days.csv";
inline constexpr const char* kManifest = "manifest.json";

// Runs one stage ("cei compute", "synth generate", ...) or "run" for every
// stage in order, then refreshes the output directory's manifest. Returns
// the process exit status: 0 success, 1 data error, 2 configuration error.
// Errors are written to stderr with file context.
int RunStage(const std::string& stage, const RunConfig& config);

// Same, but throws DataError / ConfigError instead of mapping to a status.
void RunStageOrThrow(const std::string& stage, const RunConfig& config);

// SHA-256 of a file's bytes as lowercase hex.
std::string FileDigest(const std::filesystem::path& path);
std::string TextDigest(const std::string& text);

}  // namespace mobexp::pipeline

#endif  // MOBEXP_PIPELINE_H_
