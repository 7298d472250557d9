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

#ifndef MOBEXP_SYNTH_H_
#define MOBEXP_SYNTH_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mobexp/core.h"
#include "mobexp/ingest.h"
#include "mobexp/sem.h"

namespace mobexp::synth {

struct SocioSettings {
  double income_log_mean = 11.0;
  double income_log_sd = 0.45;
  // Mean fractions for low_edu, poor, age65, black, transit.
  std::array<double, kSocioCount - 1> fraction_means = {0.35, 0.15, 0.14,
                                                        0.25, 0.40};
  double fraction_logit_sd = 0.6;
  // Loading of each fraction's logit on standardized income.
  std::array<double, kSocioCount - 1> income_loadings = {-0.5, -0.6, 0.2,
                                                         -0.3, -0.2};
};

struct VisitSettings {
  double mean_hourly_visits = 3.0;
  double popularity_sd = 0.5;  // lognormal spread of POI popularity
  double dwell_concentration = 30.0;
  double origin_sample_fraction = 0.3;  // weekly visits with a known origin
  double hospital_enclosed_fraction = 0.02;
  double devices_per_resident = 0.08;
};

struct SynthConfig {
  std::uint64_t seed = 42;
  std::size_t n_zcta = 100;
  std::size_t n_poi = 1000;
  Date start = Date::FromYmd(2020, 4, 1);  // first panel day
  Date end = Date::FromYmd(2020, 4, 30);   // last panel day, inclusive
  int window = 7;                          // mobility days needed before start
  sem::SemParams truth = DefaultTruth();
  double lag_start_sd = 1.0;      // spread of y_lag on the first day
  double case_log_offset = 3.0;   // log1p(cases) = y + offset, floored at 0
  SocioSettings socio;
  VisitSettings visits;
  std::vector<std::pair<std::string, double>> industry_mix = DefaultMix();

  static sem::SemParams DefaultTruth();
  static std::vector<std::pair<std::string, double>> DefaultMix();
};

struct City {
  std::vector<Poi> pois;
  Socioeconomics socio;
  Crosswalk crosswalk;  // 1:1, one CBG per ZCTA
  std::map<ZctaId, CbgId> zcta_to_cbg;
  std::map<ZctaId, double> population;
};

struct Micro {
  VisitPatterns patterns;
  DeviceDayStats devices;
};

// POIs with industry codes drawn from the mix and lognormal floor areas,
// socioeconomics with income-correlated fractions, and a 1:1 crosswalk.
City GenerateCity(const SynthConfig& config);

// Hourly Poisson visits, Dirichlet dwell shares per POI-week, origins drawn
// in proportion to ZCTA population, and device statistics per CBG-day.
// Covers whole weeks from the Monday on or before start - window through
// end.
Micro GenerateMicro(const SynthConfig& config, const City& city);

// One panel per day in [start, end], generated from config.truth in
// centered scale: socio columns are the city's values minus their mean.
std::vector<sem::Panel> GeneratePanels(const SynthConfig& config,
                                       const City& city);

// Counts whose log1p equals max(0, y + case_log_offset), rounded, for every
// panel day plus the day before the first (from its y_lag).
CasesSeries CasesFromPanels(const SynthConfig& config,
                            const std::vector<sem::Panel>& panels);

// Writes every input file of the pipeline into `dir`.
std::vector<std::filesystem::path> WriteInputs(
    const std::filesystem::path& dir, const City& city, const Micro& micro,
    const CasesSeries& cases);

}  // namespace mobexp::synth

#endif  // MOBEXP_SYNTH_H_
