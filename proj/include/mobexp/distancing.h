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

#ifndef MOBEXP_DISTANCING_H_
#define MOBEXP_DISTANCING_H_

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mobexp/core.h"
#include "mobexp/exposure.h"
#include "mobexp/ingest.h"

namespace mobexp {

struct ZctaDistancingDay {
  double devices = 0.0;  // crosswalk-weighted device count
  std::optional<double> prop_home;  // absent when devices == 0
  std::optional<double> time_home;
  bool operator==(const ZctaDistancingDay&) const = default;
};

// (zcta, date) -> stay-at-home measures.
using ZctaDistancing = std::map<IdDate, ZctaDistancingDay>;

// Device counts are summed through the crosswalk; prop_home and time_home
// are device-weighted means over the constituent CBGs. Throws DataError
// listing CBGs absent from the crosswalk.
ZctaDistancing AggregateDistancing(const DeviceDayStats& stats,
                                   const Crosswalk& crosswalk);

enum class PropHomeMode {
  // sum_z N_z P_z / sum_z N_z over the window.
  kWeightedMean,
  // 1 - prod_z (1 - P_z) over window days with devices: the chance a device
  // stays home all day on at least one day, treating days as independent.
  kAnyDay,
};

struct WindowOptions {
  int length = 7;
  PropHomeMode prop_home_mode = PropHomeMode::kWeightedMean;
};

struct WindowMobility {
  double cei_w = 0.0;  // log1p of the window's summed daily CEI
  double prop_home_w = 0.0;
  double time_home_w = 0.0;
  double devices_sum = 0.0;
};

// Mobility of one ZCTA over [t - length, t). Throws MissingDataError naming
// the first absent day; returns nullopt when the window has no devices.
std::optional<WindowMobility> ComputeWindow(
    const std::map<Date, double>& daily_cei,
    const std::map<Date, ZctaDistancingDay>& daily_distancing, Date t,
    const WindowOptions& options = {});

// zcta -> date -> CEI over [first, last], zero where `cei` has no record.
std::map<ZctaId, std::map<Date, double>> DenseCeiSeries(
    std::span<const ZctaDayCei> cei, const std::vector<ZctaId>& zctas,
    Date first, Date last);

struct MobilityWindowRow {
  ZctaId zcta;
  Date date;
  WindowMobility window;
};

struct MobilityWindows {
  std::vector<MobilityWindowRow> rows;  // sorted by (zcta, date)
  std::size_t missing_data = 0;  // windows with an absent day
  std::size_t no_devices = 0;  // windows dropped for zero devices
};

// Windows for every ZCTA in `cei` and every t in [first_t, last_t].
MobilityWindows ComputeMobilityWindows(
    const std::map<ZctaId, std::map<Date, double>>& cei,
    const ZctaDistancing& distancing, Date first_t, Date last_t,
    const WindowOptions& options = {}, int threads = 1);

}  // namespace mobexp

#endif  // MOBEXP_DISTANCING_H_
