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

#include "mobexp/distancing.h"

#include <algorithm>
#include <climits>
#include <set>

namespace mobexp {

ZctaDistancing AggregateDistancing(const DeviceDayStats& stats,
                                   const Crosswalk& crosswalk) {
  std::set<CbgId> unmapped;
  for (const auto& [key, day] : stats) {
    if (crosswalk.Find(key.id) == nullptr) unmapped.insert(key.id);
  }
  if (!unmapped.empty()) {
    std::string msg = "CBGs missing from crosswalk:";
    for (const auto& c : unmapped) msg += " " + c;
    throw DataError(msg);
  }

  struct Acc {
    double n = 0.0, np = 0.0, nt = 0.0;
  };
  std::map<IdDate, Acc> acc;
  for (const auto& [key, day] : stats) {
    for (const auto& link : *crosswalk.Find(key.id)) {
      auto& a = acc[{link.zcta, key.date}];
      const double n = link.weight * static_cast<double>(day.devices);
      a.n += n;
      a.np += n * day.prop_home;
      a.nt += n * day.time_home_frac;
    }
  }
  ZctaDistancing out;
  for (const auto& [key, a] : acc) {
    ZctaDistancingDay d;
    d.devices = a.n;
    if (a.n > 0.0) {
      d.prop_home = a.np / a.n;
      d.time_home = a.nt / a.n;
    }
    out.emplace(key, d);
  }
  return out;
}

std::optional<WindowMobility> ComputeWindow(
    const std::map<Date, double>& daily_cei,
    const std::map<Date, ZctaDistancingDay>& daily_distancing, Date t,
    const WindowOptions& options) {
  WindowMobility w;
  const double cei_sum = WindowSum(daily_cei, t, options.length);
  w.cei_w = Log1pTransform(cei_sum);

  double np = 0.0, nt = 0.0, stay_none = 1.0;
  double p_lo = 1.0, p_hi = 0.0, t_lo = 1.0, t_hi = 0.0;
  for (Date d = t - options.length; d < t; d = d + 1) {
    auto it = daily_distancing.find(d);
    if (it == daily_distancing.end()) {
      throw MissingDataError("no distancing data for " + d.ToString() +
                             " in window ending " + t.ToString());
    }
    const auto& day = it->second;
    if (!(day.devices > 0.0)) continue;
    w.devices_sum += day.devices;
    np += day.devices * *day.prop_home;
    nt += day.devices * *day.time_home;
    stay_none *= 1.0 - *day.prop_home;
    p_lo = std::min(p_lo, *day.prop_home);
    p_hi = std::max(p_hi, *day.prop_home);
    t_lo = std::min(t_lo, *day.time_home);
    t_hi = std::max(t_hi, *day.time_home);
  }
  if (!(w.devices_sum > 0.0)) return std::nullopt;
  // Weighted means can drift past the daily range by an ulp.
  w.prop_home_w = options.prop_home_mode == PropHomeMode::kWeightedMean
                      ? std::clamp(np / w.devices_sum, p_lo, p_hi)
                      : std::clamp(1.0 - stay_none, 0.0, 1.0);
  w.time_home_w = std::clamp(nt / w.devices_sum, t_lo, t_hi);
  return w;
}

std::map<ZctaId, std::map<Date, double>> DenseCeiSeries(
    std::span<const ZctaDayCei> cei, const std::vector<ZctaId>& zctas,
    Date first, Date last) {
  std::map<ZctaId, std::map<Date, double>> out;
  for (const auto& z : zctas) {
    auto& series = out[z];
    for (Date d = first; d <= last; d = d + 1) series[d] = 0.0;
  }
  for (const auto& r : cei) {
    if (r.date < first || r.date > last) continue;
    auto it = out.find(r.zcta);
    if (it != out.end()) it->second[r.date] += r.value;
  }
  return out;
}

MobilityWindows ComputeMobilityWindows(
    const std::map<ZctaId, std::map<Date, double>>& cei,
    const ZctaDistancing& distancing, Date first_t, Date last_t,
    const WindowOptions& options, int threads) {
  std::vector<const std::pair<const ZctaId, std::map<Date, double>>*> zctas;
  for (const auto& entry : cei) zctas.push_back(&entry);

  struct Partial {
    std::vector<MobilityWindowRow> rows;
    std::size_t missing = 0, no_devices = 0;
  };
  std::vector<Partial> parts(zctas.size());
  ParallelFor(zctas.size(), threads, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      const auto& [zcta, series] = *zctas[i];
      std::map<Date, ZctaDistancingDay> days;
      for (auto it = distancing.lower_bound({zcta, Date(INT32_MIN)});
           it != distancing.end() && it->first.id == zcta; ++it) {
        days.emplace(it->first.date, it->second);
      }
      for (Date t = first_t; t <= last_t; t = t + 1) {
        try {
          if (auto w = ComputeWindow(series, days, t, options)) {
            parts[i].rows.push_back({zcta, t, *w});
          } else {
            ++parts[i].no_devices;
          }
        } catch (const MissingDataError&) {
          ++parts[i].missing;
        }
      }
    }
  });

  MobilityWindows out;
  for (auto& p : parts) {
    out.rows.insert(out.rows.end(), std::make_move_iterator(p.rows.begin()),
                    std::make_move_iterator(p.rows.end()));
    out.missing_data += p.missing;
    out.no_devices += p.no_devices;
  }
  return out;
}

}  // namespace mobexp
