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

#include "mobexp/exposure.h"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>
#include <tuple>

namespace mobexp {
namespace {

std::map<PoiId, const Poi*> IndexPois(std::span<const Poi> pois) {
  std::map<PoiId, const Poi*> out;
  for (const auto& p : pois) out.emplace(p.id, &p);
  return out;
}

const Poi& LookupPoi(const std::map<PoiId, const Poi*>& index,
                     const PoiId& id) {
  auto it = index.find(id);
  if (it == index.end()) throw DataError("POI " + id + " is not in the catalog");
  return *it->second;
}

std::vector<ZctaDayCei> Flatten(
    const std::map<std::pair<ZctaId, Date>, double>& acc) {
  std::vector<ZctaDayCei> out;
  out.reserve(acc.size());
  for (const auto& [key, v] : acc) out.push_back({key.first, key.second, v});
  return out;
}

// Daily CEI of one POI from its 24 hourly counts. `n` is scratch space.
double PoiDayValue(const HourCounts& hours, std::span<const double> shares,
                   const BucketScheme& scheme, double area,
                   std::vector<double>& n) {
  n.resize(shares.size());
  double total = 0.0;
  for (std::uint32_t count : hours) {
    if (count < 2) continue;
    for (std::size_t b = 0; b < shares.size(); ++b) {
      n[b] = static_cast<double>(count) * shares[b];
    }
    total += CeiPoiHour(ContactDuration(n, scheme), area);
  }
  return total;
}

}  // namespace

BucketCounts AllocateDwellToHour(std::uint32_t hour_count,
                                 std::span<const double> shares) {
  BucketCounts n(shares.size(), 0.0);
  if (hour_count < 2) return n;
  for (std::size_t b = 0; b < shares.size(); ++b) {
    n[b] = static_cast<double>(hour_count) * shares[b];
  }
  return n;
}

std::vector<BucketCounts> AllocateDwellToHours(const HourCounts& hours,
                                               std::span<const double> shares) {
  std::vector<BucketCounts> out;
  out.reserve(hours.size());
  for (auto c : hours) out.push_back(AllocateDwellToHour(c, shares));
  return out;
}

double ContactDuration(std::span<const double> n, const BucketScheme& scheme) {
  const auto& mu = scheme.representatives();
  if (n.size() != mu.size()) {
    throw std::domain_error("bucket count vector has " +
                            std::to_string(n.size()) + " entries, scheme has " +
                            std::to_string(mu.size()));
  }
  double visitors = 0.0;
  for (double v : n) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::domain_error("bucket counts must be finite and nonnegative");
    }
    visitors += v;
  }
  if (visitors <= 1.0) return 0.0;

  double tau = 0.0;
  double longer = 0.0;  // visits in buckets above i
  for (std::size_t i = n.size(); i-- > 0;) {
    const double within = std::max(0.0, 0.5 * n[i] * (n[i] - 1.0));
    tau += mu[i] * (within + n[i] * longer);
    longer += n[i];
  }
  return tau;
}

double ContactDurationOracle(std::span<const double> dwell_minutes) {
  double tau = 0.0;
  for (std::size_t a = 0; a < dwell_minutes.size(); ++a) {
    for (std::size_t b = a + 1; b < dwell_minutes.size(); ++b) {
      tau += std::min(dwell_minutes[a], dwell_minutes[b]);
    }
  }
  return tau;
}

double CeiPoiHour(double tau_minutes, double area_sqft) {
  if (!(area_sqft > 0.0)) {
    throw std::domain_error("POI floor area must be positive");
  }
  return tau_minutes / std::sqrt(area_sqft);
}

CeiAggregates AggregateCei(std::span<const PoiHourCei> records,
                           std::span<const Poi> pois) {
  const auto index = IndexPois(pois);
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](std::size_t i) {
    return std::tie(records[i].poi, records[i].date, records[i].hour);
  };
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return key(a) < key(b); });

  CeiAggregates out;
  std::map<std::pair<ZctaId, Date>, double> zcta_acc;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& r = records[order[k]];
    if (k > 0 && key(order[k - 1]) == key(order[k])) {
      throw DataError("duplicate POI-hour record for " + r.poi + " on " +
                      r.date.ToString() + " hour " + std::to_string(r.hour));
    }
    LookupPoi(index, r.poi);
    if (out.poi_day.empty() || out.poi_day.back().poi != r.poi ||
        out.poi_day.back().date != r.date) {
      out.poi_day.push_back({r.poi, r.date, 0.0});
    }
    out.poi_day.back().value += r.value;
  }
  for (const auto& d : out.poi_day) {
    zcta_acc[{LookupPoi(index, d.poi).zcta, d.date}] += d.value;
  }
  out.zcta_day = Flatten(zcta_acc);
  return out;
}

std::vector<ZctaDayCei> MergeZctaDays(std::span<const ZctaDayCei> a,
                                      std::span<const ZctaDayCei> b) {
  std::map<std::pair<ZctaId, Date>, double> acc;
  for (const auto& r : a) acc[{r.zcta, r.date}] += r.value;
  for (const auto& r : b) acc[{r.zcta, r.date}] += r.value;
  return Flatten(acc);
}

CeiRun ComputeCei(const VisitTable& visits, const DwellDistribution& dwell,
                  std::span<const Poi> pois, const BucketScheme& scheme,
                  const CeiRunOptions& options) {
  const auto index = IndexPois(pois);
  struct Task {
    const IdDate* key;
    const HourCounts* hours;
    const Poi* poi;
  };
  CeiRun run;
  std::vector<Task> tasks;
  tasks.reserve(visits.size());
  for (const auto& [key, hours] : visits) {
    auto it = index.find(key.id);
    if (it == index.end()) {
      ++run.skipped_unknown_poi;
      continue;
    }
    tasks.push_back({&key, &hours, it->second});
  }

  std::vector<double> value(tasks.size(), 0.0);
  std::vector<char> have(tasks.size(), 0);
  ParallelFor(tasks.size(), options.threads, [&](std::size_t b, std::size_t e) {
    std::vector<double> scratch;
    for (std::size_t i = b; i < e; ++i) {
      const auto& t = tasks[i];
      auto d = dwell.find({t.key->id, t.key->date.WeekStart()});
      if (d == dwell.end()) continue;
      value[i] = PoiDayValue(*t.hours, d->second, scheme, t.poi->area_sqft,
                             scratch);
      have[i] = 1;
    }
  });

  std::map<std::pair<ZctaId, Date>, double> zcta_acc;
  run.poi_day.reserve(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (!have[i]) {
      ++run.skipped_missing_dwell;
      continue;
    }
    run.poi_day.push_back({tasks[i].key->id, tasks[i].key->date, value[i]});
    zcta_acc[{tasks[i].poi->zcta, tasks[i].key->date}] += value[i];
  }
  run.zcta_day = Flatten(zcta_acc);
  return run;
}

OriginAttribution AttributeToOrigins(std::span<const PoiDayCei> poi_day,
                                     const OriginTable& origins) {
  OriginAttribution out;
  std::map<std::pair<ZctaId, Date>, double> acc;
  for (const auto& rec : poi_day) {
    auto it = origins.find({rec.poi, rec.date.WeekStart()});
    double total = 0.0;
    if (it != origins.end()) {
      for (const auto& [zcta, v] : it->second) total += v;
    }
    if (!(total > 0.0)) {
      out.unattributed[rec.date] += rec.value;
      continue;
    }
    for (const auto& [zcta, v] : it->second) {
      acc[{zcta, rec.date}] += rec.value * (v / total);
    }
  }
  out.attributed = Flatten(acc);
  return out;
}

IndustryClassifier::IndustryClassifier(const IndustryGroups& groups) {
  for (const auto& [label, codes] : groups) {
    if (label == kRemainderLabel || label == kAllLabel) {
      throw ConfigError("industry label '" + label + "' is reserved");
    }
    labels_.push_back(label);
    for (const auto& code : codes) {
      if (code.empty() || code.size() > 6 ||
          !std::all_of(code.begin(), code.end(),
                       [](char c) { return c >= '0' && c <= '9'; })) {
        throw ConfigError("industry group " + label + ": bad NAICS code '" +
                          code + "'");
      }
      prefixes_.emplace_back(code, label);
    }
  }
  for (std::size_t a = 0; a < prefixes_.size(); ++a) {
    for (std::size_t b = a + 1; b < prefixes_.size(); ++b) {
      const auto& [pa, la] = prefixes_[a];
      const auto& [pb, lb] = prefixes_[b];
      const bool nested = pa.rfind(pb, 0) == 0 || pb.rfind(pa, 0) == 0;
      if (nested && la != lb) {
        throw ConfigError("industry groups " + la + " and " + lb +
                          " overlap on NAICS " + (pa.size() > pb.size() ? pa : pb));
      }
    }
  }
}

const std::string& IndustryClassifier::Label(const std::string& naics) const {
  for (const auto& [prefix, label] : prefixes_) {
    if (naics.rfind(prefix, 0) == 0) return label;
  }
  return remainder_;
}

std::vector<std::string> IndustryClassifier::Labels() const {
  auto out = labels_;
  out.push_back(remainder_);
  return out;
}

std::vector<IndustryDayCei> DecomposeByIndustry(
    std::span<const PoiDayCei> poi_day, std::span<const Poi> pois,
    const IndustryGroups& groups) {
  const IndustryClassifier classifier(groups);
  const auto index = IndexPois(pois);
  std::map<std::pair<std::string, Date>, double> acc;
  std::map<Date, double> totals;
  for (const auto& rec : poi_day) {
    const auto& label = classifier.Label(LookupPoi(index, rec.poi).naics);
    acc[{label, rec.date}] += rec.value;
    totals[rec.date] += rec.value;
  }
  std::vector<IndustryDayCei> out;
  for (const auto& label : classifier.Labels()) {
    for (const auto& [date, total] : totals) {
      IndustryDayCei row{label, date, 0.0, std::nullopt};
      if (auto it = acc.find({label, date}); it != acc.end()) row.cei = it->second;
      if (total > 0.0) row.share = row.cei / total;
      out.push_back(std::move(row));
    }
  }
  return out;
}

std::string MonthPeriodSplitMarch(Date date) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u", date.year(), date.month());
  std::string out(buf);
  if (date.month() == 3) out += date.day() < 15 ? "a" : "b";
  return out;
}

std::vector<PerVisitCei> CeiPerVisit(std::span<const PoiDayCei> poi_day,
                                     const VisitTable& visits,
                                     std::span<const Poi> pois,
                                     const IndustryGroups& groups,
                                     const PeriodFn& period) {
  const IndustryClassifier classifier(groups);
  const auto index = IndexPois(pois);
  const std::string all(kAllLabel);
  // (label, period) -> (CEI, multi-person visits)
  std::map<std::pair<std::string, std::string>, std::pair<double, double>> acc;
  std::set<std::string> periods;
  for (const auto& rec : poi_day) {
    const auto& label = classifier.Label(LookupPoi(index, rec.poi).naics);
    const std::string p = period(rec.date);
    periods.insert(p);
    double multi = 0.0;
    if (auto it = visits.find({rec.poi, rec.date}); it != visits.end()) {
      for (auto c : it->second) {
        if (c >= 2) multi += c;
      }
    }
    for (const auto* l : {&label, &all}) {
      auto& [cei, n] = acc[{*l, p}];
      cei += rec.value;
      n += multi;
    }
  }
  auto labels = classifier.Labels();
  labels.push_back(all);
  std::vector<PerVisitCei> out;
  for (const auto& label : labels) {
    for (const auto& p : periods) {
      PerVisitCei row{label, p, std::nullopt};
      if (auto it = acc.find({label, p});
          it != acc.end() && it->second.second > 0.0) {
        row.value = it->second.first / it->second.second;
      }
      out.push_back(std::move(row));
    }
  }
  return out;
}

}  // namespace mobexp
