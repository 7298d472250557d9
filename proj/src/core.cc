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

#include "mobexp/core.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <thread>

namespace mobexp {
namespace {

using std::chrono::sys_days;
using std::chrono::year_month_day;

year_month_day ToYmd(Date d) {
  return year_month_day{sys_days{std::chrono::days{d.days()}}};
}

}  // namespace

Date Date::FromYmd(int year, unsigned month, unsigned day) {
  const year_month_day ymd{std::chrono::year{year}, std::chrono::month{month},
                           std::chrono::day{day}};
  if (!ymd.ok()) {
    throw DataError("invalid calendar date " + std::to_string(year) + "-" +
                    std::to_string(month) + "-" + std::to_string(day));
  }
  return Date(static_cast<std::int32_t>(
      sys_days{ymd}.time_since_epoch().count()));
}

Date Date::Parse(std::string_view iso) {
  auto digits = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (iso[i] < '0' || iso[i] > '9') return -1;
      v = v * 10 + (iso[i] - '0');
    }
    return v;
  };
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') {
    throw DataError("expected YYYY-MM-DD date, got '" + std::string(iso) + "'");
  }
  const int y = digits(0, 4), m = digits(5, 2), d = digits(8, 2);
  if (y < 0 || m < 0 || d < 0) {
    throw DataError("expected YYYY-MM-DD date, got '" + std::string(iso) + "'");
  }
  return FromYmd(y, static_cast<unsigned>(m), static_cast<unsigned>(d));
}

std::string Date::ToString() const {
  const auto ymd = ToYmd(*this);
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()),
                static_cast<unsigned>(ymd.day()));
  return buf;
}

int Date::year() const { return static_cast<int>(ToYmd(*this).year()); }
unsigned Date::month() const {
  return static_cast<unsigned>(ToYmd(*this).month());
}
unsigned Date::day() const { return static_cast<unsigned>(ToYmd(*this).day()); }

Date Date::WeekStart() const {
  // 1970-01-01 was a Thursday.
  const int offset = ((days_ + 3) % 7 + 7) % 7;
  return Date(days_ - offset);
}

BucketScheme::BucketScheme(std::vector<double> lower_edges,
                           std::vector<double> representatives)
    : edges_(std::move(lower_edges)), mu_(std::move(representatives)) {
  if (mu_.empty() || edges_.size() != mu_.size()) {
    throw ConfigError("bucket scheme needs k >= 1 edges and k representatives");
  }
  if (edges_.front() != 0.0) {
    throw ConfigError("first dwell bucket must start at 0 minutes");
  }
  for (std::size_t i = 0; i < mu_.size(); ++i) {
    if (i > 0 && !(edges_[i] > edges_[i - 1])) {
      throw ConfigError("dwell bucket edges must be strictly ascending");
    }
    if (!(mu_[i] > 0.0) || mu_[i] < edges_[i] || !(mu_[i] < upper_edge(i) ||
                                                   std::isinf(upper_edge(i)))) {
      throw ConfigError("representative " + std::to_string(mu_[i]) +
                        " is not a positive point of bucket " +
                        std::to_string(i));
    }
  }
}

BucketScheme BucketScheme::Default() {
  return BucketScheme({0.0, 5.0, 20.0, 60.0}, {2.5, 12.5, 40.0, 60.0});
}

Crosswalk::Crosswalk(std::map<CbgId, std::vector<CrosswalkLink>> links)
    : links_(std::move(links)) {
  for (auto& [cbg, targets] : links_) {
    if (targets.empty()) throw DataError("CBG " + cbg + " maps to no ZCTA");
    double total = 0.0;
    for (const auto& t : targets) {
      if (!(t.weight >= 0.0) || !std::isfinite(t.weight)) {
        throw DataError("CBG " + cbg + " has a negative crosswalk weight");
      }
      total += t.weight;
    }
    if (std::abs(total - 1.0) > 1e-6) {
      throw DataError("crosswalk weights of CBG " + cbg + " sum to " +
                      std::to_string(total) + ", expected 1");
    }
    if (std::abs(total - 1.0) > 1e-12) {
      for (auto& t : targets) t.weight /= total;
    }
  }
}

Crosswalk Crosswalk::Identity(std::span<const std::string> ids) {
  std::map<CbgId, std::vector<CrosswalkLink>> links;
  for (const auto& id : ids) links[id] = {CrosswalkLink{id, 1.0}};
  return Crosswalk(std::move(links));
}

const std::vector<CrosswalkLink>* Crosswalk::Find(const CbgId& cbg) const {
  auto it = links_.find(cbg);
  return it == links_.end() ? nullptr : &it->second;
}

std::vector<ZctaId> Crosswalk::Zctas() const {
  std::set<ZctaId> out;
  for (const auto& [cbg, targets] : links_) {
    for (const auto& t : targets) out.insert(t.zcta);
  }
  return {out.begin(), out.end()};
}

void Crosswalk::CheckRegistry(const std::vector<ZctaId>& registry) const {
  const std::set<ZctaId> known(registry.begin(), registry.end());
  for (const auto& [cbg, targets] : links_) {
    for (const auto& t : targets) {
      if (!known.contains(t.zcta)) {
        throw DataError("crosswalk maps CBG " + cbg + " to unknown ZCTA " +
                        t.zcta);
      }
    }
  }
}

void ValidateSocioRow(const SocioRow& row) {
  if (!std::isfinite(row.values[0]) || row.values[0] < 0.0) {
    throw DataError("income_log must be finite and nonnegative");
  }
  for (std::size_t i = 1; i < kSocioCount; ++i) {
    if (!(row.values[i] >= 0.0 && row.values[i] <= 1.0)) {
      throw DataError(std::string(kSocioNames[i]) + " must lie in [0,1]");
    }
  }
}

double Log1pTransform(double x) {
  if (!(x >= 0.0)) {
    throw std::domain_error("log1p transform needs x >= 0, got " +
                            std::to_string(x));
  }
  return std::log1p(x);
}

IncomeClass IncomeQuintiles(const std::map<ZctaId, double>& incomes) {
  if (incomes.size() < 5) {
    throw ConfigError("income quintiles need at least 5 ZCTAs, got " +
                      std::to_string(incomes.size()));
  }
  std::vector<std::pair<double, ZctaId>> ranked;
  ranked.reserve(incomes.size());
  for (const auto& [zcta, income] : incomes) {
    if (!(income > 0.0)) {
      throw ConfigError("income of ZCTA " + zcta + " is not positive");
    }
    ranked.emplace_back(income, zcta);
  }
  // Map iteration is already in id order, so a stable sort on income alone
  // keeps the id tie-break.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  IncomeClass out;
  const std::size_t n = ranked.size();
  for (std::size_t r = 0; r < n; ++r) {
    out[ranked[r].second] = static_cast<int>(r * 5 / n) + 1;
  }
  return out;
}

double WindowSum(const std::map<Date, double>& series, Date t, int length) {
  double total = 0.0;
  for (Date d = t - length; d < t; d = d + 1) {
    auto it = series.find(d);
    if (it == series.end()) {
      throw MissingDataError("no value for " + d.ToString() +
                             " in window ending " + t.ToString());
    }
    total += it->second;
  }
  return total;
}

std::vector<std::pair<Date, double>> MovingAverage7(
    std::span<const std::pair<Date, double>> series) {
  std::vector<std::pair<Date, double>> out;
  out.reserve(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (i > 0 && series[i].first != series[i - 1].first + 1) {
      throw DataError("moving average needs contiguous days; gap before " +
                      series[i].first.ToString());
    }
    const std::size_t lo = i >= 6 ? i - 6 : 0;
    double sum = 0.0;
    for (std::size_t j = lo; j <= i; ++j) sum += series[j].second;
    out.emplace_back(series[i].first, sum / static_cast<double>(i - lo + 1));
  }
  return out;
}

ZctaAggregate AggregateCbgToZcta(const std::map<CbgId, double>& values,
                                 const std::map<CbgId, double>* weights,
                                 const Crosswalk& crosswalk,
                                 AggregateMode mode) {
  std::vector<CbgId> unmapped;
  for (const auto& [cbg, v] : values) {
    if (crosswalk.Find(cbg) == nullptr) unmapped.push_back(cbg);
  }
  if (!unmapped.empty()) {
    std::string msg = "CBGs missing from crosswalk:";
    for (const auto& c : unmapped) msg += " " + c;
    throw DataError(msg);
  }

  ZctaAggregate out;
  if (mode == AggregateMode::kSum) {
    for (const auto& [cbg, v] : values) {
      for (const auto& link : *crosswalk.Find(cbg)) {
        out.values[link.zcta] += v * link.weight;
      }
    }
    return out;
  }

  std::map<ZctaId, std::pair<double, double>> acc;  // (sum w*x, sum w)
  for (const auto& [cbg, v] : values) {
    double w = 1.0;
    if (weights != nullptr) {
      auto it = weights->find(cbg);
      w = it == weights->end() ? 0.0 : it->second;
      if (!(w >= 0.0)) throw DataError("negative weight for CBG " + cbg);
    }
    for (const auto& link : *crosswalk.Find(cbg)) {
      auto& [num, den] = acc[link.zcta];
      num += w * link.weight * v;
      den += w * link.weight;
    }
  }
  for (const auto& [zcta, nd] : acc) {
    if (nd.second > 0.0) {
      out.values[zcta] = nd.first / nd.second;
    } else {
      out.warnings.push_back("ZCTA " + zcta +
                             " has zero total weight; omitted");
    }
  }
  return out;
}

void ParallelFor(std::size_t n, int threads,
                 const std::function<void(std::size_t, std::size_t)>& fn) {
  if (n == 0) return;
  const std::size_t workers =
      std::min<std::size_t>(std::max(threads, 1), std::max<std::size_t>(n, 1));
  if (workers <= 1) {
    fn(0, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = std::min(n, w * chunk);
    const std::size_t end = std::min(n, begin + chunk);
    pool.emplace_back([&, w, begin, end] {
      try {
        fn(begin, end);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace mobexp
