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

#include "mobexp/ingest.h"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "mobexp/csv.h"

namespace mobexp {
namespace {

namespace fs = std::filesystem;

// Aborts the whole file, unlike DataError raised inside a row which only
// rejects that row.
class FatalRowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename RowFn>
IngestReport ReadRows(csv::Reader& reader, const fs::path& path,
                      const ReadOptions& options, RowFn&& on_row) {
  IngestReport report;
  report.file = path.string();
  std::vector<std::string> fields;
  while (reader.Next(fields)) {
    ++report.input_rows;
    try {
      if (fields.size() != reader.header().size()) {
        throw DataError("expected " + std::to_string(reader.header().size()) +
                        " fields, got " + std::to_string(fields.size()));
      }
      on_row(fields, report);
      ++report.accepted;
    } catch (const FatalRowError& e) {
      throw DataError(reader.Where() + ": " + e.what());
    } catch (const DataError& e) {
      report.rejected.push_back({reader.line(), e.what()});
    } catch (const std::domain_error& e) {
      report.rejected.push_back({reader.line(), e.what()});
    }
  }
  if (report.input_rows > 0) {
    const double frac = static_cast<double>(report.rejected.size()) /
                        static_cast<double>(report.input_rows);
    if (frac > options.max_reject_fraction) {
      std::string msg = path.string() + ": rejected " +
                        std::to_string(report.rejected.size()) + " of " +
                        std::to_string(report.input_rows) + " rows";
      if (!report.rejected.empty()) {
        msg += " (first: line " + std::to_string(report.rejected[0].line) +
               ": " + report.rejected[0].reason + ")";
      }
      throw DataError(msg);
    }
  }
  return report;
}

std::vector<std::string_view> SplitOn(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool IsSixDigits(std::string_view s) {
  return s.size() == 6 &&
         std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

std::string JoinPath(const std::vector<PoiId>& ids) {
  std::string out;
  for (const auto& id : ids) out += (out.empty() ? "" : " -> ") + id;
  return out;
}

}  // namespace

Ingested<std::vector<Poi>> ReadPoiCatalog(const fs::path& path,
                                          const ReadOptions& options) {
  csv::Reader reader(path);
  const auto c_id = reader.RequireColumn("poi_id");
  const auto c_naics = reader.RequireColumn("naics");
  const auto c_area = reader.RequireColumn("area_sqft");
  const auto c_zcta = reader.RequireColumn("zcta");
  const auto c_parent = reader.Column("enclosed_by");

  Ingested<std::vector<Poi>> out;
  std::set<PoiId> seen;
  out.report = ReadRows(reader, path, options, [&](const auto& f, auto&) {
    Poi poi;
    poi.id = f[c_id];
    if (poi.id.empty()) throw DataError("empty poi_id");
    if (seen.contains(poi.id)) throw DataError("duplicate poi_id " + poi.id);
    poi.naics = f[c_naics];
    if (!IsSixDigits(poi.naics)) {
      throw DataError("naics '" + poi.naics + "' is not 6 digits");
    }
    if (f[c_area].empty()) throw DataError("missing area");
    poi.area_sqft = csv::ParseDouble(f[c_area], "area_sqft");
    if (!(poi.area_sqft > 0.0)) throw DataError("nonpositive area");
    poi.zcta = f[c_zcta];
    if (poi.zcta.empty()) throw DataError("empty zcta");
    if (c_parent && !f[*c_parent].empty()) poi.enclosed_by = f[*c_parent];
    seen.insert(poi.id);
    out.table.push_back(std::move(poi));
  });
  return out;
}

std::vector<Poi> FilterPois(std::span<const Poi> pois) {
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::map<PoiId, std::size_t> index;
  for (std::size_t i = 0; i < pois.size(); ++i) index[pois[i].id] = i;
  std::vector<std::size_t> parent(pois.size(), kNone);
  for (std::size_t i = 0; i < pois.size(); ++i) {
    if (!pois[i].enclosed_by) continue;
    if (auto it = index.find(*pois[i].enclosed_by); it != index.end()) {
      parent[i] = it->second;
    }
  }

  // Each POI has at most one parent, so a cycle shows up as a walk that
  // returns to a node still on the current path.
  std::vector<std::uint8_t> color(pois.size(), 0);  // 0 new, 1 on path, 2 done
  for (std::size_t i = 0; i < pois.size(); ++i) {
    std::vector<std::size_t> path;
    std::size_t cur = i;
    while (cur != kNone && color[cur] == 0) {
      color[cur] = 1;
      path.push_back(cur);
      cur = parent[cur];
    }
    if (cur != kNone && color[cur] == 1) {
      std::vector<PoiId> ids;
      auto from = std::find(path.begin(), path.end(), cur);
      for (auto it = from; it != path.end(); ++it) ids.push_back(pois[*it].id);
      ids.push_back(pois[cur].id);
      throw DataError("cyclic enclosure chain: " + JoinPath(ids));
    }
    for (auto p : path) color[p] = 2;
  }

  auto is_hospital = [&](std::size_t i) {
    return pois[i].naics.rfind("622", 0) == 0;
  };
  // inside[i]: some ancestor of i is a hospital. 0 unknown, 1 no, 2 yes.
  std::vector<std::uint8_t> inside(pois.size(), 0);
  for (std::size_t i = 0; i < pois.size(); ++i) {
    std::vector<std::size_t> path;
    std::size_t cur = i;
    std::uint8_t verdict = 1;
    while (inside[cur] == 0) {
      path.push_back(cur);
      const std::size_t up = parent[cur];
      if (up == kNone) break;
      if (is_hospital(up)) {
        verdict = 2;
        break;
      }
      cur = up;
    }
    if (inside[cur] != 0) verdict = inside[cur];
    for (auto p : path) inside[p] = verdict;
  }

  std::vector<Poi> out;
  for (std::size_t i = 0; i < pois.size(); ++i) {
    if (inside[i] != 2) out.push_back(pois[i]);
  }
  return out;
}

Ingested<VisitPatterns> ReadVisitPatterns(const fs::path& path,
                                          const BucketScheme& scheme,
                                          const Crosswalk& crosswalk,
                                          const std::set<PoiId>* known_pois,
                                          const ReadOptions& options) {
  csv::Reader reader(path);
  const auto c_poi = reader.RequireColumn("poi_id");
  const auto c_week = reader.RequireColumn("week_start");
  const auto c_hours = reader.RequireColumn("visits_by_hour");
  const auto c_origin = reader.RequireColumn("visitor_home_cbgs");
  std::vector<std::size_t> c_dwell;
  for (std::size_t i = 0; i < reader.header().size(); ++i) {
    if (reader.header()[i].rfind("dwell_", 0) == 0) c_dwell.push_back(i);
  }
  if (c_dwell.size() != scheme.size()) {
    throw DataError(path.string() + ": " + std::to_string(c_dwell.size()) +
                    " dwell columns but the bucket scheme has " +
                    std::to_string(scheme.size()) + " buckets");
  }
  for (std::size_t b = 0; b < c_dwell.size(); ++b) {
    if (reader.header()[c_dwell[b]] != "dwell_" + std::to_string(b)) {
      throw DataError(path.string() + ": dwell columns must be dwell_0..dwell_" +
                      std::to_string(scheme.size() - 1) + " in order");
    }
  }

  Ingested<VisitPatterns> out;
  std::size_t dropped_origins = 0;
  out.report = ReadRows(reader, path, options, [&](const auto& f, auto&) {
    const PoiId& poi = f[c_poi];
    if (known_pois != nullptr && !known_pois->contains(poi)) {
      throw DataError("unknown poi_id " + poi);
    }
    const Date week = Date::Parse(f[c_week]);
    if (!week.IsMonday()) {
      throw DataError("week_start " + week.ToString() + " is not a Monday");
    }
    const IdDate key{poi, week};
    if (out.table.dwell.contains(key)) {
      throw DataError("duplicate row for " + poi + " week " + week.ToString());
    }

    const auto hour_fields = SplitOn(f[c_hours], ';');
    if (hour_fields.size() != 168) {
      throw DataError("visits_by_hour has " +
                      std::to_string(hour_fields.size()) + " values, need 168");
    }
    std::array<HourCounts, 7> days{};
    for (std::size_t i = 0; i < 168; ++i) {
      const auto v = csv::ParseInt(hour_fields[i], "visits_by_hour");
      if (v < 0 || v > UINT32_MAX) throw DataError("hourly count out of range");
      days[i / 24][i % 24] = static_cast<std::uint32_t>(v);
    }

    std::vector<double> shares(scheme.size());
    double total = 0.0;
    for (std::size_t b = 0; b < shares.size(); ++b) {
      shares[b] = csv::ParseDouble(f[c_dwell[b]], "dwell share");
      if (shares[b] < 0.0) throw DataError("negative dwell share");
      total += shares[b];
    }
    if (std::abs(total - 1.0) > 1e-6) {
      throw DataError("dwell shares sum to " + csv::FormatDouble(total));
    }
    if (total != 1.0) {
      for (auto& s : shares) s /= total;
    }

    std::map<ZctaId, double> origins;
    if (!f[c_origin].empty()) {
      for (auto pair : SplitOn(f[c_origin], ';')) {
        const auto colon = pair.rfind(':');
        if (colon == std::string_view::npos) {
          throw DataError("bad visitor_home_cbgs entry '" + std::string(pair) +
                          "'");
        }
        const CbgId cbg(pair.substr(0, colon));
        const double count =
            csv::ParseDouble(pair.substr(colon + 1), "origin visitor count");
        if (count < 0.0) throw DataError("negative origin visitor count");
        const auto* links = crosswalk.Find(cbg);
        if (links == nullptr) {
          ++dropped_origins;
          continue;
        }
        for (const auto& link : *links) origins[link.zcta] += count * link.weight;
      }
    }

    for (int d = 0; d < 7; ++d) out.table.visits[{poi, week + d}] = days[d];
    out.table.dwell[key] = std::move(shares);
    out.table.origins[key] = std::move(origins);
  });
  if (dropped_origins > 0) {
    out.report.warnings.push_back(std::to_string(dropped_origins) +
                                  " origin entries with CBGs outside the "
                                  "crosswalk were dropped");
  }
  return out;
}

Ingested<DeviceDayStats> ReadSocialDistancing(const fs::path& path,
                                              const ReadOptions& options) {
  csv::Reader reader(path);
  const auto c_cbg = reader.RequireColumn("cbg");
  const auto c_date = reader.RequireColumn("date");
  const auto c_dev = reader.RequireColumn("devices");
  const auto c_prop = reader.RequireColumn("prop_home");
  const auto c_time = reader.RequireColumn("median_time_home_minutes");

  Ingested<DeviceDayStats> out;
  std::size_t clamped = 0;
  out.report = ReadRows(reader, path, options, [&](const auto& f, auto&) {
    IdDate key{f[c_cbg], Date::Parse(f[c_date])};
    if (out.table.contains(key)) {
      throw DataError("duplicate row for CBG " + key.id + " on " +
                      key.date.ToString());
    }
    DeviceDay day;
    day.devices = csv::ParseInt(f[c_dev], "devices");
    if (day.devices < 0) throw DataError("negative device count");
    day.prop_home = csv::ParseDouble(f[c_prop], "prop_home");
    if (!(day.prop_home >= 0.0 && day.prop_home <= 1.0)) {
      throw DataError("prop_home outside [0,1]");
    }
    const double minutes =
        csv::ParseDouble(f[c_time], "median_time_home_minutes");
    if (minutes < 0.0) throw DataError("negative median_time_home_minutes");
    day.time_home_frac = minutes / 1440.0;
    if (day.time_home_frac > 1.0) {
      day.time_home_frac = 1.0;
      ++clamped;
    }
    out.table.emplace(std::move(key), day);
  });
  if (clamped > 0) {
    out.report.warnings.push_back(std::to_string(clamped) +
                                  " rows had time at home above 1440 minutes "
                                  "and were clamped to a full day");
  }
  return out;
}

Ingested<CasesSeries> ReadCases(const fs::path& path, CasesFormat format,
                                const ReadOptions& options) {
  csv::Reader reader(path);
  const auto c_zcta = reader.RequireColumn("zcta");
  const auto c_date = reader.RequireColumn("date");
  const auto c_value = reader.RequireColumn(
      format == CasesFormat::kDaily ? "new_cases" : "cumulative_cases");

  Ingested<CasesSeries> out;
  std::size_t floored = 0;
  CasesSeries raw;
  out.report = ReadRows(reader, path, options, [&](const auto& f, auto&) {
    IdDate key{f[c_zcta], Date::Parse(f[c_date])};
    const auto value = csv::ParseInt(f[c_value], "case count");
    if (!raw.emplace(key, value).second) {
      throw FatalRowError("duplicate cases row for ZCTA " + key.id + " on " +
                          key.date.ToString());
    }
  });

  if (format == CasesFormat::kDaily) {
    for (auto& [key, v] : raw) {
      if (v < 0) {
        v = 0;
        ++floored;
      }
    }
    out.table = std::move(raw);
  } else {
    // Map order groups by ZCTA, then ascending date.
    const std::string* prev_zcta = nullptr;
    std::int64_t prev = 0;
    for (const auto& [key, cumulative] : raw) {
      std::int64_t daily = cumulative;
      if (prev_zcta != nullptr && *prev_zcta == key.id) daily -= prev;
      if (daily < 0) {
        daily = 0;
        ++floored;
      }
      out.table.emplace(key, daily);
      prev_zcta = &key.id;
      prev = cumulative;
    }
  }
  if (floored > 0) {
    out.report.warnings.push_back(std::to_string(floored) +
                                  " negative daily case counts floored at 0");
  }
  return out;
}

Ingested<Socioeconomics> ReadSocioeconomics(const fs::path& path,
                                            const ReadOptions& options) {
  csv::Reader reader(path);
  const auto c_zcta = reader.RequireColumn("zcta");
  std::array<std::size_t, kSocioCount> cols{};
  for (std::size_t i = 0; i < kSocioCount; ++i) {
    cols[i] = reader.RequireColumn(kSocioNames[i]);
  }
  Ingested<Socioeconomics> out;
  out.report = ReadRows(reader, path, options, [&](const auto& f, auto&) {
    const ZctaId& zcta = f[c_zcta];
    if (out.table.contains(zcta)) throw DataError("duplicate zcta " + zcta);
    SocioRow row;
    for (std::size_t i = 0; i < kSocioCount; ++i) {
      row.values[i] = csv::ParseDouble(f[cols[i]], kSocioNames[i]);
    }
    ValidateSocioRow(row);
    out.table.emplace(zcta, row);
  });
  return out;
}

Crosswalk ReadCrosswalk(const fs::path& path) {
  csv::Reader reader(path);
  const auto c_cbg = reader.RequireColumn("cbg");
  const auto c_zcta = reader.RequireColumn("zcta");
  const auto c_weight = reader.Column("weight");
  std::map<CbgId, std::vector<CrosswalkLink>> links;
  std::vector<std::string> f;
  while (reader.Next(f)) {
    if (f.size() != reader.header().size()) {
      throw DataError(reader.Where() + ": wrong field count");
    }
    double w = 1.0;
    try {
      if (c_weight && !f[*c_weight].empty()) {
        w = csv::ParseDouble(f[*c_weight], "weight");
      }
    } catch (const DataError& e) {
      throw DataError(reader.Where() + ": " + e.what());
    }
    links[f[c_cbg]].push_back({f[c_zcta], w});
  }
  try {
    return Crosswalk(std::move(links));
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void WritePoiCatalog(const fs::path& path, std::span<const Poi> pois) {
  csv::Writer w(path, {"poi_id", "naics", "area_sqft", "zcta", "enclosed_by"});
  for (const auto& p : pois) {
    w.Field(p.id).Field(p.naics).Field(p.area_sqft).Field(p.zcta);
    p.enclosed_by ? w.Field(*p.enclosed_by) : w.Empty();
    w.EndRow();
  }
  w.Close();
}

void WriteVisitPatterns(const fs::path& path, const VisitPatterns& patterns,
                        const BucketScheme& scheme,
                        const std::map<ZctaId, CbgId>& zcta_to_cbg) {
  std::vector<std::string> header = {"poi_id", "week_start", "visits_by_hour"};
  for (std::size_t b = 0; b < scheme.size(); ++b) {
    header.push_back("dwell_" + std::to_string(b));
  }
  header.push_back("visitor_home_cbgs");
  csv::Writer w(path, header);
  for (const auto& [key, shares] : patterns.dwell) {
    std::string hours;
    for (int d = 0; d < 7; ++d) {
      auto it = patterns.visits.find({key.id, key.date + d});
      for (int h = 0; h < 24; ++h) {
        if (!hours.empty()) hours.push_back(';');
        hours += std::to_string(it == patterns.visits.end() ? 0 : it->second[h]);
      }
    }
    w.Field(key.id).Field(key.date.ToString()).Field(hours);
    for (double s : shares) w.Field(s);
    std::string origins;
    if (auto it = patterns.origins.find(key); it != patterns.origins.end()) {
      for (const auto& [zcta, count] : it->second) {
        auto cbg = zcta_to_cbg.find(zcta);
        if (cbg == zcta_to_cbg.end()) {
          throw DataError("no CBG for origin ZCTA " + zcta);
        }
        if (!origins.empty()) origins.push_back(';');
        origins += cbg->second + ":" + csv::FormatDouble(count);
      }
    }
    w.Field(origins);
    w.EndRow();
  }
  w.Close();
}

void WriteSocialDistancing(const fs::path& path, const DeviceDayStats& stats) {
  csv::Writer w(path, {"cbg", "date", "devices", "prop_home",
                       "median_time_home_minutes"});
  for (const auto& [key, d] : stats) {
    w.Field(key.id).Field(key.date.ToString()).Field(d.devices)
        .Field(d.prop_home).Field(d.time_home_frac * 1440.0);
    w.EndRow();
  }
  w.Close();
}

void WriteCases(const fs::path& path, const CasesSeries& cases) {
  csv::Writer w(path, {"zcta", "date", "new_cases"});
  for (const auto& [key, v] : cases) {
    w.Field(key.id).Field(key.date.ToString()).Field(v);
    w.EndRow();
  }
  w.Close();
}

void WriteSocioeconomics(const fs::path& path, const Socioeconomics& socio) {
  std::vector<std::string> header = {"zcta"};
  for (auto n : kSocioNames) header.emplace_back(n);
  csv::Writer w(path, header);
  for (const auto& [zcta, row] : socio) {
    w.Field(zcta);
    for (double v : row.values) w.Field(v);
    w.EndRow();
  }
  w.Close();
}

void WriteCrosswalk(const fs::path& path, const Crosswalk& crosswalk) {
  csv::Writer w(path, {"cbg", "zcta", "weight"});
  for (const auto& [cbg, links] : crosswalk.links()) {
    for (const auto& l : links) {
      w.Field(cbg).Field(l.zcta).Field(l.weight);
      w.EndRow();
    }
  }
  w.Close();
}

std::vector<fs::path> WriteCanonical(const fs::path& dir, const Dataset& data) {
  fs::create_directories(dir);
  std::vector<fs::path> files;
  auto file = [&](const char* name) {
    files.push_back(dir / name);
    return files.back();
  };

  WritePoiCatalog(file("canonical_pois.csv"), data.pois);
  {
    std::vector<std::string> header = {"poi_id", "date"};
    for (int h = 0; h < 24; ++h) header.push_back("h" + std::to_string(h));
    csv::Writer w(file("canonical_visits.csv"), header);
    for (const auto& [key, hours] : data.patterns.visits) {
      w.Field(key.id).Field(key.date.ToString());
      for (auto v : hours) w.Field(static_cast<std::int64_t>(v));
      w.EndRow();
    }
    w.Close();
  }
  {
    csv::Writer w(file("canonical_dwell.csv"),
                  {"poi_id", "week_start", "bucket", "share"});
    for (const auto& [key, shares] : data.patterns.dwell) {
      for (std::size_t b = 0; b < shares.size(); ++b) {
        w.Field(key.id).Field(key.date.ToString()).Field(b).Field(shares[b]);
        w.EndRow();
      }
    }
    w.Close();
  }
  {
    csv::Writer w(file("canonical_origins.csv"),
                  {"poi_id", "week_start", "zcta", "visitors"});
    for (const auto& [key, origins] : data.patterns.origins) {
      if (origins.empty()) {
        // Keeps the (poi, week) key present with no origins.
        w.Field(key.id).Field(key.date.ToString()).Empty().Empty();
        w.EndRow();
      }
      for (const auto& [zcta, v] : origins) {
        w.Field(key.id).Field(key.date.ToString()).Field(zcta).Field(v);
        w.EndRow();
      }
    }
    w.Close();
  }
  {
    csv::Writer w(file("canonical_devices.csv"),
                  {"cbg", "date", "devices", "prop_home", "time_home_frac"});
    for (const auto& [key, d] : data.devices) {
      w.Field(key.id).Field(key.date.ToString()).Field(d.devices)
          .Field(d.prop_home).Field(d.time_home_frac);
      w.EndRow();
    }
    w.Close();
  }
  WriteCases(file("canonical_cases.csv"), data.cases);
  WriteSocioeconomics(file("canonical_socio.csv"), data.socio);
  WriteCrosswalk(file("canonical_crosswalk.csv"), data.crosswalk);
  return files;
}

Dataset ReadCanonical(const fs::path& dir) {
  Dataset data;
  const ReadOptions strict{0.0};
  data.pois = ReadPoiCatalog(dir / "canonical_pois.csv", strict).table;
  std::vector<std::string> f;
  {
    csv::Reader r(dir / "canonical_visits.csv");
    while (r.Next(f)) {
      HourCounts hours{};
      for (int h = 0; h < 24; ++h) {
        hours[h] = static_cast<std::uint32_t>(csv::ParseInt(f[2 + h], "visits"));
      }
      data.patterns.visits[{f[0], Date::Parse(f[1])}] = hours;
    }
  }
  {
    csv::Reader r(dir / "canonical_dwell.csv");
    while (r.Next(f)) {
      auto& shares = data.patterns.dwell[{f[0], Date::Parse(f[1])}];
      const auto b = static_cast<std::size_t>(csv::ParseInt(f[2], "bucket"));
      if (shares.size() <= b) shares.resize(b + 1);
      shares[b] = csv::ParseDouble(f[3], "share");
    }
  }
  {
    csv::Reader r(dir / "canonical_origins.csv");
    while (r.Next(f)) {
      auto& origins = data.patterns.origins[{f[0], Date::Parse(f[1])}];
      if (!f[2].empty()) origins[f[2]] = csv::ParseDouble(f[3], "visitors");
    }
  }
  {
    csv::Reader r(dir / "canonical_devices.csv");
    while (r.Next(f)) {
      data.devices[{f[0], Date::Parse(f[1])}] =
          DeviceDay{csv::ParseInt(f[2], "devices"),
                    csv::ParseDouble(f[3], "prop_home"),
                    csv::ParseDouble(f[4], "time_home_frac")};
    }
  }
  data.cases = ReadCases(dir / "canonical_cases.csv", CasesFormat::kDaily,
                         strict).table;
  data.socio = ReadSocioeconomics(dir / "canonical_socio.csv", strict).table;
  data.crosswalk = ReadCrosswalk(dir / "canonical_crosswalk.csv");
  return data;
}

}  // namespace mobexp
