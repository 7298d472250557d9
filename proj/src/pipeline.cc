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

#include "mobexp/pipeline.h"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "mobexp/csv.h"
#include "mobexp/synth.h"

namespace mobexp::pipeline {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string Hex(const unsigned char* data, unsigned int n) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * n);
  for (unsigned int i = 0; i < n; ++i) {
    out.push_back(kDigits[data[i] >> 4]);
    out.push_back(kDigits[data[i] & 15]);
  }
  return out;
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr);
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void Update(const void* data, std::size_t n) {
    EVP_DigestUpdate(ctx_, data, n);
  }
  std::string Finish() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int n = 0;
    EVP_DigestFinal_ex(ctx_, md, &n);
    return Hex(md, n);
  }

 private:
  EVP_MD_CTX* ctx_;
};

const char* AttributionName(CeiAttribution a) {
  return a == CeiAttribution::kOrigin ? "origin" : "destination";
}

const char* ModeName(PropHomeMode m) {
  return m == PropHomeMode::kAnyDay ? "any_day" : "weighted_mean";
}

void Validate(const RunConfig& c) {
  if (c.threads < 1) throw ConfigError("threads must be >= 1");
  if (c.window < 1) throw ConfigError("window must be >= 1");
  if (c.lag < 1) throw ConfigError("lag must be >= 1");
  if (c.min_rows < 2) throw ConfigError("minimum N must be >= 2");
  if (c.start_date && c.end_date && *c.end_date < *c.start_date) {
    throw ConfigError("end date " + c.end_date->ToString() +
                      " precedes start date " + c.start_date->ToString());
  }
  if (!(c.read.max_reject_fraction >= 0.0 &&
        c.read.max_reject_fraction <= 1.0)) {
    throw ConfigError("max_reject_fraction must lie in [0,1]");
  }
  if (!(c.fit.grad_tol > 0.0) || !(c.fit.rel_f_tol >= 0.0) ||
      !(c.fit.hessian_step > 0.0) || c.fit.max_iterations < 1 ||
      c.fit.max_restarts < 0) {
    throw ConfigError("invalid optimizer tolerances");
  }
  if (c.synth_zctas < 1 || c.synth_pois < 1) {
    throw ConfigError("synthetic city needs at least one ZCTA and one POI");
  }
  IndustryClassifier check(c.industry_groups);  // overlap check
}

// Shared state for one invocation.
class Context {
 public:
  explicit Context(const RunConfig& config) : cfg(config) {
    fs::create_directories(cfg.output_dir);
    const fs::path path = cfg.output_dir / kManifest;
    if (fs::exists(path)) {
      std::ifstream in(path);
      try {
        manifest = json::parse(in);
      } catch (const json::exception&) {
        manifest = json::object();
      }
    }
    const std::string digest = TextDigest(cfg.Canonical());
    if (!manifest.is_object() || manifest.value("config_digest", "") != digest) {
      manifest = json::object();
    }
    manifest["tool"] = "mobexp";
    manifest["version"] = MOBEXP_VERSION;
    manifest["config_digest"] = digest;
    for (const char* key : {"inputs", "counts", "stages"}) {
      if (!manifest.contains(key)) manifest[key] = json::object();
    }
  }

  fs::path Input(const char* name) {
    fs::path path = cfg.input_dir / name;
    if (!fs::is_regular_file(path)) {
      throw DataError("missing input file: " + path.string());
    }
    manifest["inputs"][name] = FileDigest(path);
    return path;
  }

  fs::path Output(const std::string& name) const {
    return cfg.output_dir / name;
  }

  // Path of an upstream output; absent files name the stage to run.
  fs::path Upstream(const char* name, const char* stage) const {
    fs::path path = cfg.output_dir / name;
    if (!fs::is_regular_file(path)) {
      throw DataError("missing " + path.string() + "; run `mobexp " + stage +
                      "` first");
    }
    return path;
  }

  template <typename T>
  T Record(Ingested<T> ingested) {
    const IngestReport& r = ingested.report;
    manifest["counts"][fs::path(r.file).filename().string()] = {{"input_rows", r.input_rows},
                                  {"accepted", r.accepted},
                                  {"rejected", r.rejected.size()},
                                  {"warnings", r.warnings.size()}};
    if (!r.rejected.empty() || !r.warnings.empty()) {
      std::cerr << r.file << ": " << r.rejected.size() << " rejected, "
                << r.warnings.size() << " warnings\n";
    }
    reports.push_back(std::move(ingested.report));
    return std::move(ingested.table);
  }

  void Count(const std::string& key, std::size_t n) {
    manifest["counts"]["derived"][key] = n;
  }

  Crosswalk LoadCrosswalk() { return ReadCrosswalk(Input(kCrosswalkFile)); }
  Socioeconomics LoadSocio() {
    return Record(ReadSocioeconomics(Input(kSocioFile), cfg.read));
  }
  std::vector<Poi> LoadPois() {
    return Record(ReadPoiCatalog(Input(kPoiFile), cfg.read));
  }
  VisitPatterns LoadPatterns(const Crosswalk& crosswalk,
                             const std::vector<Poi>& catalog) {
    std::set<PoiId> known;
    for (const auto& p : catalog) known.insert(p.id);
    return Record(ReadVisitPatterns(Input(kPatternsFile), cfg.scheme,
                                    crosswalk, &known, cfg.read));
  }
  DeviceDayStats LoadDevices() {
    return Record(ReadSocialDistancing(Input(kDistancingFile), cfg.read));
  }
  CasesSeries LoadCases() {
    return Record(ReadCases(Input(kCasesFile), cfg.cases_format, cfg.read));
  }

  void Save() {
    json outputs = json::object();
    std::vector<fs::path> files;
    for (const auto& entry : fs::recursive_directory_iterator(cfg.output_dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      const std::string rel = fs::relative(f, cfg.output_dir).generic_string();
      if (rel == kManifest) continue;
      outputs[rel] = FileDigest(f);
    }
    manifest["outputs"] = outputs;
    std::ofstream out(cfg.output_dir / kManifest, std::ios::trunc);
    out << manifest.dump(2) << "\n";
    if (!out) throw DataError("cannot write manifest in " +
                              cfg.output_dir.string());
  }

  const RunConfig& cfg;
  json manifest = json::object();
  std::vector<IngestReport> reports;
};

std::optional<double> ParseOptional(const std::string& s,
                                    std::string_view what) {
  if (s.empty()) return std::nullopt;
  return csv::ParseDouble(s, what);
}

template <typename T>
void FieldOrEmpty(csv::Writer& w, const std::optional<T>& v) {
  if (v) {
    w.Field(*v);
  } else {
    w.Empty();
  }
}

// ---------------------------------------------------------------- stages

void IngestValidate(Context& ctx) {
  Dataset data;
  data.crosswalk = ctx.LoadCrosswalk();
  data.socio = ctx.LoadSocio();
  std::vector<ZctaId> registry;
  for (const auto& [z, row] : data.socio) registry.push_back(z);
  data.crosswalk.CheckRegistry(registry);
  data.pois = ctx.LoadPois();
  const std::vector<Poi> kept = FilterPois(data.pois);
  ctx.Count("pois_kept", kept.size());
  ctx.Count("pois_inside_hospitals", data.pois.size() - kept.size());
  data.patterns = ctx.LoadPatterns(data.crosswalk, data.pois);
  data.devices = ctx.LoadDevices();
  data.cases = ctx.LoadCases();

  csv::Writer report(ctx.Output("ingest_report.csv"),
                     {"file", "input_rows", "accepted", "rejected",
                      "warnings"});
  csv::Writer issues(ctx.Output("ingest_issues.csv"),
                     {"file", "line", "kind", "message"});
  for (const auto& r : ctx.reports) {
    const std::string file = fs::path(r.file).filename().string();
    report.Field(file).Field(r.input_rows).Field(r.accepted)
        .Field(r.rejected.size()).Field(r.warnings.size());
    report.EndRow();
    for (const auto& rej : r.rejected) {
      issues.Field(file).Field(rej.line).Field("rejected").Field(rej.reason);
      issues.EndRow();
    }
    for (const auto& w : r.warnings) {
      issues.Field(file).Empty().Field("warning").Field(w);
      issues.EndRow();
    }
  }
  report.Close();
  issues.Close();
  WriteCanonical(ctx.Output("canonical"), data);
}

std::pair<Date, Date> Coverage(const VisitTable& visits) {
  if (visits.empty()) throw DataError("no accepted visit rows");
  Date first = visits.begin()->first.date, last = first;
  for (const auto& [key, counts] : visits) {
    first = std::min(first, key.date);
    last = std::max(last, key.date);
  }
  return {first, last};
}

void CeiCompute(Context& ctx) {
  const Crosswalk crosswalk = ctx.LoadCrosswalk();
  const Socioeconomics socio = ctx.LoadSocio();
  const std::vector<Poi> catalog = ctx.LoadPois();
  const std::vector<Poi> pois = FilterPois(catalog);
  const VisitPatterns patterns = ctx.LoadPatterns(crosswalk, catalog);
  const auto [first, last] = Coverage(patterns.visits);

  const CeiRun run = ComputeCei(patterns.visits, patterns.dwell, pois,
                                ctx.cfg.scheme, {ctx.cfg.threads});
  ctx.Count("poi_days", run.poi_day.size());
  ctx.Count("visit_rows_excluded_pois", run.skipped_unknown_poi);
  ctx.Count("poi_days_missing_dwell", run.skipped_missing_dwell);
  const OriginAttribution origin =
      AttributeToOrigins(run.poi_day, patterns.origins);

  {
    csv::Writer w(ctx.Output(kCeiPoiDay), {"poi_id", "date", "cei"});
    for (const auto& r : run.poi_day) {
      w.Field(r.poi).Field(r.date.ToString()).Field(r.value);
      w.EndRow();
    }
  }

  std::set<ZctaId> zctas;
  for (const auto& [z, row] : socio) zctas.insert(z);
  for (const auto& z : crosswalk.Zctas()) zctas.insert(z);
  for (const auto& r : run.zcta_day) zctas.insert(r.zcta);
  for (const auto& r : origin.attributed) zctas.insert(r.zcta);
  std::map<IdDate, std::pair<double, double>> grid;
  for (const auto& r : run.zcta_day) grid[{r.zcta, r.date}].first = r.value;
  for (const auto& r : origin.attributed) {
    grid[{r.zcta, r.date}].second = r.value;
  }
  {
    csv::Writer w(ctx.Output(kCeiZctaDay),
                  {"zcta", "date", "cei_destination", "cei_origin"});
    for (const auto& z : zctas) {
      for (Date d = first; d <= last; d = d + 1) {
        const auto it = grid.find({z, d});
        const auto v = it == grid.end() ? std::pair<double, double>{}
                                        : it->second;
        w.Field(z).Field(d.ToString()).Field(v.first).Field(v.second);
        w.EndRow();
      }
    }
  }
  {
    csv::Writer w(ctx.Output(kCeiUnattributed), {"date", "cei"});
    for (Date d = first; d <= last; d = d + 1) {
      const auto it = origin.unattributed.find(d);
      w.Field(d.ToString())
          .Field(it == origin.unattributed.end() ? 0.0 : it->second);
      w.EndRow();
    }
  }
}

std::vector<PoiDayCei> ReadPoiDay(const fs::path& path) {
  csv::Reader r(path);
  const std::size_t ci = r.RequireColumn("poi_id");
  const std::size_t cd = r.RequireColumn("date");
  const std::size_t cv = r.RequireColumn("cei");
  std::vector<PoiDayCei> out;
  std::vector<std::string> f;
  while (r.Next(f)) {
    try {
      out.push_back({f.at(ci), Date::Parse(f.at(cd)),
                     csv::ParseDouble(f.at(cv), "cei")});
    } catch (const std::exception& e) {
      throw DataError(r.Where() + ": " + e.what());
    }
  }
  return out;
}

void CeiDecompose(Context& ctx) {
  const auto poi_day = ReadPoiDay(ctx.Upstream(kCeiPoiDay, "cei compute"));
  const Crosswalk crosswalk = ctx.LoadCrosswalk();
  const std::vector<Poi> catalog = ctx.LoadPois();
  const std::vector<Poi> pois = FilterPois(catalog);
  const VisitPatterns patterns = ctx.LoadPatterns(crosswalk, catalog);

  {
    csv::Writer w(ctx.Output(kCeiIndustryDay),
                  {"label", "date", "cei", "share"});
    for (const auto& r :
         DecomposeByIndustry(poi_day, pois, ctx.cfg.industry_groups)) {
      w.Field(r.label).Field(r.date.ToString()).Field(r.cei);
      FieldOrEmpty(w, r.share);
      w.EndRow();
    }
  }
  {
    csv::Writer w(ctx.Output(kCeiPerVisit), {"label", "period", "value"});
    for (const auto& r : CeiPerVisit(poi_day, patterns.visits, pois,
                                     ctx.cfg.industry_groups)) {
      w.Field(r.label).Field(r.period);
      FieldOrEmpty(w, r.value);
      w.EndRow();
    }
  }
}

void SdmAggregate(Context& ctx) {
  const fs::path cei_path = ctx.Upstream(kCeiZctaDay, "cei compute");
  const Crosswalk crosswalk = ctx.LoadCrosswalk();
  const DeviceDayStats devices = ctx.LoadDevices();

  std::vector<ZctaDayCei> cei;
  std::set<ZctaId> zcta_set;
  {
    csv::Reader r(cei_path);
    const std::size_t cz = r.RequireColumn("zcta");
    const std::size_t cd = r.RequireColumn("date");
    const std::size_t cv = r.RequireColumn(
        ctx.cfg.attribution == CeiAttribution::kOrigin ? "cei_origin"
                                                       : "cei_destination");
    std::vector<std::string> f;
    while (r.Next(f)) {
      try {
        cei.push_back({f.at(cz), Date::Parse(f.at(cd)),
                       csv::ParseDouble(f.at(cv), "cei")});
      } catch (const std::exception& e) {
        throw DataError(r.Where() + ": " + e.what());
      }
      zcta_set.insert(cei.back().zcta);
    }
  }
  if (cei.empty()) throw DataError(cei_path.string() + ": no rows");
  Date first = cei.front().date, last = first;
  for (const auto& r : cei) {
    first = std::min(first, r.date);
    last = std::max(last, r.date);
  }
  const std::vector<ZctaId> zctas(zcta_set.begin(), zcta_set.end());

  const ZctaDistancing distancing = AggregateDistancing(devices, crosswalk);
  {
    csv::Writer w(ctx.Output(kDistancingDay),
                  {"zcta", "date", "devices", "prop_home", "time_home"});
    for (const auto& [key, day] : distancing) {
      w.Field(key.id).Field(key.date.ToString()).Field(day.devices);
      FieldOrEmpty(w, day.prop_home);
      FieldOrEmpty(w, day.time_home);
      w.EndRow();
    }
  }

  const Date first_t = ctx.cfg.start_date.value_or(first + ctx.cfg.window);
  const Date last_t = ctx.cfg.end_date.value_or(last + 1);
  const WindowOptions opts{ctx.cfg.window, ctx.cfg.prop_home_mode};
  const MobilityWindows windows =
      ComputeMobilityWindows(DenseCeiSeries(cei, zctas, first, last),
                             distancing, first_t, last_t, opts,
                             ctx.cfg.threads);
  ctx.Count("windows", windows.rows.size());
  ctx.Count("windows_missing_data", windows.missing_data);
  ctx.Count("windows_no_devices", windows.no_devices);

  csv::Writer w(ctx.Output(kMobilityWindow),
                {"zcta", "date", "E_w", "P_w", "T_w", "N_sum"});
  for (const auto& r : windows.rows) {
    w.Field(r.zcta).Field(r.date.ToString()).Field(r.window.cei_w)
        .Field(r.window.prop_home_w).Field(r.window.time_home_w)
        .Field(r.window.devices_sum);
    w.EndRow();
  }
}

std::map<Date, std::map<ZctaId, WindowMobility>> ReadWindows(
    const fs::path& path) {
  csv::Reader r(path);
  const std::size_t cz = r.RequireColumn("zcta");
  const std::size_t cd = r.RequireColumn("date");
  const std::size_t ce = r.RequireColumn("E_w");
  const std::size_t cp = r.RequireColumn("P_w");
  const std::size_t ct = r.RequireColumn("T_w");
  const std::size_t cn = r.RequireColumn("N_sum");
  std::map<Date, std::map<ZctaId, WindowMobility>> out;
  std::vector<std::string> f;
  while (r.Next(f)) {
    try {
      WindowMobility m;
      m.cei_w = csv::ParseDouble(f.at(ce), "E_w");
      m.prop_home_w = csv::ParseDouble(f.at(cp), "P_w");
      m.time_home_w = csv::ParseDouble(f.at(ct), "T_w");
      m.devices_sum = csv::ParseDouble(f.at(cn), "N_sum");
      out[Date::Parse(f.at(cd))][f.at(cz)] = m;
    } catch (const std::exception& e) {
      throw DataError(r.Where() + ": " + e.what());
    }
  }
  return out;
}

std::vector<std::string> PanelHeader() {
  std::vector<std::string> h = {"date", "zcta", "y", "y_lag",
                                "E_w",  "P_w",  "T_w"};
  for (auto n : kSocioNames) h.emplace_back(n);
  return h;
}

void PanelBuildStage(Context& ctx) {
  const auto windows =
      ReadWindows(ctx.Upstream(kMobilityWindow, "sdm aggregate"));
  const CasesSeries cases = ctx.LoadCases();
  const Socioeconomics socio = ctx.LoadSocio();
  const sem::PanelOptions opts{ctx.cfg.min_rows, ctx.cfg.lag};

  csv::Writer rows(ctx.Output(kPanel), PanelHeader());
  csv::Writer days(ctx.Output(kPanelDays),
                   {"date", "rows", "excluded", "skipped", "diagnostic"});
  std::size_t built = 0;
  for (const auto& [t, by_zcta] : windows) {
    if (ctx.cfg.start_date && t < *ctx.cfg.start_date) continue;
    if (ctx.cfg.end_date && *ctx.cfg.end_date < t) continue;
    const sem::PanelBuild b = sem::BuildPanel(t, by_zcta, cases, socio, opts);
    days.Field(t.ToString()).Field(b.panel.rows.size())
        .Field(b.panel.excluded).Field(b.skipped ? 1 : 0).Field(b.diagnostic);
    days.EndRow();
    if (!b.skipped) ++built;
    for (const auto& r : b.panel.rows) {
      rows.Field(t.ToString()).Field(r.zcta).Field(r.y).Field(r.y_lag)
          .Field(r.cei_w).Field(r.prop_home_w).Field(r.time_home_w);
      for (double v : r.socio) rows.Field(v);
      rows.EndRow();
    }
  }
  ctx.Count("panel_days_built", built);
}

std::vector<sem::PanelBuild> ReadPanels(const fs::path& panel_path,
                                        const fs::path& days_path) {
  std::vector<sem::PanelBuild> builds;
  std::map<Date, std::size_t> index;
  {
    csv::Reader r(days_path);
    const std::size_t cd = r.RequireColumn("date");
    const std::size_t cx = r.RequireColumn("excluded");
    const std::size_t cs = r.RequireColumn("skipped");
    const std::size_t cg = r.RequireColumn("diagnostic");
    std::vector<std::string> f;
    while (r.Next(f)) {
      try {
        sem::PanelBuild b;
        b.panel.day = Date::Parse(f.at(cd));
        b.panel.excluded = static_cast<std::size_t>(
            csv::ParseInt(f.at(cx), "excluded"));
        b.skipped = csv::ParseInt(f.at(cs), "skipped") != 0;
        b.diagnostic = f.at(cg);
        if (!index.emplace(b.panel.day, builds.size()).second) {
          throw DataError("duplicate panel day");
        }
        builds.push_back(std::move(b));
      } catch (const std::exception& e) {
        throw DataError(r.Where() + ": " + e.what());
      }
    }
  }
  csv::Reader r(panel_path);
  const auto header = PanelHeader();
  std::vector<std::size_t> col;
  for (const auto& h : header) col.push_back(r.RequireColumn(h));
  std::vector<std::string> f;
  while (r.Next(f)) {
    try {
      const Date t = Date::Parse(f.at(col[0]));
      const auto it = index.find(t);
      if (it == index.end()) throw DataError("day absent from panel_days");
      sem::PanelRow row;
      row.zcta = f.at(col[1]);
      row.y = csv::ParseDouble(f.at(col[2]), "y");
      row.y_lag = csv::ParseDouble(f.at(col[3]), "y_lag");
      row.cei_w = csv::ParseDouble(f.at(col[4]), "E_w");
      row.prop_home_w = csv::ParseDouble(f.at(col[5]), "P_w");
      row.time_home_w = csv::ParseDouble(f.at(col[6]), "T_w");
      for (std::size_t k = 0; k < kSocioCount; ++k) {
        row.socio[k] = csv::ParseDouble(f.at(col[7 + k]), header[7 + k]);
      }
      builds[it->second].panel.rows.push_back(std::move(row));
    } catch (const std::exception& e) {
      throw DataError(r.Where() + ": " + e.what());
    }
  }
  std::sort(builds.begin(), builds.end(),
            [](const auto& a, const auto& b) {
              return a.panel.day < b.panel.day;
            });
  return builds;
}

void SemFit(Context& ctx) {
  const auto builds =
      ReadPanels(ctx.Upstream(kPanel, "panel build"),
                 ctx.Upstream(kPanelDays, "panel build"));
  const sem::ModelSpec spec = sem::ModelSpec::Default();
  sem::FitOptions fit = ctx.cfg.fit;
  fit.seed = ctx.cfg.seed;
  fit.min_rows = ctx.cfg.min_rows;
  const sem::SemSeries series =
      sem::FitSeries(builds, spec, fit, ctx.cfg.threads);

  csv::Writer w(ctx.Output(kSemSeries),
                {"date", "param_name", "estimate", "std_error", "converged",
                 "n_obs", "f_ml"});
  csv::Writer d(ctx.Output(kSemDays),
                {"date", "status", "converged", "n_obs", "f_ml",
                 "grad_inf_norm", "iterations", "restarts", "diagnostic"});
  std::size_t fitted = 0, converged = 0;
  for (const auto& entry : series.days) {
    const std::string day = entry.day.ToString();
    if (!entry.estimate) {
      d.Field(day).Field("gap").Empty().Empty().Empty().Empty().Empty()
          .Empty().Field(entry.gap_reason);
      d.EndRow();
      continue;
    }
    const sem::SemEstimate& e = *entry.estimate;
    ++fitted;
    if (e.converged) ++converged;
    d.Field(day).Field("fitted").Field(e.converged ? 1 : 0).Field(e.n_obs)
        .Field(e.f_ml).Field(e.grad_inf_norm).Field(e.iterations)
        .Field(e.restarts).Field(e.diagnostic);
    d.EndRow();
    for (std::size_t k = 0; k < e.names.size(); ++k) {
      w.Field(day).Field(e.names[k]).Field(e.estimate[k]);
      if (e.std_error) {
        w.Field((*e.std_error)[k]);
      } else {
        w.Empty();
      }
      w.Field(e.converged ? 1 : 0).Field(e.n_obs).Field(e.f_ml);
      w.EndRow();
    }
  }
  ctx.Count("sem_days_fitted", fitted);
  ctx.Count("sem_days_converged", converged);
}

// Writes `series` rows with a run-wise trailing 7-day average.
void EmitSmoothed(csv::Writer& w, const std::string& name,
                  const std::map<Date, double>& series) {
  const std::vector<std::pair<Date, double>> raw(series.begin(), series.end());
  const auto ma = sem::RunwiseMovingAverage7(raw);
  for (std::size_t i = 0; i < raw.size(); ++i) {
    w.Field(name).Field(raw[i].first.ToString()).Field(raw[i].second)
        .Field(ma[i].second);
    w.EndRow();
  }
}

void ReportEmit(Context& ctx) {
  const fs::path cei_path = ctx.Upstream(kCeiZctaDay, "cei compute");
  const fs::path dist_path = ctx.Upstream(kDistancingDay, "sdm aggregate");
  const fs::path window_path = ctx.Upstream(kMobilityWindow, "sdm aggregate");
  const fs::path industry_path = ctx.Upstream(kCeiIndustryDay,
                                              "cei decompose");
  const fs::path per_visit_path = ctx.Upstream(kCeiPerVisit, "cei decompose");
  const fs::path sem_path = ctx.Upstream(kSemSeries, "sem fit");
  const CasesSeries cases = ctx.LoadCases();
  const Socioeconomics socio = ctx.LoadSocio();

  // Daily city-wide trends.
  std::map<Date, double> case_total, cei_total;
  for (const auto& [key, n] : cases) {
    case_total[key.date] += static_cast<double>(n);
  }
  {
    csv::Reader r(cei_path);
    const std::size_t cd = r.RequireColumn("date");
    const std::size_t cv = r.RequireColumn("cei_destination");
    std::vector<std::string> f;
    while (r.Next(f)) {
      try {
        cei_total[Date::Parse(f.at(cd))] +=
            csv::ParseDouble(f.at(cv), "cei_destination");
      } catch (const std::exception& e) {
        throw DataError(r.Where() + ": " + e.what());
      }
    }
  }
  std::map<Date, std::array<double, 3>> dist;  // devices, P sum, T sum
  {
    csv::Reader r(dist_path);
    const std::size_t cd = r.RequireColumn("date");
    const std::size_t cn = r.RequireColumn("devices");
    const std::size_t cp = r.RequireColumn("prop_home");
    const std::size_t ct = r.RequireColumn("time_home");
    std::vector<std::string> f;
    while (r.Next(f)) {
      try {
        const double n = csv::ParseDouble(f.at(cn), "devices");
        const auto p = ParseOptional(f.at(cp), "prop_home");
        const auto t = ParseOptional(f.at(ct), "time_home");
        auto& acc = dist[Date::Parse(f.at(cd))];
        if (p && t && n > 0.0) {
          acc[0] += n;
          acc[1] += n * *p;
          acc[2] += n * *t;
        }
      } catch (const std::exception& e) {
        throw DataError(r.Where() + ": " + e.what());
      }
    }
  }
  std::map<Date, double> prop, time;
  for (const auto& [d, acc] : dist) {
    if (acc[0] > 0.0) {
      prop[d] = acc[1] / acc[0];
      time[d] = acc[2] / acc[0];
    }
  }
  {
    csv::Writer w(ctx.Output("report_trends.csv"),
                  {"series", "date", "value", "ma7"});
    EmitSmoothed(w, "cases", case_total);
    EmitSmoothed(w, "cei", cei_total);
    EmitSmoothed(w, "prop_home", prop);
    EmitSmoothed(w, "time_home", time);
  }

  // Coefficient series with +-1 SE bands.
  {
    struct Point {
      double estimate;
      std::optional<double> se;
    };
    std::map<std::string, std::map<Date, Point>> coef;
    csv::Reader r(sem_path);
    const std::size_t cd = r.RequireColumn("date");
    const std::size_t cn = r.RequireColumn("param_name");
    const std::size_t ce = r.RequireColumn("estimate");
    const std::size_t cs = r.RequireColumn("std_error");
    std::vector<std::string> f;
    while (r.Next(f)) {
      try {
        coef[f.at(cn)][Date::Parse(f.at(cd))] = {
            csv::ParseDouble(f.at(ce), "estimate"),
            ParseOptional(f.at(cs), "std_error")};
      } catch (const std::exception& e) {
        throw DataError(r.Where() + ": " + e.what());
      }
    }
    csv::Writer w(ctx.Output("report_coefficients.csv"),
                  {"param_name", "date", "estimate", "std_error", "lower",
                   "upper", "ma7"});
    for (const auto& [name, points] : coef) {
      std::vector<std::pair<Date, double>> raw;
      for (const auto& [d, p] : points) raw.emplace_back(d, p.estimate);
      const auto ma = sem::RunwiseMovingAverage7(raw);
      std::size_t i = 0;
      for (const auto& [d, p] : points) {
        w.Field(name).Field(d.ToString()).Field(p.estimate);
        if (p.se) {
          w.Field(*p.se).Field(p.estimate - *p.se).Field(p.estimate + *p.se);
        } else {
          w.Empty().Empty().Empty();
        }
        w.Field(ma[i++].second);
        w.EndRow();
      }
    }
  }

  // Industry trends and shares.
  {
    struct Point {
      double cei;
      std::string share;
    };
    std::map<std::string, std::map<Date, Point>> by_label;
    csv::Reader r(industry_path);
    const std::size_t cl = r.RequireColumn("label");
    const std::size_t cd = r.RequireColumn("date");
    const std::size_t cv = r.RequireColumn("cei");
    const std::size_t cs = r.RequireColumn("share");
    std::vector<std::string> f;
    while (r.Next(f)) {
      try {
        ParseOptional(f.at(cs), "share");
        by_label[f.at(cl)][Date::Parse(f.at(cd))] = {
            csv::ParseDouble(f.at(cv), "cei"), f.at(cs)};
      } catch (const std::exception& e) {
        throw DataError(r.Where() + ": " + e.what());
      }
    }
    csv::Writer w(ctx.Output("report_industry.csv"),
                  {"label", "date", "cei", "cei_ma7", "share"});
    for (const auto& [label, points] : by_label) {
      std::vector<std::pair<Date, double>> raw;
      for (const auto& [d, p] : points) raw.emplace_back(d, p.cei);
      const auto ma = sem::RunwiseMovingAverage7(raw);
      std::size_t i = 0;
      for (const auto& [d, p] : points) {
        w.Field(label).Field(d.ToString()).Field(p.cei)
            .Field(ma[i++].second).Field(p.share);
        w.EndRow();
      }
    }
  }
  {
    csv::Reader r(per_visit_path);
    const std::size_t cl = r.RequireColumn("label");
    const std::size_t cp = r.RequireColumn("period");
    const std::size_t cv = r.RequireColumn("value");
    csv::Writer w(ctx.Output("report_per_visit.csv"),
                  {"label", "period", "value"});
    std::vector<std::string> f;
    while (r.Next(f)) {
      w.Field(f.at(cl)).Field(f.at(cp)).Field(f.at(cv));
      w.EndRow();
    }
  }

  // Window exposure against same-day new cases, by income class.
  {
    std::map<ZctaId, double> incomes;
    for (const auto& [z, row] : socio) incomes[z] = row.income_log();
    const IncomeClass classes = IncomeQuintiles(incomes);
    const auto windows = ReadWindows(window_path);
    csv::Writer w(ctx.Output("report_scatter.csv"),
                  {"zcta", "date", "income_class", "cei_window", "cases"});
    for (const auto& [d, by_zcta] : windows) {
      for (const auto& [z, m] : by_zcta) {
        const auto cls = classes.find(z);
        const auto n = cases.find({z, d});
        if (cls == classes.end() || n == cases.end()) continue;
        w.Field(z).Field(d.ToString()).Field(cls->second)
            .Field(std::expm1(m.cei_w)).Field(n->second);
        w.EndRow();
      }
    }
  }
}

void SynthGenerate(Context& ctx) {
  synth::SynthConfig sc;
  sc.seed = ctx.cfg.seed;
  sc.n_zcta = ctx.cfg.synth_zctas;
  sc.n_poi = ctx.cfg.synth_pois;
  sc.window = ctx.cfg.window;
  if (ctx.cfg.start_date) sc.start = *ctx.cfg.start_date;
  if (ctx.cfg.end_date) sc.end = *ctx.cfg.end_date;
  if (sc.end < sc.start) {
    throw ConfigError("synthetic end date precedes start date");
  }
  const synth::City city = synth::GenerateCity(sc);
  const synth::Micro micro = synth::GenerateMicro(sc, city);
  const auto panels = synth::GeneratePanels(sc, city);
  const CasesSeries cases = synth::CasesFromPanels(sc, panels);
  synth::WriteInputs(ctx.cfg.output_dir, city, micro, cases);

  const sem::ModelSpec spec = sem::ModelSpec::Default();
  const Eigen::VectorXd truth = sc.truth.Natural(spec);
  csv::Writer w(ctx.Output("synth_truth.csv"), {"param_name", "value"});
  for (std::size_t k = 0; k < spec.n_params(); ++k) {
    w.Field(spec.param_names()[k]).Field(truth[static_cast<Eigen::Index>(k)]);
    w.EndRow();
  }
}

using StageFn = void (*)(Context&);

const std::map<std::string, StageFn>& Stages() {
  static const std::map<std::string, StageFn> kStages = {
      {"ingest validate", IngestValidate}, {"cei compute", CeiCompute},
      {"cei decompose", CeiDecompose},     {"sdm aggregate", SdmAggregate},
      {"panel build", PanelBuildStage},    {"sem fit", SemFit},
      {"report emit", ReportEmit},         {"synth generate", SynthGenerate}};
  return kStages;
}

void Timed(Context& ctx, const std::string& name) {
  const auto start = std::chrono::steady_clock::now();
  ctx.reports.clear();
  Stages().at(name)(ctx);
  const std::chrono::duration<double> took =
      std::chrono::steady_clock::now() - start;
  ctx.manifest["stages"][name] = {{"wall_seconds", took.count()}};
}

}  // namespace

IndustryGroups DefaultIndustryGroups() {
  return {{"full_service_restaurants", {"722511"}},
          {"limited_service_restaurants", {"722513"}},
          {"grocery_stores", {"445110"}},
          {"schools", {"611110"}},
          {"fitness_centers", {"713940"}},
          {"gas_stations", {"447110"}},
          {"pharmacies", {"446110"}},
          {"bars", {"722410"}},
          {"child_care", {"624410"}},
          {"apartments", {"531120"}},
          {"religious_organizations", {"813110"}},
          {"hospitals", {"622110"}}};
}

std::string RunConfig::Canonical() const {
  std::ostringstream s;
  auto list = [&](const std::vector<double>& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
      s << (i ? "," : "") << csv::FormatDouble(v[i]);
    }
  };
  s << "start_date=" << (start_date ? start_date->ToString() : "") << "\n";
  s << "end_date=" << (end_date ? end_date->ToString() : "") << "\n";
  s << "seed=" << seed << "\n";
  s << "cei_attribution=" << AttributionName(attribution) << "\n";
  s << "prophome_mode=" << ModeName(prop_home_mode) << "\n";
  s << "bucket_edges=";
  list(scheme.lower_edges());
  s << "\nbucket_mu=";
  list(scheme.representatives());
  s << "\nwindow=" << window << "\nlag=" << lag << "\nmin_n=" << min_rows
    << "\n";
  for (const auto& [label, codes] : industry_groups) {
    s << "industry_group=" << label << "=";
    for (std::size_t i = 0; i < codes.size(); ++i) {
      s << (i ? "|" : "") << codes[i];
    }
    s << "\n";
  }
  s << "cases_format="
    << (cases_format == CasesFormat::kCumulative ? "cumulative" : "daily")
    << "\n";
  s << "max_reject_fraction=" << csv::FormatDouble(read.max_reject_fraction)
    << "\n";
  s << "grad_tol=" << csv::FormatDouble(fit.grad_tol) << "\n";
  s << "rel_f_tol=" << csv::FormatDouble(fit.rel_f_tol) << "\n";
  s << "max_iterations=" << fit.max_iterations << "\n";
  s << "max_restarts=" << fit.max_restarts << "\n";
  s << "hessian_step=" << csv::FormatDouble(fit.hessian_step) << "\n";
  s << "synth_zctas=" << synth_zctas << "\nsynth_pois=" << synth_pois << "\n";
  return s.str();
}

std::string TextDigest(const std::string& text) {
  Sha256 h;
  h.Update(text.data(), text.size());
  return h.Finish();
}

std::string FileDigest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  Sha256 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof(buf));
    h.Update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.Finish();
}

void RunStageOrThrow(const std::string& stage, const RunConfig& config) {
  if (stage != "run" && !Stages().contains(stage)) {
    throw ConfigError("unknown stage: " + stage);
  }
  Validate(config);
  Context ctx(config);
  try {
    if (stage == "run") {
      for (const auto& name : StageNames()) Timed(ctx, name);
    } else {
      Timed(ctx, stage);
    }
  } catch (...) {
    ctx.Save();
    throw;
  }
  ctx.Save();
}

int RunStage(const std::string& stage, const RunConfig& config) {
  try {
    RunStageOrThrow(stage, config);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace mobexp::pipeline
