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

#include "mobexp/synth.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

namespace mobexp::synth {
namespace {

using Engine = std::mt19937_64;

// Independent stream per generation stage, all derived from one seed.
Engine StageEngine(std::uint64_t seed, std::uint32_t stage) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32), stage};
  return Engine(seq);
}

std::string Padded(const char* prefix, std::size_t i, int width) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%0*zu", prefix, width, i);
  return buf;
}

double Sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
double Logit(double p) { return std::log(p / (1.0 - p)); }

std::vector<double> Dirichlet(std::span<const double> alpha, Engine& rng) {
  std::vector<double> out(alpha.size());
  double total = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    std::gamma_distribution<double> g(alpha[i], 1.0);
    out[i] = g(rng);
    total += out[i];
  }
  if (!(total > 0.0)) {
    std::fill(out.begin(), out.end(), 1.0 / static_cast<double>(out.size()));
    return out;
  }
  for (auto& v : out) v /= total;
  return out;
}

// Relative hourly visit intensity with mean 1 over the day.
std::array<double, 24> DiurnalProfile() {
  std::array<double, 24> p{};
  double total = 0.0;
  for (int h = 0; h < 24; ++h) {
    const double z = (h - 14.0) / 4.5;
    p[h] = 0.05 + std::exp(-0.5 * z * z);
    total += p[h];
  }
  for (auto& v : p) v *= 24.0 / total;
  return p;
}

}  // namespace

sem::SemParams SynthConfig::DefaultTruth() {
  sem::SemParams p;
  p.beta_socio = {-1.0, 1.5, 1.0, -0.8, 0.6, 1.2};
  p.beta_prop = -0.5;
  p.beta_time = -0.4;
  p.beta_lag = 0.6;
  p.beta_eta = 0.8;
  p.psi = 0.3;
  p.theta_cei = 0.2;
  p.theta_prop = 0.1;
  p.theta_time = 0.1;
  p.theta_y = 0.3;
  return p;
}

std::vector<std::pair<std::string, double>> SynthConfig::DefaultMix() {
  return {{"722511", 0.18}, {"722513", 0.14}, {"445110", 0.08},
          {"611110", 0.05}, {"713940", 0.05}, {"447110", 0.05},
          {"446110", 0.05}, {"722410", 0.04}, {"624410", 0.04},
          {"531120", 0.02}, {"813110", 0.06}, {"622110", 0.02},
          {"812112", 0.22}};
}

City GenerateCity(const SynthConfig& config) {
  Engine rng = StageEngine(config.seed, 1);
  std::normal_distribution<double> unit(0.0, 1.0);
  City city;

  std::vector<ZctaId> zctas;
  for (std::size_t i = 0; i < config.n_zcta; ++i) {
    const ZctaId zcta = Padded("Z", i, 6);
    const CbgId cbg = Padded("17031", i, 7);
    zctas.push_back(zcta);
    city.zcta_to_cbg[zcta] = cbg;
    city.population[zcta] = std::exp(std::log(20000.0) + 0.4 * unit(rng));

    const double z = unit(rng);
    SocioRow row;
    row.values[0] = std::max(
        0.0, config.socio.income_log_mean + config.socio.income_log_sd * z);
    for (std::size_t f = 0; f + 1 < kSocioCount; ++f) {
      row.values[f + 1] =
          Sigmoid(Logit(config.socio.fraction_means[f]) +
                  config.socio.income_loadings[f] * z +
                  config.socio.fraction_logit_sd * unit(rng));
    }
    city.socio.emplace(zcta, row);
  }
  std::map<CbgId, std::vector<CrosswalkLink>> links;
  for (const auto& [zcta, cbg] : city.zcta_to_cbg) links[cbg] = {{zcta, 1.0}};
  city.crosswalk = Crosswalk(std::move(links));

  if (config.n_poi == 0 || zctas.empty()) return city;
  std::vector<double> weights;
  for (const auto& [code, w] : config.industry_mix) weights.push_back(w);
  std::discrete_distribution<std::size_t> industry(weights.begin(),
                                                   weights.end());
  std::uniform_int_distribution<std::size_t> pick_zcta(0, zctas.size() - 1);
  for (std::size_t i = 0; i < config.n_poi; ++i) {
    Poi poi;
    poi.id = Padded("poi", i, 7);
    poi.naics = config.industry_mix[industry(rng)].first;
    poi.area_sqft = std::exp(std::log(2500.0) + 0.8 * unit(rng));
    poi.zcta = zctas[pick_zcta(rng)];
    city.pois.push_back(std::move(poi));
  }
  std::vector<std::size_t> hospitals;
  for (std::size_t i = 0; i < city.pois.size(); ++i) {
    if (city.pois[i].naics.rfind("622", 0) == 0) hospitals.push_back(i);
  }
  if (!hospitals.empty()) {
    std::bernoulli_distribution enclosed(
        config.visits.hospital_enclosed_fraction);
    std::uniform_int_distribution<std::size_t> pick(0, hospitals.size() - 1);
    for (auto& poi : city.pois) {
      if (poi.naics.rfind("622", 0) == 0 || !enclosed(rng)) continue;
      const Poi& host = city.pois[hospitals[pick(rng)]];
      poi.enclosed_by = host.id;
      poi.zcta = host.zcta;
    }
  }
  return city;
}

Micro GenerateMicro(const SynthConfig& config, const City& city) {
  Engine rng = StageEngine(config.seed, 2);
  std::normal_distribution<double> unit(0.0, 1.0);
  const auto& vs = config.visits;
  const Date first_week = (config.start - config.window).WeekStart();
  const Date last_week = config.end.WeekStart();
  const auto profile = DiurnalProfile();

  std::vector<ZctaId> zctas;
  std::vector<double> pop;
  for (const auto& [z, p] : city.population) {
    zctas.push_back(z);
    pop.push_back(p);
  }
  std::discrete_distribution<std::size_t> origin(pop.begin(), pop.end());

  Micro micro;
  const std::array<double, 4> dwell_prior = {2.0, 3.0, 2.0, 1.0};
  for (const auto& poi : city.pois) {
    const double popularity = std::exp(vs.popularity_sd * unit(rng) -
                                       0.5 * vs.popularity_sd * vs.popularity_sd);
    std::vector<double> base = Dirichlet(dwell_prior, rng);
    for (auto& b : base) b = std::max(b * vs.dwell_concentration, 1e-3);
    for (Date week = first_week; week <= last_week; week = week + 7) {
      const IdDate key{poi.id, week};
      micro.patterns.dwell[key] = Dirichlet(base, rng);
      double weekly = 0.0;
      for (int d = 0; d < 7; ++d) {
        HourCounts hours{};
        for (int h = 0; h < 24; ++h) {
          const double lambda = vs.mean_hourly_visits * popularity * profile[h];
          if (lambda > 0.0) {
            std::poisson_distribution<std::uint32_t> visits(lambda);
            hours[h] = visits(rng);
          }
          weekly += hours[h];
        }
        micro.patterns.visits[{poi.id, week + d}] = hours;
      }
      auto& origins = micro.patterns.origins[key];
      const auto sampled =
          static_cast<std::size_t>(std::llround(vs.origin_sample_fraction * weekly));
      for (std::size_t v = 0; v < sampled && !zctas.empty(); ++v) {
        origins[zctas[origin(rng)]] += 1.0;
      }
    }
  }

  for (const auto& [zcta, cbg] : city.zcta_to_cbg) {
    const double base_prop = std::clamp(0.3 + 0.05 * unit(rng), 0.0, 1.0);
    const double base_minutes = 720.0 + 90.0 * unit(rng);
    std::poisson_distribution<std::int64_t> devices(
        std::max(vs.devices_per_resident * city.population.at(zcta), 0.0));
    for (Date d = first_week; d <= last_week + 6; d = d + 1) {
      DeviceDay day;
      day.devices = devices(rng);
      day.prop_home = std::clamp(base_prop + 0.03 * unit(rng), 0.0, 1.0);
      day.time_home_frac =
          std::clamp(base_minutes + 60.0 * unit(rng), 0.0, 1440.0) / 1440.0;
      micro.devices[{cbg, d}] = day;
    }
  }
  return micro;
}

std::vector<sem::Panel> GeneratePanels(const SynthConfig& config,
                                       const City& city) {
  Engine rng = StageEngine(config.seed, 3);
  std::normal_distribution<double> unit(0.0, 1.0);
  const auto& t = config.truth;
  if (t.beta_socio.size() != kSocioCount) {
    throw ConfigError("synthetic truth needs 6 socio coefficients");
  }
  for (double v : {t.psi, t.theta_cei, t.theta_prop, t.theta_time, t.theta_y}) {
    if (!(v > 0.0)) throw ConfigError("synthetic variances must be positive");
  }
  const double sd_zeta = std::sqrt(t.psi), sd_e = std::sqrt(t.theta_cei),
               sd_p = std::sqrt(t.theta_prop), sd_t = std::sqrt(t.theta_time),
               sd_y = std::sqrt(t.theta_y);

  std::array<double, kSocioCount> mean{};
  for (const auto& [z, row] : city.socio) {
    for (std::size_t i = 0; i < kSocioCount; ++i) mean[i] += row.values[i];
  }
  for (auto& m : mean) m /= static_cast<double>(std::max<std::size_t>(city.socio.size(), 1));

  struct Unit {
    ZctaId zcta;
    std::array<double, kSocioCount> s;
    double eta_mean;
    double y_prev;
  };
  std::vector<Unit> units;
  for (const auto& [z, row] : city.socio) {
    Unit u{z, {}, 0.0, 0.0};
    for (std::size_t i = 0; i < kSocioCount; ++i) {
      u.s[i] = row.values[i] - mean[i];
      u.eta_mean += t.beta_socio[i] * u.s[i];
    }
    u.y_prev = config.lag_start_sd * unit(rng);
    units.push_back(std::move(u));
  }

  std::vector<sem::Panel> panels;
  for (Date day = config.start; day <= config.end; day = day + 1) {
    sem::Panel panel;
    panel.day = day;
    for (auto& u : units) {
      sem::PanelRow row;
      row.zcta = u.zcta;
      row.socio = u.s;
      const double eta = u.eta_mean + sd_zeta * unit(rng);
      row.cei_w = eta + sd_e * unit(rng);
      row.prop_home_w = t.beta_prop * eta + sd_p * unit(rng);
      row.time_home_w = t.beta_time * eta + sd_t * unit(rng);
      row.y_lag = u.y_prev;
      row.y = t.beta_lag * u.y_prev + t.beta_eta * eta + sd_y * unit(rng);
      u.y_prev = row.y;
      panel.rows.push_back(std::move(row));
    }
    panels.push_back(std::move(panel));
  }
  return panels;
}

CasesSeries CasesFromPanels(const SynthConfig& config,
                            const std::vector<sem::Panel>& panels) {
  auto count = [&](double y) {
    return static_cast<std::int64_t>(
        std::llround(std::expm1(std::max(0.0, y + config.case_log_offset))));
  };
  CasesSeries cases;
  for (std::size_t i = 0; i < panels.size(); ++i) {
    for (const auto& row : panels[i].rows) {
      if (i == 0) cases[{row.zcta, panels[i].day - 1}] = count(row.y_lag);
      cases[{row.zcta, panels[i].day}] = count(row.y);
    }
  }
  return cases;
}

std::vector<std::filesystem::path> WriteInputs(
    const std::filesystem::path& dir, const City& city, const Micro& micro,
    const CasesSeries& cases) {
  std::filesystem::create_directories(dir);
  const BucketScheme scheme = BucketScheme::Default();
  std::vector<std::filesystem::path> files = {
      dir / kPoiFile,   dir / kPatternsFile, dir / kDistancingFile,
      dir / kCasesFile, dir / kSocioFile,    dir / kCrosswalkFile};
  WritePoiCatalog(files[0], city.pois);
  WriteVisitPatterns(files[1], micro.patterns, scheme, city.zcta_to_cbg);
  WriteSocialDistancing(files[2], micro.devices);
  WriteCases(files[3], cases);
  WriteSocioeconomics(files[4], city.socio);
  WriteCrosswalk(files[5], city.crosswalk);
  return files;
}

}  // namespace mobexp::synth
