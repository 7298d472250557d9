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

// Command-line driver for the mobility exposure pipeline.

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mobexp/core.h"
#include "mobexp/pipeline.h"

namespace {

using mobexp::pipeline::RunConfig;

struct RawOptions {
  std::string input_dir = ".";
  std::string output_dir = "out";
  std::string start_date, end_date;
  std::vector<double> bucket_edges, bucket_mu;
  std::vector<std::string> industry_groups;
  std::string cases_format = "daily";
};

std::optional<mobexp::Date> ParseDateFlag(const std::string& s,
                                          const char* flag) {
  if (s.empty()) return std::nullopt;
  try {
    return mobexp::Date::Parse(s);
  } catch (const mobexp::DataError&) {
    throw mobexp::ConfigError(std::string(flag) + ": bad date '" + s + "'");
  }
}

// "label=code|code|..." entries.
mobexp::IndustryGroups ParseGroups(const std::vector<std::string>& specs) {
  mobexp::IndustryGroups groups;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw mobexp::ConfigError("industry-group needs label=code|code: " +
                                spec);
    }
    const std::string label = spec.substr(0, eq);
    std::vector<std::string>& codes = groups[label];
    std::size_t pos = eq + 1;
    while (pos <= spec.size()) {
      std::size_t bar = spec.find('|', pos);
      if (bar == std::string::npos) bar = spec.size();
      if (bar > pos) codes.push_back(spec.substr(pos, bar - pos));
      pos = bar + 1;
    }
  }
  return groups;
}

RunConfig Finish(RunConfig cfg, const RawOptions& raw) {
  cfg.input_dir = raw.input_dir;
  cfg.output_dir = raw.output_dir;
  cfg.start_date = ParseDateFlag(raw.start_date, "--start-date");
  cfg.end_date = ParseDateFlag(raw.end_date, "--end-date");
  if (!raw.bucket_edges.empty() || !raw.bucket_mu.empty()) {
    try {
      cfg.scheme = mobexp::BucketScheme(raw.bucket_edges, raw.bucket_mu);
    } catch (const std::exception& e) {
      throw mobexp::ConfigError(std::string("bucket scheme: ") + e.what());
    }
  }
  if (!raw.industry_groups.empty()) {
    cfg.industry_groups = ParseGroups(raw.industry_groups);
  }
  cfg.cases_format = raw.cases_format == "cumulative"
                         ? mobexp::CasesFormat::kCumulative
                         : mobexp::CasesFormat::kDaily;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contact exposure and mobility pipeline"};
  app.set_version_flag("--version", MOBEXP_VERSION);
  app.fallthrough();
  app.require_subcommand(1);
  app.set_config("--config", "", "key = value configuration file");

  RunConfig cfg;
  RawOptions raw;
  const std::map<std::string, mobexp::pipeline::CeiAttribution> attribution =
      {{"destination", mobexp::pipeline::CeiAttribution::kDestination},
       {"origin", mobexp::pipeline::CeiAttribution::kOrigin}};
  const std::map<std::string, mobexp::PropHomeMode> modes = {
      {"weighted_mean", mobexp::PropHomeMode::kWeightedMean},
      {"any_day", mobexp::PropHomeMode::kAnyDay}};

  app.add_option("--input-dir", raw.input_dir, "Directory of input CSVs")
      ->capture_default_str();
  app.add_option("--output-dir", raw.output_dir, "Directory for outputs")
      ->capture_default_str();
  app.add_option("--start-date", raw.start_date, "First model day YYYY-MM-DD");
  app.add_option("--end-date", raw.end_date, "Last model day YYYY-MM-DD");
  app.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", cfg.threads, "Worker threads")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  app.add_option("--cei-attribution", cfg.attribution,
                 "Which ZCTA CEI enters the window")
      ->transform(CLI::CheckedTransformer(attribution, CLI::ignore_case))
      ->default_str("origin");
  app.add_option("--prophome-mode", cfg.prop_home_mode,
                 "Window Prop Home estimator")
      ->transform(CLI::CheckedTransformer(modes, CLI::ignore_case))
      ->default_str("weighted_mean");

  app.add_option("--bucket-edges", raw.bucket_edges,
                 "Dwell bucket lower edges in minutes");
  app.add_option("--bucket-mu", raw.bucket_mu,
                 "Representative dwell minutes per bucket");
  app.add_option("--window", cfg.window, "Window length in days")
      ->capture_default_str();
  app.add_option("--lag", cfg.lag, "Days between y and y_lag")
      ->capture_default_str();
  app.add_option("--min-n", cfg.min_rows, "Minimum ZCTAs per panel day")
      ->capture_default_str();
  app.add_option("--industry-group", raw.industry_groups,
                 "label=code|code; replaces the default groups");
  app.add_option("--cases-format", raw.cases_format, "daily or cumulative")
      ->check(CLI::IsMember({"daily", "cumulative"}))
      ->capture_default_str();
  app.add_option("--max-reject-fraction", cfg.read.max_reject_fraction,
                 "Rejected-row fraction that aborts a read")
      ->capture_default_str();
  app.add_option("--grad-tol", cfg.fit.grad_tol, "SEM gradient tolerance")
      ->capture_default_str();
  app.add_option("--rel-f-tol", cfg.fit.rel_f_tol,
                 "SEM relative improvement tolerance")
      ->capture_default_str();
  app.add_option("--max-iterations", cfg.fit.max_iterations,
                 "SEM optimizer iteration cap")
      ->capture_default_str();
  app.add_option("--max-restarts", cfg.fit.max_restarts,
                 "SEM jittered restarts")
      ->capture_default_str();
  app.add_option("--hessian-step", cfg.fit.hessian_step,
                 "Relative step for the numerical Hessian")
      ->capture_default_str();
  app.add_option("--synth-zctas", cfg.synth_zctas, "Synthetic ZCTA count")
      ->capture_default_str();
  app.add_option("--synth-pois", cfg.synth_pois, "Synthetic POI count")
      ->capture_default_str();

  const std::vector<std::pair<std::string, std::vector<std::string>>> groups =
      {{"ingest", {"validate"}},  {"cei", {"compute", "decompose"}},
       {"sdm", {"aggregate"}},    {"panel", {"build"}},
       {"sem", {"fit"}},          {"synth", {"generate"}},
       {"report", {"emit"}}};
  std::string stage;
  for (const auto& [group, actions] : groups) {
    CLI::App* g = app.add_subcommand(group);
    g->require_subcommand(1);
    for (const auto& action : actions) {
      CLI::App* a = g->add_subcommand(action);
      const std::string name = group + " " + action;
      a->callback([&stage, name] { stage = name; });
    }
  }
  app.add_subcommand("run", "Every stage from ingest validate to report emit")
      ->callback([&stage] { stage = "run"; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  RunConfig final_cfg;
  try {
    final_cfg = Finish(cfg, raw);
  } catch (const mobexp::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  return mobexp::pipeline::RunStage(stage, final_cfg);
}
