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

#include <sys/wait.h>

#include <cmath>
#include <cstdlib>
#include <memory>
#include <sstream>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "json.hpp"
#include "mobexp/csv.h"
#include "test_util.h"

namespace mobexp::pipeline {
namespace {

namespace fs = std::filesystem;
using ::testing::HasSubstr;
using testing_util::ReadText;
using testing_util::TempDir;
using testing_util::WriteText;

struct CliResult {
  int status = -1;
  std::string err;
};

CliResult Cli(const std::string& args) {
  static TempDir scratch;
  const fs::path err = scratch / "stderr.txt";
  const std::string cmd = std::string(MOBEXP_CLI) + " " + args + " >/dev/null 2>" +
                          err.string();
  const int raw = std::system(cmd.c_str());
  CliResult r;
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.err = ReadText(err);
  return r;
}

std::vector<std::vector<std::string>> ReadRows(const fs::path& path,
                                               std::vector<std::string>* header) {
  csv::Reader reader(path);
  *header = reader.header();
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  while (reader.Next(row)) rows.push_back(row);
  return rows;
}

std::string Header(const fs::path& path) {
  const std::string text = ReadText(path);
  return text.substr(0, text.find('\n'));
}

constexpr const char* kCommon =
    " --seed 7 --synth-zctas 60 --synth-pois 150"
    " --start-date 2020-04-01 --end-date 2020-04-12";

class PipelineTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    root_ = std::make_unique<TempDir>();
    ASSERT_EQ(Cli("synth generate --output-dir " + Input().string() + kCommon)
                  .status,
              0);
    run_ = Cli("run --input-dir " + Input().string() + " --output-dir " +
               Output().string() + " --threads 2" + kCommon);
  }
  static void TearDownTestSuite() { root_.reset(); }

  static fs::path Input() { return *root_ / "in"; }
  static fs::path Output() { return *root_ / "out"; }

  static std::unique_ptr<TempDir> root_;
  static CliResult run_;
};

std::unique_ptr<TempDir> PipelineTest::root_;
CliResult PipelineTest::run_;

TEST_F(PipelineTest, FullRunSucceeds) {
  ASSERT_EQ(run_.status, 0) << run_.err;
  EXPECT_TRUE(fs::exists(Output() / kSemSeries));
  std::vector<std::string> header;
  const auto rows = ReadRows(Output() / kSemSeries, &header);
  EXPECT_THAT(header, ::testing::ElementsAre("date", "param_name", "estimate",
                                             "std_error", "converged", "n_obs",
                                             "f_ml"));
  ASSERT_FALSE(rows.empty());
  EXPECT_EQ(rows.size() % 15, 0u);
}

TEST_F(PipelineTest, ReportHeaders) {
  ASSERT_EQ(run_.status, 0) << run_.err;
  EXPECT_EQ(Header(Output() / "report_trends.csv"), "series,date,value,ma7");
  EXPECT_EQ(Header(Output() / "report_coefficients.csv"),
            "param_name,date,estimate,std_error,lower,upper,ma7");
  EXPECT_EQ(Header(Output() / "report_industry.csv"),
            "label,date,cei,cei_ma7,share");
  EXPECT_EQ(Header(Output() / "report_scatter.csv"),
            "zcta,date,income_class,cei_window,cases");
  EXPECT_EQ(Header(Output() / kMobilityWindow), "zcta,date,E_w,P_w,T_w,N_sum");
  EXPECT_EQ(Header(Output() / kDistancingDay),
            "zcta,date,devices,prop_home,time_home");
}

TEST_F(PipelineTest, TrendMovingAverageRecomputes) {
  ASSERT_EQ(run_.status, 0) << run_.err;
  std::vector<std::string> header;
  const auto rows = ReadRows(Output() / "report_trends.csv", &header);
  std::map<std::string, std::vector<std::pair<Date, double>>> series;
  std::map<std::string, std::vector<double>> reported;
  for (const auto& r : rows) {
    series[r[0]].emplace_back(Date::Parse(r[1]), std::stod(r[2]));
    reported[r[0]].push_back(std::stod(r[3]));
  }
  EXPECT_THAT(series, ::testing::Contains(::testing::Key("cei")));
  for (const auto& [name, values] : series) {
    // Independent trailing mean restarted at each gap.
    for (std::size_t i = 0; i < values.size(); ++i) {
      std::size_t lo = i;
      while (lo > 0 && i - lo < 6 &&
             values[lo - 1].first + 1 == values[lo].first) {
        --lo;
      }
      double sum = 0.0;
      for (std::size_t j = lo; j <= i; ++j) sum += values[j].second;
      const double expected = sum / static_cast<double>(i - lo + 1);
      EXPECT_NEAR(reported[name][i], expected,
                  1e-12 * std::max(1.0, std::abs(expected)))
          << name << " " << i;
    }
  }
}

TEST_F(PipelineTest, ManifestIsComplete) {
  ASSERT_EQ(run_.status, 0) << run_.err;
  const auto m = nlohmann::json::parse(ReadText(Output() / kManifest));
  EXPECT_EQ(m.at("tool"), "mobexp");
  EXPECT_FALSE(m.at("version").get<std::string>().empty());
  EXPECT_EQ(m.at("config_digest").get<std::string>().size(), 64u);
  for (const auto& stage : StageNames()) {
    EXPECT_TRUE(m.at("stages").contains(stage)) << stage;
  }
  EXPECT_TRUE(m.at("inputs").contains(kPoiFile));
  EXPECT_EQ(m.at("inputs").size(), 6u);
  std::size_t csvs = 0;
  for (const auto& e : fs::recursive_directory_iterator(Output())) {
    if (!e.is_regular_file() || e.path().filename() == kManifest) continue;
    const std::string rel = fs::relative(e.path(), Output()).generic_string();
    ASSERT_TRUE(m.at("outputs").contains(rel)) << rel;
    EXPECT_EQ(m.at("outputs").at(rel), FileDigest(e.path())) << rel;
    ++csvs;
  }
  EXPECT_EQ(m.at("outputs").size(), csvs);
}

TEST_F(PipelineTest, RerunIsByteIdentical) {
  ASSERT_EQ(run_.status, 0) << run_.err;
  TempDir again;
  const auto r = Cli("run --input-dir " + Input().string() + " --output-dir " +
                     again.path().string() + " --threads 1" + kCommon);
  ASSERT_EQ(r.status, 0) << r.err;
  const auto a = nlohmann::json::parse(ReadText(Output() / kManifest));
  const auto b = nlohmann::json::parse(ReadText(again / kManifest));
  EXPECT_EQ(a.at("outputs"), b.at("outputs"));
  EXPECT_EQ(a.at("config_digest"), b.at("config_digest"));
}

TEST_F(PipelineTest, EmptySemSeriesGivesEmptyCoefficientReport) {
  ASSERT_EQ(run_.status, 0) << run_.err;
  TempDir out;
  const auto r = Cli("run --input-dir " + Input().string() + " --output-dir " +
                     out.path().string() + " --min-n 100000");
  ASSERT_EQ(r.status, 0) << r.err;
  std::vector<std::string> header;
  EXPECT_TRUE(ReadRows(out / kSemSeries, &header).empty());
  EXPECT_TRUE(ReadRows(out / "report_coefficients.csv", &header).empty());
  EXPECT_EQ(header.size(), 7u);
  const auto days = ReadText(out / kSemDays);
  EXPECT_THAT(days, HasSubstr("gap"));
}

TEST(PipelineErrorsTest, MissingInputIsDataError) {
  TempDir in, out;
  const auto r = Cli("ingest validate --input-dir " + in.path().string() +
                     " --output-dir " + out.path().string());
  EXPECT_EQ(r.status, 1);
  EXPECT_THAT(r.err, HasSubstr(in.path().string()));
}

TEST(PipelineErrorsTest, MissingUpstreamNamesStage) {
  TempDir in, out;
  const auto r = Cli("sem fit --input-dir " + in.path().string() +
                     " --output-dir " + out.path().string());
  EXPECT_EQ(r.status, 1);
  EXPECT_THAT(r.err, HasSubstr("panel build"));
}

TEST(PipelineErrorsTest, ConfigErrors) {
  TempDir dir;
  EXPECT_EQ(Cli("run --window 0 --input-dir " + dir.path().string()).status, 2);
  EXPECT_EQ(Cli("run --cei-attribution sideways").status, 2);
  EXPECT_EQ(Cli("run --config " + (dir / "absent.toml").string()).status, 2);
  EXPECT_EQ(Cli("").status, 2);
  EXPECT_EQ(Cli("run --start-date 2020-13-01").status, 2);
  WriteText(dir / "bad.toml", "bucket-edges = [0, 5]\nbucket-mu = [1]\n");
  EXPECT_EQ(Cli("run --config " + (dir / "bad.toml").string()).status, 2);
}

TEST(RunConfigTest, DigestIgnoresPathsAndThreads) {
  RunConfig a, b;
  b.input_dir = "/elsewhere";
  b.output_dir = "/other";
  b.threads = 8;
  EXPECT_EQ(a.Canonical(), b.Canonical());
  b.seed = 1;
  EXPECT_NE(a.Canonical(), b.Canonical());
  EXPECT_EQ(TextDigest("abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

}  // namespace
}  // namespace mobexp::pipeline
