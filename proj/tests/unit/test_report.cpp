// Copyright 2026 The starcd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <fstream>
#include <sstream>

#include "starcd/harness/report.hpp"
#include "support.hpp"

using namespace starcd;
using namespace starcd::harness;
using starcd::testing::error_kind_of;
using starcd::testing::TempDir;

namespace {

std::string step_line(int step, double change) {
  std::ostringstream s;
  s << R"({"type":"step","step":)" << step << R"(,"lr":0.01,"loss":)" << change + 1.0 << R"(,"seg":1.0,"change":)"
    << change << R"(,"change_bce":0.5,"bce_positive":0.25,"bce_negative":0.25})";
  return s.str();
}

std::string eval_line(int step, double change_f1, double dpcc_f1) {
  std::ostringstream s;
  s << R"({"type":"eval","step":)" << step << R"(,"change":{"f1":)" << change_f1 << R"(,"iou":0.5},"dpcc":{"f1":)"
    << dpcc_f1 << R"(,"iou":0.4}})";
  return s.str();
}

std::vector<std::string> lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("moving average") {
  const auto a = moving_average({1.0, 0.0, 0.0, 1.0}, 0.5);
  REQUIRE(a.size() == 4);
  CHECK(a[0] == 1.0);
  CHECK(a[1] == 0.5);
  CHECK(a[2] == 0.25);
  CHECK(a[3] == 0.625);
  CHECK(moving_average({}, 0.1).empty());
}

TEST_CASE("tables from logs") {
  TempDir dir("report");
  const auto run_dir = dir.path() / "tdn";
  std::filesystem::create_directories(run_dir);
  {
    std::ofstream log(run_dir / "log.jsonl");
    // EMA with alpha 0.5: 1.0, 0.5, 0.25, 0.125 -> first <= 0.2 at step 4.
    log << step_line(1, 1.0) << "\n" << step_line(2, 0.0) << "\n" << eval_line(2, 0.3, 0.4) << "\n";
    log << step_line(3, 0.0) << "\n" << eval_line(3, 0.5, 0.4) << "\n\n";
    log << step_line(4, 0.0) << "\n" << eval_line(4, 0.6, 0.45) << "\n";
  }
  {
    std::ofstream log(dir.path() / "flat.jsonl");
    log << step_line(1, 0.9) << "\n" << step_line(2, 0.9) << "\n";
  }
  ReportOptions opt;
  opt.ema_alpha = 0.5;
  const auto out = dir.path() / "out";
  const auto runs = report({run_dir / "log.jsonl", dir.path() / "flat.jsonl"}, out, opt);
  REQUIRE(runs.size() == 2);
  CHECK(runs[0].name == "tdn");
  CHECK(runs[0].steps == 4);
  CHECK(runs[0].final_loss == 1.0);
  CHECK(runs[0].steps_to_threshold == 4);
  CHECK(runs[0].change_f1 == 0.6);
  CHECK(runs[0].dpcc_iou == 0.4);
  CHECK(runs[0].change_overtakes_dpcc == 3);
  CHECK(runs[1].name == "flat");
  CHECK(!runs[1].steps_to_threshold);
  CHECK(!runs[1].change_f1);

  const auto steps = lines(out / "tdn.steps.csv");
  REQUIRE(steps.size() == 5);
  CHECK(steps[0] == "step,lr,loss,seg,change,change_bce,bce_positive,bce_negative");
  CHECK(steps[1] == "1,0.01,2,1,1,0.5,0.25,0.25");
  CHECK(lines(out / "tdn.evals.csv").size() == 4);
  CHECK(lines(out / "flat.evals.csv").size() == 1);

  const auto summary = lines(out / "summary.csv");
  REQUIRE(summary.size() == 3);
  CHECK(summary[0].find("steps_to_change_loss_0.2") != std::string::npos);
  CHECK(summary[1].rfind("tdn,4,1,0,4,0.6,0.5,0.45,0.4,3", 0) == 0);
  CHECK(summary[2] == "flat,2,1.9,0.9,,,,,,");
  CHECK(lines(out / "summary.txt").size() == 3);
}

TEST_CASE("malformed logs") {
  TempDir dir("reportbad");
  CHECK(error_kind_of([&] { report({}, dir.path()); }) == ErrorKind::config);
  CHECK(error_kind_of([&] { report({dir.path() / "none.jsonl"}, dir.path()); }) == ErrorKind::data);
  {
    std::ofstream(dir.path() / "junk.jsonl") << step_line(1, 0.5) << "\n{not json\n";
  }
  CHECK(error_kind_of([&] { report({dir.path() / "junk.jsonl"}, dir.path() / "o"); }) == ErrorKind::data);
  {
    std::ofstream(dir.path() / "partial.jsonl") << R"({"type":"step","step":1})" << "\n";
  }
  CHECK(error_kind_of([&] { report({dir.path() / "partial.jsonl"}, dir.path() / "o"); }) == ErrorKind::data);
}
