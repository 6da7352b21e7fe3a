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

#include "starcd/harness/report.hpp"

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

#include "starcd/core/error.hpp"

namespace starcd::harness {

std::vector<double> moving_average(const std::vector<double>& xs, double alpha) {
  std::vector<double> out;
  out.reserve(xs.size());
  for (double x : xs) out.push_back(out.empty() ? x : (1.0 - alpha) * out.back() + alpha * x);
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

template <typename V>
std::string opt_str(const std::optional<V>& v) {
  if (!v) return "";
  if constexpr (std::is_floating_point_v<V>) return fmt(*v);
  return std::to_string(*v);
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  check(out.good(), ErrorKind::io, "cannot write " + p.string());
  return out;
}

RunSummary summarize(const std::filesystem::path& log, const std::filesystem::path& out_dir, const ReportOptions& opt) {
  std::ifstream in(log);
  check(in.good(), ErrorKind::data, "cannot read log " + log.string());
  RunSummary s;
  s.name = log.stem().string();
  if (s.name == "log" && log.has_parent_path()) s.name = log.parent_path().filename().string();

  auto steps_csv = open_out(out_dir / (s.name + ".steps.csv"));
  auto evals_csv = open_out(out_dir / (s.name + ".evals.csv"));
  steps_csv << "step,lr,loss,seg,change,change_bce,bce_positive,bce_negative\n";
  evals_csv << "step,change_f1,change_iou,dpcc_f1,dpcc_iou\n";

  std::vector<double> change_losses;
  std::vector<int> change_steps;
  int line_no = 0;
  bool ahead = false;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
      const std::string type = j.value("type", "");
      if (type == "step") {
        const int step = j.at("step").get<int>();
        const double change = j.at("change").get<double>();
        steps_csv << step << "," << fmt(j.at("lr").get<double>()) << "," << fmt(j.at("loss").get<double>()) << ","
                  << fmt(j.at("seg").get<double>()) << "," << fmt(change) << ","
                  << fmt(j.at("change_bce").get<double>()) << "," << fmt(j.at("bce_positive").get<double>()) << ","
                  << fmt(j.at("bce_negative").get<double>()) << "\n";
        s.steps = step;
        s.final_loss = j.at("loss").get<double>();
        s.final_change_loss = change;
        change_losses.push_back(change);
        change_steps.push_back(step);
      } else if (type == "eval") {
        const int step = j.at("step").get<int>();
        const double cf1 = j.at("change").at("f1").get<double>();
        const double df1 = j.at("dpcc").at("f1").get<double>();
        s.change_f1 = cf1;
        s.change_iou = j.at("change").at("iou").get<double>();
        s.dpcc_f1 = df1;
        s.dpcc_iou = j.at("dpcc").at("iou").get<double>();
        evals_csv << step << "," << fmt(cf1) << "," << fmt(*s.change_iou) << "," << fmt(df1) << ","
                  << fmt(*s.dpcc_iou) << "\n";
        if (cf1 > df1 && !ahead) {
          s.change_overtakes_dpcc = step;
          ahead = true;
        } else if (cf1 <= df1) {
          ahead = false;
          s.change_overtakes_dpcc.reset();
        }
      }
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::data, log.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  const auto avg = moving_average(change_losses, opt.ema_alpha);
  for (std::size_t i = 0; i < avg.size(); ++i) {
    if (avg[i] <= opt.change_loss_threshold) {
      s.steps_to_threshold = change_steps[i];
      break;
    }
  }
  return s;
}

}  // namespace

std::vector<RunSummary> report(const std::vector<std::filesystem::path>& logs, const std::filesystem::path& out_dir,
                               const ReportOptions& opt) {
  check(!logs.empty(), ErrorKind::config, "report needs at least one log");
  std::filesystem::create_directories(out_dir);
  std::vector<RunSummary> runs;
  for (const auto& log : logs) runs.push_back(summarize(log, out_dir, opt));

  const std::vector<std::string> header = {"run",     "steps",    "final_loss", "final_change_loss",
                                           "steps_to_change_loss_" + fmt(opt.change_loss_threshold),
                                           "change_f1", "change_iou", "dpcc_f1",  "dpcc_iou",
                                           "change_overtakes_dpcc"};
  std::vector<std::vector<std::string>> rows;
  for (const auto& r : runs) {
    rows.push_back({r.name, std::to_string(r.steps), fmt(r.final_loss), fmt(r.final_change_loss),
                    opt_str(r.steps_to_threshold), opt_str(r.change_f1), opt_str(r.change_iou), opt_str(r.dpcc_f1),
                    opt_str(r.dpcc_iou), opt_str(r.change_overtakes_dpcc)});
  }

  auto csv = open_out(out_dir / "summary.csv");
  for (std::size_t i = 0; i < header.size(); ++i) csv << (i ? "," : "") << header[i];
  csv << "\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) csv << (i ? "," : "") << row[i];
    csv << "\n";
  }

  std::vector<std::size_t> width(header.size());
  for (std::size_t i = 0; i < header.size(); ++i) {
    width[i] = header[i].size();
    for (const auto& row : rows) width[i] = std::max(width[i], row[i].size());
  }
  auto txt = open_out(out_dir / "summary.txt");
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i)
      txt << (i ? "  " : "") << std::left << std::setw(static_cast<int>(width[i])) << cells[i];
    txt << "\n";
  };
  line(header);
  for (const auto& row : rows) line(row);
  return runs;
}

}  // namespace starcd::harness
