#include "fscil/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include <spdlog/fmt/fmt.h>

#include "fscil/binary_io.hpp"
#include "fscil/error.hpp"

namespace fscil {

namespace {

struct Tally {
  std::size_t correct = 0;
  std::size_t total = 0;
  double rate() const { return static_cast<double>(correct) / static_cast<double>(total); }
};

std::map<std::string, Tally> per_class(const PredictionLog& log, std::size_t b, bool novel_only) {
  std::map<std::string, Tally> out;
  for (const auto& r : log.rows) {
    if (r.session != b || (novel_only && r.intro_session != b)) continue;
    auto& t = out[r.true_label];
    ++t.total;
    if (r.correct()) ++t.correct;
  }
  return out;
}

double mean_of_rates(const std::map<std::string, Tally>& tallies) {
  double sum = 0.0;
  for (const auto& [name, t] : tallies) sum += t.rate();
  return sum / static_cast<double>(tallies.size());
}

std::size_t parse_index(const std::string& field, std::size_t line) {
  try {
    std::size_t used = 0;
    const unsigned long v = std::stoul(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw FormatError("prediction log line " + std::to_string(line) + ": bad integer '" + field + "'");
  }
}

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::string pct(double v) { return fmt::format("{:.1f}", 100.0 * v); }
std::string pct(const std::optional<double>& v) { return v ? pct(*v) : std::string("-"); }

}  // namespace

std::size_t PredictionLog::last_session() const {
  std::size_t b = 0;
  for (const auto& r : rows) b = std::max(b, r.session);
  return b;
}

void PredictionLog::validate() const {
  for (const auto& r : rows) {
    if (r.session == 0 || r.intro_session == 0) throw MetricError("session indices start at 1");
    if (r.intro_session > r.session) {
      throw MetricError("row '" + r.sample_id + "' has intro session " + std::to_string(r.intro_session) +
                        " after its evaluation session " + std::to_string(r.session));
    }
  }
}

std::string prediction_log_csv(const PredictionLog& log) {
  std::string out = std::string(kPredictionLogHeader) + "\n";
  for (const auto& r : log.rows) {
    for (const auto* field : {&r.sample_id, &r.true_label, &r.pred_label}) {
      if (field->find_first_of(",\n\"") != std::string::npos) {
        throw FormatError("prediction log field '" + *field + "' contains a comma, quote or newline");
      }
    }
    out += fmt::format("{},{},{},{},{}\n", r.session, r.sample_id, r.true_label, r.pred_label, r.intro_session);
  }
  return out;
}

PredictionLog parse_prediction_log_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kPredictionLogHeader) throw FormatError("prediction log header mismatch");
  PredictionLog log;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ls(line);
    std::string f;
    while (std::getline(ls, f, ',')) fields.push_back(f);
    if (fields.size() != 5) throw FormatError("prediction log line " + std::to_string(line_no) + " needs 5 fields");
    log.rows.push_back({parse_index(fields[0], line_no), fields[1], fields[2], fields[3], parse_index(fields[4], line_no)});
  }
  log.validate();
  return log;
}

void write_prediction_log(const std::filesystem::path& path, const PredictionLog& log) {
  io::write_text_file(path, prediction_log_csv(log));
}

PredictionLog read_prediction_log(const std::filesystem::path& path) {
  return parse_prediction_log_csv(io::read_text_file(path));
}

double session_accuracy(const PredictionLog& log, std::size_t b) {
  Tally t;
  for (const auto& r : log.rows) {
    if (r.session != b) continue;
    ++t.total;
    if (r.correct()) ++t.correct;
  }
  if (t.total == 0) throw MetricError("session " + std::to_string(b) + " has no test rows");
  return t.rate();
}

double macro_accuracy(const PredictionLog& log, std::size_t b, const std::vector<std::string>& visible_classes) {
  const auto tallies = per_class(log, b, false);
  double sum = 0.0;
  for (const auto& name : visible_classes) {
    const auto it = tallies.find(name);
    if (it == tallies.end()) {
      throw MetricError("class '" + name + "' has no test rows at session " + std::to_string(b));
    }
    sum += it->second.rate();
  }
  if (visible_classes.empty()) throw MetricError("no visible classes at session " + std::to_string(b));
  return sum / static_cast<double>(visible_classes.size());
}

double macro_accuracy(const PredictionLog& log, std::size_t b) {
  const auto tallies = per_class(log, b, false);
  if (tallies.empty()) throw MetricError("session " + std::to_string(b) + " has no test rows");
  return mean_of_rates(tallies);
}

double novel_session_accuracy(const PredictionLog& log, std::size_t b, bool macro) {
  const auto tallies = per_class(log, b, true);
  if (tallies.empty()) throw MetricError("session " + std::to_string(b) + " has no novel-class rows");
  if (macro) return mean_of_rates(tallies);
  Tally all;
  for (const auto& [name, t] : tallies) {
    all.correct += t.correct;
    all.total += t.total;
  }
  return all.rate();
}

double novel_class_accuracy(const PredictionLog& log, NcaccRange range, bool macro) {
  const std::size_t last = log.last_session();
  const std::size_t first = range == NcaccRange::incremental ? 2 : 1;
  if (last < first) throw MetricError("log has no incremental sessions");
  double sum = 0.0;
  for (std::size_t b = first; b <= last; ++b) sum += novel_session_accuracy(log, b, macro);
  return sum / static_cast<double>(last - first + 1);
}

double dropping_rate(double acc_first, double acc_last) {
  if (!(acc_first > 0.0)) throw MetricError("dropping rate is undefined when the first-session accuracy is 0");
  return std::abs(acc_last - acc_first) / acc_first;
}

double f_fscil(double acc_last, double ncacc) {
  if (acc_last + ncacc == 0.0) return 0.0;
  return 2.0 * acc_last * ncacc / (acc_last + ncacc);
}

MetricsReport compile_report(const PredictionLog& log, const SessionSchedule& schedule, const ReportOptions& options) {
  log.validate();
  const std::size_t sessions = schedule.size();
  if (log.last_session() != sessions) {
    throw MetricError("log covers " + std::to_string(log.last_session()) + " sessions but the schedule has " +
                      std::to_string(sessions));
  }
  for (const auto& r : log.rows) {
    if (r.intro_session != schedule.intro_session(r.true_label)) {
      throw MetricError("row '" + r.sample_id + "' disagrees with the schedule on when '" + r.true_label +
                        "' was introduced");
    }
  }

  MetricsReport report;
  report.ncacc_range = options.ncacc_range;
  for (std::size_t b = 1; b <= sessions; ++b) {
    report.acc.push_back(session_accuracy(log, b));
    report.macc.push_back(macro_accuracy(log, b, schedule.visible_classes(b)));
  }
  report.delta_micro = dropping_rate(report.acc.front(), report.acc.back());
  report.delta_macro = dropping_rate(report.macc.front(), report.macc.back());
  if (sessions >= 2 || options.ncacc_range == NcaccRange::all_sessions) {
    report.ncacc_micro = novel_class_accuracy(log, options.ncacc_range, false);
    report.ncacc_macro = novel_class_accuracy(log, options.ncacc_range, true);
    report.f_micro = f_fscil(report.acc.back(), *report.ncacc_micro);
    report.f_macro = f_fscil(report.macc.back(), *report.ncacc_macro);
  }
  return report;
}

nlohmann::json report_to_json(const MetricsReport& r) {
  nlohmann::json j;
  j["sessions"] = r.acc.size();
  j["micro"] = {{"acc", r.acc}, {"ncacc", optional_json(r.ncacc_micro)}, {"delta", r.delta_micro},
                {"f_fscil", optional_json(r.f_micro)}};
  j["macro"] = {{"acc", r.macc}, {"ncacc", optional_json(r.ncacc_macro)}, {"delta", r.delta_macro},
                {"f_fscil", optional_json(r.f_macro)}};
  j["ncacc_range"] = r.ncacc_range == NcaccRange::incremental ? "incremental" : "all_sessions";
  if (!r.config.is_null()) j["config"] = r.config;
  return j;
}

std::string report_json_text(const MetricsReport& report) { return report_to_json(report).dump(2) + "\n"; }

std::string report_table(const MetricsReport& r) {
  std::string header = fmt::format("{:<6}", "");
  for (std::size_t b = 0; b < r.acc.size(); ++b) header += fmt::format(" {:>6}", fmt::format("S{}", b + 1));
  header += fmt::format(" {:>6} {:>6} {:>6}\n", "NCAcc", "Delta", "F");
  auto row = [&](const char* label, const std::vector<double>& acc, const std::optional<double>& nc, double delta,
                 const std::optional<double>& f) {
    std::string line = fmt::format("{:<6}", label);
    for (double a : acc) line += fmt::format(" {:>6}", pct(a));
    line += fmt::format(" {:>6} {:>6} {:>6}\n", pct(nc), pct(delta), pct(f));
    return line;
  };
  return header + row("micro", r.acc, r.ncacc_micro, r.delta_micro, r.f_micro) +
         row("macro", r.macc, r.ncacc_macro, r.delta_macro, r.f_macro);
}

}  // namespace fscil
