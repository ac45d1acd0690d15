#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fscil/benchmark.hpp"

namespace fscil {

struct PredictionRow {
  std::size_t session = 0;
  std::string sample_id;
  std::string true_label;
  std::string pred_label;
  std::size_t intro_session = 0;

  bool correct() const { return true_label == pred_label; }
};

struct PredictionLog {
  std::vector<PredictionRow> rows;

  /// Largest session index present.
  std::size_t last_session() const;

  /// Throws MetricError if any row has intro_session > session or index 0.
  void validate() const;
};

// CSV header: session,sample_id,true_label,pred_label,intro_session
inline constexpr const char* kPredictionLogHeader = "session,sample_id,true_label,pred_label,intro_session";
std::string prediction_log_csv(const PredictionLog& log);
PredictionLog parse_prediction_log_csv(const std::string& text);
void write_prediction_log(const std::filesystem::path& path, const PredictionLog& log);
PredictionLog read_prediction_log(const std::filesystem::path& path);

/// Correct / total over the rows of session b.
double session_accuracy(const PredictionLog& log, std::size_t b);

/// Mean per-class accuracy at session b over the given visible classes.
/// Throws MetricError naming any class without test rows.
double macro_accuracy(const PredictionLog& log, std::size_t b, const std::vector<std::string>& visible_classes);

/// Macro accuracy over the classes that appear in session b's rows.
double macro_accuracy(const PredictionLog& log, std::size_t b);

enum class NcaccRange {
  incremental,  // mean over sessions 2..B
  all_sessions  // mean over sessions 1..B (folds in base accuracy)
};

/// Accuracy at session b on rows whose class was introduced at b.
double novel_session_accuracy(const PredictionLog& log, std::size_t b, bool macro = false);

double novel_class_accuracy(const PredictionLog& log, NcaccRange range = NcaccRange::incremental,
                            bool macro = false);

/// |last - first| / first. Throws MetricError when first is 0.
double dropping_rate(double acc_first, double acc_last);

/// Harmonic mean; 0 when both inputs are 0.
double f_fscil(double acc_last, double ncacc);

struct MetricsReport {
  std::vector<double> acc;   // micro accuracy per session
  std::vector<double> macc;  // macro accuracy per session
  std::optional<double> ncacc_micro;
  std::optional<double> ncacc_macro;
  double delta_micro = 0.0;
  double delta_macro = 0.0;
  std::optional<double> f_micro;
  std::optional<double> f_macro;
  NcaccRange ncacc_range = NcaccRange::incremental;
  nlohmann::json config;  // echo of the run configuration, if any
};

struct ReportOptions {
  NcaccRange ncacc_range = NcaccRange::incremental;
};

/// Checks the log against the schedule (every row's class belongs to a
/// session no later than the row's session) and computes every metric. NCAcc
/// and F are left empty for single-session schedules.
MetricsReport compile_report(const PredictionLog& log, const SessionSchedule& schedule,
                             const ReportOptions& options = {});

nlohmann::json report_to_json(const MetricsReport& report);
std::string report_json_text(const MetricsReport& report);

/// Two-row table (micro over macro) with percentages to one decimal.
std::string report_table(const MetricsReport& report);

}  // namespace fscil
