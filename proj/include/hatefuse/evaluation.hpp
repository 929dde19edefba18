#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hatefuse/data.hpp"

namespace hatefuse {

/// counts[i][j]: gold label i predicted as label j, in schema order.
struct ConfusionMatrix {
  std::vector<std::string> labels;
  std::vector<std::vector<std::size_t>> counts;

  std::size_t total() const;
  std::size_t trace() const;
  std::vector<std::size_t> row_sums() const;
  std::vector<std::size_t> col_sums() const;
};

ConfusionMatrix confusion_matrix(std::span<const std::string> pred, std::span<const std::string> gold,
                                 const LabelSchema& schema);

/// F1 from true/false positives and false negatives pooled over all classes.
double micro_f1(std::span<const std::string> pred, std::span<const std::string> gold, const LabelSchema& schema);
double micro_f1(const ConfusionMatrix& cm);

/// sum_t w_t * f1_t. Weights must cover exactly the given tasks, be
/// nonnegative and sum to 1 within 1e-6.
double weighted_micro_f1(const std::map<TaskId, double>& per_task, const std::map<TaskId, double>& task_weights);

std::map<TaskId, double> equal_task_weights(std::span<const TaskId> tasks);

/// Recall per label; nullopt for labels absent from gold.
std::vector<std::pair<std::string, std::optional<double>>> per_class_recall(const ConfusionMatrix& cm);

struct MetricsReport {
  std::size_t n_samples = 0;
  std::map<TaskId, double> per_task_micro_f1;
  std::optional<double> weighted_micro_f1;
  std::map<TaskId, double> task_weights;
  std::map<TaskId, ConfusionMatrix> confusion;
  std::map<TaskId, std::vector<std::pair<std::string, std::optional<double>>>> per_class_recall;
  std::map<TaskId, std::string> prediction_source;
  std::string data_fingerprint;
  std::string config_fingerprint;

  nlohmann::ordered_json to_json() const;
};

/// Scores per-task predictions against the split's gold labels. The weighted
/// score is filled in when all three tasks are present.
MetricsReport evaluate(const DatasetSplit& gold, const std::map<TaskId, std::vector<std::string>>& pred,
                       const std::vector<LabelSchema>& schemas,
                       const std::optional<std::map<TaskId, double>>& task_weights = std::nullopt);

struct ErrorExample {
  std::string id;
  std::string text;
  std::string gold;
  std::string predicted;
};

struct TaskErrors {
  TaskId task;
  std::size_t total_errors = 0;
  std::vector<ErrorExample> examples;  // at most k
  std::vector<std::pair<std::string, std::optional<double>>> recall;
  std::vector<std::string> low_recall;  // labels with recall < threshold
};

struct ErrorReport {
  double recall_threshold = 0.5;
  std::vector<TaskErrors> tasks;

  std::string to_markdown() const;
};

ErrorReport error_report(const DatasetSplit& split, const std::map<TaskId, std::vector<std::string>>& pred,
                         std::size_t k, const std::vector<LabelSchema>& schemas, double recall_threshold = 0.5);

/// Most frequent training label (lowest schema index on ties).
std::string majority_label(const DatasetSplit& train, const LabelSchema& schema);
std::vector<std::string> majority_baseline(const DatasetSplit& train, const DatasetSplit& eval,
                                           const LabelSchema& schema);

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm);
/// Row-normalised heatmap with raw counts printed in each cell.
void write_confusion_svg(const std::filesystem::path& path, const ConfusionMatrix& cm, const std::string& title);

}  // namespace hatefuse
