#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hatefuse/common.hpp"

namespace hatefuse {

/// Ordered label list for one task. The order is part of every artifact's
/// contract: prediction matrices, confusion matrices and heads all index by it.
class LabelSchema {
 public:
  LabelSchema(TaskId task, std::vector<std::string> labels);

  static LabelSchema hate_type();
  static LabelSchema severity();
  static LabelSchema target();
  static LabelSchema for_task(TaskId task);
  static std::vector<LabelSchema> all();

  TaskId task() const { return task_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  std::optional<std::size_t> index_of(std::string_view label) const;
  std::size_t index_or_throw(std::string_view label) const;
  const std::string& label(std::size_t i) const { return labels_.at(i); }

  friend bool operator==(const LabelSchema&, const LabelSchema&) = default;

 private:
  TaskId task_;
  std::vector<std::string> labels_;
};

struct Sample {
  std::string id;
  std::string text;
  std::map<TaskId, std::string> gold;

  friend bool operator==(const Sample&, const Sample&) = default;
};

enum class SplitName { train, dev, test };

std::string_view to_string(SplitName name);
SplitName parse_split_name(std::string_view name);

struct DatasetSplit {
  SplitName name = SplitName::train;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool has_task(TaskId task) const;
};

enum class DataFormat { tsv, jsonl };

DataFormat parse_format(std::string_view name);
std::string_view to_string(DataFormat format);
/// Guesses from the file extension; .jsonl/.json → jsonl, everything else tsv.
DataFormat format_from_path(const std::filesystem::path& path);

/// Loads and validates a split. Every gold label is checked against its
/// schema; errors carry the 1-based line number of the offending record.
DatasetSplit load_split(const std::filesystem::path& path, const std::vector<LabelSchema>& schemas,
                        DataFormat format, SplitName name = SplitName::train);

/// Writes the tasks present in the split. TSV text fields escape tab, newline,
/// carriage return and backslash so that load_split round-trips exactly.
void write_split(const std::filesystem::path& path, const DatasetSplit& split, DataFormat format);

/// Removes Bangla digits (U+09E6..U+09EF). Every other byte is kept as is.
std::string preprocess(std::string_view text);

DatasetSplit preprocess(DatasetSplit split);

/// Per-label gold counts in schema order (zero counts included).
struct LabelDistribution {
  TaskId task;
  std::vector<std::pair<std::string, std::size_t>> counts;

  std::size_t total() const;
  std::size_t count(std::string_view label) const;
};

LabelDistribution label_distribution(const DatasetSplit& split, const LabelSchema& schema);

/// Digest over the split's ids and texts; carried by prediction files so
/// that downstream commands can reject mismatched inputs.
std::string data_fingerprint(const DatasetSplit& split);

}  // namespace hatefuse
