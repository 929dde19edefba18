#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hatefuse/data.hpp"
#include "hatefuse/encoder.hpp"
#include "hatefuse/ensemble.hpp"
#include "hatefuse/model.hpp"

namespace hatefuse {

struct MetricsConfig {
  /// Empty → equal weights over the evaluated tasks.
  std::map<TaskId, double> task_weights;
  double recall_threshold = 0.5;
  std::size_t error_examples = 10;
};

/// Everything a pipeline run needs. Loaded from an INI-style file with
/// sections [data] [task] [encoder] [training] [loss] [ensemble] [metrics]
/// [output]; later sources override earlier ones:
/// built-in defaults < preset < config file < command-line flags.
struct RunConfig {
  std::map<SplitName, std::filesystem::path> data;
  std::optional<DataFormat> format;
  TrainingMode mode = TrainingMode::single_task;
  TaskId task = TaskId::type;
  EncoderConfig encoder;
  TrainingConfig training;
  LossWeights loss;
  EnsembleSpec ensemble;
  MetricsConfig metrics;
  std::filesystem::path output_dir = "runs/default";
  std::string model_id = "model";
  std::vector<std::string> presets;

  /// Applies one "section.key" setting; throws ConfigError on unknown keys
  /// or unparsable values.
  void set(std::string_view key, const std::string& value);

  std::vector<TaskId> tasks() const;
  std::vector<HeadConfig> heads() const;
  std::vector<LabelSchema> schemas() const;
  std::optional<LossWeights> loss_weights() const;
  DataFormat format_for(SplitName split) const;
  const std::filesystem::path& split_path(SplitName split) const;

  /// Canonical "section.key = value" listing (output dir excluded).
  std::vector<std::pair<std::string, std::string>> snapshot() const;
  std::string fingerprint() const;
  std::string expected_model_fingerprint() const;

  void validate() const;
};

struct PresetInfo {
  std::string name;
  std::string description;
  std::vector<std::pair<std::string, std::string>> settings;
};

const std::vector<PresetInfo>& presets();
void apply_preset(RunConfig& config, std::string_view name);

/// Reads the file, resolving relative data paths against HATEFUSE_DATA_ROOT
/// when set, otherwise against the config file's directory.
RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& presets = {});

}  // namespace hatefuse
