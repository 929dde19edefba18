#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hatefuse/data.hpp"
#include "hatefuse/evaluation.hpp"
#include "hatefuse/run_config.hpp"

namespace hatefuse::cli {

/// Exit codes are a stable scripting contract.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

struct PrepareResult {
  std::map<SplitName, std::size_t> sizes;
  std::map<SplitName, std::vector<LabelDistribution>> distributions;
  std::filesystem::path table_path;
};

struct TrainOutput {
  std::filesystem::path model_path;
  std::filesystem::path manifest_path;
  std::vector<double> step_losses;
  std::vector<double> epoch_losses;
};

struct EvaluateOutput {
  MetricsReport metrics;
  std::filesystem::path metrics_path;
  std::filesystem::path report_path;
  std::vector<std::filesystem::path> confusion_files;
};

PrepareResult cmd_prepare(const RunConfig& config, std::ostream& log);
TrainOutput cmd_train(const RunConfig& config, std::ostream& log);
std::vector<std::filesystem::path> cmd_predict(const RunConfig& config, const std::filesystem::path& model_path,
                                               SplitName split, std::ostream& log);
/// Groups inputs by task (member order preserved) and fuses each group.
std::vector<std::filesystem::path> cmd_fuse(const RunConfig& config, const std::vector<std::filesystem::path>& inputs,
                                            std::ostream& log);
/// Scores prediction files, or the majority baseline when `majority` is set.
EvaluateOutput cmd_evaluate(const RunConfig& config, const std::vector<std::filesystem::path>& predictions,
                            SplitName split, bool majority, std::ostream& log);

/// Entry point used by the `hatefuse` executable. args excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hatefuse::cli
