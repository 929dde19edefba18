#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hatefuse/common.hpp"
#include "hatefuse/data.hpp"
#include "hatefuse/prediction_matrix.hpp"

namespace hatefuse::testing {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "hatefuse");
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

void write_text(const std::filesystem::path& path, const std::string& content);
std::string read_text(const std::filesystem::path& path);

/// Labelled samples whose texts carry one marker word per task label plus
/// filler, so all three tasks are separable from the text alone.
DatasetSplit separable_split(std::size_t n, std::uint64_t seed, SplitName name = SplitName::train);

/// Train split with exactly the published train-set label counts for all
/// three tasks (35,522 rows), labels paired at random.
DatasetSplit published_train_split(std::uint64_t seed);

/// Random row on the probability simplex.
std::vector<double> random_simplex(Rng& rng, std::size_t classes);

PredictionMatrix random_matrix(Rng& rng, const std::string& model_id, std::size_t rows, std::size_t classes,
                               TaskId task = TaskId::type);

}  // namespace hatefuse::testing
