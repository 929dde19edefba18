#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hatefuse/autodiff.hpp"
#include "hatefuse/common.hpp"

namespace hatefuse {

/// N x C class-probability table from one model for one task. This is the
/// interchange unit between predict, fuse and evaluate.
struct PredictionMatrix {
  std::string model_id;
  TaskId task = TaskId::type;
  std::vector<std::string> labels;
  std::vector<std::string> sample_ids;
  ag::Matrix probs;

  // Provenance. Empty strings mean "unknown" and are not checked.
  std::string data_fingerprint;
  std::string model_fingerprint;
  std::string config_fingerprint;
  /// Present on fused outputs: method, members, weights, tie rule.
  nlohmann::ordered_json fusion;

  std::size_t rows() const { return sample_ids.size(); }

  /// Throws ValidationError unless the shape, id uniqueness and the simplex
  /// constraint (rows sum to 1 within tolerance, entries in [0, 1]) hold.
  void validate(double tolerance = 1e-6) const;
};

inline constexpr const char* kPredictionFormat = "hatefuse.prediction_matrix/v1";

/// JSON document; one probability row per line. Doubles are written in
/// shortest round-trip form so the output is byte-stable.
void write_prediction_matrix(const std::filesystem::path& path, const PredictionMatrix& m);
PredictionMatrix read_prediction_matrix(const std::filesystem::path& path);

}  // namespace hatefuse
