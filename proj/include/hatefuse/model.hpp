#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hatefuse/data.hpp"
#include "hatefuse/encoder.hpp"
#include "hatefuse/prediction_matrix.hpp"

namespace hatefuse {

struct HeadConfig {
  TaskId task = TaskId::type;
  int num_classes = 0;

  static HeadConfig for_schema(const LabelSchema& schema) { return {schema.task(), static_cast<int>(schema.size())}; }
  /// Throws ConfigError if num_classes disagrees with the schema.
  void validate(const LabelSchema& schema) const;
};

/// Multitask objective: alpha * CE_type + beta * CE_severity + gamma * CE_target.
struct LossWeights {
  double alpha = 1.0;
  double beta = 1.0;
  double gamma = 1.0;

  void validate() const;
  double of(TaskId task) const;
};

enum class HeadInit { normal, zeros };

struct TrainingConfig {
  double learning_rate = 2e-5;
  int batch_size = 16;
  int epochs = 3;
  // AdamW with decoupled weight decay; no warmup, no schedule.
  double weight_decay = 0.01;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 42;
  HeadInit head_init = HeadInit::normal;

  void validate() const;
  nlohmann::json to_json() const;
};

struct MultitaskPrediction {
  ag::RowVector type_probs;
  ag::RowVector severity_probs;
  ag::RowVector target_probs;

  const ag::RowVector& of(TaskId task) const;
};

/// Gold class indices (schema order); every task must be present for the
/// multitask loss.
struct MultitaskGold {
  std::optional<std::size_t> type;
  std::optional<std::size_t> severity;
  std::optional<std::size_t> target;

  std::optional<std::size_t> of(TaskId task) const;
};

/// Single affine layer over the pooled vector.
class ClassificationHead {
 public:
  ClassificationHead(HeadConfig config, int hidden_dim, HeadInit init, std::uint64_t seed);
  ClassificationHead(HeadConfig config, ag::Matrix weight, ag::Matrix bias);

  const HeadConfig& config() const { return config_; }
  TaskId task() const { return config_.task; }
  const ag::Var& weight() const { return weight_; }
  const ag::Var& bias() const { return bias_; }

  ag::Var logits(const ag::Var& features) const;
  ag::Matrix probabilities(const ag::Matrix& features) const;

 private:
  HeadConfig config_;
  ag::Var weight_;  // hidden x C
  ag::Var bias_;    // 1 x C
};

/// Softmax probabilities of one head over an encoded batch (B x C).
ag::Matrix forward_single(const EncodedBatch& batch, const ClassificationHead& head, const LabelSchema& schema);

/// Batch-mean cross-entropy of probability rows against gold indices.
double cross_entropy(const ag::Matrix& probs, std::span<const std::size_t> gold);

double mtl_loss(std::span<const MultitaskPrediction> pred, std::span<const MultitaskGold> gold, const LossWeights& w);

enum class TrainingMode { single_task, multitask };

std::string_view to_string(TrainingMode mode);
TrainingMode parse_training_mode(std::string_view s);

/// Identifies everything a prediction depends on structurally: encoder
/// config, mode, heads and label orders.
std::string model_fingerprint(const EncoderConfig& encoder, TrainingMode mode, std::span<const HeadConfig> heads,
                              std::span<const LabelSchema> schemas);

class Model {
 public:
  Model(TrainingMode mode, std::unique_ptr<Encoder> encoder, std::vector<ClassificationHead> heads,
        std::vector<LabelSchema> schemas);

  TrainingMode mode() const { return mode_; }
  const Encoder& encoder() const { return *encoder_; }
  const std::vector<ClassificationHead>& heads() const { return heads_; }
  const std::vector<LabelSchema>& schemas() const { return schemas_; }
  const LabelSchema& schema(TaskId task) const;
  std::string fingerprint() const;

  /// Per-task logits as tape nodes (training path).
  std::vector<std::pair<TaskId, ag::Var>> forward(std::span<const std::string> texts) const;
  /// Per-task probabilities in input order.
  std::map<TaskId, ag::Matrix> predict(std::span<const std::string> texts, std::size_t batch_size = 64) const;
  NamedParameters parameters() const;

  void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;
  static Model load(const std::filesystem::path& path);

 private:
  TrainingMode mode_;
  std::unique_ptr<Encoder> encoder_;
  std::vector<ClassificationHead> heads_;
  std::vector<LabelSchema> schemas_;
};

inline constexpr const char* kModelMagic = "HFMODEL1";

struct TrainResult {
  Model model;
  /// One entry per optimizer step: epochs * ceil(N / batch_size).
  std::vector<double> step_losses;
  std::vector<double> epoch_losses;
  double seconds = 0.0;
};

/// Fine-tunes encoder and heads. Single-task mode takes one head and no loss
/// weights; multitask mode takes the three heads and loss weights. Texts are
/// preprocessed internally (digit removal is idempotent).
TrainResult train(const DatasetSplit& split, const EncoderConfig& encoder, const std::vector<HeadConfig>& heads,
                  const TrainingConfig& tcfg, const std::optional<LossWeights>& weights,
                  const ResourceResolver& resolver = ResourceResolver::from_environment(),
                  const std::function<void(int, double)>& on_epoch = {});

/// One matrix per head, rows in split order.
std::map<TaskId, PredictionMatrix> predict_proba(const Model& model, const DatasetSplit& split,
                                                 const std::string& model_id);

struct RunManifest {
  std::vector<std::pair<std::string, std::string>> settings;
  std::vector<double> step_losses;
  std::vector<double> epoch_losses;
  double wall_clock_seconds = 0.0;
  std::size_t steps_per_epoch = 0;
};

/// Plain text: "key = value" lines, then a tab-separated per-epoch table.
void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);

}  // namespace hatefuse
