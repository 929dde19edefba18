#include "hatefuse/model.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <set>

#include "hatefuse/tensor_io.hpp"

namespace hatefuse {

void HeadConfig::validate(const LabelSchema& schema) const {
  if (task != schema.task()) throw ConfigError("head task does not match its schema");
  if (num_classes != static_cast<int>(schema.size())) {
    throw ConfigError("head for '" + std::string(to_string(task)) + "' has " + std::to_string(num_classes) +
                      " classes but the schema has " + std::to_string(schema.size()));
  }
}

void LossWeights::validate() const {
  for (double w : {alpha, beta, gamma}) {
    if (!std::isfinite(w) || w < 0.0) throw ConfigError("loss weights must be finite and nonnegative");
  }
  if (alpha <= 0.0 && beta <= 0.0 && gamma <= 0.0) throw ConfigError("at least one loss weight must be positive");
}

double LossWeights::of(TaskId task) const {
  switch (task) {
    case TaskId::type:
      return alpha;
    case TaskId::severity:
      return beta;
    case TaskId::target:
      return gamma;
  }
  return 0.0;
}

void TrainingConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 && adam_eps > 0.0)) {
    throw ConfigError("invalid AdamW moments configuration");
  }
}

nlohmann::json TrainingConfig::to_json() const {
  return {{"learning_rate", learning_rate}, {"batch_size", batch_size},
          {"epochs", epochs},               {"optimizer", "adamw"},
          {"weight_decay", weight_decay},   {"adam_beta1", adam_beta1},
          {"adam_beta2", adam_beta2},       {"adam_eps", adam_eps},
          {"seed", seed},                   {"head_init", head_init == HeadInit::zeros ? "zeros" : "normal"}};
}

const ag::RowVector& MultitaskPrediction::of(TaskId task) const {
  switch (task) {
    case TaskId::type:
      return type_probs;
    case TaskId::severity:
      return severity_probs;
    case TaskId::target:
      return target_probs;
  }
  return type_probs;
}

std::optional<std::size_t> MultitaskGold::of(TaskId task) const {
  switch (task) {
    case TaskId::type:
      return type;
    case TaskId::severity:
      return severity;
    case TaskId::target:
      return target;
  }
  return std::nullopt;
}

ClassificationHead::ClassificationHead(HeadConfig config, int hidden_dim, HeadInit init, std::uint64_t seed)
    : config_(config) {
  if (config_.num_classes < 1 || hidden_dim < 1) throw ConfigError("head dimensions must be positive");
  ag::Matrix w = ag::Matrix::Zero(hidden_dim, config_.num_classes);
  if (init == HeadInit::normal) {
    Rng rng(Fnv1a(seed).update("head:").update(to_string(config_.task)).digest());
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.normal(0.0, 0.02);
    }
  }
  weight_ = ag::parameter(std::move(w));
  bias_ = ag::parameter(ag::Matrix::Zero(1, config_.num_classes));
}

ClassificationHead::ClassificationHead(HeadConfig config, ag::Matrix weight, ag::Matrix bias) : config_(config) {
  if (weight.cols() != config_.num_classes || bias.rows() != 1 || bias.cols() != config_.num_classes) {
    throw ValidationError("head weights do not match the head configuration");
  }
  weight_ = ag::parameter(std::move(weight));
  bias_ = ag::parameter(std::move(bias));
}

ag::Var ClassificationHead::logits(const ag::Var& features) const {
  if (features.cols() != weight_.rows()) {
    throw ConfigError("head expects " + std::to_string(weight_.rows()) + "-dim features, got " +
                      std::to_string(features.cols()));
  }
  return ag::add_row(ag::matmul(features, weight_), bias_);
}

ag::Matrix ClassificationHead::probabilities(const ag::Matrix& features) const {
  if (features.cols() != weight_.rows()) {
    throw ConfigError("head expects " + std::to_string(weight_.rows()) + "-dim features, got " +
                      std::to_string(features.cols()));
  }
  ag::Matrix z = features * weight_.value();
  z.rowwise() += bias_.value().row(0);
  return ag::softmax(z);
}

ag::Matrix forward_single(const EncodedBatch& batch, const ClassificationHead& head, const LabelSchema& schema) {
  head.config().validate(schema);
  return head.probabilities(batch.vectors);
}

double cross_entropy(const ag::Matrix& probs, std::span<const std::size_t> gold) {
  if (static_cast<Eigen::Index>(gold.size()) != probs.rows() || gold.empty()) {
    throw ValidationError("cross-entropy needs one gold label per probability row");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= static_cast<std::size_t>(probs.cols())) throw ValidationError("gold index out of range");
    sum -= std::log(probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(gold[i])));
  }
  return sum / static_cast<double>(gold.size());
}

double mtl_loss(std::span<const MultitaskPrediction> pred, std::span<const MultitaskGold> gold, const LossWeights& w) {
  w.validate();
  if (pred.size() != gold.size() || pred.empty()) {
    throw ValidationError("multitask loss needs one gold triple per prediction");
  }
  double total = 0.0;
  for (TaskId task : kAllTasks) {
    const auto cols = pred[0].of(task).size();
    ag::Matrix probs(static_cast<Eigen::Index>(pred.size()), cols);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const auto g = gold[i].of(task);
      if (!g) {
        throw ValidationError("sample " + std::to_string(i) + " lacks a gold '" + std::string(to_string(task)) +
                              "' label (multitask loss needs all three)");
      }
      if (pred[i].of(task).size() != cols) throw ValidationError("inconsistent probability vector widths");
      probs.row(static_cast<Eigen::Index>(i)) = pred[i].of(task);
      idx.push_back(*g);
    }
    total += w.of(task) * cross_entropy(probs, idx);
  }
  return total;
}

std::string_view to_string(TrainingMode mode) { return mode == TrainingMode::single_task ? "single" : "multitask"; }

TrainingMode parse_training_mode(std::string_view s) {
  if (s == "single" || s == "single_task") return TrainingMode::single_task;
  if (s == "multitask") return TrainingMode::multitask;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected single or multitask)");
}

std::string model_fingerprint(const EncoderConfig& encoder, TrainingMode mode, std::span<const HeadConfig> heads,
                              std::span<const LabelSchema> schemas) {
  Fnv1a h;
  h.update("hatefuse-model-v1").update(encoder.fingerprint()).update(to_string(mode));
  for (const auto& head : heads) {
    h.update("|head:").update(to_string(head.task)).update_u64(static_cast<std::uint64_t>(head.num_classes));
    for (const auto& s : schemas) {
      if (s.task() != head.task) continue;
      for (const auto& l : s.labels()) h.update_u64(l.size()).update(l);
    }
  }
  return h.hex();
}

Model::Model(TrainingMode mode, std::unique_ptr<Encoder> encoder, std::vector<ClassificationHead> heads,
             std::vector<LabelSchema> schemas)
    : mode_(mode), encoder_(std::move(encoder)), heads_(std::move(heads)), schemas_(std::move(schemas)) {
  if (!encoder_) throw ConfigError("model needs an encoder");
  if (mode_ == TrainingMode::single_task && heads_.size() != 1) {
    throw ConfigError("single-task mode takes exactly one head");
  }
  if (mode_ == TrainingMode::multitask) {
    std::set<TaskId> tasks;
    for (const auto& h : heads_) tasks.insert(h.task());
    if (heads_.size() != 3 || tasks.size() != 3) {
      throw ConfigError("multitask mode takes one head per task (type, severity, target)");
    }
  }
  for (const auto& h : heads_) h.config().validate(schema(h.task()));
}

const LabelSchema& Model::schema(TaskId task) const {
  for (const auto& s : schemas_) {
    if (s.task() == task) return s;
  }
  throw ConfigError("model has no schema for task '" + std::string(to_string(task)) + "'");
}

std::string Model::fingerprint() const {
  std::vector<HeadConfig> cfgs;
  for (const auto& h : heads_) cfgs.push_back(h.config());
  return model_fingerprint(encoder_->config(), mode_, cfgs, schemas_);
}

std::vector<std::pair<TaskId, ag::Var>> Model::forward(std::span<const std::string> texts) const {
  const ag::Var features = encoder_->forward(texts);
  std::vector<std::pair<TaskId, ag::Var>> out;
  for (const auto& h : heads_) out.emplace_back(h.task(), h.logits(features));
  return out;
}

std::map<TaskId, ag::Matrix> Model::predict(std::span<const std::string> texts, std::size_t batch_size) const {
  std::map<TaskId, ag::Matrix> out;
  for (const auto& h : heads_) out[h.task()] = ag::Matrix(static_cast<Eigen::Index>(texts.size()), h.config().num_classes);
  for (std::size_t start = 0; start < texts.size(); start += batch_size) {
    const std::size_t n = std::min(batch_size, texts.size() - start);
    const auto batch = encoder_->encode(texts.subspan(start, n));
    for (const auto& h : heads_) {
      out[h.task()].middleRows(static_cast<Eigen::Index>(start), static_cast<Eigen::Index>(n)) =
          h.probabilities(batch.vectors);
    }
  }
  return out;
}

NamedParameters Model::parameters() const {
  NamedParameters params = encoder_->parameters();
  for (const auto& h : heads_) {
    const std::string prefix = "head." + std::string(to_string(h.task()));
    params.emplace_back(prefix + ".weight", h.weight());
    params.emplace_back(prefix + ".bias", h.bias());
  }
  return params;
}

void Model::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  TensorFile file;
  auto& h = file.header;
  h["format"] = "hatefuse.model/v1";
  h["fingerprint"] = fingerprint();
  h["mode"] = to_string(mode_);
  h["encoder"] = encoder_->config().to_json();
  nlohmann::json heads = nlohmann::json::array();
  for (const auto& head : heads_) {
    heads.push_back({{"task", to_string(head.task())}, {"num_classes", head.config().num_classes}});
    const std::string prefix = "head." + std::string(to_string(head.task()));
    file.tensors[prefix + ".weight"] = head.weight().value();
    file.tensors[prefix + ".bias"] = head.bias().value();
  }
  h["heads"] = heads;
  nlohmann::json schemas = nlohmann::json::object();
  for (const auto& s : schemas_) schemas[std::string(to_string(s.task()))] = s.labels();
  h["schemas"] = schemas;
  nlohmann::json state = nlohmann::json::object();
  encoder_->save_state(state, file.tensors);
  h["encoder_state"] = state;
  if (!extra.is_null()) h["extra"] = extra;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  write_tensor_file(path, kModelMagic, file);
}

Model Model::load(const std::filesystem::path& path) {
  const auto file = read_tensor_file(path, kModelMagic);
  const auto& h = file.header;
  try {
    const auto mode = parse_training_mode(h.at("mode").get<std::string>());
    const auto enc_cfg = EncoderConfig::from_json(h.at("encoder"));
    std::vector<LabelSchema> schemas;
    for (const auto& [task, labels] : h.at("schemas").items()) {
      schemas.emplace_back(parse_task_or_throw(task), labels.get<std::vector<std::string>>());
    }
    std::vector<ClassificationHead> heads;
    for (const auto& jh : h.at("heads")) {
      HeadConfig cfg{parse_task_or_throw(jh.at("task").get<std::string>()), jh.at("num_classes").get<int>()};
      const std::string prefix = "head." + std::string(to_string(cfg.task));
      auto wit = file.tensors.find(prefix + ".weight");
      auto bit = file.tensors.find(prefix + ".bias");
      if (wit == file.tensors.end() || bit == file.tensors.end()) {
        throw ValidationError(path.string() + ": missing weights for head '" + prefix + "'");
      }
      heads.emplace_back(cfg, wit->second, bit->second);
    }
    Model model(mode, load_encoder(enc_cfg, h.at("encoder_state"), file.tensors), std::move(heads), std::move(schemas));
    if (model.fingerprint() != h.at("fingerprint").get<std::string>()) {
      throw FingerprintError(path.string() + ": stored fingerprint does not match the model's configuration");
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": corrupt model header: " + e.what());
  }
}

namespace {

struct AdamState {
  ag::Matrix m;
  ag::Matrix v;
};

std::vector<std::vector<int>> gold_indices(const DatasetSplit& split, const std::vector<HeadConfig>& heads,
                                           const std::vector<LabelSchema>& schemas) {
  std::vector<std::vector<int>> out;
  for (const auto& head : heads) {
    const auto& schema = schemas[static_cast<std::size_t>(&head - heads.data())];
    std::vector<int> idx;
    idx.reserve(split.size());
    for (const auto& s : split.samples) {
      auto it = s.gold.find(head.task);
      if (it == s.gold.end()) {
        throw ValidationError("training sample '" + s.id + "' has no gold '" + std::string(to_string(head.task)) +
                              "' label");
      }
      idx.push_back(static_cast<int>(schema.index_or_throw(it->second)));
    }
    out.push_back(std::move(idx));
  }
  return out;
}

}  // namespace

TrainResult train(const DatasetSplit& split, const EncoderConfig& encoder_config, const std::vector<HeadConfig>& heads,
                  const TrainingConfig& tcfg, const std::optional<LossWeights>& weights,
                  const ResourceResolver& resolver, const std::function<void(int, double)>& on_epoch) {
  const auto started = std::chrono::steady_clock::now();
  tcfg.validate();
  encoder_config.validate();
  TrainingMode mode;
  if (heads.size() == 1) {
    if (weights) throw ConfigError("single-task training takes no loss weights");
    mode = TrainingMode::single_task;
  } else if (heads.size() == 3) {
    if (!weights) throw ConfigError("multitask training requires loss weights");
    weights->validate();
    mode = TrainingMode::multitask;
  } else {
    throw ConfigError("training takes one head (single-task) or three heads (multitask)");
  }
  if (split.samples.empty()) throw ValidationError("training split is empty");

  std::vector<LabelSchema> schemas;
  for (const auto& h : heads) {
    schemas.push_back(LabelSchema::for_task(h.task));
    h.validate(schemas.back());
  }
  // Pre-flight: every sample must carry every trained task's label.
  const auto targets = gold_indices(split, heads, schemas);

  std::vector<std::string> texts;
  texts.reserve(split.size());
  for (const auto& s : split.samples) texts.push_back(preprocess(s.text));

  auto encoder = make_encoder(encoder_config, texts, tcfg.seed, resolver);
  std::vector<ClassificationHead> head_modules;
  for (const auto& h : heads) head_modules.emplace_back(h, encoder_config.hidden_dim, tcfg.head_init, tcfg.seed);
  Model model(mode, std::move(encoder), std::move(head_modules), schemas);

  const auto params = model.parameters();
  std::vector<AdamState> adam;
  for (const auto& [_, p] : params) {
    adam.push_back({ag::Matrix::Zero(p.rows(), p.cols()), ag::Matrix::Zero(p.rows(), p.cols())});
  }

  const std::size_t n = split.size();
  const auto bs = static_cast<std::size_t>(tcfg.batch_size);
  const std::size_t steps_per_epoch = (n + bs - 1) / bs;
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng shuffle_rng(Fnv1a(tcfg.seed).update("shuffle").digest());

  TrainResult result{std::move(model), {}, {}, 0.0};
  std::size_t step = 0;
  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_sum = 0.0;
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      const std::size_t begin = b * bs;
      const std::size_t end = std::min(n, begin + bs);
      std::vector<std::string> batch_texts;
      std::vector<std::vector<int>> batch_targets(heads.size());
      for (std::size_t k = begin; k < end; ++k) {
        batch_texts.push_back(texts[order[k]]);
        for (std::size_t t = 0; t < heads.size(); ++t) batch_targets[t].push_back(targets[t][order[k]]);
      }
      const auto logits = result.model.forward(batch_texts);
      ag::Var loss;
      for (std::size_t t = 0; t < logits.size(); ++t) {
        ag::Var ce = ag::cross_entropy(logits[t].second, batch_targets[t]);
        if (mode == TrainingMode::multitask) ce = ag::scale(ce, weights->of(logits[t].first));
        loss = t == 0 ? ce : ag::add(loss, ce);
      }
      const double value = loss.value()(0, 0);
      if (!std::isfinite(value)) {
        throw RuntimeFailure("non-finite loss at batch index " + std::to_string(step) + " (epoch " +
                             std::to_string(epoch + 1) + ", batch " + std::to_string(b) + ")");
      }
      ag::backward(loss);

      ++step;
      const double bc1 = 1.0 - std::pow(tcfg.adam_beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(tcfg.adam_beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < params.size(); ++i) {
        ag::Var p = params[i].second;
        if (p.grad().size() == 0) continue;
        const ag::Matrix& g = p.grad();
        auto& st = adam[i];
        st.m = tcfg.adam_beta1 * st.m + (1.0 - tcfg.adam_beta1) * g;
        st.v = tcfg.adam_beta2 * st.v + (1.0 - tcfg.adam_beta2) * g.cwiseProduct(g);
        ag::Matrix& w = p.mutable_value();
        w *= 1.0 - tcfg.learning_rate * tcfg.weight_decay;
        w.array() -= tcfg.learning_rate * (st.m.array() / bc1) / ((st.v.array() / bc2).sqrt() + tcfg.adam_eps);
        p.zero_grad();
      }
      result.step_losses.push_back(value);
      epoch_sum += value;
    }
    const double mean = epoch_sum / static_cast<double>(steps_per_epoch);
    result.epoch_losses.push_back(mean);
    if (on_epoch) on_epoch(epoch + 1, mean);
  }
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

std::map<TaskId, PredictionMatrix> predict_proba(const Model& model, const DatasetSplit& split,
                                                 const std::string& model_id) {
  std::vector<std::string> texts;
  std::vector<std::string> ids;
  for (const auto& s : split.samples) {
    texts.push_back(preprocess(s.text));
    ids.push_back(s.id);
  }
  const auto probs = model.predict(texts);
  const auto data_fp = data_fingerprint(split);
  const auto model_fp = model.fingerprint();
  std::map<TaskId, PredictionMatrix> out;
  for (const auto& [task, p] : probs) {
    PredictionMatrix m;
    m.model_id = model_id;
    m.task = task;
    m.labels = model.schema(task).labels();
    m.sample_ids = ids;
    m.probs = p;
    m.data_fingerprint = data_fp;
    m.model_fingerprint = model_fp;
    out.emplace(task, std::move(m));
  }
  return out;
}

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write '" + path.string() + "'");
  out << "# hatefuse run manifest\n";
  for (const auto& [k, v] : manifest.settings) out << k << " = " << v << '\n';
  out << "steps_per_epoch = " << manifest.steps_per_epoch << '\n';
  out << "total_steps = " << manifest.step_losses.size() << '\n';
  out << "wall_clock_seconds = " << format_double(manifest.wall_clock_seconds) << '\n';
  out << "\n[epochs]\nepoch\tmean_loss\n";
  for (std::size_t e = 0; e < manifest.epoch_losses.size(); ++e) {
    out << e + 1 << '\t' << format_double(manifest.epoch_losses[e]) << '\n';
  }
  out << "\n[steps]\nstep\tloss\n";
  for (std::size_t s = 0; s < manifest.step_losses.size(); ++s) {
    out << s + 1 << '\t' << format_double(manifest.step_losses[s]) << '\n';
  }
}

}  // namespace hatefuse
