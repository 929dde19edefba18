#include "hatefuse/run_config.hpp"

#include <charconv>
#include <cstdlib>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace hatefuse {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto pos = s.find(',', start);
    const auto item = trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (!item.empty()) out.push_back(item);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double to_double(std::string_view key, const std::string& v) {
  double out = 0.0;
  const auto s = trim(v);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ConfigError("setting '" + std::string(key) + "': expected a number, got '" + v + "'");
  }
  return out;
}

long long to_int(std::string_view key, const std::string& v) {
  long long out = 0;
  const auto s = trim(v);
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ConfigError("setting '" + std::string(key) + "': expected an integer, got '" + v + "'");
  }
  return out;
}

int to_small_int(std::string_view key, const std::string& v) {
  const auto x = to_int(key, v);
  if (x < -1'000'000'000 || x > 1'000'000'000) throw ConfigError("setting '" + std::string(key) + "' is out of range");
  return static_cast<int>(x);
}

std::string join_doubles(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_double(v[i]);
  return out;
}

}  // namespace

void RunConfig::set(std::string_view key, const std::string& raw) {
  const std::string value = trim(raw);
  if (key == "data.train" || key == "data.dev" || key == "data.test") {
    const auto split = parse_split_name(key.substr(5));
    if (value.empty()) {
      data.erase(split);
    } else {
      data[split] = value;
    }
  } else if (key == "data.format") {
    format = value.empty() || value == "auto" ? std::nullopt : std::optional(parse_format(value));
  } else if (key == "task.mode") {
    mode = parse_training_mode(value);
  } else if (key == "task.task") {
    task = parse_task_or_throw(value);
  } else if (key == "encoder.family") {
    encoder.family = parse_family(value);
  } else if (key == "encoder.backbone") {
    encoder.backbone_id = value;
  } else if (key == "encoder.max_length") {
    encoder.max_length = to_small_int(key, value);
  } else if (key == "encoder.hidden_dim") {
    encoder.hidden_dim = to_small_int(key, value);
  } else if (key == "encoder.recurrent_cell") {
    encoder.recurrent_cell = value.empty() ? std::nullopt : std::optional(parse_cell(value));
  } else if (key == "encoder.embedding_source") {
    encoder.embedding_source = value.empty() ? std::nullopt : std::optional(parse_embedding_source(value));
  } else if (key == "encoder.embedding_path") {
    encoder.embedding_path = value;
  } else if (key == "encoder.embedding_dim") {
    encoder.embedding_dim = to_small_int(key, value);
  } else if (key == "encoder.vocab_size") {
    encoder.vocab_size = to_small_int(key, value);
  } else if (key == "encoder.hash_seed") {
    encoder.hash_seed = static_cast<std::uint64_t>(to_int(key, value));
  } else if (key == "training.learning_rate") {
    training.learning_rate = to_double(key, value);
  } else if (key == "training.batch_size") {
    training.batch_size = to_small_int(key, value);
  } else if (key == "training.epochs") {
    training.epochs = to_small_int(key, value);
  } else if (key == "training.optimizer") {
    if (value != "adamw") throw ConfigError("only the adamw optimizer is supported");
  } else if (key == "training.weight_decay") {
    training.weight_decay = to_double(key, value);
  } else if (key == "training.seed") {
    training.seed = static_cast<std::uint64_t>(to_int(key, value));
  } else if (key == "training.head_init") {
    if (value == "zeros") {
      training.head_init = HeadInit::zeros;
    } else if (value == "normal") {
      training.head_init = HeadInit::normal;
    } else {
      throw ConfigError("training.head_init must be 'normal' or 'zeros'");
    }
  } else if (key == "loss.alpha") {
    loss.alpha = to_double(key, value);
  } else if (key == "loss.beta") {
    loss.beta = to_double(key, value);
  } else if (key == "loss.gamma") {
    loss.gamma = to_double(key, value);
  } else if (key == "ensemble.method") {
    ensemble.method = parse_fusion_method(value);
  } else if (key == "ensemble.members") {
    ensemble.members = split_list(value);
  } else if (key == "ensemble.weights") {
    ensemble.weights.clear();
    for (const auto& w : split_list(value)) ensemble.weights.push_back(to_double(key, w));
  } else if (key == "ensemble.tie_break") {
    ensemble.tie_break = parse_tie_break(value);
  } else if (key == "metrics.task_weights") {
    metrics.task_weights.clear();
    for (const auto& item : split_list(value)) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) throw ConfigError("metrics.task_weights entries look like 'type:0.5'");
      metrics.task_weights[parse_task_or_throw(trim(item.substr(0, colon)))] = to_double(key, item.substr(colon + 1));
    }
  } else if (key == "metrics.recall_threshold") {
    metrics.recall_threshold = to_double(key, value);
  } else if (key == "metrics.error_examples") {
    const auto k = to_int(key, value);
    if (k < 0) throw ConfigError("metrics.error_examples must be >= 0");
    metrics.error_examples = static_cast<std::size_t>(k);
  } else if (key == "output.dir") {
    output_dir = value;
  } else if (key == "output.model_id") {
    if (value.empty()) throw ConfigError("output.model_id must not be empty");
    model_id = value;
  } else {
    throw ConfigError("unknown setting '" + std::string(key) + "'");
  }
}

std::vector<TaskId> RunConfig::tasks() const {
  if (mode == TrainingMode::multitask) return {std::begin(kAllTasks), std::end(kAllTasks)};
  return {task};
}

std::vector<HeadConfig> RunConfig::heads() const {
  std::vector<HeadConfig> out;
  for (TaskId t : tasks()) out.push_back(HeadConfig::for_schema(LabelSchema::for_task(t)));
  return out;
}

std::vector<LabelSchema> RunConfig::schemas() const {
  std::vector<LabelSchema> out;
  for (TaskId t : tasks()) out.push_back(LabelSchema::for_task(t));
  return out;
}

std::optional<LossWeights> RunConfig::loss_weights() const {
  if (mode == TrainingMode::multitask) return loss;
  return std::nullopt;
}

DataFormat RunConfig::format_for(SplitName split) const {
  return format ? *format : format_from_path(split_path(split));
}

const std::filesystem::path& RunConfig::split_path(SplitName split) const {
  auto it = data.find(split);
  if (it == data.end()) throw ConfigError("no data path configured for the " + std::string(to_string(split)) + " split");
  return it->second;
}

std::vector<std::pair<std::string, std::string>> RunConfig::snapshot() const {
  std::vector<std::pair<std::string, std::string>> s;
  for (const auto& [split, path] : data) s.emplace_back("data." + std::string(to_string(split)), path.string());
  s.emplace_back("data.format", format ? std::string(to_string(*format)) : "auto");
  s.emplace_back("task.mode", std::string(to_string(mode)));
  if (mode == TrainingMode::single_task) s.emplace_back("task.task", std::string(to_string(task)));
  s.emplace_back("encoder.family", std::string(to_string(encoder.family)));
  if (!encoder.backbone_id.empty()) s.emplace_back("encoder.backbone", encoder.backbone_id);
  s.emplace_back("encoder.max_length", std::to_string(encoder.max_length));
  s.emplace_back("encoder.hidden_dim", std::to_string(encoder.hidden_dim));
  if (encoder.recurrent_cell) s.emplace_back("encoder.recurrent_cell", std::string(to_string(*encoder.recurrent_cell)));
  if (encoder.embedding_source) {
    s.emplace_back("encoder.embedding_source", std::string(to_string(*encoder.embedding_source)));
    s.emplace_back("encoder.embedding_path", encoder.embedding_path);
    s.emplace_back("encoder.embedding_dim", std::to_string(encoder.embedding_dim));
    s.emplace_back("encoder.vocab_size", std::to_string(encoder.vocab_size));
  }
  if (encoder.family == EncoderFamily::toy) s.emplace_back("encoder.hash_seed", std::to_string(encoder.hash_seed));
  s.emplace_back("training.optimizer", "adamw");
  s.emplace_back("training.learning_rate", format_double(training.learning_rate));
  s.emplace_back("training.batch_size", std::to_string(training.batch_size));
  s.emplace_back("training.epochs", std::to_string(training.epochs));
  s.emplace_back("training.weight_decay", format_double(training.weight_decay));
  s.emplace_back("training.seed", std::to_string(training.seed));
  s.emplace_back("training.head_init", training.head_init == HeadInit::zeros ? "zeros" : "normal");
  if (mode == TrainingMode::multitask) {
    s.emplace_back("loss.alpha", format_double(loss.alpha));
    s.emplace_back("loss.beta", format_double(loss.beta));
    s.emplace_back("loss.gamma", format_double(loss.gamma));
  }
  s.emplace_back("ensemble.method", std::string(to_string(ensemble.method)));
  if (!ensemble.members.empty()) {
    std::string m;
    for (std::size_t i = 0; i < ensemble.members.size(); ++i) m += (i ? "," : "") + ensemble.members[i];
    s.emplace_back("ensemble.members", m);
  }
  if (!ensemble.weights.empty()) s.emplace_back("ensemble.weights", join_doubles(ensemble.weights));
  s.emplace_back("ensemble.tie_break", std::string(to_string(ensemble.tie_break)));
  if (!metrics.task_weights.empty()) {
    std::string w;
    for (const auto& [t, v] : metrics.task_weights) w += (w.empty() ? "" : ",") + std::string(to_string(t)) + ":" + format_double(v);
    s.emplace_back("metrics.task_weights", w);
  }
  s.emplace_back("metrics.recall_threshold", format_double(metrics.recall_threshold));
  s.emplace_back("metrics.error_examples", std::to_string(metrics.error_examples));
  s.emplace_back("output.model_id", model_id);
  return s;
}

std::string RunConfig::fingerprint() const {
  Fnv1a h;
  h.update("hatefuse-config-v1");
  for (const auto& [k, v] : snapshot()) h.update(k).update("=").update(v).update("\n");
  return h.hex();
}

std::string RunConfig::expected_model_fingerprint() const {
  const auto h = heads();
  const auto s = schemas();
  return model_fingerprint(encoder, mode, h, s);
}

void RunConfig::validate() const {
  encoder.validate();
  training.validate();
  if (mode == TrainingMode::multitask) loss.validate();
  if (ensemble.method == FusionMethod::weighted) {
    if (ensemble.weights.empty()) throw ConfigError("weighted fusion requires ensemble.weights");
    if (!ensemble.members.empty() && ensemble.members.size() != ensemble.weights.size()) {
      throw ConfigError("ensemble.members and ensemble.weights differ in length");
    }
  }
  if (!metrics.task_weights.empty()) {
    double sum = 0.0;
    for (const auto& [_, w] : metrics.task_weights) {
      if (!(w >= 0.0)) throw ConfigError("metrics.task_weights must be nonnegative");
      sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-6) throw ConfigError("metrics.task_weights must sum to 1");
  }
  if (!(metrics.recall_threshold >= 0.0 && metrics.recall_threshold <= 1.0)) {
    throw ConfigError("metrics.recall_threshold must lie in [0, 1]");
  }
}

const std::vector<PresetInfo>& presets() {
  static const std::vector<PresetInfo> kPresets = {
      {"finetune-defaults",
       "AdamW, learning rate 2e-5, batch size 16, 3 epochs, max length 128",
       {{"training.learning_rate", "2e-5"},
        {"training.batch_size", "16"},
        {"training.epochs", "3"},
        {"training.optimizer", "adamw"},
        {"encoder.max_length", "128"}}},
      {"paper-1c",
       "multitask heads fused by weighted voting 0.5/0.3/0.2 (MuRIL, BanglaBERT, IndicBERTv2 order)",
       {{"task.mode", "multitask"}, {"ensemble.method", "weighted"}, {"ensemble.weights", "0.5,0.3,0.2"}}},
      {"single-soft", "single-task heads fused by soft voting", {{"task.mode", "single"}, {"ensemble.method", "soft"}}},
      {"toy-desk",
       "toy encoder with a learning rate large enough to fit small fixtures quickly",
       {{"encoder.family", "toy"},
        {"encoder.hidden_dim", "256"},
        {"training.learning_rate", "0.05"},
        {"training.epochs", "20"},
        {"training.weight_decay", "0"}}},
  };
  return kPresets;
}

void apply_preset(RunConfig& config, std::string_view name) {
  for (const auto& p : presets()) {
    if (p.name == name) {
      for (const auto& [k, v] : p.settings) config.set(k, v);
      config.presets.emplace_back(name);
      return;
    }
  }
  std::string known;
  for (const auto& p : presets()) known += (known.empty() ? "" : ", ") + p.name;
  throw ConfigError("unknown preset '" + std::string(name) + "' (known: " + known + ")");
}

RunConfig load_run_config(const std::filesystem::path& path, const std::vector<std::string>& preset_names) {
  RunConfig config;
  for (const auto& p : preset_names) apply_preset(config, p);
  if (!std::filesystem::exists(path)) throw ConfigError("config file '" + path.string() + "' does not exist");
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(path.string(), tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ConfigError(e.what());
  }
  // Root-level keys come before any section; only `preset` is allowed there.
  for (const auto& [key, node] : tree) {
    if (node.empty() && !node.data().empty()) {
      if (key != "preset") throw ConfigError(path.string() + ": unknown top-level key '" + key + "'");
      for (const auto& p : split_list(node.data())) apply_preset(config, p);
    }
  }
  for (const auto& [section, node] : tree) {
    if (node.empty()) continue;
    for (const auto& [key, value] : node) {
      try {
        config.set(section + "." + key, value.data());
      } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
      }
    }
  }
  std::filesystem::path root = path.parent_path();
  if (const char* env = std::getenv("HATEFUSE_DATA_ROOT"); env != nullptr && *env != '\0') root = env;
  for (auto& [_, p] : config.data) {
    if (p.is_relative()) p = root / p;
  }
  return config;
}

}  // namespace hatefuse
