#include "hatefuse/encoder.hpp"

#include <cmath>
#include <cstdlib>

#include "encoders_internal.hpp"

namespace hatefuse {

std::string_view to_string(EncoderFamily f) {
  switch (f) {
    case EncoderFamily::transformer:
      return "transformer";
    case EncoderFamily::recurrent:
      return "recurrent";
    case EncoderFamily::toy:
      return "toy";
  }
  return "?";
}

std::string_view to_string(RecurrentCell c) { return c == RecurrentCell::bilstm ? "bilstm" : "bigru"; }

std::string_view to_string(EmbeddingSource s) {
  switch (s) {
    case EmbeddingSource::glove:
      return "glove";
    case EmbeddingSource::fasttext:
      return "fasttext";
    case EmbeddingSource::random:
      return "random";
  }
  return "?";
}

EncoderFamily parse_family(std::string_view s) {
  if (s == "transformer") return EncoderFamily::transformer;
  if (s == "recurrent") return EncoderFamily::recurrent;
  if (s == "toy") return EncoderFamily::toy;
  throw ConfigError("unknown encoder family '" + std::string(s) + "'");
}

RecurrentCell parse_cell(std::string_view s) {
  if (s == "bilstm") return RecurrentCell::bilstm;
  if (s == "bigru") return RecurrentCell::bigru;
  throw ConfigError("unknown recurrent cell '" + std::string(s) + "'");
}

EmbeddingSource parse_embedding_source(std::string_view s) {
  if (s == "glove") return EmbeddingSource::glove;
  if (s == "fasttext") return EmbeddingSource::fasttext;
  if (s == "random") return EmbeddingSource::random;
  throw ConfigError("unknown embedding source '" + std::string(s) + "'");
}

void EncoderConfig::validate() const {
  if (max_length < 1) throw ConfigError("encoder max_length must be >= 1");
  if (hidden_dim < 1) throw ConfigError("encoder hidden_dim must be >= 1");
  const bool recurrent = family == EncoderFamily::recurrent;
  if (recurrent != recurrent_cell.has_value() || recurrent != embedding_source.has_value()) {
    throw ConfigError(recurrent ? "recurrent encoder requires recurrent_cell and embedding_source"
                                : "recurrent_cell/embedding_source are only valid for the recurrent family");
  }
  if (family == EncoderFamily::transformer && backbone_id.empty()) {
    throw ConfigError("transformer encoder requires a backbone id");
  }
  if (family != EncoderFamily::transformer && !backbone_id.empty()) {
    throw ConfigError("backbone id is only valid for the transformer family");
  }
  if (recurrent) {
    if (hidden_dim % 2 != 0) throw ConfigError("recurrent hidden_dim must be even (two directions)");
    if (embedding_dim < 1) throw ConfigError("embedding_dim must be >= 1");
    if (vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
    if (*embedding_source != EmbeddingSource::random && embedding_path.empty()) {
      throw ConfigError("embedding_source " + std::string(to_string(*embedding_source)) +
                        " requires an embedding_path");
    }
  }
  if (family == EncoderFamily::transformer && max_length < 2) {
    throw ConfigError("transformer max_length must leave room for [CLS] and [SEP]");
  }
}

nlohmann::json EncoderConfig::to_json() const {
  nlohmann::json j;
  j["family"] = to_string(family);
  j["max_length"] = max_length;
  j["hidden_dim"] = hidden_dim;
  if (family == EncoderFamily::transformer) j["backbone_id"] = backbone_id;
  if (family == EncoderFamily::recurrent) {
    j["recurrent_cell"] = to_string(*recurrent_cell);
    j["embedding_source"] = to_string(*embedding_source);
    j["embedding_path"] = embedding_path;
    j["embedding_dim"] = embedding_dim;
    j["vocab_size"] = vocab_size;
  }
  if (family == EncoderFamily::toy) j["hash_seed"] = hash_seed;
  return j;
}

EncoderConfig EncoderConfig::from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.family = parse_family(j.at("family").get<std::string>());
  c.max_length = j.at("max_length").get<int>();
  c.hidden_dim = j.at("hidden_dim").get<int>();
  if (j.contains("backbone_id")) c.backbone_id = j["backbone_id"].get<std::string>();
  if (j.contains("recurrent_cell")) c.recurrent_cell = parse_cell(j["recurrent_cell"].get<std::string>());
  if (j.contains("embedding_source")) c.embedding_source = parse_embedding_source(j["embedding_source"].get<std::string>());
  if (j.contains("embedding_path")) c.embedding_path = j["embedding_path"].get<std::string>();
  if (j.contains("embedding_dim")) c.embedding_dim = j["embedding_dim"].get<int>();
  if (j.contains("vocab_size")) c.vocab_size = j["vocab_size"].get<int>();
  if (j.contains("hash_seed")) c.hash_seed = j["hash_seed"].get<std::uint64_t>();
  return c;
}

std::string EncoderConfig::fingerprint() const {
  // nlohmann::json objects iterate in key order, so dump() is canonical.
  return Fnv1a().update("hatefuse-encoder-v1").update(to_json().dump()).hex();
}

EncodedBatch Encoder::encode(std::span<const std::string> texts) const {
  EncodedBatch batch;
  batch.attention_lengths.reserve(texts.size());
  for (const auto& t : texts) batch.attention_lengths.push_back(tokenize(t).length);
  if (texts.empty()) {
    batch.vectors = ag::Matrix(0, config_.hidden_dim);
    return batch;
  }
  batch.vectors = forward(texts).value();
  if (!batch.vectors.allFinite()) throw RuntimeFailure("encoder produced non-finite values");
  return batch;
}

ResourceResolver ResourceResolver::from_environment() {
  ResourceResolver r;
  if (const char* env = std::getenv("HATEFUSE_CACHE"); env != nullptr && *env != '\0') {
    r.cache_dir = env;
  } else if (const char* home = std::getenv("HOME"); home != nullptr && *home != '\0') {
    r.cache_dir = std::filesystem::path(home) / ".cache" / "hatefuse";
  } else {
    r.cache_dir = ".hatefuse-cache";
  }
  return r;
}

std::filesystem::path ResourceResolver::backbone_dir(const std::string& backbone_id) const {
  const std::filesystem::path direct(backbone_id);
  if (std::filesystem::is_directory(direct)) return direct;
  const auto cached = cache_dir / backbone_id;
  if (std::filesystem::is_directory(cached)) return cached;
  throw ConfigError("backbone '" + backbone_id + "' not found (looked in '" + direct.string() + "' and '" +
                    cached.string() + "')");
}

std::filesystem::path ResourceResolver::resource(const std::string& path) const {
  const std::filesystem::path direct(path);
  if (std::filesystem::exists(direct)) return direct;
  const auto cached = cache_dir / path;
  if (std::filesystem::exists(cached)) return cached;
  throw ConfigError("resource '" + path + "' not found (looked in '" + direct.string() + "' and '" +
                    cached.string() + "')");
}

namespace {

constexpr int kToyVocab = 1 << 20;

std::vector<std::string> truncated_words(std::string_view text, int max_length) {
  auto words = split_whitespace(text);
  if (words.size() > static_cast<std::size_t>(max_length)) words.resize(static_cast<std::size_t>(max_length));
  return words;
}

class ToyEncoder final : public Encoder {
 public:
  using Encoder::Encoder;

  TokenSequence tokenize(std::string_view text) const override {
    const auto words = truncated_words(text, config().max_length);
    TokenSequence seq;
    seq.ids.assign(static_cast<std::size_t>(config().max_length), 0);
    for (std::size_t i = 0; i < words.size(); ++i) {
      const auto h = Fnv1a(config().hash_seed).update(words[i]).digest();
      seq.ids[i] = 1 + static_cast<int>(h % (kToyVocab - 1));
    }
    seq.length = static_cast<int>(words.size());
    return seq;
  }

  ag::Var forward(std::span<const std::string> texts) const override {
    ag::Matrix m(static_cast<Eigen::Index>(texts.size()), config().hidden_dim);
    for (std::size_t i = 0; i < texts.size(); ++i) m.row(static_cast<Eigen::Index>(i)) = toy_features(texts[i], config());
    return ag::constant(std::move(m));
  }

  void save_state(nlohmann::json&, TensorMap&) const override {}
};

}  // namespace

ag::Matrix toy_features(std::string_view text, const EncoderConfig& config) {
  std::string joined;
  for (const auto& w : truncated_words(text, config.max_length)) {
    if (!joined.empty()) joined.push_back(' ');
    joined += w;
  }
  const auto cps = utf8::decode(joined);
  ag::Matrix v = ag::Matrix::Zero(1, config.hidden_dim);
  const auto buckets = static_cast<std::uint64_t>(config.hidden_dim);
  for (std::size_t n = 1; n <= 3; ++n) {
    for (std::size_t i = 0; i + n <= cps.size(); ++i) {
      Fnv1a h(config.hash_seed);
      h.update_u64(n);
      for (std::size_t k = 0; k < n; ++k) h.update_u64(cps[i + k]);
      v(0, static_cast<Eigen::Index>(h.digest() % buckets)) += 1.0;
    }
  }
  const double norm = v.norm();
  if (norm > 0.0) v /= norm;
  return v;
}

namespace detail {

std::unique_ptr<Encoder> make_toy_encoder(const EncoderConfig& config) { return std::make_unique<ToyEncoder>(config); }

const ag::Matrix& require_tensor(const TensorMap& tensors, const std::string& name) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ValidationError("missing tensor '" + name + "'");
  return it->second;
}

}  // namespace detail

std::unique_ptr<Encoder> make_encoder(const EncoderConfig& config, std::span<const std::string> vocab_texts,
                                      std::uint64_t seed, const ResourceResolver& resolver) {
  config.validate();
  switch (config.family) {
    case EncoderFamily::toy:
      return detail::make_toy_encoder(config);
    case EncoderFamily::recurrent:
      return detail::make_recurrent_encoder(config, vocab_texts, seed, resolver);
    case EncoderFamily::transformer:
      return detail::make_transformer_encoder(config, resolver);
  }
  throw ConfigError("unknown encoder family");
}

std::unique_ptr<Encoder> load_encoder(const EncoderConfig& config, const nlohmann::json& header,
                                      const TensorMap& tensors) {
  config.validate();
  switch (config.family) {
    case EncoderFamily::toy:
      return detail::make_toy_encoder(config);
    case EncoderFamily::recurrent:
      return detail::load_recurrent_encoder(config, header, tensors);
    case EncoderFamily::transformer:
      return detail::load_transformer_encoder(config, header, tensors);
  }
  throw ConfigError("unknown encoder family");
}

TokenSequence tokenize_truncate(std::string_view text, const EncoderConfig& config, const ResourceResolver& resolver) {
  std::vector<std::string> texts{std::string(text)};
  return make_encoder(config, texts, 0, resolver)->tokenize(text);
}

EncodedBatch encode(std::span<const std::string> texts, const EncoderConfig& config, const ResourceResolver& resolver) {
  return make_encoder(config, texts, 0, resolver)->encode(texts);
}

}  // namespace hatefuse
