#include <cmath>
#include <fstream>

#include "encoders_internal.hpp"
#include "hatefuse/wordpiece.hpp"

namespace hatefuse {

nlohmann::json TransformerShape::to_json() const {
  return {{"vocab_size", vocab_size}, {"hidden", hidden},       {"layers", layers},
          {"heads", heads},           {"intermediate", intermediate}, {"max_position", max_position}};
}

TransformerShape TransformerShape::from_json(const nlohmann::json& j) {
  TransformerShape s;
  try {
    s.vocab_size = j.at("vocab_size").get<int>();
    s.hidden = j.at("hidden").get<int>();
    s.layers = j.at("layers").get<int>();
    s.heads = j.at("heads").get<int>();
    s.intermediate = j.at("intermediate").get<int>();
    s.max_position = j.at("max_position").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid backbone config: ") + e.what());
  }
  if (s.vocab_size < 4 || s.hidden < 1 || s.layers < 0 || s.heads < 1 || s.hidden % s.heads != 0 ||
      s.intermediate < 1 || s.max_position < 2) {
    throw ConfigError("invalid backbone shape");
  }
  return s;
}

namespace detail {

namespace {

using ag::Matrix;
using ag::Var;

std::vector<std::string> tensor_names(const TransformerShape& s) {
  std::vector<std::string> names{"emb.word", "emb.position", "emb.ln.gain", "emb.ln.bias", "pooler.w", "pooler.b"};
  for (int l = 0; l < s.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    for (const char* n : {"q.w", "q.b", "k.w", "k.b", "v.w", "v.b", "o.w", "o.b", "ln1.gain", "ln1.bias", "ffn1.w",
                          "ffn1.b", "ffn2.w", "ffn2.b", "ln2.gain", "ln2.bias"}) {
      names.push_back(p + n);
    }
  }
  return names;
}

std::pair<Eigen::Index, Eigen::Index> expected_shape(const TransformerShape& s, const std::string& name) {
  const auto ends_with = [&](const char* suffix) {
    const std::string_view sv(suffix);
    return name.size() >= sv.size() && name.compare(name.size() - sv.size(), sv.size(), sv) == 0;
  };
  if (name == "emb.word") return {s.vocab_size, s.hidden};
  if (name == "emb.position") return {s.max_position, s.hidden};
  if (ends_with("ffn1.w")) return {s.hidden, s.intermediate};
  if (ends_with("ffn1.b")) return {1, s.intermediate};
  if (ends_with("ffn2.w")) return {s.intermediate, s.hidden};
  if (ends_with(".w")) return {s.hidden, s.hidden};
  return {1, s.hidden};
}

class TransformerEncoder final : public Encoder {
 public:
  TransformerEncoder(const EncoderConfig& config, TransformerShape shape, WordPieceTokenizer tokenizer,
                     const TensorMap& weights)
      : Encoder(config), shape_(shape), tokenizer_(std::move(tokenizer)) {
    if (config.hidden_dim != shape_.hidden) {
      throw ConfigError("encoder hidden_dim " + std::to_string(config.hidden_dim) + " does not match backbone width " +
                        std::to_string(shape_.hidden));
    }
    if (config.max_length > shape_.max_position) {
      throw ConfigError("max_length exceeds the backbone's position table (" + std::to_string(shape_.max_position) + ")");
    }
    if (static_cast<int>(tokenizer_.vocab().size()) != shape_.vocab_size) {
      throw ConfigError("backbone vocabulary size does not match its config");
    }
    for (const auto& name : tensor_names(shape_)) {
      const Matrix& m = require_tensor(weights, name);
      const auto [r, c] = expected_shape(shape_, name);
      if (m.rows() != r || m.cols() != c) throw ConfigError("backbone tensor '" + name + "' has the wrong shape");
      params_.emplace_back("transformer." + name, ag::parameter(m));
      index_.emplace(name, params_.size() - 1);
    }
  }

  TokenSequence tokenize(std::string_view text) const override {
    auto pieces = tokenizer_.tokenize(text);
    const auto room = static_cast<std::size_t>(config().max_length - 2);
    if (pieces.size() > room) pieces.resize(room);
    TokenSequence seq;
    seq.ids.assign(static_cast<std::size_t>(config().max_length), tokenizer_.pad_id());
    seq.ids[0] = tokenizer_.cls_id();
    for (std::size_t i = 0; i < pieces.size(); ++i) seq.ids[i + 1] = pieces[i];
    seq.ids[pieces.size() + 1] = tokenizer_.sep_id();
    seq.length = static_cast<int>(pieces.size()) + 2;
    return seq;
  }

  // Each item runs at its own length, which is equivalent to padding with a
  // key mask and keeps the attention blocks small.
  Var forward(std::span<const std::string> texts) const override {
    std::vector<Var> pooled;
    pooled.reserve(texts.size());
    for (const auto& t : texts) pooled.push_back(forward_one(tokenize(t)));
    return ag::vcat(pooled);
  }

  NamedParameters parameters() const override { return params_; }

  void save_state(nlohmann::json& header, TensorMap& tensors) const override {
    header["transformer_shape"] = shape_.to_json();
    header["wordpiece_vocab"] = tokenizer_.vocab();
    for (const auto& [name, var] : params_) tensors[name] = var.value();
  }

 private:
  const Var& p(const std::string& name) const { return params_[index_.at(name)].second; }

  Var forward_one(const TokenSequence& seq) const {
    const std::span<const int> ids(seq.ids.data(), static_cast<std::size_t>(seq.length));
    std::vector<int> positions(ids.size());
    for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);
    Var x = ag::add(ag::gather_rows(p("emb.word"), ids), ag::gather_rows(p("emb.position"), positions));
    x = ag::layer_norm(x, p("emb.ln.gain"), p("emb.ln.bias"));
    const auto len = static_cast<Eigen::Index>(ids.size());
    const int dh = shape_.hidden / shape_.heads;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    for (int l = 0; l < shape_.layers; ++l) {
      const std::string pre = "layer" + std::to_string(l) + ".";
      const Var q = ag::add_row(ag::matmul(x, p(pre + "q.w")), p(pre + "q.b"));
      const Var k = ag::add_row(ag::matmul(x, p(pre + "k.w")), p(pre + "k.b"));
      const Var v = ag::add_row(ag::matmul(x, p(pre + "v.w")), p(pre + "v.b"));
      std::vector<Var> heads;
      for (int h = 0; h < shape_.heads; ++h) {
        const Var qh = ag::block(q, 0, h * dh, len, dh);
        const Var kh = ag::block(k, 0, h * dh, len, dh);
        const Var vh = ag::block(v, 0, h * dh, len, dh);
        const Var attn = ag::softmax_rows(ag::scale(ag::matmul(qh, ag::transpose(kh)), inv_sqrt));
        heads.push_back(ag::matmul(attn, vh));
      }
      const Var ctx = ag::add_row(ag::matmul(ag::hcat(heads), p(pre + "o.w")), p(pre + "o.b"));
      x = ag::layer_norm(ag::add(x, ctx), p(pre + "ln1.gain"), p(pre + "ln1.bias"));
      const Var ff = ag::gelu(ag::add_row(ag::matmul(x, p(pre + "ffn1.w")), p(pre + "ffn1.b")));
      const Var out = ag::add_row(ag::matmul(ff, p(pre + "ffn2.w")), p(pre + "ffn2.b"));
      x = ag::layer_norm(ag::add(x, out), p(pre + "ln2.gain"), p(pre + "ln2.bias"));
    }
    const Var cls = ag::block(x, 0, 0, 1, shape_.hidden);
    return ag::tanh(ag::add_row(ag::matmul(cls, p("pooler.w")), p("pooler.b")));
  }

  TransformerShape shape_;
  WordPieceTokenizer tokenizer_;
  NamedParameters params_;
  std::map<std::string, std::size_t> index_;
};

TensorMap strip_prefix(const TensorMap& tensors, const std::string& prefix) {
  TensorMap out;
  for (const auto& [name, m] : tensors) {
    if (name.rfind(prefix, 0) == 0) out.emplace(name.substr(prefix.size()), m);
  }
  return out;
}

}  // namespace

std::unique_ptr<Encoder> make_transformer_encoder(const EncoderConfig& config, const ResourceResolver& resolver) {
  const auto dir = resolver.backbone_dir(config.backbone_id);
  std::ifstream cfg(dir / "config.json");
  if (!cfg) throw ConfigError("backbone '" + config.backbone_id + "' lacks config.json");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(cfg);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("backbone '" + config.backbone_id + "': " + e.what());
  }
  const auto shape = TransformerShape::from_json(j);
  auto tokenizer = WordPieceTokenizer::from_file(dir / "vocab.txt");
  if (!std::filesystem::exists(dir / "weights.bin")) {
    throw ConfigError("backbone '" + config.backbone_id + "' lacks weights.bin");
  }
  const auto weights = read_tensor_file(dir / "weights.bin", kBackboneMagic);
  return std::make_unique<TransformerEncoder>(config, shape, std::move(tokenizer), weights.tensors);
}

std::unique_ptr<Encoder> load_transformer_encoder(const EncoderConfig& config, const nlohmann::json& header,
                                                  const TensorMap& tensors) {
  if (!header.contains("transformer_shape") || !header.contains("wordpiece_vocab")) {
    throw ValidationError("transformer encoder state is incomplete");
  }
  const auto shape = TransformerShape::from_json(header["transformer_shape"]);
  WordPieceTokenizer tokenizer(header["wordpiece_vocab"].get<std::vector<std::string>>());
  return std::make_unique<TransformerEncoder>(config, shape, std::move(tokenizer),
                                              strip_prefix(tensors, "transformer."));
}

}  // namespace detail

void write_random_backbone(const std::filesystem::path& dir, const TransformerShape& shape,
                           const std::vector<std::string>& vocab, std::uint64_t seed) {
  if (static_cast<int>(vocab.size()) != shape.vocab_size) throw ConfigError("vocabulary size does not match shape");
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "config.json");
    out << shape.to_json().dump(2) << '\n';
  }
  {
    std::ofstream out(dir / "vocab.txt", std::ios::binary);
    for (const auto& v : vocab) out << v << '\n';
  }
  Rng rng(seed);
  TensorFile file;
  file.header = {{"kind", "random-init"}, {"seed", seed}};
  for (const auto& name : detail::tensor_names(shape)) {
    const auto [r, c] = detail::expected_shape(shape, name);
    ag::Matrix m(r, c);
    const bool gain = name.ends_with(".gain");
    const bool bias = name.ends_with(".bias") || name.ends_with(".b");
    for (Eigen::Index i = 0; i < r; ++i) {
      for (Eigen::Index k = 0; k < c; ++k) m(i, k) = gain ? 1.0 : bias ? 0.0 : rng.normal(0.0, 0.02);
    }
    file.tensors.emplace(name, std::move(m));
  }
  write_tensor_file(dir / "weights.bin", kBackboneMagic, file);
}

}  // namespace hatefuse
