#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <unordered_map>

#include "encoders_internal.hpp"

namespace hatefuse::detail {

namespace {

using ag::Matrix;
using ag::Var;

constexpr int kPad = 0;
constexpr int kUnk = 1;

struct DirectionWeights {
  Var input;   // D x G*h
  Var hidden;  // h x G*h
  Var bias;    // 1 x G*h
  Var hidden_bias_n;  // GRU only: 1 x h, applied inside the reset gate
};

// Reads "word v1 v2 ..." lines for the words in `wanted`. A leading
// "<count> <dim>" line (fastText .vec) is skipped.
std::unordered_map<std::string, std::vector<double>> read_word_vectors(
    const std::filesystem::path& path, int dim, const std::unordered_map<std::string, int>& wanted) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open embedding file '" + path.string() + "'");
  std::unordered_map<std::string, std::vector<double>> found;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto fields = split_whitespace(line);
    if (fields.empty()) continue;
    if (line_no == 1 && fields.size() == 2) {
      int a = 0, b = 0;
      auto r1 = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), a);
      auto r2 = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), b);
      if (r1.ec == std::errc{} && r2.ec == std::errc{}) continue;
    }
    if (fields.size() != static_cast<std::size_t>(dim) + 1) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                        " values, found " + std::to_string(fields.size() - 1));
    }
    if (!wanted.contains(fields[0]) || found.contains(fields[0])) continue;
    std::vector<double> v(static_cast<std::size_t>(dim));
    for (int k = 0; k < dim; ++k) {
      const auto& f = fields[static_cast<std::size_t>(k) + 1];
      auto res = std::from_chars(f.data(), f.data() + f.size(), v[static_cast<std::size_t>(k)]);
      if (res.ec != std::errc{}) {
        throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + f + "'");
      }
    }
    found.emplace(fields[0], std::move(v));
  }
  return found;
}

class RecurrentEncoder final : public Encoder {
 public:
  RecurrentEncoder(const EncoderConfig& config, std::vector<std::string> vocab, Matrix embedding,
                   DirectionWeights fwd, DirectionWeights bwd)
      : Encoder(config), vocab_(std::move(vocab)), embedding_(std::move(embedding)), fwd_(fwd), bwd_(bwd) {
    for (std::size_t i = 0; i < vocab_.size(); ++i) index_.emplace(vocab_[i], static_cast<int>(i) + 2);
  }

  TokenSequence tokenize(std::string_view text) const override {
    auto words = split_whitespace(text);
    const auto max_len = static_cast<std::size_t>(config().max_length);
    if (words.size() > max_len) words.resize(max_len);
    TokenSequence seq;
    seq.ids.assign(max_len, kPad);
    for (std::size_t i = 0; i < words.size(); ++i) {
      auto it = index_.find(words[i]);
      seq.ids[i] = it == index_.end() ? kUnk : it->second;
    }
    seq.length = static_cast<int>(words.size());
    return seq;
  }

  Var forward(std::span<const std::string> texts) const override {
    const auto b = static_cast<Eigen::Index>(texts.size());
    const int h = config().hidden_dim / 2;
    std::vector<TokenSequence> seqs;
    int steps = 0;
    for (const auto& t : texts) {
      seqs.push_back(tokenize(t));
      steps = std::max(steps, seqs.back().length);
    }
    std::vector<Matrix> inputs, masks;
    for (int t = 0; t < steps; ++t) {
      Matrix x = Matrix::Zero(b, embedding_.cols());
      Matrix m = Matrix::Zero(b, h);
      for (Eigen::Index i = 0; i < b; ++i) {
        const auto& s = seqs[static_cast<std::size_t>(i)];
        if (t < s.length) {
          x.row(i) = embedding_.row(s.ids[static_cast<std::size_t>(t)]);
          m.row(i).setOnes();
        }
      }
      inputs.push_back(std::move(x));
      masks.push_back(std::move(m));
    }
    const Var forward_state = run(fwd_, inputs, masks, b, false);
    const Var backward_state = run(bwd_, inputs, masks, b, true);
    const Var parts[] = {forward_state, backward_state};
    return ag::hcat(parts);
  }

  NamedParameters parameters() const override {
    NamedParameters out;
    auto add_dir = [&](const std::string& prefix, const DirectionWeights& d) {
      out.emplace_back(prefix + ".input", d.input);
      out.emplace_back(prefix + ".hidden", d.hidden);
      out.emplace_back(prefix + ".bias", d.bias);
      if (d.hidden_bias_n) out.emplace_back(prefix + ".hidden_bias_n", d.hidden_bias_n);
    };
    add_dir("recurrent.fwd", fwd_);
    add_dir("recurrent.bwd", bwd_);
    return out;
  }

  void save_state(nlohmann::json& header, TensorMap& tensors) const override {
    header["vocab"] = vocab_;
    tensors["recurrent.embedding"] = embedding_;
    for (const auto& [name, var] : parameters()) tensors[name] = var.value();
  }

 private:
  Var run(const DirectionWeights& w, const std::vector<Matrix>& inputs, const std::vector<Matrix>& masks,
          Eigen::Index b, bool reverse) const {
    const int h = config().hidden_dim / 2;
    Var state = ag::constant(Matrix::Zero(b, h));
    Var cell = state;
    if (inputs.empty()) return state;
    const bool lstm = *config().recurrent_cell == RecurrentCell::bilstm;
    const auto n = static_cast<int>(inputs.size());
    for (int k = 0; k < n; ++k) {
      const int t = reverse ? n - 1 - k : k;
      const Matrix& m = masks[static_cast<std::size_t>(t)];
      const Matrix keep = Matrix::Ones(m.rows(), m.cols()) - m;
      const Var x = ag::constant(inputs[static_cast<std::size_t>(t)]);
      const Var xw = ag::add_row(ag::matmul(x, w.input), w.bias);
      const Var hu = ag::matmul(state, w.hidden);
      Var next;
      if (lstm) {
        const Var gates = ag::add(xw, hu);
        const Var i = ag::sigmoid(ag::block(gates, 0, 0, b, h));
        const Var f = ag::sigmoid(ag::block(gates, 0, h, b, h));
        const Var g = ag::tanh(ag::block(gates, 0, 2 * h, b, h));
        const Var o = ag::sigmoid(ag::block(gates, 0, 3 * h, b, h));
        const Var c_new = ag::add(ag::mul(f, cell), ag::mul(i, g));
        next = ag::mul(o, ag::tanh(c_new));
        cell = ag::add(ag::mul_constant(c_new, m), ag::mul_constant(cell, keep));
      } else {
        const Var r = ag::sigmoid(ag::add(ag::block(xw, 0, 0, b, h), ag::block(hu, 0, 0, b, h)));
        const Var z = ag::sigmoid(ag::add(ag::block(xw, 0, h, b, h), ag::block(hu, 0, h, b, h)));
        const Var hn = ag::add_row(ag::block(hu, 0, 2 * h, b, h), w.hidden_bias_n);
        const Var cand = ag::tanh(ag::add(ag::block(xw, 0, 2 * h, b, h), ag::mul(r, hn)));
        // h' = (1 - z) * n + z * h
        next = ag::add(ag::sub(cand, ag::mul(z, cand)), ag::mul(z, state));
      }
      state = ag::add(ag::mul_constant(next, m), ag::mul_constant(state, keep));
    }
    return state;
  }

  std::vector<std::string> vocab_;  // ids start at 2
  std::unordered_map<std::string, int> index_;
  Matrix embedding_;
  DirectionWeights fwd_;
  DirectionWeights bwd_;
};

DirectionWeights init_direction(int input_dim, int h, bool lstm, Rng& rng) {
  const int g = lstm ? 4 : 3;
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  auto uniform = [&](int rows, int cols) {
    Matrix m(rows, cols);
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = (2.0 * rng.uniform() - 1.0) * bound;
    }
    return m;
  };
  DirectionWeights d;
  d.input = ag::parameter(uniform(input_dim, g * h));
  d.hidden = ag::parameter(uniform(h, g * h));
  d.bias = ag::parameter(uniform(1, g * h));
  if (!lstm) d.hidden_bias_n = ag::parameter(uniform(1, h));
  return d;
}

DirectionWeights load_direction(const TensorMap& tensors, const std::string& prefix, bool lstm) {
  DirectionWeights d;
  d.input = ag::parameter(require_tensor(tensors, prefix + ".input"));
  d.hidden = ag::parameter(require_tensor(tensors, prefix + ".hidden"));
  d.bias = ag::parameter(require_tensor(tensors, prefix + ".bias"));
  if (!lstm) d.hidden_bias_n = ag::parameter(require_tensor(tensors, prefix + ".hidden_bias_n"));
  return d;
}

}  // namespace

std::unique_ptr<Encoder> make_recurrent_encoder(const EncoderConfig& config, std::span<const std::string> vocab_texts,
                                                std::uint64_t seed, const ResourceResolver& resolver) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : vocab_texts) {
    for (auto& w : split_whitespace(t)) ++counts[w];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  const auto keep = static_cast<std::size_t>(config.vocab_size - 2);
  if (ranked.size() > keep) ranked.resize(keep);
  std::vector<std::string> vocab;
  std::unordered_map<std::string, int> wanted;
  for (auto& [w, _] : ranked) {
    wanted.emplace(w, static_cast<int>(vocab.size()) + 2);
    vocab.push_back(w);
  }

  Rng rng(Fnv1a(seed).update("recurrent-init").digest());
  const int dim = config.embedding_dim;
  Matrix embedding(static_cast<Eigen::Index>(vocab.size()) + 2, dim);
  for (Eigen::Index r = 0; r < embedding.rows(); ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) embedding(r, c) = rng.normal(0.0, 0.1);
  }
  embedding.row(kPad).setZero();
  if (*config.embedding_source != EmbeddingSource::random) {
    const auto vectors = read_word_vectors(resolver.resource(config.embedding_path), dim, wanted);
    for (const auto& [w, v] : vectors) {
      const int id = wanted.at(w);
      for (int c = 0; c < dim; ++c) embedding(id, c) = v[static_cast<std::size_t>(c)];
    }
  }
  const bool lstm = *config.recurrent_cell == RecurrentCell::bilstm;
  const int h = config.hidden_dim / 2;
  DirectionWeights fwd = init_direction(dim, h, lstm, rng);
  DirectionWeights bwd = init_direction(dim, h, lstm, rng);
  return std::make_unique<RecurrentEncoder>(config, std::move(vocab), std::move(embedding), fwd, bwd);
}

std::unique_ptr<Encoder> load_recurrent_encoder(const EncoderConfig& config, const nlohmann::json& header,
                                                const TensorMap& tensors) {
  if (!header.contains("vocab")) throw ValidationError("recurrent encoder state lacks a vocabulary");
  auto vocab = header["vocab"].get<std::vector<std::string>>();
  Matrix embedding = require_tensor(tensors, "recurrent.embedding");
  if (embedding.rows() != static_cast<Eigen::Index>(vocab.size()) + 2 || embedding.cols() != config.embedding_dim) {
    throw ValidationError("recurrent embedding table does not match its vocabulary");
  }
  const bool lstm = *config.recurrent_cell == RecurrentCell::bilstm;
  return std::make_unique<RecurrentEncoder>(config, std::move(vocab), std::move(embedding),
                                            load_direction(tensors, "recurrent.fwd", lstm),
                                            load_direction(tensors, "recurrent.bwd", lstm));
}

}  // namespace hatefuse::detail
