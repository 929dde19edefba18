#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "hatefuse/autodiff.hpp"
#include "hatefuse/data.hpp"
#include "hatefuse/tensor_io.hpp"

namespace hatefuse {

enum class EncoderFamily { transformer, recurrent, toy };
enum class RecurrentCell { bilstm, bigru };
enum class EmbeddingSource { glove, fasttext, random };

std::string_view to_string(EncoderFamily f);
std::string_view to_string(RecurrentCell c);
std::string_view to_string(EmbeddingSource s);
EncoderFamily parse_family(std::string_view s);
RecurrentCell parse_cell(std::string_view s);
EmbeddingSource parse_embedding_source(std::string_view s);

struct EncoderConfig {
  EncoderFamily family = EncoderFamily::toy;
  /// Transformer family: a hub-style id ("org/name") or a directory path.
  std::string backbone_id;
  int max_length = 128;
  int hidden_dim = 256;
  // Recurrent family only.
  std::optional<RecurrentCell> recurrent_cell;
  std::optional<EmbeddingSource> embedding_source;
  std::string embedding_path;
  int embedding_dim = 300;
  int vocab_size = 30000;
  /// Seed of the toy encoder's feature hash.
  std::uint64_t hash_seed = 0;

  void validate() const;
  std::string fingerprint() const;
  nlohmann::json to_json() const;
  static EncoderConfig from_json(const nlohmann::json& j);
};

/// Token ids padded to max_length; `length` counts the content positions
/// (including any special tokens the backbone adds).
struct TokenSequence {
  std::vector<int> ids;
  int length = 0;
};

struct EncodedBatch {
  ag::Matrix vectors;  // B x hidden_dim
  std::vector<int> attention_lengths;

  std::size_t size() const { return attention_lengths.size(); }
};

using NamedParameters = std::vector<std::pair<std::string, ag::Var>>;

class Encoder {
 public:
  explicit Encoder(EncoderConfig config) : config_(std::move(config)) {}
  virtual ~Encoder() = default;
  Encoder(const Encoder&) = delete;
  Encoder& operator=(const Encoder&) = delete;

  const EncoderConfig& config() const { return config_; }

  virtual TokenSequence tokenize(std::string_view text) const = 0;
  /// Pooled representation (B x hidden_dim) as a tape node. Trainable
  /// parameters participate in the graph.
  virtual ag::Var forward(std::span<const std::string> texts) const = 0;
  virtual NamedParameters parameters() const { return {}; }

  /// Serializable state beyond the config (vocabularies, weights).
  virtual void save_state(nlohmann::json& header, TensorMap& tensors) const = 0;

  /// Eval-mode encoding; throws RuntimeFailure on non-finite output.
  EncodedBatch encode(std::span<const std::string> texts) const;

 private:
  EncoderConfig config_;
};

/// Resolves the on-disk location of backbones and embedding files. Relative
/// ids are looked up under the cache directory (HATEFUSE_CACHE by default).
struct ResourceResolver {
  std::filesystem::path cache_dir;

  static ResourceResolver from_environment();
  std::filesystem::path backbone_dir(const std::string& backbone_id) const;
  std::filesystem::path resource(const std::string& path) const;
};

/// Builds a fresh encoder. The recurrent family builds its vocabulary from
/// `vocab_texts` (the training split); `seed` drives any random init.
std::unique_ptr<Encoder> make_encoder(const EncoderConfig& config, std::span<const std::string> vocab_texts,
                                      std::uint64_t seed, const ResourceResolver& resolver);

std::unique_ptr<Encoder> load_encoder(const EncoderConfig& config, const nlohmann::json& header,
                                      const TensorMap& tensors);

TokenSequence tokenize_truncate(std::string_view text, const EncoderConfig& config,
                                const ResourceResolver& resolver = ResourceResolver::from_environment());
EncodedBatch encode(std::span<const std::string> texts, const EncoderConfig& config,
                    const ResourceResolver& resolver = ResourceResolver::from_environment());

// Toy family: character 1..3-gram counts hashed into hidden_dim buckets,
// L2-normalised. No parameters; needs no downloaded resources.
ag::Matrix toy_features(std::string_view text, const EncoderConfig& config);

// Transformer backbone layout on disk: config.json, vocab.txt, weights.bin.
struct TransformerShape {
  int vocab_size = 0;
  int hidden = 0;
  int layers = 0;
  int heads = 0;
  int intermediate = 0;
  int max_position = 0;

  nlohmann::json to_json() const;
  static TransformerShape from_json(const nlohmann::json& j);
};

/// Writes a randomly initialised backbone in the on-disk layout. Intended for
/// smoke tests and for bootstrapping converted checkpoints.
void write_random_backbone(const std::filesystem::path& dir, const TransformerShape& shape,
                           const std::vector<std::string>& vocab, std::uint64_t seed);

inline constexpr const char* kBackboneMagic = "HFBACKB1";

}  // namespace hatefuse
