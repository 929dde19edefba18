#pragma once

#include <memory>
#include <span>
#include <string>

#include "hatefuse/encoder.hpp"

namespace hatefuse::detail {

std::unique_ptr<Encoder> make_toy_encoder(const EncoderConfig& config);

std::unique_ptr<Encoder> make_recurrent_encoder(const EncoderConfig& config, std::span<const std::string> vocab_texts,
                                                std::uint64_t seed, const ResourceResolver& resolver);
std::unique_ptr<Encoder> load_recurrent_encoder(const EncoderConfig& config, const nlohmann::json& header,
                                                const TensorMap& tensors);

std::unique_ptr<Encoder> make_transformer_encoder(const EncoderConfig& config, const ResourceResolver& resolver);
std::unique_ptr<Encoder> load_transformer_encoder(const EncoderConfig& config, const nlohmann::json& header,
                                                  const TensorMap& tensors);

const ag::Matrix& require_tensor(const TensorMap& tensors, const std::string& name);

}  // namespace hatefuse::detail
