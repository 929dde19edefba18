#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "hatefuse/autodiff.hpp"

namespace hatefuse {

using TensorMap = std::map<std::string, ag::Matrix>;

/// Binary container: 8-byte magic, a JSON header, then named float64
/// matrices stored little-endian in row-major order.
struct TensorFile {
  nlohmann::json header;
  TensorMap tensors;
};

void write_tensor_file(const std::filesystem::path& path, const std::string& magic, const TensorFile& file);
TensorFile read_tensor_file(const std::filesystem::path& path, const std::string& magic);

}  // namespace hatefuse
