#include "hatefuse/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "hatefuse/common.hpp"

namespace hatefuse {

namespace {

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

std::string get_bytes(std::istream& in, std::uint64_t n, const std::filesystem::path& path) {
  if (n > (1ULL << 34)) throw ValidationError(path.string() + ": corrupt tensor file (implausible length)");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw ValidationError(path.string() + ": truncated tensor file");
  return s;
}

}  // namespace

void write_tensor_file(const std::filesystem::path& path, const std::string& magic, const TensorFile& file) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write '" + path.string() + "'");
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
  const std::string header = file.header.dump();
  put_u64(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  put_u64(out, file.tensors.size());
  for (const auto& [name, m] : file.tensors) {
    put_u64(out, name.size());
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u64(out, static_cast<std::uint64_t>(m.rows()));
    put_u64(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        const double v = m(r, c);
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
    }
  }
  if (!out) throw RuntimeFailure("write failed for '" + path.string() + "'");
}

TensorFile read_tensor_file(const std::filesystem::path& path, const std::string& magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::string got(magic.size(), '\0');
  in.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (!in || got != magic) throw ValidationError(path.string() + ": not a " + magic + " file");
  TensorFile file;
  try {
    file.header = nlohmann::json::parse(get_bytes(in, get_u64(in), path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": corrupt header: " + e.what());
  }
  const auto count = get_u64(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string name = get_bytes(in, get_u64(in), path);
    const auto rows = get_u64(in);
    const auto cols = get_u64(in);
    if (!in || rows > (1ULL << 28) || cols > (1ULL << 28)) throw ValidationError(path.string() + ": corrupt tensor '" + name + "'");
    ag::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        double v = 0.0;
        in.read(reinterpret_cast<char*>(&v), sizeof v);
        m(r, c) = v;
      }
    }
    if (!in) throw ValidationError(path.string() + ": truncated tensor '" + name + "'");
    file.tensors.emplace(std::move(name), std::move(m));
  }
  return file;
}

}  // namespace hatefuse
