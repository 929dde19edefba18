#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hatefuse {

// Error taxonomy. The CLI maps ValidationError and its subclasses to exit
// code 1 and RuntimeFailure to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class AlignmentError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class FingerprintError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TaskId { type, severity, target };

inline constexpr TaskId kAllTasks[] = {TaskId::type, TaskId::severity, TaskId::target};

std::string_view to_string(TaskId task);
/// Accepts the canonical names plus the column aliases used by the
/// released data files (hate_type, hate_severity, to_whom).
std::optional<TaskId> parse_task(std::string_view name);
TaskId parse_task_or_throw(std::string_view name);

/// 64-bit FNV-1a. Stable across platforms; used for fingerprints and the toy
/// encoder's feature hashing.
class Fnv1a {
 public:
  explicit Fnv1a(std::uint64_t seed = 0) : state_(kOffset ^ seed) {}
  Fnv1a& update(std::string_view bytes);
  Fnv1a& update_u64(std::uint64_t v);
  std::uint64_t digest() const { return state_; }
  std::string hex() const;

 private:
  static constexpr std::uint64_t kOffset = 14695981039346656037ULL;
  static constexpr std::uint64_t kPrime = 1099511628211ULL;
  std::uint64_t state_;
};

std::string to_hex(std::uint64_t v);

/// Portable seeded generator. std:: distributions are implementation-defined,
/// so sampling is done here to keep runs bit-identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);
  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);
  double normal(double mean = 0.0, double stddev = 1.0);
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[below(i)]);
    }
  }

 private:
  std::uint64_t s_[4];
  std::optional<double> spare_;
};

namespace utf8 {

/// Decodes UTF-8; invalid bytes decode to U+FFFD one byte at a time.
std::vector<char32_t> decode(std::string_view s);
std::string encode(char32_t cp);
std::string encode(const std::vector<char32_t>& cps);

}  // namespace utf8

std::vector<std::string> split_whitespace(std::string_view s);

/// Shortest round-trip representation of a double.
std::string format_double(double v);

}  // namespace hatefuse
