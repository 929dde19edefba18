#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hatefuse {

/// BERT-style tokenizer: whitespace and punctuation splitting followed by
/// greedy longest-match-first subword lookup with "##" continuations.
/// Case is preserved; no accent stripping.
class WordPieceTokenizer {
 public:
  explicit WordPieceTokenizer(std::vector<std::string> vocab);
  static WordPieceTokenizer from_file(const std::filesystem::path& vocab_txt);

  std::vector<std::string> split_words(std::string_view text) const;
  std::vector<int> tokenize(std::string_view text) const;

  int id(std::string_view token) const;
  int cls_id() const { return cls_; }
  int sep_id() const { return sep_; }
  int pad_id() const { return pad_; }
  int unk_id() const { return unk_; }
  const std::vector<std::string>& vocab() const { return vocab_; }

 private:
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, int> index_;
  int cls_ = 0, sep_ = 0, pad_ = 0, unk_ = 0;
  static constexpr std::size_t kMaxCharsPerWord = 100;
};

}  // namespace hatefuse
