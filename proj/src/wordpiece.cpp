#include "hatefuse/wordpiece.hpp"

#include <fstream>

#include "hatefuse/common.hpp"

namespace hatefuse {

namespace {

bool is_punct(char32_t cp) {
  if ((cp >= 33 && cp <= 47) || (cp >= 58 && cp <= 64) || (cp >= 91 && cp <= 96) || (cp >= 123 && cp <= 126)) {
    return true;
  }
  // Devanagari/Bangla danda, general punctuation block, CJK symbols.
  return cp == 0x0964 || cp == 0x0965 || (cp >= 0x2000 && cp <= 0x206f) || (cp >= 0x3000 && cp <= 0x303f);
}

bool is_space(char32_t cp) {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == 0x00a0 || cp == 0x200b || cp == 0x3000 ||
         (cp >= 0x2000 && cp <= 0x200a);
}

bool is_control(char32_t cp) { return cp == 0 || cp == 0xfffd || (cp < 32 && !is_space(cp)); }

}  // namespace

WordPieceTokenizer::WordPieceTokenizer(std::vector<std::string> vocab) : vocab_(std::move(vocab)) {
  for (std::size_t i = 0; i < vocab_.size(); ++i) index_.emplace(vocab_[i], static_cast<int>(i));
  auto require = [&](const char* tok) {
    auto it = index_.find(tok);
    if (it == index_.end()) throw ConfigError(std::string("wordpiece vocabulary lacks ") + tok);
    return it->second;
  };
  pad_ = require("[PAD]");
  unk_ = require("[UNK]");
  cls_ = require("[CLS]");
  sep_ = require("[SEP]");
}

WordPieceTokenizer WordPieceTokenizer::from_file(const std::filesystem::path& vocab_txt) {
  std::ifstream in(vocab_txt, std::ios::binary);
  if (!in) throw ConfigError("cannot open vocabulary '" + vocab_txt.string() + "'");
  std::vector<std::string> vocab;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    vocab.push_back(line);
  }
  return WordPieceTokenizer(std::move(vocab));
}

int WordPieceTokenizer::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? unk_ : it->second;
}

std::vector<std::string> WordPieceTokenizer::split_words(std::string_view text) const {
  std::vector<std::string> words;
  std::vector<char32_t> current;
  auto flush = [&] {
    if (!current.empty()) words.push_back(utf8::encode(current));
    current.clear();
  };
  for (char32_t cp : utf8::decode(text)) {
    if (is_space(cp)) {
      flush();
    } else if (is_control(cp)) {
      continue;
    } else if (is_punct(cp)) {
      flush();
      words.push_back(utf8::encode(cp));
    } else {
      current.push_back(cp);
    }
  }
  flush();
  return words;
}

std::vector<int> WordPieceTokenizer::tokenize(std::string_view text) const {
  std::vector<int> out;
  for (const auto& word : split_words(text)) {
    const auto cps = utf8::decode(word);
    if (cps.size() > kMaxCharsPerWord) {
      out.push_back(unk_);
      continue;
    }
    std::vector<int> pieces;
    std::size_t start = 0;
    bool bad = false;
    while (start < cps.size()) {
      std::size_t end = cps.size();
      int found = -1;
      while (start < end) {
        std::string piece = utf8::encode(std::vector<char32_t>(cps.begin() + static_cast<std::ptrdiff_t>(start),
                                                               cps.begin() + static_cast<std::ptrdiff_t>(end)));
        if (start > 0) piece = "##" + piece;
        if (auto it = index_.find(piece); it != index_.end()) {
          found = it->second;
          break;
        }
        --end;
      }
      if (found < 0) {
        bad = true;
        break;
      }
      pieces.push_back(found);
      start = end;
    }
    if (bad) {
      out.push_back(unk_);
    } else {
      out.insert(out.end(), pieces.begin(), pieces.end());
    }
  }
  return out;
}

}  // namespace hatefuse
