#include "support.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace hatefuse::testing {

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

void write_text(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

DatasetSplit separable_split(std::size_t n, std::uint64_t seed, SplitName name) {
  static const std::vector<std::string> filler = {"আমি", "তুমি", "সে", "আজ", "কাল", "খবর", "দেখো", "ভালো",
                                                  "the", "post", "video", "news"};
  const auto type = LabelSchema::hate_type();
  const auto severity = LabelSchema::severity();
  const auto target = LabelSchema::target();
  Rng rng(seed);
  DatasetSplit split{name, {}};
  for (std::size_t i = 0; i < n; ++i) {
    const auto t = static_cast<std::size_t>(rng.below(type.size()));
    const auto s = static_cast<std::size_t>(rng.below(severity.size()));
    const auto g = static_cast<std::size_t>(rng.below(target.size()));
    std::vector<std::string> words = {"typ" + std::string(1, static_cast<char>('A' + t)),
                                      "sev" + std::string(1, static_cast<char>('K' + s)),
                                      "tgt" + std::string(1, static_cast<char>('Q' + g))};
    for (int k = 0; k < 3; ++k) words.push_back(filler[rng.below(filler.size())]);
    rng.shuffle(words);
    std::string text;
    for (const auto& w : words) text += (text.empty() ? "" : " ") + w;
    Sample sample{"s" + std::to_string(i), text, {}};
    sample.gold[TaskId::type] = type.label(t);
    sample.gold[TaskId::severity] = severity.label(s);
    sample.gold[TaskId::target] = target.label(g);
    split.samples.push_back(std::move(sample));
  }
  return split;
}

DatasetSplit published_train_split(std::uint64_t seed) {
  const std::vector<std::pair<std::string, std::size_t>> type = {
      {"None", 19954}, {"Abusive", 8212}, {"Political Hate", 4227}, {"Profane", 2331}, {"Religious Hate", 676},
      {"Sexism", 122}};
  const std::vector<std::pair<std::string, std::size_t>> severity = {
      {"Little to None", 23489}, {"Mild", 6853}, {"Severe", 5180}};
  const std::vector<std::pair<std::string, std::size_t>> target = {
      {"None", 21190}, {"Individual", 5646}, {"Organization", 3846}, {"Community", 2635}, {"Society", 2205}};
  auto expand = [](const std::vector<std::pair<std::string, std::size_t>>& counts) {
    std::vector<std::string> out;
    for (const auto& [label, c] : counts) out.insert(out.end(), c, label);
    return out;
  };
  Rng rng(seed);
  auto ty = expand(type), sv = expand(severity), tg = expand(target);
  rng.shuffle(ty);
  rng.shuffle(sv);
  rng.shuffle(tg);
  DatasetSplit split{SplitName::train, {}};
  for (std::size_t i = 0; i < ty.size(); ++i) {
    Sample s{"t" + std::to_string(i), "নমুনা পোস্ট " + std::to_string(i), {}};
    s.gold[TaskId::type] = ty[i];
    s.gold[TaskId::severity] = sv[i];
    s.gold[TaskId::target] = tg[i];
    split.samples.push_back(std::move(s));
  }
  return split;
}

std::vector<double> random_simplex(Rng& rng, std::size_t classes) {
  std::vector<double> v(classes);
  double sum = 0.0;
  for (auto& x : v) {
    x = -std::log(1.0 - rng.uniform());
    sum += x;
  }
  for (auto& x : v) x /= sum;
  return v;
}

PredictionMatrix random_matrix(Rng& rng, const std::string& model_id, std::size_t rows, std::size_t classes,
                               TaskId task) {
  PredictionMatrix m;
  m.model_id = model_id;
  m.task = task;
  for (std::size_t c = 0; c < classes; ++c) m.labels.push_back("L" + std::to_string(c));
  m.probs.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(classes));
  for (std::size_t i = 0; i < rows; ++i) {
    m.sample_ids.push_back("id" + std::to_string(i));
    const auto row = random_simplex(rng, classes);
    for (std::size_t c = 0; c < classes; ++c) m.probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c];
  }
  return m;
}

}  // namespace hatefuse::testing
