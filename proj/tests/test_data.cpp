#include <doctest.h>

#include <cstdlib>

#include "hatefuse/data.hpp"
#include "support.hpp"

using namespace hatefuse;
using hatefuse::testing::TempDir;
using hatefuse::testing::write_text;

namespace {

std::filesystem::path fixture(const std::string& name) {
  const char* dir = std::getenv("HATEFUSE_FIXTURES");
  REQUIRE(dir != nullptr);
  return std::filesystem::path(dir) / name;
}

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("schemas have the expected label orders") {
  CHECK(LabelSchema::hate_type().labels() ==
        std::vector<std::string>{"None", "Abusive", "Political Hate", "Profane", "Religious Hate", "Sexism"});
  CHECK(LabelSchema::severity().labels() == std::vector<std::string>{"Little to None", "Mild", "Severe"});
  CHECK(LabelSchema::target().size() == 5);
  CHECK(LabelSchema::target().index_of("None").has_value());
  CHECK_THROWS_AS(LabelSchema::hate_type().index_or_throw("Sexsim"), ValidationError);
}

TEST_CASE("three-line tsv loads three samples in order") {
  TempDir dir;
  write_text(dir / "a.tsv", "id\ttext\thate_type\nx\tone\tNone\ny\ttwo\tSexism\nz\tthree\tAbusive\n");
  const auto split = load_split(dir / "a.tsv", LabelSchema::all(), DataFormat::tsv);
  REQUIRE(split.size() == 3);
  CHECK(split.samples[0].id == "x");
  CHECK(split.samples[1].gold.at(TaskId::type) == "Sexism");
  CHECK(split.samples[2].text == "three");
  CHECK(split.has_task(TaskId::type));
  CHECK_FALSE(split.has_task(TaskId::severity));
}

TEST_CASE("typo label names the row, label and task") {
  TempDir dir;
  write_text(dir / "a.tsv", "id\ttext\thate_type\nx\tone\tNone\ny\ttwo\tSexsim\n");
  const auto msg = error_of([&] { load_split(dir / "a.tsv", LabelSchema::all(), DataFormat::tsv); });
  CHECK(msg.find(":3:") != std::string::npos);
  CHECK(msg.find("Sexsim") != std::string::npos);
  CHECK(msg.find("type") != std::string::npos);
}

TEST_CASE("malformed records report their line") {
  TempDir dir;
  write_text(dir / "a.tsv", "id\ttext\thate_type\nx\tone\tNone\ny\ttwo\n");
  CHECK(error_of([&] { load_split(dir / "a.tsv", LabelSchema::all(), DataFormat::tsv); }).find(":3:") !=
        std::string::npos);
  write_text(dir / "b.jsonl", "{\"id\": 1, \"text\": \"ok\"}\n{not json\n");
  CHECK(error_of([&] { load_split(dir / "b.jsonl", LabelSchema::all(), DataFormat::jsonl); }).find(":2:") !=
        std::string::npos);
  write_text(dir / "c.tsv", "id\ttext\nx\tone\nx\ttwo\n");
  CHECK(error_of([&] { load_split(dir / "c.tsv", LabelSchema::all(), DataFormat::tsv); }).find("duplicate") !=
        std::string::npos);
  write_text(dir / "d.tsv", "");
  CHECK_THROWS_AS(load_split(dir / "d.tsv", LabelSchema::all(), DataFormat::tsv), ValidationError);
  CHECK_THROWS_AS(load_split(dir / "missing.tsv", LabelSchema::all(), DataFormat::tsv), ValidationError);
}

TEST_CASE("jsonl loads integer ids and nested labels") {
  TempDir dir;
  write_text(dir / "a.jsonl",
             "{\"id\": 5, \"text\": \"hi\", \"labels\": {\"hate_type\": \"Profane\", \"severity\": \"Mild\"}}\n"
             "{\"id\": \"b\", \"text\": \"yo\"}\n");
  const auto split = load_split(dir / "a.jsonl", LabelSchema::all(), format_from_path(dir / "a.jsonl"));
  REQUIRE(split.size() == 2);
  CHECK(split.samples[0].id == "5");
  CHECK(split.samples[0].gold.at(TaskId::severity) == "Mild");
  CHECK(split.samples[1].gold.empty());
}

TEST_CASE("write_split round-trips both formats") {
  TempDir dir;
  auto split = hatefuse::testing::separable_split(25, 9);
  split.samples[0].text = "tab\there\nnew line \\ back\r";
  split.samples[1].gold.erase(TaskId::severity);
  for (auto fmt : {DataFormat::tsv, DataFormat::jsonl}) {
    const auto path = dir / (std::string("rt.") + std::string(to_string(fmt)));
    write_split(path, split, fmt);
    const auto back = load_split(path, LabelSchema::all(), fmt);
    CHECK(back.samples == split.samples);
  }
}

TEST_CASE("preprocess removes only Bangla digits") {
  CHECK(preprocess("২০২৪ সালে") == " সালে");
  CHECK(preprocess("") == "");
  CHECK(preprocess("abc 123") == "abc 123");
  CHECK(preprocess("০১২৩৪৫৬৭৮৯") == "");
  CHECK(preprocess("ক৯খ") == "কখ");
  // Invalid UTF-8 survives untouched.
  const std::string raw("\xe0\xa7\xff", 3);
  CHECK(preprocess(raw) == raw);
}

TEST_CASE("preprocess is idempotent on splits") {
  const auto split = load_split(fixture("mini_train.tsv"), LabelSchema::all(), DataFormat::tsv);
  const auto once = preprocess(split);
  CHECK(preprocess(once).samples == once.samples);
  CHECK(once.samples[6].text == "সুন্দর ভিডিও ");
}

TEST_CASE("label distribution keeps schema order and zeros") {
  const auto two = load_split(fixture("two_sample.tsv"), LabelSchema::all(), DataFormat::tsv);
  const auto d = label_distribution(two, LabelSchema::hate_type());
  CHECK(d.total() == 2);
  CHECK(d.count("None") == 2);
  CHECK(d.count("Sexism") == 0);
  CHECK(d.counts.size() == 6);
  CHECK(d.counts[0].first == "None");

  const auto mini = load_split(fixture("mini_train.tsv"), LabelSchema::all(), DataFormat::tsv);
  const auto t = label_distribution(mini, LabelSchema::hate_type());
  CHECK(t.count("None") == 3);
  CHECK(t.count("Abusive") == 2);
  CHECK(t.count("Political Hate") == 2);
  CHECK(t.count("Sexism") == 1);
  const auto s = label_distribution(mini, LabelSchema::severity());
  CHECK(s.count("Little to None") == 4);
  CHECK(s.count("Mild") == 4);
  CHECK(s.count("Severe") == 2);
  const auto g = label_distribution(mini, LabelSchema::target());
  CHECK(g.count("Individual") == 3);
  CHECK(g.count("Society") == 1);
}

TEST_CASE("label distribution rejects a task with no labels") {
  DatasetSplit split{SplitName::test, {{"a", "x", {}}}};
  CHECK_THROWS_AS(label_distribution(split, LabelSchema::hate_type()), ValidationError);
}

TEST_CASE("data fingerprint tracks ids and texts") {
  auto split = hatefuse::testing::separable_split(10, 1);
  const auto fp = data_fingerprint(split);
  CHECK(fp == data_fingerprint(split));
  auto other = split;
  other.samples[3].text += "!";
  CHECK(data_fingerprint(other) != fp);
  other = split;
  std::swap(other.samples[0], other.samples[1]);
  CHECK(data_fingerprint(other) != fp);
}
