#include <doctest.h>

#include <cstdlib>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hatefuse/cli.hpp"
#include "hatefuse/ensemble.hpp"
#include "hatefuse/run_config.hpp"
#include "support.hpp"

using namespace hatefuse;
using hatefuse::testing::read_text;
using hatefuse::testing::TempDir;
using hatefuse::testing::write_text;

namespace {

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path fixture(const std::string& name) {
  const char* dir = std::getenv("HATEFUSE_FIXTURES");
  REQUIRE(dir != nullptr);
  return std::filesystem::path(dir) / name;
}

/// Workspace with separable train/dev splits and a toy-encoder config.
struct Workspace {
  TempDir dir{"hatefuse-cli"};
  std::filesystem::path config;

  explicit Workspace(const std::string& task_section, const std::string& extra = "") {
    write_split(dir / "train.tsv", hatefuse::testing::separable_split(48, 1), DataFormat::tsv);
    write_split(dir / "dev.tsv", hatefuse::testing::separable_split(12, 2, SplitName::dev), DataFormat::tsv);
    config = dir / "run.ini";
    write_text(config, "[data]\ntrain = train.tsv\ndev = dev.tsv\n\n[task]\n" + task_section +
                           "\n[encoder]\nfamily = toy\nhidden_dim = 64\n\n[training]\nlearning_rate = 0.05\n"
                           "epochs = 2\nweight_decay = 0\n\n[output]\ndir = " +
                           (dir / "out").string() + "\n" + extra);
  }
  std::filesystem::path out() const { return dir / "out"; }
};

std::vector<std::string> files_in(const std::filesystem::path& dir) {
  std::vector<std::string> names;
  for (const auto& e : std::filesystem::directory_iterator(dir)) names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

std::string steps_section(const std::string& manifest) { return manifest.substr(manifest.find("[epochs]")); }

}  // namespace

TEST_CASE("prepare writes the label distribution table") {
  TempDir dir;
  write_text(dir / "run.ini", "[data]\ntrain = " + fixture("two_sample.tsv").string() + "\n[output]\ndir = " +
                                  (dir / "out").string() + "\n");
  const auto r = run_cli({"prepare", "--config", (dir / "run.ini").string()});
  REQUIRE(r.code == 0);
  const auto table = read_text(dir / "out" / "label_distribution.tsv");
  CHECK(table.find("train\ttype\tNone\t2\n") != std::string::npos);
  CHECK(table.find("train\ttype\tTotal\t2\n") != std::string::npos);
  CHECK(table.find("train\tseverity\tTotal\t2\n") != std::string::npos);
  CHECK(table.find("# config_fingerprint") == 0);
}

TEST_CASE("prepare counts the bundled fixture") {
  TempDir dir;
  write_text(dir / "run.ini", "[data]\ntrain = " + fixture("mini_train.tsv").string() + "\n[output]\ndir = " +
                                  (dir / "out").string() + "\n");
  REQUIRE(run_cli({"prepare", "--config", (dir / "run.ini").string()}).code == 0);
  const auto table = read_text(dir / "out" / "label_distribution.tsv");
  CHECK(table.find("train\ttype\tSexism\t1\n") != std::string::npos);
  CHECK(table.find("train\tseverity\tLittle to None\t4\n") != std::string::npos);
  CHECK(table.find("train\ttarget\tIndividual\t3\n") != std::string::npos);
  CHECK(table.find("train\ttype\tTotal\t10\n") != std::string::npos);
}

TEST_CASE("prepare rejects an empty split") {
  TempDir dir;
  write_text(dir / "empty.tsv", "id\ttext\thate_type\n");
  write_text(dir / "run.ini", "[data]\ntrain = empty.tsv\n[output]\ndir = " + (dir / "out").string() + "\n");
  const auto r = run_cli({"prepare", "--config", (dir / "run.ini").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("empty") != std::string::npos);
  write_text(dir / "blank.tsv", "");
  write_text(dir / "run2.ini", "[data]\ntrain = blank.tsv\n");
  CHECK(run_cli({"prepare", "--config", (dir / "run2.ini").string()}).code == 1);
}

TEST_CASE("argument and config errors exit with 1") {
  CHECK(run_cli({}).code == 1);
  CHECK(run_cli({"prepare"}).code == 1);
  CHECK(run_cli({"frobnicate"}).code == 1);
  CHECK(run_cli({"prepare", "--config", "/nonexistent/run.ini"}).code == 1);
  TempDir dir;
  write_text(dir / "bad.ini", "[training]\nlearning_rate = fast\n");
  const auto r = run_cli({"train", "--config", (dir / "bad.ini").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("learning_rate") != std::string::npos);
  write_text(dir / "unknown.ini", "[training]\nmomentum = 0.9\n");
  CHECK(run_cli({"train", "--config", (dir / "unknown.ini").string()}).code == 1);
  CHECK(run_cli({"prepare", "--help"}).code == 0);
}

TEST_CASE("default training settings are recorded in the manifest") {
  Workspace ws("mode = single\ntask = type\n");
  write_text(ws.config, "[data]\ntrain = train.tsv\n[encoder]\nhidden_dim = 16\n[output]\ndir = " + ws.out().string() + "\n");
  REQUIRE(run_cli({"train", "--config", ws.config.string()}).code == 0);
  const auto manifest = read_text(ws.out() / "manifest.txt");
  CHECK(manifest.find("training.learning_rate = 2e-05\n") != std::string::npos);
  CHECK(manifest.find("training.batch_size = 16\n") != std::string::npos);
  CHECK(manifest.find("training.epochs = 3\n") != std::string::npos);
  CHECK(manifest.find("training.optimizer = adamw\n") != std::string::npos);
  CHECK(manifest.find("total_steps = 9\n") != std::string::npos);
}

TEST_CASE("fixed seed gives identical loss logs; the seed flag changes them") {
  Workspace ws("mode = multitask\n");
  REQUIRE(run_cli({"train", "--config", ws.config.string()}).code == 0);
  const auto first = steps_section(read_text(ws.out() / "manifest.txt"));
  REQUIRE(run_cli({"train", "--config", ws.config.string()}).code == 0);
  CHECK(steps_section(read_text(ws.out() / "manifest.txt")) == first);
  REQUIRE(run_cli({"train", "--config", ws.config.string(), "--seed", "7"}).code == 0);
  CHECK(steps_section(read_text(ws.out() / "manifest.txt")) != first);
}

TEST_CASE("multitask training without severity labels fails pre-flight") {
  Workspace ws("mode = multitask\n");
  auto split = hatefuse::testing::separable_split(20, 1);
  for (auto& s : split.samples) s.gold.erase(TaskId::severity);
  write_split(ws.dir / "train.tsv", split, DataFormat::tsv);
  const auto r = run_cli({"train", "--config", ws.config.string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("severity") != std::string::npos);
  CHECK_FALSE(std::filesystem::exists(ws.out() / "model.bin"));
}

TEST_CASE("predict writes one file per head in split order") {
  Workspace single("mode = single\ntask = type\n");
  REQUIRE(run_cli({"train", "--config", single.config.string()}).code == 0);
  REQUIRE(run_cli({"predict", "--config", single.config.string(), "--split", "dev"}).code == 0);
  CHECK(files_in(single.out() / "predictions") == std::vector<std::string>{"model.dev.type.json"});

  Workspace multi("mode = multitask\n");
  REQUIRE(run_cli({"train", "--config", multi.config.string()}).code == 0);
  REQUIRE(run_cli({"predict", "--config", multi.config.string()}).code == 0);
  const auto names = files_in(multi.out() / "predictions");
  CHECK(names == std::vector<std::string>{"model.dev.severity.json", "model.dev.target.json", "model.dev.type.json"});
  const auto dev = load_split(multi.dir / "dev.tsv", LabelSchema::all(), DataFormat::tsv);
  const auto m = read_prediction_matrix(multi.out() / "predictions" / "model.dev.target.json");
  REQUIRE(m.sample_ids.size() == dev.size());
  for (std::size_t i = 0; i < dev.size(); ++i) CHECK(m.sample_ids[i] == dev.samples[i].id);
  CHECK(m.probs.cols() == 5);
  CHECK(m.data_fingerprint == data_fingerprint(dev));
}

TEST_CASE("predict refuses a model that does not match the config") {
  Workspace ws("mode = single\ntask = type\n");
  REQUIRE(run_cli({"train", "--config", ws.config.string()}).code == 0);
  write_text(ws.dir / "other.ini", "[data]\ndev = dev.tsv\n[task]\nmode = single\ntask = type\n"
                                   "[encoder]\nhidden_dim = 32\n[output]\ndir = " + ws.out().string() + "\n");
  const auto r = run_cli({"predict", "--config", (ws.dir / "other.ini").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("fingerprint") != std::string::npos);
}

TEST_CASE("fuse soft over three files matches the hand mean") {
  Workspace ws("mode = single\ntask = type\n");
  Rng rng(3);
  std::vector<PredictionMatrix> ms;
  std::vector<std::string> inputs;
  for (int k = 0; k < 3; ++k) {
    auto m = hatefuse::testing::random_matrix(rng, "m" + std::to_string(k), 4, 6);
    m.labels = LabelSchema::hate_type().labels();
    m.data_fingerprint = "d";
    const auto path = ws.dir / ("m" + std::to_string(k) + ".json");
    write_prediction_matrix(path, m);
    inputs.push_back(path.string());
    ms.push_back(m);
  }
  std::vector<std::string> args = {"fuse", "--config", ws.config.string(), "--method", "soft", "--inputs"};
  args.insert(args.end(), inputs.begin(), inputs.end());
  REQUIRE(run_cli(args).code == 0);
  const auto fused = read_prediction_matrix(ws.out() / "fused" / "soft.type.json");
  const ag::Matrix mean = (ms[0].probs + ms[1].probs + ms[2].probs) / 3.0;
  CHECK((fused.probs - mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(fused.fusion["method"] == "soft");

  auto swapped = ms[2];
  std::swap(swapped.labels[0], swapped.labels[1]);
  write_prediction_matrix(ws.dir / "m2.json", swapped);
  const auto r = run_cli(args);
  CHECK(r.code == 1);
  CHECK(r.err.find("label order") != std::string::npos);
}

TEST_CASE("weighted preset weights are applied") {
  Workspace ws("mode = multitask\n", "");
  Rng rng(4);
  std::vector<PredictionMatrix> ms;
  std::vector<std::string> args = {"fuse", "--config", ws.config.string(), "--preset", "paper-1c", "--inputs"};
  for (const char* id : {"muril", "banglabert", "indicbertv2"}) {
    auto m = hatefuse::testing::random_matrix(rng, id, 3, 5, TaskId::target);
    m.labels = LabelSchema::target().labels();
    write_prediction_matrix(ws.dir / (std::string(id) + ".json"), m);
    args.push_back((ws.dir / (std::string(id) + ".json")).string());
    ms.push_back(m);
  }
  REQUIRE(run_cli(args).code == 0);
  const auto fused = read_prediction_matrix(ws.out() / "fused" / "weighted.target.json");
  const ag::Matrix expected = 0.5 * ms[0].probs + 0.3 * ms[1].probs + 0.2 * ms[2].probs;
  CHECK((fused.probs - expected).cwiseAbs().maxCoeff() < 1e-12);
  // Two members cannot take three weights.
  args.pop_back();
  CHECK(run_cli(args).code == 1);
}

TEST_CASE("evaluate perfect predictions, the weighted score and the majority baseline") {
  Workspace ws("mode = multitask\n", "[metrics]\ntask_weights = type:0.5,severity:0.25,target:0.25\n");
  const auto dev = load_split(ws.dir / "dev.tsv", LabelSchema::all(), DataFormat::tsv);
  std::vector<std::string> args = {"evaluate", "--config", ws.config.string(), "--predictions"};
  for (const auto& schema : LabelSchema::all()) {
    PredictionMatrix m;
    m.model_id = "oracle";
    m.task = schema.task();
    m.labels = schema.labels();
    m.data_fingerprint = data_fingerprint(dev);
    m.probs = ag::Matrix::Zero(static_cast<Eigen::Index>(dev.size()), static_cast<Eigen::Index>(schema.size()));
    for (std::size_t i = 0; i < dev.size(); ++i) {
      m.sample_ids.push_back(dev.samples[i].id);
      m.probs(static_cast<Eigen::Index>(i),
              static_cast<Eigen::Index>(schema.index_or_throw(dev.samples[i].gold.at(schema.task())))) = 1.0;
    }
    const auto path = ws.dir / ("oracle." + std::string(to_string(schema.task())) + ".json");
    write_prediction_matrix(path, m);
    args.push_back(path.string());
  }
  const auto r = run_cli(args);
  REQUIRE(r.code == 0);
  const auto metrics = nlohmann::json::parse(read_text(ws.out() / "eval" / "metrics.json"));
  CHECK(metrics["per_task_micro_f1"]["type"] == 1.0);
  CHECK(metrics["weighted_micro_f1"] == 1.0);
  CHECK(metrics["task_weights"]["type"] == 0.5);
  CHECK(metrics["task_weights"]["severity"] == 0.25);
  CHECK(std::filesystem::exists(ws.out() / "eval" / "confusion_type.csv"));
  CHECK(std::filesystem::exists(ws.out() / "eval" / "confusion_target.svg"));
  CHECK(std::filesystem::exists(ws.out() / "eval" / "error_report.md"));
  CHECK(r.out.find("weighted micro-F1 = 1") != std::string::npos);

  const auto base = run_cli({"evaluate", "--config", ws.config.string(), "--majority-baseline"});
  REQUIRE(base.code == 0);
  const auto bm = nlohmann::json::parse(read_text(ws.out() / "eval" / "metrics.json"));
  CHECK(bm["prediction_source"]["type"] == "majority-baseline");
  CHECK(bm["per_task_micro_f1"]["type"].get<double>() >= 0.0);

  // Wrong split size is an alignment error.
  write_split(ws.dir / "dev.tsv", hatefuse::testing::separable_split(5, 2, SplitName::dev), DataFormat::tsv);
  CHECK(run_cli(args).code == 1);
}

TEST_CASE("evaluate rejects predictions made on different data") {
  Workspace ws("mode = single\ntask = type\n");
  REQUIRE(run_cli({"train", "--config", ws.config.string()}).code == 0);
  REQUIRE(run_cli({"predict", "--config", ws.config.string()}).code == 0);
  auto dev = load_split(ws.dir / "dev.tsv", LabelSchema::all(), DataFormat::tsv);
  dev.samples[0].text += " edited";
  write_split(ws.dir / "dev.tsv", dev, DataFormat::tsv);
  const auto r = run_cli({"evaluate", "--config", ws.config.string(), "--predictions",
                          (ws.out() / "predictions" / "model.dev.type.json").string()});
  CHECK(r.code == 1);
  CHECK(r.err.find("fingerprint") != std::string::npos);
}

TEST_CASE("presets, file settings and flags layer in order") {
  TempDir dir;
  write_text(dir / "run.ini", "preset = finetune-defaults\n[training]\nepochs = 5\n[data]\ntrain = t.tsv\n");
  auto cfg = load_run_config(dir / "run.ini", {"toy-desk"});
  CHECK(cfg.training.learning_rate == 2e-5);  // file preset beats the earlier preset
  CHECK(cfg.training.epochs == 5);            // file key beats both presets
  CHECK(cfg.encoder.hidden_dim == 256);
  CHECK(cfg.data.at(SplitName::train) == dir / "t.tsv");

  RunConfig weighted;
  apply_preset(weighted, "paper-1c");
  CHECK(weighted.mode == TrainingMode::multitask);
  CHECK(weighted.ensemble.method == FusionMethod::weighted);
  CHECK(weighted.ensemble.weights == std::vector<double>{0.5, 0.3, 0.2});

  RunConfig unknown;
  CHECK_THROWS_AS(apply_preset(unknown, "nope"), ConfigError);
  write_text(dir / "bad.ini", "colour = blue\n[data]\ntrain = t.tsv\n");
  CHECK_THROWS_AS(load_run_config(dir / "bad.ini"), ConfigError);
}
