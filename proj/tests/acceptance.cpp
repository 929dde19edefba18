// Acceptance suite: one PASS/FAIL line per criterion; exit status is the
// number of failures.
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

#include "hatefuse/cli.hpp"
#include "hatefuse/ensemble.hpp"
#include "hatefuse/evaluation.hpp"
#include "hatefuse/model.hpp"
#include "support.hpp"

using namespace hatefuse;
using hatefuse::testing::random_matrix;
using hatefuse::testing::read_text;
using hatefuse::testing::TempDir;
using hatefuse::testing::write_text;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

/// Records the first failed check; later checks still run for the detail line.
class Checker {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && pass_) {
      pass_ = false;
      first_failure_ = what;
    }
  }
  bool pass() const { return pass_; }
  const std::string& failure() const { return first_failure_; }

 private:
  bool pass_ = true;
  std::string first_failure_;
};

double max_abs_diff(const ag::Matrix& a, const ag::Matrix& b) { return (a - b).cwiseAbs().maxCoeff(); }

PredictionMatrix permute_rows(const PredictionMatrix& m, const std::vector<std::size_t>& perm) {
  PredictionMatrix out = m;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    out.sample_ids[i] = m.sample_ids[perm[i]];
    out.probs.row(static_cast<Eigen::Index>(i)) = m.probs.row(static_cast<Eigen::Index>(perm[i]));
  }
  return out;
}

// 1. weighted(uniform) == soft, degenerate weights, permutation equivariance.
Verdict fusion_algebra() {
  Checker c;
  Rng rng(101);
  double worst_uniform = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto rows = 1 + rng.below(40);
    const auto classes = 2 + rng.below(5);
    std::vector<PredictionMatrix> ms = {random_matrix(rng, "a", rows, classes), random_matrix(rng, "b", rows, classes),
                                        random_matrix(rng, "c", rows, classes)};
    const auto soft = soft_vote(ms);
    const std::vector<double> uniform = {1.0 / 3, 1.0 / 3, 1.0 / 3};
    const double d = max_abs_diff(weighted_vote(ms, uniform).probs, soft.probs);
    worst_uniform = std::max(worst_uniform, d);
    c.expect(d <= 1e-9, "uniform weights differ from soft vote");
    const std::vector<double> first = {1.0, 0.0, 0.0};
    c.expect(weighted_vote(ms, first).probs == ms[0].probs, "weights (1,0,0) do not reproduce member 1");

    // Member order: outputs are unchanged when members and weights move together.
    const auto w = hatefuse::testing::random_simplex(rng, 3);
    const auto weighted = weighted_vote(ms, w);
    const auto hard_soft = hard_vote_indices(ms, TieBreak::soft_fallback);
    const auto hard_low = hard_vote_indices(ms, TieBreak::lowest_index);
    std::vector<std::size_t> order = {0, 1, 2};
    while (std::next_permutation(order.begin(), order.end())) {
      const std::vector<PredictionMatrix> pm = {ms[order[0]], ms[order[1]], ms[order[2]]};
      const std::vector<double> pw = {w[order[0]], w[order[1]], w[order[2]]};
      c.expect(soft_vote(pm).probs == soft.probs, "soft vote depends on member order");
      c.expect(weighted_vote(pm, pw).probs == weighted.probs, "weighted vote depends on member order");
      c.expect(hard_vote_indices(pm, TieBreak::soft_fallback) == hard_soft, "hard vote depends on member order");
      c.expect(hard_vote_indices(pm, TieBreak::lowest_index) == hard_low, "hard vote depends on member order");
    }

    // Sample order: permuting rows of every member permutes the output rows.
    std::vector<std::size_t> perm(rows);
    std::iota(perm.begin(), perm.end(), 0);
    rng.shuffle(perm);
    const std::vector<PredictionMatrix> pr = {permute_rows(ms[0], perm), permute_rows(ms[1], perm),
                                              permute_rows(ms[2], perm)};
    c.expect(soft_vote(pr).probs == permute_rows(soft, perm).probs, "soft vote is not row-equivariant");
    c.expect(weighted_vote(pr, w).probs == permute_rows(weighted, perm).probs, "weighted vote is not row-equivariant");
    const auto hp = hard_vote_indices(pr, TieBreak::soft_fallback);
    for (std::size_t i = 0; i < rows; ++i) c.expect(hp[i] == hard_soft[perm[i]], "hard vote is not row-equivariant");
  }
  std::ostringstream d;
  d << "100 fixtures; max |weighted(1/3) - soft| = " << worst_uniform;
  return {c.pass(), c.pass() ? d.str() : c.failure()};
}

// 2. micro-F1 against a brute-force pooled tally.
Verdict metric_oracle() {
  Checker c;
  Rng rng(202);
  for (int trial = 0; trial < 500; ++trial) {
    const auto n = 1 + rng.below(20);
    const auto classes = 2 + rng.below(5);
    std::vector<std::string> labels;
    for (std::size_t k = 0; k < classes; ++k) labels.push_back("c" + std::to_string(k));
    const LabelSchema schema(TaskId::type, labels);
    std::vector<std::string> gold, pred;
    for (std::size_t i = 0; i < n; ++i) {
      gold.push_back(labels[rng.below(classes)]);
      // Bias toward correct predictions so the full range of scores is hit.
      pred.push_back(rng.uniform() < 0.4 ? gold.back() : labels[rng.below(classes)]);
    }
    long tp = 0, fp = 0, fn = 0;
    for (const auto& label : labels) {
      for (std::size_t i = 0; i < n; ++i) {
        const bool p = pred[i] == label, g = gold[i] == label;
        tp += p && g;
        fp += p && !g;
        fn += !p && g;
      }
    }
    const double oracle = 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    const double f1 = micro_f1(pred, gold, schema);
    c.expect(f1 == oracle, "micro_f1 differs from the pooled tally");
    const auto cm = confusion_matrix(pred, gold, schema);
    c.expect(static_cast<double>(cm.trace()) / static_cast<double>(n) == f1, "trace/N differs from micro_f1");
  }
  return {c.pass(), c.pass() ? "500 instances, exact agreement" : c.failure()};
}

// 3. Loss linearity, ln C for uniform predictions, head gradient check.
Verdict loss_suite() {
  Checker c;
  Rng rng(303);
  std::vector<MultitaskPrediction> pred;
  std::vector<MultitaskGold> gold;
  for (int i = 0; i < 16; ++i) {
    const auto t = hatefuse::testing::random_simplex(rng, 6);
    const auto s = hatefuse::testing::random_simplex(rng, 3);
    const auto g = hatefuse::testing::random_simplex(rng, 5);
    pred.push_back({Eigen::Map<const ag::RowVector>(t.data(), 6), Eigen::Map<const ag::RowVector>(s.data(), 3),
                    Eigen::Map<const ag::RowVector>(g.data(), 5)});
    gold.push_back({rng.below(6), rng.below(3), rng.below(5)});
  }
  double worst_linear = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const LossWeights a{rng.uniform() * 2, rng.uniform() * 2, rng.uniform() * 2};
    const LossWeights b{rng.uniform() * 2, rng.uniform() * 2, rng.uniform() * 2};
    const double s = rng.uniform() * 3, t = rng.uniform() * 3;
    const LossWeights mix{s * a.alpha + t * b.alpha, s * a.beta + t * b.beta, s * a.gamma + t * b.gamma};
    const double lhs = mtl_loss(pred, gold, mix);
    const double rhs = s * mtl_loss(pred, gold, a) + t * mtl_loss(pred, gold, b);
    worst_linear = std::max(worst_linear, std::abs(lhs - rhs));
    c.expect(std::abs(lhs - rhs) <= 1e-6, "mtl_loss is not linear in the weights");
  }
  double ce_per_task[3];
  {
    for (std::size_t k = 0; k < 3; ++k) {
      const auto schema = LabelSchema::for_task(kAllTasks[k]);
      const double lnc = std::log(static_cast<double>(schema.size()));
      // Zero-initialised head on real encoder output gives uniform rows.
      EncoderConfig enc;
      enc.hidden_dim = 32;
      ClassificationHead head(HeadConfig::for_schema(schema), 32, HeadInit::zeros, 1);
      const std::vector<std::string> texts = {"আমি ভালো", "typA sevK", "", "news video"};
      const auto probs = forward_single(encode(texts, enc), head, schema);
      const std::vector<std::size_t> g = {0, 1, schema.size() - 1, 0};
      ce_per_task[k] = cross_entropy(probs, g);
      c.expect(std::abs(ce_per_task[k] - lnc) <= 1e-6, "uniform CE differs from ln C");
    }
    const std::vector<MultitaskPrediction> uniform(
        4, {ag::RowVector::Constant(6, 1.0 / 6), ag::RowVector::Constant(3, 1.0 / 3), ag::RowVector::Constant(5, 0.2)});
    const std::vector<MultitaskGold> any(4, MultitaskGold{0, 2, 4});
    c.expect(std::abs(mtl_loss(uniform, any, {1, 1, 1}) - (std::log(6.0) + std::log(3.0) + std::log(5.0))) <= 1e-6,
             "uniform multitask loss differs from ln6 + ln3 + ln5");
  }

  // Gradient of the weighted multitask loss with respect to every head
  // parameter, tape versus central differences.
  EncoderConfig enc;
  enc.hidden_dim = 24;
  const auto split = hatefuse::testing::separable_split(8, 7);
  std::vector<std::string> texts;
  for (const auto& s : split.samples) texts.push_back(s.text);
  const ag::Matrix features = encode(texts, enc).vectors;
  const LossWeights w{0.7, 1.3, 0.4};
  std::vector<ClassificationHead> heads;
  std::vector<std::vector<int>> targets;
  for (TaskId t : kAllTasks) {
    const auto schema = LabelSchema::for_task(t);
    heads.emplace_back(HeadConfig::for_schema(schema), 24, HeadInit::normal, 5);
    // Larger weights than the default init so the loss surface is not flat.
    heads.back().weight().node()->value *= 25.0;
    std::vector<int> g;
    for (const auto& s : split.samples) g.push_back(static_cast<int>(schema.index_or_throw(s.gold.at(t))));
    targets.push_back(g);
  }
  auto loss_value = [&]() {
    ag::Var total;
    for (std::size_t k = 0; k < 3; ++k) {
      ag::Var ce = ag::scale(ag::cross_entropy(heads[k].logits(ag::constant(features)), targets[k]), w.of(kAllTasks[k]));
      total = k == 0 ? ce : ag::add(total, ce);
    }
    return total;
  };
  ag::backward(loss_value());
  const double eps = 1e-4;
  double worst_rel = 0.0;
  for (auto& head : heads) {
    for (const ag::Var* p : {&head.weight(), &head.bias()}) {
      const ag::Matrix analytic = p->grad();
      ag::Matrix numeric(analytic.rows(), analytic.cols());
      ag::Matrix& value = p->node()->value;
      for (Eigen::Index i = 0; i < value.size(); ++i) {
        const double orig = value.data()[i];
        value.data()[i] = orig + eps;
        const double up = loss_value().value()(0, 0);
        value.data()[i] = orig - eps;
        const double down = loss_value().value()(0, 0);
        value.data()[i] = orig;
        numeric.data()[i] = (up - down) / (2 * eps);
      }
      const double denom = std::max(analytic.norm(), numeric.norm());
      const double rel = denom == 0.0 ? 0.0 : (analytic - numeric).norm() / denom;
      worst_rel = std::max(worst_rel, rel);
      c.expect(rel <= 1e-3, "head gradient disagrees with finite differences");
    }
  }
  std::ostringstream d;
  d << "linearity max err " << worst_linear << "; CE(uniform) = " << ce_per_task[0] << ", " << ce_per_task[1] << ", "
    << ce_per_task[2] << "; gradient max rel err " << worst_rel;
  return {c.pass(), c.pass() ? d.str() : c.failure() + " (" + d.str() + ")"};
}

// 4. Multitask overfit on 200 separable samples.
Verdict overfit() {
  const auto split = hatefuse::testing::separable_split(200, 404);
  EncoderConfig enc;
  enc.hidden_dim = 256;
  TrainingConfig t;
  t.learning_rate = 0.05;
  t.weight_decay = 0.0;
  t.epochs = 20;
  t.batch_size = 16;
  std::vector<HeadConfig> heads;
  for (const auto& s : LabelSchema::all()) heads.push_back(HeadConfig::for_schema(s));
  const auto result = train(split, enc, heads, t, LossWeights{});
  const auto probs = predict_proba(result.model, split, "overfit");
  Checker c;
  std::ostringstream d;
  for (TaskId task : kAllTasks) {
    std::vector<std::string> gold;
    for (const auto& s : split.samples) gold.push_back(s.gold.at(task));
    const double f1 = micro_f1(argmax_labels(probs.at(task)), gold, LabelSchema::for_task(task));
    d << to_string(task) << " " << f1 << "  ";
    c.expect(f1 >= 0.99, std::string(to_string(task)) + " micro-F1 below 0.99");
  }
  d << "(train " << result.seconds << " s)";
  return {c.pass(), c.pass() ? d.str() : c.failure() + ": " + d.str()};
}

// 5. Soft vote beats the best member on noisy synthetic members.
Verdict ensemble_beats_members() {
  Rng rng(505);
  const std::size_t n = 200, classes = 6;
  const auto schema = LabelSchema::hate_type();
  int wins = 0;
  double gain = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::string> gold;
    std::vector<std::size_t> gold_idx;
    for (std::size_t i = 0; i < n; ++i) {
      gold_idx.push_back(rng.below(classes));
      gold.push_back(schema.label(gold_idx.back()));
    }
    std::vector<PredictionMatrix> members;
    double best = 0.0;
    for (int k = 0; k < 3; ++k) {
      PredictionMatrix m;
      m.model_id = "member" + std::to_string(k);
      m.labels = schema.labels();
      ag::Matrix logits(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(classes));
      for (std::size_t i = 0; i < n; ++i) {
        m.sample_ids.push_back("s" + std::to_string(i));
        // 20% of rows point their logits at a random wrong label.
        std::size_t target = gold_idx[i];
        if (rng.uniform() < 0.2) target = (target + 1 + rng.below(classes - 1)) % classes;
        for (std::size_t j = 0; j < classes; ++j) {
          logits(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
              (j == target ? 2.0 : 0.0) + rng.normal(0.0, 1.0);
        }
      }
      m.probs = ag::softmax(logits);
      best = std::max(best, micro_f1(argmax_labels(m), gold, schema));
      members.push_back(std::move(m));
    }
    const double fused = micro_f1(argmax_labels(soft_vote(members)), gold, schema);
    wins += fused >= best;
    gain += fused - best;
  }
  std::ostringstream d;
  d << wins << "/100 trials; mean gain over best member " << gain / 100.0;
  return {wins >= 80, d.str()};
}

// 6. cmd_prepare reproduces the published train label counts.
Verdict data_fidelity() {
  const std::vector<std::tuple<std::string, std::string, std::size_t>> expected = {
      {"type", "None", 19954},           {"type", "Abusive", 8212},        {"type", "Political Hate", 4227},
      {"type", "Profane", 2331},         {"type", "Religious Hate", 676},  {"type", "Sexism", 122},
      {"severity", "Little to None", 23489}, {"severity", "Mild", 6853},   {"severity", "Severe", 5180},
      {"target", "None", 21190},         {"target", "Individual", 5646},   {"target", "Organization", 3846},
      {"target", "Community", 2635},     {"target", "Society", 2205},      {"type", "Total", 35522},
      {"severity", "Total", 35522},      {"target", "Total", 35522}};
  TempDir dir("hatefuse-accept6");
  std::filesystem::path train_path;
  std::string source;
  if (const char* official = std::getenv("HATEFUSE_OFFICIAL_TRAIN"); official != nullptr && *official != '\0') {
    train_path = official;
    source = "official file " + train_path.string();
  } else {
    train_path = dir / "train.tsv";
    write_split(train_path, hatefuse::testing::published_train_split(606), DataFormat::tsv);
    source = "synthetic fixture (set HATEFUSE_OFFICIAL_TRAIN for the official file)";
  }
  write_text(dir / "run.ini", "[data]\ntrain = " + train_path.string() + "\n[output]\ndir = " + (dir / "out").string() + "\n");
  std::ostringstream out, err;
  const int code = cli::run({"prepare", "--config", (dir / "run.ini").string()}, out, err);
  if (code != 0) return {false, "prepare exited " + std::to_string(code) + ": " + err.str()};
  const auto table = read_text(dir / "out" / "label_distribution.tsv");
  for (const auto& [task, label, count] : expected) {
    const auto row = "train\t" + task + "\t" + label + "\t" + std::to_string(count) + "\n";
    if (table.find(row) == std::string::npos) return {false, "missing row: " + task + "/" + label + " = " + std::to_string(count)};
  }
  return {true, "17 counts match on " + source};
}

// 7. Bangla digit removal: exhaustive code point sweep plus random strings.
Verdict preprocessing() {
  Checker c;
  std::size_t swept = 0;
  for (char32_t cp = 0; cp <= 0x10FFFF; ++cp) {
    if (cp >= 0xD800 && cp <= 0xDFFF) continue;
    ++swept;
    const auto s = utf8::encode(cp);
    const bool digit = cp >= 0x09E6 && cp <= 0x09EF;
    const auto p = preprocess(s);
    c.expect(p == (digit ? std::string() : s), "single code point handled wrongly");
    const auto framed = "x" + s + "y";
    c.expect(preprocess(framed) == (digit ? std::string("xy") : framed), "framed code point handled wrongly");
    c.expect(preprocess(p) == p, "not idempotent on a single code point");
  }
  Rng rng(707);
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<char32_t> cps;
    const auto len = rng.below(40);
    for (std::size_t i = 0; i < len; ++i) {
      char32_t cp;
      switch (rng.below(4)) {
        case 0: cp = static_cast<char32_t>(0x09E0 + rng.below(0x20)); break;  // digits and neighbours
        case 1: cp = static_cast<char32_t>(0x0980 + rng.below(0x80)); break;  // Bengali block
        case 2: cp = static_cast<char32_t>(0x20 + rng.below(0x5F)); break;    // ASCII
        default:
          do {
            cp = static_cast<char32_t>(rng.below(0x110000));
          } while (cp >= 0xD800 && cp <= 0xDFFF);
      }
      cps.push_back(cp);
    }
    std::vector<char32_t> kept;
    for (char32_t cp : cps) {
      if (cp < 0x09E6 || cp > 0x09EF) kept.push_back(cp);
    }
    const auto s = utf8::encode(cps);
    const auto p = preprocess(s);
    c.expect(p == utf8::encode(kept), "random string differs from the filter oracle");
    c.expect(preprocess(p) == p, "not idempotent on a random string");
  }
  // Arbitrary bytes, including invalid UTF-8: still idempotent, no digit left.
  for (int trial = 0; trial < 1000; ++trial) {
    std::string bytes;
    const auto len = rng.below(30);
    static const unsigned char pool[] = {0xE0, 0xA7, 0xA6, 0xAF, 0xA5, 0xB0, 'a', 0xFF};
    for (std::size_t i = 0; i < len; ++i) bytes.push_back(static_cast<char>(pool[rng.below(sizeof(pool))]));
    const auto p = preprocess(bytes);
    c.expect(preprocess(p) == p, "not idempotent on raw bytes");
    for (unsigned char d = 0xA6; d <= 0xAF; ++d) {
      c.expect(p.find(std::string{'\xE0', '\xA7', static_cast<char>(d)}) == std::string::npos, "digit left in raw bytes");
    }
  }
  return {c.pass(), c.pass() ? std::to_string(swept) + " code points + 1000 random strings + 1000 byte strings"
                             : c.failure()};
}

// 8. Two full pipeline runs produce byte-identical artifacts.
Verdict determinism() {
  TempDir dir("hatefuse-accept8");
  write_split(dir / "train.tsv", hatefuse::testing::separable_split(96, 801), DataFormat::tsv);
  write_split(dir / "dev.tsv", hatefuse::testing::separable_split(40, 802, SplitName::dev), DataFormat::tsv);
  const std::vector<std::string> members = {"toy_a", "toy_b", "toy_c"};
  for (std::size_t k = 0; k < members.size(); ++k) {
    write_text(dir / (members[k] + ".ini"),
               "[data]\ntrain = train.tsv\ndev = dev.tsv\n[task]\nmode = multitask\n[encoder]\nfamily = toy\n"
               "hidden_dim = 128\nhash_seed = " + std::to_string(k) +
                   "\n[training]\nlearning_rate = 0.05\nepochs = 4\nweight_decay = 0.01\nseed = 42\n"
                   "[ensemble]\nmethod = soft\n[output]\nmodel_id = " + members[k] + "\n");
  }
  auto step = [&](const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    if (code != 0) throw std::runtime_error("'" + args[0] + "' exited " + std::to_string(code) + ": " + err.str());
  };
  auto pipeline = [&](const std::filesystem::path& root) {
    const auto cfg0 = (dir / (members[0] + ".ini")).string();
    step({"prepare", "--config", cfg0, "--out", root.string()});
    std::map<std::string, std::vector<std::string>> by_task;
    for (const auto& m : members) {
      const auto cfg = (dir / (m + ".ini")).string();
      const auto out = (root / m).string();
      step({"train", "--config", cfg, "--out", out});
      step({"predict", "--config", cfg, "--out", out, "--split", "dev"});
      for (const char* task : {"type", "severity", "target"}) {
        by_task[task].push_back((root / m / "predictions" / (m + ".dev." + task + ".json")).string());
      }
    }
    std::vector<std::string> fuse_args = {"fuse", "--config", cfg0, "--out", root.string(), "--inputs"};
    for (const auto& [_, files] : by_task) fuse_args.insert(fuse_args.end(), files.begin(), files.end());
    step(fuse_args);
    std::vector<std::string> eval_args = {"evaluate", "--config", cfg0, "--out", root.string(), "--split", "dev",
                                          "--predictions"};
    for (const char* task : {"type", "severity", "target"}) {
      eval_args.push_back((root / "fused" / (std::string("soft.") + task + ".json")).string());
    }
    step(eval_args);
  };
  try {
    pipeline(dir / "run1");
    pipeline(dir / "run2");
  } catch (const std::exception& e) {
    return {false, e.what()};
  }
  std::size_t compared = 0;
  for (const auto& entry : std::filesystem::recursive_directory_iterator(dir / "run1")) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), dir / "run1");
    const auto ext = rel.extension().string();
    const bool artifact = ext == ".json" || ext == ".csv" || ext == ".svg" || ext == ".md" || ext == ".tsv" ||
                          ext == ".bin";
    if (!artifact) continue;
    if (read_text(entry.path()) != read_text(dir / "run2" / rel)) return {false, "differs: " + rel.string()};
    ++compared;
  }
  const bool has_metrics = std::filesystem::exists(dir / "run1" / "eval" / "metrics.json");
  return {has_metrics && compared >= 15,
          std::to_string(compared) + " artifacts byte-identical (predictions, fused matrices, metrics, models)"};
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    std::string name;
    std::function<Verdict()> run;
    double budget_s;  // 0 = no runtime bound
  };
  const std::vector<Criterion> criteria = {
      {1, "fusion algebra", fusion_algebra, 5.0},
      {2, "metric oracle", metric_oracle, 10.0},
      {3, "loss suite", loss_suite, 0.0},
      {4, "multitask overfit", overfit, 60.0},
      {5, "ensemble beats members", ensemble_beats_members, 0.0},
      {6, "label counts via prepare", data_fidelity, 0.0},
      {7, "digit removal", preprocessing, 0.0},
      {8, "pipeline determinism", determinism, 0.0},
  };
  int failures = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (c.budget_s > 0.0 && secs >= c.budget_s) {
      v.pass = false;
      v.detail += "; exceeded " + format_double(c.budget_s) + " s budget";
    }
    failures += !v.pass;
    std::ostringstream t;
    t.precision(3);
    t << std::fixed << secs;
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << c.id << " (" << c.name << "): " << v.detail << "  ["
              << t.str() << " s]" << std::endl;
  }
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures;
}
