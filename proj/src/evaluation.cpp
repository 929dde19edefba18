#include "hatefuse/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace hatefuse {

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) {
    for (auto c : row) n += c;
  }
  return n;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) n += counts[i][i];
  return n;
}

std::vector<std::size_t> ConfusionMatrix::row_sums() const {
  std::vector<std::size_t> out(counts.size(), 0);
  for (std::size_t i = 0; i < counts.size(); ++i) {
    for (auto c : counts[i]) out[i] += c;
  }
  return out;
}

std::vector<std::size_t> ConfusionMatrix::col_sums() const {
  std::vector<std::size_t> out(counts.size(), 0);
  for (const auto& row : counts) {
    for (std::size_t j = 0; j < row.size(); ++j) out[j] += row[j];
  }
  return out;
}

ConfusionMatrix confusion_matrix(std::span<const std::string> pred, std::span<const std::string> gold,
                                 const LabelSchema& schema) {
  if (pred.size() != gold.size()) {
    throw ValidationError("prediction count (" + std::to_string(pred.size()) + ") differs from gold count (" +
                          std::to_string(gold.size()) + ")");
  }
  ConfusionMatrix cm{schema.labels(), std::vector<std::vector<std::size_t>>(
                                          schema.size(), std::vector<std::size_t>(schema.size(), 0))};
  for (std::size_t i = 0; i < pred.size(); ++i) {
    cm.counts[schema.index_or_throw(gold[i])][schema.index_or_throw(pred[i])] += 1;
  }
  return cm;
}

double micro_f1(const ConfusionMatrix& cm) {
  std::size_t tp = 0, fp = 0, fn = 0;
  const auto rows = cm.row_sums();
  const auto cols = cm.col_sums();
  for (std::size_t c = 0; c < cm.counts.size(); ++c) {
    tp += cm.counts[c][c];
    fp += cols[c] - cm.counts[c][c];
    fn += rows[c] - cm.counts[c][c];
  }
  const std::size_t denom = 2 * tp + fp + fn;
  if (denom == 0) throw ValidationError("micro-F1 is undefined on an empty prediction set");
  return static_cast<double>(2 * tp) / static_cast<double>(denom);
}

double micro_f1(std::span<const std::string> pred, std::span<const std::string> gold, const LabelSchema& schema) {
  return micro_f1(confusion_matrix(pred, gold, schema));
}

double weighted_micro_f1(const std::map<TaskId, double>& per_task, const std::map<TaskId, double>& task_weights) {
  if (per_task.empty()) throw ValidationError("weighted micro-F1 needs at least one task score");
  if (per_task.size() != task_weights.size()) throw ValidationError("task weights must cover exactly the scored tasks");
  double sum_w = 0.0;
  double total = 0.0;
  for (const auto& [task, score] : per_task) {
    auto it = task_weights.find(task);
    if (it == task_weights.end()) {
      throw ValidationError("no weight given for task '" + std::string(to_string(task)) + "'");
    }
    if (!std::isfinite(it->second) || it->second < 0.0) throw ValidationError("task weights must be nonnegative");
    sum_w += it->second;
    total += it->second * score;
  }
  if (std::abs(sum_w - 1.0) > 1e-6) throw ValidationError("task weights must sum to 1 (sum " + format_double(sum_w) + ")");
  return total;
}

std::map<TaskId, double> equal_task_weights(std::span<const TaskId> tasks) {
  std::map<TaskId, double> w;
  for (TaskId t : tasks) w[t] = 1.0 / static_cast<double>(tasks.size());
  return w;
}

std::vector<std::pair<std::string, std::optional<double>>> per_class_recall(const ConfusionMatrix& cm) {
  std::vector<std::pair<std::string, std::optional<double>>> out;
  const auto rows = cm.row_sums();
  for (std::size_t c = 0; c < cm.labels.size(); ++c) {
    if (rows[c] == 0) {
      out.emplace_back(cm.labels[c], std::nullopt);
    } else {
      out.emplace_back(cm.labels[c], static_cast<double>(cm.counts[c][c]) / static_cast<double>(rows[c]));
    }
  }
  return out;
}

namespace {

const LabelSchema& schema_for(const std::vector<LabelSchema>& schemas, TaskId task) {
  for (const auto& s : schemas) {
    if (s.task() == task) return s;
  }
  throw ConfigError("no schema for task '" + std::string(to_string(task)) + "'");
}

std::vector<std::string> gold_labels(const DatasetSplit& split, TaskId task) {
  std::vector<std::string> gold;
  gold.reserve(split.size());
  for (const auto& s : split.samples) {
    auto it = s.gold.find(task);
    if (it == s.gold.end()) {
      throw ValidationError("sample '" + s.id + "' has no gold '" + std::string(to_string(task)) + "' label");
    }
    gold.push_back(it->second);
  }
  return gold;
}

nlohmann::ordered_json recall_json(const std::vector<std::pair<std::string, std::optional<double>>>& recall) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto& [label, r] : recall) j[label] = r ? nlohmann::ordered_json(*r) : nlohmann::ordered_json(nullptr);
  return j;
}

}  // namespace

nlohmann::ordered_json MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["format"] = "hatefuse.metrics/v1";
  j["data_fingerprint"] = data_fingerprint;
  j["config_fingerprint"] = config_fingerprint;
  j["n_samples"] = n_samples;
  nlohmann::ordered_json f1 = nlohmann::ordered_json::object();
  for (const auto& [t, v] : per_task_micro_f1) f1[std::string(to_string(t))] = v;
  j["per_task_micro_f1"] = f1;
  if (weighted_micro_f1) {
    j["weighted_micro_f1"] = *weighted_micro_f1;
    nlohmann::ordered_json w = nlohmann::ordered_json::object();
    for (const auto& [t, v] : task_weights) w[std::string(to_string(t))] = v;
    j["task_weights"] = w;
    j["task_weights_note"] =
        "weighted micro-F1 is a convex combination of per-task micro-F1; the official weighting is unpublished, "
        "equal weights are the default";
  }
  nlohmann::ordered_json conf = nlohmann::ordered_json::object();
  for (const auto& [t, cm] : confusion) {
    conf[std::string(to_string(t))] = {{"labels", cm.labels}, {"counts", cm.counts}};
  }
  j["confusion"] = conf;
  nlohmann::ordered_json rec = nlohmann::ordered_json::object();
  for (const auto& [t, r] : per_class_recall) rec[std::string(to_string(t))] = recall_json(r);
  j["per_class_recall"] = rec;
  if (!prediction_source.empty()) {
    nlohmann::ordered_json src = nlohmann::ordered_json::object();
    for (const auto& [t, s] : prediction_source) src[std::string(to_string(t))] = s;
    j["prediction_source"] = src;
  }
  return j;
}

MetricsReport evaluate(const DatasetSplit& gold, const std::map<TaskId, std::vector<std::string>>& pred,
                       const std::vector<LabelSchema>& schemas,
                       const std::optional<std::map<TaskId, double>>& task_weights) {
  if (pred.empty()) throw ValidationError("nothing to evaluate");
  MetricsReport report;
  report.n_samples = gold.size();
  report.data_fingerprint = data_fingerprint(gold);
  std::vector<TaskId> tasks;
  for (const auto& [task, labels] : pred) {
    const auto& schema = schema_for(schemas, task);
    const auto g = gold_labels(gold, task);
    auto cm = confusion_matrix(labels, g, schema);
    report.per_task_micro_f1[task] = micro_f1(cm);
    report.per_class_recall[task] = per_class_recall(cm);
    report.confusion.emplace(task, std::move(cm));
    tasks.push_back(task);
  }
  if (tasks.size() == std::size(kAllTasks)) {
    report.task_weights = task_weights ? *task_weights : equal_task_weights(tasks);
    report.weighted_micro_f1 = weighted_micro_f1(report.per_task_micro_f1, report.task_weights);
  }
  return report;
}

ErrorReport error_report(const DatasetSplit& split, const std::map<TaskId, std::vector<std::string>>& pred,
                         std::size_t k, const std::vector<LabelSchema>& schemas, double recall_threshold) {
  ErrorReport report;
  report.recall_threshold = recall_threshold;
  for (const auto& [task, labels] : pred) {
    const auto g = gold_labels(split, task);
    const auto cm = confusion_matrix(labels, g, schema_for(schemas, task));
    TaskErrors te{task, 0, {}, per_class_recall(cm), {}};
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == g[i]) continue;
      ++te.total_errors;
      if (te.examples.size() < k) te.examples.push_back({split.samples[i].id, split.samples[i].text, g[i], labels[i]});
    }
    for (const auto& [label, r] : te.recall) {
      if (r && *r < recall_threshold) te.low_recall.push_back(label);
    }
    report.tasks.push_back(std::move(te));
  }
  return report;
}

namespace {

std::string md_cell(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '|') {
      out += "\\|";
    } else if (c == '\n' || c == '\r' || c == '\t') {
      out += ' ';
    } else {
      out.push_back(c);
    }
  }
  return out;
}

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(digits);
  os << v;
  return os.str();
}

}  // namespace

std::string ErrorReport::to_markdown() const {
  std::ostringstream out;
  out << "# Error analysis\n";
  for (const auto& t : tasks) {
    out << "\n## Task: " << to_string(t.task) << "\n\n";
    out << "Misclassified samples: " << t.total_errors << " (showing " << t.examples.size() << ")\n\n";
    if (!t.examples.empty()) {
      out << "| id | text | gold | predicted |\n|---|---|---|---|\n";
      for (const auto& e : t.examples) {
        out << "| " << md_cell(e.id) << " | " << md_cell(e.text) << " | " << md_cell(e.gold) << " | "
            << md_cell(e.predicted) << " |\n";
      }
      out << '\n';
    }
    out << "### Per-class recall\n\n| label | recall | flag |\n|---|---|---|\n";
    for (const auto& [label, r] : t.recall) {
      const bool low = r && *r < recall_threshold;
      out << "| " << md_cell(label) << " | " << (r ? fixed(*r, 4) : std::string("n/a")) << " | "
          << (low ? "LOW" : "") << " |\n";
    }
    out << "\nMinority-class check (recall < " << fixed(recall_threshold, 2) << "): ";
    if (t.low_recall.empty()) {
      out << "none\n";
    } else {
      for (std::size_t i = 0; i < t.low_recall.size(); ++i) out << (i ? ", " : "") << t.low_recall[i];
      out << '\n';
    }
  }
  return out.str();
}

std::string majority_label(const DatasetSplit& train, const LabelSchema& schema) {
  const auto dist = label_distribution(train, schema);
  std::size_t best = 0;
  for (std::size_t i = 1; i < dist.counts.size(); ++i) {
    if (dist.counts[i].second > dist.counts[best].second) best = i;
  }
  return dist.counts[best].first;
}

std::vector<std::string> majority_baseline(const DatasetSplit& train, const DatasetSplit& eval,
                                           const LabelSchema& schema) {
  return std::vector<std::string>(eval.size(), majority_label(train, schema));
}

void write_confusion_csv(const std::filesystem::path& path, const ConfusionMatrix& cm) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write '" + path.string() + "'");
  auto quote = [](const std::string& s) {
    std::string q = "\"";
    for (char c : s) q += (c == '"') ? std::string("\"\"") : std::string(1, c);
    return q + "\"";
  };
  out << "gold\\predicted";
  for (const auto& l : cm.labels) out << ',' << quote(l);
  out << '\n';
  for (std::size_t i = 0; i < cm.labels.size(); ++i) {
    out << quote(cm.labels[i]);
    for (auto c : cm.counts[i]) out << ',' << c;
    out << '\n';
  }
}

void write_confusion_svg(const std::filesystem::path& path, const ConfusionMatrix& cm, const std::string& title) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write '" + path.string() + "'");
  auto esc = [](const std::string& s) {
    std::string o;
    for (char c : s) {
      switch (c) {
        case '&':
          o += "&amp;";
          break;
        case '<':
          o += "&lt;";
          break;
        case '>':
          o += "&gt;";
          break;
        case '"':
          o += "&quot;";
          break;
        default:
          o.push_back(c);
      }
    }
    return o;
  };
  const int n = static_cast<int>(cm.labels.size());
  const int cell = 70, left = 140, top = 60;
  const int width = left + n * cell + 20;
  const int height = top + n * cell + 110;
  const auto rows = cm.row_sums();
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  out << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" << esc(title)
      << "</text>\n";
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const auto c = cm.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
      const double frac = rows[static_cast<std::size_t>(i)] ? static_cast<double>(c) / static_cast<double>(rows[static_cast<std::size_t>(i)]) : 0.0;
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - frac)));
      const int x = left + j * cell, y = top + i * cell;
      out << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << cell << "\" height=\"" << cell << "\" fill=\"rgb("
          << shade << "," << shade << ",255)\" stroke=\"#888\"/>\n";
      out << "<text x=\"" << x + cell / 2 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"middle\" fill=\""
          << (frac > 0.5 ? "white" : "black") << "\">" << c << "</text>\n";
    }
    out << "<text x=\"" << left - 6 << "\" y=\"" << top + i * cell + cell / 2 + 4 << "\" text-anchor=\"end\">"
        << esc(cm.labels[static_cast<std::size_t>(i)]) << "</text>\n";
    out << "<text transform=\"translate(" << left + i * cell + cell / 2 << "," << top + n * cell + 10
        << ") rotate(45)\">" << esc(cm.labels[static_cast<std::size_t>(i)]) << "</text>\n";
  }
  out << "<text x=\"20\" y=\"" << top + n * cell / 2 << "\" transform=\"rotate(-90 20," << top + n * cell / 2
      << ")\" text-anchor=\"middle\">gold</text>\n";
  out << "<text x=\"" << left + n * cell / 2 << "\" y=\"" << height - 8 << "\" text-anchor=\"middle\">predicted</text>\n";
  out << "</svg>\n";
}

}  // namespace hatefuse
