#include "hatefuse/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>

#include <CLI11.hpp>

#include "hatefuse/ensemble.hpp"
#include "hatefuse/model.hpp"

namespace hatefuse::cli {

namespace {

DatasetSplit load_configured_split(const RunConfig& config, SplitName split) {
  const auto& path = config.split_path(split);
  auto loaded = load_split(path, LabelSchema::all(), config.format_for(split), split);
  if (loaded.samples.empty()) throw ValidationError("split file '" + path.string() + "' contains no records");
  return loaded;
}

void ensure_dir(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw RuntimeFailure("cannot create directory '" + dir.string() + "': " + ec.message());
}

// Pre-flight check that every sample carries every trained task's label.
void require_labels(const DatasetSplit& split, const std::vector<TaskId>& tasks, std::string_view purpose) {
  for (TaskId t : tasks) {
    for (const auto& s : split.samples) {
      if (!s.gold.contains(t)) {
        throw ValidationError(std::string(purpose) + ": sample '" + s.id + "' in the " +
                              std::string(to_string(split.name)) + " split has no '" + std::string(to_string(t)) +
                              "' label");
      }
    }
  }
}

}  // namespace

PrepareResult cmd_prepare(const RunConfig& config, std::ostream& log) {
  if (config.data.empty()) throw ConfigError("no data splits configured");
  PrepareResult result;
  ensure_dir(config.output_dir);
  result.table_path = config.output_dir / "label_distribution.tsv";
  std::ostringstream table;
  table << "split\ttask\tlabel\tcount\n";
  for (const auto& [split_name, _] : config.data) {
    const auto split = load_configured_split(config, split_name);
    result.sizes[split_name] = split.size();
    log << "== " << to_string(split_name) << ": " << split.size() << " samples\n";
    for (const auto& schema : LabelSchema::all()) {
      if (!split.has_task(schema.task())) continue;
      auto dist = label_distribution(split, schema);
      log << "  [" << to_string(schema.task()) << "]\n";
      for (const auto& [label, count] : dist.counts) {
        log << "    " << std::left << std::setw(18) << label << std::right << std::setw(8) << count << '\n';
        table << to_string(split_name) << '\t' << to_string(schema.task()) << '\t' << label << '\t' << count << '\n';
      }
      log << "    " << std::left << std::setw(18) << "Total" << std::right << std::setw(8) << dist.total() << '\n';
      table << to_string(split_name) << '\t' << to_string(schema.task()) << "\tTotal\t" << dist.total() << '\n';
      result.distributions[split_name].push_back(std::move(dist));
    }
  }
  std::ofstream out(result.table_path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write '" + result.table_path.string() + "'");
  out << "# config_fingerprint = " << config.fingerprint() << '\n' << table.str();
  return result;
}

TrainOutput cmd_train(const RunConfig& config, std::ostream& log) {
  const auto split = load_configured_split(config, SplitName::train);
  require_labels(split, config.tasks(), "training pre-flight");
  ensure_dir(config.output_dir);
  log << "training " << to_string(config.mode) << " model '" << config.model_id << "' on " << split.size()
      << " samples (encoder " << to_string(config.encoder.family) << ")\n";
  auto result = train(split, config.encoder, config.heads(), config.training, config.loss_weights(),
                      ResourceResolver::from_environment(), [&](int epoch, double loss) {
                        log << "  epoch " << epoch << " mean loss " << format_double(loss) << '\n';
                      });
  TrainOutput out;
  out.model_path = config.output_dir / "model.bin";
  out.manifest_path = config.output_dir / "manifest.txt";
  nlohmann::json extra;
  extra["config_fingerprint"] = config.fingerprint();
  extra["model_id"] = config.model_id;
  extra["training"] = config.training.to_json();
  result.model.save(out.model_path, extra);

  RunManifest manifest;
  manifest.settings = config.snapshot();
  manifest.settings.emplace_back("config_fingerprint", config.fingerprint());
  manifest.settings.emplace_back("model_fingerprint", result.model.fingerprint());
  manifest.settings.emplace_back("seed", std::to_string(config.training.seed));
  manifest.settings.emplace_back("train_samples", std::to_string(split.size()));
  std::string presets;
  for (const auto& p : config.presets) presets += (presets.empty() ? "" : ",") + p;
  manifest.settings.emplace_back("presets", presets.empty() ? "none" : presets);
  manifest.step_losses = result.step_losses;
  manifest.epoch_losses = result.epoch_losses;
  manifest.wall_clock_seconds = result.seconds;
  manifest.steps_per_epoch = result.step_losses.size() / static_cast<std::size_t>(config.training.epochs);
  write_manifest(out.manifest_path, manifest);
  out.step_losses = std::move(result.step_losses);
  out.epoch_losses = std::move(result.epoch_losses);
  log << "wrote " << out.model_path.string() << " and " << out.manifest_path.string() << '\n';
  return out;
}

std::vector<std::filesystem::path> cmd_predict(const RunConfig& config, const std::filesystem::path& model_path,
                                               SplitName split_name, std::ostream& log) {
  const auto model = Model::load(model_path);
  const auto expected = config.expected_model_fingerprint();
  if (model.fingerprint() != expected) {
    throw FingerprintError("model '" + model_path.string() + "' has fingerprint " + model.fingerprint() +
                           " but the configuration expects " + expected);
  }
  const auto split = load_configured_split(config, split_name);
  auto matrices = predict_proba(model, split, config.model_id);
  std::vector<std::filesystem::path> files;
  const auto dir = config.output_dir / "predictions";
  ensure_dir(dir);
  for (auto& [task, m] : matrices) {
    m.config_fingerprint = config.fingerprint();
    const auto path = dir / (config.model_id + "." + std::string(to_string(split_name)) + "." +
                             std::string(to_string(task)) + ".json");
    write_prediction_matrix(path, m);
    log << "wrote " << path.string() << " (" << m.rows() << " x " << m.labels.size() << ")\n";
    files.push_back(path);
  }
  return files;
}

std::vector<std::filesystem::path> cmd_fuse(const RunConfig& config, const std::vector<std::filesystem::path>& inputs,
                                            std::ostream& log) {
  if (inputs.size() < 2) throw ValidationError("fuse needs at least two prediction files");
  std::map<TaskId, std::vector<PredictionMatrix>> groups;
  for (const auto& path : inputs) {
    auto m = read_prediction_matrix(path);
    groups[m.task].push_back(std::move(m));
  }
  const std::size_t members = groups.begin()->second.size();
  for (const auto& [task, group] : groups) {
    if (group.size() != members) {
      throw AlignmentError("every task needs the same number of members (task '" + std::string(to_string(task)) +
                           "' has " + std::to_string(group.size()) + ", expected " + std::to_string(members) + ")");
    }
    if (!config.ensemble.members.empty()) {
      if (config.ensemble.members.size() != group.size()) {
        throw AlignmentError("configured ensemble has " + std::to_string(config.ensemble.members.size()) +
                             " members but " + std::to_string(group.size()) + " files were given for task '" +
                             std::string(to_string(task)) + "'");
      }
      for (std::size_t k = 0; k < group.size(); ++k) {
        if (group[k].model_id != config.ensemble.members[k]) {
          throw AlignmentError("member " + std::to_string(k + 1) + " is '" + group[k].model_id + "' but the config lists '" +
                               config.ensemble.members[k] + "'");
        }
      }
    }
  }
  EnsembleSpec spec = config.ensemble;
  spec.members.clear();
  for (const auto& m : groups.begin()->second) spec.members.push_back(m.model_id);
  if (spec.method != FusionMethod::weighted) spec.weights.clear();
  spec.validate();

  const auto dir = config.output_dir / "fused";
  ensure_dir(dir);
  std::vector<std::filesystem::path> files;
  for (const auto& [task, group] : groups) {
    auto fused = fuse(group, spec);
    fused.config_fingerprint = config.fingerprint();
    const auto path = dir / (std::string(to_string(spec.method)) + "." + std::string(to_string(task)) + ".json");
    write_prediction_matrix(path, fused);
    log << "wrote " << path.string() << " [" << fused.model_id << "]\n";
    files.push_back(path);
  }
  return files;
}

EvaluateOutput cmd_evaluate(const RunConfig& config, const std::vector<std::filesystem::path>& predictions,
                            SplitName split_name, bool majority, std::ostream& log) {
  const auto gold = load_configured_split(config, split_name);
  std::map<TaskId, std::vector<std::string>> pred;
  std::map<TaskId, std::string> source;
  if (majority) {
    const auto train_split = load_configured_split(config, SplitName::train);
    for (TaskId t : config.tasks()) {
      pred[t] = majority_baseline(train_split, gold, LabelSchema::for_task(t));
      source[t] = "majority-baseline";
    }
  }
  const auto data_fp = data_fingerprint(gold);
  for (const auto& path : predictions) {
    const auto m = read_prediction_matrix(path);
    if (pred.contains(m.task)) {
      throw ValidationError("more than one prediction source for task '" + std::string(to_string(m.task)) + "'");
    }
    if (m.labels != LabelSchema::for_task(m.task).labels()) {
      throw AlignmentError(path.string() + ": label order differs from the '" + std::string(to_string(m.task)) +
                           "' schema");
    }
    if (m.sample_ids.size() != gold.size()) {
      throw AlignmentError(path.string() + ": " + std::to_string(m.sample_ids.size()) + " rows but the " +
                           std::string(to_string(split_name)) + " split has " + std::to_string(gold.size()) + " samples");
    }
    for (std::size_t i = 0; i < gold.size(); ++i) {
      if (m.sample_ids[i] != gold.samples[i].id) {
        throw AlignmentError(path.string() + ": first mismatched sample id '" + m.sample_ids[i] + "' at row " +
                             std::to_string(i) + " (expected '" + gold.samples[i].id + "')");
      }
    }
    if (!m.data_fingerprint.empty() && m.data_fingerprint != data_fp) {
      throw FingerprintError(path.string() + ": data fingerprint " + m.data_fingerprint + " does not match the " +
                             std::string(to_string(split_name)) + " split (" + data_fp + ")");
    }
    pred[m.task] = argmax_labels(m);
    source[m.task] = m.model_id;
  }
  if (pred.empty()) throw ValidationError("evaluate needs prediction files or --majority-baseline");
  std::vector<TaskId> tasks;
  for (const auto& [t, _] : pred) tasks.push_back(t);
  require_labels(gold, tasks, "evaluation");

  const auto schemas = LabelSchema::all();
  std::optional<std::map<TaskId, double>> weights;
  if (!config.metrics.task_weights.empty()) weights = config.metrics.task_weights;
  EvaluateOutput out;
  out.metrics = evaluate(gold, pred, schemas, weights);
  out.metrics.prediction_source = source;
  out.metrics.config_fingerprint = config.fingerprint();

  const auto dir = config.output_dir / "eval";
  ensure_dir(dir);
  out.metrics_path = dir / "metrics.json";
  {
    std::ofstream f(out.metrics_path, std::ios::binary);
    if (!f) throw RuntimeFailure("cannot write '" + out.metrics_path.string() + "'");
    f << out.metrics.to_json().dump(2) << '\n';
  }
  for (const auto& [task, cm] : out.metrics.confusion) {
    const auto base = dir / ("confusion_" + std::string(to_string(task)));
    write_confusion_csv(base.string() + ".csv", cm);
    write_confusion_svg(base.string() + ".svg", cm, "Confusion matrix: " + std::string(to_string(task)));
    out.confusion_files.emplace_back(base.string() + ".csv");
    out.confusion_files.emplace_back(base.string() + ".svg");
  }
  const auto report = error_report(gold, pred, config.metrics.error_examples, schemas, config.metrics.recall_threshold);
  out.report_path = dir / "error_report.md";
  {
    std::ofstream f(out.report_path, std::ios::binary);
    if (!f) throw RuntimeFailure("cannot write '" + out.report_path.string() + "'");
    f << report.to_markdown();
  }
  for (const auto& [task, f1] : out.metrics.per_task_micro_f1) {
    log << to_string(task) << " micro-F1 = " << format_double(f1) << "  [" << source[task] << "]\n";
  }
  if (out.metrics.weighted_micro_f1) {
    log << "weighted micro-F1 = " << format_double(*out.metrics.weighted_micro_f1) << " (weights";
    for (const auto& [t, w] : out.metrics.task_weights) log << ' ' << to_string(t) << ':' << format_double(w);
    log << ")\n";
  }
  log << "wrote " << out.metrics_path.string() << '\n';
  return out;
}

namespace {

struct CommonOptions {
  std::string config;
  std::string format;
  std::optional<long long> seed;
  std::string out;
  std::vector<std::string> presets;
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "run configuration file")->required();
  cmd->add_option("--format", o.format, "data file format: tsv or jsonl (default: by extension)");
  cmd->add_option("--seed", o.seed, "override training.seed");
  cmd->add_option("--out", o.out, "override output.dir");
  cmd->add_option("--preset", o.presets, "named preset applied before the config file (repeatable)");
}

RunConfig resolve(const CommonOptions& o) {
  RunConfig config = load_run_config(o.config, o.presets);
  if (!o.format.empty()) config.set("data.format", o.format);
  if (o.seed) {
    if (*o.seed < 0) throw ConfigError("--seed must be nonnegative");
    config.training.seed = static_cast<std::uint64_t>(*o.seed);
  }
  if (!o.out.empty()) config.output_dir = o.out;
  config.validate();
  return config;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"hatefuse: multitask text classification with ensemble fusion"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  CommonOptions prepare_o, train_o, predict_o, fuse_o, eval_o;
  auto* prepare = app.add_subcommand("prepare", "validate data and write label distributions");
  add_common(prepare, prepare_o);

  auto* train_cmd = app.add_subcommand("train", "train a model and write model.bin + manifest.txt");
  add_common(train_cmd, train_o);

  std::string model_path, predict_split = "dev";
  auto* predict = app.add_subcommand("predict", "write one prediction matrix per task head");
  add_common(predict, predict_o);
  predict->add_option("--model", model_path, "model file (default: <out>/model.bin)");
  predict->add_option("--split", predict_split, "split to predict: train, dev or test");

  std::vector<std::string> fuse_inputs;
  std::string fuse_method, fuse_weights, fuse_tie;
  auto* fuse_cmd = app.add_subcommand("fuse", "fuse aligned prediction matrices");
  add_common(fuse_cmd, fuse_o);
  fuse_cmd->add_option("--inputs", fuse_inputs, "prediction files, in member order")->required();
  fuse_cmd->add_option("--method", fuse_method, "soft, hard or weighted (overrides ensemble.method)");
  fuse_cmd->add_option("--weights", fuse_weights, "comma-separated member weights (overrides ensemble.weights)");
  fuse_cmd->add_option("--tie-break", fuse_tie, "soft_fallback or lowest_index");

  std::vector<std::string> eval_inputs;
  std::string eval_split = "dev";
  bool majority = false;
  auto* eval_cmd = app.add_subcommand("evaluate", "score predictions against gold labels");
  add_common(eval_cmd, eval_o);
  eval_cmd->add_option("--predictions", eval_inputs, "prediction files (one per task)");
  eval_cmd->add_option("--split", eval_split, "gold split: train, dev or test");
  eval_cmd->add_flag("--majority-baseline", majority, "score the majority-class baseline");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (prepare->parsed()) {
      cmd_prepare(resolve(prepare_o), out);
    } else if (train_cmd->parsed()) {
      cmd_train(resolve(train_o), out);
    } else if (predict->parsed()) {
      const auto config = resolve(predict_o);
      const auto path = model_path.empty() ? config.output_dir / "model.bin" : std::filesystem::path(model_path);
      cmd_predict(config, path, parse_split_name(predict_split), out);
    } else if (fuse_cmd->parsed()) {
      auto config = resolve(fuse_o);
      if (!fuse_method.empty()) config.set("ensemble.method", fuse_method);
      if (!fuse_weights.empty()) config.set("ensemble.weights", fuse_weights);
      if (!fuse_tie.empty()) config.set("ensemble.tie_break", fuse_tie);
      config.validate();
      std::vector<std::filesystem::path> inputs(fuse_inputs.begin(), fuse_inputs.end());
      cmd_fuse(config, inputs, out);
    } else if (eval_cmd->parsed()) {
      const auto config = resolve(eval_o);
      std::vector<std::filesystem::path> inputs(eval_inputs.begin(), eval_inputs.end());
      cmd_evaluate(config, inputs, parse_split_name(eval_split), majority, out);
    }
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const RuntimeFailure& e) {
    err << "runtime failure: " << e.what() << '\n';
    return kExitRuntime;
  } catch (const std::exception& e) {
    err << "runtime failure: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace hatefuse::cli
