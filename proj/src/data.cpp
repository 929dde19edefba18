#include "hatefuse/data.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

namespace hatefuse {

LabelSchema::LabelSchema(TaskId task, std::vector<std::string> labels)
    : task_(task), labels_(std::move(labels)) {
  if (labels_.empty()) throw ConfigError("label schema for '" + std::string(to_string(task)) + "' is empty");
  std::set<std::string> seen;
  for (const auto& l : labels_) {
    if (!seen.insert(l).second) throw ConfigError("duplicate label '" + l + "' in schema");
  }
}

LabelSchema LabelSchema::hate_type() {
  return {TaskId::type, {"None", "Abusive", "Political Hate", "Profane", "Religious Hate", "Sexism"}};
}

LabelSchema LabelSchema::severity() { return {TaskId::severity, {"Little to None", "Mild", "Severe"}}; }

// Five labels: the None class is kept even though the multitask head is
// sometimes described as four-way.
LabelSchema LabelSchema::target() {
  return {TaskId::target, {"None", "Individual", "Organization", "Community", "Society"}};
}

LabelSchema LabelSchema::for_task(TaskId task) {
  switch (task) {
    case TaskId::type:
      return hate_type();
    case TaskId::severity:
      return severity();
    case TaskId::target:
      return target();
  }
  throw ConfigError("unknown task");
}

std::vector<LabelSchema> LabelSchema::all() { return {hate_type(), severity(), target()}; }

std::optional<std::size_t> LabelSchema::index_of(std::string_view label) const {
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (labels_[i] == label) return i;
  }
  return std::nullopt;
}

std::size_t LabelSchema::index_or_throw(std::string_view label) const {
  if (auto i = index_of(label)) return *i;
  throw ValidationError("unknown label '" + std::string(label) + "' for task '" + std::string(to_string(task_)) +
                        "'");
}

std::string_view to_string(SplitName name) {
  switch (name) {
    case SplitName::train:
      return "train";
    case SplitName::dev:
      return "dev";
    case SplitName::test:
      return "test";
  }
  return "?";
}

SplitName parse_split_name(std::string_view name) {
  if (name == "train") return SplitName::train;
  if (name == "dev") return SplitName::dev;
  if (name == "test") return SplitName::test;
  throw ConfigError("unknown split '" + std::string(name) + "' (expected train, dev or test)");
}

bool DatasetSplit::has_task(TaskId task) const {
  for (const auto& s : samples) {
    if (s.gold.contains(task)) return true;
  }
  return false;
}

DataFormat parse_format(std::string_view name) {
  if (name == "tsv") return DataFormat::tsv;
  if (name == "jsonl") return DataFormat::jsonl;
  throw ConfigError("unknown data format '" + std::string(name) + "' (expected tsv or jsonl)");
}

std::string_view to_string(DataFormat format) { return format == DataFormat::tsv ? "tsv" : "jsonl"; }

DataFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  return (ext == ".jsonl" || ext == ".json") ? DataFormat::jsonl : DataFormat::tsv;
}

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find('\t', start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string tsv_escape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\':
        out += "\\\\";
        break;
      case '\t':
        out += "\\t";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\r':
        out += "\\r";
        break;
      default:
        out.push_back(c);
    }
  }
  return out;
}

std::string tsv_unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      const char n = s[i + 1];
      if (n == '\\' || n == 't' || n == 'n' || n == 'r') {
        out.push_back(n == '\\' ? '\\' : n == 't' ? '\t' : n == 'n' ? '\n' : '\r');
        ++i;
        continue;
      }
    }
    out.push_back(s[i]);
  }
  return out;
}

std::string where(const std::filesystem::path& path, std::size_t line_no) {
  return path.string() + ":" + std::to_string(line_no) + ": ";
}

const LabelSchema* find_schema(const std::vector<LabelSchema>& schemas, TaskId task) {
  for (const auto& s : schemas) {
    if (s.task() == task) return &s;
  }
  return nullptr;
}

void check_label(const std::vector<LabelSchema>& schemas, TaskId task, const std::string& label,
                 const std::filesystem::path& path, std::size_t line_no) {
  const auto* schema = find_schema(schemas, task);
  if (schema == nullptr) {
    throw ValidationError(where(path, line_no) + "no schema selected for task '" + std::string(to_string(task)) + "'");
  }
  if (!schema->index_of(label)) {
    throw ValidationError(where(path, line_no) + "unknown label '" + label + "' for task '" +
                          std::string(to_string(task)) + "'");
  }
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

DatasetSplit load_tsv(std::istream& in, const std::filesystem::path& path, const std::vector<LabelSchema>& schemas,
                      SplitName name) {
  std::string line;
  std::size_t line_no = 0;
  // Skip leading blank lines; the first non-blank line is the header.
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (!line.empty()) break;
  }
  if (line.empty()) throw ValidationError(path.string() + ": empty file (header row required)");

  const auto header = split_tabs(line);
  std::optional<std::size_t> id_col, text_col;
  std::vector<std::pair<std::size_t, TaskId>> task_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "id") {
      id_col = c;
    } else if (header[c] == "text") {
      text_col = c;
    } else if (auto t = parse_task(header[c])) {
      for (const auto& [_, seen] : task_cols) {
        if (seen == *t) throw ValidationError(where(path, line_no) + "duplicate column for task '" + header[c] + "'");
      }
      task_cols.emplace_back(c, *t);
    }
  }
  if (!id_col || !text_col) throw ValidationError(where(path, line_no) + "header must contain 'id' and 'text' columns");

  DatasetSplit split{name, {}};
  std::set<std::string> ids;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != header.size()) {
      throw ValidationError(where(path, line_no) + "malformed record: expected " + std::to_string(header.size()) +
                            " tab-separated fields, found " + std::to_string(fields.size()));
    }
    Sample s;
    s.id = fields[*id_col];
    s.text = tsv_unescape(fields[*text_col]);
    if (s.id.empty()) throw ValidationError(where(path, line_no) + "malformed record: empty id");
    for (const auto& [col, task] : task_cols) {
      if (fields[col].empty()) continue;
      check_label(schemas, task, fields[col], path, line_no);
      s.gold.emplace(task, fields[col]);
    }
    if (!ids.insert(s.id).second) throw ValidationError(where(path, line_no) + "duplicate id '" + s.id + "'");
    split.samples.push_back(std::move(s));
  }
  return split;
}

DatasetSplit load_jsonl(std::istream& in, const std::filesystem::path& path, const std::vector<LabelSchema>& schemas,
                        SplitName name) {
  DatasetSplit split{name, {}};
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    strip_cr(line);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(where(path, line_no) + "malformed record: " + e.what());
    }
    if (!record.is_object() || !record.contains("id") || !record.contains("text") || !record["text"].is_string()) {
      throw ValidationError(where(path, line_no) + "malformed record: expected object with 'id' and string 'text'");
    }
    Sample s;
    const auto& id = record["id"];
    if (id.is_string()) {
      s.id = id.get<std::string>();
    } else if (id.is_number_integer()) {
      s.id = std::to_string(id.get<long long>());
    } else {
      throw ValidationError(where(path, line_no) + "malformed record: 'id' must be a string or integer");
    }
    s.text = record["text"].get<std::string>();
    if (record.contains("labels") && !record["labels"].is_null()) {
      const auto& labels = record["labels"];
      if (!labels.is_object()) throw ValidationError(where(path, line_no) + "malformed record: 'labels' must be an object");
      for (const auto& [key, value] : labels.items()) {
        const auto task = parse_task(key);
        if (!task) throw ValidationError(where(path, line_no) + "unknown task '" + key + "' in labels");
        if (value.is_null()) continue;
        if (!value.is_string()) throw ValidationError(where(path, line_no) + "label for '" + key + "' must be a string");
        const auto label = value.get<std::string>();
        check_label(schemas, *task, label, path, line_no);
        s.gold.emplace(*task, label);
      }
    }
    if (s.id.empty()) throw ValidationError(where(path, line_no) + "malformed record: empty id");
    if (!ids.insert(s.id).second) throw ValidationError(where(path, line_no) + "duplicate id '" + s.id + "'");
    split.samples.push_back(std::move(s));
  }
  return split;
}

}  // namespace

DatasetSplit load_split(const std::filesystem::path& path, const std::vector<LabelSchema>& schemas, DataFormat format,
                        SplitName name) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open data file '" + path.string() + "'");
  return format == DataFormat::tsv ? load_tsv(in, path, schemas, name) : load_jsonl(in, path, schemas, name);
}

void write_split(const std::filesystem::path& path, const DatasetSplit& split, DataFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write '" + path.string() + "'");
  std::vector<TaskId> tasks;
  for (TaskId t : kAllTasks) {
    if (split.has_task(t)) tasks.push_back(t);
  }
  if (format == DataFormat::tsv) {
    out << "id\ttext";
    for (TaskId t : tasks) out << '\t' << to_string(t);
    out << '\n';
    for (const auto& s : split.samples) {
      out << s.id << '\t' << tsv_escape(s.text);
      for (TaskId t : tasks) {
        out << '\t';
        if (auto it = s.gold.find(t); it != s.gold.end()) out << it->second;
      }
      out << '\n';
    }
  } else {
    for (const auto& s : split.samples) {
      nlohmann::ordered_json record;
      record["id"] = s.id;
      record["text"] = s.text;
      nlohmann::ordered_json labels = nlohmann::ordered_json::object();
      for (const auto& [task, label] : s.gold) labels[std::string(to_string(task))] = label;
      record["labels"] = labels;
      out << record.dump() << '\n';
    }
  }
  if (!out) throw RuntimeFailure("write failed for '" + path.string() + "'");
}

std::string preprocess(std::string_view text) {
  // U+09E6..U+09EF encode as E0 A7 A6..AF. Checking the tail after every
  // appended byte also removes sequences that only form once an inner digit
  // is dropped, which makes the function idempotent on arbitrary bytes.
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    out.push_back(c);
    const std::size_t n = out.size();
    if (n >= 3 && static_cast<unsigned char>(out[n - 3]) == 0xe0 && static_cast<unsigned char>(out[n - 2]) == 0xa7) {
      const auto last = static_cast<unsigned char>(out[n - 1]);
      if (last >= 0xa6 && last <= 0xaf) out.resize(n - 3);
    }
  }
  return out;
}

DatasetSplit preprocess(DatasetSplit split) {
  for (auto& s : split.samples) s.text = preprocess(s.text);
  return split;
}

std::size_t LabelDistribution::total() const {
  std::size_t n = 0;
  for (const auto& [_, c] : counts) n += c;
  return n;
}

std::size_t LabelDistribution::count(std::string_view label) const {
  for (const auto& [l, c] : counts) {
    if (l == label) return c;
  }
  return 0;
}

LabelDistribution label_distribution(const DatasetSplit& split, const LabelSchema& schema) {
  LabelDistribution dist{schema.task(), {}};
  for (const auto& l : schema.labels()) dist.counts.emplace_back(l, 0);
  bool any = false;
  for (const auto& s : split.samples) {
    auto it = s.gold.find(schema.task());
    if (it == s.gold.end()) continue;
    any = true;
    dist.counts[schema.index_or_throw(it->second)].second += 1;
  }
  if (!any) {
    throw ValidationError("no sample in the " + std::string(to_string(split.name)) + " split carries a '" +
                          std::string(to_string(schema.task())) + "' label");
  }
  return dist;
}

std::string data_fingerprint(const DatasetSplit& split) {
  Fnv1a h;
  h.update("hatefuse-data-v1");
  for (const auto& s : split.samples) {
    h.update_u64(s.id.size()).update(s.id);
    h.update_u64(s.text.size()).update(s.text);
  }
  return h.hex();
}

}  // namespace hatefuse
