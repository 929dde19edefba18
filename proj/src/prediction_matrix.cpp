#include "hatefuse/prediction_matrix.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace hatefuse {

void PredictionMatrix::validate(double tolerance) const {
  const std::string who = "prediction matrix '" + model_id + "': ";
  if (labels.empty()) throw ValidationError(who + "no labels");
  if (probs.rows() != static_cast<Eigen::Index>(sample_ids.size())) {
    throw ValidationError(who + "row count differs from sample id count");
  }
  if (probs.cols() != static_cast<Eigen::Index>(labels.size())) {
    throw ValidationError(who + "column count differs from label count");
  }
  std::set<std::string> seen;
  for (const auto& id : sample_ids) {
    if (!seen.insert(id).second) throw ValidationError(who + "duplicate sample id '" + id + "'");
  }
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    double sum = 0.0;
    for (Eigen::Index j = 0; j < probs.cols(); ++j) {
      const double p = probs(i, j);
      if (!std::isfinite(p) || p < -tolerance || p > 1.0 + tolerance) {
        throw ValidationError(who + "row for sample '" + sample_ids[static_cast<std::size_t>(i)] +
                              "' has an entry outside [0, 1]");
      }
      sum += p;
    }
    if (std::abs(sum - 1.0) > tolerance) {
      throw ValidationError(who + "row for sample '" + sample_ids[static_cast<std::size_t>(i)] +
                            "' does not sum to 1 (sum " + format_double(sum) + ")");
    }
  }
}

void write_prediction_matrix(const std::filesystem::path& path, const PredictionMatrix& m) {
  m.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeFailure("cannot write '" + path.string() + "'");
  using J = nlohmann::json;
  out << "{\n";
  out << "  \"format\": " << J(kPredictionFormat).dump() << ",\n";
  out << "  \"model_id\": " << J(m.model_id).dump() << ",\n";
  out << "  \"task_id\": " << J(std::string(to_string(m.task))).dump() << ",\n";
  out << "  \"data_fingerprint\": " << J(m.data_fingerprint).dump() << ",\n";
  out << "  \"model_fingerprint\": " << J(m.model_fingerprint).dump() << ",\n";
  out << "  \"config_fingerprint\": " << J(m.config_fingerprint).dump() << ",\n";
  if (!m.fusion.is_null()) out << "  \"fusion\": " << m.fusion.dump() << ",\n";
  out << "  \"labels\": " << J(m.labels).dump() << ",\n";
  out << "  \"sample_ids\": " << J(m.sample_ids).dump() << ",\n";
  out << "  \"probs\": [";
  for (Eigen::Index i = 0; i < m.probs.rows(); ++i) {
    out << (i == 0 ? "\n    [" : ",\n    [");
    for (Eigen::Index j = 0; j < m.probs.cols(); ++j) {
      if (j > 0) out << ", ";
      out << format_double(m.probs(i, j));
    }
    out << "]";
  }
  out << (m.probs.rows() > 0 ? "\n  ]\n" : "]\n");
  out << "}\n";
  if (!out) throw RuntimeFailure("write failed for '" + path.string() + "'");
}

PredictionMatrix read_prediction_matrix(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open prediction file '" + path.string() + "'");
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  PredictionMatrix m;
  try {
    if (j.at("format").get<std::string>() != kPredictionFormat) {
      throw ValidationError(path.string() + ": unsupported format '" + j["format"].get<std::string>() + "'");
    }
    m.model_id = j.at("model_id").get<std::string>();
    m.task = parse_task_or_throw(j.at("task_id").get<std::string>());
    m.labels = j.at("labels").get<std::vector<std::string>>();
    m.sample_ids = j.at("sample_ids").get<std::vector<std::string>>();
    m.data_fingerprint = j.value("data_fingerprint", "");
    m.model_fingerprint = j.value("model_fingerprint", "");
    m.config_fingerprint = j.value("config_fingerprint", "");
    if (j.contains("fusion")) m.fusion = j["fusion"];
    const auto& rows = j.at("probs");
    m.probs.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(m.labels.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i].size() != m.labels.size()) {
        throw ValidationError(path.string() + ": probability row " + std::to_string(i) + " has the wrong width");
      }
      for (std::size_t k = 0; k < m.labels.size(); ++k) {
        m.probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k].get<double>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  try {
    m.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return m;
}

}  // namespace hatefuse
