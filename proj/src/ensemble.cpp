#include "hatefuse/ensemble.hpp"

#include <algorithm>
#include <cmath>

namespace hatefuse {

std::string_view to_string(FusionMethod m) {
  switch (m) {
    case FusionMethod::soft:
      return "soft";
    case FusionMethod::hard:
      return "hard";
    case FusionMethod::weighted:
      return "weighted";
  }
  return "?";
}

std::string_view to_string(TieBreak t) { return t == TieBreak::soft_fallback ? "soft_fallback" : "lowest_index"; }

FusionMethod parse_fusion_method(std::string_view s) {
  if (s == "soft") return FusionMethod::soft;
  if (s == "hard") return FusionMethod::hard;
  if (s == "weighted") return FusionMethod::weighted;
  throw ConfigError("unknown fusion method '" + std::string(s) + "' (expected soft, hard or weighted)");
}

TieBreak parse_tie_break(std::string_view s) {
  if (s == "soft_fallback") return TieBreak::soft_fallback;
  if (s == "lowest_index") return TieBreak::lowest_index;
  throw ConfigError("unknown tie rule '" + std::string(s) + "' (expected soft_fallback or lowest_index)");
}

namespace {

void check_weights(std::span<const double> weights, std::size_t members) {
  if (weights.size() != members) {
    throw ValidationError("expected " + std::to_string(members) + " weights, got " + std::to_string(weights.size()));
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw ValidationError("fusion weights must be finite and nonnegative");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw ValidationError("fusion weights must sum to 1 (sum " + format_double(sum) + ")");
}

std::string member_list(std::span<const PredictionMatrix> members) {
  std::string out;
  for (const auto& m : members) {
    if (!out.empty()) out += ",";
    out += m.model_id;
  }
  return out;
}

PredictionMatrix fused_shell(std::span<const PredictionMatrix> members, FusionMethod method) {
  const auto& first = members.front();
  PredictionMatrix out;
  out.model_id = std::string(to_string(method)) + "(" + member_list(members) + ")";
  out.task = first.task;
  out.labels = first.labels;
  out.sample_ids = first.sample_ids;
  out.data_fingerprint = first.data_fingerprint;
  Fnv1a h;
  h.update("hatefuse-fused-v1").update(to_string(method));
  for (const auto& m : members) h.update(m.model_fingerprint).update("|");
  out.model_fingerprint = h.hex();
  out.config_fingerprint = first.config_fingerprint;
  out.fusion = nlohmann::ordered_json::object();
  out.fusion["method"] = to_string(method);
  nlohmann::ordered_json ids = nlohmann::ordered_json::array();
  for (const auto& m : members) ids.push_back(m.model_id);
  out.fusion["members"] = ids;
  return out;
}

// Sums terms in ascending order so that the result does not depend on the
// order in which members were supplied.
double order_free_sum(std::vector<double>& terms) {
  std::sort(terms.begin(), terms.end());
  double s = 0.0;
  for (double t : terms) s += t;
  return s;
}

}  // namespace

void EnsembleSpec::validate() const {
  if (members.size() < 2) throw ConfigError("an ensemble needs at least two members");
  if (method == FusionMethod::weighted) {
    check_weights(weights, members.size());
  } else if (!weights.empty()) {
    throw ConfigError("weights are only valid for weighted voting");
  }
}

EnsembleSpec EnsembleSpec::weighted_multitask() {
  return {FusionMethod::weighted, {"muril", "banglabert", "indicbertv2"}, {0.5, 0.3, 0.2}, TieBreak::soft_fallback};
}

void check_alignment(std::span<const PredictionMatrix> members) {
  if (members.size() < 2) throw AlignmentError("fusion needs at least two prediction matrices");
  const auto& ref = members.front();
  ref.validate();
  for (std::size_t k = 1; k < members.size(); ++k) {
    const auto& m = members[k];
    m.validate();
    const std::string who = "member '" + m.model_id + "' vs '" + ref.model_id + "': ";
    if (m.task != ref.task) {
      throw AlignmentError(who + "task differs (" + std::string(to_string(m.task)) + " vs " +
                           std::string(to_string(ref.task)) + ")");
    }
    if (m.labels != ref.labels) throw AlignmentError(who + "label order differs");
    if (!m.data_fingerprint.empty() && !ref.data_fingerprint.empty() && m.data_fingerprint != ref.data_fingerprint) {
      throw AlignmentError(who + "data fingerprints differ (" + m.data_fingerprint + " vs " + ref.data_fingerprint + ")");
    }
    const std::size_t n = std::min(m.sample_ids.size(), ref.sample_ids.size());
    for (std::size_t i = 0; i < n; ++i) {
      if (m.sample_ids[i] != ref.sample_ids[i]) {
        throw AlignmentError(who + "sample order differs at row " + std::to_string(i) + " (first mismatched id '" +
                             m.sample_ids[i] + "', expected '" + ref.sample_ids[i] + "')");
      }
    }
    if (m.sample_ids.size() != ref.sample_ids.size()) {
      const auto& longer = m.sample_ids.size() > n ? m.sample_ids : ref.sample_ids;
      throw AlignmentError(who + "sample counts differ (first unmatched id '" + longer[n] + "')");
    }
  }
}

PredictionMatrix soft_vote(std::span<const PredictionMatrix> members) {
  check_alignment(members);
  PredictionMatrix out = fused_shell(members, FusionMethod::soft);
  const auto& ref = members.front().probs;
  out.probs.resize(ref.rows(), ref.cols());
  const auto n = static_cast<double>(members.size());
  std::vector<double> terms(members.size());
  for (Eigen::Index i = 0; i < ref.rows(); ++i) {
    for (Eigen::Index j = 0; j < ref.cols(); ++j) {
      for (std::size_t k = 0; k < members.size(); ++k) terms[k] = members[k].probs(i, j);
      out.probs(i, j) = order_free_sum(terms) / n;
    }
  }
  return out;
}

PredictionMatrix weighted_vote(std::span<const PredictionMatrix> members, std::span<const double> weights) {
  check_alignment(members);
  check_weights(weights, members.size());
  PredictionMatrix out = fused_shell(members, FusionMethod::weighted);
  out.fusion["weights"] = std::vector<double>(weights.begin(), weights.end());
  const auto& ref = members.front().probs;
  out.probs.resize(ref.rows(), ref.cols());
  std::vector<double> terms(members.size());
  for (Eigen::Index i = 0; i < ref.rows(); ++i) {
    for (Eigen::Index j = 0; j < ref.cols(); ++j) {
      for (std::size_t k = 0; k < members.size(); ++k) terms[k] = weights[k] * members[k].probs(i, j);
      out.probs(i, j) = order_free_sum(terms);
    }
  }
  return out;
}

std::vector<std::size_t> argmax_indices(const ag::Matrix& probs) {
  std::vector<std::size_t> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    Eigen::Index best = 0;
    for (Eigen::Index j = 1; j < probs.cols(); ++j) {
      if (probs(i, j) > probs(i, best)) best = j;
    }
    out[static_cast<std::size_t>(i)] = static_cast<std::size_t>(best);
  }
  return out;
}

std::vector<std::string> argmax_labels(const PredictionMatrix& matrix) {
  std::vector<std::string> out;
  for (auto idx : argmax_indices(matrix.probs)) out.push_back(matrix.labels[idx]);
  return out;
}

std::vector<std::size_t> hard_vote_indices(std::span<const PredictionMatrix> members, TieBreak tie_break) {
  check_alignment(members);
  const auto rows = static_cast<std::size_t>(members.front().probs.rows());
  const auto classes = static_cast<std::size_t>(members.front().probs.cols());
  std::vector<std::vector<std::size_t>> votes;
  for (const auto& m : members) votes.push_back(argmax_indices(m.probs));
  const ag::Matrix mean = tie_break == TieBreak::soft_fallback ? soft_vote(members).probs : ag::Matrix();

  std::vector<std::size_t> out(rows);
  std::vector<std::size_t> tally(classes);
  for (std::size_t i = 0; i < rows; ++i) {
    std::fill(tally.begin(), tally.end(), 0);
    for (const auto& v : votes) ++tally[v[i]];
    const std::size_t top = *std::max_element(tally.begin(), tally.end());
    std::size_t winner = classes;
    for (std::size_t c = 0; c < classes; ++c) {
      if (tally[c] != top) continue;
      if (winner == classes) {
        winner = c;
      } else if (tie_break == TieBreak::soft_fallback &&
                 mean(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) >
                     mean(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(winner))) {
        winner = c;
      }
    }
    out[i] = winner;
  }
  return out;
}

std::vector<std::string> hard_vote(std::span<const PredictionMatrix> members, TieBreak tie_break) {
  const auto idx = hard_vote_indices(members, tie_break);
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(members.front().labels[i]);
  return out;
}

PredictionMatrix hard_vote_matrix(std::span<const PredictionMatrix> members, TieBreak tie_break) {
  const auto idx = hard_vote_indices(members, tie_break);
  PredictionMatrix out = fused_shell(members, FusionMethod::hard);
  out.fusion["tie_break"] = to_string(tie_break);
  out.probs = ag::Matrix::Zero(members.front().probs.rows(), members.front().probs.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) out.probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(idx[i])) = 1.0;
  return out;
}

PredictionMatrix fuse(std::span<const PredictionMatrix> members, const EnsembleSpec& spec) {
  switch (spec.method) {
    case FusionMethod::soft:
      return soft_vote(members);
    case FusionMethod::hard:
      return hard_vote_matrix(members, spec.tie_break);
    case FusionMethod::weighted:
      return weighted_vote(members, spec.weights);
  }
  throw ConfigError("unknown fusion method");
}

}  // namespace hatefuse
