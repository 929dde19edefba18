#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hatefuse/prediction_matrix.hpp"

namespace hatefuse {

enum class FusionMethod { soft, hard, weighted };
enum class TieBreak { soft_fallback, lowest_index };

std::string_view to_string(FusionMethod m);
std::string_view to_string(TieBreak t);
FusionMethod parse_fusion_method(std::string_view s);
TieBreak parse_tie_break(std::string_view s);

struct EnsembleSpec {
  FusionMethod method = FusionMethod::soft;
  std::vector<std::string> members;
  /// Weighted only; one per member, summing to 1.
  std::vector<double> weights;
  TieBreak tie_break = TieBreak::soft_fallback;

  void validate() const;

  /// 0.5 / 0.3 / 0.2 over (MuRIL, BanglaBERT, IndicBERTv2), in that order.
  static EnsembleSpec weighted_multitask();
};

/// Throws AlignmentError unless every matrix shares task, label order,
/// sample order and data fingerprint. Needs at least two members.
void check_alignment(std::span<const PredictionMatrix> members);

/// Unweighted arithmetic mean of the members' rows.
PredictionMatrix soft_vote(std::span<const PredictionMatrix> members);

/// Convex combination sum_i w_i * P_i. Weights must be nonnegative and sum
/// to 1 within 1e-6.
PredictionMatrix weighted_vote(std::span<const PredictionMatrix> members, std::span<const double> weights);

/// Majority over member argmaxes. Ties go to the tied label with the highest
/// mean probability (soft_fallback) or to the lowest label index.
std::vector<std::string> hard_vote(std::span<const PredictionMatrix> members,
                                   TieBreak tie_break = TieBreak::soft_fallback);
std::vector<std::size_t> hard_vote_indices(std::span<const PredictionMatrix> members, TieBreak tie_break);

/// Hard vote rendered as a one-hot prediction matrix.
PredictionMatrix hard_vote_matrix(std::span<const PredictionMatrix> members, TieBreak tie_break);

/// Dispatches on spec.method; records method, members and weights in the
/// output's fusion header.
PredictionMatrix fuse(std::span<const PredictionMatrix> members, const EnsembleSpec& spec);

/// Row argmax; exact ties resolve to the lowest label index.
std::vector<std::size_t> argmax_indices(const ag::Matrix& probs);
std::vector<std::string> argmax_labels(const PredictionMatrix& matrix);

}  // namespace hatefuse
