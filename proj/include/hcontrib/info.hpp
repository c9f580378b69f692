#pragma once

// Log-domain information accounting for a single AI-assisted generation.
//
// All quantities are in nats. The contribution ratio and its minimal-input
// estimate are ratios, so they do not depend on the logarithm base.

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace hcontrib {

/// A scored token sequence: one natural-log probability per text piece.
///
/// Offsets are character (byte) offsets into the scored span; the pieces
/// concatenate to that span exactly, so offsets[i + 1] == offsets[i] + tokens[i].size().
struct TokenScores {
  std::vector<std::string> tokens;
  std::vector<double> logprobs;
  std::vector<std::size_t> offsets;
  std::string scorer_id;
  std::string context_digest;  // empty for unconditional scores
  double temperature = 1.0;

  std::size_t size() const noexcept { return logprobs.size(); }
  std::string text() const;
};

/// Throws InvalidScores / NonFiniteScore when the structural invariants do not hold.
void validate(const TokenScores& scores);

/// Logprob floor used when flooring is explicitly enabled.
inline constexpr double kDefaultLogprobFloor = -30.0;

/// Published plausibility thresholds for Llama-3 and Mixtral scoring.
inline constexpr double kTauLlama = 0.65;
inline constexpr double kTauMixtral = 0.7;

struct ContributionReport {
  // Provenance, filled by the batch layer.
  std::string record_id;
  std::string group;
  std::string model_id;
  std::optional<int> round;
  std::string null_context;

  double self_info = 0.0;
  std::optional<double> cond_self_info;
  std::optional<double> mutual_info;
  std::optional<double> phi;
  std::optional<double> phi_min;
  std::size_t token_count = 0;
  std::optional<double> tau;
  std::optional<bool> plausible;
  std::string scorer_id;
  std::vector<std::string> flags;

  bool has_flag(const std::string& flag) const;
};

double self_information(const TokenScores& scores);

/// I(y) - I(y|x). May be negative when conditioning makes the output less likely.
double mutual_information(const TokenScores& uncond, const TokenScores& cond);

/// Human contribution: mutual information over self-information, unclamped.
double contribution_ratio(const TokenScores& uncond, const TokenScores& cond);

/// Smallest contribution consistent with any input whose conditional
/// per-token geometric mean exceeds tau: (I(y) + N ln tau) / I(y).
double minimal_contribution(const TokenScores& uncond, double tau);

/// Same bound from precomputed totals.
double minimal_contribution(double self_info, std::size_t token_count, double tau);

/// True iff the geometric mean of the conditional token probabilities exceeds tau.
bool plausibility_check(const TokenScores& cond, double tau);

struct ReportOptions {
  /// When set, logprobs below the floor (including -inf) are raised to it and
  /// the report carries the "floored-logprob" flag. Unset means -inf is an error.
  std::optional<double> logprob_floor;
};

ContributionReport build_report(const TokenScores& uncond,
                                const std::optional<TokenScores>& cond,
                                std::optional<double> tau,
                                const ReportOptions& options = {});

/// Presentation-only clamp of phi and phi_min to [0, 1]; adds the "clamped" flag
/// when a value changed.
ContributionReport clamp_for_display(ContributionReport report);

/// Geometric mean of the per-token probabilities, exp(mean logprob).
double geometric_mean_probability(const TokenScores& scores);

}  // namespace hcontrib
