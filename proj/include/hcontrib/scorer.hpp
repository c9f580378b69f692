#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "hcontrib/info.hpp"

namespace hcontrib {

struct ScoringRequest {
  std::optional<std::string> context;  // human input; absent for unconditional scoring
  std::string target;                  // the AI-assisted output, nonempty
  double temperature = 1.0;
};

/// Throws InvalidArgument for an empty target or non-positive temperature.
void validate(const ScoringRequest& request);

/// Scoring backend: context, target and temperature in, per-token logprobs out.
///
/// Implementations must be safe to call concurrently on a const instance.
class Scorer {
 public:
  virtual ~Scorer() = default;

  virtual TokenScores score(const ScoringRequest& request) const = 0;
  virtual std::string id() const = 0;
  /// Preamble used for unconditional scoring; recorded in every report.
  virtual std::string null_context() const { return {}; }
  /// Upper bound on useful concurrent calls.
  virtual std::size_t max_concurrency() const { return 1; }
};

/// p_i^(1/T) / sum_j p_j^(1/T), computed in the log domain so that very small
/// temperatures degrade to an argmax rather than underflowing.
std::vector<double> apply_temperature(std::span<const double> distribution, double temperature);

/// Same transform on natural-log probabilities; returns normalized logprobs.
std::vector<double> apply_temperature_log(std::span<const double> logprobs, double temperature);

/// Stable short digest of a conditioning text ("fnv1a64:<hex>"); empty input
/// (no context) yields an empty digest.
std::string context_digest(const std::optional<std::string>& context);

}  // namespace hcontrib
