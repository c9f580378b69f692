#pragma once
// Desk-scale synthetic experiments on the reference language model.
//
// Each experiment samples generation records from a reference LM, scores
// them with a reference LM, and attaches pass/fail checks on the expected
// ordering of the contribution values.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hcontrib/corpus.hpp"
#include "hcontrib/harness.hpp"
#include "hcontrib/reference_lm.hpp"

namespace hcontrib {

enum class Experiment { Levels, Length, Temperature, Rounds, Attacks };

std::string_view to_string(Experiment e);
std::optional<Experiment> parse_experiment(std::string_view s);

struct SynthOptions {
  std::size_t n = 200;  // families per experiment
  std::uint64_t seed = 1;
  double generation_temperature = 0.7;
  std::optional<double> tau = kTauLlama;
  std::size_t max_concurrency = 0;
  RefinementContext refinement_context = RefinementContext::HumanTurns;
};

/// Interpolation knobs used by the synthetic experiments.
ReferenceLMConfig synthetic_lm_config(std::string name = "reference");

/// Group labels of an experiment in their expected descending-phi order.
std::vector<std::string> group_order(Experiment e);

/// Deterministic in (generator, options).
std::vector<GenerationRecord> synthesize(Experiment e, const ReferenceLM& generator, const SynthOptions& options);

/// Synthesize with `lm`, score with `lm`, and attach the experiment's checks.
ExperimentResult run_experiment(Experiment e, const ReferenceLM& lm, const SynthOptions& options);

/// Checks for an already evaluated experiment.
std::vector<Check> experiment_checks(Experiment e, const ExperimentResult& result);

/// Round-wise rank preservation: over every (family, round >= 2), the fraction
/// whose ordering of phi across generation modes equals the round-1 ordering.
double rank_preservation(const std::vector<ContributionReport>& reports);

struct SurrogateOutcome {
  std::vector<SurrogateCell> cells;
  std::vector<Check> checks;
  bool passed() const;
};

/// Levels experiment generated by each model and scored by both.
SurrogateOutcome run_surrogate(const ReferenceLM& a, const ReferenceLM& b, const SynthOptions& options);

}  // namespace hcontrib
