#include "hcontrib/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <random>

namespace hcontrib {

namespace {

constexpr std::size_t kOutputTokens = 60;
constexpr std::size_t kLengthInputTokens = 40;
constexpr std::size_t kGuidedOpening = 50;
constexpr std::size_t kLengths[] = {100, 200, 400};
constexpr double kTemperatures[] = {0.3, 0.5, 0.7, 0.9};
constexpr int kRounds = 3;

constexpr double kMinLevelGap = 0.02;
constexpr double kMinPairwise = 0.95;
constexpr double kMaxAttackShift = 0.05;
constexpr double kMinReduction = 0.80;
constexpr double kMinRankPreservation = 0.80;

constexpr std::pair<Experiment, std::string_view> kNames[] = {{Experiment::Levels, "levels"},
                                                              {Experiment::Length, "length"},
                                                              {Experiment::Temperature, "temperature"},
                                                              {Experiment::Rounds, "rounds"},
                                                              {Experiment::Attacks, "attacks"}};

std::string temperature_label(double t) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "T%.1f", t);
  return buf;
}

std::string family_name(Experiment e, std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "-%04zu", i);
  return std::string(to_string(e)) + buf;
}

class Synthesizer {
 public:
  Synthesizer(Experiment e, const ReferenceLM& lm, const SynthOptions& opts)
      : e_(e), lm_(lm), opts_(opts), rng_(opts.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(e) + 1) {}

  std::vector<GenerationRecord> run() {
    for (std::size_t i = 0; i < opts_.n; ++i) {
      const auto family = family_name(e_, i);
      switch (e_) {
        case Experiment::Levels: levels(family); break;
        case Experiment::Length: length(family); break;
        case Experiment::Temperature: temperature(family); break;
        case Experiment::Rounds: rounds(family); break;
        case Experiment::Attacks: attacks(family); break;
      }
    }
    return std::move(out_);
  }

 private:
  std::string sample(const std::optional<std::string>& context, std::size_t tokens, double t,
                     std::optional<std::string> history = std::nullopt) {
    return lm_.sample(SampleRequest{context, tokens, t, rng_(), std::move(history)}).text;
  }

  std::string unconditional() { return sample(std::nullopt, kOutputTokens, opts_.generation_temperature); }

  std::vector<std::string> words(const std::string& text) {
    std::vector<std::string> out;
    for (auto& w : split_words(text)) out.push_back(std::move(w.word));
    return out;
  }

  std::string join(const std::vector<std::string>& ws) {
    std::string out;
    for (const auto& w : ws) {
      if (!out.empty()) out += ' ';
      out += w;
    }
    return out;
  }

  // Each word kept with probability 1/2, at least one word.
  std::string random_half(const std::string& text) {
    const auto ws = words(text);
    std::vector<std::string> kept;
    for (const auto& w : ws) {
      if (rng_() & 1) kept.push_back(w);
    }
    if (kept.empty()) kept.push_back(ws[rng_() % ws.size()]);
    return join(kept);
  }

  std::string keyword(const std::string& text) {
    const auto ws = words(text);
    return ws[rng_() % ws.size()];
  }

  std::string vocabulary_word() {
    const auto& vocab = lm_.vocabulary();
    for (;;) {
      const auto id = static_cast<std::size_t>(rng_() % vocab.size());
      if (id != lm_.unknown_id()) return vocab[id];
    }
  }

  GenerationRecord& add(std::string id, const std::string& group, std::string human_input, std::string output,
                        double temperature) {
    GenerationRecord r;
    r.id = std::move(id);
    r.domain = Domain::Other;
    r.mode = Mode::Freeform;
    r.human_input = std::move(human_input);
    r.output = std::move(output);
    r.model_id = lm_.id();
    r.temperature = temperature;
    r.extra["group"] = group;
    out_.push_back(std::move(r));
    return out_.back();
  }

  std::string prompt(const std::string& x, std::optional<Attack> attack = std::nullopt) {
    return build_prompt(Mode::Freeform, InfoLevels{x, {}, {}, {}}, attack);
  }

  void levels(const std::string& family) {
    const auto y = unconditional();
    const auto half = random_half(y);
    const auto kw = keyword(y);
    const double t = opts_.generation_temperature;
    add(family + "/full", "full", prompt(y), y, t);
    add(family + "/half", "half", prompt(half), y, t);
    add(family + "/keyword", "keyword", prompt(kw), y, t);
  }

  // One human input per family; each output opens with a guided stretch and
  // continues without the input, so longer outputs carry more AI-only text.
  void length(const std::string& family) {
    const double t = opts_.generation_temperature;
    const auto x = sample(std::nullopt, kLengthInputTokens, t);
    for (std::size_t len : kLengths) {
      const auto opening = sample(x, kGuidedOpening, t);
      const auto rest = sample(std::nullopt, len - kGuidedOpening, t, opening);
      auto& r = add(family + "/len" + std::to_string(len), "len" + std::to_string(len), prompt(x),
                    opening + " " + rest, t);
      r.length_target = static_cast<int>(len);
    }
  }

  void temperature(const std::string& family) {
    const auto x = random_half(unconditional());
    const auto seed = rng_();
    for (double t : kTemperatures) {
      const auto label = temperature_label(t);
      const auto y = lm_.sample(SampleRequest{x, kOutputTokens, t, seed, std::nullopt}).text;
      add(family + "/" + label, label, prompt(x), y, t);
    }
  }

  void attacks(const std::string& family) {
    const double t = opts_.generation_temperature;
    const auto x = random_half(unconditional());
    const auto seed = rng_();
    for (auto attack : {Attack::None, Attack::RareWords, Attack::MimicHuman}) {
      const auto input = prompt(x, attack);
      const auto y = lm_.sample(SampleRequest{input, kOutputTokens, t, seed, std::nullopt}).text;
      auto& r = add(family + "/" + std::string(to_string(attack)), std::string(to_string(attack)), input, y, t);
      r.attack = attack;
    }
  }

  // Three generation modes share one output chain. Each later round appends
  // a refinement instruction and an equally long continuation.
  void rounds(const std::string& family) {
    const double t = opts_.generation_temperature;
    std::vector<std::string> outputs{unconditional()};
    std::vector<std::string> instructions;
    for (int k = 1; k < kRounds; ++k) {
      instructions.push_back("Add more detail about " + vocabulary_word() + ".");
      const auto& prev = outputs.back();
      const auto more = sample(std::nullopt, words(prev).size(), t, prev);
      outputs.push_back(prev + " " + more);
    }
    const std::string base = outputs.front();
    const std::pair<const char*, std::string> modes[] = {
        {"full", base}, {"half", random_half(base)}, {"keyword", keyword(base)}};
    for (const auto& [mode, x] : modes) {
      GenerationRecord r = add(family + "/" + mode, "round1", prompt(x), base, t);
      for (int k = 1; k < kRounds; ++k) {
        r = make_refinement_record(r, outputs[k], instructions[k - 1], opts_.refinement_context);
        r.extra["group"] = "round" + std::to_string(k + 1);
        out_.push_back(r);
      }
    }
  }

  Experiment e_;
  const ReferenceLM& lm_;
  const SynthOptions& opts_;
  std::mt19937_64 rng_;
  std::vector<GenerationRecord> out_;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

Check trend_check(const std::string& name, const TrendResult& t) {
  std::string medians;
  for (double m : t.medians) medians += (medians.empty() ? "" : " > ") + fmt(m);
  return Check{name, t.decreasing, t.margin, "medians " + medians + ", margin " + fmt(t.margin), false};
}

BatchOptions batch_options(Experiment e, const SynthOptions& opts) {
  BatchOptions b;
  b.tau = opts.tau;
  b.max_concurrency = opts.max_concurrency;
  // Temperature is measured on the scoring side.
  b.score_at_record_temperature = e == Experiment::Temperature;
  return b;
}

std::vector<Check> levels_checks(const ExperimentResult& result) {
  std::vector<Check> checks;
  const auto order = group_order(Experiment::Levels);
  const auto trend = group_trend(result, order);
  checks.push_back(trend_check("levels strictly decreasing", trend));
  checks.push_back(Check{"levels adjacent gap >= 0.02", trend.margin >= kMinLevelGap, trend.margin,
                         "smallest adjacent median gap " + fmt(trend.margin), false});
  std::vector<PairwiseResult> parts;
  for (std::size_t i = 0; i < order.size(); ++i) {
    for (std::size_t j = i + 1; j < order.size(); ++j) {
      try {
        parts.push_back(pairwise_consistency(result.group_reports(order[i]), result.group_reports(order[j]),
                                             ExpectedOrder::AGreater));
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoQualifyingPairs) throw;
      }
    }
  }
  try {
    const auto p = pool(parts);
    checks.push_back(Check{"pairwise consistency >= 0.95", p.fraction >= kMinPairwise, p.fraction,
                           std::to_string(p.agreeing) + "/" + std::to_string(p.qualifying) +
                               " qualifying pairs ordered as constructed",
                           false});
  } catch (const Error& e) {
    checks.push_back(Check{"pairwise consistency >= 0.95", false, 0.0, e.what(), false});
  }
  // The minimal-contribution threshold implied by the full-input outputs, for reference.
  const auto full = result.group_reports("full");
  if (!full.empty()) {
    const double tau = calibrate_tau(full);
    checks.push_back(Check{"calibrated tau (5th percentile)", true, tau, "from full-input conditional scores", true});
  }
  return checks;
}

std::vector<Check> temperature_checks(const ExperimentResult& result) {
  const auto order = group_order(Experiment::Temperature);
  std::vector<double> medians;
  for (const auto& g : order) medians.push_back(summarize(result.phis(g)).median);
  bool non_increasing = true;
  std::string detail = "medians";
  for (std::size_t i = 0; i < medians.size(); ++i) {
    detail += " " + order[i] + "=" + fmt(medians[i]);
    if (i > 0 && medians[i] > medians[i - 1]) non_increasing = false;
  }
  const double drop = medians.front() - medians.back();
  return {Check{"temperature medians non-increasing", non_increasing, drop, detail, false},
          Check{"temperature lowest at 0.9 vs 0.3", drop > 0.0, drop, "drop " + fmt(drop), false}};
}

std::vector<Check> attack_checks(const ExperimentResult& result) {
  const double base = summarize(result.phis("none")).median;
  std::vector<Check> checks;
  for (const char* attack : {"rare_words", "mimic_human"}) {
    const double shift = std::abs(summarize(result.phis(attack)).median - base);
    checks.push_back(Check{std::string(attack) + " median shift <= 0.05", shift <= kMaxAttackShift, shift,
                           "baseline median " + fmt(base) + ", shift " + fmt(shift), false});
  }
  return checks;
}

std::vector<Check> rounds_checks(const ExperimentResult& result, std::string_view label, bool informational) {
  std::vector<Check> checks;
  const auto reduction = multi_round_reduction(result.reports);
  for (std::size_t k = 0; k < reduction.size(); ++k) {
    const auto name = std::string(label) + " reduction r" + std::to_string(k + 1) + "->r" + std::to_string(k + 2);
    checks.push_back(Check{name + " >= 0.80", reduction[k] >= kMinReduction, reduction[k],
                           "fraction of chains with lower phi", informational});
  }
  const double rank = rank_preservation(result.reports);
  checks.push_back(Check{std::string(label) + " rank preservation >= 0.80", rank >= kMinRankPreservation, rank,
                         "mode ordering equal to round 1", informational});
  return checks;
}

}  // namespace

std::string_view to_string(Experiment e) {
  for (const auto& [v, name] : kNames) {
    if (v == e) return name;
  }
  return "?";
}

std::optional<Experiment> parse_experiment(std::string_view s) {
  for (const auto& [v, name] : kNames) {
    if (name == s) return v;
  }
  return std::nullopt;
}

ReferenceLMConfig synthetic_lm_config(std::string name) {
  ReferenceLMConfig c;
  c.laplace_alpha = 1.0;
  c.copy_lambda = 0.5;
  c.copy_alpha = 0.1;
  c.name = std::move(name);
  return c;
}

std::vector<std::string> group_order(Experiment e) {
  switch (e) {
    case Experiment::Levels: return {"full", "half", "keyword"};
    case Experiment::Length: {
      std::vector<std::string> out;
      for (auto len : kLengths) out.push_back("len" + std::to_string(len));
      return out;
    }
    case Experiment::Temperature: {
      std::vector<std::string> out;
      for (double t : kTemperatures) out.push_back(temperature_label(t));
      return out;
    }
    case Experiment::Rounds: return {"round1", "round2", "round3"};
    case Experiment::Attacks: return {"none", "rare_words", "mimic_human"};
  }
  return {};
}

std::vector<GenerationRecord> synthesize(Experiment e, const ReferenceLM& generator, const SynthOptions& options) {
  if (options.n == 0) throw Error(ErrorKind::InvalidArgument, "n must be positive");
  if (!(options.generation_temperature > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "generation temperature must be positive");
  }
  return Synthesizer(e, generator, options).run();
}

double rank_preservation(const std::vector<ContributionReport>& reports) {
  // family -> round -> (mode, phi) in report order
  std::map<std::string, std::map<int, std::vector<std::pair<std::string, double>>>> table;
  for (const auto& r : reports) {
    if (!r.phi) continue;
    const auto chain = chain_id(r.record_id);
    const auto slash = chain.rfind('/');
    const auto mode = slash == std::string::npos ? chain : chain.substr(slash + 1);
    table[family_id(chain)][r.round.value_or(1)].emplace_back(mode, *r.phi);
  }
  auto ranking = [](std::vector<std::pair<std::string, double>> v) {
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) {
      return a.second != b.second ? a.second > b.second : a.first < b.first;
    });
    std::vector<std::string> modes;
    for (auto& [m, phi] : v) modes.push_back(m);
    return modes;
  };
  std::size_t kept = 0;
  std::size_t total = 0;
  for (const auto& [family, rounds] : table) {
    const auto first = rounds.find(1);
    if (first == rounds.end()) continue;
    const auto reference = ranking(first->second);
    for (const auto& [round, values] : rounds) {
      if (round < 2) continue;
      ++total;
      if (ranking(values) == reference) ++kept;
    }
  }
  if (total == 0) throw Error(ErrorKind::ChainError, "no multi-round families");
  return static_cast<double>(kept) / static_cast<double>(total);
}

std::vector<Check> experiment_checks(Experiment e, const ExperimentResult& result) {
  switch (e) {
    case Experiment::Levels: return levels_checks(result);
    case Experiment::Length: return {trend_check("length strictly decreasing", group_trend(result, group_order(e)))};
    case Experiment::Temperature: return temperature_checks(result);
    case Experiment::Rounds: return rounds_checks(result, "rounds", false);
    case Experiment::Attacks: return attack_checks(result);
  }
  return {};
}

ExperimentResult run_experiment(Experiment e, const ReferenceLM& lm, const SynthOptions& options) {
  const auto records = synthesize(e, lm, options);
  const auto batch_opts = batch_options(e, options);
  auto result = make_experiment(std::string(to_string(e)), evaluate_batch(records, lm, batch_opts), lm, options.tau,
                                group_order(e));
  result.checks = experiment_checks(e, result);
  if (e == Experiment::Rounds) {
    // The other conditioning convention on the same outputs, for comparison.
    auto other = options;
    other.refinement_context = options.refinement_context == RefinementContext::HumanTurns
                                   ? RefinementContext::Transcript
                                   : RefinementContext::HumanTurns;
    const auto alt = make_experiment("rounds", evaluate_batch(synthesize(e, lm, other), lm, batch_opts), lm,
                                     options.tau, group_order(e));
    const char* label = other.refinement_context == RefinementContext::Transcript ? "transcript-context"
                                                                                  : "human-turns-context";
    for (auto& c : rounds_checks(alt, label, true)) result.checks.push_back(std::move(c));
  }
  return result;
}

bool SurrogateOutcome::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.informational || c.passed; });
}

SurrogateOutcome run_surrogate(const ReferenceLM& a, const ReferenceLM& b, const SynthOptions& options) {
  if (a.id() == b.id()) throw Error(ErrorKind::InvalidArgument, "surrogate models need distinct names");
  const auto order = group_order(Experiment::Levels);
  std::vector<std::pair<std::string, std::vector<GenerationRecord>>> by_generator{
      {a.id(), synthesize(Experiment::Levels, a, options)}, {b.id(), synthesize(Experiment::Levels, b, options)}};
  SurrogateOutcome out;
  out.cells = surrogate_matrix(by_generator, {&a, &b}, order, batch_options(Experiment::Levels, options));
  for (const auto& cell : out.cells) {
    const bool cross = cell.scorer_id != cell.generator_id;
    const auto name = cell.scorer_id + " scoring " + cell.generator_id + " levels decreasing";
    if (cell.trend) {
      auto c = trend_check(name, *cell.trend);
      c.informational = !cross;
      out.checks.push_back(std::move(c));
    } else {
      out.checks.push_back(Check{name, false, 0.0, cell.error.value_or("no trend"), !cross});
    }
  }
  return out;
}

}  // namespace hcontrib
