#pragma once

// Copy-interpolated bigram language model with exact, enumerable
// probabilities. Stands in for a neural model in tests and synthetic
// experiments:
//
//   p_lm(w | h)    = (bigram(h, w) + a) / (sum_w' bigram(h, w') + a |V|)
//   p_lm(w | none) = (unigram(w) + a) / (total + a |V|)
//   p_copy(w | x)  = (count_x(w) + a_c) / (|x| + a_c |V|)
//   p(w | h, x)    = lambda p_copy(w | x) + (1 - lambda) p_lm(w | h)
//
// Unconditional scoring uses lambda = 0. A temperature T rescales the whole
// next-token distribution to p^(1/T) / Z.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hcontrib/scorer.hpp"

namespace hcontrib {

struct ReferenceLMConfig {
  double laplace_alpha = 1.0;
  double copy_lambda = 0.5;
  double copy_alpha = 1.0;
  /// Reserve an "<unk>" entry in the vocabulary for out-of-vocabulary words.
  /// Without it, out-of-vocabulary target words are an error.
  bool reserve_unknown = true;
  std::string name = "reference";
};

/// A lowercased whitespace-delimited word and its byte range in the source text.
struct WordSpan {
  std::string word;
  std::size_t begin = 0;
  std::size_t end = 0;
};

std::vector<WordSpan> split_words(std::string_view text);

/// Word counts of a conditioning context, indexed by vocabulary id.
struct CopyTable {
  std::vector<std::uint32_t> counts;
  std::size_t length = 0;
};

struct SampleRequest {
  std::optional<std::string> context;
  std::size_t max_tokens = 1;
  double temperature = 1.0;
  std::uint64_t seed = 0;
  /// Previous word when continuing an existing text; absent starts from the unigram law.
  std::optional<std::string> history;
};

struct SampleResult {
  std::string text;
  std::vector<std::size_t> ids;
  std::vector<double> logprobs;  // sampling-time log-probabilities
};

class ReferenceLM final : public Scorer {
 public:
  static constexpr std::string_view kUnknownToken = "<unk>";
  static constexpr std::string_view kFormatTag = "hcontrib-reference-lm";
  static constexpr int kFormatVersion = 1;

  static ReferenceLM build(std::string_view corpus, ReferenceLMConfig config = {});
  static ReferenceLM build_file(const std::filesystem::path& corpus_path, ReferenceLMConfig config = {});

  static ReferenceLM load(std::istream& in);
  static ReferenceLM load_file(const std::filesystem::path& path);
  void save(std::ostream& out) const;
  void save_file(const std::filesystem::path& path) const;

  /// Same counts, different interpolation and naming parameters.
  ReferenceLM with_config(ReferenceLMConfig config) const;

  const ReferenceLMConfig& config() const noexcept { return config_; }
  const std::vector<std::string>& vocabulary() const noexcept { return vocab_; }
  std::size_t vocab_size() const noexcept { return vocab_.size(); }
  std::optional<std::size_t> unknown_id() const noexcept { return unknown_id_; }
  std::uint64_t total_tokens() const noexcept { return total_; }
  std::uint64_t unigram_count(std::size_t word) const { return unigram_[word]; }
  std::uint64_t bigram_count(std::size_t history, std::size_t word) const;
  std::uint64_t history_total(std::size_t history) const { return history_total_[history]; }

  /// Vocabulary id of a lowercased word; out-of-vocabulary words map to the
  /// unknown entry when reserved, otherwise nullopt.
  std::optional<std::size_t> word_id(std::string_view word) const;

  CopyTable copy_table(std::string_view context) const;

  double lm_probability(std::optional<std::size_t> history, std::size_t word) const;
  double copy_probability(const CopyTable& copy, std::size_t word) const;
  /// Mixture probability at temperature 1; copy == nullptr is the unconditional law.
  double mixture_probability(std::optional<std::size_t> history, const CopyTable* copy, std::size_t word) const;

  /// Full next-token log-distribution over the vocabulary at the given temperature.
  std::vector<double> next_log_distribution(std::optional<std::size_t> history, const CopyTable* copy,
                                            double temperature) const;
  std::vector<double> next_distribution(std::optional<std::size_t> history, const CopyTable* copy,
                                        double temperature) const;

  TokenScores score(const ScoringRequest& request) const override;
  std::string id() const override { return config_.name; }
  /// CPU-bound, so one worker per hardware thread.
  std::size_t max_concurrency() const override;

  SampleResult sample(const SampleRequest& request) const;
  std::string sample(const std::optional<std::string>& context, std::size_t max_tokens, double temperature,
                     std::uint64_t seed) const;

  friend bool operator==(const ReferenceLM& a, const ReferenceLM& b);

 private:
  ReferenceLM() = default;
  void index_vocabulary();
  void check_config() const;

  ReferenceLMConfig config_;
  std::vector<std::string> vocab_;
  std::unordered_map<std::string, std::size_t> index_;
  std::optional<std::size_t> unknown_id_;
  std::vector<std::uint64_t> unigram_;
  // Per-history sparse successor counts, sorted by successor id.
  std::vector<std::vector<std::pair<std::size_t, std::uint64_t>>> bigram_;
  std::vector<std::uint64_t> history_total_;
  std::uint64_t total_ = 0;
};

}  // namespace hcontrib
