#pragma once

// Brute-force recomputation of the copy-interpolated bigram law directly
// from raw token lists. Shares no code with ReferenceLM: every probability is
// obtained by rescanning the corpus.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace hcontrib::testing {

inline std::vector<std::string> oracle_words(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  std::string w;
  while (in >> w) {
    for (char& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.push_back(w);
  }
  return out;
}

struct BruteForceLM {
  std::vector<std::string> corpus;
  std::set<std::string> vocab;
  double alpha = 1.0;
  double lambda = 0.5;
  double copy_alpha = 1.0;
  bool unk = true;

  BruteForceLM(const std::string& text, double a, double l, double ca, bool reserve_unk)
      : corpus(oracle_words(text)), alpha(a), lambda(l), copy_alpha(ca), unk(reserve_unk) {
    vocab.insert(corpus.begin(), corpus.end());
    if (unk) vocab.insert("<unk>");
  }

  std::string canon(const std::string& w) const { return vocab.count(w) ? w : "<unk>"; }

  double lm(const std::optional<std::string>& prev, const std::string& w) const {
    const double v = static_cast<double>(vocab.size());
    if (!prev) {
      double c = 0;
      for (const auto& t : corpus) c += (canon(t) == w);
      return (c + alpha) / (static_cast<double>(corpus.size()) + alpha * v);
    }
    double pair = 0, hist = 0;
    for (std::size_t i = 0; i + 1 < corpus.size(); ++i) {
      if (corpus[i] == *prev) {
        hist += 1;
        if (corpus[i + 1] == w) pair += 1;
      }
    }
    return (pair + alpha) / (hist + alpha * v);
  }

  double copy(const std::vector<std::string>& ctx, const std::string& w) const {
    double c = 0, n = 0;
    for (const auto& t : ctx) {
      if (!unk && !vocab.count(t)) continue;
      n += 1;
      c += (canon(t) == w);
    }
    return (c + copy_alpha) / (n + copy_alpha * static_cast<double>(vocab.size()));
  }

  double prob(const std::optional<std::string>& prev, const std::optional<std::vector<std::string>>& ctx,
              const std::string& w) const {
    if (!ctx) return lm(prev, w);
    return lambda * copy(*ctx, w) + (1 - lambda) * lm(prev, w);
  }

  // Tempered probability by explicit enumeration over the vocabulary.
  double tempered(const std::optional<std::string>& prev, const std::optional<std::vector<std::string>>& ctx,
                  const std::string& w, double t) const {
    double z = 0;
    for (const auto& v : vocab) z += std::pow(prob(prev, ctx, v), 1.0 / t);
    return std::pow(prob(prev, ctx, w), 1.0 / t) / z;
  }

  std::vector<double> score(const std::vector<std::string>& target,
                            const std::optional<std::vector<std::string>>& ctx, double t = 1.0) const {
    std::vector<double> out;
    std::optional<std::string> prev;
    for (const auto& raw : target) {
      const std::string w = canon(raw);
      out.push_back(std::log(t == 1.0 ? prob(prev, ctx, w) : tempered(prev, ctx, w, t)));
      prev = w;
    }
    return out;
  }
};

}  // namespace hcontrib::testing
