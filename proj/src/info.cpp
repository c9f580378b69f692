#include "hcontrib/info.hpp"

#include <algorithm>
#include <cmath>

#include "hcontrib/error.hpp"

namespace hcontrib {

namespace {

double sum_surprisal(const TokenScores& scores) {
  if (scores.logprobs.empty()) {
    throw Error(ErrorKind::InvalidScores, "empty score list");
  }
  // Neumaier summation; long outputs add thousands of terms.
  double total = 0.0;
  double carry = 0.0;
  for (double lp : scores.logprobs) {
    if (!std::isfinite(lp)) {
      throw Error(ErrorKind::NonFiniteScore, "logprob " + std::to_string(lp));
    }
    const double term = -lp;
    const double next = total + term;
    carry += std::abs(total) >= std::abs(term) ? (total - next) + term : (term - next) + total;
    total = next;
  }
  return total + carry;
}

void check_tau(double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) {
    throw Error(ErrorKind::InvalidThreshold, "tau must lie in (0, 1], got " + std::to_string(tau));
  }
}

void check_same_sequence(const TokenScores& uncond, const TokenScores& cond) {
  if (uncond.size() != cond.size()) {
    throw Error(ErrorKind::ScoreMismatch, "token counts differ: " + std::to_string(uncond.size()) +
                                              " vs " + std::to_string(cond.size()));
  }
  if (uncond.tokens != cond.tokens) {
    throw Error(ErrorKind::ScoreMismatch, "token sequences differ");
  }
}

TokenScores floored(TokenScores scores, double floor, bool& changed) {
  for (double& lp : scores.logprobs) {
    if (std::isnan(lp)) {
      throw Error(ErrorKind::NonFiniteScore, "logprob is NaN");
    }
    if (lp < floor) {
      lp = floor;
      changed = true;
    }
  }
  return scores;
}

}  // namespace

std::string TokenScores::text() const {
  std::string out;
  for (const auto& t : tokens) out += t;
  return out;
}

void validate(const TokenScores& scores) {
  const std::size_t n = scores.logprobs.size();
  if (n == 0) {
    throw Error(ErrorKind::InvalidScores, "no tokens");
  }
  if (scores.tokens.size() != n || scores.offsets.size() != n) {
    throw Error(ErrorKind::InvalidScores, "tokens, logprobs and offsets differ in length");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double lp = scores.logprobs[i];
    if (!std::isfinite(lp)) {
      throw Error(ErrorKind::NonFiniteScore, "token " + std::to_string(i));
    }
    if (lp > 0.0) {
      throw Error(ErrorKind::InvalidScores, "positive logprob at token " + std::to_string(i));
    }
    if (i + 1 < n && scores.offsets[i + 1] != scores.offsets[i] + scores.tokens[i].size()) {
      throw Error(ErrorKind::InvalidScores, "offsets do not tile the span at token " + std::to_string(i));
    }
    if (i + 1 < n && scores.offsets[i + 1] <= scores.offsets[i]) {
      throw Error(ErrorKind::InvalidScores, "offsets not strictly increasing at token " + std::to_string(i));
    }
  }
  if (!(scores.temperature > 0.0)) {
    throw Error(ErrorKind::InvalidScores, "temperature must be positive");
  }
}

bool ContributionReport::has_flag(const std::string& flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

double self_information(const TokenScores& scores) { return sum_surprisal(scores); }

double mutual_information(const TokenScores& uncond, const TokenScores& cond) {
  check_same_sequence(uncond, cond);
  return sum_surprisal(uncond) - sum_surprisal(cond);
}

double contribution_ratio(const TokenScores& uncond, const TokenScores& cond) {
  check_same_sequence(uncond, cond);
  const double info = sum_surprisal(uncond);
  const double cond_info = sum_surprisal(cond);
  if (info <= 0.0) {
    throw Error(ErrorKind::DegenerateOutput, "output has zero self-information");
  }
  return (info - cond_info) / info;
}

double minimal_contribution(double self_info, std::size_t token_count, double tau) {
  check_tau(tau);
  if (!(self_info > 0.0)) {
    throw Error(ErrorKind::DegenerateOutput, "output has zero self-information");
  }
  return (self_info + static_cast<double>(token_count) * std::log(tau)) / self_info;
}

double minimal_contribution(const TokenScores& uncond, double tau) {
  check_tau(tau);
  return minimal_contribution(sum_surprisal(uncond), uncond.size(), tau);
}

bool plausibility_check(const TokenScores& cond, double tau) {
  check_tau(tau);
  const double cond_info = sum_surprisal(cond);
  return cond_info < -static_cast<double>(cond.size()) * std::log(tau);
}

double geometric_mean_probability(const TokenScores& scores) {
  return std::exp(-sum_surprisal(scores) / static_cast<double>(scores.size()));
}

ContributionReport build_report(const TokenScores& uncond_in,
                                const std::optional<TokenScores>& cond_in,
                                std::optional<double> tau,
                                const ReportOptions& options) {
  if (tau) check_tau(*tau);

  ContributionReport report;
  bool changed = false;
  const TokenScores uncond =
      options.logprob_floor ? floored(uncond_in, *options.logprob_floor, changed) : uncond_in;
  std::optional<TokenScores> cond;
  if (cond_in) {
    cond = options.logprob_floor ? floored(*cond_in, *options.logprob_floor, changed) : *cond_in;
  }
  if (changed) report.flags.emplace_back("floored-logprob");

  report.scorer_id = uncond.scorer_id;
  report.token_count = uncond.size();
  report.self_info = self_information(uncond);
  report.tau = tau;

  if (cond) {
    report.phi = contribution_ratio(uncond, *cond);
    report.cond_self_info = self_information(*cond);
    report.mutual_info = report.self_info - *report.cond_self_info;
    if (tau) report.plausible = plausibility_check(*cond, *tau);
  }
  if (tau) report.phi_min = minimal_contribution(report.self_info, report.token_count, *tau);
  return report;
}

ContributionReport clamp_for_display(ContributionReport report) {
  bool changed = false;
  auto clamp = [&](std::optional<double>& v) {
    if (!v) return;
    const double c = std::clamp(*v, 0.0, 1.0);
    if (c != *v) changed = true;
    *v = c;
  };
  clamp(report.phi);
  clamp(report.phi_min);
  if (changed) report.flags.emplace_back("clamped");
  return report;
}

}  // namespace hcontrib
