#include "hcontrib/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "hcontrib/corpus.hpp"
#include "hcontrib/error.hpp"

namespace hcontrib {

namespace {

double median_of_sorted(const std::vector<double>& v, std::size_t first, std::size_t last) {
  const std::size_t n = last - first;
  const std::size_t mid = first + n / 2;
  return n % 2 == 1 ? v[mid] : (v[mid - 1] + v[mid]) / 2.0;
}

}  // namespace

BoxStats summarize(std::span<const double> values) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "summarize needs at least one value");
  std::vector<double> v(values.begin(), values.end());
  if (std::any_of(v.begin(), v.end(), [](double x) { return std::isnan(x); })) {
    throw Error(ErrorKind::InvalidArgument, "summarize received NaN");
  }
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();

  BoxStats s;
  s.count = n;
  s.median = median_of_sorted(v, 0, n);
  // Tukey hinges: for odd n the median belongs to both halves.
  const std::size_t half = (n + 1) / 2;
  s.q1 = median_of_sorted(v, 0, half);
  s.q3 = median_of_sorted(v, n - half, n);

  const double iqr = s.q3 - s.q1;
  const double lo = s.q1 - 1.5 * iqr;
  const double hi = s.q3 + 1.5 * iqr;
  s.lower_whisker = *std::find_if(v.begin(), v.end(), [&](double x) { return x >= lo; });
  s.upper_whisker = *std::find_if(v.rbegin(), v.rend(), [&](double x) { return x <= hi; });
  for (double x : v) {
    if (x < lo || x > hi) s.outliers.push_back(x);
  }
  return s;
}

TrendResult ordering_trend(const std::vector<LabeledValues>& groups) {
  if (groups.size() < 2) throw Error(ErrorKind::InvalidArgument, "ordering_trend needs at least two groups");
  TrendResult t;
  for (const auto& [label, values] : groups) {
    if (values.empty()) throw Error(ErrorKind::EmptyInput, "group '" + label + "' is empty");
    t.medians.push_back(summarize(values).median);
  }
  t.margin = t.medians[0] - t.medians[1];
  for (std::size_t i = 1; i + 1 < t.medians.size(); ++i) t.margin = std::min(t.margin, t.medians[i] - t.medians[i + 1]);
  t.decreasing = t.margin > 0.0;
  return t;
}

std::string family_id(std::string_view record_id) {
  const auto pos = record_id.rfind('/');
  return std::string(pos == std::string_view::npos ? record_id : record_id.substr(0, pos));
}

PairwiseResult pairwise_consistency(const std::vector<ContributionReport>& a,
                                    const std::vector<ContributionReport>& b, ExpectedOrder expected,
                                    double gap_threshold) {
  if (!(gap_threshold >= 0.0)) throw Error(ErrorKind::InvalidArgument, "gap threshold must be non-negative");
  std::map<std::string, const ContributionReport*> by_family;
  for (const auto& r : b) {
    if (r.phi) by_family[family_id(r.record_id)] = &r;
  }
  PairwiseResult out;
  bool mixed_null_context = false;
  for (const auto& ra : a) {
    if (!ra.phi) continue;
    const auto it = by_family.find(family_id(ra.record_id));
    if (it == by_family.end()) continue;
    const auto& rb = *it->second;
    ++out.paired;
    if (ra.null_context != rb.null_context) mixed_null_context = true;
    const double diff = *ra.phi - *rb.phi;
    if (!(std::abs(diff) > gap_threshold)) continue;
    ++out.qualifying;
    if ((diff > 0.0) == (expected == ExpectedOrder::AGreater)) ++out.agreeing;
  }
  if (mixed_null_context) out.warning = "paired reports were scored with different null contexts";
  if (out.qualifying == 0) throw Error(ErrorKind::NoQualifyingPairs, "no pair exceeds the gap threshold");
  out.fraction = static_cast<double>(out.agreeing) / static_cast<double>(out.qualifying);
  return out;
}

PairwiseResult pool(const std::vector<PairwiseResult>& parts) {
  PairwiseResult out;
  for (const auto& p : parts) {
    out.agreeing += p.agreeing;
    out.qualifying += p.qualifying;
    out.paired += p.paired;
    if (p.warning) out.warning = p.warning;
  }
  if (out.qualifying == 0) throw Error(ErrorKind::NoQualifyingPairs, "no pair exceeds the gap threshold");
  out.fraction = static_cast<double>(out.agreeing) / static_cast<double>(out.qualifying);
  return out;
}

std::vector<double> multi_round_reduction(const std::vector<ContributionReport>& reports) {
  std::map<std::string, std::map<int, double>> chains;
  for (const auto& r : reports) {
    const auto id = chain_id(r.record_id);
    if (!r.phi) throw Error(ErrorKind::ChainError, id + ": report has no contribution value");
    const int round = r.round.value_or(1);
    if (!chains[id].emplace(round, *r.phi).second) {
      throw Error(ErrorKind::ChainError, id + ": round " + std::to_string(round) + " appears twice");
    }
  }
  std::vector<std::size_t> reduced;
  std::vector<std::size_t> total;
  for (const auto& [id, rounds] : chains) {
    int expect = 1;
    for (const auto& [round, phi] : rounds) {
      if (round != expect++) throw Error(ErrorKind::ChainError, id + ": rounds are not consecutive from 1");
    }
    for (std::size_t k = 1; k < rounds.size(); ++k) {
      if (total.size() < k) {
        total.resize(k, 0);
        reduced.resize(k, 0);
      }
      ++total[k - 1];
      if (rounds.at(static_cast<int>(k) + 1) < rounds.at(static_cast<int>(k))) ++reduced[k - 1];
    }
  }
  std::vector<double> out;
  for (std::size_t k = 0; k < total.size(); ++k) {
    out.push_back(static_cast<double>(reduced[k]) / static_cast<double>(total[k]));
  }
  return out;
}

double percentile(std::vector<double> values, double p) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "percentile of an empty list");
  if (!(p >= 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidArgument, "percentile rank must be in [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = p * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

double calibrate_tau(std::span<const double> geometric_means, double percentile_rank) {
  if (geometric_means.empty()) throw Error(ErrorKind::EmptyInput, "no calibration records");
  if (!(percentile_rank > 0.0 && percentile_rank < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "calibration percentile must be in (0, 1)");
  }
  return percentile({geometric_means.begin(), geometric_means.end()}, percentile_rank);
}

double calibrate_tau(const std::vector<ContributionReport>& cond_reports, double percentile_rank) {
  std::vector<double> means;
  means.reserve(cond_reports.size());
  for (const auto& r : cond_reports) {
    if (!r.cond_self_info || r.token_count == 0) {
      throw Error(ErrorKind::InvalidArgument, r.record_id + ": calibration needs conditional scores");
    }
    means.push_back(std::exp(-*r.cond_self_info / static_cast<double>(r.token_count)));
  }
  return calibrate_tau(means, percentile_rank);
}

}  // namespace hcontrib
