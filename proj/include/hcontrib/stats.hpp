#pragma once
// Distribution summaries and ordering checks over contribution reports.

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "hcontrib/info.hpp"

namespace hcontrib {

/// Box-plot statistics with Tukey hinges and 1.5 IQR whiskers.
struct BoxStats {
  std::size_t count = 0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  double lower_whisker = 0.0;
  double upper_whisker = 0.0;
  std::vector<double> outliers;  // ascending
};

/// Throws EmptyInput for an empty list and InvalidArgument for NaN values.
BoxStats summarize(std::span<const double> values);

struct TrendResult {
  bool decreasing = false;
  double margin = 0.0;  // smallest adjacent median gap; negative when the order breaks
  std::vector<double> medians;
};

using LabeledValues = std::pair<std::string, std::vector<double>>;

/// Whether group medians strictly decrease in the given order.
TrendResult ordering_trend(const std::vector<LabeledValues>& groups);

/// Family of a synthetic or paired record id: everything before the last '/'.
std::string family_id(std::string_view record_id);

enum class ExpectedOrder { AGreater, BGreater };

struct PairwiseResult {
  double fraction = 0.0;
  std::size_t agreeing = 0;
  std::size_t qualifying = 0;
  std::size_t paired = 0;
  std::optional<std::string> warning;
};

inline constexpr double kDefaultGapThreshold = 0.1;

/// Reports are paired by family id. Among pairs whose phi gap exceeds the
/// threshold, the fraction ordered as expected. Throws NoQualifyingPairs when
/// no pair qualifies.
PairwiseResult pairwise_consistency(const std::vector<ContributionReport>& a,
                                    const std::vector<ContributionReport>& b, ExpectedOrder expected,
                                    double gap_threshold = kDefaultGapThreshold);

/// Adds the counts of several comparisons; throws NoQualifyingPairs when the total is zero.
PairwiseResult pool(const std::vector<PairwiseResult>& parts);

/// Chains are keyed by chain id; element r is the fraction of chains with
/// phi(r + 2) < phi(r + 1) among chains reaching round r + 2.
/// Throws ChainError naming the chain when rounds are missing or repeated.
std::vector<double> multi_round_reduction(const std::vector<ContributionReport>& reports);

/// Linear-interpolated percentile of unsorted values, p in [0, 1].
double percentile(std::vector<double> values, double p);

inline constexpr double kDefaultCalibrationPercentile = 0.05;

/// tau as a low percentile of per-record geometric-mean token probabilities.
double calibrate_tau(std::span<const double> geometric_means,
                     double percentile_rank = kDefaultCalibrationPercentile);
/// Same, with each geometric mean taken from a report's conditional self-information.
double calibrate_tau(const std::vector<ContributionReport>& cond_reports,
                     double percentile_rank = kDefaultCalibrationPercentile);

}  // namespace hcontrib
