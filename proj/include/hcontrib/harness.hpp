#pragma once
// Batch scoring of generation records and the experiment result container.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hcontrib/corpus.hpp"
#include "hcontrib/error.hpp"
#include "hcontrib/info.hpp"
#include "hcontrib/scorer.hpp"
#include "hcontrib/stats.hpp"

namespace hcontrib {

struct BatchOptions {
  std::optional<double> tau;
  /// 0 uses the scorer's own limit.
  std::size_t max_concurrency = 0;
  /// Score at each record's temperature instead of 1.
  bool score_at_record_temperature = false;
  ReportOptions report;
};

struct RecordFailure {
  std::string record_id;
  ErrorKind kind = ErrorKind::ScoringFailed;
  std::string message;
};

struct BatchResult {
  std::vector<ContributionReport> reports;  // input order, failed records omitted
  std::vector<RecordFailure> failures;      // input order
};

/// Group label of a record: a string "group" extra field when present, else the mode name.
std::string group_of(const GenerationRecord& record);

/// Scores every output unconditionally and given its human input. Records are
/// fanned out to worker threads; the result does not depend on completion order.
/// Throws BatchFailed when the input is nonempty and every record failed.
BatchResult evaluate_batch(const std::vector<GenerationRecord>& records, const Scorer& scorer,
                           const BatchOptions& options = {});

struct Check {
  std::string name;
  bool passed = false;
  double value = 0.0;
  std::string detail;
  /// Reported for context; does not affect the experiment verdict.
  bool informational = false;
};

struct ExperimentMetadata {
  std::string experiment;
  std::string scorer_id;
  std::optional<double> tau;
  std::string template_version{kTemplateVersion};
  std::string null_context;
};

struct ExperimentResult {
  ExperimentMetadata metadata;
  std::vector<std::string> group_order;
  std::map<std::string, BoxStats> groups;  // phi per group
  std::vector<ContributionReport> reports;
  std::vector<RecordFailure> failures;
  std::vector<Check> checks;

  /// All non-informational checks passed.
  bool passed() const;
  /// phi values of one group, in report order.
  std::vector<double> phis(const std::string& group) const;
  /// Reports of one group, in report order.
  std::vector<ContributionReport> group_reports(const std::string& group) const;
};

/// Builds box statistics per group. Groups are listed in `group_order` first,
/// then any others in order of first appearance. Throws ValidationError on
/// duplicate record ids.
ExperimentResult make_experiment(std::string name, const BatchResult& batch, const Scorer& scorer,
                                 std::optional<double> tau, const std::vector<std::string>& group_order = {});

/// ordering_trend over the named groups' phi values.
TrendResult group_trend(const ExperimentResult& result, const std::vector<std::string>& order);

nlohmann::json to_json(const ContributionReport& report);
ContributionReport report_from_json(const nlohmann::json& j);
nlohmann::json to_json(const BoxStats& stats);
nlohmann::json to_json(const TokenScores& scores);
/// Offsets may be omitted; they are then rebuilt from the token lengths.
TokenScores scores_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentResult& result);

/// One report per line.
void write_results(std::ostream& out, const std::vector<ContributionReport>& reports);
std::vector<ContributionReport> read_results(std::istream& in);

inline constexpr const char* kBoxCsvHeader = "group,count,median,q1,q3,lower_whisker,upper_whisker";
void write_box_csv(std::ostream& out, const ExperimentResult& result);

/// Shortest decimal text that reads back to the same double.
std::string format_real(double value);

struct SurrogateCell {
  std::string scorer_id;
  std::string generator_id;
  std::optional<ExperimentResult> result;
  std::optional<TrendResult> trend;
  std::optional<std::string> error;
};

/// Scores each generator's records with each scorer. Cell failures are
/// recorded in the cell and do not stop the grid.
std::vector<SurrogateCell> surrogate_matrix(
    const std::vector<std::pair<std::string, std::vector<GenerationRecord>>>& records_by_generator,
    const std::vector<const Scorer*>& scorers, const std::vector<std::string>& group_order,
    const BatchOptions& options = {});

}  // namespace hcontrib
