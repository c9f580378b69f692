#include "hcontrib/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <istream>
#include <ostream>
#include <set>
#include <thread>

namespace hcontrib {

using nlohmann::json;

namespace {

ContributionReport evaluate_one(const GenerationRecord& record, const Scorer& scorer, const BatchOptions& options) {
  const double temperature = options.score_at_record_temperature ? record.temperature : 1.0;
  const auto uncond = scorer.score({std::nullopt, record.output, temperature});
  const auto cond = scorer.score({record.human_input, record.output, temperature});
  auto report = build_report(uncond, cond, options.tau, options.report);
  report.record_id = record.id;
  report.group = group_of(record);
  report.model_id = record.model_id;
  report.round = record.round;
  report.null_context = scorer.null_context();
  return report;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

template <typename T>
std::optional<T> optional_field(const json& j, const char* name) {
  const auto it = j.find(name);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

}  // namespace

std::string group_of(const GenerationRecord& record) {
  if (record.extra.is_object()) {
    const auto it = record.extra.find("group");
    if (it != record.extra.end() && it->is_string()) return it->get<std::string>();
  }
  return std::string(to_string(record.mode));
}

BatchResult evaluate_batch(const std::vector<GenerationRecord>& records, const Scorer& scorer,
                           const BatchOptions& options) {
  const std::size_t n = records.size();
  std::vector<std::optional<ContributionReport>> slots(n);
  std::vector<std::optional<RecordFailure>> failed(n);

  std::size_t workers = std::max<std::size_t>(1, scorer.max_concurrency());
  if (options.max_concurrency > 0) workers = std::min(workers, options.max_concurrency);
  workers = std::min(workers, n);

  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i] = evaluate_one(records[i], scorer, options);
      } catch (const Error& e) {
        failed[i] = RecordFailure{records[i].id, e.kind(), e.what()};
      } catch (const std::exception& e) {
        failed[i] = RecordFailure{records[i].id, ErrorKind::ScoringFailed, e.what()};
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }

  BatchResult out;
  for (std::size_t i = 0; i < n; ++i) {
    if (slots[i]) out.reports.push_back(std::move(*slots[i]));
    if (failed[i]) out.failures.push_back(std::move(*failed[i]));
  }
  if (n > 0 && out.reports.empty()) {
    throw Error(ErrorKind::BatchFailed,
                "all " + std::to_string(n) + " records failed; first: " + out.failures.front().message);
  }
  return out;
}

bool ExperimentResult::passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.informational || c.passed; });
}

std::vector<double> ExperimentResult::phis(const std::string& group) const {
  std::vector<double> out;
  for (const auto& r : reports) {
    if (r.group == group && r.phi) out.push_back(*r.phi);
  }
  return out;
}

std::vector<ContributionReport> ExperimentResult::group_reports(const std::string& group) const {
  std::vector<ContributionReport> out;
  std::copy_if(reports.begin(), reports.end(), std::back_inserter(out),
               [&](const ContributionReport& r) { return r.group == group; });
  return out;
}

ExperimentResult make_experiment(std::string name, const BatchResult& batch, const Scorer& scorer,
                                 std::optional<double> tau, const std::vector<std::string>& group_order) {
  ExperimentResult result;
  result.metadata.experiment = std::move(name);
  result.metadata.scorer_id = scorer.id();
  result.metadata.tau = tau;
  result.metadata.null_context = scorer.null_context();
  result.reports = batch.reports;
  result.failures = batch.failures;

  std::set<std::string> seen;
  for (const auto& r : result.reports) {
    if (!seen.insert(r.record_id).second) {
      throw Error(ErrorKind::ValidationError, "duplicate record id '" + r.record_id + "'");
    }
  }
  result.group_order = group_order;
  for (const auto& r : result.reports) {
    if (std::find(result.group_order.begin(), result.group_order.end(), r.group) == result.group_order.end()) {
      result.group_order.push_back(r.group);
    }
  }
  for (const auto& g : result.group_order) {
    const auto values = result.phis(g);
    if (!values.empty()) result.groups.emplace(g, summarize(values));
  }
  return result;
}

TrendResult group_trend(const ExperimentResult& result, const std::vector<std::string>& order) {
  std::vector<LabeledValues> groups;
  for (const auto& g : order) groups.emplace_back(g, result.phis(g));
  return ordering_trend(groups);
}

json to_json(const ContributionReport& r) {
  return json{{"record_id", r.record_id},
              {"group", r.group},
              {"model_id", r.model_id},
              {"round", r.round ? json(*r.round) : json(nullptr)},
              {"null_context", r.null_context},
              {"self_info", r.self_info},
              {"cond_self_info", optional_json(r.cond_self_info)},
              {"mutual_info", optional_json(r.mutual_info)},
              {"phi", optional_json(r.phi)},
              {"phi_min", optional_json(r.phi_min)},
              {"token_count", r.token_count},
              {"tau", optional_json(r.tau)},
              {"plausible", r.plausible ? json(*r.plausible) : json(nullptr)},
              {"scorer_id", r.scorer_id},
              {"flags", r.flags}};
}

ContributionReport report_from_json(const json& j) {
  ContributionReport r;
  try {
    r.record_id = j.at("record_id").get<std::string>();
    r.group = j.value("group", "");
    r.model_id = j.value("model_id", "");
    r.round = optional_field<int>(j, "round");
    r.null_context = j.value("null_context", "");
    r.self_info = j.at("self_info").get<double>();
    r.cond_self_info = optional_field<double>(j, "cond_self_info");
    r.mutual_info = optional_field<double>(j, "mutual_info");
    r.phi = optional_field<double>(j, "phi");
    r.phi_min = optional_field<double>(j, "phi_min");
    r.token_count = j.at("token_count").get<std::size_t>();
    r.tau = optional_field<double>(j, "tau");
    r.plausible = optional_field<bool>(j, "plausible");
    r.scorer_id = j.value("scorer_id", "");
    r.flags = j.value("flags", std::vector<std::string>{});
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("bad report: ") + e.what());
  }
  return r;
}

json to_json(const BoxStats& s) {
  return json{{"count", s.count},
              {"median", s.median},
              {"q1", s.q1},
              {"q3", s.q3},
              {"lower_whisker", s.lower_whisker},
              {"upper_whisker", s.upper_whisker},
              {"outliers", s.outliers}};
}

json to_json(const TokenScores& s) {
  return json{{"tokens", s.tokens},
              {"logprobs", s.logprobs},
              {"offsets", s.offsets},
              {"scorer_id", s.scorer_id},
              {"context_digest", s.context_digest},
              {"temperature", s.temperature}};
}

TokenScores scores_from_json(const json& j) {
  TokenScores s;
  try {
    s.logprobs = j.at("logprobs").get<std::vector<double>>();
    s.tokens = j.at("tokens").get<std::vector<std::string>>();
    if (j.contains("offsets")) {
      s.offsets = j.at("offsets").get<std::vector<std::size_t>>();
    } else {
      std::size_t at = 0;
      for (const auto& t : s.tokens) {
        s.offsets.push_back(at);
        at += t.size();
      }
    }
    s.scorer_id = j.value("scorer_id", "");
    s.context_digest = j.value("context_digest", "");
    s.temperature = j.value("temperature", 1.0);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("bad token scores: ") + e.what());
  }
  validate(s);
  return s;
}

json to_json(const ExperimentResult& result) {
  json groups = json::object();
  for (const auto& [name, stats] : result.groups) groups[name] = to_json(stats);
  json reports = json::array();
  for (const auto& r : result.reports) reports.push_back(to_json(r));
  json failures = json::array();
  for (const auto& f : result.failures) {
    failures.push_back({{"record_id", f.record_id}, {"reason", to_string(f.kind)}, {"message", f.message}});
  }
  json checks = json::array();
  for (const auto& c : result.checks) {
    checks.push_back({{"name", c.name},
                      {"passed", c.passed},
                      {"value", c.value},
                      {"detail", c.detail},
                      {"informational", c.informational}});
  }
  const auto& m = result.metadata;
  return json{{"metadata",
               {{"experiment", m.experiment},
                {"scorer_id", m.scorer_id},
                {"tau", optional_json(m.tau)},
                {"template_version", m.template_version},
                {"null_context", m.null_context},
                {"report_count", result.reports.size()},
                {"failure_count", result.failures.size()}}},
              {"group_order", result.group_order},
              {"groups", groups},
              {"checks", checks},
              {"passed", result.passed()},
              {"failures", failures},
              {"reports", reports}};
}

void write_results(std::ostream& out, const std::vector<ContributionReport>& reports) {
  for (const auto& r : reports) out << to_json(r).dump() << '\n';
}

std::vector<ContributionReport> read_results(std::istream& in) {
  std::vector<ContributionReport> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(report_from_json(json::parse(line)));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::ParseError, e.what());
    }
  }
  return out;
}

std::string format_real(double value) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

void write_box_csv(std::ostream& out, const ExperimentResult& result) {
  out << kBoxCsvHeader << '\n';
  for (const auto& g : result.group_order) {
    const auto it = result.groups.find(g);
    if (it == result.groups.end()) continue;
    const auto& s = it->second;
    // Group labels are plain identifiers in this project; quote anything else.
    const bool quote = g.find_first_of(",\"\n") != std::string::npos;
    std::string label = g;
    if (quote) {
      label.clear();
      for (char c : g) label += c == '"' ? std::string("\"\"") : std::string(1, c);
      label = '"' + label + '"';
    }
    out << label << ',' << s.count << ',' << format_real(s.median) << ',' << format_real(s.q1) << ','
        << format_real(s.q3) << ',' << format_real(s.lower_whisker) << ',' << format_real(s.upper_whisker) << '\n';
  }
}

std::vector<SurrogateCell> surrogate_matrix(
    const std::vector<std::pair<std::string, std::vector<GenerationRecord>>>& records_by_generator,
    const std::vector<const Scorer*>& scorers, const std::vector<std::string>& group_order,
    const BatchOptions& options) {
  std::vector<SurrogateCell> cells;
  for (const Scorer* scorer : scorers) {
    for (const auto& [generator, records] : records_by_generator) {
      SurrogateCell cell;
      cell.scorer_id = scorer->id();
      cell.generator_id = generator;
      try {
        auto result = make_experiment("surrogate:" + cell.scorer_id + "<-" + generator,
                                      evaluate_batch(records, *scorer, options), *scorer, options.tau, group_order);
        if (group_order.size() >= 2) cell.trend = group_trend(result, group_order);
        cell.result = std::move(result);
      } catch (const std::exception& e) {
        cell.error = e.what();
      }
      cells.push_back(std::move(cell));
    }
  }
  return cells;
}

}  // namespace hcontrib
