#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>

#include "hcontrib/corpus.hpp"
#include "hcontrib/error.hpp"
#include "hcontrib/harness.hpp"
#include "hcontrib/reference_lm.hpp"
#include "hcontrib/remote.hpp"
#include "hcontrib/synth.hpp"

namespace hcontrib::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CliConfig {
  std::string backend = "reference";
  // reference backend
  std::string corpus;
  std::string lm;
  std::optional<double> lambda;
  std::optional<double> alpha;
  std::optional<double> copy_alpha;
  // remote backend
  std::string endpoint;
  std::string model;
  std::string null_context;
  std::size_t max_concurrency = 0;

  double tau = kTauLlama;
  double temperature = 1.0;
  std::uint64_t seed = 1;
  std::string format = "json";
};

void add_common(CLI::App& app, CliConfig& c) {
  app.add_option("--backend", c.backend, "Scoring backend")
      ->check(CLI::IsMember({"reference", "remote"}))
      ->capture_default_str();
  app.add_option("--corpus", c.corpus, "Text corpus for the reference backend");
  app.add_option("--lm", c.lm, "Saved reference model (from build-lm)");
  app.add_option("--lambda", c.lambda, "Copy weight of the reference model");
  app.add_option("--alpha", c.alpha, "Bigram smoothing of the reference model");
  app.add_option("--copy-alpha", c.copy_alpha, "Copy smoothing of the reference model");
  app.add_option("--endpoint", c.endpoint, "Base URL of a completions endpoint");
  app.add_option("--model", c.model, "Remote model name");
  app.add_option("--null-context", c.null_context, "Preamble used for unconditional remote scoring");
  app.add_option("--max-concurrency", c.max_concurrency, "Upper bound on concurrent scoring calls");
  app.add_option("--tau", c.tau, "Plausibility threshold")->capture_default_str();
  app.add_option("--seed", c.seed, "Random seed")->capture_default_str();
  app.add_option("--format", c.format, "Output format")->check(CLI::IsMember({"json", "csv"}))->capture_default_str();
}

void check_config(const CliConfig& c) {
  if (!(c.tau > 0.0 && c.tau <= 1.0)) throw UsageError("--tau must be in (0, 1]");
  if (c.backend == "reference") {
    if (c.corpus.empty() == c.lm.empty()) throw UsageError("the reference backend needs exactly one of --corpus, --lm");
    if (!c.null_context.empty()) throw UsageError("--null-context applies to the remote backend only");
  } else {
    if (c.endpoint.empty() || c.model.empty()) throw UsageError("the remote backend needs --endpoint and --model");
  }
}

ReferenceLMConfig lm_config(const CliConfig& c, ReferenceLMConfig base) {
  if (c.lambda) base.copy_lambda = *c.lambda;
  if (c.alpha) base.laplace_alpha = *c.alpha;
  if (c.copy_alpha) base.copy_alpha = *c.copy_alpha;
  return base;
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

ReferenceLM load_reference(const CliConfig& c, const std::string& corpus, const std::string& lm) {
  if (!lm.empty()) {
    auto model = ReferenceLM::load_file(lm);
    return model.with_config(lm_config(c, model.config()));
  }
  return ReferenceLM::build_file(corpus, lm_config(c, synthetic_lm_config(stem_of(corpus))));
}

std::unique_ptr<Scorer> make_scorer(const CliConfig& c) {
  check_config(c);
  if (c.backend == "reference") return std::make_unique<ReferenceLM>(load_reference(c, c.corpus, c.lm));
  EndpointConfig e;
  e.base_url = c.endpoint;
  e.model_name = c.model;
  e.null_context = c.null_context;
  if (c.max_concurrency > 0) e.max_concurrency = c.max_concurrency;
  return std::make_unique<RemoteScorer>(e);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path);
  return out;
}

std::string cell(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

void print_report(std::ostream& out, const ContributionReport& r, const std::string& format) {
  if (format == "csv") {
    out << kReportCsvHeader << '\n'
        << csv_text(r.record_id) << ',' << csv_text(r.group) << ',' << csv_text(r.model_id) << ','
        << csv_text(r.scorer_id) << ',' << r.token_count << ',' << format_real(r.self_info) << ','
        << cell(r.cond_self_info) << ',' << cell(r.mutual_info) << ',' << cell(r.phi) << ',' << cell(r.phi_min)
        << ',' << cell(r.tau) << ',' << (r.plausible ? (*r.plausible ? "true" : "false") : "") << '\n';
  } else {
    out << to_json(r).dump(2) << '\n';
  }
}

void print_checks(std::ostream& out, const std::string& name, const std::vector<Check>& checks, bool passed,
                  const std::string& format) {
  if (format == "csv") {
    out << "check,passed,value,informational\n";
    for (const auto& c : checks) {
      out << csv_text(c.name) << ',' << (c.passed ? "true" : "false") << ',' << format_real(c.value) << ','
          << (c.informational ? "true" : "false") << '\n';
    }
    return;
  }
  json list = json::array();
  for (const auto& c : checks) {
    list.push_back({{"name", c.name},
                    {"passed", c.passed},
                    {"value", c.value},
                    {"detail", c.detail},
                    {"informational", c.informational}});
  }
  out << json{{"experiment", name}, {"passed", passed}, {"checks", list}}.dump(2) << '\n';
}

struct Paths {
  std::string input;
  std::string output;
  std::string scores;
  std::string dataset;
  std::string results;
  std::string report;
  std::string box_csv;
  std::string corpus_b;
  std::string experiment;
  std::size_t n = 200;
  std::string name = "reference";
};

int cmd_measure(const CliConfig& c, const Paths& p, std::ostream& out) {
  const auto input = read_file(p.input);
  const auto output = read_file(p.output);
  const auto scorer = make_scorer(c);
  const auto uncond = scorer->score({std::nullopt, output, c.temperature});
  const auto cond = scorer->score({input, output, c.temperature});
  auto report = build_report(uncond, cond, c.tau);
  report.record_id = fs::path(p.output).filename().string();
  report.null_context = scorer->null_context();
  print_report(out, report, c.format);
  return kExitOk;
}

int cmd_estimate(const CliConfig& c, const Paths& p, std::ostream& out) {
  if (p.output.empty() == p.scores.empty()) throw UsageError("estimate needs exactly one of --output, --scores");
  TokenScores uncond;
  std::string id;
  std::string null_context;
  if (!p.scores.empty()) {
    try {
      uncond = scores_from_json(json::parse(read_file(p.scores)));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::ParseError, e.what());
    }
    id = fs::path(p.scores).filename().string();
  } else {
    const auto output = read_file(p.output);
    const auto scorer = make_scorer(c);
    uncond = scorer->score({std::nullopt, output, c.temperature});
    id = fs::path(p.output).filename().string();
    null_context = scorer->null_context();
  }
  auto report = build_report(uncond, std::nullopt, c.tau);
  report.record_id = id;
  report.null_context = null_context;
  print_report(out, report, c.format);
  return kExitOk;
}

void write_outputs(const ExperimentResult& result, const Paths& p) {
  if (!p.results.empty()) {
    auto f = open_out(p.results);
    write_results(f, result.reports);
  }
  if (!p.report.empty()) {
    auto f = open_out(p.report);
    f << to_json(result).dump(2) << '\n';
  }
  if (!p.box_csv.empty()) {
    auto f = open_out(p.box_csv);
    write_box_csv(f, result);
  }
}

int cmd_batch(const CliConfig& c, const Paths& p, std::ostream& out) {
  const auto records = load_records(p.dataset);
  const auto scorer = make_scorer(c);
  BatchOptions opts;
  opts.tau = c.tau;
  opts.max_concurrency = c.max_concurrency;
  const auto result = make_experiment("batch", evaluate_batch(records, *scorer, opts), *scorer, c.tau);
  write_outputs(result, p);
  if (c.format == "csv") {
    out << "records,scored,failed\n"
        << records.size() << ',' << result.reports.size() << ',' << result.failures.size() << '\n';
  } else {
    out << json{{"records", records.size()}, {"scored", result.reports.size()}, {"failed", result.failures.size()}}
               .dump()
        << '\n';
  }
  return kExitOk;
}

int cmd_synth(const CliConfig& c, const Paths& p, std::ostream& out) {
  if (c.backend != "reference") throw UsageError("synth runs on the reference backend");
  check_config(c);
  SynthOptions opts;
  opts.n = p.n;
  opts.seed = c.seed;
  opts.tau = c.tau;
  opts.max_concurrency = c.max_concurrency;
  const auto lm = load_reference(c, c.corpus, c.lm);

  if (p.experiment == "surrogate") {
    if (p.corpus_b.empty()) throw UsageError("the surrogate experiment needs --corpus-b");
    const auto other = load_reference(c, p.corpus_b, "");
    const auto outcome = run_surrogate(lm, other, opts);
    json cells = json::array();
    std::vector<ContributionReport> reports;
    for (const auto& cell : outcome.cells) {
      json j{{"scorer_id", cell.scorer_id}, {"generator_id", cell.generator_id}};
      if (cell.result) {
        j["result"] = to_json(*cell.result);
        reports.insert(reports.end(), cell.result->reports.begin(), cell.result->reports.end());
      }
      if (cell.error) j["error"] = *cell.error;
      cells.push_back(std::move(j));
    }
    if (!p.results.empty()) {
      auto f = open_out(p.results);
      write_results(f, reports);
    }
    if (!p.report.empty()) {
      auto f = open_out(p.report);
      f << json{{"experiment", "surrogate"}, {"passed", outcome.passed()}, {"cells", cells}}.dump(2) << '\n';
    }
    print_checks(out, "surrogate", outcome.checks, outcome.passed(), c.format);
    return kExitOk;
  }

  const auto experiment = parse_experiment(p.experiment);
  if (!experiment) throw UsageError("unknown experiment '" + p.experiment + "'");
  const auto result = run_experiment(*experiment, lm, opts);
  write_outputs(result, p);
  print_checks(out, p.experiment, result.checks, result.passed(), c.format);
  return kExitOk;
}

int cmd_build_lm(const CliConfig& c, const Paths& p, std::ostream& out) {
  if (c.corpus.empty()) throw UsageError("build-lm needs --corpus");
  auto config = lm_config(c, synthetic_lm_config(p.name));
  const auto lm = ReferenceLM::build_file(c.corpus, config);
  lm.save_file(p.output);
  out << json{{"name", lm.id()}, {"vocab_size", lm.vocab_size()}, {"tokens", lm.total_tokens()}}.dump() << '\n';
  return kExitOk;
}

bool is_usage_kind(ErrorKind k) {
  switch (k) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::InvalidThreshold:
    case ErrorKind::InvalidRange:
    case ErrorKind::ParseError:
    case ErrorKind::ValidationError:
    case ErrorKind::MissingLevel:
    case ErrorKind::InvalidAttack:
    case ErrorKind::ModelFormat:
    case ErrorKind::EmptyCorpus:
    case ErrorKind::Io:
      return true;
    default:
      return false;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Human contribution measurement for AI-assisted text", "hcontrib"};
  app.require_subcommand(1);
  CliConfig config;
  Paths paths;

  auto* measure = app.add_subcommand("measure", "Contribution of an input to an output");
  add_common(*measure, config);
  measure->add_option("--input", paths.input, "Human input text file")->required();
  measure->add_option("--output", paths.output, "AI-assisted output text file")->required();
  measure->add_option("--temperature", config.temperature, "Scoring temperature")->capture_default_str();

  auto* estimate = app.add_subcommand("estimate", "Minimal contribution of an output alone");
  add_common(*estimate, config);
  estimate->add_option("--output", paths.output, "Output text file");
  estimate->add_option("--scores", paths.scores, "Precomputed token scores (JSON)");
  estimate->add_option("--temperature", config.temperature, "Scoring temperature")->capture_default_str();

  auto* batch = app.add_subcommand("batch", "Score a JSONL dataset of generation records");
  add_common(*batch, config);
  batch->add_option("--dataset", paths.dataset, "Records (JSONL)")->required();
  batch->add_option("--out", paths.results, "Results file (JSONL)")->required();
  batch->add_option("--report", paths.report, "Report file (JSON)")->required();
  batch->add_option("--box-csv", paths.box_csv, "Per-group box statistics (CSV)");

  auto* synth = app.add_subcommand("synth", "Run a synthetic experiment on the reference model");
  add_common(*synth, config);
  synth->add_option("--experiment", paths.experiment, "Experiment")
      ->required()
      ->check(CLI::IsMember({"levels", "length", "temperature", "rounds", "attacks", "surrogate"}));
  synth->add_option("--n", paths.n, "Families per experiment")->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--corpus-b", paths.corpus_b, "Second corpus for the surrogate experiment");
  synth->add_option("--out", paths.results, "Results file (JSONL)");
  synth->add_option("--report", paths.report, "Report file (JSON)");
  synth->add_option("--box-csv", paths.box_csv, "Per-group box statistics (CSV)");

  auto* build = app.add_subcommand("build-lm", "Build and save a reference model from a corpus");
  build->add_option("--corpus", config.corpus, "Text corpus")->required();
  build->add_option("--out", paths.output, "Model file")->required();
  build->add_option("--name", paths.name, "Model name")->capture_default_str();
  build->add_option("--lambda", config.lambda, "Copy weight");
  build->add_option("--alpha", config.alpha, "Bigram smoothing");
  build->add_option("--copy-alpha", config.copy_alpha, "Copy smoothing");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    if (auto* sub = app.get_subcommands().empty() ? nullptr : app.get_subcommands().front()) {
      err << "run 'hcontrib " << sub->get_name() << " --help' for usage\n";
    }
    return kExitUsage;
  }

  try {
    if (measure->parsed()) return cmd_measure(config, paths, out);
    if (estimate->parsed()) return cmd_estimate(config, paths, out);
    if (batch->parsed()) return cmd_batch(config, paths, out);
    if (synth->parsed()) return cmd_synth(config, paths, out);
    if (build->parsed()) return cmd_build_lm(config, paths, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_usage_kind(e.kind()) ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace hcontrib::cli
