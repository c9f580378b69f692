#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "echo_server.hpp"
#include "hcontrib/corpus.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kCorpus = HCONTRIB_DATA_DIR "/corpus_garden.txt";

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = hcontrib::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("hcontrib_cli_" + std::to_string(counter()++))) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name, const std::string& content) const {
    const auto p = path_ / name;
    std::ofstream(p, std::ios::binary) << content;
    return p.string();
  }
  std::string path(const std::string& name) const { return (path_ / name).string(); }

 private:
  static int& counter() {
    static int n = 0;
    return n;
  }
  fs::path path_;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dataset_text(bool with_failure) {
  std::vector<hcontrib::GenerationRecord> recs;
  const char* outputs[] = {"the roses open in the warm sun", "cold rain falls on the garden wall",
                           "the gardener plants beans near the stone wall"};
  for (int i = 0; i < 3; ++i) {
    hcontrib::GenerationRecord r;
    r.id = "d" + std::to_string(i);
    r.human_input = "Write about the garden in spring.";
    r.output = outputs[i];
    r.model_id = "fixture";
    r.temperature = 0.7;
    recs.push_back(r);
  }
  if (with_failure) recs[1].output = "   ";
  std::ostringstream out;
  hcontrib::write_records(out, recs);
  return out.str();
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("usage errors exit 1") {
  CHECK(cli({}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  CHECK(cli({"measure", "--input", "/nonexistent/in.txt", "--output", "/nonexistent/out.txt", "--corpus", kCorpus})
            .code == 1);
  TempDir dir;
  const auto f = dir.file("t.txt", "the rose");
  CHECK(cli({"measure", "--input", f, "--output", f}).code == 1);  // no model source
  CHECK(cli({"measure", "--input", f, "--output", f, "--corpus", kCorpus, "--tau", "1.5"}).code == 1);
  CHECK(cli({"measure", "--input", f, "--output", f, "--corpus", kCorpus, "--format", "xml"}).code == 1);
  CHECK(cli({"synth", "--experiment", "levels", "--n", "0", "--corpus", kCorpus}).code == 1);
  const auto help = cli({"--help"});
  CHECK(help.code == 0);
  CHECK(help.out.find("measure") != std::string::npos);
}

TEST_CASE("measure") {
  TempDir dir;
  const auto in = dir.file("in.txt", "the roses and the beans");
  const auto out = dir.file("out.txt", "the gardener waters the roses and the beans");
  const auto run = cli({"measure", "--input", in, "--output", out, "--corpus", kCorpus});
  REQUIRE(run.code == 0);
  const auto j = json::parse(run.out);
  CHECK(j["phi"].get<double>() > 0.0);
  CHECK(j["tau"] == 0.65);
  CHECK(j["token_count"] == 8);
  CHECK(j["scorer_id"] == "corpus_garden");

  const auto csv = cli({"measure", "--input", in, "--output", out, "--corpus", kCorpus, "--format", "csv"});
  REQUIRE(csv.code == 0);
  std::istringstream lines(csv.out);
  std::string header, row, extra;
  std::getline(lines, header);
  std::getline(lines, row);
  CHECK(header == hcontrib::cli::kReportCsvHeader);
  CHECK(row.rfind("out.txt,", 0) == 0);
  CHECK_FALSE(std::getline(lines, extra));
}

TEST_CASE("measure: echoed text approaches phi = 1 under a pointer-like copy law") {
  TempDir dir;
  std::string text;
  for (int i = 0; i < 20; ++i) text += "zq xv ";
  const auto f = dir.file("echo.txt", text);
  const auto run = cli({"measure", "--input", f, "--output", f, "--corpus", kCorpus, "--lambda", "0.95",
                        "--copy-alpha", "0.01"});
  REQUIRE(run.code == 0);
  CHECK(json::parse(run.out)["phi"].get<double>() >= 0.9);
}

TEST_CASE("estimate") {
  TempDir dir;
  json fixture;
  for (int i = 0; i < 50; ++i) {
    fixture["tokens"].push_back(i == 0 ? "w" : " w");
    fixture["logprobs"].push_back(-2.0);
  }
  const auto scores = dir.file("scores.json", fixture.dump());
  const auto run = cli({"estimate", "--scores", scores, "--tau", "0.65"});
  REQUIRE(run.code == 0);
  const auto j = json::parse(run.out);
  CHECK(std::abs(j["phi_min"].get<double>() - 0.784608) < 1e-6);
  CHECK(j["self_info"] == 100.0);
  CHECK(j["token_count"] == 50);

  const auto text = dir.file("y.txt", "the gardener waters the roses");
  const auto one = cli({"estimate", "--output", text, "--corpus", kCorpus, "--tau", "1"});
  REQUIRE(one.code == 0);
  CHECK(json::parse(one.out)["phi_min"] == 1.0);
  // Mean token probability under this model is far below 0.65.
  const auto pos = cli({"estimate", "--output", text, "--corpus", kCorpus});
  CHECK(json::parse(pos.out)["phi_min"].get<double>() > 0.0);

  CHECK(cli({"estimate", "--corpus", kCorpus}).code == 1);
  CHECK(cli({"estimate", "--scores", dir.file("bad.json", "{not json")}).code == 1);
  const auto degenerate = dir.file("zero.json", R"({"tokens":["a"],"logprobs":[0.0]})");
  CHECK(cli({"estimate", "--scores", degenerate}).code == 2);
}

TEST_CASE("batch") {
  TempDir dir;
  const auto empty = dir.file("empty.jsonl", "");
  auto run = cli({"batch", "--dataset", empty, "--out", dir.path("e.jsonl"), "--report", dir.path("e.json"),
                  "--corpus", kCorpus});
  CHECK(run.code == 0);
  CHECK(slurp(dir.path("e.jsonl")).empty());
  CHECK(json::parse(run.out)["records"] == 0);

  const auto data = dir.file("d.jsonl", dataset_text(false));
  for (const char* tag : {"1", "2"}) {
    run = cli({"batch", "--dataset", data, "--out", dir.path(std::string("r") + tag + ".jsonl"), "--report",
               dir.path(std::string("r") + tag + ".json"), "--box-csv", dir.path(std::string("b") + tag + ".csv"),
               "--corpus", kCorpus});
    REQUIRE(run.code == 0);
  }
  CHECK(slurp(dir.path("r1.jsonl")) == slurp(dir.path("r2.jsonl")));
  CHECK(slurp(dir.path("r1.json")) == slurp(dir.path("r2.json")));
  CHECK(slurp(dir.path("b1.csv")).rfind("group,count,median,q1,q3,lower_whisker,upper_whisker\n", 0) == 0);
  const auto report = json::parse(slurp(dir.path("r1.json")));
  CHECK(report["metadata"]["template_version"] == "v1");
  CHECK(report["reports"].size() == 3);

  const auto partial = dir.file("p.jsonl", dataset_text(true));
  run = cli({"batch", "--dataset", partial, "--out", dir.path("p.jsonl.out"), "--report", dir.path("p.json"),
             "--corpus", kCorpus, "--format", "csv"});
  CHECK(run.code == 0);
  CHECK(run.out == "records,scored,failed\n3,2,1\n");

  std::string all_bad;
  for (int i = 0; i < 2; ++i) all_bad += R"({"id":"b)" + std::to_string(i) +
                                         R"(","domain":"news","mode":"freeform","human_input":"x","output":"  ","model_id":"m","temperature":1})" "\n";
  run = cli({"batch", "--dataset", dir.file("bad.jsonl", all_bad), "--out", dir.path("x.jsonl"), "--report",
             dir.path("x.json"), "--corpus", kCorpus});
  CHECK(run.code == 2);
  CHECK(run.err.find("BatchFailed") != std::string::npos);

  run = cli({"batch", "--dataset", dir.file("broken.jsonl", "{\"id\":1}\n"), "--out", dir.path("y.jsonl"),
             "--report", dir.path("y.json"), "--corpus", kCorpus});
  CHECK(run.code == 1);
  CHECK(run.err.find("line 1") != std::string::npos);
}

TEST_CASE("build-lm and reuse") {
  TempDir dir;
  const auto model = dir.path("garden.lm");
  auto run = cli({"build-lm", "--corpus", kCorpus, "--out", model, "--name", "garden"});
  REQUIRE(run.code == 0);
  CHECK(json::parse(run.out)["name"] == "garden");
  const auto in = dir.file("in.txt", "roses and beans");
  const auto out = dir.file("out.txt", "the roses and the beans grow");
  const auto a = cli({"measure", "--input", in, "--output", out, "--lm", model});
  const auto b = cli({"measure", "--input", in, "--output", out, "--corpus", kCorpus});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(json::parse(a.out)["phi"] == json::parse(b.out)["phi"]);
  CHECK(cli({"measure", "--input", in, "--output", out, "--lm", model, "--corpus", kCorpus}).code == 1);
}

TEST_CASE("synth") {
  TempDir dir;
  const std::vector<std::string> args{"synth", "--experiment", "levels", "--n", "10", "--seed", "3",
                                      "--corpus", kCorpus};
  auto with_files = [&](const std::string& tag) {
    auto a = args;
    a.insert(a.end(), {"--out", dir.path(tag + ".jsonl"), "--report", dir.path(tag + ".json")});
    return cli(a);
  };
  const auto first = with_files("a");
  const auto second = with_files("b");
  REQUIRE(first.code == 0);
  CHECK(first.out == second.out);
  CHECK(slurp(dir.path("a.jsonl")) == slurp(dir.path("b.jsonl")));
  CHECK(slurp(dir.path("a.json")) == slurp(dir.path("b.json")));
  const auto verdict = json::parse(first.out);
  CHECK(verdict["experiment"] == "levels");
  CHECK(verdict["checks"].size() >= 3);

  CHECK(cli({"synth", "--experiment", "surrogate", "--n", "2", "--corpus", kCorpus}).code == 1);
  const auto sur = cli({"synth", "--experiment", "surrogate", "--n", "4", "--corpus", kCorpus, "--corpus-b",
                        HCONTRIB_DATA_DIR "/corpus_harbor.txt", "--format", "csv"});
  CHECK(sur.code == 0);
  CHECK(sur.out.rfind("check,passed,value,informational\n", 0) == 0);
  CHECK(cli({"synth", "--experiment", "levels", "--backend", "remote", "--endpoint", "http://x", "--model", "m"})
            .code == 1);
}

TEST_CASE("remote backend through the command line") {
  hcontrib::testing::EchoServer server;
  TempDir dir;
  const auto in = dir.file("in.txt", "Tell me about tides.");
  const auto out = dir.file("out.txt", "Tides rise and fall twice a day.");
  const auto ok = cli({"measure", "--backend", "remote", "--endpoint", server.base_url(), "--model", "echo-test",
                       "--input", in, "--output", out, "--null-context", "A text:"});
  REQUIRE(ok.code == 0);
  const auto j = json::parse(ok.out);
  CHECK(j["scorer_id"].get<std::string>().find("echo-test") != std::string::npos);
  CHECK(j["null_context"] == "A text:");

  // The echo server gives no logprob to the first prompt token, so bare unconditional scoring fails.
  const auto bare = cli({"measure", "--backend", "remote", "--endpoint", server.base_url(), "--model", "echo-test",
                         "--input", in, "--output", out});
  CHECK(bare.code == 2);
  CHECK(bare.err.find("UnsupportedNullContext") != std::string::npos);
  CHECK(cli({"measure", "--backend", "remote", "--input", in, "--output", out}).code == 1);
}

}  // TEST_SUITE
