#include "hcontrib/reference_lm.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "hcontrib/error.hpp"

namespace hcontrib {

namespace {

bool is_space(unsigned char c) { return c == ' ' || (c >= '\t' && c <= '\r'); }

char lower_ascii(char c) { return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c; }

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_double(std::string_view s, std::string_view what) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::ModelFormat, "bad number for " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t parse_uint(std::string_view s, std::string_view what) {
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorKind::ModelFormat, "bad integer for " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return v;
}

// Uniform double in [0, 1) from the top 53 bits; independent of the
// standard library's distribution implementations.
double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t draw(const std::vector<double>& probs, double u) {
  double cumulative = 0.0;
  std::size_t last_nonzero = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last_nonzero = i;
    cumulative += probs[i];
    if (u < cumulative) return i;
  }
  return last_nonzero;
}

}  // namespace

std::vector<WordSpan> split_words(std::string_view text) {
  std::vector<WordSpan> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(static_cast<unsigned char>(text[i]))) ++i;
    if (i >= text.size()) break;
    const std::size_t begin = i;
    while (i < text.size() && !is_space(static_cast<unsigned char>(text[i]))) ++i;
    WordSpan span{std::string(text.substr(begin, i - begin)), begin, i};
    std::transform(span.word.begin(), span.word.end(), span.word.begin(), lower_ascii);
    out.push_back(std::move(span));
  }
  return out;
}

void ReferenceLM::check_config() const {
  if (!(config_.laplace_alpha > 0.0)) throw Error(ErrorKind::InvalidArgument, "laplace_alpha must be positive");
  if (!(config_.copy_alpha > 0.0)) throw Error(ErrorKind::InvalidArgument, "copy_alpha must be positive");
  if (!(config_.copy_lambda >= 0.0 && config_.copy_lambda < 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "copy_lambda must lie in [0, 1)");
  }
}

void ReferenceLM::index_vocabulary() {
  index_.clear();
  unknown_id_.reset();
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    index_.emplace(vocab_[i], i);
    if (vocab_[i] == kUnknownToken) unknown_id_ = i;
  }
}

ReferenceLM ReferenceLM::build(std::string_view corpus, ReferenceLMConfig config) {
  ReferenceLM lm;
  lm.config_ = std::move(config);
  lm.check_config();

  const auto words = split_words(corpus);
  if (words.size() < 2) {
    throw Error(ErrorKind::EmptyCorpus, "corpus needs at least two word tokens, found " +
                                            std::to_string(words.size()));
  }
  std::set<std::string> unique;
  for (const auto& w : words) unique.insert(w.word);
  if (lm.config_.reserve_unknown) unique.insert(std::string(kUnknownToken));
  lm.vocab_.assign(unique.begin(), unique.end());
  lm.index_vocabulary();

  const std::size_t v = lm.vocab_.size();
  lm.unigram_.assign(v, 0);
  lm.history_total_.assign(v, 0);
  std::vector<std::map<std::size_t, std::uint64_t>> pairs(v);
  std::size_t prev = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const std::size_t id = lm.index_.at(words[i].word);
    ++lm.unigram_[id];
    if (i > 0) {
      ++pairs[prev][id];
      ++lm.history_total_[prev];
    }
    prev = id;
  }
  lm.total_ = words.size();
  lm.bigram_.resize(v);
  for (std::size_t h = 0; h < v; ++h) lm.bigram_[h].assign(pairs[h].begin(), pairs[h].end());
  return lm;
}

ReferenceLM ReferenceLM::build_file(const std::filesystem::path& corpus_path, ReferenceLMConfig config) {
  std::ifstream in(corpus_path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read corpus " + corpus_path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return build(ss.str(), std::move(config));
}

ReferenceLM ReferenceLM::with_config(ReferenceLMConfig config) const {
  if (config.reserve_unknown != config_.reserve_unknown) {
    throw Error(ErrorKind::InvalidArgument, "reserve_unknown is fixed at build time");
  }
  ReferenceLM copy = *this;
  copy.config_ = std::move(config);
  copy.check_config();
  return copy;
}

std::uint64_t ReferenceLM::bigram_count(std::size_t history, std::size_t word) const {
  const auto& row = bigram_[history];
  auto it = std::lower_bound(row.begin(), row.end(), word,
                             [](const auto& entry, std::size_t w) { return entry.first < w; });
  return (it != row.end() && it->first == word) ? it->second : 0;
}

std::optional<std::size_t> ReferenceLM::word_id(std::string_view word) const {
  if (auto it = index_.find(std::string(word)); it != index_.end()) return it->second;
  return unknown_id_;
}

CopyTable ReferenceLM::copy_table(std::string_view context) const {
  CopyTable table;
  table.counts.assign(vocab_.size(), 0);
  for (const auto& w : split_words(context)) {
    // Without a reserved unknown entry, out-of-vocabulary context words are dropped
    // so that the copy law still normalizes over the vocabulary.
    if (auto id = word_id(w.word)) {
      ++table.counts[*id];
      ++table.length;
    }
  }
  return table;
}

double ReferenceLM::lm_probability(std::optional<std::size_t> history, std::size_t word) const {
  const double a = config_.laplace_alpha;
  const double v = static_cast<double>(vocab_.size());
  if (!history) {
    return (static_cast<double>(unigram_[word]) + a) / (static_cast<double>(total_) + a * v);
  }
  return (static_cast<double>(bigram_count(*history, word)) + a) /
         (static_cast<double>(history_total_[*history]) + a * v);
}

double ReferenceLM::copy_probability(const CopyTable& copy, std::size_t word) const {
  const double ac = config_.copy_alpha;
  return (static_cast<double>(copy.counts[word]) + ac) /
         (static_cast<double>(copy.length) + ac * static_cast<double>(vocab_.size()));
}

double ReferenceLM::mixture_probability(std::optional<std::size_t> history, const CopyTable* copy,
                                        std::size_t word) const {
  const double lm = lm_probability(history, word);
  if (copy == nullptr) return lm;
  const double lambda = config_.copy_lambda;
  return lambda * copy_probability(*copy, word) + (1.0 - lambda) * lm;
}

std::vector<double> ReferenceLM::next_log_distribution(std::optional<std::size_t> history, const CopyTable* copy,
                                                       double temperature) const {
  std::vector<double> logs(vocab_.size());
  for (std::size_t w = 0; w < vocab_.size(); ++w) logs[w] = std::log(mixture_probability(history, copy, w));
  if (temperature == 1.0) return logs;
  return apply_temperature_log(logs, temperature);
}

std::vector<double> ReferenceLM::next_distribution(std::optional<std::size_t> history, const CopyTable* copy,
                                                   double temperature) const {
  std::vector<double> probs(vocab_.size());
  if (temperature == 1.0) {
    for (std::size_t w = 0; w < vocab_.size(); ++w) probs[w] = mixture_probability(history, copy, w);
    return probs;
  }
  auto logs = next_log_distribution(history, copy, temperature);
  for (std::size_t w = 0; w < vocab_.size(); ++w) probs[w] = std::exp(logs[w]);
  return probs;
}

TokenScores ReferenceLM::score(const ScoringRequest& request) const {
  validate(request);
  const auto words = split_words(request.target);
  if (words.empty()) {
    throw Error(ErrorKind::SpanAlignment, "target contains no word tokens");
  }

  std::optional<CopyTable> copy;
  if (request.context) copy = copy_table(*request.context);
  const CopyTable* copy_ptr = copy ? &*copy : nullptr;

  TokenScores out;
  out.scorer_id = id();
  out.context_digest = context_digest(request.context);
  out.temperature = request.temperature;
  out.tokens.reserve(words.size());
  out.logprobs.reserve(words.size());
  out.offsets.reserve(words.size());

  std::optional<std::size_t> history;
  std::size_t piece_begin = 0;
  for (std::size_t i = 0; i < words.size(); ++i) {
    const auto id = word_id(words[i].word);
    if (!id) {
      throw Error(ErrorKind::UnknownWord, "'" + words[i].word + "' is not in the vocabulary");
    }
    // Pieces carry their leading whitespace; the last one also takes trailing whitespace.
    const std::size_t piece_end = (i + 1 == words.size()) ? request.target.size() : words[i].end;
    out.tokens.emplace_back(request.target.substr(piece_begin, piece_end - piece_begin));
    out.offsets.push_back(piece_begin);
    piece_begin = piece_end;

    double lp = 0.0;
    if (request.temperature == 1.0) {
      lp = std::log(mixture_probability(history, copy_ptr, *id));
    } else {
      lp = next_log_distribution(history, copy_ptr, request.temperature)[*id];
    }
    out.logprobs.push_back(std::min(lp, 0.0));
    history = *id;
  }
  return out;
}

std::size_t ReferenceLM::max_concurrency() const {
  return std::max(1u, std::thread::hardware_concurrency());
}

SampleResult ReferenceLM::sample(const SampleRequest& request) const {
  if (request.max_tokens == 0) throw Error(ErrorKind::InvalidArgument, "max_tokens must be positive");
  if (!(request.temperature > 0.0) || !std::isfinite(request.temperature)) {
    throw Error(ErrorKind::InvalidArgument, "temperature must be positive and finite");
  }
  std::optional<CopyTable> copy;
  if (request.context) copy = copy_table(*request.context);
  const CopyTable* copy_ptr = copy ? &*copy : nullptr;

  std::optional<std::size_t> history;
  if (request.history) {
    auto words = split_words(*request.history);
    if (!words.empty()) history = word_id(words.back().word);
  }

  std::mt19937_64 rng(request.seed);
  SampleResult out;
  for (std::size_t step = 0; step < request.max_tokens; ++step) {
    std::vector<double> logs;
    std::vector<double> probs(vocab_.size());
    if (request.temperature == 1.0) {
      logs.resize(vocab_.size());
      for (std::size_t w = 0; w < vocab_.size(); ++w) {
        probs[w] = mixture_probability(history, copy_ptr, w);
        logs[w] = std::log(probs[w]);
      }
    } else {
      logs = next_log_distribution(history, copy_ptr, request.temperature);
      for (std::size_t w = 0; w < vocab_.size(); ++w) probs[w] = std::exp(logs[w]);
    }
    const std::size_t pick = draw(probs, unit_uniform(rng));
    if (!out.text.empty()) out.text += ' ';
    out.text += vocab_[pick];
    out.ids.push_back(pick);
    out.logprobs.push_back(std::min(logs[pick], 0.0));
    history = pick;
  }
  return out;
}

std::string ReferenceLM::sample(const std::optional<std::string>& context, std::size_t max_tokens,
                                double temperature, std::uint64_t seed) const {
  return sample(SampleRequest{context, max_tokens, temperature, seed, std::nullopt}).text;
}

bool operator==(const ReferenceLM& a, const ReferenceLM& b) {
  const auto& ca = a.config_;
  const auto& cb = b.config_;
  return ca.laplace_alpha == cb.laplace_alpha && ca.copy_lambda == cb.copy_lambda &&
         ca.copy_alpha == cb.copy_alpha && ca.reserve_unknown == cb.reserve_unknown && ca.name == cb.name &&
         a.vocab_ == b.vocab_ && a.unigram_ == b.unigram_ && a.bigram_ == b.bigram_ &&
         a.history_total_ == b.history_total_ && a.total_ == b.total_;
}

// Line-oriented dump:
//   hcontrib-reference-lm 1
//   name <text to end of line>
//   laplace_alpha <real>
//   copy_lambda <real>
//   copy_alpha <real>
//   reserve_unknown <0|1>
//   vocab <n>            followed by n lines, one word each, in id order
//   unigram <n>          followed by n lines "<id> <count>"
//   bigram <n>           followed by n lines "<history id> <word id> <count>"
//   end
void ReferenceLM::save(std::ostream& out) const {
  out << kFormatTag << ' ' << kFormatVersion << '\n';
  out << "name " << config_.name << '\n';
  out << "laplace_alpha " << format_double(config_.laplace_alpha) << '\n';
  out << "copy_lambda " << format_double(config_.copy_lambda) << '\n';
  out << "copy_alpha " << format_double(config_.copy_alpha) << '\n';
  out << "reserve_unknown " << (config_.reserve_unknown ? 1 : 0) << '\n';
  out << "vocab " << vocab_.size() << '\n';
  for (const auto& w : vocab_) out << w << '\n';
  std::size_t nonzero = std::count_if(unigram_.begin(), unigram_.end(), [](auto c) { return c > 0; });
  out << "unigram " << nonzero << '\n';
  for (std::size_t i = 0; i < unigram_.size(); ++i) {
    if (unigram_[i] > 0) out << i << ' ' << unigram_[i] << '\n';
  }
  std::size_t pairs = 0;
  for (const auto& row : bigram_) pairs += row.size();
  out << "bigram " << pairs << '\n';
  for (std::size_t h = 0; h < bigram_.size(); ++h) {
    for (const auto& [w, c] : bigram_[h]) out << h << ' ' << w << ' ' << c << '\n';
  }
  out << "end\n";
}

void ReferenceLM::save_file(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  save(out);
}

ReferenceLM ReferenceLM::load(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next = [&](std::string_view expect_key) -> std::string {
    if (!std::getline(in, line)) {
      throw Error(ErrorKind::ModelFormat, "unexpected end of file, expected '" + std::string(expect_key) + "'");
    }
    ++line_no;
    if (expect_key.empty()) return line;
    if (line.rfind(std::string(expect_key) + ' ', 0) != 0) {
      throw Error(ErrorKind::ModelFormat,
                  "line " + std::to_string(line_no) + ": expected '" + std::string(expect_key) + "'");
    }
    return line.substr(expect_key.size() + 1);
  };
  auto fields = [](const std::string& s) {
    std::vector<std::string_view> parts;
    std::string_view view(s);
    std::size_t pos = 0;
    while (pos <= view.size()) {
      std::size_t sp = view.find(' ', pos);
      if (sp == std::string_view::npos) sp = view.size();
      parts.push_back(view.substr(pos, sp - pos));
      pos = sp + 1;
    }
    return parts;
  };

  const std::string version = next(kFormatTag);
  if (parse_uint(version, "version") != static_cast<std::uint64_t>(kFormatVersion)) {
    throw Error(ErrorKind::ModelFormat, "unsupported version " + version);
  }
  ReferenceLM lm;
  lm.config_.name = next("name");
  lm.config_.laplace_alpha = parse_double(next("laplace_alpha"), "laplace_alpha");
  lm.config_.copy_lambda = parse_double(next("copy_lambda"), "copy_lambda");
  lm.config_.copy_alpha = parse_double(next("copy_alpha"), "copy_alpha");
  lm.config_.reserve_unknown = parse_uint(next("reserve_unknown"), "reserve_unknown") != 0;
  lm.check_config();

  const std::size_t v = parse_uint(next("vocab"), "vocab");
  if (v == 0) throw Error(ErrorKind::ModelFormat, "empty vocabulary");
  lm.vocab_.reserve(v);
  for (std::size_t i = 0; i < v; ++i) lm.vocab_.push_back(next(""));
  if (!std::is_sorted(lm.vocab_.begin(), lm.vocab_.end()) ||
      std::adjacent_find(lm.vocab_.begin(), lm.vocab_.end()) != lm.vocab_.end()) {
    throw Error(ErrorKind::ModelFormat, "vocabulary must be sorted and unique");
  }
  lm.index_vocabulary();
  if (lm.config_.reserve_unknown && !lm.unknown_id_) {
    throw Error(ErrorKind::ModelFormat, "reserve_unknown set but vocabulary lacks <unk>");
  }

  lm.unigram_.assign(v, 0);
  const std::size_t nu = parse_uint(next("unigram"), "unigram");
  for (std::size_t i = 0; i < nu; ++i) {
    auto f = fields(next(""));
    if (f.size() != 2) throw Error(ErrorKind::ModelFormat, "line " + std::to_string(line_no) + ": bad unigram");
    const std::size_t id = parse_uint(f[0], "unigram id");
    if (id >= v) throw Error(ErrorKind::ModelFormat, "unigram id out of range");
    lm.unigram_[id] = parse_uint(f[1], "unigram count");
    lm.total_ += lm.unigram_[id];
  }

  lm.bigram_.assign(v, {});
  lm.history_total_.assign(v, 0);
  const std::size_t nb = parse_uint(next("bigram"), "bigram");
  for (std::size_t i = 0; i < nb; ++i) {
    auto f = fields(next(""));
    if (f.size() != 3) throw Error(ErrorKind::ModelFormat, "line " + std::to_string(line_no) + ": bad bigram");
    const std::size_t h = parse_uint(f[0], "bigram history");
    const std::size_t w = parse_uint(f[1], "bigram word");
    if (h >= v || w >= v) throw Error(ErrorKind::ModelFormat, "bigram id out of range");
    const std::uint64_t c = parse_uint(f[2], "bigram count");
    auto& row = lm.bigram_[h];
    if (!row.empty() && row.back().first >= w) {
      throw Error(ErrorKind::ModelFormat, "bigram rows must be sorted by word id");
    }
    row.emplace_back(w, c);
    lm.history_total_[h] += c;
  }
  if (next("") != "end") throw Error(ErrorKind::ModelFormat, "missing 'end' marker");
  if (lm.total_ < 2) throw Error(ErrorKind::EmptyCorpus, "model has fewer than two tokens");
  return lm;
}

ReferenceLM ReferenceLM::load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read model " + path.string());
  return load(in);
}

}  // namespace hcontrib
