#include "hcontrib/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "hcontrib/error.hpp"

namespace hcontrib {

using nlohmann::json;

namespace {

constexpr std::string_view kSeparator = "\n\n";

template <typename E, std::size_t N>
std::optional<E> lookup(const std::pair<E, std::string_view> (&table)[N], std::string_view s) {
  for (const auto& [e, name] : table) {
    if (name == s) return e;
  }
  return std::nullopt;
}

template <typename E, std::size_t N>
std::string_view name_of(const std::pair<E, std::string_view> (&table)[N], E e) {
  for (const auto& [v, name] : table) {
    if (v == e) return name;
  }
  return "?";
}

constexpr std::pair<Domain, std::string_view> kDomains[] = {{Domain::PaperAbstract, "paper_abstract"},
                                                            {Domain::News, "news"},
                                                            {Domain::PatentAbstract, "patent_abstract"},
                                                            {Domain::Poem, "poem"},
                                                            {Domain::Other, "other"}};
constexpr std::pair<Mode, std::string_view> kModes[] = {{Mode::Polish, "polish"},
                                                        {Mode::Summary, "summary"},
                                                        {Mode::Title, "title"},
                                                        {Mode::Subject, "subject"},
                                                        {Mode::Freeform, "freeform"}};
constexpr std::pair<Attack, std::string_view> kAttacks[] = {
    {Attack::None, "none"}, {Attack::RareWords, "rare_words"}, {Attack::MimicHuman, "mimic_human"}};

const std::string& require_level(const std::optional<std::string>& level, std::string_view name) {
  if (!level || level->empty()) throw Error(ErrorKind::MissingLevel, std::string(name) + " is required");
  return *level;
}

[[noreturn]] void invalid(std::size_t line, const std::string& field, const std::string& message) {
  throw LineError(ErrorKind::ValidationError, line, field, message);
}

const json& field(const json& j, std::size_t line, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) invalid(line, name, "missing");
  return *it;
}

std::string string_field(const json& j, std::size_t line, const char* name) {
  const auto& v = field(j, line, name);
  if (!v.is_string()) invalid(line, name, "must be a string");
  return v.get<std::string>();
}

}  // namespace

std::string_view to_string(Domain d) { return name_of(kDomains, d); }
std::string_view to_string(Mode m) { return name_of(kModes, m); }
std::string_view to_string(Attack a) { return name_of(kAttacks, a); }
std::optional<Domain> parse_domain(std::string_view s) { return lookup(kDomains, s); }
std::optional<Mode> parse_mode(std::string_view s) { return lookup(kModes, s); }
std::optional<Attack> parse_attack(std::string_view s) { return lookup(kAttacks, s); }

std::string attack_suffix(Attack attack) {
  switch (attack) {
    case Attack::None: return {};
    case Attack::RareWords: return "Always choose words you rarely use.";
    case Attack::MimicHuman: return "Mimic human writing.";
  }
  return {};
}

std::string attack_suffix(std::string_view kind) {
  const auto attack = parse_attack(kind);
  if (!attack) throw Error(ErrorKind::InvalidAttack, "unknown attack '" + std::string(kind) + "'");
  return attack_suffix(*attack);
}

std::string build_prompt(Mode mode, const InfoLevels& levels, std::optional<Attack> attack,
                         std::optional<int> length_target) {
  std::string prompt;
  switch (mode) {
    case Mode::Polish:
      if (levels.content.empty()) throw Error(ErrorKind::MissingLevel, "content is required");
      prompt = "Polish the following text, preserving its meaning:\n\n" + levels.content;
      break;
    case Mode::Summary:
      prompt = "Write a complete piece based on this summary: " + require_level(levels.summary, "summary");
      break;
    case Mode::Title:
      prompt = "Write a complete piece based on this title: " + require_level(levels.title, "title");
      break;
    case Mode::Subject:
      prompt = "Write a complete piece on this subject: " + require_level(levels.subject, "subject");
      break;
    case Mode::Freeform:
      if (levels.content.empty()) throw Error(ErrorKind::MissingLevel, "content is required");
      prompt = levels.content;
      break;
  }
  if (attack && *attack != Attack::None) prompt += "\n" + attack_suffix(*attack);
  if (length_target) {
    if (*length_target <= 0) throw Error(ErrorKind::InvalidArgument, "length_target must be positive");
    prompt += "\n\nTarget length: about " + std::to_string(*length_target) + " words.";
  }
  return prompt;
}

void validate(const GenerationRecord& r) {
  if (r.id.empty()) invalid(0, "id", "must be nonempty");
  if (r.output.empty()) invalid(0, "output", "must be nonempty");
  if (r.round < 1) invalid(0, "round", "must be >= 1");
  if (!(r.temperature > 0.0)) invalid(0, "temperature", "must be positive");
  if (r.length_target && *r.length_target <= 0) invalid(0, "length_target", "must be positive");
  if (r.mode == Mode::Subject && r.domain == Domain::Poem) invalid(0, "mode", "subject mode is not used for poems");
}

json to_json(const GenerationRecord& r) {
  json j = r.extra.is_object() ? r.extra : json::object();
  j["id"] = r.id;
  j["domain"] = to_string(r.domain);
  j["mode"] = to_string(r.mode);
  j["human_input"] = r.human_input;
  j["output"] = r.output;
  j["model_id"] = r.model_id;
  j["round"] = r.round;
  j["temperature"] = r.temperature;
  if (r.length_target) j["length_target"] = *r.length_target;
  if (r.attack) j["attack"] = to_string(*r.attack);
  return j;
}

GenerationRecord record_from_json(const json& j, std::size_t line) {
  if (!j.is_object()) throw LineError(ErrorKind::ParseError, line, "", "expected a JSON object");
  GenerationRecord r;
  r.id = string_field(j, line, "id");
  if (r.id.empty()) invalid(line, "id", "must be nonempty");

  const auto domain = parse_domain(string_field(j, line, "domain"));
  if (!domain) invalid(line, "domain", "unknown domain");
  r.domain = *domain;
  const auto mode = parse_mode(string_field(j, line, "mode"));
  if (!mode) invalid(line, "mode", "unknown mode");
  r.mode = *mode;

  r.human_input = string_field(j, line, "human_input");
  r.output = string_field(j, line, "output");
  if (r.output.empty()) invalid(line, "output", "must be nonempty");
  r.model_id = string_field(j, line, "model_id");

  if (auto it = j.find("round"); it != j.end()) {
    if (!it->is_number_integer() || it->get<long long>() < 1) invalid(line, "round", "must be an integer >= 1");
    r.round = it->get<int>();
  }
  const auto& temp = field(j, line, "temperature");
  if (!temp.is_number() || !(temp.get<double>() > 0.0)) invalid(line, "temperature", "must be a positive number");
  r.temperature = temp.get<double>();
  if (auto it = j.find("length_target"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer() || it->get<long long>() < 1) {
      invalid(line, "length_target", "must be a positive integer");
    }
    r.length_target = it->get<int>();
  }
  if (auto it = j.find("attack"); it != j.end() && !it->is_null()) {
    if (!it->is_string()) invalid(line, "attack", "must be a string");
    const auto attack = parse_attack(it->get<std::string>());
    if (!attack) invalid(line, "attack", "unknown attack");
    r.attack = *attack;
  }
  if (r.mode == Mode::Subject && r.domain == Domain::Poem) invalid(line, "mode", "subject mode is not used for poems");

  static constexpr const char* kKnown[] = {"id",          "domain", "mode",          "human_input", "output",
                                           "model_id",    "round",  "temperature",   "length_target",
                                           "attack"};
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(std::begin(kKnown), std::end(kKnown), it.key()) == std::end(kKnown)) r.extra[it.key()] = *it;
  }
  return r;
}

std::vector<GenerationRecord> read_records(std::istream& in) {
  std::vector<GenerationRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw LineError(ErrorKind::ParseError, line_no, "", e.what());
    }
    out.push_back(record_from_json(j, line_no));
  }
  return out;
}

std::vector<GenerationRecord> load_records(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + path.string());
  return read_records(in);
}

void write_records(std::ostream& out, const std::vector<GenerationRecord>& records) {
  for (const auto& r : records) out << to_json(r).dump() << '\n';
}

void save_records(const std::filesystem::path& path, const std::vector<GenerationRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + path.string());
  write_records(out, records);
}

std::string chain_id(std::string_view record_id) {
  const auto pos = record_id.rfind("#r");
  if (pos == std::string_view::npos || pos + 2 >= record_id.size()) return std::string(record_id);
  for (std::size_t i = pos + 2; i < record_id.size(); ++i) {
    if (record_id[i] < '0' || record_id[i] > '9') return std::string(record_id);
  }
  return std::string(record_id.substr(0, pos));
}

GenerationRecord make_refinement_record(const GenerationRecord& prev, const std::string& new_output,
                                        const std::string& instruction, RefinementContext context) {
  if (prev.round < 1) invalid(0, "round", "previous round must be >= 1");
  if (new_output.empty()) invalid(0, "output", "refined output must be nonempty");
  GenerationRecord next = prev;
  next.round = prev.round + 1;
  next.id = chain_id(prev.id) + "#r" + std::to_string(next.round);
  next.output = new_output;
  next.length_target.reset();
  std::string sep(kSeparator);
  if (context == RefinementContext::Transcript) {
    next.human_input = prev.human_input + sep + prev.output + sep + instruction;
  } else {
    next.human_input = prev.human_input + sep + instruction;
  }
  return next;
}

}  // namespace hcontrib
