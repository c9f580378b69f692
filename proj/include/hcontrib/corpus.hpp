#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace hcontrib {

enum class Domain { PaperAbstract, News, PatentAbstract, Poem, Other };
enum class Mode { Polish, Summary, Title, Subject, Freeform };
enum class Attack { None, RareWords, MimicHuman };

std::string_view to_string(Domain d);
std::string_view to_string(Mode m);
std::string_view to_string(Attack a);
std::optional<Domain> parse_domain(std::string_view s);
std::optional<Mode> parse_mode(std::string_view s);
std::optional<Attack> parse_attack(std::string_view s);

/// Stamp copied into reports so results can be tied to the template text.
inline constexpr std::string_view kTemplateVersion = "v1";

struct InfoLevels {
  std::string content;
  std::optional<std::string> summary;
  std::optional<std::string> title;
  std::optional<std::string> subject;
};

/// One AI-assisted generation event. Field names match the JSONL schema;
/// unknown JSON fields ride along in `extra` and are written back on save.
struct GenerationRecord {
  std::string id;
  Domain domain = Domain::Other;
  Mode mode = Mode::Freeform;
  std::string human_input;  // full prompt given to the generator
  std::string output;
  std::string model_id;
  int round = 1;
  double temperature = 1.0;
  std::optional<int> length_target;
  std::optional<Attack> attack;
  nlohmann::json extra = nlohmann::json::object();
};

/// Throws ValidationError naming the offending field.
void validate(const GenerationRecord& record);

std::string build_prompt(Mode mode, const InfoLevels& levels, std::optional<Attack> attack = std::nullopt,
                         std::optional<int> length_target = std::nullopt);

/// Instruction text for an adaptive attack; "none" gives an empty string.
std::string attack_suffix(std::string_view kind);
std::string attack_suffix(Attack attack);

nlohmann::json to_json(const GenerationRecord& record);
/// `line` is only used in error messages.
GenerationRecord record_from_json(const nlohmann::json& j, std::size_t line = 0);

std::vector<GenerationRecord> read_records(std::istream& in);
std::vector<GenerationRecord> load_records(const std::filesystem::path& path);
void write_records(std::ostream& out, const std::vector<GenerationRecord>& records);
void save_records(const std::filesystem::path& path, const std::vector<GenerationRecord>& records);

/// What the next round is scored against.
enum class RefinementContext {
  /// Prior prompt, prior output and the new instruction: everything the generator saw.
  Transcript,
  /// Prior human turns plus the new instruction, without model output.
  HumanTurns,
};

GenerationRecord make_refinement_record(const GenerationRecord& prev, const std::string& new_output,
                                        const std::string& instruction,
                                        RefinementContext context = RefinementContext::Transcript);

/// Chain identifier of a record id: the id with any "#r<round>" suffix removed.
std::string chain_id(std::string_view record_id);

}  // namespace hcontrib
