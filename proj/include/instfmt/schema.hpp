#pragma once

// Canonical instruction representation and the codecs for the three format
// families: task level (definition + demonstrations), instance level
// (per-example templates) and keywords level.

#include <nlohmann/json.hpp>

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace instfmt {

using json = nlohmann::json;

struct ComponentMask {
    bool has_d = false;
    bool has_p = false;
    bool has_n = false;
    bool has_e = false;

    /// Canonical code, flags in D/P/N/E order ("DPNE", "DP", ...).
    std::string code() const;

    /// True when every flag set here is also set in `other`.
    bool subset_of(const ComponentMask& other) const;

    bool operator==(const ComponentMask&) const = default;
};

/// Parse a mask code such as "DPN" (case-insensitive). Throws
/// ValidationError naming the offending character.
ComponentMask parse_component_mask(std::string_view code);

enum class FormatLevel { Task, Instance, Keywords };

std::string_view to_string(FormatLevel level);

struct TaskLevelFormat {
    ComponentMask mask;
    bool operator==(const TaskLevelFormat&) const = default;
};

struct InstanceLevelFormat {
    std::string template_text;
    bool operator==(const InstanceLevelFormat&) const = default;
};

struct KeywordsLevelFormat {
    std::vector<std::string> keywords;
    bool operator==(const KeywordsLevelFormat&) const = default;
};

/// Which format family a rendering uses, with the level-specific payload.
/// Only the payload of the active level exists.
class FormatSpec {
public:
    static FormatSpec task_level(ComponentMask mask);
    static FormatSpec instance_level(std::string template_text);
    static FormatSpec keywords_level(std::vector<std::string> keywords);

    FormatLevel level() const;

    // Accessors throw ValidationError when called on the wrong level.
    const ComponentMask& mask() const;
    const std::string& template_text() const;
    const std::vector<std::string>& keywords() const;

    /// Round-trips through parse_format_spec: "task:DPN", "instance:<tpl>",
    /// "keywords:a,b".
    std::string describe() const;

    bool operator==(const FormatSpec&) const = default;

private:
    using Payload = std::variant<TaskLevelFormat, InstanceLevelFormat, KeywordsLevelFormat>;
    explicit FormatSpec(Payload p) : payload_(std::move(p)) {}
    Payload payload_;
};

/// Accepts "DPN" (bare mask), "task:DPN", "instance:<template>",
/// "keywords:kw1,kw2".
FormatSpec parse_format_spec(std::string_view text);

/// Placeholder names in a template, in order of appearance. Names match
/// [A-Za-z_][A-Za-z0-9_]*. Throws ValidationError on stray or unbalanced
/// braces and empty names.
std::vector<std::string> template_placeholders(std::string_view tpl);

struct DemonstrationExample {
    std::string input;
    std::string output;
    std::optional<std::string> explanation;

    void validate() const;
    bool operator==(const DemonstrationExample&) const = default;
};

struct TaskInstance {
    std::string instance_id;
    std::string input;
    std::vector<std::string> references;
    json extra = json::object();  // unknown keys, preserved on round trip

    bool operator==(const TaskInstance&) const = default;
};

struct UnifiedTask {
    std::string task_id;
    std::optional<std::string> definition;
    std::vector<DemonstrationExample> positives;
    std::vector<DemonstrationExample> negatives;
    std::vector<TaskInstance> instances;
    FormatSpec source_format = FormatSpec::task_level({true, false, false, false});
    std::optional<std::string> category;
    json extra = json::object();

    const TaskInstance* find_instance(std::string_view id) const;

    /// Throws ValidationError when an invariant does not hold.
    void validate() const;

    bool operator==(const UnifiedTask&) const = default;
};

struct RenderedInstruction {
    std::string prompt_text;
    std::string target_text;
    std::string task_id;
    std::string instance_id;
    FormatSpec format = FormatSpec::task_level({true, false, false, false});
};

inline constexpr std::size_t kDefaultNumPositives = 2;
inline constexpr std::size_t kDefaultNumNegatives = 2;

UnifiedTask decode_task(const json& record, const FormatSpec& spec);

json encode_task(const UnifiedTask& task, const FormatSpec& spec);

/// Render one instance as a flat prompt string.
RenderedInstruction render(const UnifiedTask& task, std::string_view instance_id,
                           const FormatSpec& spec, std::size_t num_pos = kDefaultNumPositives,
                           std::size_t num_neg = kDefaultNumNegatives);

/// The instruction alone, without any instance: the task-level sections, the
/// instance-level template, or the keyword line prefix.
std::string render_instruction(const UnifiedTask& task, const FormatSpec& spec,
                               std::size_t num_pos = kDefaultNumPositives,
                               std::size_t num_neg = kDefaultNumNegatives);

/// The trailing query section appended to a task-level instruction.
std::string render_query(std::string_view input);

/// Components recovered from task-level instruction text.
struct ParsedSections {
    std::optional<std::string> definition;
    std::vector<DemonstrationExample> positives;
    std::vector<DemonstrationExample> negatives;
    std::vector<std::string> warnings;
    std::string instruction_text;  // input with trailing commentary removed
};

/// Segment instruction text by the section grammar. Returns the name of the
/// first missing or garbled section on failure.
std::variant<ParsedSections, std::string> parse_sections(std::string_view text,
                                                         const ComponentMask& mask);

}  // namespace instfmt
