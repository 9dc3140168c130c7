#include "instfmt/schema.hpp"

#include "instfmt/errors.hpp"
#include "instfmt/text.hpp"

#include <algorithm>
#include <cctype>
#include <set>

namespace instfmt {

// ---------------------------------------------------------------------------
// ComponentMask

std::string ComponentMask::code() const {
    std::string out;
    if (has_d) out += 'D';
    if (has_p) out += 'P';
    if (has_n) out += 'N';
    if (has_e) out += 'E';
    return out;
}

bool ComponentMask::subset_of(const ComponentMask& o) const {
    return (!has_d || o.has_d) && (!has_p || o.has_p) && (!has_n || o.has_n) &&
           (!has_e || o.has_e);
}

ComponentMask parse_component_mask(std::string_view code) {
    if (code.empty()) throw ValidationError("component mask: empty code");
    ComponentMask m;
    for (char raw : code) {
        const char c = static_cast<char>(std::toupper(static_cast<unsigned char>(raw)));
        bool* flag = nullptr;
        switch (c) {
            case 'D': flag = &m.has_d; break;
            case 'P': flag = &m.has_p; break;
            case 'N': flag = &m.has_n; break;
            case 'E': flag = &m.has_e; break;
            default:
                throw ValidationError(std::string("component mask: unknown character '") + raw +
                                      "' in \"" + std::string(code) + "\"");
        }
        if (*flag)
            throw ValidationError(std::string("component mask: repeated character '") + raw +
                                  "' in \"" + std::string(code) + "\"");
        *flag = true;
    }
    if (m.has_e && !m.has_p && !m.has_n)
        throw ValidationError("component mask: 'E' requires 'P' or 'N' in \"" +
                              std::string(code) + "\"");
    return m;
}

// ---------------------------------------------------------------------------
// FormatSpec

std::string_view to_string(FormatLevel level) {
    switch (level) {
        case FormatLevel::Task: return "task";
        case FormatLevel::Instance: return "instance";
        case FormatLevel::Keywords: return "keywords";
    }
    return "?";
}

FormatSpec FormatSpec::task_level(ComponentMask mask) {
    if (!mask.has_d && !mask.has_p && !mask.has_n && !mask.has_e)
        throw ValidationError("task-level format: mask has no components");
    if (mask.has_e && !mask.has_p && !mask.has_n)
        throw ValidationError("task-level format: 'E' requires 'P' or 'N'");
    return FormatSpec(TaskLevelFormat{mask});
}

FormatSpec FormatSpec::instance_level(std::string template_text) {
    if (template_placeholders(template_text).empty())
        throw ValidationError("instance-level template has no placeholder: \"" + template_text +
                              "\"");
    return FormatSpec(InstanceLevelFormat{std::move(template_text)});
}

FormatSpec FormatSpec::keywords_level(std::vector<std::string> keywords) {
    if (keywords.empty()) throw ValidationError("keywords-level format: empty keyword list");
    for (const auto& k : keywords)
        if (trim(k).empty()) throw ValidationError("keywords-level format: blank keyword");
    return FormatSpec(KeywordsLevelFormat{std::move(keywords)});
}

FormatLevel FormatSpec::level() const {
    return static_cast<FormatLevel>(payload_.index());
}

const ComponentMask& FormatSpec::mask() const {
    if (auto* p = std::get_if<TaskLevelFormat>(&payload_)) return p->mask;
    throw ValidationError("format " + describe() + " has no component mask");
}

const std::string& FormatSpec::template_text() const {
    if (auto* p = std::get_if<InstanceLevelFormat>(&payload_)) return p->template_text;
    throw ValidationError("format " + describe() + " has no template");
}

const std::vector<std::string>& FormatSpec::keywords() const {
    if (auto* p = std::get_if<KeywordsLevelFormat>(&payload_)) return p->keywords;
    throw ValidationError("format " + describe() + " has no keywords");
}

std::string FormatSpec::describe() const {
    switch (level()) {
        case FormatLevel::Task: return "task:" + std::get<TaskLevelFormat>(payload_).mask.code();
        case FormatLevel::Instance:
            return "instance:" + std::get<InstanceLevelFormat>(payload_).template_text;
        case FormatLevel::Keywords: {
            std::string out = "keywords:";
            const auto& kws = std::get<KeywordsLevelFormat>(payload_).keywords;
            for (std::size_t i = 0; i < kws.size(); ++i) out += (i ? "," : "") + kws[i];
            return out;
        }
    }
    return {};
}

FormatSpec parse_format_spec(std::string_view text) {
    const auto colon = text.find(':');
    if (colon == std::string_view::npos) return FormatSpec::task_level(parse_component_mask(text));
    const std::string kind = to_lower(text.substr(0, colon));
    const std::string_view rest = text.substr(colon + 1);
    if (kind == "task") return FormatSpec::task_level(parse_component_mask(rest));
    if (kind == "instance") return FormatSpec::instance_level(std::string(rest));
    if (kind == "keywords") {
        std::vector<std::string> kws;
        for (auto& piece : split(rest, ',')) kws.emplace_back(trim(piece));
        return FormatSpec::keywords_level(std::move(kws));
    }
    throw ValidationError("unknown format kind '" + kind + "' (expected task, instance, keywords)");
}

std::vector<std::string> template_placeholders(std::string_view tpl) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < tpl.size(); ++i) {
        if (tpl[i] == '}') throw ValidationError("template: stray '}' at offset " + std::to_string(i));
        if (tpl[i] != '{') continue;
        const auto close = tpl.find('}', i + 1);
        if (close == std::string_view::npos)
            throw ValidationError("template: unclosed '{' at offset " + std::to_string(i));
        const std::string_view name = tpl.substr(i + 1, close - i - 1);
        if (name.empty()) throw ValidationError("template: empty placeholder at offset " + std::to_string(i));
        const bool ok_head = std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_';
        const bool ok_tail = std::all_of(name.begin(), name.end(), [](char c) {
            return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
        });
        if (!ok_head || !ok_tail)
            throw ValidationError("template: malformed placeholder '{" + std::string(name) + "}'");
        names.emplace_back(name);
        i = close;
    }
    return names;
}

// ---------------------------------------------------------------------------
// Records

void DemonstrationExample::validate() const {
    if (trim(input).empty()) throw ValidationError("demonstration: empty input");
    if (trim(output).empty()) throw ValidationError("demonstration: empty output");
    if (explanation && explanation->empty())
        throw ValidationError("demonstration: explanation present but empty");
}

const TaskInstance* UnifiedTask::find_instance(std::string_view id) const {
    for (const auto& inst : instances)
        if (inst.instance_id == id) return &inst;
    return nullptr;
}

void UnifiedTask::validate() const {
    if (task_id.empty()) throw ValidationError("task: empty task_id");
    for (const auto& d : positives) d.validate();
    for (const auto& d : negatives) d.validate();
    std::set<std::string_view> ids;
    for (const auto& inst : instances) {
        if (inst.instance_id.empty())
            throw ValidationError("task " + task_id + ": empty instance id");
        if (inst.references.empty())
            throw ValidationError("task " + task_id + ", instance " + inst.instance_id +
                                  ": no references");
        if (!ids.insert(inst.instance_id).second)
            throw ValidationError("task " + task_id + ": duplicate instance id '" +
                                  inst.instance_id + "'");
    }
    if (source_format.level() == FormatLevel::Task && source_format.mask().has_d && !definition)
        throw ValidationError("task " + task_id + ": format " + source_format.describe() +
                              " requires a definition");
}

namespace {

const std::set<std::string, std::less<>> kTaskKeys = {"task_id", "definition", "positives",
                                                       "negatives", "instances", "template",
                                                       "keywords", "category"};
const std::set<std::string, std::less<>> kInstanceKeys = {"id", "input", "references"};

std::string require_string(const json& obj, std::string_view key, const std::string& where) {
    const auto it = obj.find(key);
    if (it == obj.end()) throw ValidationError(where + ": missing field '" + std::string(key) + "'");
    if (!it->is_string())
        throw ValidationError(where + ": field '" + std::string(key) + "' must be a string");
    return it->get<std::string>();
}

std::vector<DemonstrationExample> decode_examples(const json& arr, const std::string& where) {
    if (!arr.is_array()) throw ValidationError(where + " must be an array");
    std::vector<DemonstrationExample> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const std::string at = where + "[" + std::to_string(i) + "]";
        if (!arr[i].is_object()) throw ValidationError(at + " must be an object");
        DemonstrationExample d;
        d.input = require_string(arr[i], "input", at);
        d.output = require_string(arr[i], "output", at);
        if (arr[i].contains("explanation")) d.explanation = require_string(arr[i], "explanation", at);
        try {
            d.validate();
        } catch (const ValidationError& e) {
            throw ValidationError(at + ": " + e.what());
        }
        out.push_back(std::move(d));
    }
    return out;
}

json encode_examples(const std::vector<DemonstrationExample>& v, bool with_explanations) {
    json arr = json::array();
    for (const auto& d : v) {
        json o = {{"input", d.input}, {"output", d.output}};
        if (with_explanations && d.explanation) o["explanation"] = *d.explanation;
        arr.push_back(std::move(o));
    }
    return arr;
}

bool declares_component(const UnifiedTask& task, bool ComponentMask::*flag) {
    return task.source_format.level() == FormatLevel::Task && task.source_format.mask().*flag;
}

}  // namespace

UnifiedTask decode_task(const json& record, const FormatSpec& spec) {
    if (!record.is_object()) throw ValidationError("task record must be a JSON object");
    UnifiedTask t;
    t.task_id = require_string(record, "task_id", "task record");
    if (t.task_id.empty()) throw ValidationError("task record: empty task_id");
    const std::string where = "task " + t.task_id;

    if (record.contains("definition")) t.definition = require_string(record, "definition", where);
    if (record.contains("positives"))
        t.positives = decode_examples(record.at("positives"), where + ": positives");
    if (record.contains("negatives"))
        t.negatives = decode_examples(record.at("negatives"), where + ": negatives");
    if (record.contains("category")) t.category = require_string(record, "category", where);

    switch (spec.level()) {
        case FormatLevel::Task: {
            const auto& m = spec.mask();
            if (m.has_d && !record.contains("definition"))
                throw ValidationError(where + ": missing field 'definition' required by " +
                                      spec.describe());
            if (m.has_p && !record.contains("positives"))
                throw ValidationError(where + ": missing field 'positives' required by " +
                                      spec.describe());
            if (m.has_n && !record.contains("negatives"))
                throw ValidationError(where + ": missing field 'negatives' required by " +
                                      spec.describe());
            t.source_format = spec;
            break;
        }
        case FormatLevel::Instance: {
            std::string tpl = require_string(record, "template", where);
            try {
                t.source_format = FormatSpec::instance_level(std::move(tpl));
            } catch (const ValidationError& e) {
                throw ValidationError(where + ": " + e.what());
            }
            break;
        }
        case FormatLevel::Keywords: {
            const auto it = record.find("keywords");
            if (it == record.end()) throw ValidationError(where + ": missing field 'keywords'");
            if (!it->is_array()) throw ValidationError(where + ": 'keywords' must be an array");
            std::vector<std::string> kws;
            for (const auto& k : *it) {
                if (!k.is_string()) throw ValidationError(where + ": keywords must be strings");
                kws.push_back(k.get<std::string>());
            }
            try {
                t.source_format = FormatSpec::keywords_level(std::move(kws));
            } catch (const ValidationError& e) {
                throw ValidationError(where + ": " + e.what());
            }
            break;
        }
    }

    const auto inst_it = record.find("instances");
    if (inst_it == record.end()) throw ValidationError(where + ": missing field 'instances'");
    if (!inst_it->is_array()) throw ValidationError(where + ": 'instances' must be an array");
    for (const auto& r : *inst_it) {
        if (!r.is_object()) throw ValidationError(where + ": instance must be an object");
        TaskInstance inst;
        inst.instance_id = require_string(r, "id", where + ": instance");
        const std::string iw = where + ", instance " + inst.instance_id;
        inst.input = require_string(r, "input", iw);
        const auto refs = r.find("references");
        if (refs == r.end() || !refs->is_array() || refs->empty())
            throw ValidationError(iw + ": 'references' must be a non-empty array");
        for (const auto& ref : *refs) {
            if (!ref.is_string()) throw ValidationError(iw + ": references must be strings");
            inst.references.push_back(ref.get<std::string>());
        }
        for (const auto& [k, v] : r.items())
            if (!kInstanceKeys.contains(k)) inst.extra[k] = v;
        t.instances.push_back(std::move(inst));
    }

    for (const auto& [k, v] : record.items())
        if (!kTaskKeys.contains(k)) t.extra[k] = v;

    t.validate();
    return t;
}

json encode_task(const UnifiedTask& task, const FormatSpec& spec) {
    json out = task.extra.is_object() ? task.extra : json::object();
    out["task_id"] = task.task_id;
    if (task.category) out["category"] = *task.category;

    switch (spec.level()) {
        case FormatLevel::Task: {
            const auto& m = spec.mask();
            if (m.has_d) {
                if (!task.definition)
                    throw ValidationError("task " + task.task_id + ": " + spec.describe() +
                                          " requires a definition");
                out["definition"] = *task.definition;
            }
            if (m.has_p) {
                if (task.positives.empty() && !declares_component(task, &ComponentMask::has_p))
                    throw ValidationError("task " + task.task_id + ": " + spec.describe() +
                                          " requires positive examples");
                out["positives"] = encode_examples(task.positives, m.has_e);
            }
            if (m.has_n) {
                if (task.negatives.empty() && !declares_component(task, &ComponentMask::has_n))
                    throw ValidationError("task " + task.task_id + ": " + spec.describe() +
                                          " requires negative examples");
                out["negatives"] = encode_examples(task.negatives, m.has_e);
            }
            break;
        }
        case FormatLevel::Instance: out["template"] = spec.template_text(); break;
        case FormatLevel::Keywords: out["keywords"] = spec.keywords(); break;
    }

    json insts = json::array();
    for (const auto& inst : task.instances) {
        json o = inst.extra.is_object() ? inst.extra : json::object();
        o["id"] = inst.instance_id;
        o["input"] = inst.input;
        o["references"] = inst.references;
        insts.push_back(std::move(o));
    }
    out["instances"] = std::move(insts);
    return out;
}

// ---------------------------------------------------------------------------
// Section grammar
//
//   Definition: <text>
//
//   Positive Example <i><EM DASH>
//   Input: <text>
//   Output: <text>
//   Explanation: <text>        (only when the mask has E)
//
//   Negative Example <i><EM DASH>
//   ...
//
//   Input: <query>
//   Output:
//
// Sections are joined by one blank line. <EM DASH> is U+2014.

namespace {

constexpr std::string_view kDash = "\xE2\x80\x94";  // U+2014

std::string labeled(std::string_view label, std::string_view value) {
    std::string out(label);
    out += ':';
    if (!value.empty()) {
        out += ' ';
        out += value;
    }
    return out;
}

std::string example_section(std::string_view kind, std::size_t index,
                            const DemonstrationExample& d, bool with_explanation) {
    std::string out(kind);
    out += " Example " + std::to_string(index);
    out += kDash;
    out += '\n' + labeled("Input", d.input);
    out += '\n' + labeled("Output", d.output);
    if (with_explanation && d.explanation) out += '\n' + labeled("Explanation", *d.explanation);
    return out;
}

std::vector<std::string> task_sections(const UnifiedTask& task, const ComponentMask& m,
                                       std::size_t num_pos, std::size_t num_neg) {
    std::vector<std::string> sections;
    if (m.has_d) {
        if (!task.definition)
            throw ValidationError("task " + task.task_id + ": mask " + m.code() +
                                  " demands a definition");
        sections.push_back(labeled("Definition", *task.definition));
    }
    if (m.has_p) {
        if (num_pos > task.positives.size())
            throw ValidationError("task " + task.task_id + ": requested " +
                                  std::to_string(num_pos) + " positive examples, " +
                                  std::to_string(task.positives.size()) + " available");
        for (std::size_t i = 0; i < num_pos; ++i)
            sections.push_back(example_section("Positive", i + 1, task.positives[i], m.has_e));
    }
    if (m.has_n) {
        if (num_neg > task.negatives.size())
            throw ValidationError("task " + task.task_id + ": requested " +
                                  std::to_string(num_neg) + " negative examples, " +
                                  std::to_string(task.negatives.size()) + " available");
        for (std::size_t i = 0; i < num_neg; ++i)
            sections.push_back(example_section("Negative", i + 1, task.negatives[i], m.has_e));
    }
    return sections;
}

std::string instantiate(std::string_view tpl, const TaskInstance& inst) {
    template_placeholders(tpl);  // validates
    std::string out;
    for (std::size_t i = 0; i < tpl.size(); ++i) {
        if (tpl[i] != '{') {
            out += tpl[i];
            continue;
        }
        const auto close = tpl.find('}', i + 1);
        const std::string name(tpl.substr(i + 1, close - i - 1));
        if (name == "input") {
            out += inst.input;
        } else if (auto it = inst.extra.find(name); it != inst.extra.end() && it->is_string()) {
            out += it->get<std::string>();
        } else {
            throw ValidationError("instance " + inst.instance_id + ": no value for placeholder '{" +
                                  name + "}'");
        }
        i = close;
    }
    return out;
}

std::string keyword_prefix(const std::vector<std::string>& kws) {
    return join(kws, ", ");
}

}  // namespace

std::string render_query(std::string_view input) {
    return labeled("Input", input) + "\nOutput:";
}

std::string render_instruction(const UnifiedTask& task, const FormatSpec& spec,
                               std::size_t num_pos, std::size_t num_neg) {
    switch (spec.level()) {
        case FormatLevel::Task: return join(task_sections(task, spec.mask(), num_pos, num_neg), "\n\n");
        case FormatLevel::Instance: return spec.template_text();
        case FormatLevel::Keywords: return keyword_prefix(spec.keywords());
    }
    return {};
}

RenderedInstruction render(const UnifiedTask& task, std::string_view instance_id,
                           const FormatSpec& spec, std::size_t num_pos, std::size_t num_neg) {
    const TaskInstance* inst = task.find_instance(instance_id);
    if (!inst)
        throw ValidationError("task " + task.task_id + ": unknown instance id '" +
                              std::string(instance_id) + "'");
    RenderedInstruction r{.prompt_text = {},
                          .target_text = inst->references.front(),
                          .task_id = task.task_id,
                          .instance_id = inst->instance_id,
                          .format = spec};
    switch (spec.level()) {
        case FormatLevel::Task: {
            auto sections = task_sections(task, spec.mask(), num_pos, num_neg);
            sections.push_back(render_query(inst->input));
            r.prompt_text = join(sections, "\n\n");
            break;
        }
        case FormatLevel::Instance: r.prompt_text = instantiate(spec.template_text(), *inst); break;
        case FormatLevel::Keywords:
            r.prompt_text = keyword_prefix(spec.keywords()) + ": " + inst->input;
            break;
    }
    return r;
}

namespace {

enum class Field { None, Definition, Input, Output, Explanation };

struct ExampleHeader {
    bool positive;
};

std::optional<ExampleHeader> match_example_header(std::string_view line) {
    line = trim(line);
    bool positive;
    if (line.starts_with("Positive Example")) {
        positive = true;
        line.remove_prefix(16);
    } else if (line.starts_with("Negative Example")) {
        positive = false;
        line.remove_prefix(16);
    } else {
        return std::nullopt;
    }
    line = trim(line);
    std::size_t digits = 0;
    while (digits < line.size() && std::isdigit(static_cast<unsigned char>(line[digits]))) ++digits;
    if (digits == 0) return std::nullopt;
    line.remove_prefix(digits);
    line = trim(line);
    if (line.empty() || line == kDash || line == "-" || line == ":" || line == ".")
        return ExampleHeader{positive};
    return std::nullopt;
}

std::optional<std::pair<Field, std::string_view>> match_field(std::string_view line) {
    static constexpr std::pair<std::string_view, Field> kFields[] = {
        {"Definition:", Field::Definition},
        {"Input:", Field::Input},
        {"Output:", Field::Output},
        {"Explanation:", Field::Explanation},
    };
    for (const auto& [prefix, f] : kFields) {
        if (line.starts_with(prefix)) {
            std::string_view rest = line.substr(prefix.size());
            if (!rest.empty() && rest.front() == ' ') rest.remove_prefix(1);
            return std::pair{f, rest};
        }
    }
    return std::nullopt;
}

struct DraftExample {
    bool positive = true;
    std::optional<std::string> input, output, explanation;
};

}  // namespace

std::variant<ParsedSections, std::string> parse_sections(std::string_view text,
                                                         const ComponentMask& mask) {
    ParsedSections result;
    const std::string_view body = trim(text);
    const auto lines = split(body, '\n');

    std::optional<std::string> definition;
    std::vector<DraftExample> examples;
    std::optional<std::string>* current = nullptr;
    std::string pending_blank;  // blank lines seen since the last content line
    std::size_t last_header_line = 0;
    std::size_t first_header_line = lines.size();
    bool seen_header = false;
    std::size_t trailing_from = lines.size();

    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string_view line = lines[i];
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        if (auto hdr = match_example_header(line)) {
            examples.push_back(DraftExample{hdr->positive, std::nullopt, std::nullopt, std::nullopt});
            current = nullptr;
            pending_blank.clear();
            last_header_line = i;
            first_header_line = std::min(first_header_line, i);
            seen_header = true;
            continue;
        }
        if (auto fld = match_field(line)) {
            auto [f, rest] = *fld;
            std::optional<std::string>* slot = nullptr;
            if (f == Field::Definition) {
                slot = &definition;
            } else if (!examples.empty()) {
                auto& ex = examples.back();
                slot = f == Field::Input ? &ex.input : f == Field::Output ? &ex.output : &ex.explanation;
            }
            if (slot) {
                *slot = std::string(rest);
                current = slot;
                pending_blank.clear();
                last_header_line = i;
                first_header_line = std::min(first_header_line, i);
                seen_header = true;
                continue;
            }
        }
        if (trim(line).empty()) {
            if (current) pending_blank += '\n';
            continue;
        }
        if (!seen_header) {
            result.warnings.push_back("ignored preamble: " + std::string(trim(line)));
            continue;
        }
        if (current) {
            **current += pending_blank;
            **current += '\n';
            **current += line;
            pending_blank.clear();
        }
    }

    // After the final example section, a paragraph break ends the section;
    // whatever follows it is commentary, not part of the instruction.
    if (!examples.empty() && seen_header) {
        bool blank = false;
        for (std::size_t i = last_header_line + 1; i < lines.size(); ++i) {
            if (trim(lines[i]).empty()) {
                blank = true;
                continue;
            }
            if (blank) {
                trailing_from = i;
                break;
            }
        }
        if (trailing_from < lines.size()) {
            std::string tail;
            for (std::size_t i = trailing_from; i < lines.size(); ++i)
                tail += std::string(lines[i]) + (i + 1 < lines.size() ? "\n" : "");
            result.warnings.push_back("trailing text ignored: " + std::string(trim(tail)));
            // Re-trim the field that absorbed the commentary.
            auto& ex = examples.back();
            for (auto* f : {&ex.explanation, &ex.output, &ex.input}) {
                if (!*f) continue;
                const auto cut = f->value().find("\n\n");
                if (cut != std::string::npos) f->value().resize(cut);
            }
        }
    }

    if (mask.has_d && !definition) return std::string("Definition");
    if (definition) result.definition = std::string(trim(*definition));

    std::size_t pos_i = 0, neg_i = 0;
    for (auto& ex : examples) {
        const std::string name = std::string(ex.positive ? "Positive" : "Negative") + " Example " +
                                 std::to_string(ex.positive ? ++pos_i : ++neg_i);
        if (!ex.input || trim(*ex.input).empty()) return name + " Input";
        if (!ex.output || trim(*ex.output).empty()) return name + " Output";
        DemonstrationExample d{std::string(trim(*ex.input)), std::string(trim(*ex.output)),
                               std::nullopt};
        if (mask.has_e && ex.explanation && !trim(*ex.explanation).empty())
            d.explanation = std::string(trim(*ex.explanation));
        (ex.positive ? result.positives : result.negatives).push_back(std::move(d));
    }
    if (mask.has_p && result.positives.empty()) return std::string("Positive Example");
    if (mask.has_n && result.negatives.empty()) return std::string("Negative Example");
    if (mask.has_e) {
        const auto has_expl = [](const DemonstrationExample& d) { return d.explanation.has_value(); };
        if (std::none_of(result.positives.begin(), result.positives.end(), has_expl) &&
            std::none_of(result.negatives.begin(), result.negatives.end(), has_expl))
            return std::string("Explanation");
    }

    std::string kept;
    const std::size_t end = std::min(trailing_from, lines.size());
    for (std::size_t i = first_header_line; i < end; ++i) {
        if (i > first_header_line) kept += '\n';
        kept += lines[i];
    }
    result.instruction_text = std::string(trim(kept));
    return result;
}

}  // namespace instfmt
