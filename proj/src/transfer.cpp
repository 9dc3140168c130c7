#include "instfmt/transfer.hpp"

#include "instfmt/errors.hpp"
#include "instfmt/jsonl.hpp"
#include "instfmt/parallel.hpp"
#include "instfmt/rng.hpp"
#include "instfmt/text.hpp"

#include <algorithm>
#include <set>

namespace instfmt {

std::vector<ParallelSeedPair> seed_pairs_from_json(const std::vector<json>& records) {
    std::vector<ParallelSeedPair> out;
    std::set<std::string> ids;
    for (const auto& r : records) {
        ParallelSeedPair p;
        try {
            p.pair_id = r.at("pair_id").get<std::string>();
            p.source_text = r.at("source_text").get<std::string>();
            p.target_text = r.at("target_text").get<std::string>();
        } catch (const json::exception& e) {
            throw ValidationError(std::string("seed pair: ") + e.what());
        }
        if (p.pair_id.empty()) throw ValidationError("seed pair: empty pair_id");
        if (trim(p.source_text).empty() || trim(p.target_text).empty())
            throw ValidationError("seed pair " + p.pair_id + ": empty text");
        if (!ids.insert(p.pair_id).second)
            throw ValidationError("seed pair: duplicate pair_id '" + p.pair_id + "'");
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<ParallelSeedPair> load_seed_pairs(const std::filesystem::path& path) {
    return seed_pairs_from_json(read_jsonl(path));
}

json TransferFragment::to_json() const {
    json j = json::object();
    if (definition) j["definition"] = *definition;
    auto demos = [](const std::vector<DemonstrationExample>& v) {
        json arr = json::array();
        for (const auto& d : v) {
            json o = {{"input", d.input}, {"output", d.output}};
            if (d.explanation) o["explanation"] = *d.explanation;
            arr.push_back(std::move(o));
        }
        return arr;
    };
    if (!positives.empty()) j["positives"] = demos(positives);
    if (!negatives.empty()) j["negatives"] = demos(negatives);
    if (!keywords.empty()) j["keywords"] = keywords;
    if (!instance_text.empty()) j["instance_text"] = instance_text;
    if (!warnings.empty()) j["warnings"] = warnings;
    return j;
}

json TransferCandidate::to_json() const {
    json j = {{"sample_index", sample_index}, {"sampling_seed", sampling_seed}, {"raw", raw_generation}};
    if (parsed) j["parsed"] = parsed->to_json();
    if (parse_error) j["parse_error"] = *parse_error;
    if (ppl) j["ppl"] = *ppl;
    return j;
}

// ---------------------------------------------------------------------------
// Heuristic transfer

UnifiedTask heuristic_transfer(const UnifiedTask& task, const FormatSpec& target,
                               std::span<const TaskInstance> example_pool, std::uint64_t rng_seed,
                               std::size_t num_pos) {
    if (task.source_format == target) return task;

    UnifiedTask out = task;
    out.source_format = target;
    if (target.level() != FormatLevel::Task) {
        // Instance and keywords formats carry no definition or demonstrations.
        out.definition.reset();
        out.positives.clear();
        out.negatives.clear();
        return out;
    }

    const auto& m = target.mask();
    out.definition = m.has_d ? std::optional<std::string>(task.definition.value_or("")) : std::nullopt;

    if (!m.has_p) {
        out.positives.clear();
    } else if (out.positives.empty()) {
        if (example_pool.empty())
            throw ValidationError("task " + task.task_id +
                                  ": no positive examples and an empty example pool");
        Rng rng(rng_seed);
        for (std::size_t idx : rng.sample_indices(example_pool.size(), num_pos)) {
            const auto& inst = example_pool[idx];
            out.positives.push_back({inst.input, inst.references.front(), std::nullopt});
        }
    }
    if (!m.has_n) out.negatives.clear();
    if (!m.has_e) {
        for (auto& d : out.positives) d.explanation.reset();
        for (auto& d : out.negatives) d.explanation.reset();
    }
    return out;
}

// ---------------------------------------------------------------------------
// Prompting

std::string build_transfer_prompt(std::span<const ParallelSeedPair> seeds,
                                  std::string_view source_text) {
    if (seeds.empty()) throw ValidationError("transfer prompt: no seed pairs");
    if (trim(source_text).empty()) throw ValidationError("transfer prompt: empty source text");
    std::string out;
    std::size_t i = 0;
    for (const auto& s : seeds) {
        if (trim(s.source_text).empty() || trim(s.target_text).empty())
            throw ValidationError("transfer prompt: seed pair " + s.pair_id + " has empty text");
        out += "Example " + std::to_string(++i) + ".\n";
        out += "Task description A: " + s.source_text + "\n";
        out += "Task description B: " + s.target_text + "\n\n";
    }
    out += "Example " + std::to_string(++i) + ".\n";
    out += "Task description A: ";
    out += source_text;
    out += "\nTask description B:";
    return out;
}

const std::vector<std::string>& transfer_stop_sequences() {
    static const std::vector<std::string> stops = {"\n\nExample "};
    return stops;
}

bool is_standard_sample_count(std::size_t n) {
    return n == 1 || n == 2 || n == 4 || n == 8 || n == 16 || n == 32;
}

std::vector<TransferCandidate> llm_transfer(CompletionBackend& backend,
                                            std::span<const ParallelSeedPair> seeds,
                                            std::string_view source_text, const FormatSpec& target,
                                            const LlmTransferOptions& options) {
    if (options.n_samples < 1) throw ValidationError("n_samples must be >= 1");
    if (!options.allow_any_n && !is_standard_sample_count(options.n_samples))
        throw ValidationError("n_samples must be one of 1, 2, 4, 8, 16, 32 (got " +
                              std::to_string(options.n_samples) + ")");
    if (!(options.temperature >= 0.0)) throw ValidationError("temperature must be >= 0");

    const std::string prompt = build_transfer_prompt(seeds, source_text);
    std::vector<TransferCandidate> out(options.n_samples);
    parallel_for(options.n_samples, options.workers, [&](std::size_t i) {
        TransferCandidate& c = out[i];
        c.sample_index = i;
        c.sampling_seed = options.base_seed + i;
        CompletionRequest req;
        req.prompt = prompt;
        req.max_tokens = options.max_tokens;
        req.temperature = options.temperature;
        req.n = 1;
        req.stop = transfer_stop_sequences();
        req.seed = c.sampling_seed;
        c.raw_generation = backend.complete(req).at(0);
        auto parsed = parse_candidate(c.raw_generation, target);
        if (auto* frag = std::get_if<TransferFragment>(&parsed))
            c.parsed = std::move(*frag);
        else
            c.parse_error = std::get<std::string>(parsed);
    });

    if (std::all_of(out.begin(), out.end(),
                    [](const TransferCandidate& c) { return trim(c.raw_generation).empty(); }))
        throw ProtocolError("all " + std::to_string(out.size()) + " completions were empty");
    return out;
}

std::variant<TransferFragment, std::string> parse_candidate(std::string_view raw,
                                                            const FormatSpec& target) {
    std::string cleaned = truncate_at_stop(std::string(raw), transfer_stop_sequences());
    std::string_view text = trim(cleaned);
    constexpr std::string_view kEcho = "Task description B:";
    if (text.starts_with(kEcho)) text = trim(text.substr(kEcho.size()));
    if (text.empty()) return std::string("empty generation");

    TransferFragment frag;
    switch (target.level()) {
        case FormatLevel::Task: {
            auto sections = parse_sections(text, target.mask());
            if (auto* err = std::get_if<std::string>(&sections)) return *err;
            auto& s = std::get<ParsedSections>(sections);
            frag.definition = std::move(s.definition);
            frag.positives = std::move(s.positives);
            frag.negatives = std::move(s.negatives);
            frag.warnings = std::move(s.warnings);
            frag.instruction_text = std::move(s.instruction_text);
            break;
        }
        case FormatLevel::Instance:
            frag.instance_text = std::string(text);
            frag.instruction_text = frag.instance_text;
            break;
        case FormatLevel::Keywords: {
            const auto colon = text.find(':');
            const auto newline = text.find('\n');
            if (colon == std::string_view::npos || (newline != std::string_view::npos && newline < colon))
                return std::string("Keywords");
            for (auto piece : split(text.substr(0, colon), ',')) {
                if (trim(piece).empty()) return std::string("Keywords");
                frag.keywords.emplace_back(trim(piece));
            }
            frag.instance_text = std::string(trim(text.substr(colon + 1)));
            if (frag.instance_text.empty()) return std::string("Input");
            if (frag.keywords != target.keywords())
                frag.warnings.push_back("keywords differ from target: " + join(frag.keywords, ","));
            frag.instruction_text = std::string(text);
            break;
        }
    }
    return frag;
}

UnifiedTask apply_fragment(const UnifiedTask& task, const TransferFragment& fragment,
                           const FormatSpec& target) {
    if (target.level() != FormatLevel::Task)
        throw ValidationError("apply_fragment: target " + target.describe() + " is not task level");
    const auto& m = target.mask();
    UnifiedTask out = task;
    out.source_format = target;
    out.definition = m.has_d ? std::optional<std::string>(fragment.definition.value_or("")) : std::nullopt;
    out.positives = m.has_p ? fragment.positives : std::vector<DemonstrationExample>{};
    out.negatives = m.has_n ? fragment.negatives : std::vector<DemonstrationExample>{};
    return out;
}

}  // namespace instfmt
