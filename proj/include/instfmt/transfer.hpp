#pragma once

// Format transfer: a rule-based baseline and few-shot prompting of an
// external completion model with hand-written parallel seed pairs.

#include "instfmt/backend.hpp"
#include "instfmt/schema.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace instfmt {

/// The same task written in the source and in the target format.
struct ParallelSeedPair {
    std::string pair_id;
    std::string source_text;
    std::string target_text;
};

inline constexpr std::size_t kDefaultSeedCount = 3;

std::vector<ParallelSeedPair> seed_pairs_from_json(const std::vector<json>& records);
std::vector<ParallelSeedPair> load_seed_pairs(const std::filesystem::path& path);

/// Target-format fields recovered from one generation.
struct TransferFragment {
    std::optional<std::string> definition;
    std::vector<DemonstrationExample> positives;
    std::vector<DemonstrationExample> negatives;
    std::vector<std::string> keywords;  // keywords level
    std::string instance_text;          // instance/keywords level: the rewritten input
    std::string instruction_text;       // cleaned instruction, used for scoring
    std::vector<std::string> warnings;

    json to_json() const;
};

struct TransferCandidate {
    std::string raw_generation;
    std::optional<TransferFragment> parsed;
    std::optional<std::string> parse_error;
    std::optional<double> ppl;
    std::size_t sample_index = 0;
    std::uint64_t sampling_seed = 0;

    bool scorable() const { return parsed.has_value() && ppl.has_value(); }
    json to_json() const;
};

/// Rule-based transfer. Components the source shares with the target are
/// copied verbatim; positives missing from the source are drawn from
/// `example_pool`; everything else is left blank.
UnifiedTask heuristic_transfer(const UnifiedTask& task, const FormatSpec& target,
                               std::span<const TaskInstance> example_pool, std::uint64_t rng_seed,
                               std::size_t num_pos = kDefaultNumPositives);

/// Few-shot prompt: one "Example i." block per seed pair, then an open block
/// for `source_text` whose "Task description B:" is left for the model.
std::string build_transfer_prompt(std::span<const ParallelSeedPair> seeds,
                                  std::string_view source_text);

/// Generations stop before the model starts inventing another block.
const std::vector<std::string>& transfer_stop_sequences();

struct LlmTransferOptions {
    std::size_t n_samples = 1;
    double temperature = 1.0;
    std::size_t max_tokens = kDefaultMaxTokens;
    std::uint64_t base_seed = 0;  // sample i uses base_seed + i
    bool allow_any_n = false;     // skip the {1,2,4,8,16,32} check
    std::size_t workers = 1;
};

/// Sample counts accepted without allow_any_n.
bool is_standard_sample_count(std::size_t n);

/// Sample `n_samples` conversions of `source_text`. The result always has
/// n_samples candidates, ordered by sample_index, each parsed against
/// `target` (failures kept with parse_error).
std::vector<TransferCandidate> llm_transfer(CompletionBackend& backend,
                                            std::span<const ParallelSeedPair> seeds,
                                            std::string_view source_text, const FormatSpec& target,
                                            const LlmTransferOptions& options);

std::variant<TransferFragment, std::string> parse_candidate(std::string_view raw,
                                                            const FormatSpec& target);

/// Replace a task's target-format components with those of a parsed
/// task-level fragment.
UnifiedTask apply_fragment(const UnifiedTask& task, const TransferFragment& fragment,
                           const FormatSpec& target);

}  // namespace instfmt
