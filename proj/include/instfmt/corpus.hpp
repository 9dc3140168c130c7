#pragma once

// Corpus-level transforms: train/test leakage filtering, src/same/diff
// mixtures, per-task instance caps and distillation pair construction.

#include "instfmt/backend.hpp"
#include "instfmt/schema.hpp"
#include "instfmt/transfer.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace instfmt {

struct Corpus {
    std::string name;
    std::vector<UnifiedTask> tasks;
    FormatSpec format = FormatSpec::task_level({true, false, false, false});

    /// Unique task ids, one format level, valid tasks.
    void validate() const;
    const UnifiedTask* find_task(std::string_view id) const;
};

/// Decode a JSON-Lines corpus. `format` selects the level (and the mask for
/// task level); instance templates and keywords come from the records.
Corpus load_corpus(const std::filesystem::path& path, const FormatSpec& format);
Corpus corpus_from_json(const std::vector<json>& records, const FormatSpec& format,
                        std::string name = {});
std::vector<json> corpus_to_json(const Corpus& corpus);

// --- leakage ---------------------------------------------------------------

/// normalize_text(input) + '\x1f' + normalize_text(first reference).
std::string leakage_key(const TaskInstance& inst);

/// Keys of every instance, tasks in corpus order. OpenMP parallel.
std::vector<std::string> leakage_keys(const Corpus& corpus);
/// Single-threaded reference for leakage_keys.
std::vector<std::string> leakage_keys_serial(const Corpus& corpus);

struct LeakageReport {
    std::map<std::string, std::vector<std::string>> removed;  // task id -> instance ids
    std::vector<std::string> dropped_tasks;                   // emptied by the filter
    std::size_t total_removed = 0;

    std::vector<json> to_jsonl() const;
};

struct FilterResult {
    Corpus corpus;
    LeakageReport report;
};

/// Drop train instances whose leakage key occurs in `test`.
FilterResult filter_leakage(const Corpus& train, const Corpus& test);

// --- mixtures --------------------------------------------------------------

struct MixtureConfig {
    std::size_t src_task_count = 20;
    bool include_same = false;
    bool include_diff = false;
    std::uint64_t rng_seed = 0;
};

/// src tasks sampled from `ni`; `same` are the tasks in `other` with the src
/// ids; `diff` are tasks in `other` whose ids do not occur in `ni`. Task ids
/// in the result carry a "src/", "same/" or "diff/" prefix. Both corpora must
/// share a format level.
Corpus build_mixture(const Corpus& ni, const Corpus& other, const MixtureConfig& cfg);

// --- caps ------------------------------------------------------------------

inline constexpr std::size_t kDefaultInstanceCap = 100;

/// Keep min(cap, n) instances per task, sampled with a per-task seed derived
/// from rng_seed and the task id. Kept instances stay in their original order.
Corpus cap_instances(const Corpus& corpus, std::size_t cap, std::uint64_t rng_seed);

// --- distillation ----------------------------------------------------------

struct DistillPair {
    std::string source_text;  // simple-format generation
    std::string target_text;  // original complex instruction
    std::string origin_task_id;

    json to_json() const;
};

inline constexpr std::size_t kDefaultDistillCount = 3000;
inline constexpr std::size_t kDefaultDistillSamplesPerTask = 3;

struct DistillOptions {
    std::size_t target_count = kDefaultDistillCount;
    std::size_t samples_per_task = kDefaultDistillSamplesPerTask;
    double temperature = 1.0;
    std::size_t max_tokens = kDefaultMaxTokens;
    std::uint64_t rng_seed = 0;
    std::size_t workers = 1;
};

struct DistillResult {
    std::vector<DistillPair> pairs;  // ordered by origin task id, then sample
    std::size_t skipped = 0;         // empty generations
    std::size_t tasks_used = 0;
    std::optional<std::string> warning;
};

/// The complex instruction of a task: every section of its own format.
std::string complex_instruction(const UnifiedTask& task);

/// Convert complex instructions to the simple format and emit reversed
/// pairs until target_count is reached. `seeds` map complex -> simple.
DistillResult build_distill_pairs(const Corpus& complex_corpus, CompletionBackend& backend,
                                  std::span<const ParallelSeedPair> seeds,
                                  const DistillOptions& options);

/// Trainer-agnostic fine-tuning defaults as commented key = value lines.
std::string trainer_config_stub();

}  // namespace instfmt
