#pragma once

// Corpus conversion: heuristic transfer, or sample / score / select through
// the completion and scoring backends with heuristic fallback.

#include "instfmt/backend.hpp"
#include "instfmt/corpus.hpp"
#include "instfmt/denoise.hpp"
#include "instfmt/transfer.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace instfmt {

enum class ConvertMode { Heuristic, Llm };

inline constexpr double kDefaultFallbackThreshold = 0.2;

struct ConvertOptions {
    ConvertMode mode = ConvertMode::Heuristic;
    FormatSpec target = FormatSpec::task_level({true, true, false, false});
    std::vector<ParallelSeedPair> seeds;  // llm mode
    std::size_t n_samples = 1;
    double temperature = 1.0;
    std::size_t max_tokens = kDefaultMaxTokens;
    bool train_time = false;
    std::size_t keep = kDefaultTrainKeep;
    std::size_t max_examples = kDefaultScoreExamples;
    std::size_t num_pos = kDefaultNumPositives;
    std::uint64_t seed = 0;
    std::size_t concurrency = 1;
};

struct ConvertResult {
    Corpus corpus;
    std::vector<json> report;  // one line per record
    std::size_t records = 0;
    std::size_t fallbacks = 0;

    double fallback_rate() const {
        return records ? static_cast<double>(fallbacks) / static_cast<double>(records) : 0.0;
    }
};

/// Train-time variants get "#<sample_index>" appended to their task id
/// (task-level targets) or instance id (instance and keywords targets).
std::string variant_id(std::string_view id, std::size_t sample_index);

/// Backends are only touched in llm mode and may be null otherwise.
ConvertResult convert_corpus(const Corpus& source, const ConvertOptions& options,
                             CompletionBackend* completion, ScoreBackend* scoring);

/// True when the fallback rate exceeds `threshold`.
bool threshold_breached(const ConvertResult& result, double threshold);

}  // namespace instfmt
