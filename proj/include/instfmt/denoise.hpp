#pragma once

// Perplexity scoring of transfer candidates and the two selection policies:
// argmin for test-time transfer, lowest-k for train-time transfer.

#include "instfmt/backend.hpp"
#include "instfmt/transfer.hpp"

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace instfmt {

/// exp(-mean(logprobs)). Throws ValidationError on an empty list or a
/// non-finite entry.
double perplexity(std::span<const double> token_logprobs);

struct CandidateScore {
    std::size_t candidate_index = 0;
    double ppl = 0.0;
    std::vector<double> per_example_ppl;
    std::size_t examples_used = 0;
};

inline constexpr std::size_t kDefaultScoreExamples = 2;
inline constexpr std::size_t kDefaultTrainKeep = 2;

/// Scoring context for one demonstration: the instruction followed by the
/// example input and an open Output label.
std::string scoring_prefix(std::string_view instruction, std::string_view input);

/// Mean PPL of the first `max_examples` positives' outputs given the
/// candidate's instruction. Sets candidate.ppl. Throws ValidationError when
/// the candidate is unparsed or there are no positives.
CandidateScore score_candidate(ScoreBackend& scorer, TransferCandidate& candidate,
                               std::span<const DemonstrationExample> positives,
                               std::size_t max_examples = kDefaultScoreExamples);

/// Instance and keywords level: PPL of `reference` given the rewritten
/// prompt line.
CandidateScore score_rendered_candidate(ScoreBackend& scorer, TransferCandidate& candidate,
                                        std::string_view reference);

/// Scores every parsed candidate, skipping the rest. Results are in
/// candidate order.
std::vector<CandidateScore> score_candidates(ScoreBackend& scorer,
                                             std::vector<TransferCandidate>& candidates,
                                             std::span<const DemonstrationExample> positives,
                                             std::size_t max_examples = kDefaultScoreExamples,
                                             std::size_t workers = 1);

/// sample_index of the lowest-PPL scorable candidate, ties to the lowest
/// sample_index. nullopt when nothing is scorable: the caller falls back.
std::optional<std::size_t> select_test_time(std::span<const TransferCandidate> scored);

/// sample_index values of the min(k, #scorable) lowest-PPL candidates,
/// ordered by (ppl, sample_index). Empty when nothing is scorable.
std::vector<std::size_t> select_train_time(std::span<const TransferCandidate> scored,
                                           std::size_t k = kDefaultTrainKeep);

/// One denoise report line.
json denoise_record(std::string_view record_id, std::span<const TransferCandidate> candidates,
                    std::span<const std::size_t> selected, bool fallback);

}  // namespace instfmt
