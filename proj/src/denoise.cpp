#include "instfmt/denoise.hpp"

#include "instfmt/errors.hpp"
#include "instfmt/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace instfmt {

double perplexity(std::span<const double> token_logprobs) {
    if (token_logprobs.empty()) throw ValidationError("perplexity of an empty sequence");
    double sum = 0.0;
    for (double lp : token_logprobs) {
        if (!std::isfinite(lp)) throw ValidationError("perplexity: non-finite log-probability");
        sum += lp;
    }
    return std::exp(-sum / static_cast<double>(token_logprobs.size()));
}

std::string scoring_prefix(std::string_view instruction, std::string_view input) {
    std::string out(instruction);
    out += "\n\nInput: ";
    out += input;
    out += "\nOutput: ";
    return out;
}

namespace {

double score_one(ScoreBackend& scorer, std::string prefix, std::string continuation) {
    ScoreRequest req;
    req.prefix = std::move(prefix);
    req.continuation = std::move(continuation);
    const ScoreResponse resp = scorer.score(req);
    return perplexity(resp.token_logprobs);
}

CandidateScore finish(TransferCandidate& c, std::vector<double> per_example) {
    CandidateScore s;
    s.candidate_index = c.sample_index;
    s.examples_used = per_example.size();
    s.ppl = std::accumulate(per_example.begin(), per_example.end(), 0.0) /
            static_cast<double>(per_example.size());
    s.per_example_ppl = std::move(per_example);
    c.ppl = s.ppl;
    return s;
}

void require_parsed(const TransferCandidate& c) {
    if (!c.parsed)
        throw ValidationError("candidate " + std::to_string(c.sample_index) + " is unparsed (" +
                              c.parse_error.value_or("unknown") + ")");
}

}  // namespace

CandidateScore score_candidate(ScoreBackend& scorer, TransferCandidate& candidate,
                               std::span<const DemonstrationExample> positives,
                               std::size_t max_examples) {
    require_parsed(candidate);
    if (positives.empty()) throw ValidationError("score_candidate: no positive examples");
    if (max_examples == 0) throw ValidationError("score_candidate: max_examples must be >= 1");
    const std::size_t n = std::min(max_examples, positives.size());
    std::vector<double> per_example;
    per_example.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        per_example.push_back(score_one(scorer, scoring_prefix(candidate.parsed->instruction_text, positives[i].input),
                                        positives[i].output));
    return finish(candidate, std::move(per_example));
}

CandidateScore score_rendered_candidate(ScoreBackend& scorer, TransferCandidate& candidate,
                                        std::string_view reference) {
    require_parsed(candidate);
    return finish(candidate, {score_one(scorer, candidate.parsed->instruction_text + "\n",
                                        std::string(reference))});
}

std::vector<CandidateScore> score_candidates(ScoreBackend& scorer,
                                             std::vector<TransferCandidate>& candidates,
                                             std::span<const DemonstrationExample> positives,
                                             std::size_t max_examples, std::size_t workers) {
    std::vector<std::optional<CandidateScore>> slots(candidates.size());
    parallel_for(candidates.size(), workers, [&](std::size_t i) {
        if (candidates[i].parsed)
            slots[i] = score_candidate(scorer, candidates[i], positives, max_examples);
    });
    std::vector<CandidateScore> out;
    for (auto& s : slots)
        if (s) out.push_back(std::move(*s));
    return out;
}

namespace {

std::vector<const TransferCandidate*> ranked(std::span<const TransferCandidate> scored) {
    std::vector<const TransferCandidate*> r;
    for (const auto& c : scored)
        if (c.scorable()) r.push_back(&c);
    std::sort(r.begin(), r.end(), [](const TransferCandidate* a, const TransferCandidate* b) {
        if (*a->ppl != *b->ppl) return *a->ppl < *b->ppl;
        return a->sample_index < b->sample_index;
    });
    return r;
}

}  // namespace

std::optional<std::size_t> select_test_time(std::span<const TransferCandidate> scored) {
    const auto r = ranked(scored);
    if (r.empty()) return std::nullopt;
    return r.front()->sample_index;
}

std::vector<std::size_t> select_train_time(std::span<const TransferCandidate> scored, std::size_t k) {
    if (k == 0) throw ValidationError("select_train_time: k must be >= 1");
    const auto r = ranked(scored);
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < r.size() && i < k; ++i) out.push_back(r[i]->sample_index);
    return out;
}

json denoise_record(std::string_view record_id, std::span<const TransferCandidate> candidates,
                    std::span<const std::size_t> selected, bool fallback) {
    std::size_t failures = 0;
    json ppls = json::array();
    for (const auto& c : candidates) {
        if (!c.parsed) ++failures;
        ppls.push_back(c.ppl ? json(*c.ppl) : json(nullptr));
    }
    return {{"record", record_id},
            {"candidates", candidates.size()},
            {"parse_failures", failures},
            {"ppl", std::move(ppls)},
            {"selected", std::vector<std::size_t>(selected.begin(), selected.end())},
            {"fallback", fallback}};
}

}  // namespace instfmt
