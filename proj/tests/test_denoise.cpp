#include "instfmt/denoise.hpp"
#include "instfmt/errors.hpp"
#include "instfmt/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>

using namespace instfmt;

namespace {

// Returns a scripted logprob list per continuation; records every request.
class ScriptedScorer : public ScoreBackend {
public:
    std::map<std::string, std::vector<double>> by_continuation;
    std::vector<ScoreRequest> requests;

    ScoreResponse score(const ScoreRequest& r) override {
        std::lock_guard lk(mu_);
        requests.push_back(r);
        ScoreResponse resp;
        resp.token_logprobs = by_continuation.at(r.continuation);
        resp.token_texts.assign(resp.token_logprobs.size(), "t");
        return resp;
    }

private:
    std::mutex mu_;
};

TransferCandidate parsed_candidate(std::size_t index, std::string instruction) {
    TransferCandidate c;
    c.sample_index = index;
    c.raw_generation = instruction;
    TransferFragment f;
    f.instruction_text = std::move(instruction);
    c.parsed = f;
    return c;
}

std::vector<TransferCandidate> with_ppls(const std::vector<double>& ppls) {
    std::vector<TransferCandidate> out;
    for (std::size_t i = 0; i < ppls.size(); ++i) {
        auto c = parsed_candidate(i, "c" + std::to_string(i));
        c.ppl = ppls[i];
        out.push_back(std::move(c));
    }
    return out;
}

TransferCandidate unparsed(std::size_t index) {
    TransferCandidate c;
    c.sample_index = index;
    c.parse_error = "Definition";
    return c;
}

}  // namespace

TEST_CASE("perplexity analytic values") {
    const double ln_half = std::log(0.5);
    const double ln_quarter = std::log(0.25);
    CHECK(perplexity(std::vector<double>{0.0}) == 1.0);
    CHECK(std::abs(perplexity(std::vector<double>{ln_half, ln_half}) - 2.0) < 1e-12);
    CHECK(std::abs(perplexity(std::vector<double>{ln_quarter, 0.0}) - 2.0) < 1e-12);
    CHECK_THROWS_AS(perplexity(std::vector<double>{}), ValidationError);
    CHECK_THROWS_AS(perplexity(std::vector<double>{-1.0, NAN}), ValidationError);
    CHECK_THROWS_AS(perplexity(std::vector<double>{-INFINITY}), ValidationError);
}

TEST_CASE("perplexity is at least one for non-positive logprobs") {
    Rng rng(3);
    for (int i = 0; i < 500; ++i) {
        std::vector<double> lp(1 + rng.below(20));
        for (auto& x : lp) x = -static_cast<double>(rng.below(10000)) / 1000.0;
        CHECK(perplexity(lp) >= 1.0);
    }
}

TEST_CASE("score_candidate") {
    const double ln_half = std::log(0.5);
    ScriptedScorer scorer;
    scorer.by_continuation["POS"] = {ln_half, ln_half};        // ppl 2
    scorer.by_continuation["NEG"] = {std::log(0.25)};          // ppl 4
    scorer.by_continuation["MID"] = {std::log(0.125)};         // ppl 8

    SUBCASE("single positive") {
        auto c = parsed_candidate(0, "Definition: d");
        std::vector<DemonstrationExample> pos = {{"good film", "POS", std::nullopt}};
        const auto s = score_candidate(scorer, c, pos);
        CHECK(std::abs(s.ppl - 2.0) < 1e-12);
        CHECK(s.examples_used == 1);
        CHECK(c.ppl == s.ppl);
        REQUIRE(scorer.requests.size() == 1);
        CHECK(scorer.requests[0].prefix == "Definition: d\n\nInput: good film\nOutput: ");
        CHECK(scorer.requests[0].continuation == "POS");
    }
    SUBCASE("mean over two positives") {
        auto c = parsed_candidate(0, "x");
        std::vector<DemonstrationExample> pos = {{"a", "POS", std::nullopt}, {"b", "NEG", std::nullopt}};
        const auto s = score_candidate(scorer, c, pos);
        CHECK(std::abs(s.ppl - 3.0) < 1e-12);
        CHECK(s.per_example_ppl.size() == 2);
    }
    SUBCASE("max_examples caps the requests") {
        auto c = parsed_candidate(0, "x");
        std::vector<DemonstrationExample> pos = {
            {"a", "POS", std::nullopt}, {"b", "NEG", std::nullopt}, {"c", "MID", std::nullopt}};
        score_candidate(scorer, c, pos, 1);
        CHECK(scorer.requests.size() == 1);
        scorer.requests.clear();
        const auto s = score_candidate(scorer, c, pos);
        CHECK(scorer.requests.size() == kDefaultScoreExamples);
        CHECK(std::abs(s.ppl - 3.0) < 1e-12);
    }
    SUBCASE("unparsed candidates are never scored") {
        auto c = unparsed(0);
        std::vector<DemonstrationExample> pos = {{"a", "POS", std::nullopt}};
        CHECK_THROWS_AS(score_candidate(scorer, c, pos), ValidationError);
        std::vector<TransferCandidate> cands = {unparsed(0), parsed_candidate(1, "y")};
        const auto scores = score_candidates(scorer, cands, pos, 2, 4);
        REQUIRE(scores.size() == 1);
        CHECK(scores[0].candidate_index == 1);
        CHECK(scorer.requests.size() == 1);
        CHECK_FALSE(cands[0].ppl);
    }
    SUBCASE("empty positives") {
        auto c = parsed_candidate(0, "x");
        CHECK_THROWS_AS(score_candidate(scorer, c, {}), ValidationError);
    }
    SUBCASE("rendered candidate") {
        auto c = parsed_candidate(0, "Review: good. Positive or negative?");
        const auto s = score_rendered_candidate(scorer, c, "POS");
        CHECK(std::abs(s.ppl - 2.0) < 1e-12);
        CHECK(scorer.requests[0].prefix == "Review: good. Positive or negative?\n");
    }
}

TEST_CASE("selection examples") {
    CHECK(select_test_time(with_ppls({5.2, 3.1, 8.0})) == 1u);
    CHECK(select_test_time(with_ppls({3.0, 3.0})) == 0u);
    std::vector<TransferCandidate> bad = {unparsed(0), unparsed(1)};
    CHECK_FALSE(select_test_time(bad));
    CHECK(select_train_time(bad, 2).empty());
    CHECK(select_train_time(with_ppls({4.0, 2.0, 3.0}), 2) == std::vector<std::size_t>{1, 2});
    CHECK(select_train_time(with_ppls({4.0, 2.0, 3.0}), 10) == std::vector<std::size_t>{1, 2, 0});
    CHECK_THROWS_AS(select_train_time(with_ppls({1.0}), 0), ValidationError);

    // A low ppl on an unparsed candidate is ignored.
    auto mixed = with_ppls({4.0, 5.0});
    auto u = unparsed(2);
    u.ppl = 1.0;
    mixed.push_back(u);
    CHECK(select_test_time(mixed) == 0u);
}

TEST_CASE("selection properties on random candidate sets") {
    Rng rng(11);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng.below(32);
        std::vector<TransferCandidate> cands;
        for (std::size_t i = 0; i < n; ++i) {
            if (rng.below(5) == 0) {
                cands.push_back(unparsed(i));
                continue;
            }
            auto c = parsed_candidate(i, "c");
            c.ppl = 1.0 + static_cast<double>(rng.below(8));  // coarse values force ties
            cands.push_back(std::move(c));
        }
        const auto sel = select_test_time(cands);
        const bool any = std::any_of(cands.begin(), cands.end(), [](const auto& c) { return c.scorable(); });
        REQUIRE(sel.has_value() == any);
        if (!sel) continue;
        const auto& best = cands[*sel];
        for (const auto& c : cands) {
            if (!c.scorable()) continue;
            CHECK(*best.ppl <= *c.ppl);                                       // argmin dominance
            if (*c.ppl == *best.ppl) CHECK(best.sample_index <= c.sample_index);  // tie-break
        }
        CHECK(select_train_time(cands, 1) == std::vector<std::size_t>{*sel});

        // Permutation invariance.
        auto shuffled = cands;
        rng.shuffle(shuffled);
        CHECK(select_test_time(shuffled) == sel);
        const std::size_t k = 1 + rng.below(6);
        CHECK(select_train_time(shuffled, k) == select_train_time(cands, k));

        // Train-time picks are sorted by (ppl, index).
        const auto top = select_train_time(cands, k);
        for (std::size_t i = 1; i < top.size(); ++i) {
            const auto& a = cands[top[i - 1]];
            const auto& b = cands[top[i]];
            CHECK((*a.ppl < *b.ppl || (*a.ppl == *b.ppl && a.sample_index < b.sample_index)));
        }
    }
}

TEST_CASE("ranking by ppl equals ranking by negative mean logprob") {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<std::vector<double>> seqs(2 + rng.below(10));
        for (auto& s : seqs) {
            s.resize(1 + rng.below(12));
            for (auto& x : s) x = -static_cast<double>(rng.below(50000)) / 10000.0;
        }
        auto nml = [](const std::vector<double>& s) {
            double sum = 0;
            for (double x : s) sum -= x;
            return sum / static_cast<double>(s.size());
        };
        std::vector<std::size_t> by_ppl(seqs.size()), by_nml(seqs.size());
        for (std::size_t i = 0; i < seqs.size(); ++i) by_ppl[i] = by_nml[i] = i;
        std::stable_sort(by_ppl.begin(), by_ppl.end(),
                         [&](std::size_t a, std::size_t b) { return perplexity(seqs[a]) < perplexity(seqs[b]); });
        std::stable_sort(by_nml.begin(), by_nml.end(),
                         [&](std::size_t a, std::size_t b) { return nml(seqs[a]) < nml(seqs[b]); });
        CHECK(by_ppl == by_nml);
    }
}

TEST_CASE("nested candidate sets never worsen the selected ppl") {
    auto transport = std::make_shared<MockTransport>();
    EndpointClient client(EndpointConfig{}, transport);
    const std::vector<DemonstrationExample> pos = {{"the film was fine", "POS", std::nullopt}};
    for (int set = 0; set < 20; ++set) {
        std::vector<TransferCandidate> cands;
        for (std::size_t i = 0; i < 32; ++i)
            cands.push_back(parsed_candidate(i, "Definition: variant " + std::to_string(set) + "." + std::to_string(i)));
        score_candidates(client, cands, pos, 1, 4);
        double prev = INFINITY;
        for (std::size_t n : {1, 2, 4, 8, 16, 32}) {
            const auto sel = select_test_time(std::span(cands).first(n));
            REQUIRE(sel);
            CHECK(*cands[*sel].ppl <= prev);
            prev = *cands[*sel].ppl;
        }
    }
}

TEST_CASE("denoise report record") {
    auto cands = with_ppls({2.5, 1.5});
    cands.push_back(unparsed(2));
    const std::vector<std::size_t> sel = {1};
    const auto j = denoise_record("task1/i0", cands, sel, false);
    CHECK(j["candidates"] == 3);
    CHECK(j["parse_failures"] == 1);
    CHECK(j["ppl"][2].is_null());
    CHECK(j["selected"] == json::array({1}));
    CHECK(j["fallback"] == false);
}
