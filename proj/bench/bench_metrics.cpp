// Times the OpenMP batch kernels against their serial references.
//   bench_metrics [records] [repeats]

#include "instfmt/corpus.hpp"
#include "instfmt/metrics.hpp"
#include "instfmt/rng.hpp"

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

using namespace instfmt;

namespace {

std::string words(Rng& rng, std::size_t n) {
    static const char* vocab[] = {"the", "river", "Stone", "market,", "a", "lantern", "signal.", "harbor",
                                  "meadow", "copper!", "ladder", "window", "an", "orchard", "thunder"};
    std::string s;
    for (std::size_t i = 0; i < n; ++i) {
        if (i) s += ' ';
        s += vocab[rng.below(std::size(vocab))];
    }
    return s;
}

template <typename Fn>
double best_ms(int repeats, Fn&& fn) {
    double best = 1e300;
    for (int r = 0; r < repeats; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const auto t1 = std::chrono::steady_clock::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

}  // namespace

int main(int argc, char** argv) {
    const std::size_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 50000;
    const int repeats = argc > 2 ? std::atoi(argv[2]) : 3;
    Rng rng(1);

    std::vector<Prediction> preds;
    preds.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        preds.push_back({"t" + std::to_string(i % 100), std::to_string(i), words(rng, 5 + rng.below(40)),
                         {words(rng, 5 + rng.below(40)), words(rng, 5 + rng.below(40))}});

    Corpus corpus;
    corpus.format = FormatSpec::task_level({true, false, false, false});
    for (std::size_t t = 0; t < 100; ++t) {
        UnifiedTask task;
        task.task_id = "t" + std::to_string(t);
        task.definition = "d";
        task.source_format = corpus.format;
        for (std::size_t i = t; i < n; i += 100)
            task.instances.push_back({std::to_string(i), preds[i].prediction, preds[i].references, json::object()});
        corpus.tasks.push_back(std::move(task));
    }

    std::printf("threads: %d, records: %zu, best of %d\n", omp_get_max_threads(), n, repeats);

    std::vector<EvalRecord> serial, parallel;
    const double s1 = best_ms(repeats, [&] { serial = score_predictions_serial(preds); });
    const double p1 = best_ms(repeats, [&] { parallel = score_predictions(preds); });
    std::printf("%-16s serial %9.1f ms  parallel %9.1f ms  speedup %5.2fx  %s\n", "score_predictions", s1, p1,
                s1 / p1, serial == parallel ? "equal" : "MISMATCH");

    std::vector<std::string> ks, kp;
    const double s2 = best_ms(repeats, [&] { ks = leakage_keys_serial(corpus); });
    const double p2 = best_ms(repeats, [&] { kp = leakage_keys(corpus); });
    std::printf("%-16s serial %9.1f ms  parallel %9.1f ms  speedup %5.2fx  %s\n", "leakage_keys", s2, p2, s2 / p2,
                ks == kp ? "equal" : "MISMATCH");
    return serial == parallel && ks == kp ? 0 : 1;
}
