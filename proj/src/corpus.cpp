#include "instfmt/corpus.hpp"

#include "instfmt/errors.hpp"
#include "instfmt/jsonl.hpp"
#include "instfmt/metrics.hpp"
#include "instfmt/parallel.hpp"
#include "instfmt/rng.hpp"
#include "instfmt/text.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <set>
#include <unordered_set>

namespace instfmt {

void Corpus::validate() const {
    std::set<std::string_view> ids;
    for (const auto& t : tasks) {
        if (!ids.insert(t.task_id).second)
            throw ValidationError("corpus " + name + ": duplicate task id '" + t.task_id + "'");
        if (t.source_format.level() != format.level())
            throw ValidationError("corpus " + name + ": task " + t.task_id + " is " +
                                  std::string(to_string(t.source_format.level())) +
                                  " level, corpus is " + std::string(to_string(format.level())));
        t.validate();
    }
}

const UnifiedTask* Corpus::find_task(std::string_view id) const {
    for (const auto& t : tasks)
        if (t.task_id == id) return &t;
    return nullptr;
}

Corpus corpus_from_json(const std::vector<json>& records, const FormatSpec& format, std::string name) {
    Corpus c;
    c.name = std::move(name);
    c.format = format;
    c.tasks.reserve(records.size());
    for (const auto& r : records) c.tasks.push_back(decode_task(r, format));
    c.validate();
    return c;
}

Corpus load_corpus(const std::filesystem::path& path, const FormatSpec& format) {
    return corpus_from_json(read_jsonl(path), format, path.stem().string());
}

std::vector<json> corpus_to_json(const Corpus& corpus) {
    std::vector<json> out;
    out.reserve(corpus.tasks.size());
    for (const auto& t : corpus.tasks) out.push_back(encode_task(t, t.source_format));
    return out;
}

namespace {

void sort_by_id(std::vector<UnifiedTask>& tasks) {
    std::stable_sort(tasks.begin(), tasks.end(),
                     [](const UnifiedTask& a, const UnifiedTask& b) { return a.task_id < b.task_id; });
}

std::vector<const TaskInstance*> flatten(const Corpus& corpus) {
    std::vector<const TaskInstance*> out;
    for (const auto& t : corpus.tasks)
        for (const auto& i : t.instances) out.push_back(&i);
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Leakage

std::string leakage_key(const TaskInstance& inst) {
    std::string key = normalize_text(inst.input);
    key += '\x1f';
    if (!inst.references.empty()) key += normalize_text(inst.references.front());
    return key;
}

std::vector<std::string> leakage_keys_serial(const Corpus& corpus) {
    std::vector<std::string> keys;
    for (const auto* i : flatten(corpus)) keys.push_back(leakage_key(*i));
    return keys;
}

std::vector<std::string> leakage_keys(const Corpus& corpus) {
    const auto insts = flatten(corpus);
    std::vector<std::string> keys(insts.size());
    const auto n = static_cast<std::ptrdiff_t>(insts.size());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) keys[i] = leakage_key(*insts[i]);
    return keys;
}

std::vector<json> LeakageReport::to_jsonl() const {
    std::vector<json> out;
    for (const auto& [task, ids] : removed) {
        const bool dropped = std::find(dropped_tasks.begin(), dropped_tasks.end(), task) != dropped_tasks.end();
        out.push_back({{"task_id", task}, {"removed", ids}, {"count", ids.size()}, {"task_dropped", dropped}});
    }
    out.push_back({{"total_removed", total_removed}, {"tasks_dropped", dropped_tasks.size()}});
    return out;
}

FilterResult filter_leakage(const Corpus& train, const Corpus& test) {
    const auto test_keys = leakage_keys(test);
    const std::unordered_set<std::string> blocked(test_keys.begin(), test_keys.end());
    const auto train_keys = leakage_keys(train);

    FilterResult res;
    res.corpus.name = train.name;
    res.corpus.format = train.format;
    std::size_t k = 0;
    for (const auto& t : train.tasks) {
        UnifiedTask kept = t;
        kept.instances.clear();
        for (const auto& inst : t.instances) {
            if (blocked.contains(train_keys[k++])) {
                res.report.removed[t.task_id].push_back(inst.instance_id);
                ++res.report.total_removed;
            } else {
                kept.instances.push_back(inst);
            }
        }
        if (kept.instances.empty() && !t.instances.empty())
            res.report.dropped_tasks.push_back(t.task_id);
        else
            res.corpus.tasks.push_back(std::move(kept));
    }
    sort_by_id(res.corpus.tasks);
    std::sort(res.report.dropped_tasks.begin(), res.report.dropped_tasks.end());
    return res;
}

// ---------------------------------------------------------------------------
// Mixtures

namespace {

std::vector<const UnifiedTask*> sorted_tasks(const Corpus& c) {
    std::vector<const UnifiedTask*> out;
    for (const auto& t : c.tasks) out.push_back(&t);
    std::sort(out.begin(), out.end(),
              [](const UnifiedTask* a, const UnifiedTask* b) { return a->task_id < b->task_id; });
    return out;
}

UnifiedTask prefixed(const UnifiedTask& t, std::string_view group) {
    UnifiedTask out = t;
    out.task_id = std::string(group) + "/" + t.task_id;
    return out;
}

}  // namespace

Corpus build_mixture(const Corpus& ni, const Corpus& other, const MixtureConfig& cfg) {
    if (cfg.src_task_count == 0) throw ValidationError("mixture: src_task_count must be >= 1");
    if (ni.format.level() != other.format.level())
        throw ValidationError("mixture: corpora have different format levels (" +
                              std::string(to_string(ni.format.level())) + " vs " +
                              std::string(to_string(other.format.level())) + ")");
    const std::size_t n = cfg.src_task_count;

    std::set<std::string> other_ids;
    for (const auto& t : other.tasks) other_ids.insert(t.task_id);
    std::set<std::string> ni_ids;
    for (const auto& t : ni.tasks) ni_ids.insert(t.task_id);

    std::vector<const UnifiedTask*> pool;
    for (const auto* t : sorted_tasks(ni))
        if (!cfg.include_same || other_ids.contains(t->task_id)) pool.push_back(t);
    if (pool.size() < n)
        throw ValidationError("mixture: need " + std::to_string(n) + " src tasks, " + ni.name + " offers " +
                              std::to_string(pool.size()) +
                              (cfg.include_same ? " that also occur in " + other.name : std::string()));

    Corpus out;
    out.name = "mixture";
    out.format = ni.format;
    Rng src_rng(derive_seed(cfg.rng_seed, "src"));
    std::vector<const UnifiedTask*> src;
    for (std::size_t i : src_rng.sample_indices(pool.size(), n)) src.push_back(pool[i]);
    for (const auto* t : src) out.tasks.push_back(prefixed(*t, "src"));

    if (cfg.include_same)
        for (const auto* t : src) out.tasks.push_back(prefixed(*other.find_task(t->task_id), "same"));

    if (cfg.include_diff) {
        std::vector<const UnifiedTask*> diff_pool;
        for (const auto* t : sorted_tasks(other))
            if (!ni_ids.contains(t->task_id)) diff_pool.push_back(t);
        if (diff_pool.size() < n)
            throw ValidationError("mixture: need " + std::to_string(n) + " diff tasks, " + other.name +
                                  " has " + std::to_string(diff_pool.size()) + " not in " + ni.name);
        Rng diff_rng(derive_seed(cfg.rng_seed, "diff"));
        for (std::size_t i : diff_rng.sample_indices(diff_pool.size(), n))
            out.tasks.push_back(prefixed(*diff_pool[i], "diff"));
    }
    sort_by_id(out.tasks);
    return out;
}

// ---------------------------------------------------------------------------
// Caps

Corpus cap_instances(const Corpus& corpus, std::size_t cap, std::uint64_t rng_seed) {
    if (cap == 0) throw ValidationError("instance cap must be >= 1");
    Corpus out = corpus;
    for (auto& t : out.tasks) {
        if (t.instances.size() <= cap) continue;
        Rng rng(derive_seed(rng_seed, t.task_id));
        auto idx = rng.sample_indices(t.instances.size(), cap);
        std::sort(idx.begin(), idx.end());
        std::vector<TaskInstance> kept;
        kept.reserve(cap);
        for (std::size_t i : idx) kept.push_back(std::move(t.instances[i]));
        t.instances = std::move(kept);
    }
    sort_by_id(out.tasks);
    return out;
}

// ---------------------------------------------------------------------------
// Distillation

json DistillPair::to_json() const {
    return {{"source_text", source_text}, {"target_text", target_text}, {"origin_task_id", origin_task_id}};
}

std::string complex_instruction(const UnifiedTask& task) {
    if (task.source_format.level() != FormatLevel::Task)
        throw ValidationError("task " + task.task_id + ": distillation needs a task-level source");
    return render_instruction(task, task.source_format, task.positives.size(), task.negatives.size());
}

DistillResult build_distill_pairs(const Corpus& complex_corpus, CompletionBackend& backend,
                                  std::span<const ParallelSeedPair> seeds, const DistillOptions& options) {
    if (complex_corpus.format.level() != FormatLevel::Task)
        throw ValidationError("distill: corpus must be task level");
    if (options.target_count == 0) throw ValidationError("distill: target count must be >= 1");
    if (options.samples_per_task == 0) throw ValidationError("distill: samples per task must be >= 1");

    std::vector<const UnifiedTask*> order = sorted_tasks(complex_corpus);
    Rng(options.rng_seed).shuffle(order);

    const FormatSpec simple = FormatSpec::instance_level("{input}");
    LlmTransferOptions lopts;
    lopts.n_samples = options.samples_per_task;
    lopts.allow_any_n = true;
    lopts.temperature = options.temperature;
    lopts.max_tokens = options.max_tokens;

    struct TaskOutput {
        std::vector<DistillPair> pairs;
        std::size_t skipped = 0;
    };

    DistillResult res;
    const std::size_t batch = std::max<std::size_t>(options.workers, 1);
    std::size_t next = 0;
    while (res.pairs.size() < options.target_count && next < order.size()) {
        const std::size_t count = std::min(batch, order.size() - next);
        std::vector<TaskOutput> outs(count);
        parallel_for(count, options.workers, [&](std::size_t i) {
            const UnifiedTask& task = *order[next + i];
            const std::string target = complex_instruction(task);
            LlmTransferOptions o = lopts;
            o.base_seed = derive_seed(options.rng_seed, task.task_id);
            std::vector<TransferCandidate> cands;
            try {
                cands = llm_transfer(backend, seeds, target, simple, o);
            } catch (const ProtocolError&) {
                outs[i].skipped = options.samples_per_task;  // every generation was empty
                return;
            }
            for (const auto& c : cands) {
                if (!c.parsed) {
                    ++outs[i].skipped;
                    continue;
                }
                outs[i].pairs.push_back({c.parsed->instance_text, target, task.task_id});
            }
        });
        // Consume in shuffle order so the used-task prefix is independent of batch size.
        for (std::size_t i = 0; i < count && res.pairs.size() < options.target_count; ++i) {
            ++res.tasks_used;
            res.skipped += outs[i].skipped;
            for (auto& p : outs[i].pairs) {
                if (res.pairs.size() == options.target_count) break;
                res.pairs.push_back(std::move(p));
            }
        }
        next += count;
    }

    if (res.pairs.size() < options.target_count) {
        res.warning = "distill: produced " + std::to_string(res.pairs.size()) + " of " +
                      std::to_string(options.target_count) + " requested pairs (" +
                      std::to_string(complex_corpus.tasks.size()) + " tasks, " +
                      std::to_string(res.skipped) + " generations skipped)";
        spdlog::warn("{}", *res.warning);
    }
    std::stable_sort(res.pairs.begin(), res.pairs.end(), [](const DistillPair& a, const DistillPair& b) {
        return a.origin_task_id < b.origin_task_id;
    });
    return res;
}

std::string trainer_config_stub() {
    return "# Fine-tuning defaults for the offline simple-to-complex transfer model.\n"
           "# Pairs file: JSON-Lines {source_text, target_text, origin_task_id};\n"
           "# train on source_text -> target_text.\n"
           "max_source_length = 1024\n"
           "max_target_length = 128\n"
           "batch_size = 16\n"
           "learning_rate = 1e-5\n"
           "num_train_epochs = 2\n"
           "lr_scheduler = linear\n"
           "warmup_steps = 1000\n"
           "max_instances_per_task = 100\n";
}

}  // namespace instfmt
