#include "instfmt/pipeline.hpp"

#include "instfmt/errors.hpp"
#include "instfmt/parallel.hpp"
#include "instfmt/rng.hpp"

#include <algorithm>

namespace instfmt {

std::string variant_id(std::string_view id, std::size_t sample_index) {
    return std::string(id) + "#" + std::to_string(sample_index);
}

bool threshold_breached(const ConvertResult& result, double threshold) {
    return result.fallback_rate() > threshold;
}

namespace {

std::size_t shown_pos(const UnifiedTask& t) { return std::min(kDefaultNumPositives, t.positives.size()); }
std::size_t shown_neg(const UnifiedTask& t) { return std::min(kDefaultNumNegatives, t.negatives.size()); }

std::string source_instruction(const UnifiedTask& t) {
    return render_instruction(t, t.source_format, shown_pos(t), shown_neg(t));
}

std::string source_prompt(const UnifiedTask& t, const TaskInstance& inst) {
    return render(t, inst.instance_id, t.source_format, shown_pos(t), shown_neg(t)).prompt_text;
}

// Demonstrations used to score task-level candidates. Tasks without
// positives (instance or keywords sources) lend their first instances.
std::vector<DemonstrationExample> scoring_examples(const UnifiedTask& t, std::size_t max_examples) {
    if (!t.positives.empty()) return t.positives;
    std::vector<DemonstrationExample> out;
    for (const auto& inst : t.instances) {
        if (out.size() == max_examples) break;
        out.push_back({inst.input, inst.references.front(), std::nullopt});
    }
    if (out.empty()) throw ValidationError("task " + t.task_id + ": nothing to score candidates against");
    return out;
}

struct Record {
    std::size_t task = 0;
    std::optional<std::size_t> instance;
};

struct RecordOutput {
    std::vector<UnifiedTask> tasks;        // task-level targets
    std::vector<TaskInstance> instances;   // instance and keywords targets
    json report;
    bool fallback = false;
};

class Converter {
public:
    Converter(const ConvertOptions& o, CompletionBackend* c, ScoreBackend* s)
        : opts_(o), completion_(c), scoring_(s) {}

    RecordOutput heuristic_task(const UnifiedTask& task) const {
        RecordOutput out;
        const bool sampled = opts_.target.level() == FormatLevel::Task && opts_.target.mask().has_p &&
                             task.positives.empty();
        out.tasks.push_back(heuristic_transfer(task, opts_.target, task.instances,
                                               derive_seed(opts_.seed, task.task_id), opts_.num_pos));
        const auto& t = out.tasks.back();
        out.report = {{"record", task.task_id},
                      {"mode", "heuristic"},
                      {"positives_sampled", sampled},
                      {"definition_blank", t.definition && t.definition->empty()}};
        return out;
    }

    RecordOutput llm_task(const UnifiedTask& task) const {
        RecordOutput out;
        auto cands = sample(source_instruction(task), task.task_id);
        score_candidates(*scoring_, cands, scoring_examples(task, opts_.max_examples), opts_.max_examples, 1);
        const auto selected = select(cands);
        if (selected.empty()) {
            out.fallback = true;
            out.tasks.push_back(heuristic_transfer(task, opts_.target, task.instances,
                                                   derive_seed(opts_.seed, task.task_id), opts_.num_pos));
        }
        for (std::size_t idx : selected) {
            UnifiedTask t = apply_fragment(task, *cands[idx].parsed, opts_.target);
            if (opts_.train_time) t.task_id = variant_id(task.task_id, idx);
            out.tasks.push_back(std::move(t));
        }
        out.report = report_line(task.task_id, cands, selected, out.fallback);
        return out;
    }

    RecordOutput llm_instance(const UnifiedTask& task, const TaskInstance& inst) const {
        RecordOutput out;
        const std::string record_id = task.task_id + "/" + inst.instance_id;
        auto cands = sample(source_prompt(task, inst), record_id);
        for (auto& c : cands)
            if (c.parsed) score_rendered_candidate(*scoring_, c, inst.references.front());
        const auto selected = select(cands);
        if (selected.empty()) {
            out.fallback = true;
            TaskInstance t = inst;
            if (opts_.target.level() == FormatLevel::Instance) {
                const UnifiedTask h = heuristic_transfer(task, opts_.target, {}, 0);
                t.input = render(h, inst.instance_id, opts_.target).prompt_text;
            }
            out.instances.push_back(std::move(t));
        }
        for (std::size_t idx : selected) {
            TaskInstance t = inst;
            t.input = cands[idx].parsed->instance_text;
            if (opts_.train_time) t.instance_id = variant_id(inst.instance_id, idx);
            out.instances.push_back(std::move(t));
        }
        out.report = report_line(record_id, cands, selected, out.fallback);
        return out;
    }

private:
    std::vector<TransferCandidate> sample(const std::string& source_text, const std::string& label) const {
        LlmTransferOptions lo;
        lo.n_samples = opts_.n_samples;
        lo.temperature = opts_.temperature;
        lo.max_tokens = opts_.max_tokens;
        lo.base_seed = derive_seed(opts_.seed, label);
        return llm_transfer(*completion_, opts_.seeds, source_text, opts_.target, lo);
    }

    std::vector<std::size_t> select(const std::vector<TransferCandidate>& cands) const {
        if (opts_.train_time) return select_train_time(cands, opts_.keep);
        if (auto i = select_test_time(cands)) return {*i};
        return {};
    }

    static json report_line(const std::string& id, const std::vector<TransferCandidate>& cands,
                            const std::vector<std::size_t>& selected, bool fallback) {
        json j = denoise_record(id, cands, selected, fallback);
        j["mode"] = "llm";
        json errors = json::array();
        for (const auto& c : cands) errors.push_back(c.parse_error ? json(*c.parse_error) : json(nullptr));
        j["parse_errors"] = std::move(errors);
        return j;
    }

    const ConvertOptions& opts_;
    CompletionBackend* completion_;
    ScoreBackend* scoring_;
};

}  // namespace

ConvertResult convert_corpus(const Corpus& source, const ConvertOptions& options,
                             CompletionBackend* completion, ScoreBackend* scoring) {
    const bool llm = options.mode == ConvertMode::Llm;
    if (llm) {
        if (!completion || !scoring) throw ValidationError("convert: llm mode needs completion and scoring backends");
        if (options.seeds.empty()) throw ValidationError("convert: llm mode needs seed pairs");
        if (options.train_time && options.keep == 0) throw ValidationError("convert: --keep must be >= 1");
    }
    if (options.max_examples == 0) throw ValidationError("convert: max examples must be >= 1");

    std::vector<const UnifiedTask*> tasks;
    for (const auto& t : source.tasks) tasks.push_back(&t);
    std::stable_sort(tasks.begin(), tasks.end(),
                     [](const UnifiedTask* a, const UnifiedTask* b) { return a->task_id < b->task_id; });

    const bool per_instance = llm && options.target.level() != FormatLevel::Task;
    std::vector<Record> records;
    for (std::size_t i = 0; i < tasks.size(); ++i) {
        if (per_instance)
            for (std::size_t k = 0; k < tasks[i]->instances.size(); ++k) records.push_back({i, k});
        else
            records.push_back({i, std::nullopt});
    }

    Converter conv(options, completion, scoring);
    std::vector<RecordOutput> outs(records.size());
    parallel_for(records.size(), options.concurrency, [&](std::size_t r) {
        const UnifiedTask& task = *tasks[records[r].task];
        if (!llm)
            outs[r] = conv.heuristic_task(task);
        else if (records[r].instance)
            outs[r] = conv.llm_instance(task, task.instances[*records[r].instance]);
        else
            outs[r] = conv.llm_task(task);
    });

    ConvertResult res;
    res.corpus.name = source.name;
    res.corpus.format = per_instance && options.target.level() == FormatLevel::Instance
                            ? FormatSpec::instance_level("{input}")
                            : options.target;
    res.records = records.size();
    std::optional<std::size_t> open_task;
    for (std::size_t r = 0; r < records.size(); ++r) {
        auto& o = outs[r];
        res.fallbacks += o.fallback;
        res.report.push_back(std::move(o.report));
        if (!per_instance) {
            for (auto& t : o.tasks) res.corpus.tasks.push_back(std::move(t));
            continue;
        }
        if (open_task != records[r].task) {
            // Instance-level output: the rewritten prompt is the whole input.
            const UnifiedTask& task = *tasks[records[r].task];
            UnifiedTask shell = heuristic_transfer(task, res.corpus.format, {}, 0);
            shell.instances.clear();
            res.corpus.tasks.push_back(std::move(shell));
            open_task = records[r].task;
        }
        for (auto& i : o.instances) res.corpus.tasks.back().instances.push_back(std::move(i));
    }
    std::stable_sort(res.corpus.tasks.begin(), res.corpus.tasks.end(),
                     [](const UnifiedTask& a, const UnifiedTask& b) { return a.task_id < b.task_id; });
    return res;
}

}  // namespace instfmt
