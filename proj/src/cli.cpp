#include "instfmt/cli.hpp"

#include "instfmt/corpus.hpp"
#include "instfmt/errors.hpp"
#include "instfmt/hashing.hpp"
#include "instfmt/jsonl.hpp"
#include "instfmt/metrics.hpp"
#include "instfmt/pipeline.hpp"
#include "instfmt/text.hpp"
#include "instfmt/version.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <chrono>
#include <ctime>
#include <iostream>
#include <map>
#include <set>

namespace instfmt {

namespace {

namespace fs = std::filesystem;

struct Globals {
    std::string config;
    std::string cache_dir;
    std::size_t concurrency = 1;
    std::uint64_t seed = 0;
    std::string backend = "mock";
    bool dry_run = false;
    std::string log_level = "warn";
    double fallback_threshold = kDefaultFallbackThreshold;
};

void setup_logging(const std::string& level) {
    auto logger = spdlog::get("instfmt");
    if (!logger) {
        logger = spdlog::stderr_color_mt("instfmt");
        logger->set_pattern("%^%l%$: %v");
    }
    spdlog::set_default_logger(logger);
    const auto lvl = spdlog::level::from_str(level);
    if (lvl == spdlog::level::off && level != "off")
        throw ValidationError("unknown log level '" + level + "'");
    spdlog::set_level(lvl);
}

/// A bare level name stands for "whatever the records say": decode reads
/// templates and keywords from each record.
FormatSpec parse_corpus_format(const std::string& text) {
    const std::string t = to_lower(trim(text));
    if (t == "instance") return FormatSpec::instance_level("{input}");
    if (t == "keywords") return FormatSpec::keywords_level({"keywords"});
    return parse_format_spec(text);
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class Run {
public:
    Globals g;
    json config_file = json::object();
    json options = json::object();  // resolved command options, hashed into the manifest
    std::map<std::string, std::string> inputs;
    std::vector<std::string> outputs;

    void add_input(const std::string& path) { inputs[path] = sha256_file(path); }

    Corpus load(const std::string& path, const std::string& format) {
        add_input(path);
        return load_corpus(path, parse_corpus_format(format));
    }

    Backends& backends() {
        if (!backends_) {
            const auto profiles = load_profiles(config_file);
            const auto it = profiles.find(g.backend);
            if (it == profiles.end()) throw ValidationError("unknown backend profile '" + g.backend + "'");
            std::shared_ptr<ResponseCache> cache;
            if (!g.cache_dir.empty()) cache = std::make_shared<ResponseCache>(g.cache_dir);
            backends_ = make_backends(it->second, cache, g.concurrency);
        }
        return *backends_;
    }

    ClientStats stats() const {
        ClientStats s;
        if (!backends_) return s;
        for (const auto& c : {backends_->completion, backends_->scoring}) {
            const auto cs = c->stats();
            s.network_requests += cs.network_requests;
            s.cache_hits += cs.cache_hits;
            s.retries += cs.retries;
        }
        return s;
    }

    void write(const fs::path& path, const std::string& contents) {
        write_file(path, contents);
        outputs.push_back(path.string());
    }

    void write_jsonl_file(const fs::path& path, const std::vector<json>& records) {
        write(path, dump_jsonl(records));
    }

    void write_manifest(const fs::path& primary, const std::string& command) {
        json config = {{"command", command},
                       {"options", options},
                       {"seed", g.seed},
                       {"backend", g.backend},
                       {"concurrency", g.concurrency},
                       {"cache_dir", g.cache_dir}};
        if (!g.config.empty()) config["config_file"] = config_file;
        const auto s = stats();
        json m = {{"tool", "instfmt"},
                  {"version", std::string(kVersion)},
                  {"timestamp", utc_timestamp()},
                  {"command", command},
                  {"config", config},
                  {"config_hash", sha256_hex(config.dump())},
                  {"inputs", inputs},
                  {"outputs", outputs},
                  {"network_requests", s.network_requests},
                  {"cache_hits", s.cache_hits},
                  {"retries", s.retries}};
        write_file(fs::path(primary.string() + ".manifest.json"), m.dump(2) + "\n");
    }

private:
    std::optional<Backends> backends_;
};

// Applies config-file values to globals the command line left unset.
void apply_config(Run& run, const CLI::App& app) {
    if (run.g.config.empty()) return;
    run.add_input(run.g.config);
    try {
        run.config_file = json::parse(read_file(run.g.config));
    } catch (const json::exception& e) {
        throw ValidationError("config " + run.g.config + ": " + e.what());
    }
    if (!run.config_file.is_object()) throw ValidationError("config " + run.g.config + ": not a JSON object");
    const auto& c = run.config_file;
    auto unset = [&](const char* flag) { return app.get_option(flag)->count() == 0; };
    try {
        if (c.contains("cache_dir") && unset("--cache-dir")) run.g.cache_dir = c["cache_dir"].get<std::string>();
        if (c.contains("concurrency") && unset("--concurrency")) run.g.concurrency = c["concurrency"].get<std::size_t>();
        if (c.contains("seed") && unset("--seed")) run.g.seed = c["seed"].get<std::uint64_t>();
        if (c.contains("backend") && unset("--backend")) run.g.backend = c["backend"].get<std::string>();
        if (c.contains("log_level") && unset("--log-level")) run.g.log_level = c["log_level"].get<std::string>();
        if (c.contains("fallback_threshold")) run.g.fallback_threshold = c["fallback_threshold"].get<double>();
    } catch (const json::exception& e) {
        throw ValidationError("config " + run.g.config + ": " + e.what());
    }
    if (run.g.concurrency == 0) throw ValidationError("config: concurrency must be >= 1");
}

// --- convert -----------------------------------------------------------------

struct ConvertArgs {
    std::string input, source, target, mode = "heuristic", output, report, seeds;
    std::size_t n_samples = 1, max_tokens = kDefaultMaxTokens, keep = kDefaultTrainKeep;
    std::size_t max_examples = kDefaultScoreExamples, num_pos = kDefaultNumPositives, cap = 0;
    double temperature = 1.0;
    std::optional<double> threshold;
    bool train_time = false;
};

int cmd_convert(Run& run, const ConvertArgs& a, const CLI::App& sub) {
    ConvertOptions o;
    o.mode = a.mode == "llm" ? ConvertMode::Llm : ConvertMode::Heuristic;
    o.target = parse_format_spec(a.target);
    o.n_samples = a.n_samples;
    o.temperature = a.temperature;
    o.max_tokens = a.max_tokens;
    o.train_time = a.train_time;
    o.keep = a.keep;
    o.max_examples = a.max_examples;
    o.num_pos = a.num_pos;
    o.seed = run.g.seed;
    o.concurrency = run.g.concurrency;
    const double threshold = a.threshold.value_or(run.g.fallback_threshold);

    if (sub.get_option("--keep")->count() && !a.train_time)
        throw ValidationError("--keep requires --train-time");
    if (o.mode == ConvertMode::Llm) {
        if (a.seeds.empty()) throw ValidationError("--mode llm requires --seeds");
        if (!is_standard_sample_count(a.n_samples))
            throw ValidationError("--n-samples must be one of 1, 2, 4, 8, 16, 32");
        run.add_input(a.seeds);
        o.seeds = load_seed_pairs(a.seeds);
    } else if (a.train_time) {
        throw ValidationError("--train-time applies to --mode llm only");
    }
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ValidationError("--fallback-threshold must be in [0, 1]");

    Corpus corpus = run.load(a.input, a.source);
    if (a.cap) corpus = cap_instances(corpus, a.cap, run.g.seed);

    run.options = {{"input", a.input},     {"source", a.source},      {"target", o.target.describe()},
                   {"mode", a.mode},       {"seeds", a.seeds},        {"n_samples", a.n_samples},
                   {"temperature", a.temperature}, {"max_tokens", a.max_tokens}, {"train_time", a.train_time},
                   {"keep", a.keep},       {"max_examples", a.max_examples}, {"num_pos", a.num_pos},
                   {"cap", a.cap},         {"fallback_threshold", threshold}};
    const fs::path out = a.output;
    const fs::path report = a.report.empty() ? fs::path(a.output + ".report.jsonl") : fs::path(a.report);

    if (run.g.dry_run) {
        std::cout << "convert: " << corpus.tasks.size() << " tasks, " << a.mode << " mode, "
                  << corpus.format.describe() << " -> " << o.target.describe() << "\n"
                  << "would write " << out.string() << " and " << report.string() << "\n";
        if (o.mode == ConvertMode::Llm) run.backends();  // capability check only
        return kExitOk;
    }

    CompletionBackend* completion = nullptr;
    ScoreBackend* scoring = nullptr;
    if (o.mode == ConvertMode::Llm) {
        completion = run.backends().completion.get();
        scoring = run.backends().scoring.get();
    }
    const auto res = convert_corpus(corpus, o, completion, scoring);
    run.write_jsonl_file(out, corpus_to_json(res.corpus));
    run.write_jsonl_file(report, res.report);
    run.write_manifest(out, "convert");

    const auto s = run.stats();
    std::cout << "converted " << res.records << " records into " << res.corpus.tasks.size() << " tasks; "
              << res.fallbacks << " fallbacks (" << format_percent(res.fallback_rate()) << "%); "
              << s.network_requests << " network requests, " << s.cache_hits << " cache hits\n";
    if (threshold_breached(res, threshold)) {
        std::cerr << "error: fallback rate " << format_percent(res.fallback_rate()) << "% exceeds threshold "
                  << format_percent(threshold) << "%\n";
        return kExitThreshold;
    }
    return kExitOk;
}

// --- evaluate ----------------------------------------------------------------

struct EvaluateArgs {
    std::string predictions, corpus, format, output;
    bool strict = false;
};

int cmd_evaluate(Run& run, const EvaluateArgs& a) {
    const Corpus corpus = run.load(a.corpus, a.format);
    run.add_input(a.predictions);
    const auto rows = read_jsonl(a.predictions);
    if (rows.empty()) throw ValidationError("predictions file " + a.predictions + " is empty");

    std::map<std::pair<std::string, std::string>, const TaskInstance*> index;
    for (const auto& t : corpus.tasks)
        for (const auto& i : t.instances) index[{t.task_id, i.instance_id}] = &i;

    std::vector<Prediction> preds;
    std::vector<std::string> unjoined;
    std::set<std::pair<std::string, std::string>> seen;
    for (std::size_t n = 0; n < rows.size(); ++n) {
        const auto& r = rows[n];
        std::string task, inst, pred;
        try {
            task = r.at("task_id").get<std::string>();
            inst = r.at("instance_id").get<std::string>();
            pred = r.at("prediction").get<std::string>();
        } catch (const json::exception& e) {
            throw ValidationError(a.predictions + ":" + std::to_string(n + 1) + ": " + e.what());
        }
        if (!seen.insert({task, inst}).second)
            throw ValidationError("duplicate prediction for instance_id '" + inst + "' of task '" + task + "'");
        const auto it = index.find({task, inst});
        if (it == index.end()) {
            unjoined.push_back(task + "/" + inst);
            continue;
        }
        preds.push_back({task, inst, pred, it->second->references});
    }
    if (!unjoined.empty()) {
        spdlog::warn("{} predictions do not join to the corpus: {}", unjoined.size(), join(unjoined, ", "));
        if (a.strict) throw ValidationError(std::to_string(unjoined.size()) + " unjoined predictions (strict mode)");
    }
    if (preds.empty()) throw ValidationError("no prediction joins to the corpus");

    run.options = {{"predictions", a.predictions}, {"corpus", a.corpus}, {"format", a.format}, {"strict", a.strict}};
    const fs::path out = a.output;
    const fs::path table_path = fs::path(out).replace_extension(".txt");
    if (run.g.dry_run) {
        std::cout << "evaluate: " << preds.size() << " predictions\nwould write " << out.string() << " and "
                  << table_path.string() << "\n";
        return kExitOk;
    }

    const auto records = score_predictions(preds);
    const auto report = aggregate(records);
    json j = report_json(report);
    j["unjoined"] = unjoined;
    const std::string table = report_table(report);
    run.write(out, j.dump(2) + "\n");
    run.write(table_path, table);
    run.write_manifest(out, "evaluate");
    std::cout << table;
    return kExitOk;
}

// --- filter / mix / distill ----------------------------------------------------

struct FilterArgs {
    std::string train, test, format, test_format, output, report;
    std::size_t cap = 0;
};

int cmd_filter(Run& run, const FilterArgs& a) {
    Corpus train = run.load(a.train, a.format);
    const Corpus test = run.load(a.test, a.test_format.empty() ? a.format : a.test_format);
    run.options = {{"train", a.train}, {"test", a.test}, {"format", a.format},
                   {"test_format", a.test_format}, {"cap", a.cap}};
    const fs::path out = a.output;
    const fs::path report = a.report.empty() ? fs::path(a.output + ".removed.jsonl") : fs::path(a.report);
    if (run.g.dry_run) {
        std::cout << "filter: " << train.tasks.size() << " train tasks against " << test.tasks.size()
                  << " test tasks\nwould write " << out.string() << " and " << report.string() << "\n";
        return kExitOk;
    }
    auto res = filter_leakage(train, test);
    if (a.cap) res.corpus = cap_instances(res.corpus, a.cap, run.g.seed);
    run.write_jsonl_file(out, corpus_to_json(res.corpus));
    run.write_jsonl_file(report, res.report.to_jsonl());
    run.write_manifest(out, "filter");
    std::cout << res.report.total_removed << " removed, " << res.report.dropped_tasks.size() << " tasks dropped, "
              << res.corpus.tasks.size() << " tasks kept\n";
    return kExitOk;
}

struct MixArgs {
    std::string ni, other, format, output;
    std::size_t src = 20, cap = 0;
    bool same = false, diff = false;
};

int cmd_mix(Run& run, const MixArgs& a) {
    const Corpus ni = run.load(a.ni, a.format);
    const Corpus other = run.load(a.other, a.format);
    run.options = {{"ni", a.ni}, {"other", a.other}, {"format", a.format}, {"src", a.src},
                   {"same", a.same}, {"diff", a.diff}, {"cap", a.cap}};
    Corpus mix = build_mixture(ni, other, {a.src, a.same, a.diff, run.g.seed});
    if (a.cap) mix = cap_instances(mix, a.cap, run.g.seed);
    if (run.g.dry_run) {
        std::cout << "mix: " << mix.tasks.size() << " tasks\nwould write " << a.output << "\n";
        return kExitOk;
    }
    run.write_jsonl_file(a.output, corpus_to_json(mix));
    run.write_manifest(a.output, "mix");
    std::cout << "mixture of " << mix.tasks.size() << " tasks\n";
    return kExitOk;
}

struct DistillArgs {
    std::string input, format, seeds, output, trainer_config;
    std::size_t count = kDefaultDistillCount, samples = kDefaultDistillSamplesPerTask;
    std::size_t max_tokens = kDefaultMaxTokens;
    double temperature = 1.0;
};

int cmd_distill(Run& run, const DistillArgs& a) {
    const Corpus corpus = run.load(a.input, a.format);
    run.add_input(a.seeds);
    const auto seeds = load_seed_pairs(a.seeds);
    run.options = {{"input", a.input}, {"format", a.format}, {"seeds", a.seeds}, {"count", a.count},
                   {"samples_per_task", a.samples}, {"temperature", a.temperature}, {"max_tokens", a.max_tokens}};
    const fs::path out = a.output;
    const fs::path cfg = a.trainer_config.empty() ? fs::path(a.output + ".trainer.cfg") : fs::path(a.trainer_config);
    if (run.g.dry_run) {
        std::cout << "distill: " << corpus.tasks.size() << " tasks, target " << a.count << " pairs\nwould write "
                  << out.string() << " and " << cfg.string() << "\n";
        run.backends();
        return kExitOk;
    }
    DistillOptions o;
    o.target_count = a.count;
    o.samples_per_task = a.samples;
    o.temperature = a.temperature;
    o.max_tokens = a.max_tokens;
    o.rng_seed = run.g.seed;
    o.workers = run.g.concurrency;
    const auto res = build_distill_pairs(corpus, *run.backends().completion, seeds, o);
    std::vector<json> rows;
    for (const auto& p : res.pairs) rows.push_back(p.to_json());
    run.write_jsonl_file(out, rows);
    run.write(cfg, trainer_config_stub());
    run.write_manifest(out, "distill");
    std::cout << res.pairs.size() << " pairs from " << res.tasks_used << " tasks, " << res.skipped
              << " generations skipped\n";
    return kExitOk;
}

// --- report ----------------------------------------------------------------------

int cmd_report(Run& run, const std::vector<std::string>& files, const std::string& output) {
    std::size_t width = 3;
    std::vector<std::tuple<std::string, std::string, std::string, std::string>> rows;
    for (const auto& f : files) {
        run.add_input(f);
        json j;
        try {
            j = json::parse(read_file(f));
            const auto& o = j.at("overall");
            char em[32], rl[32];
            std::snprintf(em, sizeof em, "%.1f", o.at("em").get<double>());
            std::snprintf(rl, sizeof rl, "%.1f", o.at("rouge_l").get<double>());
            rows.emplace_back(fs::path(f).stem().string(), std::to_string(o.at("tasks").get<std::size_t>()), em, rl);
        } catch (const json::exception& e) {
            throw ValidationError(f + ": not an evaluation report (" + e.what() + ")");
        }
        width = std::max(width, std::get<0>(rows.back()).size());
    }
    std::string table;
    auto row = [&](const std::string& a, const std::string& b, const std::string& c, const std::string& d) {
        auto pad = [](const std::string& s, std::size_t w) { return std::string(w > s.size() ? w - s.size() : 0, ' ') + s; };
        table += a + std::string(width - a.size() + 2, ' ') + pad(b, 6) + pad(c, 8) + pad(d, 9) + "\n";
    };
    row("run", "tasks", "EM", "Rouge-L");
    for (const auto& [a, b, c, d] : rows) row(a, b, c, d);
    std::cout << table;
    if (!output.empty() && !run.g.dry_run) {
        run.options = {{"reports", files}, {"output", output}};
        run.write(output, table);
        run.write_manifest(output, "report");
    }
    return kExitOk;
}

int dispatch(int argc, const char* const* argv) {
    CLI::App app{"Instruction format conversion and evaluation toolchain", "instfmt"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);

    Run run;
    auto& g = run.g;
    app.add_option("--config", g.config, "JSON config: backend profiles and defaults")->check(CLI::ExistingFile);
    app.add_option("--cache-dir", g.cache_dir, "Response cache directory (no caching when unset)");
    app.add_option("--concurrency", g.concurrency, "Parallel records and in-flight requests")
        ->check(CLI::PositiveNumber);
    app.add_option("--seed", g.seed, "Base seed for all sampling");
    app.add_option("--backend", g.backend, "Backend profile name");
    app.add_flag("--dry-run", g.dry_run, "Validate inputs and print the plan without writing");
    app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error, off");

    ConvertArgs ca;
    auto* convert = app.add_subcommand("convert", "Convert a corpus to another instruction format");
    convert->add_option("--input", ca.input, "Source corpus (JSON-Lines)")->required()->check(CLI::ExistingFile);
    convert->add_option("--source", ca.source, "Source format: mask code, instance or keywords")->required();
    convert->add_option("--target", ca.target, "Target format: DPN, instance:<template>, keywords:a,b")->required();
    convert->add_option("--mode", ca.mode, "heuristic or llm")->check(CLI::IsMember({"heuristic", "llm"}));
    convert->add_option("--output", ca.output, "Converted corpus")->required();
    convert->add_option("--report", ca.report, "Per-record report (default <output>.report.jsonl)");
    convert->add_option("--seeds", ca.seeds, "Seed pairs for llm mode")->check(CLI::ExistingFile);
    convert->add_option("--n-samples", ca.n_samples, "Candidates per record: 1, 2, 4, 8, 16 or 32");
    convert->add_option("--temperature", ca.temperature, "Sampling temperature")->check(CLI::NonNegativeNumber);
    convert->add_option("--max-tokens", ca.max_tokens, "Generation length bound")->check(CLI::PositiveNumber);
    convert->add_flag("--train-time", ca.train_time, "Keep the k lowest-perplexity candidates");
    convert->add_option("--keep", ca.keep, "k for --train-time")->check(CLI::PositiveNumber);
    convert->add_option("--max-examples", ca.max_examples, "Positives scored per candidate")->check(CLI::PositiveNumber);
    convert->add_option("--num-pos", ca.num_pos, "Positives drawn by heuristic transfer")->check(CLI::PositiveNumber);
    convert->add_option("--cap", ca.cap, "Instances kept per task (0 keeps all)");
    convert->add_option("--fallback-threshold", ca.threshold, "Fail when the fallback rate exceeds this");

    EvaluateArgs ea;
    auto* evaluate = app.add_subcommand("evaluate", "Score predictions with Exact Match and Rouge-L");
    evaluate->add_option("--predictions", ea.predictions, "JSON-Lines {task_id, instance_id, prediction}")
        ->required()->check(CLI::ExistingFile);
    evaluate->add_option("--corpus", ea.corpus, "Reference corpus")->required()->check(CLI::ExistingFile);
    evaluate->add_option("--format", ea.format, "Corpus format")->required();
    evaluate->add_option("--output", ea.output, "Report JSON; a .txt table is written next to it")->required();
    evaluate->add_flag("--strict", ea.strict, "Fail on predictions that do not join to the corpus");

    FilterArgs fa;
    auto* filter = app.add_subcommand("filter", "Remove train instances that leak into the test set");
    filter->add_option("--train", fa.train, "Training corpus")->required()->check(CLI::ExistingFile);
    filter->add_option("--test", fa.test, "Evaluation corpus")->required()->check(CLI::ExistingFile);
    filter->add_option("--format", fa.format, "Training corpus format")->required();
    filter->add_option("--test-format", fa.test_format, "Evaluation corpus format (default --format)");
    filter->add_option("--output", fa.output, "Filtered corpus")->required();
    filter->add_option("--report", fa.report, "Removal report (default <output>.removed.jsonl)");
    filter->add_option("--cap", fa.cap, "Instances kept per task after filtering (0 keeps all)");

    MixArgs ma;
    auto* mix = app.add_subcommand("mix", "Build a src/same/diff task mixture");
    mix->add_option("--ni", ma.ni, "Corpus the src tasks are drawn from")->required()->check(CLI::ExistingFile);
    mix->add_option("--other", ma.other, "Corpus supplying same and diff tasks")->required()->check(CLI::ExistingFile);
    mix->add_option("--format", ma.format, "Format of both corpora")->required();
    mix->add_option("--src", ma.src, "Number of src tasks")->check(CLI::PositiveNumber);
    mix->add_flag("--same", ma.same, "Add the same tasks from --other");
    mix->add_flag("--diff", ma.diff, "Add as many tasks from --other that --ni lacks");
    mix->add_option("--cap", ma.cap, "Instances kept per task (0 keeps all)");
    mix->add_option("--output", ma.output, "Mixture corpus")->required();

    DistillArgs da;
    auto* distill = app.add_subcommand("distill", "Build simple-to-complex instruction pairs");
    distill->add_option("--input", da.input, "Task-level corpus")->required()->check(CLI::ExistingFile);
    distill->add_option("--format", da.format, "Corpus mask code")->required();
    distill->add_option("--seeds", da.seeds, "Seed pairs mapping complex to simple")->required()->check(CLI::ExistingFile);
    distill->add_option("--count", da.count, "Pairs to produce")->check(CLI::PositiveNumber);
    distill->add_option("--samples-per-task", da.samples, "Generations per task")->check(CLI::PositiveNumber);
    distill->add_option("--temperature", da.temperature, "Sampling temperature")->check(CLI::NonNegativeNumber);
    distill->add_option("--max-tokens", da.max_tokens, "Generation length bound")->check(CLI::PositiveNumber);
    distill->add_option("--output", da.output, "Pairs file")->required();
    distill->add_option("--trainer-config", da.trainer_config, "Trainer config stub (default <output>.trainer.cfg)");

    std::vector<std::string> report_files;
    std::string report_out;
    auto* report = app.add_subcommand("report", "Tabulate evaluation reports");
    report->add_option("reports", report_files, "Report JSON files from evaluate")->required()->check(CLI::ExistingFile);
    report->add_option("--output", report_out, "Also write the table here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitValidation;
    }

    setup_logging(g.log_level);
    apply_config(run, app);
    setup_logging(g.log_level);

    if (convert->parsed()) return cmd_convert(run, ca, *convert);
    if (evaluate->parsed()) return cmd_evaluate(run, ea);
    if (filter->parsed()) return cmd_filter(run, fa);
    if (mix->parsed()) return cmd_mix(run, ma);
    if (distill->parsed()) return cmd_distill(run, da);
    return cmd_report(run, report_files, report_out);
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
    try {
        return dispatch(argc, argv);
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const EndpointError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const ProtocolError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const CapabilityError& e) {
        std::cerr << "backend error: " << e.what() << "\n";
        return kExitBackend;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
}

int run_cli(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    for (const auto& a : args) argv.push_back(a.c_str());
    argv.push_back(nullptr);
    return run_cli(static_cast<int>(args.size()), argv.data());
}

}  // namespace instfmt
