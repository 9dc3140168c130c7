#include "instfmt/metrics.hpp"

#include "instfmt/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace instfmt {

namespace {

bool is_space(unsigned char c) { return c == ' ' || (c >= '\t' && c <= '\r'); }
bool is_punct(unsigned char c) { return c < 0x80 && std::ispunct(c); }
bool is_alnum(unsigned char c) { return c >= 0x80 || std::isalnum(c); }
char lower(unsigned char c) { return static_cast<char>(c < 0x80 ? std::tolower(c) : c); }

}  // namespace

std::string normalize_text(std::string_view s) {
    std::string out;
    std::string word;
    auto flush = [&] {
        if (!word.empty() && word != "a" && word != "an" && word != "the") {
            if (!out.empty()) out += ' ';
            out += word;
        }
        word.clear();
    };
    for (unsigned char c : s) {
        if (is_space(c)) flush();
        else if (!is_punct(c)) word += lower(c);
    }
    flush();
    return out;
}

int exact_match(std::string_view prediction, std::span<const std::string> references) {
    if (references.empty()) throw ValidationError("exact_match: empty reference list");
    const std::string p = normalize_text(prediction);
    for (const auto& r : references)
        if (normalize_text(r) == p) return 1;
    return 0;
}

std::vector<std::string> rouge_tokens(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (unsigned char c : s) {
        if (is_alnum(c)) {
            cur += lower(c);
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
    if (a.size() < b.size()) std::swap(a, b);
    std::vector<std::size_t> row(b.size() + 1, 0);
    for (const auto& x : a) {
        std::size_t diag = 0;
        for (std::size_t j = 1; j <= b.size(); ++j) {
            const std::size_t up = row[j];
            row[j] = x == b[j - 1] ? diag + 1 : std::max(row[j], row[j - 1]);
            diag = up;
        }
    }
    return row[b.size()];
}

double rouge_l(std::string_view prediction, std::string_view reference) {
    const auto p = rouge_tokens(prediction);
    const auto r = rouge_tokens(reference);
    if (p.empty() || r.empty()) return 0.0;
    const auto l = static_cast<double>(lcs_length(p, r));
    if (l == 0) return 0.0;
    const double prec = l / static_cast<double>(p.size());
    const double rec = l / static_cast<double>(r.size());
    return 2 * prec * rec / (prec + rec);
}

double rouge_l_max(std::string_view prediction, std::span<const std::string> references) {
    double best = 0.0;
    for (const auto& r : references) best = std::max(best, rouge_l(prediction, r));
    return best;
}

EvalRecord score_prediction(const Prediction& p) {
    EvalRecord r{p.task_id, p.instance_id, p.prediction, p.references, 0, 0.0};
    r.em = exact_match(p.prediction, p.references);
    r.rouge_l = rouge_l_max(p.prediction, p.references);
    return r;
}

std::vector<EvalRecord> score_predictions_serial(std::span<const Prediction> preds) {
    std::vector<EvalRecord> out;
    out.reserve(preds.size());
    for (const auto& p : preds) out.push_back(score_prediction(p));
    return out;
}

std::vector<EvalRecord> score_predictions(std::span<const Prediction> preds) {
    for (const auto& p : preds)
        if (p.references.empty())
            throw ValidationError("exact_match: empty reference list for " + p.task_id + "/" + p.instance_id);
    std::vector<EvalRecord> out(preds.size());
    const auto n = static_cast<std::ptrdiff_t>(preds.size());
#pragma omp parallel for schedule(dynamic, 64)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = score_prediction(preds[i]);
    return out;
}

EvalReport aggregate(std::span<const EvalRecord> records) {
    if (records.empty()) throw ValidationError("aggregate: no records");
    EvalReport rep;
    for (const auto& r : records) {
        auto& t = rep.per_task[r.task_id];
        t.em += r.em;
        t.rouge_l += r.rouge_l;
        ++t.count;
    }
    for (auto& [id, t] : rep.per_task) {
        t.em /= static_cast<double>(t.count);
        t.rouge_l /= static_cast<double>(t.count);
        rep.em += t.em;
        rep.rouge_l += t.rouge_l;
    }
    rep.em /= static_cast<double>(rep.per_task.size());
    rep.rouge_l /= static_cast<double>(rep.per_task.size());
    return rep;
}

std::string format_percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", fraction * 100.0);
    return buf;
}

std::string report_table(const EvalReport& report) {
    std::size_t width = 7;
    for (const auto& [id, t] : report.per_task) width = std::max(width, id.size());
    std::ostringstream os;
    auto row = [&](const std::string& name, const std::string& n, const std::string& em,
                   const std::string& rl) {
        os << name << std::string(width - name.size() + 2, ' ');
        os << std::string(n.size() < 6 ? 6 - n.size() : 0, ' ') << n;
        os << std::string(em.size() < 8 ? 8 - em.size() : 0, ' ') << em;
        os << std::string(rl.size() < 9 ? 9 - rl.size() : 0, ' ') << rl << '\n';
    };
    row("task", "n", "EM", "Rouge-L");
    for (const auto& [id, t] : report.per_task)
        row(id, std::to_string(t.count), format_percent(t.em), format_percent(t.rouge_l));
    row("overall", std::to_string(report.per_task.size()), format_percent(report.em),
        format_percent(report.rouge_l));
    return os.str();
}

namespace {

double percent_value(double fraction) { return std::round(fraction * 1000.0) / 10.0; }

}  // namespace

nlohmann::json report_json(const EvalReport& report) {
    nlohmann::json tasks = nlohmann::json::array();
    for (const auto& [id, t] : report.per_task)
        tasks.push_back({{"task_id", id},
                         {"count", t.count},
                         {"em", percent_value(t.em)},
                         {"rouge_l", percent_value(t.rouge_l)}});
    return {{"per_task", std::move(tasks)},
            {"overall",
             {{"tasks", report.per_task.size()},
              {"em", percent_value(report.em)},
              {"rouge_l", percent_value(report.rouge_l)}}}};
}

}  // namespace instfmt
