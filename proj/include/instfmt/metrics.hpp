#pragma once

// Exact Match and token-level Rouge-L, with macro aggregation over tasks.

#include <nlohmann/json.hpp>

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace instfmt {

/// Lowercase, strip ASCII punctuation, drop the articles a/an/the, collapse
/// whitespace.
std::string normalize_text(std::string_view s);

/// 1 when the normalized prediction equals some normalized reference.
/// Throws ValidationError on an empty reference list.
int exact_match(std::string_view prediction, std::span<const std::string> references);

/// Lowercased maximal alphanumeric runs. Bytes >= 0x80 count as
/// alphanumeric so UTF-8 words stay whole.
std::vector<std::string> rouge_tokens(std::string_view s);

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);

/// LCS F1 over rouge_tokens; 0 when either side is empty.
double rouge_l(std::string_view prediction, std::string_view reference);

/// Max over references.
double rouge_l_max(std::string_view prediction, std::span<const std::string> references);

struct Prediction {
    std::string task_id;
    std::string instance_id;
    std::string prediction;
    std::vector<std::string> references;
};

struct EvalRecord {
    std::string task_id;
    std::string instance_id;
    std::string prediction;
    std::vector<std::string> references;
    int em = 0;
    double rouge_l = 0.0;

    bool operator==(const EvalRecord&) const = default;
};

EvalRecord score_prediction(const Prediction& p);

/// Batch scoring, OpenMP parallel over records.
std::vector<EvalRecord> score_predictions(std::span<const Prediction> preds);

/// Single-threaded reference for score_predictions.
std::vector<EvalRecord> score_predictions_serial(std::span<const Prediction> preds);

struct TaskScore {
    double em = 0.0;
    double rouge_l = 0.0;
    std::size_t count = 0;
};

struct EvalReport {
    std::map<std::string, TaskScore> per_task;
    double em = 0.0;
    double rouge_l = 0.0;
};

/// Per-task means, then the unweighted mean over tasks. Throws
/// ValidationError on empty input.
EvalReport aggregate(std::span<const EvalRecord> records);

/// Percent with one decimal, e.g. 0.4667 -> "46.7".
std::string format_percent(double fraction);

std::string report_table(const EvalReport& report);
nlohmann::json report_json(const EvalReport& report);

}  // namespace instfmt
