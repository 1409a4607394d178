#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace synthmix {

/// counts[g][p] = #(gold g, predicted p) in label order. Abstentions are kept
/// out of the matrix.
struct ConfusionMatrix {
    std::vector<std::string> labels;
    std::vector<std::vector<std::uint64_t>> counts;
    std::uint64_t abstentions = 0;

    std::uint64_t total() const;
    std::size_t index_of(std::string_view label) const;
};

ConfusionMatrix confusion(std::span<const std::string> golds, std::span<const std::optional<std::string>> preds,
                          const std::vector<std::string>& labels);
ConfusionMatrix confusion(std::span<const std::string> golds, std::span<const std::string> preds,
                          const std::vector<std::string>& labels);

struct ClassScore {
    std::string label;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::uint64_t support = 0;
};

struct F1Report {
    std::vector<ClassScore> per_class;
    double macro = 0.0;
};

/// Zero denominators give 0. Macro is the plain mean over every label.
F1Report macro_f1(const ConfusionMatrix& cm);

struct AggregateResult {
    double mean = 0.0;
    double sd = 0.0;
    /// 95% Student-t half-width; empty for a single score.
    std::optional<double> half_width;
    std::size_t n = 0;
};

/// t quantile at 0.975 with `df` degrees of freedom.
double t975(std::size_t df);
AggregateResult aggregate_seeds(std::span<const double> scores);

// ---- results table ----------------------------------------------------------

struct RunKey {
    std::string study;
    std::string classifier;
    std::string generator_model;
    std::string instruction;  // theory_driven | naive | none
    std::string generation;   // new | alternation | none
    double ratio = 0.0;
    std::uint64_t seed = 0;

    friend bool operator==(const RunKey&, const RunKey&) = default;
};

struct EvalResult {
    RunKey run;
    std::string dataset;
    std::string split;  // in_domain | ood
    double macro_f1 = 0.0;
    std::vector<std::pair<std::string, double>> per_class_f1;
    std::uint64_t abstentions = 0;
};

EvalResult make_result(const RunKey& run, std::string dataset, std::string split, const ConfusionMatrix& cm);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

extern const std::vector<std::string> kResultsColumns;
/// Header plus one row per result, in the order given.
std::string results_csv(const std::vector<EvalResult>& results);
std::vector<EvalResult> parse_results_csv(std::string_view data);

/// Sort key used before writing, so output does not depend on run completion order.
bool result_less(const EvalResult& a, const EvalResult& b);

// ---- theory-vs-naive differences --------------------------------------------

enum class DiffMode {
    /// Average over generation types and seeds.
    mean,
    /// Per arm, the generation type with the higher seed mean.
    best_generation
};
std::string_view to_string(DiffMode m);
DiffMode parse_diff_mode(std::string_view s);

struct DiffRow {
    std::string classifier;
    std::string generator_model;
    std::string dataset;  // a dataset name, or "ood_mean"
    double ratio = 0.0;
    double theory = 0.0;
    double naive = 0.0;
    double diff = 0.0;
};

/// One row per (classifier, generator, dataset, nonzero ratio) where mixed runs exist.
/// Each OOD row set is followed by "ood_mean", the unweighted mean of the per-set
/// values. A ratio with only one instruction arm throws PreconditionError.
std::vector<DiffRow> strategy_diff(const std::vector<EvalResult>& results, DiffMode mode = DiffMode::mean);

double spearman(std::span<const double> x, std::span<const double> y);

} // namespace synthmix
