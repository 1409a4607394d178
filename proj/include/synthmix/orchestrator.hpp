#pragma once

#include "synthmix/classifier.hpp"
#include "synthmix/corpus.hpp"
#include "synthmix/evaluator.hpp"
#include "synthmix/features.hpp"
#include "synthmix/llm_gateway.hpp"
#include "synthmix/mock_backend.hpp"
#include "synthmix/types.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace synthmix {

enum class ClassifierKind { linear, llm_prompting, external_handoff };
std::string_view to_string(ClassifierKind k);
ClassifierKind parse_classifier_kind(std::string_view s);

enum class BackendKind { mock, http };
std::string_view to_string(BackendKind k);
BackendKind parse_backend_kind(std::string_view s);

struct DataConfig {
    std::filesystem::path train;
    /// Empty: the test set is carved out of `train` with test_fraction.
    std::filesystem::path test;
    double test_fraction = 0.2;
    std::map<std::string, std::filesystem::path> ood;
    LoadOptions load;
    std::filesystem::path aliases;
};

struct BackendConfig {
    BackendKind kind = BackendKind::mock;
    /// Mock behaviour per instruction strategy.
    MockMode theory_mode = MockMode::keyword_faithful;
    MockMode naive_mode = MockMode::generic;
    double noise_rate = 0.0;
    MockMode classify_mode = MockMode::keyword_faithful;
    int max_in_flight = 4;
};

inline std::vector<StrategyCell> all_cells() {
    const auto a = StrategyCell::all();
    return {a.begin(), a.end()};
}

struct ExperimentConfig {
    std::string study;
    std::filesystem::path instrument;
    std::filesystem::path templates;
    DataConfig data;
    std::vector<double> ratios{0.0, 0.3, 0.5, 0.7, 0.9, 1.0};
    std::vector<StrategyCell> cells = all_cells();
    std::vector<std::string> generators{"gpt-3.5-turbo"};
    std::vector<ClassifierKind> classifiers{ClassifierKind::linear};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    /// Labeled examples per class in every training set. 0: smallest class count.
    std::size_t per_class_n = 0;
    MixScope scope = MixScope::per_class;
    std::uint64_t master_seed = 20240601;
    BackendConfig backend;
    double generation_temperature = 0.7;
    int batch_size = 5;
    /// Extra requests allowed per pool when replies come back short.
    int max_rerequests = 20;
    FeatureConfig features;
    TrainConfig train;
    LlmClassifyOptions llm;
    std::filesystem::path output_dir = "runs";

    /// Throws ConfigError naming the offending field.
    void validate() const;
};

/// Reads the JSON config; relative paths resolve against the file's directory.
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(std::string_view json_text, const std::filesystem::path& base_dir);

enum class RunStatus { pending, generated, trained, evaluated, skipped, failed };
std::string_view to_string(RunStatus s);
RunStatus parse_run_status(std::string_view s);

struct RunRecord {
    RunKey key;
    ClassifierKind kind = ClassifierKind::linear;
    /// Empty for the ratio-0 arm and direct LLM labelling.
    std::optional<StrategyCell> cell;
    /// Trained on the labeled part of the paired mixed run only.
    bool labeled_subset = false;
    std::filesystem::path dir;
    RunStatus status = RunStatus::pending;
    std::string error;
    double wall_seconds = 0.0;
    std::uint64_t requests = 0;

    /// "<generator>/<cell>/<ratio>/<seed>/<classifier>", unique within a plan.
    std::string id() const;
};

/// Cartesian product of cells, nonzero ratios, seeds, generators and trainable
/// classifier kinds, one ratio-0 run per seed and trainable kind, a
/// labeled-subset baseline per nonzero-ratio run, and one direct-labelling run
/// per seed when llm_prompting is requested.
std::vector<RunRecord> plan_runs(const ExperimentConfig& config);

/// Key of one shared synthetic pool.
struct PoolSpec {
    StrategyCell cell;
    std::string generator;
    std::string label;
    std::size_t size = 0;

    std::string id() const;
};

/// One pool per (cell, generator, class with instrument coverage), sized for
/// the largest ratio.
std::vector<PoolSpec> plan_pools(const ExperimentConfig& config, const std::vector<std::string>& classes,
                                 const std::vector<std::string>& supplied, std::size_t per_class_n);
/// sum of ceil(size / batch_size): requests needed when no reply is short.
std::uint64_t generation_budget(const std::vector<PoolSpec>& pools, int batch_size);

enum class Stage { generate, train, evaluate };
Stage parse_stage(std::string_view s);

struct ExecuteOptions {
    bool resume = false;
    int jobs = 1;
    /// Stop once this stage is done for every run.
    Stage stop_after = Stage::evaluate;
    /// Overrides the configured backend (tests plug in fakes here).
    std::shared_ptr<Backend> generation_backend;
    std::shared_ptr<Backend> classification_backend;
    /// Called before each training; tests use it to plant failures.
    std::function<void(const RunRecord&, TrainConfig&)> train_hook;
    std::function<void(std::chrono::milliseconds)> sleep;
};

struct ExecutionSummary {
    std::vector<RunRecord> runs;
    std::vector<EvalResult> results;
    std::size_t pools = 0;
    std::uint64_t generation_budget = 0;
    std::uint64_t rerequests = 0;
    std::uint64_t generation_requests = 0;
    std::uint64_t classification_requests = 0;
    std::filesystem::path results_path;

    std::size_t count(RunStatus s) const;
    /// 0 when nothing failed, 1 otherwise.
    int exit_code() const;
};

/// generate -> mix -> train -> evaluate for every run. Artifacts go under
/// <output_dir>/<study>/. Failures are recorded per run and do not stop others.
ExecutionSummary execute(const ExperimentConfig& config, const ExecuteOptions& options = {});

struct ReportOptions {
    DiffMode diff_mode = DiffMode::mean;
};

struct ReportFiles {
    std::filesystem::path best_per_ratio;
    std::filesystem::path curves;
    /// Empty when the diff table was refused.
    std::filesystem::path strategy_diff;
    std::filesystem::path strategy_diff_long;
    std::vector<std::string> notes;
};

/// Writes best_per_ratio.csv, curves.csv and, when both instruction arms are
/// present, strategy_diff.csv and strategy_diff_long.csv into `dir`.
ReportFiles emit_report(const std::vector<EvalResult>& results, const std::filesystem::path& dir,
                        const ReportOptions& options = {});

extern const std::vector<std::string> kBestColumns;
extern const std::vector<std::string> kDiffColumns;
extern const std::vector<std::string> kCurveColumns;

} // namespace synthmix
