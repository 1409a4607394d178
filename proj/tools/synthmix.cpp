#include "synthmix/classifier.hpp"
#include "synthmix/corpus.hpp"
#include "synthmix/error.hpp"
#include "synthmix/evaluator.hpp"
#include "synthmix/instruments.hpp"
#include "synthmix/json_io.hpp"
#include "synthmix/mock_backend.hpp"
#include "synthmix/orchestrator.hpp"
#include "synthmix/toyworld.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <iostream>

using namespace synthmix;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct MatrixArgs {
    fs::path config;
    std::string backend;
    std::optional<std::uint64_t> master_seed;
    bool resume = false;
    int jobs = 1;
    std::string stop_after = "evaluate";
    std::string diff_mode = "mean";
    bool report = true;
};

ExperimentConfig load_config(const MatrixArgs& a) {
    auto cfg = load_experiment_config(a.config);
    if (!a.backend.empty()) cfg.backend.kind = parse_backend_kind(a.backend);
    if (a.master_seed) cfg.master_seed = *a.master_seed;
    return cfg;
}

void print_summary(const ExecutionSummary& s) {
    fmt::print("runs: {} evaluated, {} trained, {} generated, {} skipped, {} failed\n", s.count(RunStatus::evaluated),
               s.count(RunStatus::trained), s.count(RunStatus::generated), s.count(RunStatus::skipped),
               s.count(RunStatus::failed));
    fmt::print("pools: {}  generation budget: {}  re-requests: {}  generation requests: {}  classification requests: {}\n",
               s.pools, s.generation_budget, s.rerequests, s.generation_requests, s.classification_requests);
    for (const auto& r : s.runs)
        if (r.status == RunStatus::failed) fmt::print("failed: {}: {}\n", r.id(), r.error);
    if (!s.results_path.empty()) fmt::print("results: {}\n", s.results_path.string());
}

int run_matrix(const MatrixArgs& a, Stage stop) {
    const auto cfg = load_config(a);
    ExecuteOptions opts;
    opts.resume = a.resume;
    opts.jobs = a.jobs;
    opts.stop_after = stop;
    const auto summary = execute(cfg, opts);
    print_summary(summary);
    if (stop == Stage::evaluate && a.report && !summary.results.empty()) {
        ReportOptions ro;
        ro.diff_mode = parse_diff_mode(a.diff_mode);
        const auto files = emit_report(summary.results, summary.results_path.parent_path() / "report", ro);
        for (const auto& n : files.notes) fmt::print("report: {}\n", n);
    }
    return summary.exit_code();
}

Corpus read_corpus(const fs::path& path, const fs::path& instrument) {
    Corpus c;
    c.examples = read_examples(path);
    if (!instrument.empty()) {
        c.classes = load_instrument(instrument).classes;
    } else {
        for (const auto& e : c.examples)
            if (std::find(c.classes.begin(), c.classes.end(), e.label) == c.classes.end()) c.classes.push_back(e.label);
    }
    c.validate();
    return c;
}

std::vector<std::string> golds(const Corpus& c) {
    std::vector<std::string> g;
    for (const auto& e : c.examples) g.push_back(e.label);
    return g;
}

void print_eval(const Corpus& c, const std::vector<std::optional<std::string>>& preds) {
    const auto cm = confusion(golds(c), preds, c.classes);
    const auto rep = macro_f1(cm);
    json j;
    j["macro_f1"] = rep.macro;
    j["abstentions"] = cm.abstentions;
    for (const auto& s : rep.per_class)
        j["per_class"][s.label] = {{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}, {"support", s.support}};
    std::cout << j.dump(2) << "\n";
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"synthetic-data substitution experiments"};
    app.require_subcommand(1);

    MatrixArgs matrix;
    auto add_matrix_flags = [&](CLI::App* sub) {
        sub->add_option("--config", matrix.config, "experiment config (JSON)")->required()->check(CLI::ExistingFile);
        sub->add_option("--backend", matrix.backend, "override the configured backend")->check(CLI::IsMember({"http", "mock"}));
        sub->add_option("--master-seed", matrix.master_seed, "override the configured master seed");
        sub->add_flag("--resume", matrix.resume, "reuse pools and finished runs");
        sub->add_option("--jobs", matrix.jobs, "worker threads")->check(CLI::PositiveNumber);
    };

    auto* run = app.add_subcommand("run-matrix", "generate, mix, train and evaluate every planned run");
    add_matrix_flags(run);
    run->add_option("--stop-after", matrix.stop_after, "last stage to run")
        ->check(CLI::IsMember({"generate", "train", "evaluate"}));
    run->add_option("--diff-mode", matrix.diff_mode, "theory-vs-naive aggregation")
        ->check(CLI::IsMember({"mean", "best_generation"}));
    run->add_flag("!--no-report", matrix.report, "skip report emission");

    auto* gen = app.add_subcommand("generate", "build the synthetic pools of an experiment");
    add_matrix_flags(gen);

    fs::path results_path, report_dir;
    std::string diff_mode = "mean";
    auto* report = app.add_subcommand("report", "best-per-ratio, strategy diff and curve tables");
    report->add_option("--results", results_path, "results.csv")->required()->check(CLI::ExistingFile);
    report->add_option("--out", report_dir, "output directory")->required();
    report->add_option("--diff-mode", diff_mode)->check(CLI::IsMember({"mean", "best_generation"}));

    fs::path labeled_path, synthetic_path, out_path, instrument_path;
    double ratio = 0.0;
    std::size_t per_class = 0;
    std::string scope = "per_class";
    std::uint64_t seed = 1;
    auto* mix = app.add_subcommand("mix", "mix labeled and synthetic examples at a ratio");
    mix->add_option("--labeled", labeled_path)->required()->check(CLI::ExistingFile);
    mix->add_option("--synthetic", synthetic_path)->required()->check(CLI::ExistingFile);
    mix->add_option("--instrument", instrument_path, "class order")->check(CLI::ExistingFile);
    mix->add_option("--ratio", ratio)->required()->check(CLI::Range(0.0, 1.0));
    mix->add_option("--per-class", per_class)->required();
    mix->add_option("--scope", scope)->check(CLI::IsMember({"per_class", "global"}));
    mix->add_option("--seed", seed);
    mix->add_option("--out", out_path)->required();

    TrainConfig tc;
    auto* trn = app.add_subcommand("train", "train the linear classifier");
    trn->add_option("--train", labeled_path)->required()->check(CLI::ExistingFile);
    trn->add_option("--instrument", instrument_path, "class order")->check(CLI::ExistingFile);
    trn->add_option("--C", tc.C);
    trn->add_option("--epochs", tc.epochs);
    trn->add_option("--seed", tc.seed);
    trn->add_option("--out", out_path)->required();

    fs::path model_path, preds_path;
    auto* ev = app.add_subcommand("evaluate", "macro-F1 of a model or of a predictions file");
    ev->add_option("--data", labeled_path)->required()->check(CLI::ExistingFile);
    ev->add_option("--instrument", instrument_path, "class order")->check(CLI::ExistingFile);
    auto* model_opt = ev->add_option("--model", model_path)->check(CLI::ExistingFile);
    auto* preds_opt = ev->add_option("--preds", preds_path, "{id, pred} JSONL")->check(CLI::ExistingFile);
    model_opt->excludes(preds_opt);
    ev->add_option("--write-preds", out_path);

    std::string backend = "mock", model_name = "gpt-4o", unparseable = "abstain";
    double temperature = 1.0;
    auto* cls = app.add_subcommand("classify-llm", "label texts by prompting a chat model");
    cls->add_option("--data", labeled_path)->required()->check(CLI::ExistingFile);
    cls->add_option("--instrument", instrument_path)->required()->check(CLI::ExistingFile);
    cls->add_option("--backend", backend)->check(CLI::IsMember({"http", "mock"}));
    cls->add_option("--model", model_name);
    cls->add_option("--temperature", temperature);
    cls->add_option("--unparseable", unparseable)->check(CLI::IsMember({"abstain", "fail"}));
    cls->add_option("--out", out_path)->required();

    ToyWorldOptions toy;
    auto* toycmd = app.add_subcommand("toy-corpus", "write a keyword corpus for an instrument");
    toycmd->add_option("--instrument", instrument_path)->required()->check(CLI::ExistingFile);
    toycmd->add_option("--per-class", toy.per_class);
    toycmd->add_option("--keywords", toy.keywords_per_text);
    toycmd->add_option("--max-keywords", toy.max_keywords_per_class, "Keywords per class to draw from (0: all)");
    toycmd->add_option("--filler", toy.filler_per_text);
    toycmd->add_option("--distractor-rate", toy.distractor_rate);
    toycmd->add_option("--label-noise", toy.label_noise);
    toycmd->add_option("--seed", seed);
    toycmd->add_option("--out", out_path)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (*run) return run_matrix(matrix, parse_stage(matrix.stop_after));
        if (*gen) return run_matrix(matrix, Stage::generate);
        if (*report) {
            const auto results = parse_results_csv(jsonio::read_file(results_path));
            ReportOptions ro;
            ro.diff_mode = parse_diff_mode(diff_mode);
            const auto files = emit_report(results, report_dir, ro);
            fmt::print("wrote {}\nwrote {}\n", files.best_per_ratio.string(), files.curves.string());
            if (!files.strategy_diff.empty()) fmt::print("wrote {}\n", files.strategy_diff.string());
            for (const auto& n : files.notes) fmt::print("{}\n", n);
            return 0;
        }
        if (*mix) {
            const Corpus labeled = read_corpus(labeled_path, instrument_path);
            Corpus synthetic;
            synthetic.classes = labeled.classes;
            synthetic.examples = read_examples(synthetic_path);
            const auto plan = plan_mix(labeled, synthetic, per_class, ratio, parse_mix_scope(scope));
            const auto mixed = materialize_mix(plan, labeled, synthetic, Rng(seed));
            write_examples(out_path, mixed.examples);
            for (const auto& c : plan.classes)
                fmt::print("{}: {} labeled, {} synthetic\n", c.label, c.labeled, c.synthetic);
            for (const auto& n : plan.notes) fmt::print("note: {}\n", n);
            return 0;
        }
        if (*trn) {
            const Corpus c = read_corpus(labeled_path, instrument_path);
            const auto model = train(c, FeatureConfig{}, tc);
            save_model(model, out_path);
            fmt::print("final objective {}\n", format_double(model.objective_trace.back()));
            return 0;
        }
        if (*ev) {
            const Corpus c = read_corpus(labeled_path, instrument_path);
            std::vector<std::optional<std::string>> preds;
            if (!model_path.empty()) {
                const auto model = load_model(model_path);
                std::vector<std::string> texts;
                for (const auto& e : c.examples) texts.push_back(e.text);
                for (const auto& p : predict_batch(model, texts)) preds.emplace_back(p.label);
            } else if (!preds_path.empty()) {
                preds = import_predictions(preds_path, c);
            } else {
                throw ConfigError("pass --model or --preds");
            }
            if (!out_path.empty()) write_predictions(out_path, c, preds);
            print_eval(c, preds);
            return 0;
        }
        if (*cls) {
            const auto instrument = load_instrument(instrument_path);
            const Corpus c = read_corpus(labeled_path, instrument_path);
            std::shared_ptr<Backend> be;
            if (backend == "http") be = HttpBackend::from_env();
            else be = std::make_shared<MockBackend>(MockProfile::from_instrument(instrument, MockMode::keyword_faithful));
            Gateway gateway(be);
            LlmClassifyOptions opts;
            opts.generation.model_name = model_name;
            opts.generation.temperature = temperature;
            opts.policy = unparseable == "fail" ? UnparseablePolicy::fail : UnparseablePolicy::abstain;
            std::vector<std::string> texts;
            for (const auto& e : c.examples) texts.push_back(e.text);
            const auto res = llm_classify(gateway, c.classes, texts, opts);
            write_predictions(out_path, c, res.predictions);
            fmt::print("{} texts, {} unparseable, {} requests\n", texts.size(), res.unparseable.size(), gateway.backend_calls());
            print_eval(c, res.predictions);
            return 0;
        }
        if (*toycmd) {
            Rng rng(seed);
            const auto c = toy_corpus(load_instrument(instrument_path), toy, rng);
            write_examples(out_path, c.examples);
            fmt::print("{} examples\n", c.size());
            return 0;
        }
    } catch (const ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return 2;
    } catch (const SchemaError& e) {
        fmt::print(stderr, "input error: {}\n", e.what());
        return 2;
    } catch (const InvariantError& e) {
        fmt::print(stderr, "input error: {}\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return 1;
    }
    return 0;
}
