#include "synthmix/orchestrator.hpp"

#include "synthmix/csv.hpp"
#include "synthmix/error.hpp"
#include "synthmix/instruments.hpp"
#include "synthmix/json_io.hpp"
#include "synthmix/promptgen.hpp"
#include "synthmix/rng.hpp"
#include "synthmix/text.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <set>
#include <thread>

namespace synthmix {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(ClassifierKind k) {
    switch (k) {
    case ClassifierKind::linear: return "linear";
    case ClassifierKind::llm_prompting: return "llm_prompting";
    case ClassifierKind::external_handoff: return "external_handoff";
    }
    return "?";
}

ClassifierKind parse_classifier_kind(std::string_view s) {
    if (s == "linear") return ClassifierKind::linear;
    if (s == "llm_prompting") return ClassifierKind::llm_prompting;
    if (s == "external_handoff") return ClassifierKind::external_handoff;
    throw ConfigError("unknown classifier kind '" + std::string(s) + "'");
}

std::string_view to_string(BackendKind k) { return k == BackendKind::mock ? "mock" : "http"; }

BackendKind parse_backend_kind(std::string_view s) {
    if (s == "mock") return BackendKind::mock;
    if (s == "http") return BackendKind::http;
    throw ConfigError("unknown backend '" + std::string(s) + "'");
}

std::string_view to_string(RunStatus s) {
    switch (s) {
    case RunStatus::pending: return "pending";
    case RunStatus::generated: return "generated";
    case RunStatus::trained: return "trained";
    case RunStatus::evaluated: return "evaluated";
    case RunStatus::skipped: return "skipped";
    case RunStatus::failed: return "failed";
    }
    return "?";
}

RunStatus parse_run_status(std::string_view s) {
    for (auto st : {RunStatus::pending, RunStatus::generated, RunStatus::trained, RunStatus::evaluated,
                    RunStatus::skipped, RunStatus::failed})
        if (to_string(st) == s) return st;
    throw SchemaError("unknown run status '" + std::string(s) + "'");
}

Stage parse_stage(std::string_view s) {
    if (s == "generate") return Stage::generate;
    if (s == "train") return Stage::train;
    if (s == "evaluate") return Stage::evaluate;
    throw ConfigError("unknown stage '" + std::string(s) + "'");
}

namespace {

std::string path_slug(std::string_view s) {
    std::string out;
    for (char ch : s) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c) || ch == '.' || ch == '-' || ch == '_')
            out.push_back(static_cast<char>(std::tolower(c)));
        else
            out.push_back('_');
    }
    return out.empty() ? "_" : out;
}

std::string cell_slug(const std::optional<StrategyCell>& cell) {
    return cell ? path_slug(text::replace_all(cell->key(), "/", "-")) : "labeled_only";
}

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
    if (!obj.is_object()) throw ConfigError(std::string(where) + " must be an object");
    for (const auto& [k, v] : obj.items()) {
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end())
            throw ConfigError(fmt::format("{}: unknown key '{}'", where, k));
    }
}

template <class T>
T get_or(const json& obj, const char* key, T fallback, std::string_view where) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return fallback;
    try {
        return it->get<T>();
    } catch (const json::exception&) {
        throw ConfigError(fmt::format("{}: field '{}' has the wrong type", where, key));
    }
}

fs::path resolve(const fs::path& base, const std::string& p) {
    if (p.empty()) return {};
    fs::path path(p);
    return path.is_absolute() ? path : base / path;
}

} // namespace

void ExperimentConfig::validate() const {
    if (study.empty()) throw ConfigError("study must be set");
    if (instrument.empty()) throw ConfigError("instrument path must be set");
    if (data.train.empty()) throw ConfigError("data.train must be set");
    if (data.test.empty() && !(data.test_fraction > 0.0 && data.test_fraction < 1.0))
        throw ConfigError("data.test_fraction must lie in (0, 1)");
    if (ratios.empty()) throw ConfigError("ratios must be non-empty");
    for (double r : ratios)
        if (!(r >= 0.0 && r <= 1.0)) throw ConfigError(fmt::format("ratio {} outside [0, 1]", r));
    if (std::set<double>(ratios.begin(), ratios.end()).size() != ratios.size())
        throw ConfigError("ratios must be distinct");
    if (seeds.empty()) throw ConfigError("seeds must be non-empty");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
        throw ConfigError("seeds must be distinct");
    if (cells.empty()) throw ConfigError("cells must be non-empty");
    if (std::set<StrategyCell>(cells.begin(), cells.end()).size() != cells.size())
        throw ConfigError("cells must be distinct");
    if (generators.empty()) throw ConfigError("generators must be non-empty");
    if (std::set<std::string>(generators.begin(), generators.end()).size() != generators.size())
        throw ConfigError("generators must be distinct");
    for (const auto& g : generators)
        if (g.empty() || g == "none") throw ConfigError("generator name '" + g + "' is reserved");
    if (classifiers.empty()) throw ConfigError("classifiers must be non-empty");
    if (batch_size < 1) throw ConfigError("generation.batch_size must be >= 1");
    if (max_rerequests < 0) throw ConfigError("generation.max_rerequests must be >= 0");
    if (backend.max_in_flight < 1) throw ConfigError("backend.max_in_flight must be >= 1");
    if (!(backend.noise_rate >= 0.0 && backend.noise_rate <= 1.0)) throw ConfigError("backend.noise_rate must lie in [0, 1]");
    features.validate();
    train.validate();
}

ExperimentConfig parse_experiment_config(std::string_view json_text, const fs::path& base_dir) {
    json j = json::parse(json_text, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config is not valid JSON");
    check_keys(j,
               {"study", "instrument", "templates", "data", "ratios", "cells", "generators", "classifiers", "seeds",
                "per_class_n", "mix_scope", "master_seed", "backend", "generation", "features", "train",
                "llm_classifier", "output_dir"},
               "config");
    ExperimentConfig c;
    c.study = get_or<std::string>(j, "study", "", "config");
    c.instrument = resolve(base_dir, get_or<std::string>(j, "instrument", "", "config"));
    const std::string templates = get_or<std::string>(j, "templates", "", "config");
    c.templates = templates.empty() ? fs::path(SYNTHMIX_DATA_DIR) / "templates" : resolve(base_dir, templates);

    const json data = j.value("data", json::object());
    check_keys(data, {"train", "test", "test_fraction", "ood", "format", "text_field", "label_field", "id_field", "aliases"},
               "data");
    c.data.train = resolve(base_dir, get_or<std::string>(data, "train", "", "data"));
    c.data.test = resolve(base_dir, get_or<std::string>(data, "test", "", "data"));
    c.data.test_fraction = get_or<double>(data, "test_fraction", c.data.test_fraction, "data");
    const json ood = data.value("ood", json::object());
    if (!ood.is_object()) throw ConfigError("data.ood must map names to paths");
    for (const auto& [name, p] : ood.items()) {
        if (!p.is_string()) throw ConfigError("data.ood." + name + " must be a path");
        if (name == "test" || name == "ood_mean") throw ConfigError("OOD set name '" + name + "' is reserved");
        c.data.ood[name] = resolve(base_dir, p.get<std::string>());
    }
    const std::string format = get_or<std::string>(data, "format", "auto", "data");
    if (format == "jsonl") c.data.load.format = FileFormat::jsonl;
    else if (format == "csv") c.data.load.format = FileFormat::csv;
    else if (format != "auto") throw ConfigError("data.format must be auto, jsonl or csv");
    c.data.load.text_field = get_or<std::string>(data, "text_field", c.data.load.text_field, "data");
    c.data.load.label_field = get_or<std::string>(data, "label_field", c.data.load.label_field, "data");
    c.data.load.id_field = get_or<std::string>(data, "id_field", c.data.load.id_field, "data");
    c.data.aliases = resolve(base_dir, get_or<std::string>(data, "aliases", "", "data"));

    if (j.contains("ratios")) c.ratios = get_or<std::vector<double>>(j, "ratios", {}, "config");
    if (j.contains("cells")) {
        c.cells.clear();
        for (const auto& k : get_or<std::vector<std::string>>(j, "cells", {}, "config")) c.cells.push_back(StrategyCell::parse(k));
    }
    if (j.contains("generators")) c.generators = get_or<std::vector<std::string>>(j, "generators", {}, "config");
    if (j.contains("classifiers")) {
        c.classifiers.clear();
        for (const auto& k : get_or<std::vector<std::string>>(j, "classifiers", {}, "config"))
            c.classifiers.push_back(parse_classifier_kind(k));
    }
    if (j.contains("seeds")) c.seeds = get_or<std::vector<std::uint64_t>>(j, "seeds", {}, "config");
    c.per_class_n = get_or<std::size_t>(j, "per_class_n", 0, "config");
    c.scope = parse_mix_scope(get_or<std::string>(j, "mix_scope", "per_class", "config"));
    c.master_seed = get_or<std::uint64_t>(j, "master_seed", c.master_seed, "config");

    const json backend = j.value("backend", json::object());
    check_keys(backend, {"kind", "theory_mode", "naive_mode", "noise_rate", "classify_mode", "max_in_flight"}, "backend");
    c.backend.kind = parse_backend_kind(get_or<std::string>(backend, "kind", "mock", "backend"));
    c.backend.theory_mode = parse_mock_mode(get_or<std::string>(backend, "theory_mode", "keyword_faithful", "backend"));
    c.backend.naive_mode = parse_mock_mode(get_or<std::string>(backend, "naive_mode", "generic", "backend"));
    c.backend.classify_mode = parse_mock_mode(get_or<std::string>(backend, "classify_mode", "keyword_faithful", "backend"));
    c.backend.noise_rate = get_or<double>(backend, "noise_rate", 0.0, "backend");
    c.backend.max_in_flight = get_or<int>(backend, "max_in_flight", 4, "backend");

    const json gen = j.value("generation", json::object());
    check_keys(gen, {"temperature", "batch_size", "max_rerequests"}, "generation");
    c.generation_temperature = get_or<double>(gen, "temperature", c.generation_temperature, "generation");
    c.batch_size = get_or<int>(gen, "batch_size", c.batch_size, "generation");
    c.max_rerequests = get_or<int>(gen, "max_rerequests", c.max_rerequests, "generation");

    const json feat = j.value("features", json::object());
    check_keys(feat, {"word_ngram", "char_ngram", "dim", "tf", "idf", "l2"}, "features");
    if (feat.contains("word_ngram")) {
        auto v = get_or<std::vector<int>>(feat, "word_ngram", {}, "features");
        if (v.size() != 2) throw ConfigError("features.word_ngram must be [min, max]");
        c.features.word = {v[0], v[1]};
    }
    if (feat.contains("char_ngram")) {
        auto v = get_or<std::vector<int>>(feat, "char_ngram", {}, "features");
        if (v.size() != 2) throw ConfigError("features.char_ngram must be [min, max]");
        c.features.chars = {v[0], v[1]};
    }
    c.features.dim = get_or<std::uint32_t>(feat, "dim", c.features.dim, "features");
    const std::string tf = get_or<std::string>(feat, "tf", "sublinear", "features");
    if (tf == "binary") c.features.tf = TfWeighting::binary;
    else if (tf == "sublinear") c.features.tf = TfWeighting::sublinear;
    else throw ConfigError("features.tf must be sublinear or binary");
    c.features.use_idf = get_or<bool>(feat, "idf", c.features.use_idf, "features");
    c.features.l2_normalize = get_or<bool>(feat, "l2", c.features.l2_normalize, "features");

    const json tr = j.value("train", json::object());
    check_keys(tr, {"C", "epochs", "project"}, "train");
    c.train.C = get_or<double>(tr, "C", c.train.C, "train");
    c.train.epochs = get_or<int>(tr, "epochs", c.train.epochs, "train");
    c.train.project = get_or<bool>(tr, "project", c.train.project, "train");

    const json llm = j.value("llm_classifier", json::object());
    check_keys(llm, {"model", "temperature", "unparseable", "abstain_label"}, "llm_classifier");
    c.llm.generation.model_name = get_or<std::string>(llm, "model", c.llm.generation.model_name, "llm_classifier");
    c.llm.generation.temperature = get_or<double>(llm, "temperature", c.llm.generation.temperature, "llm_classifier");
    const std::string unparseable = get_or<std::string>(llm, "unparseable", "abstain", "llm_classifier");
    if (unparseable == "abstain") c.llm.policy = UnparseablePolicy::abstain;
    else if (unparseable == "fail") c.llm.policy = UnparseablePolicy::fail;
    else throw ConfigError("llm_classifier.unparseable must be abstain or fail");
    c.llm.abstain_label = get_or<std::string>(llm, "abstain_label", "", "llm_classifier");

    const std::string out = get_or<std::string>(j, "output_dir", "runs", "config");
    c.output_dir = resolve(base_dir, out);
    c.validate();
    return c;
}

ExperimentConfig load_experiment_config(const fs::path& path) {
    std::string text;
    try {
        text = jsonio::read_file(path);
    } catch (const IoError& e) {
        throw ConfigError(e.what());
    }
    return parse_experiment_config(text, path.parent_path());
}

std::string RunRecord::id() const {
    return fmt::format("{}/{}/{}/{}/{}", key.generator_model, cell ? cell->key() : "labeled_only",
                       format_double(key.ratio), key.seed, key.classifier);
}

std::vector<RunRecord> plan_runs(const ExperimentConfig& config) {
    config.validate();
    std::vector<RunRecord> runs;
    std::vector<double> ratios = config.ratios;
    std::sort(ratios.begin(), ratios.end());
    for (auto kind : config.classifiers) {
        if (kind == ClassifierKind::llm_prompting) continue;
        const std::string name(to_string(kind));
        for (auto seed : config.seeds) {
            for (double ratio : ratios) {
                if (ratio == 0.0) {
                    RunRecord r;
                    r.key = {config.study, name, "none", "none", "none", 0.0, seed};
                    r.kind = kind;
                    runs.push_back(r);
                    continue;
                }
                for (const auto& gen : config.generators) {
                    for (const auto& cell : config.cells) {
                        RunRecord r;
                        r.key = {config.study, name, gen, std::string(to_string(cell.instruction)),
                                 std::string(to_string(cell.generation)), ratio, seed};
                        r.kind = kind;
                        r.cell = cell;
                        runs.push_back(r);
                        r.labeled_subset = true;
                        r.key.classifier = name + "-labeled-subset";
                        runs.push_back(r);
                    }
                }
            }
        }
    }
    if (std::find(config.classifiers.begin(), config.classifiers.end(), ClassifierKind::llm_prompting) !=
        config.classifiers.end()) {
        for (auto seed : config.seeds) {
            RunRecord r;
            r.key = {config.study, "llm_prompting", config.llm.generation.model_name, "none", "none", 0.0, seed};
            r.kind = ClassifierKind::llm_prompting;
            runs.push_back(r);
        }
    }
    return runs;
}

std::string PoolSpec::id() const { return generator + "|" + cell.key() + "|" + label; }

std::vector<PoolSpec> plan_pools(const ExperimentConfig& config, const std::vector<std::string>& classes,
                                 const std::vector<std::string>& supplied, std::size_t per_class_n) {
    const double rmax = *std::max_element(config.ratios.begin(), config.ratios.end());
    if (rmax == 0.0 || supplied.empty()) return {};
    std::size_t size = round_half_up(rmax * static_cast<double>(per_class_n));
    if (config.scope == MixScope::global) {
        const auto demand = round_half_up(rmax * static_cast<double>(per_class_n * classes.size()));
        size = std::min(per_class_n, (demand + supplied.size() - 1) / supplied.size());
    }
    std::vector<PoolSpec> pools;
    for (const auto& gen : config.generators)
        for (const auto& cell : config.cells)
            for (const auto& label : supplied) pools.push_back({cell, gen, label, size});
    return pools;
}

std::uint64_t generation_budget(const std::vector<PoolSpec>& pools, int batch_size) {
    std::uint64_t total = 0;
    const auto b = static_cast<std::uint64_t>(batch_size);
    for (const auto& p : pools) total += (p.size + b - 1) / b;
    return total;
}

std::size_t ExecutionSummary::count(RunStatus s) const {
    return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [s](const RunRecord& r) { return r.status == s; }));
}

int ExecutionSummary::exit_code() const { return count(RunStatus::failed) == 0 ? 0 : 1; }

namespace {

struct PoolResult {
    std::vector<Example> examples;
    std::uint64_t requests = 0;
    std::uint64_t rerequests = 0;
};

/// Everything a run needs, loaded once.
struct Context {
    Context(const ExperimentConfig& c, const ExecuteOptions& o, fs::path dir) : config(c), options(o), out(std::move(dir)) {}

    const ExperimentConfig& config;
    const ExecuteOptions& options;
    fs::path out;
    Instrument instrument;
    TemplateSet templates;
    Corpus train_pool;
    Corpus test;
    std::map<std::string, Corpus> ood;
    std::size_t per_class_n = 0;
    std::map<std::uint64_t, Corpus> labeled_by_seed;
    // (generator, cell key) -> pool corpus over all supplied classes
    std::map<std::pair<std::string, std::string>, Corpus> pools;
    std::map<Instruction, std::unique_ptr<Gateway>> generation;
    std::unique_ptr<Gateway> classification;
    std::mutex log_mutex;

    Rng mix_rng(std::uint64_t seed) const { return Rng(derive_seed(config.master_seed, fmt::format("mix/{}", seed))); }
    std::uint64_t train_seed(std::uint64_t seed) const { return derive_seed(config.master_seed, fmt::format("train/{}", seed)); }
};

GatewayOptions gateway_options(const fs::path& cache, const ExperimentConfig& config, const ExecuteOptions& options) {
    GatewayOptions g;
    g.cache_dir = cache;
    g.max_in_flight = config.backend.max_in_flight;
    if (options.sleep) g.sleep = options.sleep;
    return g;
}

void build_gateways(Context& ctx) {
    const auto& cfg = ctx.config;
    std::shared_ptr<Backend> http;
    auto http_backend = [&]() {
        if (!http) http = HttpBackend::from_env();
        return http;
    };
    for (auto instr : {Instruction::theory_driven, Instruction::naive}) {
        std::shared_ptr<Backend> backend = ctx.options.generation_backend;
        if (!backend) {
            if (cfg.backend.kind == BackendKind::http) {
                backend = http_backend();
            } else {
                const auto mode = instr == Instruction::theory_driven ? cfg.backend.theory_mode : cfg.backend.naive_mode;
                backend = std::make_shared<MockBackend>(MockProfile::from_instrument(ctx.instrument, mode, cfg.backend.noise_rate));
            }
        }
        ctx.generation[instr] = std::make_unique<Gateway>(
            backend, gateway_options(ctx.out / "cache" / "generation" / std::string(to_string(instr)), cfg, ctx.options));
    }
    std::shared_ptr<Backend> cls = ctx.options.classification_backend;
    if (!cls) {
        if (cfg.backend.kind == BackendKind::http)
            cls = http_backend();
        else
            cls = std::make_shared<MockBackend>(MockProfile::from_instrument(ctx.instrument, cfg.backend.classify_mode));
    }
    ctx.classification = std::make_unique<Gateway>(cls, gateway_options(ctx.out / "cache" / "classification", cfg, ctx.options));
}

void load_data(Context& ctx) {
    const auto& cfg = ctx.config;
    LoadOptions load = cfg.data.load;
    load.study = cfg.study;
    if (load.classes.empty()) load.classes = ctx.instrument.classes;
    if (!cfg.data.aliases.empty()) load.aliases = load_alias_map(cfg.data.aliases);

    Corpus all = load_corpus(cfg.data.train, load);
    if (cfg.data.test.empty()) {
        Rng rng(derive_seed(cfg.master_seed, "test-split"));
        auto [test, rest] = split_validation(all, cfg.data.test_fraction, rng);
        ctx.test = std::move(test);
        ctx.train_pool = std::move(rest);
    } else {
        ctx.train_pool = std::move(all);
        ctx.test = load_corpus(cfg.data.test, load);
    }
    for (const auto& [name, path] : cfg.data.ood) ctx.ood[name] = load_corpus(path, load);

    const auto counts = ctx.train_pool.count_by_class();
    std::size_t smallest = SIZE_MAX;
    for (const auto& c : ctx.train_pool.classes) smallest = std::min(smallest, counts.at(c));
    ctx.per_class_n = cfg.per_class_n ? cfg.per_class_n : smallest;
    if (ctx.per_class_n == 0) throw ConfigError("some class has no training examples");
    if (ctx.per_class_n > smallest)
        throw ConfigError(fmt::format("per_class_n {} exceeds the smallest class count {}", ctx.per_class_n, smallest));
    for (auto seed : cfg.seeds) {
        Rng rng(derive_seed(cfg.master_seed, fmt::format("labeled/{}", seed)));
        ctx.labeled_by_seed[seed] = balance(ctx.train_pool, ctx.per_class_n, rng);
    }
}

fs::path pool_path(const Context& ctx, const PoolSpec& spec) {
    const auto& classes = ctx.instrument.classes;
    const auto idx = std::find(classes.begin(), classes.end(), spec.label) - classes.begin();
    return ctx.out / "pools" / path_slug(spec.generator) / cell_slug(spec.cell) /
           fmt::format("{}-{}.jsonl", idx, path_slug(spec.label));
}

PoolResult generate_pool(Context& ctx, const PoolSpec& spec) {
    const auto& cfg = ctx.config;
    Gateway& gateway = *ctx.generation.at(spec.cell.instruction);
    GenerationConfig gen;
    gen.model_name = spec.generator;
    gen.temperature = cfg.generation_temperature;

    const Rng base(derive_seed(cfg.master_seed, "pool/" + spec.id()));
    const auto bs = static_cast<std::size_t>(cfg.batch_size);
    const std::size_t planned = (spec.size + bs - 1) / bs;
    PoolResult out;
    std::size_t request = 0;
    while (out.examples.size() < spec.size) {
        if (request >= planned) {
            if (out.rerequests >= static_cast<std::uint64_t>(cfg.max_rerequests))
                throw Error(fmt::format("pool {}: still {} texts short after {} extra requests", spec.id(),
                                        spec.size - out.examples.size(), out.rerequests));
            ++out.rerequests;
        }
        Rng rng = base.fork(fmt::format("request/{}", request));
        std::vector<SeedExample> seeds;
        if (spec.cell.generation == Generation::alternation) {
            Rng pick = rng.fork("seeds");
            const auto k = static_cast<std::size_t>(ctx.templates.seed_examples);
            if (ctx.train_pool.size() < k) throw PreconditionError("train pool is smaller than the seed-example count");
            for (auto i : pick.sample_indices(ctx.train_pool.size(), k)) {
                const auto& e = ctx.train_pool.examples[i];
                seeds.push_back({e.id, e.text});
            }
        }
        const auto batch = build_generation_prompt(spec.cell, ctx.templates, ctx.instrument, spec.label, seeds,
                                                   cfg.batch_size, rng);
        const auto reply = gateway.complete(batch.prompt, gen, fmt::format("{}#{}", spec.id(), request));
        ++out.requests;
        ++request;
        ParsedGeneration parsed;
        try {
            parsed = parse_generation_response(reply.raw_text, cfg.batch_size, spec.label);
        } catch (const GenerationParseError& e) {
            std::lock_guard lock(ctx.log_mutex);
            fmt::print(stderr, "warning: pool {}: {}\n", spec.id(), e.what());
            continue;
        }
        for (auto& ex : parsed.examples) {
            if (out.examples.size() == spec.size) break;
            ex.id = fmt::format("syn:{}:{}", spec.id(), out.examples.size());
            ex.label = spec.label;
            ex.origin = Origin::synthetic;
            ex.provenance = Provenance{spec.cell.key(), spec.generator, reply.request_fingerprint,
                                       seeds.empty() ? std::string() : seeds.front().id};
            out.examples.push_back(std::move(ex));
        }
    }
    return out;
}

template <class F>
void parallel_for(std::size_t n, int jobs, F&& body) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) body(i);
    };
    const auto workers = static_cast<std::size_t>(std::max(1, jobs));
    if (workers == 1 || n <= 1) {
        worker();
        return;
    }
    std::vector<std::jthread> threads;
    for (std::size_t t = 0; t < std::min(workers, n); ++t) threads.emplace_back(worker);
}

struct PoolOutcome {
    std::uint64_t requests = 0;
    std::uint64_t rerequests = 0;
};

PoolOutcome prepare_pools(Context& ctx, const std::vector<PoolSpec>& specs) {
    std::vector<std::vector<Example>> built(specs.size());
    std::vector<std::string> errors(specs.size());
    std::atomic<std::uint64_t> requests{0}, rerequests{0};
    parallel_for(specs.size(), ctx.options.jobs, [&](std::size_t i) {
        const auto& spec = specs[i];
        const auto path = pool_path(ctx, spec);
        try {
            if (ctx.options.resume && fs::exists(path)) {
                auto ex = read_examples(path);
                if (ex.size() == spec.size) {
                    built[i] = std::move(ex);
                    return;
                }
            }
            auto res = generate_pool(ctx, spec);
            requests += res.requests;
            rerequests += res.rerequests;
            fs::create_directories(path.parent_path());
            write_examples(path, res.examples);
            built[i] = std::move(res.examples);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const auto key = std::make_pair(specs[i].generator, specs[i].cell.key());
        if (!errors[i].empty()) {
            std::lock_guard lock(ctx.log_mutex);
            fmt::print(stderr, "error: pool {}: {}\n", specs[i].id(), errors[i]);
            continue;
        }
        auto& pool = ctx.pools[key];
        pool.study = ctx.config.study;
        pool.classes = ctx.instrument.classes;
        for (auto& e : built[i]) pool.examples.push_back(std::move(e));
    }
    return {requests.load(), rerequests.load()};
}

json status_json(const RunRecord& r) {
    return {{"id", r.id()},
            {"status", std::string(to_string(r.status))},
            {"error", r.error},
            {"wall_seconds", r.wall_seconds},
            {"requests", r.requests}};
}

void write_status(const RunRecord& r) {
    fs::create_directories(r.dir);
    jsonio::write_file_atomic(r.dir / "status.json", status_json(r).dump(2) + "\n");
}

std::vector<std::string> golds_of(const Corpus& c) {
    std::vector<std::string> g;
    g.reserve(c.size());
    for (const auto& e : c.examples) g.push_back(e.label);
    return g;
}

std::vector<std::string> texts_of(const Corpus& c) {
    std::vector<std::string> t;
    t.reserve(c.size());
    for (const auto& e : c.examples) t.push_back(e.text);
    return t;
}

/// (dataset name, split, corpus) for every evaluation set.
std::vector<std::tuple<std::string, std::string, const Corpus*>> eval_sets(const Context& ctx) {
    std::vector<std::tuple<std::string, std::string, const Corpus*>> sets;
    sets.emplace_back("test", "in_domain", &ctx.test);
    for (const auto& [name, c] : ctx.ood) sets.emplace_back(name, "ood", &c);
    return sets;
}

bool trainable(const Corpus& c, std::string& why) {
    const auto counts = c.count_by_class();
    for (const auto& label : c.classes) {
        if (counts.at(label) < 2) {
            why = fmt::format("class {} has {} examples", label, counts.at(label));
            return false;
        }
    }
    return true;
}

void write_results(const RunRecord& r, const std::vector<EvalResult>& rows) {
    fs::create_directories(r.dir / "eval");
    jsonio::write_file_atomic(r.dir / "eval" / "results.csv", results_csv(rows));
}

std::vector<EvalResult> run_one(Context& ctx, RunRecord& run) {
    const auto& cfg = ctx.config;
    std::vector<EvalResult> rows;

    if (run.kind == ClassifierKind::llm_prompting) {
        for (const auto& [name, split, corpus] : eval_sets(ctx)) {
            LlmClassifyOptions opts = cfg.llm;
            opts.nonce_prefix = fmt::format("classify/{}/{}", name, run.key.seed);
            const auto before = ctx.classification->backend_calls();
            const auto res = llm_classify(*ctx.classification, corpus->classes, texts_of(*corpus), opts);
            run.requests += ctx.classification->backend_calls() - before;
            fs::create_directories(run.dir / "preds");
            write_predictions(run.dir / "preds" / (name + ".jsonl"), *corpus, res.predictions);
            const auto golds = golds_of(*corpus);
            const auto cm = confusion(golds, res.predictions, corpus->classes);
            rows.push_back(make_result(run.key, name, split, cm));
        }
        run.status = RunStatus::evaluated;
        return rows;
    }

    // mix
    const Corpus& labeled = ctx.labeled_by_seed.at(run.key.seed);
    Corpus empty_pool;
    empty_pool.study = cfg.study;
    empty_pool.classes = labeled.classes;
    const Corpus* syn = &empty_pool;
    if (run.cell) {
        auto it = ctx.pools.find({run.key.generator_model, run.cell->key()});
        if (it == ctx.pools.end() && !ctx.instrument.targeted_classes().empty())
            throw Error("synthetic pool for " + run.key.generator_model + " " + run.cell->key() + " is unavailable");
        if (it != ctx.pools.end()) syn = &it->second;
    }
    const Rng rng = ctx.mix_rng(run.key.seed);
    const auto plan = plan_mix(labeled, *syn, ctx.per_class_n, run.key.ratio, cfg.scope);
    Corpus train_set = run.labeled_subset ? labeled_portion(plan, labeled, rng) : materialize_mix(plan, labeled, *syn, rng);
    train_set.validate();

    fs::create_directories(run.dir / "data");
    write_examples(run.dir / "data" / "train.jsonl", train_set.examples);
    json meta = {{"id", run.id()},
                 {"ratio", run.key.ratio},
                 {"seed", run.key.seed},
                 {"master_seed", cfg.master_seed},
                 {"labeled_subset", run.labeled_subset},
                 {"scope", std::string(to_string(plan.scope))},
                 {"asymmetric", plan.asymmetric},
                 {"notes", plan.notes},
                 {"pooling", "synthetic pools generated once per cell, generator and class at the largest ratio; "
                             "subsampled per ratio and seed"},
                 {"seeding", "the run seed drives both the synthetic subsample and the training shuffle"},
                 {"counts", json::object()}};
    for (const auto& c : plan.classes) meta["counts"][c.label] = {{"labeled", c.labeled}, {"synthetic", c.synthetic}};
    jsonio::write_file_atomic(run.dir / "run.json", meta.dump(2) + "\n");
    run.status = RunStatus::generated;
    write_status(run);

    std::string why;
    if (!trainable(train_set, why)) {
        run.status = RunStatus::skipped;
        run.error = "untrainable: " + why;
        return rows;
    }
    if (ctx.options.stop_after == Stage::generate) return rows;

    if (run.kind == ClassifierKind::external_handoff) {
        std::map<std::string, const Corpus*> splits;
        for (const auto& [name, split, corpus] : eval_sets(ctx)) splits[name] = corpus;
        HandoffManifest m;
        m.study = cfg.study;
        m.seed = run.key.seed;
        m.ratio = run.key.ratio;
        m.strategy = run.cell ? run.cell->key() : "labeled_only";
        m.generator_model = run.key.generator_model;
        external_trainer_handoff(run.dir / "handoff", train_set, splits, m);
        run.status = RunStatus::trained;
        write_status(run);
        if (ctx.options.stop_after == Stage::train) return rows;
        bool all = true;
        for (const auto& [name, split, corpus] : eval_sets(ctx)) all = all && fs::exists(run.dir / "preds" / (name + ".jsonl"));
        if (!all) return rows; // predictions not supplied yet
        for (const auto& [name, split, corpus] : eval_sets(ctx)) {
            const auto preds = import_predictions(run.dir / "preds" / (name + ".jsonl"), *corpus);
            rows.push_back(make_result(run.key, name, split, confusion(golds_of(*corpus), preds, corpus->classes)));
        }
        run.status = RunStatus::evaluated;
        return rows;
    }

    TrainConfig tc = cfg.train;
    tc.seed = ctx.train_seed(run.key.seed);
    if (ctx.options.train_hook) ctx.options.train_hook(run, tc);
    const auto model = train(train_set, cfg.features, tc);
    fs::create_directories(run.dir / "model");
    save_model(model, run.dir / "model" / "linear.bin");
    run.status = RunStatus::trained;
    write_status(run);
    if (ctx.options.stop_after == Stage::train) return rows;

    fs::create_directories(run.dir / "preds");
    for (const auto& [name, split, corpus] : eval_sets(ctx)) {
        const auto preds = predict_batch(model, texts_of(*corpus));
        std::vector<std::optional<std::string>> labels;
        for (const auto& p : preds) labels.emplace_back(p.label);
        write_predictions(run.dir / "preds" / (name + ".jsonl"), *corpus, labels);
        rows.push_back(make_result(run.key, name, split, confusion(golds_of(*corpus), labels, corpus->classes)));
    }
    run.status = RunStatus::evaluated;
    return rows;
}

fs::path run_dir(const Context& ctx, const RunRecord& r) {
    return ctx.out / path_slug(r.key.generator_model) / cell_slug(r.cell) / format_double(r.key.ratio) /
           std::to_string(r.key.seed) / path_slug(r.key.classifier);
}

} // namespace

ExecutionSummary execute(const ExperimentConfig& config, const ExecuteOptions& options) {
    config.validate();
    Context ctx(config, options, config.output_dir / path_slug(config.study));
    fs::create_directories(ctx.out);
    ctx.instrument = load_instrument(config.instrument);
    ctx.templates = TemplateLibrary::load_directory(config.templates).for_genre(ctx.instrument.text_genre);
    load_data(ctx);
    build_gateways(ctx);

    ExecutionSummary summary;
    summary.runs = plan_runs(config);
    for (auto& r : summary.runs) r.dir = run_dir(ctx, r);

    const bool need_pools = std::any_of(summary.runs.begin(), summary.runs.end(),
                                        [](const RunRecord& r) { return r.cell.has_value(); });
    std::vector<PoolSpec> specs;
    if (need_pools) specs = plan_pools(config, ctx.instrument.classes, ctx.instrument.targeted_classes(), ctx.per_class_n);
    summary.pools = specs.size();
    summary.generation_budget = generation_budget(specs, config.batch_size);
    const auto pools = prepare_pools(ctx, specs);
    summary.rerequests = pools.rerequests;

    std::vector<std::vector<EvalResult>> per_run(summary.runs.size());
    parallel_for(summary.runs.size(), options.jobs, [&](std::size_t i) {
        RunRecord& run = summary.runs[i];
        if (options.resume && fs::exists(run.dir / "status.json")) {
            try {
                const json st = jsonio::parse_or_throw(jsonio::read_file(run.dir / "status.json"), "status");
                const auto status = parse_run_status(st.at("status").get<std::string>());
                if (status == RunStatus::evaluated && fs::exists(run.dir / "eval" / "results.csv")) {
                    per_run[i] = parse_results_csv(jsonio::read_file(run.dir / "eval" / "results.csv"));
                    run.status = status;
                    run.wall_seconds = st.value("wall_seconds", 0.0);
                    run.requests = st.value("requests", std::uint64_t{0});
                    return;
                }
                if (status == RunStatus::skipped) {
                    run.status = status;
                    run.error = st.value("error", std::string());
                    return;
                }
            } catch (const std::exception&) {
                // unreadable status: redo the run
            }
        }
        const auto t0 = std::chrono::steady_clock::now();
        try {
            per_run[i] = run_one(ctx, run);
            if (run.status == RunStatus::evaluated) write_results(run, per_run[i]);
        } catch (const std::exception& e) {
            run.status = RunStatus::failed;
            run.error = e.what();
            per_run[i].clear();
        }
        run.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_status(run);
        if (run.status == RunStatus::failed) {
            std::lock_guard lock(ctx.log_mutex);
            fmt::print(stderr, "error: run {}: {}\n", run.id(), run.error);
        }
    });

    for (auto& rows : per_run)
        for (auto& r : rows) summary.results.push_back(std::move(r));
    std::sort(summary.results.begin(), summary.results.end(), result_less);

    summary.generation_requests = 0;
    for (const auto& [instr, g] : ctx.generation) summary.generation_requests += g->backend_calls();
    summary.classification_requests = ctx.classification->backend_calls();

    summary.results_path = ctx.out / "results.csv";
    jsonio::write_file_atomic(summary.results_path, results_csv(summary.results));

    std::string runs_csv = "id,status,wall_seconds,requests,error\n";
    std::vector<const RunRecord*> ordered;
    for (const auto& r : summary.runs) ordered.push_back(&r);
    std::sort(ordered.begin(), ordered.end(), [](auto* a, auto* b) { return a->id() < b->id(); });
    json failures = json::array();
    for (const auto* r : ordered) {
        runs_csv += fmt::format("{},{},{:.3f},{},{}\n", r->id(), to_string(r->status), r->wall_seconds, r->requests,
                                '"' + text::replace_all(r->error, "\"", "\"\"") + '"');
        if (r->status == RunStatus::failed) failures.push_back({{"id", r->id()}, {"error", r->error}});
    }
    jsonio::write_file_atomic(ctx.out / "runs.csv", runs_csv);

    json s = {{"study", config.study},
              {"master_seed", config.master_seed},
              {"per_class_n", ctx.per_class_n},
              {"runs", summary.runs.size()},
              {"pools", summary.pools},
              {"generation_budget", summary.generation_budget},
              {"rerequests", summary.rerequests},
              {"generation_requests", summary.generation_requests},
              {"classification_requests", summary.classification_requests},
              {"status", json::object()},
              {"failures", failures}};
    for (auto st : {RunStatus::pending, RunStatus::generated, RunStatus::trained, RunStatus::evaluated,
                    RunStatus::skipped, RunStatus::failed})
        s["status"][std::string(to_string(st))] = summary.count(st);
    jsonio::write_file_atomic(ctx.out / "summary.json", s.dump(2) + "\n");
    return summary;
}

// ---- report -----------------------------------------------------------------

const std::vector<std::string> kBestColumns = {"study",          "classifier",       "generator_model", "ratio",
                                               "in_domain_f1",   "in_domain_ci",     "in_domain_I",     "in_domain_G",
                                               "ood_f1",         "ood_ci",           "ood_I",           "ood_G",
                                               "n_seeds"};
const std::vector<std::string> kDiffColumns = {"study", "classifier", "generator_model", "ratio", "in_domain_diff",
                                               "ood_diff"};
const std::vector<std::string> kCurveColumns = {"study",   "classifier", "generator_model", "instruction",
                                                "generation", "dataset", "ratio",           "n_seeds",
                                                "mean_macro_f1", "ci_half_width"};

namespace {

std::string instruction_code(const std::string& s) {
    if (s == "theory_driven") return "T";
    if (s == "naive") return "N";
    return "-";
}

std::string generation_code(const std::string& s) {
    if (s == "new") return "N";
    if (s == "alternation") return "A";
    return "-";
}

std::string ci_text(const AggregateResult& a) { return a.half_width ? format_double(*a.half_width) : ""; }

using SeriesKey = std::tuple<std::string, std::string, std::string, std::string, std::string, double>;

/// (study, classifier, generator, instruction, generation, ratio) -> dataset -> seed -> macro-F1,
/// with an "ood_mean" dataset added per seed when OOD sets exist.
std::map<SeriesKey, std::map<std::string, std::map<std::uint64_t, double>>> by_series(const std::vector<EvalResult>& results) {
    std::map<SeriesKey, std::map<std::string, std::map<std::uint64_t, double>>> out;
    std::map<SeriesKey, std::map<std::uint64_t, std::vector<double>>> ood;
    for (const auto& r : results) {
        SeriesKey k{r.run.study, r.run.classifier, r.run.generator_model, r.run.instruction, r.run.generation, r.run.ratio};
        out[k][r.dataset][r.run.seed] = r.macro_f1;
        if (r.split == "ood") ood[k][r.run.seed].push_back(r.macro_f1);
    }
    for (const auto& [k, seeds] : ood)
        for (const auto& [seed, v] : seeds)
            out[k]["ood_mean"][seed] = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    return out;
}

AggregateResult aggregate_map(const std::map<std::uint64_t, double>& seeds) {
    std::vector<double> v;
    for (const auto& [s, x] : seeds) v.push_back(x);
    return aggregate_seeds(v);
}

} // namespace

ReportFiles emit_report(const std::vector<EvalResult>& results, const fs::path& dir, const ReportOptions& options) {
    if (results.empty()) throw PreconditionError("no results to report");
    fs::create_directories(dir);
    ReportFiles files;
    const auto series = by_series(results);

    std::set<std::string> in_domain;
    for (const auto& r : results)
        if (r.split == "in_domain") in_domain.insert(r.dataset);
    const std::string id_name = in_domain.empty() ? "" : *in_domain.begin();

    // curves
    std::string curves = csv::format_row(kCurveColumns);
    for (const auto& [k, datasets] : series) {
        for (const auto& [dataset, seeds] : datasets) {
            const auto a = aggregate_map(seeds);
            curves += csv::format_row({std::get<0>(k), std::get<1>(k), std::get<2>(k), std::get<3>(k), std::get<4>(k),
                                       dataset, format_double(std::get<5>(k)), std::to_string(a.n),
                                       format_double(a.mean), ci_text(a)});
        }
    }
    files.curves = dir / "curves.csv";
    jsonio::write_file_atomic(files.curves, curves);

    // best per ratio: pick the cell with the highest seed mean, separately for
    // in-domain and the OOD mean
    struct Best {
        std::optional<AggregateResult> agg;
        std::string instruction, generation;
    };
    using RowKey = std::tuple<std::string, std::string, double, std::string>; // study, classifier, ratio, generator
    std::map<RowKey, std::pair<Best, Best>> best;
    for (const auto& [k, datasets] : series) {
        const auto& [study, classifier, generator, instruction, generation, ratio] = k;
        auto& slot = best[{study, classifier, ratio, generator}];
        auto consider = [&](Best& b, const std::string& dataset) {
            auto it = datasets.find(dataset);
            if (it == datasets.end()) return;
            const auto a = aggregate_map(it->second);
            if (!b.agg || a.mean > b.agg->mean) b = {a, instruction, generation};
        };
        if (!id_name.empty()) consider(slot.first, id_name);
        consider(slot.second, "ood_mean");
    }
    std::string table = csv::format_row(kBestColumns);
    for (const auto& [k, b] : best) {
        const auto& [study, classifier, ratio, generator] = k;
        const auto& [id, ood] = b;
        table += csv::format_row({study, classifier, generator, format_double(ratio),
                                  id.agg ? format_double(id.agg->mean) : "", id.agg ? ci_text(*id.agg) : "",
                                  id.agg ? instruction_code(id.instruction) : "", id.agg ? generation_code(id.generation) : "",
                                  ood.agg ? format_double(ood.agg->mean) : "", ood.agg ? ci_text(*ood.agg) : "",
                                  ood.agg ? instruction_code(ood.instruction) : "",
                                  ood.agg ? generation_code(ood.generation) : "",
                                  std::to_string(id.agg ? id.agg->n : (ood.agg ? ood.agg->n : 0))});
    }
    files.best_per_ratio = dir / "best_per_ratio.csv";
    jsonio::write_file_atomic(files.best_per_ratio, table);

    // theory-vs-naive differences; labeled-subset baselines share their labeled
    // data across arms and are left out
    std::vector<EvalResult> mixed;
    std::set<std::string> arms;
    for (const auto& r : results) {
        if (r.run.classifier.ends_with("-labeled-subset")) continue;
        if (r.run.instruction != "theory_driven" && r.run.instruction != "naive") continue;
        arms.insert(r.run.instruction);
        mixed.push_back(r);
    }
    if (arms.size() < 2) {
        files.notes.push_back(arms.empty()
                                  ? "strategy diff not written: no theory_driven or naive results"
                                  : "strategy diff not written: only " + *arms.begin() +
                                        " results are present; the table compares theory_driven against naive");
        return files;
    }
    std::vector<DiffRow> rows;
    try {
        rows = strategy_diff(mixed, options.diff_mode);
    } catch (const PreconditionError& e) {
        files.notes.push_back(std::string("strategy diff not written: ") + e.what());
        return files;
    }
    std::string lng = csv::format_row({"study", "classifier", "generator_model", "dataset", "ratio", "theory_driven", "naive", "diff"});
    const std::string study = results.front().run.study;
    using WideKey = std::tuple<std::string, std::string, double>;
    std::map<WideKey, std::pair<std::optional<double>, std::optional<double>>> wide;
    for (const auto& r : rows) {
        lng += csv::format_row({study, r.classifier, r.generator_model, r.dataset, format_double(r.ratio),
                                format_double(r.theory), format_double(r.naive), format_double(r.diff)});
        auto& w = wide[{r.classifier, r.generator_model, r.ratio}];
        if (r.dataset == id_name) w.first = r.diff;
        if (r.dataset == "ood_mean") w.second = r.diff;
    }
    std::string diff = csv::format_row(kDiffColumns);
    for (const auto& [k, w] : wide) {
        diff += csv::format_row({study, std::get<0>(k), std::get<1>(k), format_double(std::get<2>(k)),
                                 w.first ? format_double(*w.first) : "", w.second ? format_double(*w.second) : ""});
    }
    files.strategy_diff = dir / "strategy_diff.csv";
    files.strategy_diff_long = dir / "strategy_diff_long.csv";
    jsonio::write_file_atomic(files.strategy_diff, diff);
    jsonio::write_file_atomic(files.strategy_diff_long, lng);
    files.notes.push_back(fmt::format("strategy diff mode: {}", to_string(options.diff_mode)));
    return files;
}

} // namespace synthmix
