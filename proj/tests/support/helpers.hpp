#pragma once

#include "synthmix/corpus.hpp"
#include "synthmix/instruments.hpp"
#include "synthmix/json_io.hpp"
#include "synthmix/orchestrator.hpp"
#include "synthmix/promptgen.hpp"
#include "synthmix/rng.hpp"
#include "synthmix/toyworld.hpp"

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

namespace fs = std::filesystem;

inline fs::path fixtures() { return fs::path(SYNTHMIX_TEST_FIXTURES); }
inline fs::path data_dir() { return fs::path(SYNTHMIX_DATA_DIR); }
inline fs::path sexism_instrument() { return data_dir() / "instruments" / "sexism_scale.json"; }
inline fs::path topics_instrument() { return data_dir() / "instruments" / "manifesto_topics.json"; }

class TempDir {
public:
    explicit TempDir(const std::string& tag = "t") {
        static std::atomic<int> counter{0};
        path_ = fs::temp_directory_path() /
                ("synthmix-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }
    fs::path operator/(const std::string& s) const { return path_ / s; }

private:
    fs::path path_;
};

/// "[system]\n...\n[user]\n..." golden file.
inline synthmix::ChatPrompt read_golden(const std::string& name) {
    const std::string raw = synthmix::jsonio::read_file(fixtures() / "prompts" / (name + ".txt"));
    const std::string head = "[system]\n";
    const std::string sep = "\n[user]\n";
    const auto cut = raw.find(sep);
    if (raw.rfind(head, 0) != 0 || cut == std::string::npos) throw std::runtime_error("bad golden file " + name);
    synthmix::ChatPrompt p;
    p.system_message = raw.substr(head.size(), cut - head.size());
    p.user_message = raw.substr(cut + sep.size());
    return p;
}

/// Per-example recount, written without the confusion matrix.
inline double oracle_macro_f1(const std::vector<std::string>& golds, const std::vector<std::string>& preds,
                              const std::vector<std::string>& labels) {
    double total = 0.0;
    for (const auto& label : labels) {
        long tp = 0, fp = 0, fn = 0;
        for (size_t i = 0; i < golds.size(); ++i) {
            const bool g = golds[i] == label, p = preds[i] == label;
            if (g && p) ++tp;
            else if (p) ++fp;
            else if (g) ++fn;
        }
        const double prec = tp + fp ? double(tp) / double(tp + fp) : 0.0;
        const double rec = tp + fn ? double(tp) / double(tp + fn) : 0.0;
        total += prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    }
    return labels.empty() ? 0.0 : total / double(labels.size());
}

/// Random label vectors for property tests.
struct LabelCase {
    std::vector<std::string> labels, golds, preds;
};

inline LabelCase random_case(std::mt19937_64& g, size_t max_classes = 7, size_t max_n = 500) {
    LabelCase c;
    const size_t k = 1 + g() % max_classes;
    const size_t n = 1 + g() % max_n;
    for (size_t i = 0; i < k; ++i) c.labels.push_back("c" + std::to_string(i));
    // skewed predictions so that zero-support and zero-prediction classes occur
    const size_t used = 1 + g() % k;
    for (size_t i = 0; i < n; ++i) {
        c.golds.push_back(c.labels[g() % used]);
        c.preds.push_back(g() % 3 == 0 ? c.golds.back() : c.labels[g() % k]);
    }
    return c;
}

inline synthmix::Corpus toy(const fs::path& instrument, size_t per_class, std::uint64_t seed,
                            double distractor = 0.0, const std::string& prefix = "toy") {
    synthmix::ToyWorldOptions o;
    o.per_class = per_class;
    o.distractor_rate = distractor;
    o.id_prefix = prefix;
    synthmix::Rng rng(seed);
    return synthmix::toy_corpus(synthmix::load_instrument(instrument), o, rng);
}

/// Keyword corpus whose per-class vocabulary is small enough that every
/// keyword appears in training: linearly separable on held-out data too.
inline synthmix::Corpus separable(const fs::path& instrument, size_t per_class, std::uint64_t seed,
                                  const std::string& prefix) {
    synthmix::ToyWorldOptions o;
    o.per_class = per_class;
    o.max_keywords_per_class = 8;
    o.id_prefix = prefix;
    synthmix::Rng rng(seed);
    return synthmix::toy_corpus(synthmix::load_instrument(instrument), o, rng);
}

/// Writes a toy labeled file and returns a mock-backed experiment config using it.
struct ToyExperiment {
    fs::path instrument = topics_instrument();
    std::string study = "topics";
    size_t pool_per_class = 100;
    double distractor = 0.3;
    size_t per_class_n = 50;
    std::vector<double> ratios{0.0, 0.3, 0.5, 0.7, 0.9, 1.0};
    std::vector<std::uint64_t> seeds{1, 2, 3};
    std::vector<synthmix::StrategyCell> cells = synthmix::all_cells();
    std::uint64_t data_seed = 7;
    bool with_ood = false;
};

inline synthmix::ExperimentConfig make_experiment(const ToyExperiment& t, const fs::path& dir) {
    fs::create_directories(dir);
    const auto labeled = toy(t.instrument, t.pool_per_class, t.data_seed, t.distractor, "lab");
    synthmix::write_examples(dir / "labeled.jsonl", labeled.examples);
    synthmix::ExperimentConfig c;
    c.study = t.study;
    c.instrument = t.instrument;
    c.templates = data_dir() / "templates";
    c.data.train = dir / "labeled.jsonl";
    c.data.test_fraction = 0.3;
    if (t.with_ood) {
        const auto ood = toy(t.instrument, 20, t.data_seed + 1, 0.6, "ood");
        synthmix::write_examples(dir / "ood.jsonl", ood.examples);
        c.data.ood["forum"] = dir / "ood.jsonl";
    }
    c.ratios = t.ratios;
    c.seeds = t.seeds;
    c.cells = t.cells;
    c.per_class_n = t.per_class_n;
    c.output_dir = dir / "out";
    return c;
}

} // namespace testsupport
