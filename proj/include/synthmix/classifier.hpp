#pragma once

#include "synthmix/corpus.hpp"
#include "synthmix/features.hpp"
#include "synthmix/kernels.hpp"
#include "synthmix/llm_gateway.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace synthmix {

enum class ExecPolicy { serial, parallel };

struct TrainConfig {
    /// Maps to lambda = 1 / (C * N).
    double C = 1.0;
    int epochs = 10;
    std::uint64_t seed = 1;
    bool project = true;

    void validate() const;
    friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// One-vs-rest linear model over hashed tf-idf features.
struct ModelArtifact {
    std::vector<std::string> labels;
    FeatureConfig features;
    TrainConfig train;
    IdfTable idf;
    kernels::LinearWeights weights;
    std::string corpus_fingerprint;
    /// Mean over classes of the regularised hinge objective after each epoch.
    std::vector<double> objective_trace;

    void validate() const;
    friend bool operator==(const ModelArtifact& a, const ModelArtifact& b);
};

/// Order-sensitive hash of (id, label, text) triples.
std::string corpus_fingerprint(const Corpus& corpus);

/// Pegasos primal subgradient descent with hinge loss, one binary problem per
/// class. Throws PreconditionError for fewer than 2 classes or a class with
/// fewer than 2 examples, TrainingError when the objective turns non-finite.
ModelArtifact train(const Corpus& corpus, const FeatureConfig& features, const TrainConfig& config,
                    ExecPolicy policy = ExecPolicy::parallel);

struct Prediction {
    std::string label;
    std::vector<double> scores; // in model.labels order
};

/// argmax_c (w_c . x + b_c); ties go to the earlier label.
Prediction predict(const ModelArtifact& model, std::string_view text);
std::vector<Prediction> predict_batch(const ModelArtifact& model, const std::vector<std::string>& texts,
                                      ExecPolicy policy = ExecPolicy::parallel);
/// Index of the first maximal score.
std::size_t argmax_first(std::span<const double> scores);

/// Versioned binary file: magic, version, JSON header with configs, then
/// sparse weights, biases and the idf table.
void save_model(const ModelArtifact& model, const std::filesystem::path& path);
ModelArtifact load_model(const std::filesystem::path& path);
std::string serialize_model(const ModelArtifact& model);
ModelArtifact deserialize_model(std::string_view bytes);

// ---- direct LLM labelling ---------------------------------------------------

enum class UnparseablePolicy { fail, abstain };

inline GenerationConfig default_classify_config() {
    GenerationConfig g;
    g.model_name = "gpt-4o";
    g.temperature = 1.0;
    return g;
}

struct LlmClassifyOptions {
    GenerationConfig generation = default_classify_config();
    UnparseablePolicy policy = UnparseablePolicy::abstain;
    /// With abstain: the label substituted for unparseable replies. Empty
    /// records an abstention instead.
    std::string abstain_label;
    /// Prefix for per-text cache nonces.
    std::string nonce_prefix = "classify";
};

struct LlmClassification {
    std::vector<std::optional<std::string>> predictions;
    std::vector<std::size_t> unparseable;
    std::size_t abstentions = 0;
};

LlmClassification llm_classify(Gateway& gateway, const std::vector<std::string>& labels,
                               const std::vector<std::string>& texts, const LlmClassifyOptions& options);

// ---- external trainer handoff -----------------------------------------------

struct HandoffManifest {
    std::string study;
    std::uint64_t seed = 0;
    double ratio = 0.0;
    std::string strategy;
    std::string generator_model;
    std::vector<std::string> classes;
    std::map<std::string, std::string> files;   // split name -> file name
    std::map<std::string, std::size_t> rows;    // split name -> row count

    friend bool operator==(const HandoffManifest&, const HandoffManifest&) = default;
};

/// Writes <split>.jsonl for each corpus plus manifest.json into `dir`.
HandoffManifest external_trainer_handoff(const std::filesystem::path& dir, const Corpus& train_corpus,
                                         const std::map<std::string, const Corpus*>& eval_splits,
                                         HandoffManifest metadata);
HandoffManifest load_manifest(const std::filesystem::path& path);

/// Reads {"id","pred"} lines and aligns them with the corpus. Unknown labels
/// and missing ids raise SchemaError; a null pred is an abstention.
std::vector<std::optional<std::string>> import_predictions(const std::filesystem::path& path, const Corpus& corpus);
void write_predictions(const std::filesystem::path& path, const Corpus& corpus,
                       const std::vector<std::optional<std::string>>& preds);

} // namespace synthmix
