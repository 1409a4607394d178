#include "synthmix/classifier.hpp"

#include "synthmix/error.hpp"
#include "synthmix/hash.hpp"
#include "synthmix/json_io.hpp"
#include "synthmix/rng.hpp"
#include "synthmix/text.hpp"

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>

namespace synthmix {

using nlohmann::json;

namespace {

constexpr std::string_view kMagic = "SMXMODEL";
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

class Reader {
public:
    explicit Reader(std::string_view data) : data_(data) {}
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        pos_ += 8;
        return v;
    }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string_view bytes(size_t n) {
        need(n);
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    bool done() const { return pos_ == data_.size(); }

private:
    void need(size_t n) const {
        if (pos_ + n > data_.size()) throw SchemaError("model file is truncated");
    }
    std::string_view data_;
    size_t pos_ = 0;
};

json features_json(const FeatureConfig& f) {
    return {{"word_ngram", {f.word.min, f.word.max}},
            {"char_ngram", {f.chars.min, f.chars.max}},
            {"dim", f.dim},
            {"tf", f.tf == TfWeighting::binary ? "binary" : "sublinear"},
            {"idf", f.use_idf},
            {"l2", f.l2_normalize}};
}

FeatureConfig features_from_json(const json& j) {
    FeatureConfig f;
    f.word = {j.at("word_ngram").at(0).get<int>(), j.at("word_ngram").at(1).get<int>()};
    f.chars = {j.at("char_ngram").at(0).get<int>(), j.at("char_ngram").at(1).get<int>()};
    f.dim = j.at("dim").get<std::uint32_t>();
    f.tf = j.at("tf").get<std::string>() == "binary" ? TfWeighting::binary : TfWeighting::sublinear;
    f.use_idf = j.at("idf").get<bool>();
    f.l2_normalize = j.at("l2").get<bool>();
    return f;
}

kernels::EpochOrder epoch_order(std::size_t n, const TrainConfig& config) {
    kernels::EpochOrder order(static_cast<size_t>(config.epochs));
    const Rng base(config.seed);
    for (int e = 0; e < config.epochs; ++e) {
        auto& perm = order[static_cast<size_t>(e)];
        perm.resize(n);
        std::iota(perm.begin(), perm.end(), 0u);
        Rng rng = base.fork("epoch/" + std::to_string(e));
        rng.shuffle(perm);
    }
    return order;
}

} // namespace

void TrainConfig::validate() const {
    if (!(C > 0.0)) throw ConfigError("C must be positive");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
}

void ModelArtifact::validate() const {
    if (labels.size() < 2) throw InvariantError("model needs at least two labels");
    if (weights.classes() != labels.size() || weights.bias.size() != labels.size())
        throw InvariantError("model weight count does not match label count");
    for (size_t c = 0; c < weights.classes(); ++c) {
        if (weights.w[c].size() != features.dim) throw InvariantError("weight vector length differs from hash dimension");
        if (!std::isfinite(weights.bias[c])) throw InvariantError("non-finite bias for class " + labels[c]);
        for (double v : weights.w[c])
            if (!std::isfinite(v)) throw InvariantError("non-finite weight for class " + labels[c]);
    }
}

bool operator==(const ModelArtifact& a, const ModelArtifact& b) {
    return a.labels == b.labels && a.features == b.features && a.train == b.train && a.idf == b.idf &&
           a.weights.dim == b.weights.dim && a.weights.w == b.weights.w && a.weights.bias == b.weights.bias &&
           a.corpus_fingerprint == b.corpus_fingerprint && a.objective_trace == b.objective_trace;
}

std::string corpus_fingerprint(const Corpus& corpus) {
    std::string buf;
    for (const auto& e : corpus.examples) {
        buf += e.id;
        buf.push_back('\x1f');
        buf += e.label;
        buf.push_back('\x1f');
        buf += e.text;
        buf.push_back('\x1e');
    }
    return hash::sha256_hex(buf);
}

ModelArtifact train(const Corpus& corpus, const FeatureConfig& features, const TrainConfig& config, ExecPolicy policy) {
    config.validate();
    features.validate();
    if (corpus.classes.size() < 2) throw PreconditionError("training needs at least two classes");
    const auto counts = corpus.count_by_class();
    for (const auto& label : corpus.classes) {
        const auto n = counts.at(label);
        if (n < 2) throw PreconditionError(fmt::format("class {} has {} training examples; need at least 2", label, n));
    }

    std::map<std::string, std::uint32_t> class_index;
    for (size_t c = 0; c < corpus.classes.size(); ++c) class_index[corpus.classes[c]] = static_cast<std::uint32_t>(c);

    std::vector<std::string> texts;
    std::vector<std::uint32_t> targets;
    texts.reserve(corpus.size());
    targets.reserve(corpus.size());
    for (const auto& e : corpus.examples) {
        texts.push_back(e.text);
        targets.push_back(class_index.at(e.label));
    }

    const bool par = policy == ExecPolicy::parallel;
    auto raw = par ? kernels::omp::hashed_counts_batch(features, texts) : kernels::serial::hashed_counts_batch(features, texts);

    ModelArtifact model;
    model.labels = corpus.classes;
    model.features = features;
    model.train = config;
    model.corpus_fingerprint = corpus_fingerprint(corpus);
    if (features.use_idf) {
        model.idf.documents = raw.size();
        model.idf.df = par ? kernels::omp::document_frequency(features.dim, raw)
                           : kernels::serial::document_frequency(features.dim, raw);
    }
    const IdfTable* idf = features.use_idf ? &model.idf : nullptr;
    auto xs = par ? kernels::omp::weight_batch(features, idf, std::move(raw))
                  : kernels::serial::weight_batch(features, idf, std::move(raw));

    model.weights.dim = features.dim;
    model.weights.w.assign(model.labels.size(), std::vector<double>(features.dim, 0.0));
    model.weights.bias.assign(model.labels.size(), 0.0);

    kernels::PegasosParams params;
    params.lambda = 1.0 / (config.C * static_cast<double>(corpus.size()));
    params.epochs = config.epochs;
    params.project = config.project;
    const auto order = epoch_order(corpus.size(), config);

    const auto trace = par ? kernels::omp::pegasos_ovr(model.weights, xs, targets, params, order)
                           : kernels::serial::pegasos_ovr(model.weights, xs, targets, params, order);

    model.objective_trace.assign(static_cast<size_t>(config.epochs), 0.0);
    for (int e = 0; e < config.epochs; ++e) {
        double sum = 0.0;
        for (const auto& per_class : trace.objective) sum += per_class[static_cast<size_t>(e)];
        const double mean = sum / static_cast<double>(trace.objective.size());
        if (!std::isfinite(mean)) throw TrainingError(fmt::format("training objective is not finite at epoch {}", e + 1));
        model.objective_trace[static_cast<size_t>(e)] = mean;
    }
    model.validate();
    return model;
}

std::size_t argmax_first(std::span<const double> scores) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.size(); ++c)
        if (scores[c] > scores[best]) best = c;
    return best;
}

Prediction predict(const ModelArtifact& model, std::string_view text) {
    const SparseVector x = vectorize(model.features, model.features.use_idf ? &model.idf : nullptr, text);
    Prediction p;
    p.scores.resize(model.labels.size());
    for (size_t c = 0; c < model.labels.size(); ++c) p.scores[c] = kernels::dot(model.weights.w[c], x) + model.weights.bias[c];
    p.label = model.labels[argmax_first(p.scores)];
    return p;
}

std::vector<Prediction> predict_batch(const ModelArtifact& model, const std::vector<std::string>& texts, ExecPolicy policy) {
    const bool par = policy == ExecPolicy::parallel;
    const IdfTable* idf = model.features.use_idf ? &model.idf : nullptr;
    auto raw = par ? kernels::omp::hashed_counts_batch(model.features, texts)
                   : kernels::serial::hashed_counts_batch(model.features, texts);
    auto xs = par ? kernels::omp::weight_batch(model.features, idf, std::move(raw))
                  : kernels::serial::weight_batch(model.features, idf, std::move(raw));
    const auto s = par ? kernels::omp::scores(model.weights, xs) : kernels::serial::scores(model.weights, xs);
    const size_t k = model.labels.size();
    std::vector<Prediction> out(texts.size());
    for (size_t i = 0; i < texts.size(); ++i) {
        out[i].scores.assign(s.begin() + static_cast<std::ptrdiff_t>(i * k), s.begin() + static_cast<std::ptrdiff_t>((i + 1) * k));
        out[i].label = model.labels[argmax_first(out[i].scores)];
    }
    return out;
}

std::string serialize_model(const ModelArtifact& model) {
    json header;
    header["labels"] = model.labels;
    header["features"] = features_json(model.features);
    header["train"] = {{"C", model.train.C}, {"epochs", model.train.epochs}, {"seed", model.train.seed},
                       {"project", model.train.project}};
    header["corpus_fingerprint"] = model.corpus_fingerprint;
    header["objective_trace"] = model.objective_trace;
    header["idf_documents"] = model.idf.documents;
    const std::string h = header.dump();

    std::string out(kMagic);
    put_u32(out, kFormatVersion);
    put_u64(out, h.size());
    out += h;
    for (size_t c = 0; c < model.weights.classes(); ++c) {
        put_f64(out, model.weights.bias[c]);
        const auto& w = model.weights.w[c];
        std::uint32_t nnz = 0;
        for (double v : w) nnz += v != 0.0;
        put_u32(out, nnz);
        for (std::uint32_t i = 0; i < w.size(); ++i) {
            if (w[i] == 0.0) continue;
            put_u32(out, i);
            put_f64(out, w[i]);
        }
    }
    std::uint32_t df_nnz = 0;
    for (auto d : model.idf.df) df_nnz += d != 0;
    put_u32(out, model.idf.df.empty() ? 0u : 1u);
    put_u32(out, df_nnz);
    for (std::uint32_t i = 0; i < model.idf.df.size(); ++i) {
        if (model.idf.df[i] == 0) continue;
        put_u32(out, i);
        put_u32(out, model.idf.df[i]);
    }
    return out;
}

ModelArtifact deserialize_model(std::string_view bytes) {
    Reader r(bytes);
    if (r.bytes(kMagic.size()) != kMagic) throw SchemaError("not a model file (bad magic)");
    const auto version = r.u32();
    if (version != kFormatVersion) throw SchemaError(fmt::format("unsupported model format version {}", version));
    const auto hlen = r.u64();
    json header = jsonio::parse_or_throw(r.bytes(hlen), "model header");

    ModelArtifact m;
    try {
        m.labels = header.at("labels").get<std::vector<std::string>>();
        m.features = features_from_json(header.at("features"));
        const auto& t = header.at("train");
        m.train.C = t.at("C").get<double>();
        m.train.epochs = t.at("epochs").get<int>();
        m.train.seed = t.at("seed").get<std::uint64_t>();
        m.train.project = t.at("project").get<bool>();
        m.corpus_fingerprint = header.at("corpus_fingerprint").get<std::string>();
        m.objective_trace = header.at("objective_trace").get<std::vector<double>>();
        m.idf.documents = header.at("idf_documents").get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("model header: ") + e.what());
    }
    m.features.validate();
    m.weights.dim = m.features.dim;
    m.weights.w.assign(m.labels.size(), std::vector<double>(m.features.dim, 0.0));
    m.weights.bias.assign(m.labels.size(), 0.0);
    for (size_t c = 0; c < m.labels.size(); ++c) {
        m.weights.bias[c] = r.f64();
        const auto nnz = r.u32();
        for (std::uint32_t k = 0; k < nnz; ++k) {
            const auto i = r.u32();
            if (i >= m.features.dim) throw SchemaError("model weight index out of range");
            m.weights.w[c][i] = r.f64();
        }
    }
    if (r.u32() != 0) {
        m.idf.df.assign(m.features.dim, 0);
        const auto nnz = r.u32();
        for (std::uint32_t k = 0; k < nnz; ++k) {
            const auto i = r.u32();
            if (i >= m.features.dim) throw SchemaError("idf index out of range");
            m.idf.df[i] = r.u32();
        }
    } else {
        r.u32();
    }
    if (!r.done()) throw SchemaError("trailing bytes in model file");
    m.validate();
    return m;
}

void save_model(const ModelArtifact& model, const std::filesystem::path& path) {
    jsonio::write_file_atomic(path, serialize_model(model));
}

ModelArtifact load_model(const std::filesystem::path& path) {
    return deserialize_model(jsonio::read_file(path));
}

LlmClassification llm_classify(Gateway& gateway, const std::vector<std::string>& labels,
                               const std::vector<std::string>& texts, const LlmClassifyOptions& options) {
    LlmClassification out;
    out.predictions.reserve(texts.size());
    for (size_t i = 0; i < texts.size(); ++i) {
        const ChatPrompt prompt = build_classification_prompt(labels, texts[i]);
        CompletionResult reply;
        try {
            reply = gateway.complete(prompt, options.generation, options.nonce_prefix + "/" + std::to_string(i));
        } catch (const AuthError& e) {
            throw AuthError(fmt::format("text {}: {}", i, e.what()));
        } catch (const Error& e) {
            throw BackendError(fmt::format("text {}: {}", i, e.what()));
        }
        try {
            out.predictions.emplace_back(parse_classification_response(reply.raw_text, labels));
        } catch (const ClassificationParseError& e) {
            if (options.policy == UnparseablePolicy::fail)
                throw ClassificationParseError(fmt::format("text {}: {}", i, e.what()));
            out.unparseable.push_back(i);
            if (options.abstain_label.empty()) {
                out.predictions.emplace_back(std::nullopt);
                ++out.abstentions;
            } else {
                out.predictions.emplace_back(options.abstain_label);
            }
        }
    }
    return out;
}

HandoffManifest external_trainer_handoff(const std::filesystem::path& dir, const Corpus& train_corpus,
                                         const std::map<std::string, const Corpus*>& eval_splits,
                                         HandoffManifest metadata) {
    std::filesystem::create_directories(dir);
    metadata.classes = train_corpus.classes;
    metadata.files.clear();
    metadata.rows.clear();
    auto emit = [&](const std::string& split, const Corpus& c) {
        const std::string file = split + ".jsonl";
        write_examples(dir / file, c.examples);
        metadata.files[split] = file;
        metadata.rows[split] = c.size();
    };
    emit("train", train_corpus);
    for (const auto& [split, corpus] : eval_splits) emit(split, *corpus);

    json m;
    m["study"] = metadata.study;
    m["seed"] = metadata.seed;
    m["ratio"] = metadata.ratio;
    m["strategy"] = metadata.strategy;
    m["generator_model"] = metadata.generator_model;
    m["classes"] = metadata.classes;
    m["files"] = metadata.files;
    m["rows"] = metadata.rows;
    jsonio::write_file_atomic(dir / "manifest.json", m.dump(2) + "\n");
    return metadata;
}

HandoffManifest load_manifest(const std::filesystem::path& path) {
    json m = jsonio::parse_or_throw(jsonio::read_file(path), "manifest");
    HandoffManifest out;
    try {
        out.study = m.at("study").get<std::string>();
        out.seed = m.at("seed").get<std::uint64_t>();
        out.ratio = m.at("ratio").get<double>();
        out.strategy = m.at("strategy").get<std::string>();
        out.generator_model = m.at("generator_model").get<std::string>();
        out.classes = m.at("classes").get<std::vector<std::string>>();
        out.files = m.at("files").get<std::map<std::string, std::string>>();
        out.rows = m.at("rows").get<std::map<std::string, std::size_t>>();
    } catch (const json::exception& e) {
        throw SchemaError(std::string("manifest: ") + e.what());
    }
    return out;
}

std::vector<std::optional<std::string>> import_predictions(const std::filesystem::path& path, const Corpus& corpus) {
    const std::set<std::string> labels(corpus.classes.begin(), corpus.classes.end());
    std::map<std::string, std::optional<std::string>> by_id;
    const std::string data = jsonio::read_file(path);
    size_t start = 0;
    size_t line_no = 0;
    while (start < data.size()) {
        auto end = data.find('\n', start);
        if (end == std::string::npos) end = data.size();
        std::string_view line(data.data() + start, end - start);
        start = end + 1;
        ++line_no;
        if (text::is_blank(line)) continue;
        json j = json::parse(line, nullptr, false);
        const std::string where = path.filename().string() + " line " + std::to_string(line_no);
        if (j.is_discarded() || !j.is_object()) throw SchemaError(where + ": not a JSON object");
        const auto& id = jsonio::require_string(j, "id", where);
        auto p = j.find("pred");
        if (p == j.end()) throw SchemaError(where + ": missing field 'pred'");
        std::optional<std::string> pred;
        if (!p->is_null()) {
            if (!p->is_string()) throw SchemaError(where + ": 'pred' must be a string or null");
            pred = p->get<std::string>();
            if (!labels.contains(*pred)) throw SchemaError(where + ": unknown label '" + *pred + "'");
        }
        if (!by_id.emplace(id, pred).second) throw SchemaError(where + ": duplicate id '" + id + "'");
    }
    std::vector<std::optional<std::string>> out;
    out.reserve(corpus.size());
    for (const auto& e : corpus.examples) {
        auto it = by_id.find(e.id);
        if (it == by_id.end()) throw SchemaError("predictions lack id '" + e.id + "'");
        out.push_back(it->second);
    }
    if (by_id.size() != corpus.size()) throw SchemaError("predictions hold ids that are not in the corpus");
    return out;
}

void write_predictions(const std::filesystem::path& path, const Corpus& corpus,
                       const std::vector<std::optional<std::string>>& preds) {
    if (preds.size() != corpus.size()) throw PreconditionError("prediction count differs from corpus size");
    std::string out;
    for (size_t i = 0; i < preds.size(); ++i) {
        json j;
        j["id"] = corpus.examples[i].id;
        j["pred"] = preds[i] ? json(*preds[i]) : json(nullptr);
        out += j.dump();
        out.push_back('\n');
    }
    jsonio::write_file_atomic(path, out);
}

} // namespace synthmix
