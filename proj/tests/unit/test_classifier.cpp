#include <doctest.h>

#include "synthmix/classifier.hpp"
#include "synthmix/error.hpp"
#include "synthmix/hash.hpp"

#include "helpers.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <limits>

using namespace synthmix;

namespace {

FeatureConfig words_only(int max = 1) {
    FeatureConfig f;
    f.word = {1, max};
    f.chars = {0, 0};
    f.dim = 1u << 16;
    return f;
}

// bucket and sign of one feature key, straight from the hash
std::pair<std::uint32_t, double> bucket_of(const FeatureConfig& f, const std::string& key) {
    const auto h = hash::murmur3_32(key, kFeatureHashSeed);
    return {h & (f.dim - 1), (h >> 31) ? -1.0 : 1.0};
}

Corpus tiny_corpus() {
    Corpus c;
    c.classes = {"x", "y"};
    c.examples = {{"1", "apple apple", "x", Origin::labeled, {}},
                  {"2", "apple pie", "x", Origin::labeled, {}},
                  {"3", "banana split", "y", Origin::labeled, {}},
                  {"4", "banana bread", "y", Origin::labeled, {}}};
    return c;
}

class LabelBackend : public Backend {
public:
    std::string send(const ChatPrompt& p, const GenerationConfig&, std::string_view) override {
        if (p.user_message.find("garbled") != std::string::npos) return "I am not sure what you mean.";
        return "Category: " + first_label + "\nExplanation: echo";
    }
    std::string first_label;
};

class DeniedBackend : public Backend {
public:
    std::string send(const ChatPrompt&, const GenerationConfig&, std::string_view) override { throw AuthError("401"); }
};

} // namespace

TEST_CASE("a single-token text vectorises to one unit-magnitude bucket") {
    const auto f = words_only();
    const auto v = vectorize(f, nullptr, "AAA");
    REQUIRE(v.nnz() == 1);
    const auto [bucket, sign] = bucket_of(f, "w:aaa");
    CHECK(v.index[0] == bucket);
    CHECK(v.value[0] == doctest::Approx(sign));
    CHECK(std::fabs(v.value[0]) == 1.0);
}

TEST_CASE("hashed counts agree with a direct hash of every gram") {
    FeatureConfig f;
    f.word = {1, 2};
    f.chars = {3, 3};
    f.dim = 1u << 20;
    const auto v = hashed_counts(f, "Ab  cd");
    std::map<std::uint32_t, double> want;
    for (const char* k : {"w:ab", "w:cd", "w:ab cd", "c:ab ", "c:b c", "c: cd"}) {
        const auto [b, s] = bucket_of(f, k);
        want[b] += s;
    }
    std::erase_if(want, [](const auto& kv) { return kv.second == 0.0; });
    REQUIRE(v.nnz() == want.size());
    size_t i = 0;
    for (const auto& [b, s] : want) {
        CHECK(v.index[i] == b);
        CHECK(v.value[i] == s);
        ++i;
    }
}

TEST_CASE("sublinear tf and l2 normalisation") {
    auto f = words_only();
    f.use_idf = false;
    f.l2_normalize = false;
    const auto v = vectorize(f, nullptr, "zz zz zz zz");
    REQUIRE(v.nnz() == 1);
    CHECK(std::fabs(v.value[0]) == doctest::Approx(1.0 + std::log(4.0)));
    f.l2_normalize = true;
    const auto n = vectorize(f, nullptr, "one two three two");
    CHECK(n.squared_norm() == doctest::Approx(1.0));
    CHECK(vectorize(f, nullptr, "   ").nnz() == 0);
}

TEST_CASE("feature config validation") {
    FeatureConfig f;
    f.dim = 1000;
    CHECK_THROWS_AS(f.validate(), ConfigError);
    f = FeatureConfig{};
    f.word = {0, 0};
    f.chars = {0, 0};
    CHECK_THROWS_AS(f.validate(), ConfigError);
    f.word = {2, 1};
    CHECK_THROWS_AS(f.validate(), ConfigError);
}

TEST_CASE("idf table matches a hand count") {
    const auto model = train(tiny_corpus(), words_only(), TrainConfig{});
    CHECK(model.idf.documents == 4);
    const auto f = words_only();
    const auto apple = bucket_of(f, "w:apple").first;
    const auto pie = bucket_of(f, "w:pie").first;
    CHECK(model.idf.df[apple] == 2);
    CHECK(model.idf.df[pie] == 1);
    CHECK(model.idf.weight(apple) == doctest::Approx(std::log(5.0 / 3.0) + 1.0));
    CHECK(model.idf.weight(pie) == doctest::Approx(std::log(5.0 / 2.0) + 1.0));
}

TEST_CASE("serial and OpenMP kernels are bit-identical") {
    const auto corpus = testsupport::toy(testsupport::topics_instrument(), 30, 3, 0.3);
    std::vector<std::string> texts;
    std::vector<std::uint32_t> targets;
    for (const auto& e : corpus.examples) {
        texts.push_back(e.text);
        targets.push_back(static_cast<std::uint32_t>(
            std::find(corpus.classes.begin(), corpus.classes.end(), e.label) - corpus.classes.begin()));
    }
    FeatureConfig f;
    f.dim = 1u << 14;
    const auto cs = kernels::serial::hashed_counts_batch(f, texts);
    const auto co = kernels::omp::hashed_counts_batch(f, texts);
    CHECK(cs == co);
    const auto dfs = kernels::serial::document_frequency(f.dim, cs);
    CHECK(dfs == kernels::omp::document_frequency(f.dim, co));
    IdfTable idf{texts.size(), dfs};
    const auto xs = kernels::serial::weight_batch(f, &idf, cs);
    CHECK(xs == kernels::omp::weight_batch(f, &idf, co));

    kernels::EpochOrder order;
    Rng rng(1);
    for (int e = 0; e < 5; ++e) {
        std::vector<std::uint32_t> perm(xs.size());
        std::iota(perm.begin(), perm.end(), 0u);
        rng.shuffle(perm);
        order.push_back(perm);
    }
    const kernels::PegasosParams params{1.0 / static_cast<double>(xs.size()), 5, true};
    auto fresh = [&] {
        kernels::LinearWeights m;
        m.dim = f.dim;
        m.w.assign(corpus.classes.size(), std::vector<double>(f.dim, 0.0));
        m.bias.assign(corpus.classes.size(), 0.0);
        return m;
    };
    auto ms = fresh(), mo = fresh();
    const auto ts = kernels::serial::pegasos_ovr(ms, xs, targets, params, order);
    const auto to = kernels::omp::pegasos_ovr(mo, xs, targets, params, order);
    CHECK(ms.w == mo.w);
    CHECK(ms.bias == mo.bias);
    CHECK(ts.objective == to.objective);
    CHECK(kernels::serial::scores(ms, xs) == kernels::omp::scores(mo, xs));

    const auto a = train(corpus, f, TrainConfig{}, ExecPolicy::serial);
    const auto b = train(corpus, f, TrainConfig{}, ExecPolicy::parallel);
    CHECK(serialize_model(a) == serialize_model(b));
}

TEST_CASE("training separates a keyword corpus and is deterministic") {
    const auto inst = testsupport::topics_instrument();
    const auto train_c = testsupport::separable(inst, 40, 1, "tr");
    const auto test_c = testsupport::separable(inst, 20, 2, "te");
    const auto model = train(train_c, FeatureConfig{}, TrainConfig{});
    size_t correct = 0;
    for (const auto& e : test_c.examples) correct += predict(model, e.text).label == e.label;
    CHECK(static_cast<double>(correct) / static_cast<double>(test_c.size()) >= 0.95);
    CHECK(model.objective_trace.size() == 10);
    CHECK(model.objective_trace.back() <= model.objective_trace.front());
    CHECK(serialize_model(model) == serialize_model(train(train_c, FeatureConfig{}, TrainConfig{})));
    TrainConfig other;
    other.seed = 2;
    CHECK(serialize_model(model) != serialize_model(train(train_c, FeatureConfig{}, other)));
    CHECK(model.corpus_fingerprint == corpus_fingerprint(train_c));

    std::vector<std::string> texts;
    for (const auto& e : test_c.examples) texts.push_back(e.text);
    const auto batch = predict_batch(model, texts);
    for (size_t i = 0; i < texts.size(); ++i) CHECK(batch[i].label == predict(model, texts[i]).label);
}

TEST_CASE("two-class disjoint keywords: training texts recover their labels") {
    const auto c = testsupport::separable(testsupport::sexism_instrument(), 10, 8, "sep");
    CHECK(c.size() == 20);
    const auto model = train(c, FeatureConfig{}, TrainConfig{});
    for (const auto& e : c.examples) CHECK(predict(model, e.text).label == e.label);
}

TEST_CASE("ties go to the earlier label") {
    const std::vector<double> s{0.5, 1.0, 1.0, -2.0};
    CHECK(argmax_first(s) == 1);
    const std::vector<double> zero(3, 0.0);
    CHECK(argmax_first(zero) == 0);
    auto model = train(tiny_corpus(), words_only(), TrainConfig{});
    for (auto& row : model.weights.w) std::fill(row.begin(), row.end(), 0.0);
    std::fill(model.weights.bias.begin(), model.weights.bias.end(), 0.0);
    CHECK(predict(model, "anything").label == "x");
}

TEST_CASE("training preconditions and non-finite objective") {
    Corpus one = tiny_corpus();
    one.examples.pop_back();
    CHECK_THROWS_AS(train(one, words_only(), TrainConfig{}), PreconditionError);
    Corpus single = tiny_corpus();
    single.classes = {"x"};
    single.examples.resize(2);
    CHECK_THROWS_AS(train(single, words_only(), TrainConfig{}), PreconditionError);
    TrainConfig bad;
    bad.C = 0.0;
    CHECK_THROWS_AS(train(tiny_corpus(), words_only(), bad), ConfigError);
    bad = TrainConfig{};
    bad.epochs = 0;
    CHECK_THROWS_AS(train(tiny_corpus(), words_only(), bad), ConfigError);
    TrainConfig inf;
    inf.C = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(train(tiny_corpus(), words_only(), inf), TrainingError);
}

TEST_CASE("model file round trip is byte-identical") {
    testsupport::TempDir dir("model");
    const auto model = train(testsupport::toy(testsupport::sexism_instrument(), 20, 4), FeatureConfig{}, TrainConfig{});
    save_model(model, dir / "m.bin");
    const auto back = load_model(dir / "m.bin");
    CHECK(back == model);
    CHECK(serialize_model(back) == jsonio::read_file(dir / "m.bin"));
    CHECK(serialize_model(back).starts_with("SMXMODEL"));
    for (const auto& t : {"women belong in the kitchen", "nice weather", ""})
        CHECK(predict(back, t).scores == predict(model, t).scores);

    std::string bytes = serialize_model(model);
    CHECK_THROWS_AS(deserialize_model(bytes.substr(0, bytes.size() / 2)), SchemaError);
    bytes[0] = 'X';
    CHECK_THROWS_AS(deserialize_model(bytes), SchemaError);
    CHECK_THROWS_AS(load_model(dir / "none.bin"), IoError);
}

TEST_CASE("llm_classify: echo backend and unparseable replies") {
    const std::vector<std::string> labels{"Economy", "Social Groups"};
    auto backend = std::make_shared<LabelBackend>();
    backend->first_label = labels.front();
    Gateway gw(backend);
    std::vector<std::string> texts;
    for (int i = 0; i < 100; ++i) texts.push_back((i % 33 == 5 ? "garbled " : "fine ") + std::to_string(i));
    LlmClassifyOptions o;
    const auto r = llm_classify(gw, labels, texts, o);
    CHECK(r.abstentions == 3);
    CHECK(r.unparseable == std::vector<size_t>{5, 38, 71});
    for (size_t i = 0; i < texts.size(); ++i) {
        if (i % 33 == 5) CHECK_FALSE(r.predictions[i].has_value());
        else CHECK(r.predictions[i] == labels.front());
    }
    o.abstain_label = "Social Groups";
    const auto sub = llm_classify(gw, labels, texts, o);
    CHECK(sub.abstentions == 0);
    CHECK(sub.predictions[5] == "Social Groups");
    CHECK(sub.unparseable.size() == 3);
    o.policy = UnparseablePolicy::fail;
    CHECK_THROWS_AS(llm_classify(gw, labels, texts, o), ClassificationParseError);

    Gateway denied(std::make_shared<DeniedBackend>());
    CHECK_THROWS_AS(llm_classify(denied, labels, {"a"}, LlmClassifyOptions{}), AuthError);
}

TEST_CASE("external handoff writes splits and imports predictions") {
    testsupport::TempDir dir("handoff");
    const auto tr = tiny_corpus();
    auto te = tiny_corpus();
    for (auto& e : te.examples) e.id = "t" + e.id;
    HandoffManifest meta;
    meta.study = "s";
    meta.seed = 2;
    meta.ratio = 0.5;
    meta.strategy = "naive/new";
    meta.generator_model = "gpt";
    const auto m = external_trainer_handoff(dir.path(), tr, {{"test", &te}}, meta);
    CHECK(m.rows.at("train") == 4);
    CHECK(m.rows.at("test") == 4);
    CHECK(m.classes == tr.classes);
    CHECK(load_manifest(dir / "manifest.json") == m);
    CHECK(read_examples(dir / m.files.at("train")) == tr.examples);

    std::vector<std::optional<std::string>> preds{"x", std::nullopt, "y", "y"};
    write_predictions(dir / "p.jsonl", te, preds);
    CHECK(import_predictions(dir / "p.jsonl", te) == preds);

    jsonio::write_file_atomic(dir / "bad.jsonl", "{\"id\":\"t1\",\"pred\":\"z\"}\n");
    CHECK_THROWS_AS(import_predictions(dir / "bad.jsonl", te), SchemaError);
    jsonio::write_file_atomic(dir / "short.jsonl", "{\"id\":\"t1\",\"pred\":\"x\"}\n");
    CHECK_THROWS_AS(import_predictions(dir / "short.jsonl", te), SchemaError);
    jsonio::write_file_atomic(dir / "dup.jsonl",
                              "{\"id\":\"t1\",\"pred\":\"x\"}\n{\"id\":\"t1\",\"pred\":\"x\"}\n"
                              "{\"id\":\"t2\",\"pred\":\"x\"}\n{\"id\":\"t3\",\"pred\":\"x\"}\n{\"id\":\"t4\",\"pred\":\"x\"}\n");
    CHECK_THROWS_AS(import_predictions(dir / "dup.jsonl", te), SchemaError);
}
