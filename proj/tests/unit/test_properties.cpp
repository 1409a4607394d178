// Randomised invariants. Each generator is a plain function of a seeded
// engine; failures print the case index so a case can be replayed.

#include <doctest.h>

#include "synthmix/classifier.hpp"
#include "synthmix/corpus.hpp"
#include "synthmix/csv.hpp"
#include "synthmix/evaluator.hpp"
#include "synthmix/promptgen.hpp"
#include "synthmix/text.hpp"

#include "helpers.hpp"

#include <cmath>
#include <set>

using namespace synthmix;

namespace {

using Engine = std::mt19937_64;

size_t below(Engine& g, size_t n) { return static_cast<size_t>(g() % n); }

std::string gen_word(Engine& g) {
    static const std::vector<std::string> alphabet{"a", "b", "c", "d", "e", "k", "z", "\xC3\xA9", "\xC3\x9F", "\xE2\x82\xAC",
                                                   "'", "-", "1"};
    std::string w;
    const size_t len = 1 + below(g, 8);
    for (size_t i = 0; i < len; ++i) w += alphabet[below(g, alphabet.size())];
    return w;
}

std::string gen_text(Engine& g, size_t max_words = 12) {
    std::string t;
    const size_t n = 1 + below(g, max_words);
    for (size_t i = 0; i < n; ++i) {
        if (i) t += below(g, 5) == 0 ? ",  " : " ";
        t += gen_word(g);
    }
    return t;
}

std::string gen_field(Engine& g) {
    static const std::vector<std::string> bits{"x", ",", "\"", "\n", " ", "\r\n", "y z", ""};
    std::string s;
    const size_t n = below(g, 6);
    for (size_t i = 0; i < n; ++i) s += bits[below(g, bits.size())];
    return s;
}

Corpus gen_pool(Engine& g, const std::vector<std::string>& classes, size_t lo, size_t hi, Origin origin,
                const std::string& prefix) {
    Corpus c;
    c.classes = classes;
    for (const auto& label : classes) {
        const size_t n = lo + below(g, hi - lo + 1);
        for (size_t i = 0; i < n; ++i) {
            Example e{prefix + label + "-" + std::to_string(i), gen_text(g), label, origin, std::nullopt};
            if (origin == Origin::synthetic) e.provenance = Provenance{"theory_driven/new", "m", "fp", ""};
            c.examples.push_back(std::move(e));
        }
    }
    return c;
}

std::vector<std::string> gen_classes(Engine& g, size_t max = 7) {
    std::vector<std::string> c;
    const size_t k = 2 + below(g, max - 1);
    for (size_t i = 0; i < k; ++i) c.push_back("class" + std::to_string(i));
    return c;
}

} // namespace

TEST_CASE("macro-F1 stays in [0,1] and ignores example order") {
    Engine g(101);
    for (int i = 0; i < 200; ++i) {
        CAPTURE(i);
        auto c = testsupport::random_case(g);
        const double f = macro_f1(confusion(c.golds, c.preds, c.labels)).macro;
        CHECK(f >= 0.0);
        CHECK(f <= 1.0);
        std::vector<size_t> perm(c.golds.size());
        std::iota(perm.begin(), perm.end(), 0);
        std::shuffle(perm.begin(), perm.end(), g);
        std::vector<std::string> pg, pp;
        for (auto k : perm) {
            pg.push_back(c.golds[k]);
            pp.push_back(c.preds[k]);
        }
        CHECK(macro_f1(confusion(pg, pp, c.labels)).macro == doctest::Approx(f).epsilon(1e-12));
        auto labels = c.labels;
        std::reverse(labels.begin(), labels.end());
        CHECK(macro_f1(confusion(c.golds, c.preds, labels)).macro == doctest::Approx(f).epsilon(1e-12));
    }
}

TEST_CASE("perfect predictions score the share of labels with support") {
    Engine g(7);
    for (int i = 0; i < 100; ++i) {
        CAPTURE(i);
        const auto c = testsupport::random_case(g);
        const std::set<std::string> present(c.golds.begin(), c.golds.end());
        const double f = macro_f1(confusion(c.golds, c.golds, c.labels)).macro;
        CHECK(f == doctest::Approx(double(present.size()) / double(c.labels.size())));
    }
}

TEST_CASE("confidence interval: shift invariant, scale equivariant") {
    Engine g(55);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        CAPTURE(i);
        std::vector<double> v(2 + below(g, 20));
        for (auto& x : v) x = u(g);
        const auto a = aggregate_seeds(v);
        const double shift = u(g), scale = 0.1 + u(g);
        std::vector<double> s(v), k(v);
        for (auto& x : s) x += shift;
        for (auto& x : k) x *= scale;
        CHECK(*aggregate_seeds(s).half_width == doctest::Approx(*a.half_width).epsilon(1e-9));
        CHECK(*aggregate_seeds(k).half_width == doctest::Approx(*a.half_width * scale).epsilon(1e-9));
        CHECK(aggregate_seeds(s).mean == doctest::Approx(a.mean + shift));
    }
}

TEST_CASE("spearman is bounded and symmetric") {
    Engine g(77);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        std::vector<double> x(3 + below(g, 10)), y(x.size());
        for (size_t k = 0; k < x.size(); ++k) {
            x[k] = std::round(u(g) * 5) / 5;
            y[k] = std::round(u(g) * 5) / 5;
        }
        const double r = spearman(x, y);
        if (std::isnan(r)) continue;  // a constant vector
        CHECK(r >= -1.0 - 1e-12);
        CHECK(r <= 1.0 + 1e-12);
        CHECK(spearman(y, x) == doctest::Approx(r));
    }
}

TEST_CASE("mix plans conserve totals and grow synthetic share with the ratio") {
    Engine g(202);
    for (int i = 0; i < 150; ++i) {
        CAPTURE(i);
        const auto classes = gen_classes(g);
        const auto labeled = gen_pool(g, classes, 20, 40, Origin::labeled, "L");
        auto synthetic = gen_pool(g, classes, 20, 40, Origin::synthetic, "S");
        if (below(g, 3) == 0) {
            const auto drop = classes[below(g, classes.size())];
            std::erase_if(synthetic.examples, [&](const Example& e) { return e.label == drop; });
        }
        const size_t n = 1 + below(g, 20);
        const size_t pct = below(g, 101);
        const double r = double(pct) / 100.0;
        const auto scope = below(g, 2) ? MixScope::global : MixScope::per_class;
        MixPlan plan;
        try {
            plan = plan_mix(labeled, synthetic, n, r, scope);
        } catch (const PreconditionError&) {
            continue;  // global demand beyond capped supply
        }
        size_t syn_total = 0;
        for (const auto& cm : plan.classes) {
            CHECK(cm.labeled + cm.synthetic == n);
            if (!cm.has_supply) CHECK(cm.synthetic == 0);
            if (scope == MixScope::per_class && cm.has_supply) CHECK(cm.synthetic == (pct * n + 50) / 100);
            syn_total += cm.synthetic;
        }
        if (scope == MixScope::global) CHECK(syn_total == (pct * n * classes.size() + 50) / 100);

        const Rng rng(g());
        const auto mixed = materialize_mix(plan, labeled, synthetic, rng);
        CHECK_NOTHROW(mixed.validate());
        CHECK(mixed.size() == n * classes.size());
        const auto syn = mixed.count_by_class(Origin::synthetic);
        for (const auto& cm : plan.classes) {
            const auto it = syn.find(cm.label);
            CHECK((it == syn.end() ? 0 : it->second) == cm.synthetic);
        }
        if (scope == MixScope::per_class && pct < 100) {
            const auto more = plan_mix(labeled, synthetic, n, std::min(1.0, r + 0.1));
            for (size_t k = 0; k < plan.classes.size(); ++k) CHECK(more.classes[k].synthetic >= plan.classes[k].synthetic);
        }
    }
}

TEST_CASE("labeled portions nest across ratios for any stream") {
    Engine g(303);
    for (int i = 0; i < 60; ++i) {
        CAPTURE(i);
        const auto classes = gen_classes(g, 4);
        const auto labeled = gen_pool(g, classes, 30, 30, Origin::labeled, "L");
        const auto synthetic = gen_pool(g, classes, 30, 30, Origin::synthetic, "S");
        const Rng rng(g());
        const size_t n = 5 + below(g, 25);
        std::set<std::string> prev;
        for (double r : {1.0, 0.9, 0.7, 0.5, 0.3, 0.0}) {
            const auto ids = labeled_portion(plan_mix(labeled, synthetic, n, r), labeled, rng).ids();
            const std::set<std::string> now(ids.begin(), ids.end());
            CHECK(now.size() == ids.size());
            CHECK(std::includes(now.begin(), now.end(), prev.begin(), prev.end()));
            prev = now;
        }
    }
}

TEST_CASE("sample_indices: distinct, in range, prefix-stable") {
    Engine g(404);
    for (int i = 0; i < 200; ++i) {
        const size_t n = 1 + below(g, 300);
        const size_t k = below(g, n + 1);
        const auto seed = g();
        Rng a(seed), b(seed);
        const auto full = a.sample_indices(n, n);
        const auto part = b.sample_indices(n, k);
        CHECK(std::equal(part.begin(), part.end(), full.begin()));
        CHECK(std::set<size_t>(full.begin(), full.end()).size() == n);
        CHECK(*std::max_element(full.begin(), full.end()) == n - 1);
    }
}

TEST_CASE("vectors are unit length or empty") {
    Engine g(505);
    FeatureConfig f;
    f.dim = 1u << 12;  // small, so collisions and cancellations happen
    for (int i = 0; i < 300; ++i) {
        const auto text = gen_text(g, 30);
        const auto v = vectorize(f, nullptr, text);
        CHECK(std::is_sorted(v.index.begin(), v.index.end()));
        CHECK(std::adjacent_find(v.index.begin(), v.index.end()) == v.index.end());
        for (double x : v.value) CHECK(x != 0.0);
        if (v.nnz()) CHECK(v.squared_norm() == doctest::Approx(1.0));
        for (auto idx : v.index) CHECK(idx < f.dim);
    }
}

TEST_CASE("models survive serialisation for random corpora") {
    Engine g(606);
    for (int i = 0; i < 12; ++i) {
        CAPTURE(i);
        const auto classes = gen_classes(g, 5);
        const auto corpus = gen_pool(g, classes, 2, 12, Origin::labeled, "L");
        FeatureConfig f;
        f.dim = 1u << (8 + below(g, 6));
        f.tf = below(g, 2) ? TfWeighting::binary : TfWeighting::sublinear;
        f.use_idf = below(g, 2);
        TrainConfig t;
        t.seed = g();
        t.epochs = 1 + static_cast<int>(below(g, 4));
        t.C = 0.1 + double(below(g, 100)) / 10.0;
        const auto m = train(corpus, f, t);
        const auto bytes = serialize_model(m);
        const auto back = deserialize_model(bytes);
        CHECK(back == m);
        CHECK(serialize_model(back) == bytes);
        const auto text = gen_text(g);
        CHECK(predict(back, text).label == predict(m, text).label);
    }
}

TEST_CASE("generation replies round-trip through the serialiser") {
    Engine g(707);
    for (int i = 0; i < 200; ++i) {
        CAPTURE(i);
        std::vector<Example> ex;
        const size_t n = 1 + below(g, 8);
        for (size_t k = 0; k < n; ++k) {
            std::string t = gen_text(g);
            if (below(g, 4) == 0) t += " \"quoted\"";
            ex.push_back({"", text::squeeze_space(t), "L", Origin::synthetic, std::nullopt});
        }
        const auto back = parse_generation_response(serialize_generation(ex), n, "L");
        REQUIRE(back.examples.size() == n);
        for (size_t k = 0; k < n; ++k) CHECK(back.examples[k].text == ex[k].text);
    }
}

TEST_CASE("csv rows round-trip") {
    Engine g(808);
    for (int i = 0; i < 300; ++i) {
        std::vector<csv::Row> rows(1 + below(g, 4));
        const size_t width = 1 + below(g, 5);
        for (auto& r : rows)
            for (size_t k = 0; k < width; ++k) r.push_back(gen_field(g));
        std::string text;
        for (const auto& r : rows) text += csv::format_row(r);
        const auto back = csv::parse(text);
        // a lone empty field is indistinguishable from a blank line
        if (width == 1) continue;
        CHECK(back == rows);
    }
}

TEST_CASE("results csv round-trips random results") {
    Engine g(909);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 50; ++i) {
        std::vector<EvalResult> rs(1 + below(g, 6));
        for (auto& r : rs) {
            r.run = {"study", below(g, 2) ? "linear" : "llm_prompting", "gen", "naive", "new",
                     double(below(g, 11)) / 10.0, g() % 1000};
            r.dataset = below(g, 2) ? "test" : "forum";
            r.split = r.dataset == "test" ? "in_domain" : "ood";
            r.macro_f1 = u(g);
            r.per_class_f1 = {{"a b", u(g)}, {"c-d", u(g)}};
            r.abstentions = below(g, 4);
        }
        const auto text = results_csv(rs);
        CHECK(results_csv(parse_results_csv(text)) == text);
    }
}
