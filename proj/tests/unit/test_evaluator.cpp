#include <doctest.h>

#include "synthmix/error.hpp"
#include "synthmix/evaluator.hpp"

#include "helpers.hpp"

#include <cmath>

using namespace synthmix;

namespace {

EvalResult res(const std::string& instr, const std::string& gen, double ratio, std::uint64_t seed, double f1,
               const std::string& dataset = "test", const std::string& classifier = "linear") {
    EvalResult r;
    r.run = {"s", classifier, "gpt", instr, gen, ratio, seed};
    r.dataset = dataset;
    r.split = dataset == "test" ? "in_domain" : "ood";
    r.macro_f1 = f1;
    r.per_class_f1 = {{"a", f1}, {"b", f1}};
    return r;
}

} // namespace

TEST_CASE("hand case [[2,1],[1,1]]") {
    const std::vector<std::string> gold{"a", "a", "a", "b", "b"};
    const std::vector<std::string> pred{"a", "a", "b", "a", "b"};
    const auto cm = confusion(gold, pred, {"a", "b"});
    CHECK(cm.counts == std::vector<std::vector<std::uint64_t>>{{2, 1}, {1, 1}});
    CHECK(cm.total() == 5);
    const auto rep = macro_f1(cm);
    // a: p=2/3 r=2/3 f=2/3; b: p=1/2 r=1/2 f=1/2
    CHECK(rep.macro == doctest::Approx(7.0 / 12.0).epsilon(1e-12));
    CHECK(std::fabs(rep.macro - 0.583333) <= 1e-6);
    CHECK(rep.per_class[0].support == 3);
}

TEST_CASE("zero denominators and abstentions") {
    const std::vector<std::string> gold{"a", "a", "b"};
    const std::vector<std::optional<std::string>> pred{"a", std::nullopt, "a"};
    const auto cm = confusion(gold, pred, {"a", "b", "c"});
    CHECK(cm.abstentions == 1);
    CHECK(cm.total() == 2);
    const auto rep = macro_f1(cm);
    // a: tp=1 fp=1 fn=0 -> 2/3; b: 0; c: absent -> 0
    CHECK(rep.per_class[1].f1 == 0.0);
    CHECK(rep.per_class[2].f1 == 0.0);
    CHECK(rep.macro == doctest::Approx((2.0 / 3.0) / 3.0));
    CHECK_THROWS_AS(confusion(gold, std::vector<std::string>{"a"}, {"a", "b"}), PreconditionError);
    CHECK_THROWS_AS(confusion(gold, std::vector<std::string>{"a", "z", "a"}, {"a", "b"}), SchemaError);
}

TEST_CASE("macro_f1 agrees with a per-example recount") {
    std::mt19937_64 g(17);
    for (int i = 0; i < 300; ++i) {
        const auto c = testsupport::random_case(g);
        const auto got = macro_f1(confusion(c.golds, c.preds, c.labels)).macro;
        CHECK(std::fabs(got - testsupport::oracle_macro_f1(c.golds, c.preds, c.labels)) <= 1e-12);
    }
}

TEST_CASE("student t quantiles") {
    CHECK(t975(2) == doctest::Approx(4.302653).epsilon(1e-6));
    CHECK(t975(11) == doctest::Approx(2.200985).epsilon(1e-6));
    CHECK(t975(47) == doctest::Approx(2.011741).epsilon(1e-6));
    CHECK_THROWS(t975(0));
}

TEST_CASE("seed aggregation") {
    const std::vector<double> s{0.5, 0.6, 0.7};
    const auto a = aggregate_seeds(s);
    CHECK(a.mean == doctest::Approx(0.6));
    CHECK(a.sd == doctest::Approx(0.1));
    REQUIRE(a.half_width.has_value());
    CHECK(std::fabs(*a.half_width - 0.24841) <= 1e-4);
    CHECK(a.n == 3);
    const std::vector<double> one{0.4};
    CHECK_FALSE(aggregate_seeds(one).half_width.has_value());
    CHECK_THROWS_AS(aggregate_seeds(std::vector<double>{}), PreconditionError);
    const std::vector<double> flat(5, 0.3);
    CHECK(*aggregate_seeds(flat).half_width == 0.0);
}

TEST_CASE("half-width shrinks like sd * t / sqrt(n)") {
    std::mt19937_64 g(3);
    std::normal_distribution<double> d(0.7, 0.05);
    for (size_t n : {2, 5, 12, 48}) {
        std::vector<double> v(n);
        for (auto& x : v) x = d(g);
        const auto a = aggregate_seeds(v);
        CHECK(*a.half_width == doctest::Approx(t975(n - 1) * a.sd / std::sqrt(double(n))));
    }
}

TEST_CASE("results csv round trip and sort order") {
    std::vector<EvalResult> rs{res("naive", "new", 0.5, 2, 0.123456789012345), res("theory_driven", "alternation", 1.0, 1, 0.9),
                               res("none", "none", 0.0, 1, 1.0 / 3.0, "forum")};
    rs[0].abstentions = 4;
    const auto text = results_csv(rs);
    CHECK(text.starts_with("study,classifier,generator_model,instruction,generation,ratio,seed,dataset,split,macro_f1,"
                           "per_class_f1,abstentions\n"));
    const auto back = parse_results_csv(text);
    REQUIRE(back.size() == rs.size());
    for (size_t i = 0; i < rs.size(); ++i) {
        CHECK(back[i].run == rs[i].run);
        CHECK(back[i].macro_f1 == rs[i].macro_f1);
        CHECK(back[i].per_class_f1 == rs[i].per_class_f1);
        CHECK(back[i].abstentions == rs[i].abstentions);
        CHECK(back[i].split == rs[i].split);
    }
    CHECK(results_csv(back) == text);
    CHECK(format_double(0.1) == "0.1");
    CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
    CHECK_THROWS_AS(parse_results_csv("a,b\n1,2\n"), SchemaError);

    auto sorted = rs;
    std::sort(sorted.begin(), sorted.end(), result_less);
    auto shuffled = sorted;
    std::reverse(shuffled.begin(), shuffled.end());
    std::sort(shuffled.begin(), shuffled.end(), result_less);
    CHECK(results_csv(shuffled) == results_csv(sorted));
}

TEST_CASE("strategy_diff: mean and best-generation modes") {
    std::vector<EvalResult> rs;
    for (std::uint64_t seed : {1, 2}) {
        rs.push_back(res("theory_driven", "new", 0.5, seed, 0.8));
        rs.push_back(res("theory_driven", "alternation", 0.5, seed, 0.6));
        rs.push_back(res("naive", "new", 0.5, seed, 0.5));
        rs.push_back(res("naive", "alternation", 0.5, seed, 0.7));
        rs.push_back(res("theory_driven", "new", 0.5, seed, 0.6, "forum"));
        rs.push_back(res("theory_driven", "alternation", 0.5, seed, 0.6, "forum"));
        rs.push_back(res("naive", "new", 0.5, seed, 0.4, "forum"));
        rs.push_back(res("naive", "alternation", 0.5, seed, 0.4, "forum"));
    }
    rs.push_back(res("none", "none", 0.0, 1, 0.99));
    rs.push_back(res("theory_driven", "new", 0.5, 1, 0.1, "test", "linear-labeled-subset"));
    rs.push_back(res("naive", "new", 0.5, 1, 0.1, "test", "linear-labeled-subset"));

    const auto mean = strategy_diff(rs);
    std::vector<DiffRow> linear;
    for (const auto& r : mean)
        if (r.classifier == "linear") linear.push_back(r);
    REQUIRE(linear.size() == 3);
    CHECK(linear[0].dataset == "test");
    CHECK(linear[0].diff == doctest::Approx(0.1));
    CHECK(linear[1].dataset == "forum");
    CHECK(linear[1].diff == doctest::Approx(0.2));
    CHECK(linear[2].dataset == "ood_mean");
    CHECK(linear[2].diff == doctest::Approx(0.2));

    const auto best = strategy_diff(rs, DiffMode::best_generation);
    CHECK(best[0].classifier == "linear");
    CHECK(best[0].theory == doctest::Approx(0.8));
    CHECK(best[0].naive == doctest::Approx(0.7));
    CHECK(best[0].diff == doctest::Approx(0.1));
    CHECK(parse_diff_mode("best_generation") == DiffMode::best_generation);
    CHECK_THROWS_AS(parse_diff_mode("max"), ConfigError);
}

TEST_CASE("strategy_diff names the ratio that lacks an arm") {
    std::vector<EvalResult> rs{res("theory_driven", "new", 0.3, 1, 0.7), res("naive", "new", 0.3, 1, 0.6),
                               res("theory_driven", "new", 0.9, 1, 0.7)};
    CHECK_THROWS_WITH_AS(strategy_diff(rs), doctest::Contains("ratio 0.9"), PreconditionError);
}

TEST_CASE("spearman") {
    const std::vector<double> x{1, 2, 3, 4, 5};
    const std::vector<double> up{0.1, 0.2, 0.25, 0.4, 0.9};
    const std::vector<double> down{5, 4, 3, 2, 1};
    CHECK(spearman(x, up) == doctest::Approx(1.0));
    CHECK(spearman(x, down) == doctest::Approx(-1.0));
    // ties get average ranks: ranks of y are 1, 2.5, 2.5, 4, 5
    const std::vector<double> tied{0.1, 0.3, 0.3, 0.5, 0.6};
    const double mx = 3, my = 3;
    const std::vector<double> rx{1, 2, 3, 4, 5}, ry{1, 2.5, 2.5, 4, 5};
    double sxy = 0, sxx = 0, syy = 0;
    for (int i = 0; i < 5; ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    CHECK(spearman(x, tied) == doctest::Approx(sxy / std::sqrt(sxx * syy)));
}
