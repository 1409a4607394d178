#include "synthmix/evaluator.hpp"

#include "synthmix/csv.hpp"
#include "synthmix/error.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <set>
#include <tuple>

namespace synthmix {

std::uint64_t ConfusionMatrix::total() const {
    std::uint64_t t = 0;
    for (const auto& row : counts)
        for (auto v : row) t += v;
    return t;
}

std::size_t ConfusionMatrix::index_of(std::string_view label) const {
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) return i;
    throw SchemaError("unknown label '" + std::string(label) + "'");
}

ConfusionMatrix confusion(std::span<const std::string> golds, std::span<const std::optional<std::string>> preds,
                          const std::vector<std::string>& labels) {
    if (golds.size() != preds.size())
        throw PreconditionError(fmt::format("{} gold labels but {} predictions", golds.size(), preds.size()));
    ConfusionMatrix cm;
    cm.labels = labels;
    cm.counts.assign(labels.size(), std::vector<std::uint64_t>(labels.size(), 0));
    for (size_t i = 0; i < golds.size(); ++i) {
        const auto g = cm.index_of(golds[i]);
        if (!preds[i]) {
            ++cm.abstentions;
            continue;
        }
        ++cm.counts[g][cm.index_of(*preds[i])];
    }
    return cm;
}

ConfusionMatrix confusion(std::span<const std::string> golds, std::span<const std::string> preds,
                          const std::vector<std::string>& labels) {
    std::vector<std::optional<std::string>> p(preds.begin(), preds.end());
    return confusion(golds, std::span<const std::optional<std::string>>(p), labels);
}

F1Report macro_f1(const ConfusionMatrix& cm) {
    const size_t k = cm.labels.size();
    F1Report r;
    r.per_class.resize(k);
    double sum = 0.0;
    for (size_t c = 0; c < k; ++c) {
        std::uint64_t tp = cm.counts[c][c], pred = 0, gold = 0;
        for (size_t j = 0; j < k; ++j) {
            pred += cm.counts[j][c];
            gold += cm.counts[c][j];
        }
        auto& s = r.per_class[c];
        s.label = cm.labels[c];
        s.support = gold;
        s.precision = pred ? static_cast<double>(tp) / static_cast<double>(pred) : 0.0;
        s.recall = gold ? static_cast<double>(tp) / static_cast<double>(gold) : 0.0;
        s.f1 = (s.precision + s.recall) > 0.0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
        sum += s.f1;
    }
    r.macro = k ? sum / static_cast<double>(k) : 0.0;
    return r;
}

double t975(std::size_t df) {
    if (df == 0) throw PreconditionError("t quantile needs at least one degree of freedom");
    boost::math::students_t dist(static_cast<double>(df));
    return boost::math::quantile(dist, 0.975);
}

AggregateResult aggregate_seeds(std::span<const double> scores) {
    if (scores.empty()) throw PreconditionError("cannot aggregate zero scores");
    AggregateResult a;
    a.n = scores.size();
    a.mean = std::accumulate(scores.begin(), scores.end(), 0.0) / static_cast<double>(a.n);
    if (a.n < 2) return a;
    double ss = 0.0;
    for (double s : scores) ss += (s - a.mean) * (s - a.mean);
    a.sd = std::sqrt(ss / static_cast<double>(a.n - 1));
    a.half_width = t975(a.n - 1) * a.sd / std::sqrt(static_cast<double>(a.n));
    return a;
}

EvalResult make_result(const RunKey& run, std::string dataset, std::string split, const ConfusionMatrix& cm) {
    const auto rep = macro_f1(cm);
    EvalResult r;
    r.run = run;
    r.dataset = std::move(dataset);
    r.split = std::move(split);
    r.macro_f1 = rep.macro;
    for (const auto& c : rep.per_class) r.per_class_f1.emplace_back(c.label, c.f1);
    r.abstentions = cm.abstentions;
    return r;
}

std::string format_double(double v) { return fmt::format("{}", v); }

namespace {

double parse_double(std::string_view s, std::string_view what) {
    double v = 0.0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw SchemaError(fmt::format("results: bad number '{}' in column {}", s, what));
    return v;
}

std::uint64_t parse_u64(std::string_view s, std::string_view what) {
    std::uint64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw SchemaError(fmt::format("results: bad integer '{}' in column {}", s, what));
    return v;
}

std::string pack_f1(const std::vector<std::pair<std::string, double>>& v) {
    std::string out;
    for (const auto& [label, f1] : v) {
        if (!out.empty()) out.push_back(';');
        out += label + "=" + format_double(f1);
    }
    return out;
}

std::vector<std::pair<std::string, double>> unpack_f1(std::string_view s) {
    std::vector<std::pair<std::string, double>> out;
    while (!s.empty()) {
        auto semi = s.find(';');
        auto item = s.substr(0, semi);
        auto eq = item.rfind('=');
        if (eq == std::string_view::npos) throw SchemaError("results: bad per_class_f1 entry");
        out.emplace_back(std::string(item.substr(0, eq)), parse_double(item.substr(eq + 1), "per_class_f1"));
        if (semi == std::string_view::npos) break;
        s.remove_prefix(semi + 1);
    }
    return out;
}

auto sort_key(const EvalResult& r) {
    return std::tie(r.run.study, r.run.classifier, r.run.generator_model, r.run.instruction, r.run.generation,
                    r.run.ratio, r.run.seed, r.split, r.dataset);
}

} // namespace

const std::vector<std::string> kResultsColumns = {"study",  "classifier", "generator_model", "instruction",
                                                  "generation", "ratio",  "seed",        "dataset",
                                                  "split",  "macro_f1",   "per_class_f1", "abstentions"};

std::string results_csv(const std::vector<EvalResult>& results) {
    std::string out = csv::format_row(kResultsColumns);
    for (const auto& r : results) {
        out += csv::format_row({r.run.study, r.run.classifier, r.run.generator_model, r.run.instruction,
                                r.run.generation, format_double(r.run.ratio), std::to_string(r.run.seed), r.dataset,
                                r.split, format_double(r.macro_f1), pack_f1(r.per_class_f1),
                                std::to_string(r.abstentions)});
    }
    return out;
}

std::vector<EvalResult> parse_results_csv(std::string_view data) {
    const auto rows = csv::parse(data);
    if (rows.empty() || rows.front() != kResultsColumns) throw SchemaError("results: unexpected header");
    std::vector<EvalResult> out;
    for (size_t i = 1; i < rows.size(); ++i) {
        const auto& row = rows[i];
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() != kResultsColumns.size())
            throw SchemaError(fmt::format("results: row {} has {} fields", i + 1, row.size()));
        EvalResult r;
        r.run.study = row[0];
        r.run.classifier = row[1];
        r.run.generator_model = row[2];
        r.run.instruction = row[3];
        r.run.generation = row[4];
        r.run.ratio = parse_double(row[5], "ratio");
        r.run.seed = parse_u64(row[6], "seed");
        r.dataset = row[7];
        r.split = row[8];
        r.macro_f1 = parse_double(row[9], "macro_f1");
        r.per_class_f1 = unpack_f1(row[10]);
        r.abstentions = parse_u64(row[11], "abstentions");
        out.push_back(std::move(r));
    }
    return out;
}

bool result_less(const EvalResult& a, const EvalResult& b) { return sort_key(a) < sort_key(b); }

std::string_view to_string(DiffMode m) { return m == DiffMode::mean ? "mean" : "best_generation"; }

DiffMode parse_diff_mode(std::string_view s) {
    if (s == "mean") return DiffMode::mean;
    if (s == "best_generation" || s == "best") return DiffMode::best_generation;
    throw ConfigError("unknown diff mode '" + std::string(s) + "'");
}

std::vector<DiffRow> strategy_diff(const std::vector<EvalResult>& results, DiffMode mode) {
    // (classifier, generator, dataset, ratio, instruction, generation) -> scores over seeds
    using Arm = std::tuple<std::string, std::string, std::string, double>;
    std::map<Arm, std::map<std::string, std::map<std::string, std::vector<double>>>> cells;
    std::map<std::string, std::string> split_of;
    for (const auto& r : results) {
        if (r.run.ratio <= 0.0) continue;
        if (r.run.instruction != "theory_driven" && r.run.instruction != "naive") continue;
        cells[{r.run.classifier, r.run.generator_model, r.dataset, r.run.ratio}][r.run.instruction][r.run.generation]
            .push_back(r.macro_f1);
        split_of[r.dataset] = r.split;
    }

    auto arm_value = [&](const std::map<std::string, std::vector<double>>& by_gen) {
        if (mode == DiffMode::mean) {
            double s = 0.0;
            size_t n = 0;
            for (const auto& [gen, v] : by_gen) {
                s += std::accumulate(v.begin(), v.end(), 0.0);
                n += v.size();
            }
            return s / static_cast<double>(n);
        }
        double best = -1.0;
        for (const auto& [gen, v] : by_gen)
            best = std::max(best, std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size()));
        return best;
    };

    std::vector<DiffRow> rows;
    // (classifier, generator, ratio) -> OOD rows for the mean line
    std::map<std::tuple<std::string, std::string, double>, std::vector<DiffRow>> ood;
    for (const auto& [arm, by_instr] : cells) {
        const auto& [classifier, generator, dataset, ratio] = arm;
        for (const char* need : {"theory_driven", "naive"}) {
            if (!by_instr.contains(need))
                throw PreconditionError(fmt::format("ratio {}: no {} results for classifier {}, generator {}, dataset {}",
                                                    format_double(ratio), need, classifier, generator, dataset));
        }
        DiffRow row{classifier, generator, dataset, ratio, arm_value(by_instr.at("theory_driven")),
                    arm_value(by_instr.at("naive")), 0.0};
        row.diff = row.theory - row.naive;
        if (split_of[dataset] == "ood") ood[{classifier, generator, ratio}].push_back(row);
        rows.push_back(std::move(row));
    }
    for (const auto& [key, items] : ood) {
        DiffRow m{std::get<0>(key), std::get<1>(key), "ood_mean", std::get<2>(key), 0.0, 0.0, 0.0};
        for (const auto& r : items) {
            m.theory += r.theory;
            m.naive += r.naive;
        }
        m.theory /= static_cast<double>(items.size());
        m.naive /= static_cast<double>(items.size());
        m.diff = m.theory - m.naive;
        rows.push_back(std::move(m));
    }

    auto rank = [&](const DiffRow& r) {
        if (r.dataset == "ood_mean") return 2;
        return split_of[r.dataset] == "ood" ? 1 : 0;
    };
    std::stable_sort(rows.begin(), rows.end(), [&](const DiffRow& a, const DiffRow& b) {
        return std::make_tuple(a.classifier, a.generator_model, rank(a), a.dataset, a.ratio) <
               std::make_tuple(b.classifier, b.generator_model, rank(b), b.dataset, b.ratio);
    });
    return rows;
}

namespace {

std::vector<double> ranks(std::span<const double> v) {
    std::vector<size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (size_t i = 0; i < idx.size();) {
        size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (size_t k = i; k <= j; ++k) r[idx[k]] = avg;
        i = j + 1;
    }
    return r;
}

} // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw PreconditionError("spearman needs two equal-length series of length >= 2");
    const auto rx = ranks(x), ry = ranks(y);
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(rx.begin(), rx.end(), 0.0) / n;
    const double my = std::accumulate(ry.begin(), ry.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    if (sxx == 0.0 || syy == 0.0) return 0.0;
    return sxy / std::sqrt(sxx * syy);
}

} // namespace synthmix
