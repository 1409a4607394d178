// Serial reference vs OpenMP kernels on a keyword corpus. Set OMP_NUM_THREADS to vary the team.

#include "synthmix/kernels.hpp"
#include "synthmix/instruments.hpp"
#include "synthmix/rng.hpp"
#include "synthmix/toyworld.hpp"

#include <benchmark/benchmark.h>

#include <algorithm>
#include <map>

using namespace synthmix;

namespace {

struct Workload {
    FeatureConfig features;
    std::vector<std::string> texts;
    std::vector<std::uint32_t> targets;
    std::vector<SparseVector> xs;
    std::uint32_t classes = 0;
    kernels::EpochOrder order;
};

const Workload& workload(std::size_t per_class) {
    static std::map<std::size_t, Workload> cache;
    auto [it, fresh] = cache.try_emplace(per_class);
    Workload& w = it->second;
    if (!fresh) return w;
    ToyWorldOptions o;
    o.per_class = per_class;
    o.distractor_rate = 0.3;
    Rng rng(5);
    const auto corpus = toy_corpus(load_instrument(std::string(SYNTHMIX_DATA_DIR) + "/instruments/manifesto_topics.json"), o, rng);
    w.classes = static_cast<std::uint32_t>(corpus.classes.size());
    for (const auto& e : corpus.examples) {
        w.texts.push_back(e.text);
        w.targets.push_back(static_cast<std::uint32_t>(
            std::find(corpus.classes.begin(), corpus.classes.end(), e.label) - corpus.classes.begin()));
    }
    w.xs = kernels::serial::weight_batch(w.features, nullptr, kernels::serial::hashed_counts_batch(w.features, w.texts));
    Rng order_rng(9);
    for (int e = 0; e < 10; ++e) {
        std::vector<std::uint32_t> idx(w.xs.size());
        for (std::uint32_t i = 0; i < idx.size(); ++i) idx[i] = i;
        for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[order_rng.uniform_index(i)]);
        w.order.push_back(std::move(idx));
    }
    return w;
}

kernels::LinearWeights fresh_model(const Workload& w) {
    kernels::LinearWeights m;
    m.dim = w.features.dim;
    m.w.assign(w.classes, std::vector<double>(w.features.dim, 0.0));
    m.bias.assign(w.classes, 0.0);
    return m;
}

template <auto Fn>
void hashed_counts(benchmark::State& state) {
    const auto& w = workload(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(Fn(w.features, w.texts));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.texts.size()));
}

template <auto Fn>
void document_frequency(benchmark::State& state) {
    const auto& w = workload(static_cast<std::size_t>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(Fn(w.features.dim, w.xs));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.xs.size()));
}

template <auto Fn>
void scores(benchmark::State& state) {
    const auto& w = workload(static_cast<std::size_t>(state.range(0)));
    auto model = fresh_model(w);
    for (auto& row : model.w)
        for (std::size_t i = 0; i < row.size(); i += 7) row[i] = 0.001 * static_cast<double>(i % 13);
    for (auto _ : state) benchmark::DoNotOptimize(Fn(model, w.xs));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.xs.size()));
}

template <auto Fn>
void pegasos(benchmark::State& state) {
    const auto& w = workload(static_cast<std::size_t>(state.range(0)));
    kernels::PegasosParams p;
    p.lambda = 1.0 / static_cast<double>(w.xs.size());
    for (auto _ : state) {
        auto model = fresh_model(w);
        benchmark::DoNotOptimize(Fn(model, w.xs, w.targets, p, w.order));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(w.xs.size()) * p.epochs);
}

} // namespace

#define SIZES Arg(50)->Arg(400)->Unit(benchmark::kMillisecond)
BENCHMARK(hashed_counts<kernels::serial::hashed_counts_batch>)->Name("hashed_counts/serial")->SIZES;
BENCHMARK(hashed_counts<kernels::omp::hashed_counts_batch>)->Name("hashed_counts/omp")->SIZES;
BENCHMARK(document_frequency<kernels::serial::document_frequency>)->Name("document_frequency/serial")->SIZES;
BENCHMARK(document_frequency<kernels::omp::document_frequency>)->Name("document_frequency/omp")->SIZES;
BENCHMARK(scores<kernels::serial::scores>)->Name("scores/serial")->SIZES;
BENCHMARK(scores<kernels::omp::scores>)->Name("scores/omp")->SIZES;
BENCHMARK(pegasos<kernels::serial::pegasos_ovr>)->Name("pegasos_ovr/serial")->SIZES;
BENCHMARK(pegasos<kernels::omp::pegasos_ovr>)->Name("pegasos_ovr/omp")->SIZES;

BENCHMARK_MAIN();
