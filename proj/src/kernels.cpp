#include "synthmix/kernels.hpp"

#include <algorithm>
#include <cmath>

#include <omp.h>

namespace synthmix::kernels {

double dot(const std::vector<double>& w, const SparseVector& x) {
    double s = 0.0;
    for (size_t k = 0; k < x.nnz(); ++k) s += w[x.index[k]] * x.value[k];
    return s;
}

std::vector<double> pegasos_binary(std::vector<double>& w, double& bias, std::span<const SparseVector> xs,
                                   std::span<const std::uint32_t> targets, std::uint32_t cls,
                                   const PegasosParams& params, const EpochOrder& order) {
    const double lambda = params.lambda;
    const double radius = 1.0 / std::sqrt(lambda);

    // w_true = scale * v, bias_true = scale * vb.
    std::vector<double>& v = w;
    std::fill(v.begin(), v.end(), 0.0);
    double vb = 0.0;
    double scale = 1.0;
    double normsq = 0.0;
    std::uint64_t t = 0;

    std::vector<double> objective;
    objective.reserve(static_cast<size_t>(params.epochs));

    for (int e = 0; e < params.epochs; ++e) {
        for (std::uint32_t i : order[static_cast<size_t>(e)]) {
            ++t;
            const SparseVector& x = xs[i];
            const double y = targets[i] == cls ? 1.0 : -1.0;
            const double eta = 1.0 / (lambda * static_cast<double>(t));
            double vx = dot(v, x) + vb;
            const double margin = y * scale * vx;

            const double shrink = 1.0 - eta * lambda;
            if (shrink <= 0.0) {
                std::fill(v.begin(), v.end(), 0.0);
                vb = 0.0;
                scale = 1.0;
                normsq = 0.0;
                vx = 0.0;
            } else {
                scale *= shrink;
            }

            if (margin < 1.0) {
                const double a = eta * y / scale;
                normsq += 2.0 * a * vx + a * a * (x.squared_norm() + 1.0);
                for (size_t k = 0; k < x.nnz(); ++k) v[x.index[k]] += a * x.value[k];
                vb += a;
            }

            if (params.project) {
                const double wn = scale * std::sqrt(std::max(normsq, 0.0));
                if (wn > radius) scale *= radius / wn;
            }
            if (scale < 1e-9) {
                for (double& z : v) z *= scale;
                vb *= scale;
                normsq *= scale * scale;
                scale = 1.0;
            }
        }

        // Exact objective of the current iterate.
        double ns = vb * vb;
        for (double z : v) ns += z * z;
        normsq = ns;
        double hinge = 0.0;
        for (size_t i = 0; i < xs.size(); ++i) {
            const double y = targets[i] == cls ? 1.0 : -1.0;
            hinge += std::max(0.0, 1.0 - y * scale * (dot(v, xs[i]) + vb));
        }
        objective.push_back(0.5 * lambda * scale * scale * normsq + hinge / static_cast<double>(xs.size()));
    }

    for (double& z : v) z *= scale;
    bias = vb * scale;
    return objective;
}

namespace serial {

std::vector<SparseVector> hashed_counts_batch(const FeatureConfig& config, std::span<const std::string> texts) {
    std::vector<SparseVector> out(texts.size());
    for (size_t i = 0; i < texts.size(); ++i) out[i] = hashed_counts(config, texts[i]);
    return out;
}

std::vector<SparseVector> weight_batch(const FeatureConfig& config, const IdfTable* idf, std::vector<SparseVector> counts) {
    for (auto& c : counts) c = weight_counts(config, idf, std::move(c));
    return counts;
}

std::vector<std::uint32_t> document_frequency(std::uint32_t dim, std::span<const SparseVector> counts) {
    std::vector<std::uint32_t> df(dim, 0);
    for (const auto& x : counts)
        for (auto idx : x.index) ++df[idx];
    return df;
}

std::vector<double> scores(const LinearWeights& model, std::span<const SparseVector> xs) {
    const size_t k = model.classes();
    std::vector<double> out(xs.size() * k);
    for (size_t i = 0; i < xs.size(); ++i)
        for (size_t c = 0; c < k; ++c) out[i * k + c] = dot(model.w[c], xs[i]) + model.bias[c];
    return out;
}

PegasosTrace pegasos_ovr(LinearWeights& model, std::span<const SparseVector> xs, std::span<const std::uint32_t> targets,
                         const PegasosParams& params, const EpochOrder& order) {
    PegasosTrace trace;
    trace.objective.resize(model.classes());
    for (size_t c = 0; c < model.classes(); ++c)
        trace.objective[c] = pegasos_binary(model.w[c], model.bias[c], xs, targets, static_cast<std::uint32_t>(c),
                                            params, order);
    return trace;
}

} // namespace serial

namespace omp {

std::vector<SparseVector> hashed_counts_batch(const FeatureConfig& config, std::span<const std::string> texts) {
    std::vector<SparseVector> out(texts.size());
    const auto n = static_cast<std::int64_t>(texts.size());
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t i = 0; i < n; ++i) out[static_cast<size_t>(i)] = hashed_counts(config, texts[static_cast<size_t>(i)]);
    return out;
}

std::vector<SparseVector> weight_batch(const FeatureConfig& config, const IdfTable* idf, std::vector<SparseVector> counts) {
    const auto n = static_cast<std::int64_t>(counts.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        auto& c = counts[static_cast<size_t>(i)];
        c = weight_counts(config, idf, std::move(c));
    }
    return counts;
}

std::vector<std::uint32_t> document_frequency(std::uint32_t dim, std::span<const SparseVector> counts) {
    std::vector<std::uint32_t> df(dim, 0);
    const auto n = static_cast<std::int64_t>(counts.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        for (auto idx : counts[static_cast<size_t>(i)].index) {
#pragma omp atomic
            ++df[idx];
        }
    }
    return df;
}

std::vector<double> scores(const LinearWeights& model, std::span<const SparseVector> xs) {
    const size_t k = model.classes();
    std::vector<double> out(xs.size() * k);
    const auto n = static_cast<std::int64_t>(xs.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < n; ++i) {
        const auto row = static_cast<size_t>(i);
        for (size_t c = 0; c < k; ++c) out[row * k + c] = dot(model.w[c], xs[row]) + model.bias[c];
    }
    return out;
}

PegasosTrace pegasos_ovr(LinearWeights& model, std::span<const SparseVector> xs, std::span<const std::uint32_t> targets,
                         const PegasosParams& params, const EpochOrder& order) {
    PegasosTrace trace;
    trace.objective.resize(model.classes());
    const auto k = static_cast<std::int64_t>(model.classes());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t c = 0; c < k; ++c) {
        const auto cls = static_cast<size_t>(c);
        trace.objective[cls] = pegasos_binary(model.w[cls], model.bias[cls], xs, targets,
                                              static_cast<std::uint32_t>(cls), params, order);
    }
    return trace;
}

} // namespace omp

} // namespace synthmix::kernels
