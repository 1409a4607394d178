#pragma once

// Data-parallel inner loops of the linear classifier. Each kernel exists as a
// serial reference (kernels::serial) and an OpenMP version (kernels::omp);
// both produce bit-identical output, which the unit tests assert.

#include "synthmix/features.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace synthmix::kernels {

/// Dense one-vs-rest weights: row c holds class c's weights over `dim` buckets.
struct LinearWeights {
    std::uint32_t dim = 0;
    std::vector<std::vector<double>> w;
    std::vector<double> bias;

    std::size_t classes() const noexcept { return w.size(); }
};

struct PegasosParams {
    double lambda = 0.0;
    int epochs = 10;
    bool project = true;
};

/// Per-epoch permutation of example indices; shared by all classes.
using EpochOrder = std::vector<std::vector<std::uint32_t>>;

struct PegasosTrace {
    /// objective[c][e]: regularised hinge objective of class c after epoch e.
    std::vector<std::vector<double>> objective;
};

namespace serial {

std::vector<SparseVector> hashed_counts_batch(const FeatureConfig& config, std::span<const std::string> texts);
std::vector<SparseVector> weight_batch(const FeatureConfig& config, const IdfTable* idf, std::vector<SparseVector> counts);
/// df per bucket over the given count vectors.
std::vector<std::uint32_t> document_frequency(std::uint32_t dim, std::span<const SparseVector> counts);
/// Row-major scores: out[i * K + c] = w_c . x_i + b_c.
std::vector<double> scores(const LinearWeights& model, std::span<const SparseVector> xs);
/// Trains every class's binary problem; targets[i] is the class index of example i.
PegasosTrace pegasos_ovr(LinearWeights& model, std::span<const SparseVector> xs, std::span<const std::uint32_t> targets,
                         const PegasosParams& params, const EpochOrder& order);

} // namespace serial

namespace omp {

std::vector<SparseVector> hashed_counts_batch(const FeatureConfig& config, std::span<const std::string> texts);
std::vector<SparseVector> weight_batch(const FeatureConfig& config, const IdfTable* idf, std::vector<SparseVector> counts);
std::vector<std::uint32_t> document_frequency(std::uint32_t dim, std::span<const SparseVector> counts);
std::vector<double> scores(const LinearWeights& model, std::span<const SparseVector> xs);
PegasosTrace pegasos_ovr(LinearWeights& model, std::span<const SparseVector> xs, std::span<const std::uint32_t> targets,
                         const PegasosParams& params, const EpochOrder& order);

} // namespace omp

/// Trains one binary problem (labels +1 where targets[i] == cls). Shared by
/// both namespaces; the parallel version runs it for several classes at once.
std::vector<double> pegasos_binary(std::vector<double>& w, double& bias, std::span<const SparseVector> xs,
                                   std::span<const std::uint32_t> targets, std::uint32_t cls,
                                   const PegasosParams& params, const EpochOrder& order);

double dot(const std::vector<double>& w, const SparseVector& x);

} // namespace synthmix::kernels
