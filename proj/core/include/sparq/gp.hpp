#ifndef SPARQ_GP_HPP
#define SPARQ_GP_HPP

#include "sparq/kernel.hpp"

#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

namespace sparq {

/// Regression data where every observation carries its own noise variance.
/// Entries are kept in acquisition order; several routines rely on the last
/// entry being the most recent observation.
struct HeteroscedasticDataset {
    std::vector<Point> locations;
    Vector values;
    Vector noise_variances;

    std::size_t size() const { return locations.size(); }

    /// Throws InputError unless the three fields agree in length and every
    /// noise variance is positive.
    void validate() const;
};

/// Result of a Cholesky factorization with escalating diagonal jitter.
struct JitteredCholesky {
    Matrix lower;          // L with L L^T = A + jitter * I
    double jitter = 0.0;   // jitter actually applied
    double log_det = 0.0;  // log det(A + jitter * I)
};

/// Factorizes `matrix` + jitter*I, trying jitter = {1e-10, 1e-8, 1e-6} * scale.
/// Throws NumericalError (with the attempted levels) if all fail.
JitteredCholesky cholesky_with_jitter(const Matrix& matrix, double scale);

/// Heteroscedastic GP posterior with a cached factorization of K + Sigma.
/// Immutable after construction; safe for concurrent reads.
class GPPosterior {
public:
    GPPosterior(KernelSpec spec, HeteroscedasticDataset data);

    /// Posterior built from an explicitly supplied Gram matrix (e.g. the
    /// spatio-temporal Gram of TV-GP-UCB). `gram` must match data.size().
    GPPosterior(KernelSpec spec, HeteroscedasticDataset data, const Matrix& gram);

    double mean(const Point& x) const;

    /// Clamped at zero; never exceeds signal_variance.
    double variance(const Point& x) const;

    /// Batched mean/variance over a grid; one triangular solve for all points.
    void evaluate(std::span<const Point> grid, Vector& means, Vector& variances) const;

    /// Same, but with a caller-supplied cross-covariance matrix whose column j
    /// is the covariance vector between training inputs and grid point j.
    void evaluate_from_cross(const Matrix& cross, double prior_variance,
                             Vector& means, Vector& variances) const;

    double mean_from_cross(const Vector& kx) const;
    double variance_from_cross(const Vector& kx, double prior_variance) const;

    const KernelSpec& spec() const { return spec_; }
    const HeteroscedasticDataset& data() const { return data_; }
    const Matrix& factor() const { return factor_.lower; }
    const Vector& weights() const { return weights_; }
    double applied_jitter() const { return factor_.jitter; }
    double gram_log_det() const { return factor_.log_det; }
    std::size_t size() const { return data_.size(); }

    /// Number of negative-variance clamps observed on this posterior.
    std::uint64_t variance_clamps() const { return clamps_.load(std::memory_order_relaxed); }

private:
    KernelSpec spec_;
    HeteroscedasticDataset data_;
    JitteredCholesky factor_;
    Vector weights_;
    mutable std::atomic<std::uint64_t> clamps_{0};
};

GPPosterior fit(const KernelSpec& spec, HeteroscedasticDataset data);

/// log N(Y | 0, K + Sigma). Data must be nonempty.
double log_marginal_likelihood(const KernelSpec& spec, const HeteroscedasticDataset& data);

/// Nystrom matrix Q = K_{n*} K_{**}^{-1} K_{*n}; K - Q is PSD up to jitter.
Matrix nystrom_matrix(const KernelSpec& spec, std::span<const Point> points,
                      std::span<const Point> inducing);

/// Closed-form evidence lower bound with per-observation noise:
/// log N(Y | 0, Sigma + Q) - 1/2 tr(Sigma^{-1}(K - Q)).
double elbo(const KernelSpec& spec, const HeteroscedasticDataset& data,
            std::span<const Point> inducing);

/// log_marginal_likelihood - elbo; the KL divergence of the sparse posterior
/// from the full one. Nonnegative up to numerics, zero when inducing == X.
double kl_gap(const KernelSpec& spec, const HeteroscedasticDataset& data,
              std::span<const Point> inducing);

/// tr(K - Q) / sigma2, the trace upper bound on the conditional expected KL.
double kl_trace_bound(const KernelSpec& spec, const HeteroscedasticDataset& data,
                      std::span<const Point> inducing, double sigma2);

/// Grid-search argmax of the log marginal likelihood. Ties and per-candidate
/// factorization failures resolve toward the earliest surviving grid entry.
KernelSpec tune_hyperparameters(const HeteroscedasticDataset& data,
                                std::span<const KernelSpec> grid);

/// Sparse variational predictive (optimal free-form inducing distribution).
/// Its KL divergence from the full posterior is exactly kl_gap(spec, data, Xs),
/// which is what makes the posterior-error inequality of the sparse-inference
/// theory checkable against it.
class SparsePosterior {
public:
    SparsePosterior(KernelSpec spec, const HeteroscedasticDataset& data,
                    std::span<const Point> inducing);

    double mean(const Point& x) const;
    double variance(const Point& x) const;

private:
    KernelSpec spec_;
    std::vector<Point> inducing_;
    JitteredCholesky kmm_factor_;   // K_**
    JitteredCholesky amm_factor_;   // K_** + K_*n Sigma^{-1} K_n*
    Vector alpha_;                  // A^{-1} K_*n Sigma^{-1} y
};

} // namespace sparq

#endif
