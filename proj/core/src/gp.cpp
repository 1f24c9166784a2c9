#include "sparq/gp.hpp"

#include "sparq/errors.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <numbers>

namespace sparq {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

void HeteroscedasticDataset::validate() const {
    const auto n = static_cast<Eigen::Index>(locations.size());
    if (values.size() != n || noise_variances.size() != n)
        throw InputError("dataset fields must have equal length");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(noise_variances(i) > 0.0) || !std::isfinite(noise_variances(i)))
            throw InputError("every noise variance must be positive and finite");
    }
    for (std::size_t i = 1; i < locations.size(); ++i)
        if (locations[i].size() != locations[0].size())
            throw InputError("dataset locations must share one dimension");
}

namespace {

JitteredCholesky cholesky_over_levels(const Matrix& matrix, double scale,
                                      std::span<const double> levels) {
    std::vector<double> attempted;
    for (double level : levels) {
        const double jitter = level * scale;
        attempted.push_back(jitter);
        Matrix shifted = matrix;
        shifted.diagonal().array() += jitter;
        Eigen::LLT<Matrix> llt(shifted);
        if (llt.info() == Eigen::Success) {
            JitteredCholesky out;
            out.lower = llt.matrixL();
            out.jitter = jitter;
            out.log_det = 2.0 * out.lower.diagonal().array().log().sum();
            return out;
        }
    }
    throw NumericalError("Cholesky factorization failed after jitter escalation on a " +
                             std::to_string(matrix.rows()) + "x" +
                             std::to_string(matrix.cols()) + " matrix",
                         attempted);
}

} // namespace

JitteredCholesky cholesky_with_jitter(const Matrix& matrix, double scale) {
    static constexpr double kLevels[] = {1e-10, 1e-8, 1e-6};
    return cholesky_over_levels(matrix, scale, kLevels);
}

GPPosterior::GPPosterior(KernelSpec spec, HeteroscedasticDataset data)
    : GPPosterior(spec, std::move(data), Matrix()) {}

GPPosterior::GPPosterior(KernelSpec spec, HeteroscedasticDataset data, const Matrix& gram)
    : spec_(spec), data_(std::move(data)) {
    spec_.validate();
    data_.validate();
    const auto n = static_cast<Eigen::Index>(data_.size());
    if (n == 0) {
        factor_.lower.resize(0, 0);
        weights_.resize(0);
        return;
    }
    Matrix cov = gram.size() ? gram : kernel_matrix(spec_, data_.locations);
    if (cov.rows() != n || cov.cols() != n)
        throw InputError("gram matrix size does not match dataset size");
    cov.diagonal() += data_.noise_variances;
    factor_ = cholesky_with_jitter(cov, spec_.signal_variance);
    weights_ = factor_.lower.triangularView<Eigen::Lower>().solve(data_.values);
    factor_.lower.transpose().triangularView<Eigen::Upper>().solveInPlace(weights_);
}

double GPPosterior::mean(const Point& x) const {
    if (size() == 0) return 0.0;
    return mean_from_cross(kernel_vector(spec_, data_.locations, x));
}

double GPPosterior::variance(const Point& x) const {
    if (size() == 0) return spec_.signal_variance;
    return variance_from_cross(kernel_vector(spec_, data_.locations, x), spec_.signal_variance);
}

double GPPosterior::mean_from_cross(const Vector& kx) const {
    if (size() == 0) return 0.0;
    return kx.dot(weights_);
}

double GPPosterior::variance_from_cross(const Vector& kx, double prior_variance) const {
    if (size() == 0) return prior_variance;
    const Vector v = factor_.lower.triangularView<Eigen::Lower>().solve(kx);
    double var = prior_variance - v.squaredNorm();
    if (var < 0.0) {
        clamps_.fetch_add(1, std::memory_order_relaxed);
        var = 0.0;
    }
    return var;
}

void GPPosterior::evaluate(std::span<const Point> grid, Vector& means, Vector& variances) const {
    if (size() == 0) {
        means = Vector::Zero(static_cast<Eigen::Index>(grid.size()));
        variances = Vector::Constant(static_cast<Eigen::Index>(grid.size()), spec_.signal_variance);
        return;
    }
    const Matrix cross = kernel_cross(spec_, data_.locations, grid);
    evaluate_from_cross(cross, spec_.signal_variance, means, variances);
}

void GPPosterior::evaluate_from_cross(const Matrix& cross, double prior_variance,
                                      Vector& means, Vector& variances) const {
    const auto m = cross.cols();
    if (size() == 0) {
        means = Vector::Zero(m);
        variances = Vector::Constant(m, prior_variance);
        return;
    }
    means = cross.transpose() * weights_;
    const Matrix v = factor_.lower.triangularView<Eigen::Lower>().solve(cross);
    variances.resize(m);
    std::uint64_t clamped = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
        double var = prior_variance - v.col(j).squaredNorm();
        if (var < 0.0) {
            ++clamped;
            var = 0.0;
        }
        variances(j) = var;
    }
    if (clamped) clamps_.fetch_add(clamped, std::memory_order_relaxed);
}

GPPosterior fit(const KernelSpec& spec, HeteroscedasticDataset data) {
    return GPPosterior(spec, std::move(data));
}

double log_marginal_likelihood(const KernelSpec& spec, const HeteroscedasticDataset& data) {
    data.validate();
    if (data.size() == 0)
        throw InputError("log marginal likelihood needs a nonempty dataset");
    const GPPosterior post(spec, data);
    const auto n = static_cast<double>(data.size());
    return -0.5 * data.values.dot(post.weights()) - 0.5 * post.gram_log_det() - 0.5 * n * kLog2Pi;
}

Matrix nystrom_matrix(const KernelSpec& spec, std::span<const Point> points,
                      std::span<const Point> inducing) {
    if (inducing.empty())
        throw InputError("nystrom_matrix needs at least one inducing point");
    const Matrix kmm = kernel_matrix(spec, inducing);
    // prefer the exact factorization so that Q == K holds to machine
    // precision when the inducing set is the full training set
    static constexpr double kLevels[] = {0.0, 1e-10, 1e-8, 1e-6};
    const JitteredCholesky chol = cholesky_over_levels(kmm, spec.signal_variance, kLevels);
    const Matrix cross = kernel_cross(spec, inducing, points); // |Xs| x |X|
    const Matrix v = chol.lower.triangularView<Eigen::Lower>().solve(cross);
    Matrix q = v.transpose() * v;
    q = 0.5 * (q + q.transpose());
    return q;
}

namespace {

double log_density_zero_mean(const Vector& y, Matrix cov, double jitter_scale) {
    const JitteredCholesky chol = cholesky_with_jitter(cov, jitter_scale);
    Vector alpha = chol.lower.triangularView<Eigen::Lower>().solve(y);
    return -0.5 * alpha.squaredNorm() - 0.5 * chol.log_det -
           0.5 * static_cast<double>(y.size()) * kLog2Pi;
}

} // namespace

double elbo(const KernelSpec& spec, const HeteroscedasticDataset& data,
            std::span<const Point> inducing) {
    data.validate();
    if (data.size() == 0)
        throw InputError("elbo needs a nonempty dataset");
    const Matrix k = kernel_matrix(spec, data.locations);
    const Matrix q = nystrom_matrix(spec, data.locations, inducing);
    Matrix cov = q;
    cov.diagonal() += data.noise_variances;
    const double log_n = log_density_zero_mean(data.values, std::move(cov), spec.signal_variance);
    const double trace_term =
        ((k.diagonal() - q.diagonal()).array() / data.noise_variances.array()).sum();
    return log_n - 0.5 * trace_term;
}

double kl_gap(const KernelSpec& spec, const HeteroscedasticDataset& data,
              std::span<const Point> inducing) {
    return log_marginal_likelihood(spec, data) - elbo(spec, data, inducing);
}

double kl_trace_bound(const KernelSpec& spec, const HeteroscedasticDataset& data,
                      std::span<const Point> inducing, double sigma2) {
    if (!(sigma2 > 0.0))
        throw InputError("kl_trace_bound needs sigma2 > 0");
    const Matrix k = kernel_matrix(spec, data.locations);
    const Matrix q = nystrom_matrix(spec, data.locations, inducing);
    return (k.diagonal() - q.diagonal()).sum() / sigma2;
}

KernelSpec tune_hyperparameters(const HeteroscedasticDataset& data,
                                std::span<const KernelSpec> grid) {
    if (grid.empty())
        throw InputError("hyperparameter grid must be nonempty");
    bool found = false;
    KernelSpec best;
    double best_lml = 0.0;
    std::vector<double> attempted;
    for (const KernelSpec& candidate : grid) {
        double lml;
        try {
            lml = log_marginal_likelihood(candidate, data);
        } catch (const NumericalError& err) {
            attempted.insert(attempted.end(), err.jitter_attempts.begin(),
                             err.jitter_attempts.end());
            continue;
        }
        if (!found || lml > best_lml) {
            found = true;
            best = candidate;
            best_lml = lml;
        }
    }
    if (!found)
        throw NumericalError("every kernel candidate failed factorization", attempted);
    return best;
}

SparsePosterior::SparsePosterior(KernelSpec spec, const HeteroscedasticDataset& data,
                                 std::span<const Point> inducing)
    : spec_(spec), inducing_(inducing.begin(), inducing.end()) {
    spec_.validate();
    data.validate();
    if (inducing_.empty())
        throw InputError("sparse posterior needs at least one inducing point");
    const Matrix kmm = kernel_matrix(spec_, inducing_);
    kmm_factor_ = cholesky_with_jitter(kmm, spec_.signal_variance);
    const Matrix kmn = kernel_cross(spec_, inducing_, data.locations);
    const Matrix kmn_sinv = kmn * data.noise_variances.cwiseInverse().asDiagonal();
    amm_factor_ = cholesky_with_jitter(kmm + kmn_sinv * kmn.transpose(), spec_.signal_variance);
    alpha_ = amm_factor_.lower.triangularView<Eigen::Lower>().solve(kmn_sinv * data.values);
    amm_factor_.lower.transpose().triangularView<Eigen::Upper>().solveInPlace(alpha_);
}

double SparsePosterior::mean(const Point& x) const {
    return kernel_vector(spec_, inducing_, x).dot(alpha_);
}

double SparsePosterior::variance(const Point& x) const {
    const Vector ks = kernel_vector(spec_, inducing_, x);
    const Vector v1 = kmm_factor_.lower.triangularView<Eigen::Lower>().solve(ks);
    const Vector v2 = amm_factor_.lower.triangularView<Eigen::Lower>().solve(ks);
    double var = spec_.signal_variance - v1.squaredNorm() + v2.squaredNorm();
    return var < 0.0 ? 0.0 : var;
}

} // namespace sparq
