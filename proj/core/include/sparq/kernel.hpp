#ifndef SPARQ_KERNEL_HPP
#define SPARQ_KERNEL_HPP

#include <Eigen/Core>

#include <span>
#include <string>
#include <vector>

namespace sparq {

using Point = Eigen::VectorXd;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

enum class KernelFamily { SquaredExponential, Matern52 };

/// Stationary isotropic kernel: k(x, x') = signal_variance * rho(||x - x'|| / lengthscale).
/// k(x, x) == signal_variance for both families.
struct KernelSpec {
    KernelFamily family = KernelFamily::SquaredExponential;
    double lengthscale = 1.0;
    double signal_variance = 1.0;

    /// Throws InputError unless lengthscale > 0 and signal_variance > 0.
    void validate() const;
};

std::string kernel_family_name(KernelFamily family);
KernelFamily kernel_family_from_name(const std::string& name);

double kernel_eval(const KernelSpec& spec, const Point& x, const Point& x2);

/// Gram matrix over X; symmetric, diagonal == signal_variance. No jitter here.
Matrix kernel_matrix(const KernelSpec& spec, std::span<const Point> points);

/// [k(X[0], x), ..., k(X[n-1], x)].
Vector kernel_vector(const KernelSpec& spec, std::span<const Point> points, const Point& x);

/// Rectangular cross-covariance, rows indexed by `rows`, columns by `cols`.
Matrix kernel_cross(const KernelSpec& spec, std::span<const Point> rows, std::span<const Point> cols);

/// Spatio-temporal kernel (1 - epsilon)^(|t - t2| / 2) * k(x, x2) used by TV-GP-UCB.
double temporal_kernel_eval(const KernelSpec& spec, double epsilon,
                            const Point& x, long t, const Point& x2, long t2);

/// Decay factor (1 - epsilon)^(|t - t2| / 2) on its own, for scaling whole Gram blocks.
double temporal_decay(double epsilon, long t, long t2);

} // namespace sparq

#endif
