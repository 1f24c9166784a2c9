#include "sparq/kernel.hpp"

#include "sparq/errors.hpp"

#include <cmath>

namespace sparq {

void KernelSpec::validate() const {
    if (!(lengthscale > 0.0) || !std::isfinite(lengthscale))
        throw InputError("kernel lengthscale must be positive and finite");
    if (!(signal_variance > 0.0) || !std::isfinite(signal_variance))
        throw InputError("kernel signal_variance must be positive and finite");
}

std::string kernel_family_name(KernelFamily family) {
    switch (family) {
    case KernelFamily::SquaredExponential: return "se";
    case KernelFamily::Matern52: return "matern52";
    }
    return "se";
}

KernelFamily kernel_family_from_name(const std::string& name) {
    if (name == "se" || name == "squared_exponential") return KernelFamily::SquaredExponential;
    if (name == "matern52") return KernelFamily::Matern52;
    throw InputError("unknown kernel family: " + name);
}

namespace {

double radial_profile(KernelFamily family, double scaled_distance) {
    switch (family) {
    case KernelFamily::SquaredExponential:
        return std::exp(-0.5 * scaled_distance * scaled_distance);
    case KernelFamily::Matern52: {
        const double a = std::sqrt(5.0) * scaled_distance;
        return (1.0 + a + a * a / 3.0) * std::exp(-a);
    }
    }
    return 0.0;
}

} // namespace

double kernel_eval(const KernelSpec& spec, const Point& x, const Point& x2) {
    if (x.size() != x2.size())
        throw InputError("kernel_eval: point dimensions differ");
    const double r = (x - x2).norm();
    return spec.signal_variance * radial_profile(spec.family, r / spec.lengthscale);
}

Matrix kernel_matrix(const KernelSpec& spec, std::span<const Point> points) {
    const auto n = static_cast<Eigen::Index>(points.size());
    Matrix gram(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        gram(i, i) = spec.signal_variance;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double v = kernel_eval(spec, points[static_cast<std::size_t>(i)],
                                         points[static_cast<std::size_t>(j)]);
            gram(i, j) = v;
            gram(j, i) = v;
        }
    }
    return gram;
}

Vector kernel_vector(const KernelSpec& spec, std::span<const Point> points, const Point& x) {
    const auto n = static_cast<Eigen::Index>(points.size());
    Vector out(n);
    for (Eigen::Index i = 0; i < n; ++i)
        out(i) = kernel_eval(spec, points[static_cast<std::size_t>(i)], x);
    return out;
}

Matrix kernel_cross(const KernelSpec& spec, std::span<const Point> rows, std::span<const Point> cols) {
    Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
    for (Eigen::Index j = 0; j < out.cols(); ++j)
        for (Eigen::Index i = 0; i < out.rows(); ++i)
            out(i, j) = kernel_eval(spec, rows[static_cast<std::size_t>(i)],
                                    cols[static_cast<std::size_t>(j)]);
    return out;
}

double temporal_decay(double epsilon, long t, long t2) {
    if (epsilon < 0.0 || epsilon > 1.0)
        throw InputError("temporal kernel epsilon must lie in [0, 1]");
    if (t < 0 || t2 < 0)
        throw InputError("temporal kernel times must be nonnegative");
    const double gap = static_cast<double>(t > t2 ? t - t2 : t2 - t);
    if (epsilon == 1.0)
        return gap == 0.0 ? 1.0 : 0.0;
    return std::pow(1.0 - epsilon, gap / 2.0);
}

double temporal_kernel_eval(const KernelSpec& spec, double epsilon,
                            const Point& x, long t, const Point& x2, long t2) {
    return temporal_decay(epsilon, t, t2) * kernel_eval(spec, x, x2);
}

} // namespace sparq
