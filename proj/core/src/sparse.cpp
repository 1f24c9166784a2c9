#include "sparq/sparse.hpp"

#include "sparq/errors.hpp"
#include "sparq/gp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include <algorithm>
#include <cmath>

namespace sparq {

namespace {

Matrix principal_submatrix(const Matrix& kernel, std::span<const std::size_t> idx) {
    const auto m = static_cast<Eigen::Index>(idx.size());
    Matrix sub(m, m);
    for (Eigen::Index a = 0; a < m; ++a)
        for (Eigen::Index b = 0; b < m; ++b)
            sub(a, b) = kernel(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(a)]),
                               static_cast<Eigen::Index>(idx[static_cast<std::size_t>(b)]));
    return sub;
}

Vector column_slice(const Matrix& kernel, std::span<const std::size_t> rows, std::size_t col) {
    Vector out(static_cast<Eigen::Index>(rows.size()));
    for (Eigen::Index a = 0; a < out.size(); ++a)
        out(a) = kernel(static_cast<Eigen::Index>(rows[static_cast<std::size_t>(a)]),
                        static_cast<Eigen::Index>(col));
    return out;
}

/// Rank-1 Cholesky update: L <- chol(L L^T + v v^T), LINPACK-style Givens sweep.
void cholesky_update(Eigen::Ref<Matrix> lower, Vector v) {
    const auto m = lower.rows();
    for (Eigen::Index k = 0; k < m; ++k) {
        const double lkk = lower(k, k);
        const double r = std::hypot(lkk, v(k));
        const double c = r / lkk;
        const double s = v(k) / lkk;
        lower(k, k) = r;
        for (Eigen::Index i = k + 1; i < m; ++i) {
            lower(i, k) = (lower(i, k) + s * v(i)) / c;
            v(i) = c * v(i) - s * lower(i, k);
        }
    }
}

/// Factor of the submatrix with row/column `pos` deleted, given the factor of
/// the full one. Only the trailing block needs a rank-1 update.
Matrix delete_from_factor(const Matrix& lower, std::size_t pos) {
    const auto m = lower.rows();
    const auto p = static_cast<Eigen::Index>(pos);
    Matrix out = Matrix::Zero(m - 1, m - 1);
    out.topLeftCorner(p, p) = lower.topLeftCorner(p, p);
    const auto tail = m - 1 - p;
    if (tail > 0) {
        out.bottomLeftCorner(tail, p) = lower.bottomLeftCorner(tail, p);
        Matrix trailing = lower.bottomRightCorner(tail, tail);
        cholesky_update(trailing, lower.col(p).tail(tail));
        out.bottomRightCorner(tail, tail) = trailing.triangularView<Eigen::Lower>();
    }
    return out;
}

constexpr std::uint32_t kRefactorPeriod = 256;

} // namespace

double schur_complement(const Matrix& kernel, std::span<const std::size_t> subset, std::size_t j) {
    const auto n = static_cast<std::size_t>(kernel.rows());
    if (j >= n)
        throw InputError("schur_complement: index out of range");
    for (std::size_t idx : subset) {
        if (idx >= n) throw InputError("schur_complement: subset index out of range");
        if (idx == j) throw InputError("schur_complement: j must not belong to the subset");
    }
    const double kjj = kernel(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j));
    if (subset.empty())
        return kjj < 0.0 ? 0.0 : kjj;
    const double scale = std::max(kernel.diagonal().maxCoeff(), 1e-300);
    const JitteredCholesky chol = cholesky_with_jitter(principal_submatrix(kernel, subset), scale);
    const Vector kzj = column_slice(kernel, subset, j);
    const Vector u = chol.lower.triangularView<Eigen::Lower>().solve(kzj);
    const double s = kjj - u.squaredNorm();
    return s < 0.0 ? 0.0 : s;
}

std::vector<std::size_t> greedy_selection_order(const Matrix& kernel, std::size_t count) {
    const auto n = static_cast<std::size_t>(kernel.rows());
    if (count < 1 || count > n)
        throw InputError("greedy selection count must satisfy 1 <= M <= N");
    std::vector<std::size_t> order;
    order.reserve(count);
    std::vector<std::size_t> remaining(n);
    for (std::size_t i = 0; i < n; ++i) remaining[i] = i;
    while (order.size() < count) {
        std::size_t best_pos = 0;
        double best_value = -1.0;
        for (std::size_t pos = 0; pos < remaining.size(); ++pos) {
            const double s = schur_complement(kernel, order, remaining[pos]);
            if (s > best_value) {
                best_value = s;
                best_pos = pos;
            }
        }
        order.push_back(remaining[best_pos]);
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best_pos));
    }
    return order;
}

std::vector<std::size_t> greedy_init(const Matrix& kernel, std::size_t count) {
    std::vector<std::size_t> out = greedy_selection_order(kernel, count);
    std::sort(out.begin(), out.end());
    return out;
}

struct SubsetState::Proposal {
    Matrix reduced_factor;   // factor of K_WW, W = order minus remove_pos
    Vector append_column;    // L_W^{-1} K_{W,j}
    double schur_removed;    // S(i, W)
    double schur_added;      // S(j, W)
};

SubsetState::SubsetState(Matrix ground, std::vector<std::size_t> selection_order)
    : ground_(std::move(ground)), order_(std::move(selection_order)) {
    const auto n = ground_size();
    if (ground_.rows() != ground_.cols())
        throw InputError("subset state needs a square ground matrix");
    std::vector<char> seen(n, 0);
    for (std::size_t idx : order_) {
        if (idx >= n) throw InputError("subset index out of range");
        if (seen[idx]) throw InputError("subset indices must be distinct");
        seen[idx] = 1;
    }
    complement_.reserve(n - order_.size());
    for (std::size_t i = 0; i < n; ++i)
        if (!seen[i]) complement_.push_back(i);
    jitter_scale_ = n ? std::max(ground_.diagonal().maxCoeff(), 1e-300) : 1.0;
    refactor();
}

std::vector<std::size_t> SubsetState::selected() const {
    std::vector<std::size_t> out = order_;
    std::sort(out.begin(), out.end());
    return out;
}

void SubsetState::refactor() {
    if (order_.empty()) {
        factor_.resize(0, 0);
        log_det_ = 0.0;
        jitter_ = 1e-10 * jitter_scale_;
        accepted_since_refactor_ = 0;
        return;
    }
    const JitteredCholesky chol = cholesky_with_jitter(principal_submatrix(ground_, order_),
                                                       jitter_scale_);
    factor_ = chol.lower;
    log_det_ = chol.log_det;
    jitter_ = chol.jitter;
    accepted_since_refactor_ = 0;
}

SubsetState::Proposal SubsetState::evaluate_proposal(std::size_t remove_pos,
                                                     std::size_t add_index) const {
    Proposal prop;
    prop.reduced_factor = delete_from_factor(factor_, remove_pos);
    const auto lower = prop.reduced_factor.triangularView<Eigen::Lower>();
    const double floor = std::max(jitter_, 1e-300);

    std::vector<std::size_t> reduced_order = order_;
    reduced_order.erase(reduced_order.begin() + static_cast<std::ptrdiff_t>(remove_pos));

    const std::size_t removed = order_[remove_pos];
    const Vector ui = lower.solve(column_slice(ground_, reduced_order, removed));
    const auto ridx = static_cast<Eigen::Index>(removed);
    prop.schur_removed = std::max(ground_(ridx, ridx) + jitter_ - ui.squaredNorm(), floor);

    prop.append_column = lower.solve(column_slice(ground_, reduced_order, add_index));
    const auto aidx = static_cast<Eigen::Index>(add_index);
    prop.schur_added =
        std::max(ground_(aidx, aidx) + jitter_ - prop.append_column.squaredNorm(), floor);
    return prop;
}

double SubsetState::proposal_ratio(std::size_t remove_pos, std::size_t add_index) const {
    if (remove_pos >= order_.size())
        throw InputError("proposal_ratio: remove position out of range");
    const Proposal prop = evaluate_proposal(remove_pos, add_index);
    return prop.schur_added / prop.schur_removed;
}

SubsetState mcmc_step(SubsetState state, RngStream& rng) {
    const std::size_t m = state.subset_size();
    const std::size_t n = state.ground_size();
    if (m == 0 || m == n)
        return state;
    const std::size_t remove_pos = rng.uniform_index(m);
    const std::size_t complement_pos = rng.uniform_index(n - m);
    const double u = rng.uniform();
    const std::size_t add_index = state.complement_[complement_pos];

    const SubsetState::Proposal prop = state.evaluate_proposal(remove_pos, add_index);
    const double ratio = prop.schur_added / prop.schur_removed;
    const double accept_probability = 0.5 * std::min(1.0, ratio);
    ++state.proposals_;
    if (u >= accept_probability)
        return state;

    ++state.accepted_;
    state.complement_[complement_pos] = state.order_[remove_pos];
    state.order_.erase(state.order_.begin() + static_cast<std::ptrdiff_t>(remove_pos));
    state.order_.push_back(add_index);
    state.log_det_ += std::log(prop.schur_added) - std::log(prop.schur_removed);

    if (++state.accepted_since_refactor_ >= kRefactorPeriod) {
        state.refactor();
        return state;
    }
    const auto mm = static_cast<Eigen::Index>(m);
    Matrix grown = Matrix::Zero(mm, mm);
    grown.topLeftCorner(mm - 1, mm - 1) = prop.reduced_factor;
    grown.row(mm - 1).head(mm - 1) = prop.append_column.transpose();
    grown(mm - 1, mm - 1) = std::sqrt(prop.schur_added);
    state.factor_ = std::move(grown);
    return state;
}

std::vector<std::size_t> sample_mdpp(const Matrix& kernel, std::size_t count,
                                     std::uint64_t n_iters, RngStream& rng) {
    const auto n = static_cast<std::size_t>(kernel.rows());
    if (count < 1 || count > n)
        throw InputError("sample_mdpp count must satisfy 1 <= M <= N");
    if (count == n) {
        std::vector<std::size_t> all(n);
        for (std::size_t i = 0; i < n; ++i) all[i] = i;
        return all;
    }
    SubsetState state(kernel, greedy_selection_order(kernel, count));
    for (std::uint64_t it = 0; it < n_iters; ++it)
        state = mcmc_step(std::move(state), rng);
    return state.selected();
}

std::map<std::vector<std::size_t>, double> exact_mdpp_distribution(const Matrix& kernel,
                                                                   std::size_t count) {
    const auto n = static_cast<std::size_t>(kernel.rows());
    if (count < 1 || count > n)
        throw InputError("exact_mdpp_distribution count must satisfy 1 <= M <= N");
    double binom = 1.0;
    for (std::size_t i = 0; i < count; ++i)
        binom *= static_cast<double>(n - i) / static_cast<double>(i + 1);
    if (binom > 1e5)
        throw InputError("exact_mdpp_distribution: binom(N, M) exceeds the 1e5 oracle guard");

    std::map<std::vector<std::size_t>, double> table;
    std::vector<std::size_t> subset(count);
    for (std::size_t i = 0; i < count; ++i) subset[i] = i;
    double total = 0.0;
    while (true) {
        double det = principal_submatrix(kernel, subset).determinant();
        if (det < 0.0) det = 0.0;
        table.emplace(subset, det);
        total += det;

        // next combination in lexicographic order
        std::size_t k = count;
        while (k > 0 && subset[k - 1] == n - count + k - 1) --k;
        if (k == 0) break;
        ++subset[k - 1];
        for (std::size_t i = k; i < count; ++i) subset[i] = subset[i - 1] + 1;
    }
    if (total <= 0.0)
        throw NumericalError("exact_mdpp_distribution: all subset determinants vanished");
    for (auto& [key, value] : table) value /= total;
    return table;
}

void QueryBudget::validate() const {
    if (!(c > 0.0) || !std::isfinite(c))
        throw InputError("query budget multiplier c must be positive");
    if (dimension < 1)
        throw InputError("query budget dimension must be >= 1");
}

std::size_t query_budget(const QueryBudget& budget, long t, std::size_t available) {
    budget.validate();
    if (t < 1)
        throw InputError("query_budget needs t >= 1");
    const double grown =
        budget.c * std::pow(std::log(static_cast<double>(std::max(t, 2L))), budget.dimension);
    auto q = static_cast<std::size_t>(std::ceil(grown));
    if (q < 1) q = 1;
    return std::min(q, available);
}

std::uint64_t mcmc_iterations(long t, double eta, double scale,
                              std::size_t n_candidates, std::size_t subset_size) {
    if (!(eta > 0.0))
        throw InputError("mcmc_iterations needs eta > 0");
    if (scale == 0.0 || n_candidates == 0 || subset_size == 0)
        return 0;
    const double arg = static_cast<double>(n_candidates) * static_cast<double>(t) / eta;
    const double value = scale * static_cast<double>(n_candidates) *
                         static_cast<double>(subset_size) * std::log(arg);
    if (!(value > 0.0))
        return 0;
    return static_cast<std::uint64_t>(std::ceil(value));
}

} // namespace sparq
