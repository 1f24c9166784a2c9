#ifndef SPARQ_SPARSE_HPP
#define SPARQ_SPARSE_HPP

#include "sparq/kernel.hpp"
#include "sparq/rng.hpp"

#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <vector>

namespace sparq {

/// K_jj - K_{j,Z} (K_{Z,Z})^{-1} K_{Z,j}, clamped at zero. Z may be empty.
double schur_complement(const Matrix& kernel, std::span<const std::size_t> subset, std::size_t j);

/// Greedy log-det subset selection: repeatedly adds the index with the largest
/// Schur complement, ties broken toward the lowest index. Returns the set
/// sorted ascending.
std::vector<std::size_t> greedy_init(const Matrix& kernel, std::size_t count);

/// Same selection, in pick order. greedy_init is its sorted view.
std::vector<std::size_t> greedy_selection_order(const Matrix& kernel, std::size_t count);

/// State of one M-DPP Markov chain: the ground kernel matrix, the current
/// subset, and a cached Cholesky factor of the selected principal submatrix.
/// Single-owner; clone per chain for concurrent use.
class SubsetState {
public:
    SubsetState(Matrix ground, std::vector<std::size_t> selection_order);

    const Matrix& ground() const { return ground_; }
    const std::vector<std::size_t>& selection_order() const { return order_; }
    std::vector<std::size_t> selected() const;   // sorted ascending
    double log_det() const { return log_det_; }
    double jitter() const { return jitter_; }
    std::size_t ground_size() const { return static_cast<std::size_t>(ground_.rows()); }
    std::size_t subset_size() const { return order_.size(); }
    std::uint64_t proposals() const { return proposals_; }
    std::uint64_t accepted() const { return accepted_; }

    /// det(K_{Z'}) / det(K_Z) for the swap that removes order position
    /// `remove_pos` and adds ground index `add_index`, via Schur complements
    /// against the cached factor. Never forms a full determinant.
    double proposal_ratio(std::size_t remove_pos, std::size_t add_index) const;

    friend SubsetState mcmc_step(SubsetState state, RngStream& rng);

private:
    struct Proposal;
    Proposal evaluate_proposal(std::size_t remove_pos, std::size_t add_index) const;
    void refactor();

    Matrix ground_;
    std::vector<std::size_t> order_;        // factor order
    std::vector<std::size_t> complement_;   // ground indices outside the subset
    Matrix factor_;                         // lower triangular, order_ x order_
    double log_det_ = 0.0;
    double jitter_ = 0.0;
    double jitter_scale_ = 1.0;
    std::uint64_t proposals_ = 0;
    std::uint64_t accepted_ = 0;
    std::uint32_t accepted_since_refactor_ = 0;
};

/// One Metropolis exchange proposal: i uniform in Z, j uniform outside,
/// accepted with probability (1/2) min{1, det(K_{Z'}) / det(K_Z)}.
/// Consumes exactly three rng draws. No-op when the subset is empty or full.
SubsetState mcmc_step(SubsetState state, RngStream& rng);

/// Greedy initialization followed by n_iters chain steps; deterministic given
/// the rng seed. Returns the subset sorted ascending.
std::vector<std::size_t> sample_mdpp(const Matrix& kernel, std::size_t count,
                                     std::uint64_t n_iters, RngStream& rng);

/// Exact M-DPP probability table by enumeration; test-oracle scale only
/// (throws InputError once binom(N, M) exceeds 1e5).
std::map<std::vector<std::size_t>, double> exact_mdpp_distribution(const Matrix& kernel,
                                                                   std::size_t count);

/// Expert-query budget Q_t = c log^d(t), constants folded into c.
struct QueryBudget {
    double c = 6.0;
    int dimension = 1;

    void validate() const;
};

/// max(1, ceil(c * ln(max(t, 2))^d)), capped at `available`.
std::size_t query_budget(const QueryBudget& budget, long t,
                         std::size_t available = std::numeric_limits<std::size_t>::max());

/// ceil(scale * N * M * ln(N t / eta)); zero when scale is zero. Monotone in t.
std::uint64_t mcmc_iterations(long t, double eta, double scale,
                              std::size_t n_candidates, std::size_t subset_size);

} // namespace sparq

#endif
