#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "jackvar/errors.hpp"
#include "jackvar/functionals.hpp"
#include "jackvar/measures.hpp"
#include "jackvar/random.hpp"

namespace jackvar {

/// Jackknife pseudovalues, indexed by original observation order.
struct PseudovalueSet {
    std::vector<double> q;       // n T(eps_n) - (n-1) T(eps_ni)
    std::vector<double> q_prime; // (n-1) (T(eps_n) - T(eps_ni))
    double t_full = 0.0;
    std::size_t n = 0;
};

struct VarianceEstimates {
    double v_jack = 0.0;
    double ij = 0.0;
    std::size_t n = 0;
};

namespace detail {

inline PseudovalueSet from_leave_one_out(double t_full, std::span<const double> t_loo) {
    PseudovalueSet ps;
    ps.n = t_loo.size();
    ps.t_full = t_full;
    const double dn = static_cast<double>(ps.n);
    ps.q.resize(ps.n);
    ps.q_prime.resize(ps.n);
    for (std::size_t i = 0; i < ps.n; ++i) {
        ps.q[i] = dn * t_full - (dn - 1.0) * t_loo[i];
        ps.q_prime[i] = (dn - 1.0) * (t_full - t_loo[i]);
    }
    return ps;
}

inline void require_pair(const Sample& data) {
    if (data.size() < 2) throw input_error("jackknife requires at least two observations");
}

} // namespace detail

/// Reference path: evaluates T on every leave-one-out measure.
inline PseudovalueSet pseudovalues_generic(const Functional& f, const Sample& data) {
    detail::require_pair(data);
    const EmpiricalMeasure m = make_empirical(data);
    std::vector<double> t_loo(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) t_loo[i] = eval_functional(f, leave_one_out(m, i));
    return detail::from_leave_one_out(eval_functional(f, m), t_loo);
}

/// Pseudovalues with the O(n) mean update or the O(n log n) order-statistic reweighting.
inline PseudovalueSet pseudovalues(const Functional& f, const Sample& data) {
    detail::require_pair(data);
    const std::size_t n = data.size();
    std::vector<double> t_loo(n);
    if (!f.is_trimmed_l()) {
        const auto& spec = f.smooth_mean();
        const auto values = data.values();
        const double sum = std::accumulate(values.begin(), values.end(), 0.0);
        const double dn = static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) t_loo[i] = spec.g((sum - values[i]) / (dn - 1.0));
        return detail::from_leave_one_out(spec.g(sum / dn), t_loo);
    }
    const WeightFunction& w = f.weight();
    const EmpiricalMeasure m = make_empirical(data);
    const std::vector<double> x = m.sorted_values();
    const std::vector<double> full = w.cell_masses(n);
    const std::vector<double> u = w.cell_masses(n - 1);
    double t_full = 0.0;
    for (std::size_t j = 0; j < n; ++j) t_full += x[j] * full[j];
    // Dropping sorted position r: T = sum_{k<r} x[k] u[k] + sum_{k>=r} x[k+1] u[k].
    std::vector<double> prefix(n, 0.0);
    std::vector<double> suffix(n, 0.0);
    for (std::size_t k = 1; k < n; ++k) prefix[k] = prefix[k - 1] + x[k - 1] * u[k - 1];
    for (std::size_t k = n - 1; k-- > 0;) suffix[k] = suffix[k + 1] + x[k + 1] * u[k];
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t r = m.sorted_position(i);
        t_loo[i] = prefix[r] + suffix[r];
    }
    return detail::from_leave_one_out(t_full, t_loo);
}

/// (1/(n-1)) sum (v_i - mean)^2, two-pass.
inline double unbiased_variance(std::span<const double> v) {
    const double dn = static_cast<double>(v.size());
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / dn;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return ss / (dn - 1.0);
}

/// Jackknife variance estimator, from the modified pseudovalues.
inline double v_jack(const PseudovalueSet& ps) {
    if (ps.n < 2) throw input_error("jackknife requires at least two observations");
    return unbiased_variance(ps.q_prime);
}

/// Same estimator computed from the unmodified pseudovalues.
inline double v_jack_from_q(const PseudovalueSet& ps) {
    if (ps.n < 2) throw input_error("jackknife requires at least two observations");
    return unbiased_variance(ps.q);
}

/// Infinitesimal jackknife (1/n) sum phi_{eps_n}(x_i)^2.
inline double infinitesimal_jackknife(const Functional& f, const Sample& data) {
    const std::vector<double> phi = influence_at_data(f, data);
    double s = 0.0;
    for (double v : phi) s += v * v;
    return s / static_cast<double>(phi.size());
}

/// Trimmed-L infinitesimal jackknife as the double sum
/// sum_j sum_k l(j/n) l(k/n) [min(j,k)/n - jk/n^2] D_j D_k with D_j = x_(j+1) - x_(j). O(n^2).
inline double infinitesimal_jackknife_double_sum(const WeightFunction& w, const Sample& data) {
    const EmpiricalMeasure m = make_empirical(data);
    const std::size_t n = m.size();
    const double dn = static_cast<double>(n);
    std::vector<double> a(n, 0.0);
    for (std::size_t j = 1; j < n; ++j) a[j] = w(static_cast<double>(j) / dn) * (m[j] - m[j - 1]);
    double total = 0.0;
    for (std::size_t j = 1; j < n; ++j) {
        if (a[j] == 0.0) continue;
        const double pj = static_cast<double>(j) / dn;
        double row = 0.0;
        for (std::size_t k = 1; k < n; ++k) {
            const double pk = static_cast<double>(k) / dn;
            row += a[k] * (std::min(pj, pk) - pj * pk);
        }
        total += a[j] * row;
    }
    return total;
}

inline VarianceEstimates variance_estimates(const Functional& f, const Sample& data) {
    return {v_jack(pseudovalues(f, data)), infinitesimal_jackknife(f, data), data.size()};
}

inline double truncated_square(double x, double bound) { return std::min(x * x, bound); }

/// (1/n) sum_j (sq(Q'_j) - mean sq)^2 with sq(x) = min(x^2, bound).
inline double tau2(const PseudovalueSet& ps, double bound = std::numeric_limits<double>::infinity()) {
    if (bound < 0.0) throw input_error("truncation bound must be nonnegative");
    std::vector<double> sq(ps.q_prime.size());
    std::transform(ps.q_prime.begin(), ps.q_prime.end(), sq.begin(),
                   [bound](double x) { return truncated_square(x, bound); });
    const double dn = static_cast<double>(sq.size());
    const double mean = std::accumulate(sq.begin(), sq.end(), 0.0) / dn;
    double ss = 0.0;
    for (double v : sq) ss += (v - mean) * (v - mean);
    return ss / dn;
}

/// Stream tag for bootstrap rounds in the child-seed derivation.
inline constexpr std::uint64_t bootstrap_stream = 0x626f6f74; // "boot"

/// Bootstrap of the pseudovalues: round r resamples n of them with replacement
/// (generator seeded from (seed, r)) and returns n^{-1/2} sum (sq(Q*_i) - sq(Q'_i)).
inline std::vector<double> pseudovalue_bootstrap(const PseudovalueSet& ps, double bound, std::uint64_t seed,
                                                 std::size_t b_reps) {
    if (b_reps < 1) throw input_error("bootstrap requires at least one round");
    if (bound < 0.0) throw input_error("truncation bound must be nonnegative");
    const std::size_t n = ps.q_prime.size();
    std::vector<double> sq(n);
    std::transform(ps.q_prime.begin(), ps.q_prime.end(), sq.begin(),
                   [bound](double x) { return truncated_square(x, bound); });
    const double base = std::accumulate(sq.begin(), sq.end(), 0.0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    std::vector<double> out(b_reps);
    for (std::size_t r = 0; r < b_reps; ++r) {
        Rng rng(derive_seed(seed, 0, r, bootstrap_stream));
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += sq[rng.index(n)];
        out[r] = scale * (s - base);
    }
    return out;
}

} // namespace jackvar
