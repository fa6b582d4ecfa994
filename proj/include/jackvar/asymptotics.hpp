#pragma once

// Limit-theory oracles: asymptotic variance of the jackknife variance estimator for
// smooth functions of the mean and trimmed L-functionals, Var phi_p^2, and the
// pseudovalue pushforward check.
//
// For trimmed L-functionals the limit of sqrt(n)(v_jack - sigma^2) is Y + Z with
//   Y = int int l(P(y)) {B(y^z) - P(y)B(z) - B(y)P(z)} l(P(z)) dy dz
//   Z = 2 int int l'(P(y)) B(y) Gamma(y,z) l(P(z)) dy dz
// where B is the Brownian bridge with covariance Gamma(s,t) = P(s)^P(t) - P(s)P(t).
// Both are linear in B, so after discretizing on a grid t_1 < ... < t_M they become
// c . B(t) and Var = c' Gamma c.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "jackvar/errors.hpp"
#include "jackvar/functionals.hpp"
#include "jackvar/jackknife.hpp"
#include "jackvar/measures.hpp"
#include "jackvar/population.hpp"
#include "jackvar/random.hpp"

namespace jackvar {

/// a^2 (mu4 - mu2^2) + 2ab mu3 + b^2 mu2 with a = g'(mean)^2, b = 2 g'(mean) g''(mean).
inline double avar_vjack_smooth_mean(const SmoothMeanSpec& spec, const Population& p) {
    if (!spec.g_second) throw input_error("second derivative required");
    const MomentVector mv = p.moments();
    const double d1 = spec.g_prime(mv.mean);
    const double d2 = (*spec.g_second)(mv.mean);
    const double a = d1 * d1;
    const double b = 2.0 * d1 * d2;
    return a * a * (mv.mu4 - mv.mu2 * mv.mu2) + 2.0 * a * b * mv.mu3 + b * b * mv.mu2;
}

/// Var phi_p^2 = g'(mean)^4 (mu4 - mu2^2).
inline double var_phi2_smooth_mean(const SmoothMeanSpec& spec, const Population& p) {
    const MomentVector mv = p.moments();
    const double d1 = spec.g_prime(mv.mean);
    return d1 * d1 * d1 * d1 * (mv.mu4 - mv.mu2 * mv.mu2);
}

/// Grid of bridge nodes, uniformly spaced in probability over [alpha - pad, 1 - alpha + pad]
/// (pad defaults to alpha/2).
struct BridgeGrid {
    std::vector<double> nodes;
    std::vector<double> cdf_values;
    Eigen::MatrixXd covariance;

    std::size_t size() const noexcept { return nodes.size(); }
};

inline BridgeGrid make_bridge_grid(const Population& p, const WeightFunction& w, std::size_t m_nodes,
                                   std::optional<double> padding = std::nullopt) {
    if (m_nodes < 16) throw input_error("bridge grid needs at least 16 nodes");
    const double pad = padding.value_or(0.5 * w.alpha());
    if (!(pad >= 0.0 && pad < w.alpha())) throw input_error("bridge grid padding must lie in [0, alpha)");
    BridgeGrid g;
    g.nodes.resize(m_nodes);
    g.cdf_values.resize(m_nodes);
    const double start = w.alpha() - pad;
    const double span = 1.0 - 2.0 * start;
    for (std::size_t m = 0; m < m_nodes; ++m) {
        const double u = start + span * static_cast<double>(m) / static_cast<double>(m_nodes - 1);
        g.cdf_values[m] = u;
        g.nodes[m] = p.quantile(u);
    }
    g.covariance.resize(static_cast<Eigen::Index>(m_nodes), static_cast<Eigen::Index>(m_nodes));
    for (std::size_t i = 0; i < m_nodes; ++i) {
        for (std::size_t k = 0; k < m_nodes; ++k) {
            const double a = g.cdf_values[i];
            const double b = g.cdf_values[k];
            g.covariance(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = std::min(a, b) - a * b;
        }
    }
    return g;
}

/// Smallest eigenvalue of the symmetrized grid covariance.
inline double smallest_covariance_eigenvalue(const BridgeGrid& g) {
    const Eigen::MatrixXd sym = 0.5 * (g.covariance + g.covariance.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

/// Whether Gamma + tol I admits a Cholesky factorization, i.e. the smallest
/// eigenvalue of the grid covariance is at least -tol. Cheaper than the eigensolver at large M.
inline bool covariance_is_psd(const BridgeGrid& g, double tol = 1e-8) {
    Eigen::MatrixXd shifted = 0.5 * (g.covariance + g.covariance.transpose());
    shifted.diagonal().array() += tol;
    return Eigen::LLT<Eigen::MatrixXd>(shifted).info() == Eigen::Success;
}

/// Per-node coefficients of Y and Z as linear functionals of B(t_1..t_M).
struct BridgeCoefficients {
    Eigen::VectorXd y;
    Eigen::VectorXd z;
};

inline BridgeCoefficients bridge_coefficients(const WeightFunction& w, const BridgeGrid& g) {
    const std::size_t M = g.size();
    std::vector<double> omega(M);
    for (std::size_t m = 0; m < M; ++m) {
        const double left = m == 0 ? g.nodes[0] : g.nodes[m - 1];
        const double right = m + 1 == M ? g.nodes[M - 1] : g.nodes[m + 1];
        omega[m] = 0.5 * (right - left);
    }
    std::vector<double> a(M);
    double pi = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        a[m] = omega[m] * w(g.cdf_values[m]);
        pi += a[m] * g.cdf_values[m];
    }
    BridgeCoefficients c{Eigen::VectorXd::Zero(static_cast<Eigen::Index>(M)),
                         Eigen::VectorXd::Zero(static_cast<Eigen::Index>(M))};
    // Y: the B(y^z) term routes the (j,k) weight to node min(j,k).
    double above = 0.0; // sum_{k>j} a_k
    for (std::size_t j = M; j-- > 0;) {
        c.y(static_cast<Eigen::Index>(j)) = a[j] * (a[j] + 2.0 * above - 2.0 * pi);
        above += a[j];
    }
    // Z: 2 omega_m l'(u_m) sum_k Gamma(t_m, t_k) a_k.
    double below_ua = 0.0; // sum_{k<=m} u_k a_k
    double total_a = above;
    double upto_a = 0.0;
    for (std::size_t m = 0; m < M; ++m) {
        const double u = g.cdf_values[m];
        below_ua += u * a[m];
        upto_a += a[m];
        const double gm = below_ua + u * (total_a - upto_a) - u * pi;
        c.z(static_cast<Eigen::Index>(m)) = 2.0 * omega[m] * w.derivative(u) * gm;
    }
    return c;
}

struct BridgeVariances {
    double var_y = 0.0;
    double var_z = 0.0;
    double cov_yz = 0.0;
    double var_y_plus_z = 0.0;
};

inline BridgeVariances bridge_variances(const WeightFunction& w, const BridgeGrid& g) {
    const BridgeCoefficients c = bridge_coefficients(w, g);
    const Eigen::VectorXd gy = g.covariance * c.y;
    const Eigen::VectorXd gz = g.covariance * c.z;
    BridgeVariances v;
    v.var_y = c.y.dot(gy);
    v.var_z = c.z.dot(gz);
    v.cov_yz = c.y.dot(gz);
    v.var_y_plus_z = v.var_y + 2.0 * v.cov_yz + v.var_z;
    return v;
}

/// Var(Y + Z) on a given grid.
inline double avar_vjack_trimmed_L(const Population&, const WeightFunction& w, const BridgeGrid& grid) {
    return bridge_variances(w, grid).var_y_plus_z;
}

struct BridgeRefinement {
    BridgeVariances value;
    std::size_t nodes = 0;
    std::vector<std::size_t> node_history;
    std::vector<double> history; // Var(Y+Z) per level
};

/// Doubles the grid (M = 2^k + 1 nodes) until successive Var(Y+Z) agree to rel_tol.
inline BridgeRefinement refine_bridge(const Population& p, const WeightFunction& w, double rel_tol = 1e-4,
                                      std::size_t start_nodes = 33, std::size_t max_nodes = 4097) {
    BridgeRefinement out;
    std::size_t M = start_nodes;
    BridgeVariances prev = bridge_variances(w, make_bridge_grid(p, w, M));
    out.node_history.push_back(M);
    out.history.push_back(prev.var_y_plus_z);
    while (true) {
        M = 2 * (M - 1) + 1;
        const BridgeVariances cur = bridge_variances(w, make_bridge_grid(p, w, M));
        out.node_history.push_back(M);
        out.history.push_back(cur.var_y_plus_z);
        const double diff = std::abs(cur.var_y_plus_z - prev.var_y_plus_z);
        if (diff <= rel_tol * std::abs(cur.var_y_plus_z) || (cur.var_y_plus_z == 0.0 && prev.var_y_plus_z == 0.0)) {
            out.value = cur;
            out.nodes = M;
            return out;
        }
        if (M >= max_nodes) {
            throw numerical_error("bridge variance did not converge at M = " + std::to_string(M) +
                                  ": last values " + std::to_string(prev.var_y_plus_z) + " and " +
                                  std::to_string(cur.var_y_plus_z));
        }
        prev = cur;
    }
}

/// Var(Y + Z), refined.
inline double avar_vjack_trimmed_L(const Population& p, const WeightFunction& w) {
    return refine_bridge(p, w).value.var_y_plus_z;
}

struct PathSimulation {
    double var_y = 0.0;
    double var_y_plus_z = 0.0;
    std::size_t paths = 0;
};

/// Sample variances of Y and Y + Z over simulated bridge paths B = S xi, where S is
/// the symmetric square root of the grid covariance and xi is standard normal.
inline PathSimulation simulate_bridge_paths(const WeightFunction& w, const BridgeGrid& g, std::size_t paths,
                                            std::uint64_t seed, std::size_t batch = 4096) {
    const auto M = static_cast<Eigen::Index>(g.size());
    const Eigen::MatrixXd sym = 0.5 * (g.covariance + g.covariance.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
    const Eigen::VectorXd root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    const Eigen::MatrixXd S = es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
    const BridgeCoefficients c = bridge_coefficients(w, g);

    std::vector<double> ys;
    std::vector<double> yzs;
    ys.reserve(paths);
    yzs.reserve(paths);
    for (std::size_t done = 0, b = 0; done < paths; ++b) {
        const auto cols = static_cast<Eigen::Index>(std::min(batch, paths - done));
        Rng rng(derive_seed(seed, g.size(), b, 0x62726467)); // "brdg"
        Eigen::MatrixXd xi(M, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < M; ++i) xi(i, j) = rng.normal();
        const Eigen::MatrixXd B = S * xi;
        const Eigen::RowVectorXd y = c.y.transpose() * B;
        const Eigen::RowVectorXd z = c.z.transpose() * B;
        for (Eigen::Index j = 0; j < cols; ++j) {
            ys.push_back(y(j));
            yzs.push_back(y(j) + z(j));
        }
        done += static_cast<std::size_t>(cols);
    }
    return {unbiased_variance(ys), unbiased_variance(yzs), paths};
}

struct InfluenceMoments {
    double second = 0.0;
    double third = 0.0;
    double fourth = 0.0;
    double var_phi2() const { return fourth - second * second; }
};

inline InfluenceMoments influence_moments_trimmed_L(const Population& p, const WeightFunction& w) {
    const PopulationInfluence phi(w, p);
    return {expected_influence_power(phi, p, 2, 1e-10), expected_influence_power(phi, p, 3, 1e-10),
            expected_influence_power(phi, p, 4, 1e-10)};
}

/// E phi_p^4 - (E phi_p^2)^2 by quadrature against the density.
inline double var_phi2_trimmed_L(const Population& p, const WeightFunction& w) {
    return influence_moments_trimmed_L(p, w).var_phi2();
}

/// KS distance between the empirical law of the modified pseudovalues and that of
/// {phi_p(x_i)}.
inline double pushforward_ks(const PseudovalueSet& ps, const Functional& f, const Population& p,
                             const Sample& data) {
    std::vector<double> phi(data.size());
    if (f.is_trimmed_l()) {
        const PopulationInfluence infl(f.weight(), p);
        for (std::size_t i = 0; i < data.size(); ++i) phi[i] = infl(data[i]);
    } else {
        const double mbar = p.mean();
        const double slope = f.smooth_mean().g_prime(mbar);
        for (std::size_t i = 0; i < data.size(); ++i) phi[i] = slope * (data[i] - mbar);
    }
    return ks_distance(make_empirical(ps.q_prime), make_empirical(std::move(phi)));
}

} // namespace jackvar
