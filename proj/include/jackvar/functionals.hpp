#pragma once

// Plug-in functionals: smooth functions of the mean and trimmed L-functionals
// L(p) = int_0^1 P^{-1}(s) l(s) ds, with evaluation on empirical measures,
// influence functions (empirical and population), and population variances.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "jackvar/errors.hpp"
#include "jackvar/measures.hpp"
#include "jackvar/population.hpp"
#include "jackvar/quadrature.hpp"

namespace jackvar {

using RealFn = std::function<double(double)>;

/// T(m) = g(mean of m).
struct SmoothMeanSpec {
    RealFn g;
    RealFn g_prime;
    std::optional<RealFn> g_second;
    double holder_order = 1.0; // Hoelder order of g'
    std::string label;
};

/// Weight l on (0,1), supported on [alpha, 1 - alpha].
class WeightFunction {
public:
    WeightFunction(double alpha, RealFn ell, RealFn ell_prime, std::optional<RealFn> antiderivative,
                   double holder_order, std::string label, double quad_tol = 1e-12)
        : alpha_(alpha), ell_(std::move(ell)), ell_prime_(std::move(ell_prime)),
          antiderivative_(std::move(antiderivative)), holder_order_(holder_order),
          label_(std::move(label)), quad_tol_(quad_tol) {
        if (!(alpha_ > 0.0 && alpha_ < 0.5)) throw input_error("weight alpha must lie in (0, 1/2)");
        if (!(holder_order_ > 0.0 && holder_order_ <= 1.0))
            throw input_error("Hoelder order must lie in (0, 1]");
    }

    double alpha() const noexcept { return alpha_; }
    double holder_order() const noexcept { return holder_order_; }
    const std::string& label() const noexcept { return label_; }
    bool has_exact_integral() const noexcept { return antiderivative_.has_value(); }
    double quad_tol() const noexcept { return quad_tol_; }
    void set_quad_tol(double tol) { quad_tol_ = tol; }

    double operator()(double s) const {
        if (s <= alpha_ || s >= 1.0 - alpha_) return 0.0;
        return ell_(s);
    }

    double derivative(double s) const {
        if (s <= alpha_ || s >= 1.0 - alpha_) return 0.0;
        return ell_prime_(s);
    }

    /// W(s) = int_0^s l.
    double cumulative(double s) const {
        s = std::clamp(s, alpha_, 1.0 - alpha_);
        if (antiderivative_) return (*antiderivative_)(s) - (*antiderivative_)(alpha_);
        return quad::integrate([this](double u) { return (*this)(u); }, alpha_, s, quad_tol_,
                               "weight integral");
    }

    /// int_a^b l.
    double integral(double a, double b) const {
        if (antiderivative_) return cumulative(b) - cumulative(a);
        const double lo = std::clamp(a, alpha_, 1.0 - alpha_);
        const double hi = std::clamp(b, alpha_, 1.0 - alpha_);
        if (hi <= lo) return 0.0;
        return quad::integrate([this](double u) { return (*this)(u); }, lo, hi, quad_tol_,
                               "weight integral");
    }

    double total() const { return integral(0.0, 1.0); }

    /// W(j/n) - W((j-1)/n) for j = 1..n.
    std::vector<double> cell_masses(std::size_t n) const {
        std::vector<double> out(n);
        const double dn = static_cast<double>(n);
        if (antiderivative_) {
            double prev = cumulative(0.0);
            for (std::size_t j = 1; j <= n; ++j) {
                const double cur = cumulative(static_cast<double>(j) / dn);
                out[j - 1] = cur - prev;
                prev = cur;
            }
        } else {
            for (std::size_t j = 1; j <= n; ++j)
                out[j - 1] = integral(static_cast<double>(j - 1) / dn, static_cast<double>(j) / dn);
        }
        return out;
    }

private:
    double alpha_;
    RealFn ell_;
    RealFn ell_prime_;
    std::optional<RealFn> antiderivative_;
    double holder_order_;
    std::string label_;
    double quad_tol_;
};

/// A plug-in functional: exactly one of the two supported families.
struct Functional {
    std::variant<SmoothMeanSpec, WeightFunction> spec;
    std::string key;

    bool is_trimmed_l() const noexcept { return std::holds_alternative<WeightFunction>(spec); }
    const WeightFunction& weight() const { return std::get<WeightFunction>(spec); }
    const SmoothMeanSpec& smooth_mean() const { return std::get<SmoothMeanSpec>(spec); }
};

// ---------------------------------------------------------------------------
// Built-ins

/// Normalized raised cosine on [alpha, 1 - alpha]; l and l' vanish at both ends.
inline WeightFunction raised_cosine_weight(double alpha) {
    if (!(alpha > 0.0 && alpha < 0.5)) throw input_error("weight alpha must lie in (0, 1/2)");
    const double w = 1.0 - 2.0 * alpha;
    const double k = 2.0 * std::numbers::pi / w;
    auto ell = [w, k](double s) { return (1.0 + std::cos(k * (s - 0.5))) / w; };
    auto ell_prime = [w, k](double s) { return -k * std::sin(k * (s - 0.5)) / w; };
    auto anti = [alpha, w, k](double s) {
        return (s - alpha) / w + std::sin(k * (s - 0.5)) / (2.0 * std::numbers::pi);
    };
    return WeightFunction(alpha, ell, ell_prime, RealFn(anti), 1.0,
                          "raised_cosine:alpha=" + std::to_string(alpha));
}

/// l == 0; degenerate weight used for sanity checks.
inline WeightFunction zero_weight(double alpha) {
    auto zero = [](double) { return 0.0; };
    return WeightFunction(alpha, zero, zero, RealFn(zero), 1.0, "zero:alpha=" + std::to_string(alpha));
}

inline WeightFunction builtin_weight(std::string_view name, double alpha) {
    if (name == "raised_cosine") return raised_cosine_weight(alpha);
    if (name == "zero") return zero_weight(alpha);
    throw input_error("unknown weight '" + std::string(name) + "'");
}

inline SmoothMeanSpec mean_spec() {
    return {[](double x) { return x; }, [](double) { return 1.0; }, RealFn([](double) { return 0.0; }),
            1.0, "mean"};
}

inline SmoothMeanSpec square_of_mean_spec() {
    return {[](double x) { return x * x; }, [](double x) { return 2.0 * x; },
            RealFn([](double) { return 2.0; }), 1.0, "square_of_mean"};
}

inline SmoothMeanSpec exp_of_mean_spec() {
    return {[](double x) { return std::exp(x); }, [](double x) { return std::exp(x); },
            RealFn([](double x) { return std::exp(x); }), 1.0, "exp_of_mean"};
}

namespace detail {

inline double parse_double(std::string_view text, std::string_view context) {
    double v = 0.0;
    if (!text.empty() && text.front() == '+') text.remove_prefix(1);
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v))
        throw input_error("cannot parse '" + std::string(text) + "' as a number in '" +
                          std::string(context) + "'");
    return v;
}

} // namespace detail

/// Resolves "mean", "square_of_mean", "exp_of_mean", "trimmed_l:<weight>:alpha=<x>".
inline Functional parse_functional(std::string_view key) {
    if (key == "mean") return {mean_spec(), std::string(key)};
    if (key == "square_of_mean") return {square_of_mean_spec(), std::string(key)};
    if (key == "exp_of_mean") return {exp_of_mean_spec(), std::string(key)};
    constexpr std::string_view prefix = "trimmed_l:";
    if (key.starts_with(prefix)) {
        std::string_view rest = key.substr(prefix.size());
        const auto colon = rest.find(':');
        if (colon == std::string_view::npos) throw input_error("functional key '" + std::string(key) + "' lacks alpha");
        const std::string_view name = rest.substr(0, colon);
        std::string_view param = rest.substr(colon + 1);
        if (!param.starts_with("alpha=")) throw input_error("functional key '" + std::string(key) + "' lacks alpha");
        const double alpha = detail::parse_double(param.substr(6), key);
        return {builtin_weight(name, alpha), std::string(key)};
    }
    throw input_error("unknown functional '" + std::string(key) + "'");
}

/// Largest |central difference - derivative| / max(1, |derivative|) over the points.
inline double derivative_mismatch(const RealFn& f, const RealFn& df, std::span<const double> points,
                                  double step = 1e-5) {
    double worst = 0.0;
    for (double x : points) {
        const double fd = (f(x + step) - f(x - step)) / (2.0 * step);
        const double d = df(x);
        worst = std::max(worst, std::abs(fd - d) / std::max(1.0, std::abs(d)));
    }
    return worst;
}

// ---------------------------------------------------------------------------
// Evaluation on empirical measures

/// Plug-in value of a trimmed L-functional: sum_j x_(j) [W(j/n) - W((j-1)/n)].
inline double eval_trimmed_l(const WeightFunction& w, const EmpiricalMeasure& m) {
    const std::vector<double> cells = w.cell_masses(m.size());
    double sum = 0.0;
    for (std::size_t j = 0; j < m.size(); ++j) sum += m[j] * cells[j];
    return sum;
}

inline double eval_functional(const Functional& f, const EmpiricalMeasure& m) {
    if (f.is_trimmed_l()) return eval_trimmed_l(f.weight(), m);
    return f.smooth_mean().g(m.mean());
}

namespace detail {

/// Piecewise-exact pieces of the empirical trimmed-L influence
/// phi(x) = C - int_x^inf l(P_n(y)) dy.
struct EmpiricalTrimmedInfluence {
    std::vector<double> sorted;
    std::vector<double> gap_weight; // l(j/n) for gap j between sorted[j-1] and sorted[j]
    std::vector<double> suffix;     // suffix[k] = sum_{j>k} l(j/n) * gap_j
    double center = 0.0;

    EmpiricalTrimmedInfluence(const WeightFunction& w, const EmpiricalMeasure& m)
        : sorted(m.sorted_values()) {
        const std::size_t n = sorted.size();
        const double dn = static_cast<double>(n);
        gap_weight.assign(n, 0.0);
        suffix.assign(n, 0.0);
        for (std::size_t j = 1; j < n; ++j) gap_weight[j] = w(static_cast<double>(j) / dn);
        for (std::size_t j = n; j-- > 1;) {
            const double contrib = gap_weight[j] * (sorted[j] - sorted[j - 1]);
            suffix[j - 1] = suffix[j] + contrib;
            center += contrib * static_cast<double>(j) / dn;
        }
    }

    double operator()(double x) const {
        const std::size_t n = sorted.size();
        if (x < sorted.front()) return center - suffix[0];
        if (x >= sorted.back()) return center;
        const auto k = static_cast<std::size_t>(std::upper_bound(sorted.begin(), sorted.end(), x) - sorted.begin());
        // x in [sorted[k-1], sorted[k]), 1 <= k <= n-1
        (void)n;
        return center - (gap_weight[k] * (sorted[k] - x) + suffix[k]);
    }

    double at_sorted(std::size_t k) const { return center - suffix[k]; }
};

} // namespace detail

/// Influence function of f at the empirical measure m, evaluated at x.
inline double influence(const Functional& f, const EmpiricalMeasure& m, double x) {
    if (f.is_trimmed_l()) return detail::EmpiricalTrimmedInfluence(f.weight(), m)(x);
    const double mbar = m.mean();
    return f.smooth_mean().g_prime(mbar) * (x - mbar);
}

/// phi_{eps_n}(x_i) for every observation, in original order. O(n log n).
inline std::vector<double> influence_at_data(const Functional& f, const Sample& data) {
    const EmpiricalMeasure m = make_empirical(data);
    std::vector<double> out(data.size());
    if (f.is_trimmed_l()) {
        const detail::EmpiricalTrimmedInfluence phi(f.weight(), m);
        for (std::size_t i = 0; i < data.size(); ++i) out[i] = phi.at_sorted(m.sorted_position(i));
    } else {
        const double mbar = m.mean();
        const double slope = f.smooth_mean().g_prime(mbar);
        for (std::size_t i = 0; i < data.size(); ++i) out[i] = slope * (data[i] - mbar);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Population quantities

/// Population influence of a trimmed L-functional,
/// phi_p(x) = int l(P(y)) P(y) dy - int_x^inf l(P(y)) dy.
///
/// The tail integral is tabulated on a uniform grid over the support of l(P(.)),
/// with an adaptive remainder inside the cell containing x.
class PopulationInfluence {
public:
    PopulationInfluence(const WeightFunction& w, const Population& p, std::size_t cells = 256,
                        double tol = 1e-10)
        : w_(w), p_(p), tol_(tol) {
        lo_ = p.quantile(w.alpha());
        hi_ = p.quantile(1.0 - w.alpha());
        h_ = (hi_ - lo_) / static_cast<double>(cells);
        suffix_.assign(cells + 1, 0.0);
        const double cell_tol = tol * 1e-2 / static_cast<double>(cells);
        for (std::size_t j = cells; j-- > 0;) {
            const double a = node(j);
            const double b = node(j + 1);
            suffix_[j] = suffix_[j + 1] + quad::integrate([this](double y) { return a_(y); }, a, b, cell_tol,
                                                          "population influence");
            center_ += quad::integrate([this](double y) { return a_(y) * p_.cdf(y); }, a, b, cell_tol,
                                       "population influence");
        }
    }

    double operator()(double x) const {
        if (x <= lo_) return center_ - suffix_.front();
        if (x >= hi_) return center_;
        auto j = static_cast<std::size_t>((x - lo_) / h_);
        j = std::min(j, suffix_.size() - 2);
        const double rem = quad::integrate([this](double y) { return a_(y); }, x, node(j + 1),
                                           tol_ * 1e-1, "population influence");
        return center_ - (rem + suffix_[j + 1]);
    }

    /// Value for x below the trimmed range.
    double lower_tail() const { return center_ - suffix_.front(); }
    /// Value for x above the trimmed range.
    double upper_tail() const { return center_; }
    double support_lo() const { return lo_; }
    double support_hi() const { return hi_; }

private:
    double a_(double y) const { return w_(p_.cdf(y)); }
    double node(std::size_t j) const { return j + 1 == suffix_.size() ? hi_ : lo_ + h_ * static_cast<double>(j); }

    WeightFunction w_;
    Population p_;
    double tol_;
    double lo_ = 0.0;
    double hi_ = 0.0;
    double h_ = 0.0;
    double center_ = 0.0;
    std::vector<double> suffix_;
};

inline double influence(const Functional& f, const Population& p, double x) {
    if (f.is_trimmed_l()) return PopulationInfluence(f.weight(), p)(x);
    const double mbar = p.mean();
    return f.smooth_mean().g_prime(mbar) * (x - mbar);
}

/// T(p).
inline double population_value(const Functional& f, const Population& p) {
    if (!f.is_trimmed_l()) return f.smooth_mean().g(p.mean());
    const WeightFunction& w = f.weight();
    return quad::integrate([&](double s) { return p.quantile(s) * w(s); }, w.alpha(), 1.0 - w.alpha(), 1e-11,
                           "population L-functional");
}

/// E_p phi_p^k for a trimmed L-functional, by single-axis quadrature against the density.
inline double expected_influence_power(const PopulationInfluence& phi, const Population& p, int k,
                                       double abs_tol = 1e-10) {
    const double lo = phi.support_lo();
    const double hi = phi.support_hi();
    const double tails = std::pow(phi.lower_tail(), k) * p.cdf(lo) + std::pow(phi.upper_tail(), k) * (1.0 - p.cdf(hi));
    const double body = quad::integrate([&](double x) { return std::pow(phi(x), k) * p.density(x); }, lo, hi,
                                        abs_tol, "influence moment");
    return tails + body;
}

struct Sigma2Trace {
    double value = 0.0;
    std::size_t nodes_per_axis = 0;
    double previous = 0.0;
};

/// Asymptotic variance sigma^2 of sqrt(n)(T_n - T(p)).
///
/// Trimmed L: int int l(P(y)) Gamma(y,z) l(P(z)) dy dz with Gamma = P(y)^P(z) - P(y)P(z),
/// by iterated composite Simpson on a uniform grid whose inner integrals are split at
/// the diagonal (where Gamma has its kink). Refined by doubling until successive values
/// agree to `rel_tol`.
inline Sigma2Trace sigma2_population_trace(const Functional& f, const Population& p, double rel_tol = 1e-8,
                                           std::size_t max_nodes = std::size_t{1} << 14) {
    if (!f.is_trimmed_l()) {
        const double d = f.smooth_mean().g_prime(p.mean());
        return {d * d * p.moments().mu2, 0, d * d * p.moments().mu2};
    }
    const WeightFunction& w = f.weight();
    const double lo = p.quantile(w.alpha());
    const double hi = p.quantile(1.0 - w.alpha());

    auto level = [&](std::size_t intervals) {
        const double h = (hi - lo) / static_cast<double>(intervals);
        std::vector<double> a(intervals + 1);
        std::vector<double> P(intervals + 1);
        for (std::size_t i = 0; i <= intervals; ++i) {
            const double y = i == intervals ? hi : lo + h * static_cast<double>(i);
            P[i] = p.cdf(y);
            a[i] = w(P[i]);
        }
        const std::size_t coarse = intervals / 2;
        std::vector<double> left(coarse + 1, 0.0);  // int_lo^y a P
        std::vector<double> right(coarse + 1, 0.0); // int_y^hi a (1-P)
        for (std::size_t m = 1; m <= coarse; ++m) {
            const std::size_t i = 2 * m;
            left[m] = left[m - 1] + h / 3.0 * (a[i - 2] * P[i - 2] + 4.0 * a[i - 1] * P[i - 1] + a[i] * P[i]);
        }
        for (std::size_t m = coarse; m-- > 0;) {
            const std::size_t i = 2 * m;
            right[m] = right[m + 1] + h / 3.0 * (a[i] * (1.0 - P[i]) + 4.0 * a[i + 1] * (1.0 - P[i + 1]) +
                                                 a[i + 2] * (1.0 - P[i + 2]));
        }
        double sum = 0.0;
        for (std::size_t m = 0; m <= coarse; ++m) {
            const std::size_t i = 2 * m;
            const double inner = (1.0 - P[i]) * left[m] + P[i] * right[m];
            sum += quad::simpson_weight(m, coarse, 2.0 * h) * a[i] * inner;
        }
        return sum;
    };

    std::size_t n = 16;
    double prev = level(n);
    while (true) {
        n *= 2;
        const double cur = level(n);
        if (std::abs(cur - prev) <= rel_tol * std::abs(cur) || (cur == 0.0 && prev == 0.0))
            return {cur, n + 1, prev};
        if (n >= max_nodes) {
            throw numerical_error("sigma2 quadrature did not converge: last estimates " + std::to_string(prev) +
                                  " and " + std::to_string(cur));
        }
        prev = cur;
    }
}

inline double sigma2_population(const Functional& f, const Population& p) {
    return sigma2_population_trace(f, p).value;
}

/// sup_x |phi_p(x)| for a trimmed L-functional.
inline double influence_sup_norm(const Functional& f, const Population& p, std::size_t grid = 4096) {
    if (!f.is_trimmed_l()) throw input_error("influence of a smooth function of the mean is unbounded");
    const WeightFunction& w = f.weight();
    const PopulationInfluence phi(w, p);
    double best = std::max(std::abs(phi.lower_tail()), std::abs(phi.upper_tail()));
    const double lo = p.quantile(0.5 * w.alpha());
    const double hi = p.quantile(1.0 - 0.5 * w.alpha());
    const double h = (hi - lo) / static_cast<double>(grid - 1);
    std::size_t arg = 0;
    double grid_best = -1.0;
    for (std::size_t k = 0; k < grid; ++k) {
        const double v = std::abs(phi(lo + h * static_cast<double>(k)));
        if (v > grid_best) {
            grid_best = v;
            arg = k;
        }
    }
    best = std::max(best, grid_best);
    // golden-section refinement of |phi| around the best node
    double a = lo + h * static_cast<double>(arg == 0 ? 0 : arg - 1);
    double b = lo + h * static_cast<double>(std::min(arg + 1, grid - 1));
    const double r = (std::sqrt(5.0) - 1.0) / 2.0;
    double c = b - r * (b - a);
    double d = a + r * (b - a);
    double fc = std::abs(phi(c));
    double fd = std::abs(phi(d));
    for (int it = 0; it < 60 && b - a > 1e-14 * (1.0 + std::abs(a)); ++it) {
        if (fc > fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = std::abs(phi(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = std::abs(phi(d));
        }
    }
    return std::max({best, fc, fd});
}

} // namespace jackvar
