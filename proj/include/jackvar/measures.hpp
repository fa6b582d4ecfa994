#pragma once

// Empirical measures on the real line: construction from data, step CDF and
// quantile evaluation, leave-one-out views, and sup-norm (KS) distances.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <istream>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <charconv>
#include <utility>
#include <vector>

#include "jackvar/errors.hpp"

namespace jackvar {

/// Observations in their original order. Always non-empty and finite.
class Sample {
public:
    explicit Sample(std::vector<double> values) : values_(std::move(values)) {
        if (values_.empty()) throw input_error("empty sample");
        for (double v : values_) {
            if (!std::isfinite(v)) throw input_error("non-finite datum");
        }
    }

    std::size_t size() const noexcept { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    std::span<const double> values() const noexcept { return values_; }

private:
    std::vector<double> values_;
};

namespace detail {

struct SortedData {
    std::vector<double> sorted;
    std::vector<std::size_t> position_of; // original index -> sorted position
};

} // namespace detail

/// Uniform probability measure on the points of a sample.
///
/// A leave-one-out measure is a view onto the same sorted array with one
/// sorted position excluded; no data is copied.
class EmpiricalMeasure {
public:
    std::size_t size() const noexcept { return base_->sorted.size() - (excluded_ ? 1 : 0); }

    /// k-th smallest point (0-based) of this measure.
    double operator[](std::size_t k) const {
        if (excluded_ && k >= *excluded_) ++k;
        return base_->sorted[k];
    }

    bool is_leave_one_out() const noexcept { return excluded_.has_value(); }

    /// Sorted position (in the full sample) of original observation i.
    std::size_t sorted_position(std::size_t original_index) const {
        return base_->position_of.at(original_index);
    }

    std::vector<double> sorted_values() const {
        std::vector<double> out;
        out.reserve(size());
        for (std::size_t k = 0; k < size(); ++k) out.push_back((*this)[k]);
        return out;
    }

    /// Number of points <= x.
    std::size_t count_le(double x) const {
        const auto& s = base_->sorted;
        auto c = static_cast<std::size_t>(std::upper_bound(s.begin(), s.end(), x) - s.begin());
        if (excluded_ && *excluded_ < c) --c;
        return c;
    }

    double cdf_at(double x) const {
        return static_cast<double>(count_le(x)) / static_cast<double>(size());
    }

    /// min{x : P_n(x) >= s}, for s in (0, 1].
    double quantile(double s) const {
        if (!(s > 0.0) || s > 1.0) throw input_error("quantile level out of range");
        const std::size_t n = size();
        const double dn = static_cast<double>(n);
        auto k = static_cast<std::size_t>(std::ceil(s * dn));
        k = std::clamp<std::size_t>(k, 1, n);
        while (k > 1 && static_cast<double>(k - 1) / dn >= s) --k;
        while (k < n && static_cast<double>(k) / dn < s) ++k;
        return (*this)[k - 1];
    }

    double mean() const {
        const auto& s = base_->sorted;
        double sum = std::accumulate(s.begin(), s.end(), 0.0);
        if (excluded_) sum -= s[*excluded_];
        return sum / static_cast<double>(size());
    }

    friend EmpiricalMeasure make_empirical(const Sample& data);
    friend EmpiricalMeasure leave_one_out(const EmpiricalMeasure& em, std::size_t i);

private:
    EmpiricalMeasure(std::shared_ptr<const detail::SortedData> base, std::optional<std::size_t> excluded)
        : base_(std::move(base)), excluded_(excluded) {}

    std::shared_ptr<const detail::SortedData> base_;
    std::optional<std::size_t> excluded_;
};

inline EmpiricalMeasure make_empirical(const Sample& data) {
    auto base = std::make_shared<detail::SortedData>();
    const std::size_t n = data.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return data[a] < data[b]; });
    base->sorted.resize(n);
    base->position_of.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        base->sorted[k] = data[order[k]];
        base->position_of[order[k]] = k;
    }
    return EmpiricalMeasure(std::move(base), std::nullopt);
}

inline EmpiricalMeasure make_empirical(std::vector<double> values) {
    return make_empirical(Sample(std::move(values)));
}

/// Measure on the sample with original observation i removed (one copy only, for ties).
inline EmpiricalMeasure leave_one_out(const EmpiricalMeasure& em, std::size_t i) {
    if (em.is_leave_one_out()) throw std::logic_error("leave_one_out of a leave-one-out view");
    if (em.size() < 2) throw input_error("cannot leave one out of singleton");
    if (i >= em.size()) throw input_error("leave_one_out index out of range");
    return EmpiricalMeasure(em.base_, em.sorted_position(i));
}

/// sup_x |A(x) - B(x)|, evaluated exactly at the merged breakpoints.
inline double ks_distance(const EmpiricalMeasure& a, const EmpiricalMeasure& b) {
    const std::size_t na = a.size();
    const std::size_t nb = b.size();
    std::size_t i = 0;
    std::size_t j = 0;
    double best = 0.0;
    while (i < na || j < nb) {
        double x;
        if (j >= nb || (i < na && a[i] <= b[j])) x = a[i];
        else x = b[j];
        while (i < na && a[i] <= x) ++i;
        while (j < nb && b[j] <= x) ++j;
        const double d = std::abs(static_cast<double>(i) / static_cast<double>(na) -
                                  static_cast<double>(j) / static_cast<double>(nb));
        best = std::max(best, d);
    }
    return best;
}

/// Finite signed measure made of point masses; breakpoints strictly increasing.
struct SignedStepMeasure {
    std::vector<double> breakpoints;
    std::vector<double> masses;

    double total() const { return std::accumulate(masses.begin(), masses.end(), 0.0); }

    /// M(x) = m((-inf, x]).
    double cdf_at(double x) const {
        const auto end = std::upper_bound(breakpoints.begin(), breakpoints.end(), x);
        return std::accumulate(masses.begin(), masses.begin() + (end - breakpoints.begin()), 0.0);
    }

    /// Sorts, merges equal breakpoints, and drops exact zero masses.
    void canonicalize() {
        std::vector<std::size_t> order(breakpoints.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return breakpoints[a] < breakpoints[b]; });
        std::vector<double> bp;
        std::vector<double> ms;
        for (std::size_t k : order) {
            if (!bp.empty() && bp.back() == breakpoints[k]) ms.back() += masses[k];
            else {
                bp.push_back(breakpoints[k]);
                ms.push_back(masses[k]);
            }
        }
        breakpoints.clear();
        masses.clear();
        for (std::size_t k = 0; k < bp.size(); ++k) {
            if (ms[k] != 0.0) {
                breakpoints.push_back(bp[k]);
                masses.push_back(ms[k]);
            }
        }
    }
};

inline SignedStepMeasure point_mass(double x, double mass = 1.0) {
    return SignedStepMeasure{{x}, {mass}};
}

/// scale * (a - b).
inline SignedStepMeasure signed_difference(const EmpiricalMeasure& a, const EmpiricalMeasure& b,
                                           double scale) {
    SignedStepMeasure m;
    const double wa = scale / static_cast<double>(a.size());
    const double wb = scale / static_cast<double>(b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        m.breakpoints.push_back(a[k]);
        m.masses.push_back(wa);
    }
    for (std::size_t k = 0; k < b.size(); ++k) {
        m.breakpoints.push_back(b[k]);
        m.masses.push_back(-wb);
    }
    m.canonicalize();
    return m;
}

/// delta_x - em, the right-hand side of the leave-one-out identity.
inline SignedStepMeasure delta_minus(double x, const EmpiricalMeasure& em) {
    SignedStepMeasure m = point_mass(x);
    const double w = 1.0 / static_cast<double>(em.size());
    for (std::size_t k = 0; k < em.size(); ++k) {
        m.breakpoints.push_back(em[k]);
        m.masses.push_back(-w);
    }
    m.canonicalize();
    return m;
}

/// Reads one real per line. Blank lines and lines starting with '#' are skipped.
inline Sample read_sample_csv(std::istream& in) {
    std::vector<double> values;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        std::string_view sv(line);
        while (!sv.empty() && (sv.front() == ' ' || sv.front() == '\t')) sv.remove_prefix(1);
        while (!sv.empty() && (sv.back() == ' ' || sv.back() == '\t' || sv.back() == '\r' ||
                               sv.back() == ','))
            sv.remove_suffix(1);
        if (sv.empty() || sv.front() == '#') continue;
        if (sv.front() == '+') sv.remove_prefix(1);
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), v);
        if (ec != std::errc() || ptr != sv.data() + sv.size()) {
            throw input_error("line " + std::to_string(lineno) + ": cannot parse '" + std::string(sv) +
                              "' as a real number");
        }
        if (!std::isfinite(v)) throw input_error("line " + std::to_string(lineno) + ": non-finite datum");
        values.push_back(v);
    }
    if (values.empty()) throw input_error("empty sample");
    return Sample(std::move(values));
}

inline Sample read_sample_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw input_error("cannot open data file '" + path + "'");
    try {
        return read_sample_csv(in);
    } catch (const input_error& e) {
        throw input_error(path + ": " + e.what());
    }
}

} // namespace jackvar
