#pragma once

#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/distributions/normal.hpp>

#include "jackvar/errors.hpp"

namespace jackvar {

/// Central moments of a distribution.
struct MomentVector {
    double mean = 0.0;
    double mu2 = 0.0;
    double mu3 = 0.0;
    double mu4 = 0.0;
};

/// One of the built-in atomless populations with closed-form moments.
class Population {
public:
    enum class Kind { normal, uniform, exponential };

    static Population normal(double mu, double sigma) {
        if (!(sigma > 0.0) || !std::isfinite(mu) || !std::isfinite(sigma))
            throw input_error("normal population requires sigma > 0");
        return Population(Kind::normal, mu, sigma);
    }
    static Population uniform(double a, double b) {
        if (!(b > a) || !std::isfinite(a) || !std::isfinite(b))
            throw input_error("uniform population requires b > a");
        return Population(Kind::uniform, a, b);
    }
    static Population exponential(double lambda) {
        if (!(lambda > 0.0) || !std::isfinite(lambda))
            throw input_error("exponential population requires lambda > 0");
        return Population(Kind::exponential, lambda, 0.0);
    }

    Kind kind() const noexcept { return kind_; }
    double param1() const noexcept { return p1_; }
    double param2() const noexcept { return p2_; }

    std::string name() const {
        switch (kind_) {
        case Kind::normal: return "normal";
        case Kind::uniform: return "uniform";
        case Kind::exponential: return "exponential";
        }
        return {};
    }

    double cdf(double x) const {
        switch (kind_) {
        case Kind::normal: return 0.5 * std::erfc(-(x - p1_) / (p2_ * std::numbers::sqrt2));
        case Kind::uniform:
            if (x <= p1_) return 0.0;
            if (x >= p2_) return 1.0;
            return (x - p1_) / (p2_ - p1_);
        case Kind::exponential: return x <= 0.0 ? 0.0 : -std::expm1(-p1_ * x);
        }
        return 0.0;
    }

    double density(double x) const {
        switch (kind_) {
        case Kind::normal: {
            const double z = (x - p1_) / p2_;
            return std::exp(-0.5 * z * z) / (p2_ * std::sqrt(2.0 * std::numbers::pi));
        }
        case Kind::uniform: return (x < p1_ || x > p2_) ? 0.0 : 1.0 / (p2_ - p1_);
        case Kind::exponential: return x < 0.0 ? 0.0 : p1_ * std::exp(-p1_ * x);
        }
        return 0.0;
    }

    /// min{x : P(x) >= s} for s in (0, 1).
    double quantile(double s) const {
        if (!(s > 0.0) || !(s < 1.0)) throw input_error("population quantile level out of range");
        switch (kind_) {
        case Kind::normal: return boost::math::quantile(boost::math::normal_distribution<>(p1_, p2_), s);
        case Kind::uniform: return p1_ + s * (p2_ - p1_);
        case Kind::exponential: return -std::log1p(-s) / p1_;
        }
        return 0.0;
    }

    MomentVector moments() const {
        switch (kind_) {
        case Kind::normal: {
            const double v = p2_ * p2_;
            return {p1_, v, 0.0, 3.0 * v * v};
        }
        case Kind::uniform: {
            const double w = p2_ - p1_;
            return {0.5 * (p1_ + p2_), w * w / 12.0, 0.0, w * w * w * w / 80.0};
        }
        case Kind::exponential: {
            const double s = 1.0 / p1_;
            return {s, s * s, 2.0 * s * s * s, 9.0 * s * s * s * s};
        }
        }
        return {};
    }

    double mean() const { return moments().mean; }

private:
    Population(Kind k, double p1, double p2) : kind_(k), p1_(p1), p2_(p2) {}

    Kind kind_;
    double p1_; // mu | a | lambda
    double p2_; // sigma | b | unused
};

} // namespace jackvar
