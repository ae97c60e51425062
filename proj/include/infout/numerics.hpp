#ifndef INFOUT_NUMERICS_HPP
#define INFOUT_NUMERICS_HPP

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <string>

#include "infout/errors.hpp"

namespace infout {

/// A real number validated to lie in [0, 1].
class Probability {
public:
    constexpr Probability() = default;
    explicit Probability(double value) : value_(value) {
        if (!(value >= 0.0 && value <= 1.0)) {
            throw DomainError("probability out of [0,1]: " + std::to_string(value));
        }
    }

    constexpr double value() const noexcept { return value_; }
    constexpr operator double() const noexcept { return value_; }
    Probability complement() const { return Probability(1.0 - value_); }

    friend constexpr bool operator==(Probability, Probability) = default;

private:
    double value_ = 0.0;
};

/// Clamp a computed value into [0, 1] before wrapping it. Use only where the
/// value is a probability up to rounding.
inline Probability clamp_probability(double value) {
    if (std::isnan(value)) {
        throw DomainError("probability is NaN");
    }
    return Probability(value < 0.0 ? 0.0 : (value > 1.0 ? 1.0 : value));
}

/// Gaussian upper tail Q(x) = P(Z > x), Z ~ N(0,1).
inline Probability q_function(double x) {
    if (!std::isfinite(x)) {
        throw DomainError("q_function: non-finite argument");
    }
    return clamp_probability(0.5 * std::erfc(x / std::numbers::sqrt2));
}

inline double normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

namespace detail {

// Acklam's rational approximation of the standard normal quantile,
// relative error about 1.2e-9 before refinement.
inline double normal_quantile_rational(double p) {
    constexpr std::array<double, 6> a{-3.969683028665376e+01, 2.209460984245205e+02,
                                      -2.759285104469687e+02, 1.383577518672690e+02,
                                      -3.066479806614716e+01, 2.506628277459239e+00};
    constexpr std::array<double, 5> b{-5.447609879822406e+01, 1.615858368580409e+02,
                                      -1.556989798598866e+02, 6.680131188771972e+01,
                                      -1.328068155288572e+01};
    constexpr std::array<double, 6> c{-7.784894002430293e-03, -3.223964580411365e-01,
                                      -2.400758277161838e+00, -2.549732539343734e+00,
                                      4.374664141464968e+00,  2.938163982698783e+00};
    constexpr std::array<double, 4> d{7.784695709041462e-03, 3.224671290700398e-01,
                                      2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;

    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        return (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    if (p > 1.0 - p_low) {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        return -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
               ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double q = p - 0.5;
    const double r = q * q;
    return (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
           (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
}

} // namespace detail

/// Inverse of q_function on (0, 1).
inline double inverse_q(double p) {
    if (!(p > 0.0 && p < 1.0)) {
        throw DomainError("inverse_q: argument must lie in (0,1), got " + std::to_string(p));
    }
    double x = -detail::normal_quantile_rational(p);
    // Halley refinement on Q(x) - p.
    for (int iter = 0; iter < 2; ++iter) {
        const double err = 0.5 * std::erfc(x / std::numbers::sqrt2) - p;
        const double u = err / normal_pdf(x);
        x += u / (1.0 - 0.5 * x * u);
    }
    return x;
}

/// Bisection on a continuous f with f(lo) f(hi) < 0. Returns the midpoint of
/// the final bracket, whose width is at most tol.
template <class F>
double bisect_root(F&& f, double lo, double hi, double tol) {
    if (!(lo < hi)) {
        throw DomainError("bisect_root: require lo < hi");
    }
    if (!(tol > 0.0)) {
        throw DomainError("bisect_root: tolerance must be positive");
    }
    double f_lo = f(lo);
    const double f_hi = f(hi);
    if (f_lo == 0.0) {
        return lo;
    }
    if (f_hi == 0.0) {
        return hi;
    }
    if (!(f_lo * f_hi < 0.0)) {
        throw BracketError("bisect_root: no sign change on bracket");
    }
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        const double f_mid = f(mid);
        if (f_mid == 0.0) {
            return mid;
        }
        if ((f_mid < 0.0) == (f_lo < 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

} // namespace detail

/// Counter-based random stream. Output n is a fixed hash of
/// (seed, stream_id, n), so equal (seed, stream_id) pairs replay the same
/// sequence and streams can be handed to independent workers.
/// Satisfies UniformRandomBitGenerator.
class RngStream {
public:
    using result_type = std::uint64_t;

    explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0) noexcept
        : seed_(seed), stream_id_(stream_id),
          key_(detail::splitmix64(detail::splitmix64(seed) ^
                                  detail::splitmix64(stream_id + 0x632be59bd9b4e019ULL))) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept {
        return std::numeric_limits<result_type>::max();
    }

    result_type operator()() noexcept {
        return detail::splitmix64(key_ ^ detail::splitmix64(counter_++));
    }

    /// Child stream, independent of this one and of other children.
    RngStream substream(std::uint64_t index) const noexcept {
        return RngStream(seed_, detail::splitmix64(stream_id_ ^ 0xd1b54a32d192ed03ULL) + index);
    }

    /// Uniform double on [0, 1) with 53 random bits.
    double uniform() noexcept {
        return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream_id() const noexcept { return stream_id_; }
    std::uint64_t position() const noexcept { return counter_; }

private:
    std::uint64_t seed_;
    std::uint64_t stream_id_;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace infout

#endif
