#ifndef INFOUT_C2_OPTIMIZER_HPP
#define INFOUT_C2_OPTIMIZER_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "infout/channel_latency.hpp"
#include "infout/errors.hpp"
#include "infout/gmm.hpp"
#include "infout/linear_classifier.hpp"
#include "infout/numerics.hpp"
#include "infout/outage_analysis.hpp"

namespace infout {

/// Cosine interpolation of a non-increasing gain profile over [0, D]. On
/// [d-1, d] (1-based d) g(t) = a cos(pi (t-d+1)) + b with
/// a = (W_d - W_{d+1}) / 2, b = (W_d + W_{d+1}) / 2 and W_{D+1} = W_D.
class DgFunction {
public:
    explicit DgFunction(std::vector<double> sorted_gains) {
        if (sorted_gains.empty()) {
            throw DomainError("DgFunction: empty gain profile");
        }
        for (std::size_t i = 0; i < sorted_gains.size(); ++i) {
            if (!(sorted_gains[i] >= 0.0) || !std::isfinite(sorted_gains[i])) {
                throw DomainError("DgFunction: gains must be finite and non-negative");
            }
            if (i > 0 && sorted_gains[i] > sorted_gains[i - 1]) {
                throw DomainError("DgFunction: gains must be non-increasing");
            }
        }
        knots_ = std::move(sorted_gains);
        knots_.push_back(knots_.back());
        const std::size_t n = dimension();
        prefix1_.assign(n + 1, 0.0);
        prefix2_.assign(n + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            const double a = half_drop(i);
            const double b = half_sum(i);
            prefix1_[i + 1] = prefix1_[i] + b;
            prefix2_[i + 1] = prefix2_[i] + a * a / 2.0 + b * b;
        }
    }

    explicit DgFunction(const DgProfile& profile) : DgFunction(profile.sorted_gains()) {}

    std::size_t dimension() const noexcept { return knots_.size() - 1; }

    /// W_1..W_{D+1}.
    const std::vector<double>& knots() const noexcept { return knots_; }

    double value(double t) const {
        if (t < 0.0 || t > static_cast<double>(dimension())) {
            return 0.0;
        }
        const auto [i, tau] = locate(t);
        return half_drop(i) * std::cos(std::numbers::pi * tau) + half_sum(i);
    }

    double derivative(double t) const {
        if (t < 0.0 || t > static_cast<double>(dimension())) {
            return 0.0;
        }
        const auto [i, tau] = locate(t);
        return -half_drop(i) * std::numbers::pi * std::sin(std::numbers::pi * tau);
    }

    /// Integral of g over [0, x].
    double g_hat_1(double x) const {
        if (x <= 0.0) {
            return 0.0;
        }
        x = std::min(x, static_cast<double>(dimension()));
        const auto [i, tau] = locate(x);
        if (tau == 0.0) {
            return prefix1_[i];
        }
        const double pi = std::numbers::pi;
        return prefix1_[i] + half_drop(i) * std::sin(pi * tau) / pi + half_sum(i) * tau;
    }

    /// Integral of g^2 over [0, x].
    double g_hat_2(double x) const {
        if (x <= 0.0) {
            return 0.0;
        }
        x = std::min(x, static_cast<double>(dimension()));
        const auto [i, tau] = locate(x);
        if (tau == 0.0) {
            return prefix2_[i];
        }
        const double pi = std::numbers::pi;
        const double a = half_drop(i);
        const double b = half_sum(i);
        return prefix2_[i] + a * a * (tau / 2.0 + std::sin(2.0 * pi * tau) / (4.0 * pi)) +
               2.0 * a * b * std::sin(pi * tau) / pi + b * b * tau;
    }

private:
    struct Position {
        std::size_t interval;
        double tau;
    };

    // Interval index (0-based) and offset in [0, 1); t = D maps to the end of
    // the last interval.
    Position locate(double t) const {
        const std::size_t n = dimension();
        if (t >= static_cast<double>(n)) {
            return {n, 0.0};
        }
        const double whole = std::floor(t);
        return {static_cast<std::size_t>(whole), t - whole};
    }

    double half_drop(std::size_t i) const {
        return i < dimension() ? (knots_[i] - knots_[i + 1]) / 2.0 : 0.0;
    }
    double half_sum(std::size_t i) const {
        return i < dimension() ? (knots_[i] + knots_[i + 1]) / 2.0 : knots_.back();
    }

    std::vector<double> knots_;
    std::vector<double> prefix1_;
    std::vector<double> prefix2_;
};

namespace detail {

inline double observation_budget(const ChannelLatencyConfig& cfg, double x) {
    const double budget = cfg.b0() - cfg.b1() * x;
    if (!(budget > 0.0)) {
        throw DomainError("surrogate: no observation budget left at x=" + std::to_string(x));
    }
    return budget;
}

} // namespace detail

/// f(x) = p Ghat1 / sqrt(Ghat2) - g_th / ((B0 - B1 x) sqrt(Ghat2)).
inline double surrogate_f(const DgFunction& fn, const ChannelLatencyConfig& cfg, Probability p_act,
                          double g_th, double x) {
    const double budget = detail::observation_budget(cfg, x);
    const double g2 = fn.g_hat_2(x);
    if (!(g2 > 0.0)) {
        throw DomainError("surrogate_f: integrated gain power is zero at x=" + std::to_string(x));
    }
    const double root = std::sqrt(g2);
    return p_act * fn.g_hat_1(x) / root - g_th / (budget * root);
}

/// Ghat2^{3/2} f'(x); same sign as f'.
inline double nu(const DgFunction& fn, const ChannelLatencyConfig& cfg, Probability p_act,
                 double g_th, double x) {
    const double budget = detail::observation_budget(cfg, x);
    const double g1 = fn.g_hat_1(x);
    const double g2 = fn.g_hat_2(x);
    const double g = fn.value(x);
    return p_act * g * (g2 - 0.5 * g1 * g) +
           g_th * (budget * g * g / 2.0 - cfg.b1() * g2) / (budget * budget);
}

enum class SolvedBy { interior_root, endpoint, exhaustive_scan };

inline const char* to_string(SolvedBy s) {
    switch (s) {
    case SolvedBy::interior_root: return "interior_root";
    case SolvedBy::endpoint: return "endpoint";
    case SolvedBy::exhaustive_scan: return "exhaustive_scan";
    }
    return "?";
}

struct SurrogateSolution {
    std::size_t s_star = 0;
    std::size_t k_star = 0;
    std::optional<double> x_star;
    double f_value = 0.0;
    SolvedBy solved_by = SolvedBy::endpoint;
};

inline constexpr double kBisectionTolerance = 1e-6;

/// Maximise f over the integer feature counts in [S_min, S_max]: bisect nu
/// when it changes sign across the range, then round to the better
/// neighbour; otherwise take the better endpoint.
inline SurrogateSolution optimize_features(const DgFunction& fn, const ChannelLatencyConfig& cfg,
                                           Probability p_act, double g_th) {
    const auto range = feasible_feature_range(cfg, fn.dimension());
    if (range.empty()) {
        throw InfeasibleError("optimize_features: deadline admits no (K, S) pair");
    }
    auto f = [&](std::size_t s) { return surrogate_f(fn, cfg, p_act, g_th, static_cast<double>(s)); };
    SurrogateSolution sol;
    const auto lo = static_cast<double>(range.s_min);
    const auto hi = static_cast<double>(range.s_max);
    const double nu_lo = nu(fn, cfg, p_act, g_th, lo);
    const double nu_hi = nu(fn, cfg, p_act, g_th, hi);
    if (range.s_min < range.s_max && nu_lo * nu_hi < 0.0) {
        const double x = bisect_root([&](double t) { return nu(fn, cfg, p_act, g_th, t); }, lo, hi,
                                     kBisectionTolerance);
        const auto down = std::clamp(static_cast<std::size_t>(std::floor(x)), range.s_min, range.s_max);
        const auto up = std::clamp(static_cast<std::size_t>(std::ceil(x)), range.s_min, range.s_max);
        sol.x_star = x;
        sol.s_star = f(down) >= f(up) ? down : up;
        sol.solved_by = SolvedBy::interior_root;
    } else {
        sol.s_star = f(range.s_min) >= f(range.s_max) ? range.s_min : range.s_max;
        sol.solved_by = SolvedBy::endpoint;
    }
    sol.f_value = f(sol.s_star);
    sol.k_star = max_observations_for(sol.s_star, cfg);
    return sol;
}

inline SurrogateSolution optimize_features(const GmmModel& model, const ChannelLatencyConfig& cfg,
                                           Probability p_act, double a_th) {
    return optimize_features(DgFunction(dg_profile(model)), cfg, p_act,
                             dg_threshold(a_th, model.classes()));
}

/// A (K, S) pair chosen by some scheme.
struct OperatingPoint {
    std::size_t k = 0;
    std::size_t s = 0;
    std::string scheme;
    /// Objective value when the scheme minimised one.
    std::optional<double> objective;
    /// ATB schemes: the accuracy filter removed every pair.
    bool filter_fallback = false;
};

struct FeasiblePair {
    std::size_t k;
    std::size_t s;
};

/// Every (k, s) with 1 <= k <= K_max, 1 <= s <= D and latency within T,
/// ordered by s then k.
inline std::vector<FeasiblePair> feasible_pairs(const ChannelLatencyConfig& cfg, std::size_t dimension) {
    std::vector<FeasiblePair> out;
    for (std::size_t s = 1; s <= dimension; ++s) {
        const auto k_hat = max_observations_for(s, cfg);
        for (std::size_t k = 1; k <= k_hat; ++k) {
            out.push_back({k, s});
        }
    }
    return out;
}

enum class Estimator { exact, gaussian };

/// Exhaustive minimisation of InfOut over the feasible pairs. Ties go to the
/// smaller s, then the larger k.
inline OperatingPoint brute_force_search(const GmmModel& model, const ChannelLatencyConfig& cfg,
                                         Probability p_act, double a_th,
                                         Estimator estimator = Estimator::exact) {
    const auto pairs = feasible_pairs(cfg, model.dimension());
    if (pairs.empty()) {
        throw InfeasibleError("brute_force_search: deadline admits no (K, S) pair");
    }
    const auto profile = dg_profile(model);
    const double g_th = dg_threshold(a_th, model.classes());
    OperatingPoint best{0, 0, "brute_force", std::nullopt, false};
    double best_value = 2.0;
    std::size_t current_s = 0;
    std::optional<ExactReceiveDgLaw> law;
    ReceiveDgDistribution dist;
    for (const auto& [k, s] : pairs) {
        if (s != current_s) {
            current_s = s;
            dist = receive_dg_distribution(profile, s, p_act);
            if (estimator == Estimator::exact) {
                law.emplace(dist.selected_gains, p_act);
            }
        }
        double v;
        if (estimator == Estimator::exact) {
            if (g_th < 0.0) {
                v = 0.0;
            } else if (static_cast<double>(k) * dist.transmit_dg <= g_th) {
                v = 1.0;
            } else {
                v = std::min(1.0, law->probability_at_most(k, g_th));
            }
        } else {
            v = infout_gaussian(dist, k, g_th);
        }
        // Pairs arrive by s then k, so a larger k at equal s wins ties.
        if (v < best_value || (v == best_value && s == best.s)) {
            best_value = v;
            best.k = k;
            best.s = s;
        }
    }
    best.objective = best_value;
    return best;
}

enum class BenchmarkScheme { max_feat, max_obs, atb_max_feat, atb_max_obs };

inline const char* to_string(BenchmarkScheme s) {
    switch (s) {
    case BenchmarkScheme::max_feat: return "max_feat";
    case BenchmarkScheme::max_obs: return "max_obs";
    case BenchmarkScheme::atb_max_feat: return "atb_max_feat";
    case BenchmarkScheme::atb_max_obs: return "atb_max_obs";
    }
    return "?";
}

inline BenchmarkScheme parse_benchmark_scheme(const std::string& name) {
    for (auto s : {BenchmarkScheme::max_feat, BenchmarkScheme::max_obs, BenchmarkScheme::atb_max_feat,
                   BenchmarkScheme::atb_max_obs}) {
        if (name == to_string(s)) {
            return s;
        }
    }
    throw ConfigError("unknown benchmark scheme '" + name + "'");
}

/// One-shot accuracy of (k, s): a single erasure draw over the top-s
/// features, then the conditional accuracy (exact for two classes, a short
/// Monte-Carlo run otherwise).
inline double one_shot_accuracy(const GmmModel& model, const DgProfile& profile, Probability p_act,
                                std::size_t k, std::size_t s, RngStream& rng,
                                std::size_t inner_trials = 2000) {
    auto received = simulate_erasures(select_top_features(profile, s), p_act, rng).received();
    std::sort(received.begin(), received.end());
    if (model.classes() == 2) {
        return accuracy_exact_pairwise(model, k, received).value;
    }
    return accuracy_monte_carlo(model, k, received, inner_trials, rng.substream(1)).value;
}

/// MaxFeat: lexicographic max on (s, k). MaxObs: on (k, s). The ATB variants
/// first drop the pairs whose one-shot accuracy is <= a_th; pair i uses
/// substream i of `calibration_rng`.
inline OperatingPoint benchmark_scheme(BenchmarkScheme scheme, const GmmModel& model,
                                       const ChannelLatencyConfig& cfg, Probability p_act,
                                       double a_th, const RngStream& calibration_rng) {
    auto pairs = feasible_pairs(cfg, model.dimension());
    if (pairs.empty()) {
        throw InfeasibleError(std::string(to_string(scheme)) + ": deadline admits no (K, S) pair");
    }
    OperatingPoint point{0, 0, to_string(scheme), std::nullopt, false};
    const bool atb = scheme == BenchmarkScheme::atb_max_feat || scheme == BenchmarkScheme::atb_max_obs;
    if (atb) {
        const auto profile = dg_profile(model);
        std::vector<FeasiblePair> kept;
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            RngStream local = calibration_rng.substream(i);
            if (one_shot_accuracy(model, profile, p_act, pairs[i].k, pairs[i].s, local) > a_th) {
                kept.push_back(pairs[i]);
            }
        }
        if (kept.empty()) {
            point.filter_fallback = true;
        } else {
            pairs = std::move(kept);
        }
    }
    const bool by_features = scheme == BenchmarkScheme::max_feat || scheme == BenchmarkScheme::atb_max_feat;
    const auto best = std::max_element(pairs.begin(), pairs.end(), [&](const auto& x, const auto& y) {
        return by_features ? std::pair(x.s, x.k) < std::pair(y.s, y.k)
                           : std::pair(x.k, x.s) < std::pair(y.k, y.s);
    });
    point.k = best->k;
    point.s = best->s;
    return point;
}

} // namespace infout

#endif
