#ifndef INFOUT_OUTAGE_ANALYSIS_HPP
#define INFOUT_OUTAGE_ANALYSIS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "infout/channel_latency.hpp"
#include "infout/csv.hpp"
#include "infout/errors.hpp"
#include "infout/gmm.hpp"
#include "infout/linear_classifier.hpp"
#include "infout/numerics.hpp"

namespace infout {

/// Receive-DG threshold G_th = 4 (Q^-1((1 - A_th) / (L - 1)))^2 that the
/// union lower bound needs to reach accuracy a_th.
inline double dg_threshold(double a_th, std::size_t classes) {
    if (classes < 2) {
        throw DomainError("dg_threshold: need at least two classes");
    }
    const double arg = (1.0 - a_th) / static_cast<double>(classes - 1);
    if (!(arg > 0.0 && arg < 0.5)) {
        throw InfeasibleError("dg_threshold: accuracy target " + std::to_string(a_th) +
                              " is unreachable or not above chance");
    }
    const double z = inverse_q(arg);
    return 4.0 * z * z;
}

/// Moments of G_R = sum_d W_d I_d over the top-S gains, I_d ~ Bernoulli(p_act).
struct ReceiveDgDistribution {
    std::vector<double> selected_gains;
    Probability p_act;
    double mean = 0.0;
    double variance = 0.0;
    double transmit_dg = 0.0;       // G1
    double transmit_dg_power = 0.0; // G2
};

inline ReceiveDgDistribution receive_dg_distribution(std::vector<double> gains, Probability p_act) {
    ReceiveDgDistribution dist;
    for (double w : gains) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw DomainError("receive_dg_distribution: gains must be finite and non-negative");
        }
        dist.transmit_dg += w;
        dist.transmit_dg_power += w * w;
    }
    dist.selected_gains = std::move(gains);
    dist.p_act = p_act;
    dist.mean = p_act * dist.transmit_dg;
    dist.variance = p_act * (1.0 - p_act) * dist.transmit_dg_power;
    return dist;
}

inline ReceiveDgDistribution receive_dg_distribution(const DgProfile& profile, std::size_t s,
                                                     Probability p_act) {
    if (s < 1 || s > profile.dimension()) {
        throw DomainError("receive_dg_distribution: s must lie in [1, D]");
    }
    return receive_dg_distribution(profile.top_gains(s), p_act);
}

namespace detail {

// Pr(K G_R <= g_th) for a deterministic G_R (p_act in {0,1} or all gains 0).
inline Probability step_outage(double value, std::size_t k, double g_th) {
    return Probability(static_cast<double>(k) * value <= g_th ? 1.0 : 0.0);
}

} // namespace detail

/// Gaussian approximation of Pr(K G_R <= g_th):
/// Q((p G1/sqrt(G2) - g_th/(K sqrt(G2))) / sqrt(p (1-p))).
inline Probability infout_gaussian(const ReceiveDgDistribution& dist, std::size_t k, double g_th) {
    if (k < 1) {
        throw DomainError("infout_gaussian: K must be >= 1");
    }
    const double p = dist.p_act;
    if (p == 0.0) {
        return detail::step_outage(0.0, k, g_th);
    }
    if (p == 1.0) {
        return detail::step_outage(dist.transmit_dg, k, g_th);
    }
    if (!(dist.transmit_dg_power > 0.0)) {
        return detail::step_outage(0.0, k, g_th);
    }
    const double root_g2 = std::sqrt(dist.transmit_dg_power);
    const double numerator =
        p * dist.transmit_dg / root_g2 - g_th / (static_cast<double>(k) * root_g2);
    return q_function(numerator / std::sqrt(p * (1.0 - p)));
}

/// A value known to lie in [lo, hi]; lo == hi when computed exactly.
struct Bracket {
    double lo = 0.0;
    double hi = 0.0;
    bool exact() const noexcept { return lo == hi; }
    double mid() const noexcept { return 0.5 * (lo + hi); }
    double half_width() const noexcept { return 0.5 * (hi - lo); }
};

struct Atom {
    double value;
    double probability;
};

/// Exact law of a weighted Bernoulli sum. Atoms are built by convolution
/// with equal sums merged at a relative tolerance of 1e-12. When the merged
/// support would exceed kAtomLimit atoms the gains are split in two halves
/// whose laws are combined per query (meet in the middle); if a half still
/// overflows, construction throws CapacityError.
class ExactReceiveDgLaw {
public:
    static constexpr std::size_t kAtomLimit = std::size_t{1} << 20;

    ExactReceiveDgLaw(std::span<const double> gains, Probability p_act) {
        double total = 0.0;
        for (double w : gains) {
            total += w;
        }
        tolerance_ = 1e-12 * std::max(1.0, total);
        if (auto whole = convolve(gains, p_act, kAtomLimit)) {
            first_ = std::move(*whole);
        } else {
            const auto half = gains.size() / 2;
            auto a = convolve(gains.first(half), p_act, kAtomLimit);
            auto b = convolve(gains.subspan(half), p_act, kAtomLimit);
            if (!a || !b) {
                throw CapacityError("exact receive-DG law: more than 2^20 atoms per half for S=" +
                                    std::to_string(gains.size()));
            }
            first_ = std::move(*a);
            second_ = std::move(*b);
        }
        accumulate(first_, first_cdf_);
        accumulate(second_, second_cdf_);
    }

    bool split() const noexcept { return !second_.empty(); }

    /// Sorted atoms of the whole law; only available when not split.
    const std::vector<Atom>& atoms() const {
        if (split()) {
            throw CapacityError("exact receive-DG law is held as two halves");
        }
        return first_;
    }

    /// Pr(G_R <= t).
    double cdf(double t) const {
        if (!split()) {
            return cdf_of(first_, first_cdf_, t);
        }
        // Walk the first half upward while the threshold on the second half
        // moves downward.
        double total = 0.0;
        std::size_t j = second_.size();
        for (const auto& a : first_) {
            const double rest = t - a.value + tolerance_;
            while (j > 0 && second_[j - 1].value > rest) {
                --j;
            }
            if (j == 0) {
                break;
            }
            total += a.probability * second_cdf_[j - 1];
        }
        return std::min(1.0, total);
    }

    /// Pr(K G_R <= g_th).
    double probability_at_most(std::size_t k, double g_th) const {
        return cdf(g_th / static_cast<double>(k));
    }

    /// sup_t |F(t) - Phi((t - mean) / sd)|; only available when not split.
    double ks_distance_to_normal(double mean, double sd) const {
        const auto& law = atoms();
        double worst = 0.0;
        double before = 0.0;
        for (std::size_t i = 0; i < law.size(); ++i) {
            const double phi = 1.0 - q_function((law[i].value - mean) / sd);
            const double after = first_cdf_[i];
            worst = std::max({worst, std::abs(after - phi), std::abs(before - phi)});
            before = after;
        }
        return worst;
    }

private:
    static std::optional<std::vector<Atom>> convolve(std::span<const double> gains, double p,
                                                     std::size_t limit) {
        double total = 0.0;
        for (double w : gains) {
            total += w;
        }
        const double tol = 1e-12 * std::max(1.0, total);
        std::vector<Atom> law{{0.0, 1.0}};
        std::vector<Atom> next;
        for (double w : gains) {
            next.clear();
            next.reserve(2 * law.size());
            std::size_t i = 0;
            std::size_t j = 0;
            auto push = [&](double v, double pr) {
                if (pr == 0.0) {
                    return;
                }
                if (!next.empty() && v - next.back().value <= tol) {
                    next.back().probability += pr;
                } else {
                    next.push_back({v, pr});
                }
            };
            // Merge law*(1-p) with (law + w)*p, both sorted.
            while (i < law.size() || j < law.size()) {
                const bool take_stay =
                    j == law.size() || (i < law.size() && law[i].value <= law[j].value + w);
                if (take_stay) {
                    push(law[i].value, law[i].probability * (1.0 - p));
                    ++i;
                } else {
                    push(law[j].value + w, law[j].probability * p);
                    ++j;
                }
            }
            if (next.size() > limit) {
                return std::nullopt;
            }
            law.swap(next);
        }
        return law;
    }

    static void accumulate(const std::vector<Atom>& law, std::vector<double>& cdf) {
        cdf.resize(law.size());
        double run = 0.0;
        for (std::size_t i = 0; i < law.size(); ++i) {
            run += law[i].probability;
            cdf[i] = run;
        }
    }

    double cdf_of(const std::vector<Atom>& law, const std::vector<double>& cdf, double t) const {
        auto it = std::upper_bound(law.begin(), law.end(), t + tolerance_,
                                   [](double v, const Atom& a) { return v < a.value; });
        if (it == law.begin()) {
            return 0.0;
        }
        return std::min(1.0, cdf[static_cast<std::size_t>(it - law.begin()) - 1]);
    }

    std::vector<Atom> first_;
    std::vector<Atom> second_;
    std::vector<double> first_cdf_;
    std::vector<double> second_cdf_;
    double tolerance_ = 0.0;
};

/// Certified bracket on the law of a weighted Bernoulli sum with arbitrarily
/// many terms. Each gain is rounded down and up to a multiple of `quantum`;
/// the two lattice sums bound G_R from below and above pointwise, hence
/// Pr(G+ <= t) <= Pr(G_R <= t) <= Pr(G- <= t). Gains can be added one at a
/// time, so a sweep over S reuses the prefix laws.
class GridBracketLaw {
public:
    GridBracketLaw(double quantum, Probability p_act) : quantum_(quantum), p_(p_act) {
        if (!(quantum > 0.0)) {
            throw DomainError("GridBracketLaw: quantum must be positive");
        }
    }

    /// Grid with `bins` cells across the total of `gains`.
    static GridBracketLaw for_gains(std::span<const double> gains, Probability p_act,
                                    std::size_t bins = std::size_t{1} << 20) {
        double total = 0.0;
        for (double w : gains) {
            total += w;
        }
        GridBracketLaw law(total > 0.0 ? total / static_cast<double>(bins) : 1.0, p_act);
        for (double w : gains) {
            law.add_gain(w);
        }
        return law;
    }

    void add_gain(double w) {
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw DomainError("GridBracketLaw: gains must be finite and non-negative");
        }
        const double units = w / quantum_;
        add_units(lower_, static_cast<std::size_t>(std::floor(units)));
        add_units(upper_, static_cast<std::size_t>(std::ceil(units)));
        ++terms_;
    }

    std::size_t terms() const noexcept { return terms_; }
    double quantum() const noexcept { return quantum_; }

    /// Bracket on Pr(G_R <= t).
    Bracket cdf(double t) const {
        if (t < 0.0) {
            return {0.0, 0.0};
        }
        const double cells = t / quantum_;
        return {prefix(upper_, cells), prefix(lower_, cells)};
    }

    /// Bracket on Pr(K G_R <= g_th).
    Bracket probability_at_most(std::size_t k, double g_th) const {
        return cdf(g_th / static_cast<double>(k));
    }

    /// Upper bound on sup_t |F(t) - Phi((t - mean) / sd)| valid for the true
    /// law, using the step structure of both lattice laws.
    double ks_upper_bound_to_normal(double mean, double sd) const {
        auto phi = [&](double t) { return 1.0 - q_function((t - mean) / sd).value(); };
        double worst = phi(0.0); // t < 0: F = 0
        const std::size_t n = std::max(lower_.size(), upper_.size());
        double lo_run = 0.0;
        double up_run = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            lo_run += j < lower_.size() ? lower_[j] : 0.0;
            up_run += j < upper_.size() ? upper_[j] : 0.0;
            const double t = static_cast<double>(j) * quantum_;
            // On [t, t + quantum): F <= Pr(N- <= j), F >= Pr(N+ <= j).
            worst = std::max(worst, std::min(1.0, lo_run) - phi(t));
            worst = std::max(worst, phi(t + quantum_) - std::min(1.0, up_run));
        }
        return worst;
    }

private:
    void add_units(std::vector<double>& pmf, std::size_t units) {
        if (pmf.empty()) {
            pmf.push_back(1.0);
        }
        const double p = p_;
        const double q = 1.0 - p;
        const std::size_t old = pmf.size();
        pmf.resize(old + units, 0.0);
        if (units == 0) {
            return; // the term adds 0 either way
        }
        for (std::size_t i = pmf.size(); i-- > units;) {
            pmf[i] = q * pmf[i] + p * pmf[i - units];
        }
        for (std::size_t i = 0; i < units; ++i) {
            pmf[i] *= q;
        }
    }

    static double prefix(const std::vector<double>& pmf, double cells) {
        if (pmf.empty()) {
            return 1.0; // no terms: G_R = 0
        }
        const double upto = std::floor(cells * (1.0 + 1e-15) + 1e-9);
        const std::size_t last =
            upto >= static_cast<double>(pmf.size()) ? pmf.size() : static_cast<std::size_t>(upto) + 1;
        double total = 0.0;
        for (std::size_t i = 0; i < last; ++i) {
            total += pmf[i];
        }
        return std::min(1.0, total);
    }

    double quantum_;
    double p_;
    std::vector<double> lower_;
    std::vector<double> upper_;
    std::size_t terms_ = 0;
};

/// Exact Pr(K G_R <= g_th) from the law of the weighted Bernoulli sum.
/// Throws CapacityError when the support is too large to enumerate.
inline Probability infout_exact(const ReceiveDgDistribution& dist, std::size_t k, double g_th) {
    if (k < 1) {
        throw DomainError("infout_exact: K must be >= 1");
    }
    if (g_th < 0.0) {
        return Probability(0.0);
    }
    if (static_cast<double>(k) * dist.transmit_dg <= g_th) {
        return Probability(1.0);
    }
    const ExactReceiveDgLaw law(dist.selected_gains, dist.p_act);
    return clamp_probability(law.probability_at_most(k, g_th));
}

/// Exact value when enumeration fits, otherwise a certified lattice bracket.
inline Bracket infout_oracle(const ReceiveDgDistribution& dist, std::size_t k, double g_th,
                             std::size_t bins = std::size_t{1} << 20) {
    try {
        const double v = infout_exact(dist, k, g_th);
        return {v, v};
    } catch (const CapacityError&) {
        const auto law = GridBracketLaw::for_gains(dist.selected_gains, dist.p_act, bins);
        return law.probability_at_most(k, g_th);
    }
}

/// Lower-interpolated 1st percentile: the order statistic at floor(0.01 (n-1)).
inline double first_percentile(std::vector<double> samples) {
    if (samples.empty()) {
        throw DomainError("first_percentile: no samples");
    }
    const auto idx = static_cast<std::size_t>(std::floor(0.01 * static_cast<double>(samples.size() - 1)));
    std::nth_element(samples.begin(), samples.begin() + static_cast<std::ptrdiff_t>(idx),
                     samples.end());
    return samples[idx];
}

/// Normalised Lindeberg sum for threshold epsilon * sigma_G, evaluated on the
/// two atoms of every term.
inline double lindeberg_diagnostic(const ReceiveDgDistribution& dist, double epsilon) {
    if (!(epsilon > 0.0)) {
        throw DomainError("lindeberg_diagnostic: epsilon must be positive");
    }
    if (!(dist.variance > 0.0)) {
        throw DegenerateError("lindeberg_diagnostic: zero variance");
    }
    const double p = dist.p_act;
    const double cutoff = epsilon * std::sqrt(dist.variance);
    double sum = 0.0;
    for (double w : dist.selected_gains) {
        const double up = w * (1.0 - p); // I_d = 1
        const double down = w * p;       // I_d = 0
        if (up > cutoff) {
            sum += p * up * up;
        }
        if (down > cutoff) {
            sum += (1.0 - p) * down * down;
        }
    }
    return std::min(1.0, sum / dist.variance);
}

struct EmpiricalOutage {
    double value = 0.0;
    double standard_error = 0.0;
    std::vector<double> accuracies; // conditional accuracy of every trial
};

/// Monte-Carlo InfOut: each trial draws an erasure pattern over the top-s
/// DG features, evaluates the conditional accuracy a(K, S~) and counts
/// a <= a_th. Two-class models use the exact pair-wise accuracy, others an
/// inner Monte-Carlo loop of `inner_trials`.
inline EmpiricalOutage infout_empirical(const GmmModel& model, Probability p_act, std::size_t k,
                                        std::size_t s, double a_th, std::size_t trials,
                                        std::size_t inner_trials, const RngStream& rng) {
    if (trials < 1 || inner_trials < 1) {
        throw DomainError("infout_empirical: trial counts must be >= 1");
    }
    const auto profile = dg_profile(model);
    const auto sent = select_top_features(profile, s);
    EmpiricalOutage out;
    out.accuracies.reserve(trials);
    std::size_t outages = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        RngStream local = rng.substream(t);
        const auto pattern = simulate_erasures(sent, p_act, local);
        auto received = pattern.received();
        std::sort(received.begin(), received.end());
        double acc;
        if (model.classes() == 2) {
            acc = accuracy_exact_pairwise(model, k, received).value;
        } else {
            acc = accuracy_monte_carlo(model, k, received, inner_trials, local.substream(1)).value;
        }
        out.accuracies.push_back(acc);
        outages += (acc <= a_th);
    }
    const double n = static_cast<double>(trials);
    out.value = static_cast<double>(outages) / n;
    out.standard_error = std::sqrt(out.value * (1.0 - out.value) / n);
    return out;
}

/// Every InfOut estimator at one operating point.
struct OutageReport {
    std::size_t k = 0;
    std::size_t s = 0;
    Probability p_act;
    double g_threshold = 0.0;
    Probability infout_gaussian;
    std::optional<Probability> infout_exact;
    std::optional<EmpiricalOutage> infout_empirical;
};

inline OutageReport analyze_operating_point(const GmmModel& model, Probability p_act,
                                            std::size_t k, std::size_t s, double a_th,
                                            std::size_t trials, std::size_t inner_trials,
                                            const RngStream& rng) {
    const auto profile = dg_profile(model);
    const auto dist = receive_dg_distribution(profile, s, p_act);
    OutageReport report;
    report.k = k;
    report.s = s;
    report.p_act = p_act;
    report.g_threshold = dg_threshold(a_th, model.classes());
    report.infout_gaussian = infout_gaussian(dist, k, report.g_threshold);
    try {
        report.infout_exact = infout_exact(dist, k, report.g_threshold);
    } catch (const CapacityError&) {
        report.infout_exact.reset();
    }
    if (trials > 0) {
        report.infout_empirical = infout_empirical(model, p_act, k, s, a_th, trials, inner_trials, rng);
    }
    return report;
}

inline std::vector<std::string> outage_report_header() {
    return {"k", "s", "p_act", "g_th", "infout_gaussian", "infout_exact", "infout_empirical", "stderr"};
}

inline std::vector<std::string> to_csv_fields(const OutageReport& r) {
    const double nan = std::nan("");
    return {std::to_string(r.k),
            std::to_string(r.s),
            csv::format_real(r.p_act),
            csv::format_real(r.g_threshold),
            csv::format_real(r.infout_gaussian),
            csv::format_real(r.infout_exact ? r.infout_exact->value() : nan),
            csv::format_real(r.infout_empirical ? r.infout_empirical->value : nan),
            csv::format_real(r.infout_empirical ? r.infout_empirical->standard_error : nan)};
}

} // namespace infout

#endif
