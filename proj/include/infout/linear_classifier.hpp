#ifndef INFOUT_LINEAR_CLASSIFIER_HPP
#define INFOUT_LINEAR_CLASSIFIER_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <vector>

#include "infout/errors.hpp"
#include "infout/gmm.hpp"
#include "infout/numerics.hpp"

namespace infout {

/// Features that survived the channel, with their original dimension indices.
struct ReceivedFeatureSet {
    std::vector<std::size_t> indices;
    std::vector<double> values;
    std::size_t observation_count = 1;
};

enum class AccuracyMethod { exact_pairwise, monte_carlo, lower_bound };

/// `value` is kept as a raw double: the union lower bound can go negative.
struct AccuracyEstimate {
    double value = 0.0;
    double standard_error = 0.0;
    AccuracyMethod method = AccuracyMethod::exact_pairwise;

    bool is_probability() const noexcept { return value >= 0.0 && value <= 1.0; }
    Probability probability() const { return Probability(value); }
};

namespace detail {

inline void check_subset(const GmmModel& model, const std::vector<std::size_t>& subset) {
    std::vector<bool> seen(model.dimension(), false);
    for (auto d : subset) {
        if (d >= model.dimension()) {
            throw DomainError("feature index out of range");
        }
        if (seen[d]) {
            throw DomainError("duplicate feature index");
        }
        seen[d] = true;
    }
}

} // namespace detail

/// Minimum squared Mahalanobis distance class over the received dimensions.
/// Exact ties go to the lowest class index.
inline std::size_t classify(const GmmModel& model, const ReceivedFeatureSet& received) {
    if (received.indices.empty()) {
        throw ClassificationError("classify: empty received feature set");
    }
    if (received.indices.size() != received.values.size()) {
        throw DomainError("classify: indices and values differ in length");
    }
    const double k = static_cast<double>(received.observation_count);
    std::size_t best = 0;
    double best_dist = std::numeric_limits<double>::infinity();
    for (std::size_t l = 0; l < model.classes(); ++l) {
        const auto& mu = model.centroid(l);
        double dist = 0.0;
        for (std::size_t i = 0; i < received.indices.size(); ++i) {
            const auto d = received.indices[i];
            const double diff = received.values[i] - mu.at(d);
            dist += diff * diff * k / model.covariance(d);
        }
        if (dist < best_dist) {
            best_dist = dist;
            best = l;
        }
    }
    return best;
}

/// classify(), except that a fully lost feature set predicts class 0.
inline std::size_t classify_or_default(const GmmModel& model, const ReceivedFeatureSet& received) {
    return received.indices.empty() ? 0 : classify(model, received);
}

/// a_low = 1 - (L-1) Q(sqrt(K g_r) / 2). Can be negative for large L.
inline AccuracyEstimate accuracy_lower_bound(std::size_t classes, std::size_t k, double g_r) {
    if (classes < 2 || k < 1 || !(g_r >= 0.0)) {
        throw DomainError("accuracy_lower_bound: need L >= 2, K >= 1, g_r >= 0");
    }
    const double tail = q_function(std::sqrt(static_cast<double>(k) * g_r) / 2.0);
    return {1.0 - static_cast<double>(classes - 1) * tail, 0.0, AccuracyMethod::lower_bound};
}

/// Receive DG per observation of a received subset: sum of the per-dimension
/// minimum gains.
inline double receive_dg(const DgProfile& profile, const std::vector<std::size_t>& subset) {
    double g = 0.0;
    for (auto d : subset) {
        g += profile.gain_of_dimension(d);
    }
    return g;
}

/// Exact two-class accuracy 1 - Q(sqrt(K G_R) / 2).
inline AccuracyEstimate accuracy_exact_pairwise(const GmmModel& model, std::size_t k,
                                                const std::vector<std::size_t>& subset) {
    if (model.classes() != 2) {
        throw DomainError("accuracy_exact_pairwise: only defined for two classes");
    }
    if (k < 1) {
        throw DomainError("accuracy_exact_pairwise: K must be >= 1");
    }
    detail::check_subset(model, subset);
    double g = 0.0;
    for (auto d : subset) {
        g += pairwise_dg(model, d, 0, 1);
    }
    const double acc = 1.0 - q_function(std::sqrt(static_cast<double>(k) * g) / 2.0);
    return {acc, 0.0, AccuracyMethod::exact_pairwise};
}

/// Monte-Carlo accuracy: uniform label, K fused observations, classification
/// on `subset`. Trials are split into fixed chunks, each on its own
/// substream, so the tally does not depend on how chunks are scheduled.
inline AccuracyEstimate accuracy_monte_carlo(const GmmModel& model, std::size_t k,
                                             const std::vector<std::size_t>& subset,
                                             std::size_t trials, const RngStream& rng) {
    if (trials < 1) {
        throw DomainError("accuracy_monte_carlo: need at least one trial");
    }
    if (k < 1) {
        throw DomainError("accuracy_monte_carlo: K must be >= 1");
    }
    detail::check_subset(model, subset);
    constexpr std::size_t chunk = 4096;
    std::size_t correct = 0;
    ReceivedFeatureSet received{subset, {}, k};
    for (std::size_t start = 0, c = 0; start < trials; start += chunk, ++c) {
        RngStream local = rng.substream(c);
        const std::size_t stop = std::min(trials, start + chunk);
        for (std::size_t t = start; t < stop; ++t) {
            const auto label = static_cast<std::size_t>(local() % model.classes());
            if (subset.empty()) {
                correct += (label == 0);
                continue;
            }
            received.values = sample_fused_on(model, label, k, subset, local);
            correct += (classify(model, received) == label);
        }
    }
    const double n = static_cast<double>(trials);
    const double a = static_cast<double>(correct) / n;
    return {a, std::sqrt(a * (1.0 - a) / n), AccuracyMethod::monte_carlo};
}

} // namespace infout

#endif
