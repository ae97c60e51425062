#ifndef INFOUT_CHANNEL_LATENCY_HPP
#define INFOUT_CHANNEL_LATENCY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "infout/errors.hpp"
#include "infout/numerics.hpp"

namespace infout {

/// Per-slot feature transmission over Rayleigh block fading plus the
/// on-device compute budget. SI units throughout.
struct ChannelLatencyConfig {
    double transmit_power = 5e-3;           // p [W]
    double bandwidth = 5e6;                 // B_W [Hz]
    double noise_density = 1e-9;            // N_0 [W/Hz]
    double slot_length = 0.3e-3;            // T_Delta [s]
    double bits_per_feature = 16;           // Q_B
    double bits_per_index = 9;              // Q_I
    double compute_speed = 1e12;            // f_c [FLOP/s]
    double flops_per_observation = 936.2e6; // N_F
    double deadline = 10e-3;                // T [s]
    /// K_max; unset means floor(B0).
    std::optional<std::size_t> max_observations;

    void validate() const {
        auto positive = [](double v, const char* name) {
            if (!(v > 0.0) || !std::isfinite(v)) {
                throw ConfigError(std::string("channel/latency field '") + name +
                                  "' must be finite and > 0");
            }
        };
        positive(transmit_power, "transmit_power");
        positive(bandwidth, "bandwidth");
        positive(noise_density, "noise_density");
        positive(slot_length, "slot_length");
        positive(bits_per_feature, "bits_per_feature");
        positive(bits_per_index, "bits_per_index");
        positive(compute_speed, "compute_speed");
        positive(flops_per_observation, "flops_per_observation");
        positive(deadline, "deadline");
        if (max_observations && *max_observations == 0) {
            throw ConfigError("channel/latency field 'max_observations' must be >= 1");
        }
    }

    /// Observations that fit in the whole deadline, f_c T / N_F.
    double b0() const { return compute_speed * deadline / flops_per_observation; }
    /// Observations displaced by one feature slot, f_c T_Delta / N_F.
    double b1() const { return compute_speed * slot_length / flops_per_observation; }

    std::size_t k_max() const {
        if (max_observations) {
            return *max_observations;
        }
        return static_cast<std::size_t>(std::floor(b0() + 1e-9));
    }
};

/// Index bits for a D-dimensional feature space, ceil(log2 D).
inline double index_bits_for(std::size_t dimension) {
    if (dimension < 1) {
        throw DomainError("index_bits_for: dimension must be >= 1");
    }
    return std::ceil(std::log2(static_cast<double>(dimension)));
}

/// Rayleigh-fading probability that one slot cannot carry Q_B + Q_I bits.
inline Probability channel_outage_probability(const ChannelLatencyConfig& cfg) {
    cfg.validate();
    const double bits = cfg.bits_per_feature + cfg.bits_per_index;
    const double snr_needed = std::expm1(std::log(2.0) * bits / (cfg.slot_length * cfg.bandwidth));
    const double scale = cfg.noise_density * cfg.bandwidth / cfg.transmit_power;
    return clamp_probability(-std::expm1(-scale * snr_needed));
}

inline Probability activation_probability(const ChannelLatencyConfig& cfg) {
    return channel_outage_probability(cfg).complement();
}

/// Fraction of `slots` Rayleigh draws h ~ CN(0,1) whose slot rate falls below
/// the required bits. Validation oracle for the closed form; not used on
/// the simulation hot path.
inline double fading_outage_monte_carlo(const ChannelLatencyConfig& cfg, std::size_t slots,
                                        RngStream rng) {
    cfg.validate();
    const double bits = cfg.bits_per_feature + cfg.bits_per_index;
    const double snr_scale = cfg.transmit_power / (cfg.noise_density * cfg.bandwidth);
    std::normal_distribution<double> component(0.0, std::sqrt(0.5));
    std::size_t outages = 0;
    for (std::size_t i = 0; i < slots; ++i) {
        const double re = component(rng);
        const double im = component(rng);
        const double rate = cfg.bandwidth * std::log2(1.0 + snr_scale * (re * re + im * im));
        outages += (cfg.slot_length * rate < bits);
    }
    return static_cast<double>(outages) / static_cast<double>(slots);
}

struct ErasurePattern {
    std::vector<std::size_t> sent;
    std::vector<bool> received_mask;

    std::vector<std::size_t> received() const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < sent.size(); ++i) {
            if (received_mask[i]) {
                out.push_back(sent[i]);
            }
        }
        return out;
    }
    std::size_t received_count() const {
        std::size_t n = 0;
        for (bool b : received_mask) {
            n += b;
        }
        return n;
    }
};

/// i.i.d. Bernoulli(p_act) reception of the listed features.
inline ErasurePattern simulate_erasures(std::vector<std::size_t> sent, Probability p_act,
                                        RngStream& rng) {
    ErasurePattern pattern{std::move(sent), {}};
    pattern.received_mask.reserve(pattern.sent.size());
    for (std::size_t i = 0; i < pattern.sent.size(); ++i) {
        pattern.received_mask.push_back(rng.bernoulli(p_act));
    }
    return pattern;
}

/// Erasures for features 0..s-1.
inline ErasurePattern simulate_erasures(std::size_t s, Probability p_act, RngStream& rng) {
    if (s < 1) {
        throw DomainError("simulate_erasures: need at least one sent feature");
    }
    std::vector<std::size_t> sent(s);
    for (std::size_t i = 0; i < s; ++i) {
        sent[i] = i;
    }
    return simulate_erasures(std::move(sent), p_act, rng);
}

/// T_Delta s + K N_F / f_c.
inline double latency_of(std::size_t k, std::size_t s, const ChannelLatencyConfig& cfg) {
    return cfg.slot_length * static_cast<double>(s) +
           static_cast<double>(k) * cfg.flops_per_observation / cfg.compute_speed;
}

/// Deadline test shared by every enumerator. The relative slack absorbs the
/// rounding in latency_of so that exact fits such as 2 x 5 ms are feasible.
inline bool within_deadline(std::size_t k, std::size_t s, const ChannelLatencyConfig& cfg) {
    return latency_of(k, s, cfg) <= cfg.deadline * (1.0 + 1e-12);
}

/// Largest K with latency_of(K, s) <= T, clamped to [0, K_max]. Zero means no
/// observation fits beside s slots.
inline std::size_t max_observations_for(std::size_t s, const ChannelLatencyConfig& cfg) {
    cfg.validate();
    const double raw = cfg.b0() - cfg.b1() * static_cast<double>(s);
    auto k = static_cast<std::size_t>(std::max(0.0, std::floor(raw)));
    while (k > 0 && !within_deadline(k, s, cfg)) {
        --k;
    }
    while (within_deadline(k + 1, s, cfg)) {
        ++k;
    }
    return std::min(k, cfg.k_max());
}

/// [S_min, S_max] of the relaxed feature-count problem:
/// S_min = max(1, ceil((B0 - K_max) / B1)), S_max = min(largest s leaving one
/// observation, D). Empty when s_min > s_max.
struct FeatureRange {
    std::size_t s_min = 1;
    std::size_t s_max = 0;
    bool empty() const noexcept { return s_min > s_max; }
};

inline FeatureRange feasible_feature_range(const ChannelLatencyConfig& cfg, std::size_t dimension) {
    cfg.validate();
    FeatureRange r;
    const double lower = (cfg.b0() - static_cast<double>(cfg.k_max())) / cfg.b1();
    r.s_min = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::max(0.0, std::ceil(lower - 1e-9))));
    std::size_t s = 0;
    while (s < dimension && within_deadline(1, s + 1, cfg)) {
        ++s;
    }
    r.s_max = s;
    return r;
}

} // namespace infout

#endif
