#ifndef INFOUT_CNN_DG_PIPELINE_HPP
#define INFOUT_CNN_DG_PIPELINE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "infout/c2_optimizer.hpp"
#include "infout/channel_latency.hpp"
#include "infout/csv.hpp"
#include "infout/errors.hpp"
#include "infout/gmm.hpp"
#include "infout/linear_classifier.hpp"
#include "infout/numerics.hpp"

namespace infout {

/// Device/server split of a classifier plus its labelled calibration set.
/// extract_features must be a function of (sample, k, rng state) only and
/// infer a function of its input only.
class InferenceBackend {
public:
    virtual ~InferenceBackend() = default;

    virtual std::size_t dimension() const = 0;
    virtual std::size_t dataset_size() const = 0;
    virtual std::size_t label_of(std::size_t sample) const = 0;

    /// Feature vector of `sample` computed from a batch of k observations.
    virtual FeatureVector extract_features(std::size_t sample, std::size_t k, RngStream& rng) const = 0;

    /// Predicted class of a masked feature vector (lost entries are zero).
    virtual std::size_t infer(std::span<const double> masked) const = 0;
};

/// Backend built on a GMM and the Mahalanobis classifier. Sample i has label
/// i mod L. Without a pool every extraction draws k fresh observations of the
/// sample's class; with a pool of P observations per sample the batch is
/// drawn uniformly without replacement from that fixed pool.
class GmmBackend final : public InferenceBackend {
public:
    GmmBackend(GmmModel model, std::size_t dataset_size, std::size_t pool_size = 0,
               std::uint64_t pool_seed = 0)
        : model_(std::move(model)), size_(dataset_size) {
        if (dataset_size == 0) {
            throw DomainError("GmmBackend: dataset must be non-empty");
        }
        if (pool_size > 0) {
            pools_.resize(size_);
            for (std::size_t i = 0; i < size_; ++i) {
                RngStream rng(pool_seed, i);
                pools_[i] = sample_observations(model_, label_of(i), pool_size, rng);
            }
        }
    }

    const GmmModel& model() const noexcept { return model_; }
    std::size_t dimension() const override { return model_.dimension(); }
    std::size_t dataset_size() const override { return size_; }
    std::size_t label_of(std::size_t sample) const override { return sample % model_.classes(); }

    FeatureVector extract_features(std::size_t sample, std::size_t k, RngStream& rng) const override {
        if (sample >= size_) {
            throw DomainError("GmmBackend: sample index out of range");
        }
        if (pools_.empty()) {
            return fuse(sample_observations(model_, label_of(sample), k, rng)).values;
        }
        const auto& pool = pools_[sample];
        if (k > pool.size()) {
            throw DomainError("GmmBackend: batch larger than the observation pool");
        }
        std::vector<std::size_t> idx(pool.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::vector<FeatureVector> batch;
        batch.reserve(k);
        for (std::size_t j = 0; j < k; ++j) {
            const auto pick = j + static_cast<std::size_t>(rng() % (pool.size() - j));
            std::swap(idx[j], idx[pick]);
            batch.push_back(pool[idx[j]]);
        }
        return fuse(batch).values;
    }

    std::size_t infer(std::span<const double> masked) const override {
        ReceivedFeatureSet received;
        for (std::size_t d = 0; d < masked.size(); ++d) {
            if (masked[d] != 0.0) {
                received.indices.push_back(d);
                received.values.push_back(masked[d]);
            }
        }
        return classify_or_default(model_, received);
    }

private:
    GmmModel model_;
    std::size_t size_;
    std::vector<std::vector<FeatureVector>> pools_;
};

/// G = alpha Q^-1(beta (1 - a)).
struct DgMapping {
    double alpha = 1.0;
    double beta = 1.0;

    static constexpr double kSaturation = 1e-6;

    void validate() const {
        if (!(alpha > 0.0) || !(beta > 0.0) || !std::isfinite(alpha) || !std::isfinite(beta)) {
            throw ConfigError("DgMapping: alpha and beta must be finite and > 0");
        }
    }
};

inline double accuracy_to_dg(const DgMapping& m, Probability a) {
    m.validate();
    const double arg = m.beta * (1.0 - a);
    if (!(arg > 0.0 && arg < 1.0)) {
        throw DomainError("accuracy_to_dg: accuracy " + std::to_string(a.value()) +
                          " saturates the mapping");
    }
    return m.alpha * inverse_q(arg);
}

/// As accuracy_to_dg, with beta (1 - a) clipped into
/// [kSaturation, 1 - kSaturation]. `saturated` reports whether clipping
/// happened.
inline double accuracy_to_dg_clipped(const DgMapping& m, Probability a, bool& saturated) {
    m.validate();
    const double arg = m.beta * (1.0 - a);
    const double lo = DgMapping::kSaturation;
    const double hi = 1.0 - DgMapping::kSaturation;
    saturated = !(arg >= lo && arg <= hi);
    return m.alpha * inverse_q(std::clamp(arg, lo, hi));
}

/// Inverse map a = 1 - Q(G / alpha) / beta.
inline double dg_to_accuracy(const DgMapping& m, double g) {
    m.validate();
    return 1.0 - q_function(g / m.alpha) / m.beta;
}

inline constexpr double kActivationGridStep = 0.05;

/// Grid index of p_act; p_act must sit on the 0.05 grid.
inline long activation_key(double p_act) {
    const double scaled = p_act / kActivationGridStep;
    const double idx = std::round(scaled);
    if (!(std::abs(scaled - idx) <= 1e-6) || p_act < 0.0 || p_act > 1.0) {
        throw DomainError("p_act " + std::to_string(p_act) + " is not on the 0.05 grid");
    }
    return static_cast<long>(idx);
}

struct DgTableEntry {
    double mu_hat = 0.0;
    double sigma_hat = 0.0;
    std::size_t trial_count = 0;
    std::size_t saturated_trials = 0;
};

/// Receive-DG mean and spread per (k, s, p_act) key. Lookup of an absent key
/// throws; nothing is interpolated.
class DgLookupTable {
public:
    using Key = std::tuple<std::size_t, std::size_t, long>;

    void insert(std::size_t k, std::size_t s, double p_act, DgTableEntry entry) {
        entries_[{k, s, activation_key(p_act)}] = entry;
    }

    bool contains(std::size_t k, std::size_t s, double p_act) const {
        return entries_.count({k, s, activation_key(p_act)}) > 0;
    }

    const DgTableEntry& at(std::size_t k, std::size_t s, double p_act) const {
        const auto it = entries_.find({k, s, activation_key(p_act)});
        if (it == entries_.end()) {
            throw LookupError("DG lookup table has no entry for k=" + std::to_string(k) +
                              ", s=" + std::to_string(s) + ", p_act=" + csv::format_real(p_act));
        }
        return it->second;
    }

    std::size_t size() const noexcept { return entries_.size(); }
    const std::map<Key, DgTableEntry>& entries() const noexcept { return entries_; }

    static std::vector<std::string> header() {
        return {"k", "s", "p_act", "mu_hat", "sigma_hat", "n", "saturated_trials"};
    }

    void write_csv(std::ostream& os) const {
        csv::write_row(os, header());
        for (const auto& [key, e] : entries_) {
            const auto& [k, s, p] = key;
            csv::write_row(os, {std::to_string(k), std::to_string(s),
                                csv::format_real(static_cast<double>(p) * kActivationGridStep),
                                csv::format_real(e.mu_hat), csv::format_real(e.sigma_hat),
                                std::to_string(e.trial_count), std::to_string(e.saturated_trials)});
        }
    }

    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw IoError("cannot write lookup table '" + path + "'");
        }
        write_csv(out);
        if (!out) {
            throw IoError("write failed for lookup table '" + path + "'");
        }
    }

    static DgLookupTable read_csv(std::istream& is) {
        std::vector<std::string> row;
        if (!csv::read_row(is, row) || row != header()) {
            throw ConfigError("lookup table: unexpected header");
        }
        DgLookupTable table;
        std::size_t line = 1;
        while (csv::read_row(is, row)) {
            ++line;
            if (row.size() == 1 && row[0].empty()) {
                continue;
            }
            if (row.size() != 7) {
                throw ConfigError("lookup table line " + std::to_string(line) + ": expected 7 fields");
            }
            auto count = [&](const std::string& f) {
                const double v = csv::parse_real(f);
                if (!(v >= 0.0) || v != std::floor(v)) {
                    throw ConfigError("lookup table line " + std::to_string(line) +
                                      ": bad count '" + f + "'");
                }
                return static_cast<std::size_t>(v);
            };
            DgTableEntry e{csv::parse_real(row[3]), csv::parse_real(row[4]), count(row[5]), count(row[6])};
            table.insert(count(row[0]), count(row[1]), csv::parse_real(row[2]), e);
        }
        return table;
    }

    static DgLookupTable load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            throw IoError("cannot open lookup table '" + path + "'");
        }
        return read_csv(in);
    }

private:
    std::map<Key, DgTableEntry> entries_;
};

struct TableGrid {
    std::vector<double> p_act;
    std::vector<std::size_t> k;
    std::vector<std::size_t> s;
};

/// Dimensions of the s largest |x_d|; ties keep the lower index.
inline std::vector<std::size_t> top_magnitudes(const FeatureVector& x, std::size_t s) {
    std::vector<std::size_t> idx(x.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    s = std::min(s, x.size());
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(s), idx.end(),
                      [&](std::size_t a, std::size_t b) {
                          const double ma = std::abs(x[a]);
                          const double mb = std::abs(x[b]);
                          return ma > mb || (ma == mb && a < b);
                      });
    idx.resize(s);
    return idx;
}

/// Accuracy of one pass over the calibration set at (k, s, p_act): every
/// sample gets its own batch and its own erasure draw on its top-s entries.
inline double trial_accuracy(const InferenceBackend& backend, std::size_t k, std::size_t s,
                             Probability p_act, RngStream& rng) {
    std::size_t correct = 0;
    FeatureVector masked(backend.dimension());
    for (std::size_t i = 0; i < backend.dataset_size(); ++i) {
        const auto x = backend.extract_features(i, k, rng);
        std::fill(masked.begin(), masked.end(), 0.0);
        for (auto d : top_magnitudes(x, s)) {
            if (rng.bernoulli(p_act)) {
                masked[d] = x[d];
            }
        }
        correct += backend.infer(masked) == backend.label_of(i);
    }
    return static_cast<double>(correct) / static_cast<double>(backend.dataset_size());
}

struct KeyPair {
    std::size_t k = 0;
    std::size_t s = 0;
};

/// Sample mean and unbiased standard deviation of the per-trial receive DG
/// for every (p_act, pair) key. Key number j (p_act outer, pairs inner) runs
/// trial n on rng.substream(j).substream(n).
inline DgLookupTable estimate_lookup_table(const InferenceBackend& backend, const std::vector<double>& p_act,
                                           const std::vector<KeyPair>& pairs, std::size_t trials,
                                           const DgMapping& mapping, const RngStream& rng) {
    if (trials < 2) {
        throw DomainError("estimate_lookup_table: need at least two trials");
    }
    if (p_act.empty() || pairs.empty()) {
        throw DomainError("estimate_lookup_table: empty grid");
    }
    if (backend.dataset_size() == 0) {
        throw DomainError("estimate_lookup_table: empty calibration set");
    }
    for (const auto& [k, s] : pairs) {
        if (k < 1 || s < 1 || s > backend.dimension()) {
            throw DomainError("estimate_lookup_table: grid key out of range");
        }
    }
    DgLookupTable table;
    std::uint64_t key = 0;
    for (double p : p_act) {
        activation_key(p);
        const Probability pa(p);
        for (const auto& [k, s] : pairs) {
            const RngStream key_rng = rng.substream(key++);
            std::vector<double> g(trials);
            DgTableEntry e;
            e.trial_count = trials;
            for (std::size_t n = 0; n < trials; ++n) {
                RngStream local = key_rng.substream(n);
                bool sat = false;
                g[n] = accuracy_to_dg_clipped(mapping, Probability(trial_accuracy(backend, k, s, pa, local)), sat);
                e.saturated_trials += sat;
            }
            e.mu_hat = std::accumulate(g.begin(), g.end(), 0.0) / static_cast<double>(trials);
            double ss = 0.0;
            for (double v : g) {
                ss += (v - e.mu_hat) * (v - e.mu_hat);
            }
            e.sigma_hat = std::sqrt(ss / static_cast<double>(trials - 1));
            table.insert(k, s, p, e);
        }
    }
    return table;
}

/// Full product grid; pairs run k outer, s inner.
inline DgLookupTable estimate_lookup_table(const InferenceBackend& backend, const TableGrid& grid,
                                           std::size_t trials, const DgMapping& mapping,
                                           const RngStream& rng) {
    std::vector<KeyPair> pairs;
    for (auto k : grid.k) {
        for (auto s : grid.s) {
            pairs.push_back({k, s});
        }
    }
    return estimate_lookup_table(backend, grid.p_act, pairs, trials, mapping, rng);
}

/// The (K(S), S) pairs for every S in the feasible range.
inline std::vector<KeyPair> deadline_pairs(const ChannelLatencyConfig& cfg, std::size_t dimension) {
    const auto range = feasible_feature_range(cfg, dimension);
    if (range.empty()) {
        throw InfeasibleError("deadline admits no (K, S) pair");
    }
    std::vector<KeyPair> pairs;
    for (std::size_t s = range.s_min; s <= range.s_max; ++s) {
        pairs.push_back({max_observations_for(s, cfg), s});
    }
    return pairs;
}

/// (mu_hat - g_th) / sigma_hat.
inline double psi_surrogate(const DgLookupTable& table, std::size_t k, std::size_t s, double p_act,
                            double g_th) {
    const auto& e = table.at(k, s, p_act);
    if (!(e.sigma_hat > 0.0)) {
        throw DegenerateError("psi_surrogate: zero spread at k=" + std::to_string(k) +
                              ", s=" + std::to_string(s));
    }
    return (e.mu_hat - g_th) / e.sigma_hat;
}

/// Pr(G < g_th) under the fitted normal: Q(psi).
inline Probability infout_cnn(const DgLookupTable& table, std::size_t k, std::size_t s, double p_act,
                              double g_th) {
    return q_function(psi_surrogate(table, k, s, p_act, g_th));
}

/// DG threshold for accuracy a_th under the mapping.
inline double cnn_dg_threshold(const DgMapping& mapping, double a_th) {
    return accuracy_to_dg(mapping, Probability(a_th));
}

/// Argmax of psi(K(S), S) over S in [S_min, S_max] by a scan of the table.
/// Ties go to the smaller S.
inline SurrogateSolution scan_features_cnn(const DgLookupTable& table, const ChannelLatencyConfig& cfg,
                                           std::size_t dimension, double p_act, double a_th,
                                           const DgMapping& mapping) {
    const auto range = feasible_feature_range(cfg, dimension);
    if (range.empty()) {
        throw InfeasibleError("scan_features_cnn: deadline admits no (K, S) pair");
    }
    const double g_th = cnn_dg_threshold(mapping, a_th);
    SurrogateSolution best;
    best.solved_by = SolvedBy::exhaustive_scan;
    best.f_value = -std::numeric_limits<double>::infinity();
    for (std::size_t s = range.s_min; s <= range.s_max; ++s) {
        const auto k = max_observations_for(s, cfg);
        const double v = psi_surrogate(table, k, s, p_act, g_th);
        if (v > best.f_value) {
            best.f_value = v;
            best.s_star = s;
            best.k_star = k;
        }
    }
    return best;
}

/// Bisection on the sign of the forward difference psi(S+1) - psi(S), which
/// finds the maximiser of a unimodal psi in O(log(S_max - S_min + 1))
/// lookups. The result is then checked against the full scan; if psi is not
/// unimodal on the table the scan result is returned and marked as such.
inline SurrogateSolution optimize_features_cnn(const DgLookupTable& table,
                                               const ChannelLatencyConfig& cfg, std::size_t dimension,
                                               double p_act, double a_th, const DgMapping& mapping) {
    const auto range = feasible_feature_range(cfg, dimension);
    if (range.empty()) {
        throw InfeasibleError("optimize_features_cnn: deadline admits no (K, S) pair");
    }
    const double g_th = cnn_dg_threshold(mapping, a_th);
    auto psi = [&](std::size_t s) {
        return psi_surrogate(table, max_observations_for(s, cfg), s, p_act, g_th);
    };
    std::size_t lo = range.s_min;
    std::size_t hi = range.s_max;
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (psi(mid + 1) > psi(mid)) {
            lo = mid + 1;
        } else {
            hi = mid;
        }
    }
    SurrogateSolution sol;
    sol.s_star = lo;
    sol.k_star = max_observations_for(lo, cfg);
    sol.f_value = psi(lo);
    sol.solved_by = (lo == range.s_min || lo == range.s_max) ? SolvedBy::endpoint : SolvedBy::interior_root;
    const auto scan = scan_features_cnn(table, cfg, dimension, p_act, a_th, mapping);
    if (scan.f_value > sol.f_value) {
        return scan;
    }
    return sol;
}

} // namespace infout

#endif
