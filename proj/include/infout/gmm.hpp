#ifndef INFOUT_GMM_HPP
#define INFOUT_GMM_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "infout/errors.hpp"
#include "infout/numerics.hpp"

namespace infout {

using FeatureVector = std::vector<double>;

/// Smallest admissible diagonal covariance entry.
inline constexpr double kMinCovariance = 1e-12;

/// Gaussian mixture with L equiprobable classes sharing one diagonal
/// covariance. Immutable after construction.
class GmmModel {
public:
    GmmModel(std::vector<FeatureVector> centroids, FeatureVector covariance_diag)
        : centroids_(std::move(centroids)), covariance_(std::move(covariance_diag)) {
        if (centroids_.size() < 2) {
            throw DomainError("GmmModel: need at least two classes");
        }
        if (covariance_.empty()) {
            throw DomainError("GmmModel: dimension must be at least one");
        }
        for (std::size_t d = 0; d < covariance_.size(); ++d) {
            if (!std::isfinite(covariance_[d]) || covariance_[d] < kMinCovariance) {
                throw DomainError("GmmModel: covariance_diag column " + std::to_string(d) +
                                  " must be finite and >= 1e-12");
            }
        }
        for (std::size_t l = 0; l < centroids_.size(); ++l) {
            if (centroids_[l].size() != covariance_.size()) {
                throw DomainError("GmmModel: centroid row " + std::to_string(l) + " has " +
                                  std::to_string(centroids_[l].size()) + " entries, expected " +
                                  std::to_string(covariance_.size()));
            }
            for (std::size_t d = 0; d < covariance_.size(); ++d) {
                if (!std::isfinite(centroids_[l][d])) {
                    throw DomainError("GmmModel: centroid row " + std::to_string(l) + ", column " +
                                      std::to_string(d) + " is not finite");
                }
            }
        }
    }

    std::size_t classes() const noexcept { return centroids_.size(); }
    std::size_t dimension() const noexcept { return covariance_.size(); }
    const FeatureVector& centroid(std::size_t label) const { return centroids_.at(label); }
    const std::vector<FeatureVector>& centroids() const noexcept { return centroids_; }
    const FeatureVector& covariance_diag() const noexcept { return covariance_; }
    double covariance(std::size_t dim) const { return covariance_.at(dim); }

private:
    std::vector<FeatureVector> centroids_;
    FeatureVector covariance_;
};

/// Two classes with centroids at +scale and -scale in every dimension and
/// variance slope*(d+1) + offset in dimension d (0-based).
inline GmmModel symmetric_two_class_model(std::size_t dimension, double centroid_scale = 1.0,
                                          double variance_slope = 2.0 / 3.0,
                                          double variance_offset = 10.0) {
    FeatureVector plus(dimension, centroid_scale);
    FeatureVector minus(dimension, -centroid_scale);
    FeatureVector cov(dimension);
    for (std::size_t d = 0; d < dimension; ++d) {
        cov[d] = variance_slope * static_cast<double>(d + 1) + variance_offset;
    }
    return GmmModel({plus, minus}, cov);
}

/// Average-pooled feature of K observations.
struct FusedFeature {
    FeatureVector values;
    std::size_t observation_count = 0;
    std::size_t true_label = 0;
};

/// Draw K i.i.d. observations from N(mu_label, C).
inline std::vector<FeatureVector> sample_observations(const GmmModel& model, std::size_t label,
                                                      std::size_t k, RngStream& rng) {
    if (label >= model.classes()) {
        throw DomainError("sample_observations: label out of range");
    }
    if (k == 0) {
        throw DomainError("sample_observations: need at least one observation");
    }
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto& mu = model.centroid(label);
    std::vector<FeatureVector> out(k, FeatureVector(model.dimension()));
    for (auto& obs : out) {
        for (std::size_t d = 0; d < model.dimension(); ++d) {
            obs[d] = mu[d] + std::sqrt(model.covariance(d)) * normal(rng);
        }
    }
    return out;
}

inline FusedFeature fuse(const std::vector<FeatureVector>& observations,
                         std::size_t true_label = 0) {
    if (observations.empty()) {
        throw DomainError("fuse: no observations");
    }
    const std::size_t dim = observations.front().size();
    FusedFeature fused{FeatureVector(dim, 0.0), observations.size(), true_label};
    for (const auto& obs : observations) {
        if (obs.size() != dim) {
            throw DomainError("fuse: ragged observation dimensions");
        }
        for (std::size_t d = 0; d < dim; ++d) {
            fused.values[d] += obs[d];
        }
    }
    for (auto& v : fused.values) {
        v /= static_cast<double>(observations.size());
    }
    return fused;
}

/// Sample K observations of `label` on the listed dimensions only and return
/// their average, aligned with `dims`. Same law as sample_observations + fuse
/// restricted to `dims`; skips the dimensions a classifier never reads.
inline FeatureVector sample_fused_on(const GmmModel& model, std::size_t label, std::size_t k,
                                     std::span<const std::size_t> dims, RngStream& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const auto& mu = model.centroid(label);
    FeatureVector out(dims.size(), 0.0);
    for (std::size_t i = 0; i < dims.size(); ++i) {
        const double sd = std::sqrt(model.covariance(dims[i]));
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
            acc += mu[dims[i]] + sd * normal(rng);
        }
        out[i] = acc / static_cast<double>(k);
    }
    return out;
}

/// Per-dimension pair-wise discriminant gain (mu_l(d) - mu_l'(d))^2 / C_dd.
inline double pairwise_dg(const GmmModel& model, std::size_t dim, std::size_t l1, std::size_t l2) {
    if (dim >= model.dimension() || l1 >= model.classes() || l2 >= model.classes()) {
        throw DomainError("pairwise_dg: index out of range");
    }
    if (l1 == l2) {
        throw DomainError("pairwise_dg: classes must differ");
    }
    const double diff = model.centroid(l1)[dim] - model.centroid(l2)[dim];
    return diff * diff / model.covariance(dim);
}

/// Minimum pair-wise gain per dimension, sorted non-increasing. Ties keep
/// ascending original index. order()[i] is the original dimension holding
/// the i-th largest gain.
class DgProfile {
public:
    DgProfile() = default;

    static DgProfile from_gains(std::vector<double> gains_by_dimension) {
        for (double g : gains_by_dimension) {
            if (!(g >= 0.0) || !std::isfinite(g)) {
                throw DomainError("DgProfile: gains must be finite and non-negative");
            }
        }
        DgProfile p;
        p.order_.resize(gains_by_dimension.size());
        std::iota(p.order_.begin(), p.order_.end(), std::size_t{0});
        std::stable_sort(p.order_.begin(), p.order_.end(), [&](std::size_t a, std::size_t b) {
            return gains_by_dimension[a] > gains_by_dimension[b];
        });
        p.sorted_.reserve(p.order_.size());
        for (auto idx : p.order_) {
            p.sorted_.push_back(gains_by_dimension[idx]);
        }
        p.by_dimension_ = std::move(gains_by_dimension);
        return p;
    }

    std::size_t dimension() const noexcept { return sorted_.size(); }
    const std::vector<double>& sorted_gains() const noexcept { return sorted_; }
    const std::vector<std::size_t>& order() const noexcept { return order_; }
    double gain_of_dimension(std::size_t dim) const { return by_dimension_.at(dim); }

    /// The s largest gains in non-increasing order.
    std::vector<double> top_gains(std::size_t s) const {
        if (s > sorted_.size()) {
            throw DomainError("DgProfile: s exceeds dimension");
        }
        return {sorted_.begin(), sorted_.begin() + static_cast<std::ptrdiff_t>(s)};
    }

private:
    std::vector<double> sorted_;
    std::vector<std::size_t> order_;
    std::vector<double> by_dimension_;
};

inline DgProfile dg_profile(const GmmModel& model) {
    std::vector<double> gains(model.dimension());
    for (std::size_t d = 0; d < model.dimension(); ++d) {
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < model.classes(); ++a) {
            for (std::size_t b = a + 1; b < model.classes(); ++b) {
                best = std::min(best, pairwise_dg(model, d, a, b));
            }
        }
        gains[d] = best;
    }
    return DgProfile::from_gains(std::move(gains));
}

/// Original dimension indices of the s largest gains, largest first.
inline std::vector<std::size_t> select_top_features(const DgProfile& profile, std::size_t s) {
    if (s < 1 || s > profile.dimension()) {
        throw DomainError("select_top_features: s must lie in [1, D]");
    }
    return {profile.order().begin(), profile.order().begin() + static_cast<std::ptrdiff_t>(s)};
}

// Model files: {"centroids": [[...], ...], "covariance_diag": [...]}.

inline GmmModel parse_gmm_model(const nlohmann::json& doc) {
    if (!doc.is_object() || !doc.contains("centroids") || !doc.contains("covariance_diag")) {
        throw ConfigError("model: expected object with 'centroids' and 'covariance_diag'");
    }
    const auto& rows = doc.at("centroids");
    const auto& cov = doc.at("covariance_diag");
    if (!rows.is_array() || rows.size() < 2) {
        throw ConfigError("model: 'centroids' must be an array of at least two rows");
    }
    if (!cov.is_array() || cov.empty()) {
        throw ConfigError("model: 'covariance_diag' must be a non-empty array");
    }
    FeatureVector covariance;
    for (std::size_t c = 0; c < cov.size(); ++c) {
        if (!cov[c].is_number()) {
            throw ConfigError("model: covariance_diag column " + std::to_string(c) +
                              " is not a number");
        }
        const double v = cov[c].get<double>();
        if (!std::isfinite(v) || v < kMinCovariance) {
            throw ConfigError("model: covariance_diag column " + std::to_string(c) +
                              " must be >= 1e-12");
        }
        covariance.push_back(v);
    }
    std::vector<FeatureVector> centroids;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (!row.is_array()) {
            throw ConfigError("model: centroids row " + std::to_string(r) + " is not an array");
        }
        if (row.size() != covariance.size()) {
            throw ConfigError("model: centroids row " + std::to_string(r) + " has " +
                              std::to_string(row.size()) + " columns, expected " +
                              std::to_string(covariance.size()));
        }
        FeatureVector mu;
        for (std::size_t c = 0; c < row.size(); ++c) {
            if (!row[c].is_number() || !std::isfinite(row[c].get<double>())) {
                throw ConfigError("model: centroids row " + std::to_string(r) + ", column " +
                                  std::to_string(c) + " is not a finite number");
            }
            mu.push_back(row[c].get<double>());
        }
        centroids.push_back(std::move(mu));
    }
    return GmmModel(std::move(centroids), std::move(covariance));
}

inline nlohmann::json to_json(const GmmModel& model) {
    return {{"centroids", model.centroids()}, {"covariance_diag", model.covariance_diag()}};
}

inline GmmModel load_gmm_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open model file '" + path + "'");
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("model file '" + path + "': " + e.what());
    }
    return parse_gmm_model(doc);
}

} // namespace infout

#endif
