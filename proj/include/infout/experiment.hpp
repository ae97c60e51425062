#ifndef INFOUT_EXPERIMENT_HPP
#define INFOUT_EXPERIMENT_HPP

#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "infout/c2_optimizer.hpp"
#include "infout/channel_latency.hpp"
#include "infout/csv.hpp"
#include "infout/errors.hpp"
#include "infout/gmm.hpp"
#include "infout/outage_analysis.hpp"

namespace infout {

enum class SweepAxis { features, power, compute_speed, deadline, channel_outage };

inline const char* to_string(SweepAxis a) {
    switch (a) {
    case SweepAxis::features: return "features";
    case SweepAxis::power: return "power";
    case SweepAxis::compute_speed: return "compute_speed";
    case SweepAxis::deadline: return "deadline";
    case SweepAxis::channel_outage: return "channel_outage";
    }
    return "?";
}

inline SweepAxis parse_sweep_axis(const std::string& name) {
    for (auto a : {SweepAxis::features, SweepAxis::power, SweepAxis::compute_speed, SweepAxis::deadline,
                   SweepAxis::channel_outage}) {
        if (name == to_string(a)) {
            return a;
        }
    }
    throw ConfigError("sweep.axis: unknown axis '" + name + "'");
}

/// Model file, or the symmetric two-class synthetic model.
struct ModelSpec {
    std::optional<std::string> file;
    std::size_t dimension = 30;
    double centroid_scale = 1.0;
    double variance_slope = 2.0 / 3.0;
    double variance_offset = 10.0;

    GmmModel build() const {
        if (file) {
            return load_gmm_model(*file);
        }
        return symmetric_two_class_model(dimension, centroid_scale, variance_slope, variance_offset);
    }
};

/// Either an absolute accuracy or a fraction of an explicit reference
/// accuracy.
struct TargetSpec {
    std::optional<double> accuracy;
    std::optional<double> fraction_of_max;
    std::optional<double> reference_accuracy;

    double absolute() const {
        if (accuracy) {
            return *accuracy;
        }
        return *fraction_of_max * *reference_accuracy;
    }
};

struct TrialSpec {
    std::size_t outer = 2000;
    std::size_t inner = 1000;
};

struct Scenario {
    ModelSpec model;
    ChannelLatencyConfig channel;
    /// Overrides the closed-form activation probability.
    std::optional<double> activation_probability;
    TargetSpec target;
    SweepAxis axis = SweepAxis::features;
    std::vector<double> values;
    TrialSpec trials;
    std::uint64_t seed = 0;
    std::size_t oracle_bins = std::size_t{1} << 20;
    bool record_wall_time = false;
};

namespace detail {

inline const nlohmann::json* section(const nlohmann::json& doc, const char* name) {
    if (!doc.contains(name)) {
        return nullptr;
    }
    const auto& s = doc.at(name);
    if (!s.is_object()) {
        throw ConfigError(std::string("section '") + name + "' must be an object");
    }
    return &s;
}

inline double number(const nlohmann::json& sec, const std::string& where, const char* key, double fallback) {
    if (!sec.contains(key)) {
        return fallback;
    }
    const auto& v = sec.at(key);
    if (!v.is_number()) {
        throw ConfigError(where + "." + key + " must be a number");
    }
    return v.get<double>();
}

inline std::size_t count(const nlohmann::json& sec, const std::string& where, const char* key,
                         std::size_t fallback) {
    if (!sec.contains(key)) {
        return fallback;
    }
    const auto& v = sec.at(key);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
        throw ConfigError(where + "." + key + " must be a non-negative integer");
    }
    return v.get<std::size_t>();
}

inline void reject_unknown(const nlohmann::json& sec, const std::string& where,
                           std::initializer_list<const char*> known) {
    for (const auto& [key, value] : sec.items()) {
        bool ok = false;
        for (const char* k : known) {
            ok = ok || key == k;
        }
        if (!ok) {
            throw ConfigError(where + ": unknown key '" + key + "'");
        }
    }
}

} // namespace detail

/// Scenario from a JSON document with sections model, channel, latency,
/// target, sweep, trials and a top-level seed. Relative model paths resolve
/// against `base_dir`.
inline Scenario parse_scenario(const nlohmann::json& doc, const std::filesystem::path& base_dir = {}) {
    using detail::count;
    using detail::number;
    if (!doc.is_object()) {
        throw ConfigError("scenario must be a JSON object");
    }
    detail::reject_unknown(doc, "scenario",
                           {"model", "channel", "latency", "target", "sweep", "trials", "seed", "oracle_bins",
                            "record_wall_time"});
    Scenario sc;
    if (!doc.contains("seed") || !doc.at("seed").is_number_integer() ||
        (!doc.at("seed").is_number_unsigned() && doc.at("seed").get<std::int64_t>() < 0)) {
        throw ConfigError("scenario.seed is required and must be a non-negative integer");
    }
    sc.seed = doc.at("seed").get<std::uint64_t>();
    sc.oracle_bins = count(doc, "scenario", "oracle_bins", sc.oracle_bins);
    if (doc.contains("record_wall_time")) {
        sc.record_wall_time = doc.at("record_wall_time").get<bool>();
    }

    if (const auto* m = detail::section(doc, "model")) {
        detail::reject_unknown(*m, "model",
                               {"file", "dimension", "centroid_scale", "variance_slope", "variance_offset"});
        if (m->contains("file")) {
            std::filesystem::path p = m->at("file").get<std::string>();
            if (p.is_relative() && !base_dir.empty()) {
                p = base_dir / p;
            }
            sc.model.file = p.string();
        }
        sc.model.dimension = count(*m, "model", "dimension", sc.model.dimension);
        sc.model.centroid_scale = number(*m, "model", "centroid_scale", sc.model.centroid_scale);
        sc.model.variance_slope = number(*m, "model", "variance_slope", sc.model.variance_slope);
        sc.model.variance_offset = number(*m, "model", "variance_offset", sc.model.variance_offset);
        if (sc.model.dimension < 1) {
            throw ConfigError("model.dimension must be >= 1");
        }
    }

    auto& ch = sc.channel;
    if (const auto* c = detail::section(doc, "channel")) {
        detail::reject_unknown(*c, "channel",
                               {"transmit_power", "bandwidth", "noise_density", "slot_length",
                                "bits_per_feature", "bits_per_index", "activation_probability"});
        ch.transmit_power = number(*c, "channel", "transmit_power", ch.transmit_power);
        ch.bandwidth = number(*c, "channel", "bandwidth", ch.bandwidth);
        ch.noise_density = number(*c, "channel", "noise_density", ch.noise_density);
        ch.slot_length = number(*c, "channel", "slot_length", ch.slot_length);
        ch.bits_per_feature = number(*c, "channel", "bits_per_feature", ch.bits_per_feature);
        ch.bits_per_index = number(*c, "channel", "bits_per_index", ch.bits_per_index);
        if (c->contains("activation_probability")) {
            const double p = number(*c, "channel", "activation_probability", 0.0);
            if (!(p >= 0.0 && p <= 1.0)) {
                throw ConfigError("channel.activation_probability must lie in [0, 1]");
            }
            sc.activation_probability = p;
        }
    }
    if (const auto* l = detail::section(doc, "latency")) {
        detail::reject_unknown(*l, "latency",
                               {"compute_speed", "flops_per_observation", "deadline", "max_observations"});
        ch.compute_speed = number(*l, "latency", "compute_speed", ch.compute_speed);
        ch.flops_per_observation = number(*l, "latency", "flops_per_observation", ch.flops_per_observation);
        ch.deadline = number(*l, "latency", "deadline", ch.deadline);
        if (l->contains("max_observations")) {
            ch.max_observations = count(*l, "latency", "max_observations", 0);
        }
    }
    ch.validate();

    const auto* t = detail::section(doc, "target");
    if (!t) {
        throw ConfigError("section 'target' is required");
    }
    detail::reject_unknown(*t, "target", {"accuracy", "fraction_of_max", "reference_accuracy"});
    if (t->contains("accuracy")) {
        if (t->contains("fraction_of_max")) {
            throw ConfigError("target: give either 'accuracy' or 'fraction_of_max', not both");
        }
        sc.target.accuracy = number(*t, "target", "accuracy", 0.0);
    } else if (t->contains("fraction_of_max")) {
        if (!t->contains("reference_accuracy")) {
            throw ConfigError("target.fraction_of_max needs target.reference_accuracy");
        }
        sc.target.fraction_of_max = number(*t, "target", "fraction_of_max", 0.0);
        sc.target.reference_accuracy = number(*t, "target", "reference_accuracy", 0.0);
    } else {
        throw ConfigError("target: need 'accuracy' or 'fraction_of_max'");
    }
    const double a_th = sc.target.absolute();
    if (!(a_th > 0.0 && a_th < 1.0)) {
        throw ConfigError("target accuracy must lie in (0, 1)");
    }

    const auto* sw = detail::section(doc, "sweep");
    if (!sw) {
        throw ConfigError("section 'sweep' is required");
    }
    detail::reject_unknown(*sw, "sweep", {"axis", "values"});
    if (!sw->contains("axis") || !sw->at("axis").is_string()) {
        throw ConfigError("sweep.axis must be a string");
    }
    sc.axis = parse_sweep_axis(sw->at("axis").get<std::string>());
    if (!sw->contains("values") || !sw->at("values").is_array() || sw->at("values").empty()) {
        throw ConfigError("sweep.values must be a non-empty array");
    }
    for (const auto& v : sw->at("values")) {
        if (!v.is_number()) {
            throw ConfigError("sweep.values entries must be numbers");
        }
        sc.values.push_back(v.get<double>());
    }

    if (const auto* tr = detail::section(doc, "trials")) {
        detail::reject_unknown(*tr, "trials", {"outer", "inner"});
        sc.trials.outer = count(*tr, "trials", "outer", sc.trials.outer);
        sc.trials.inner = count(*tr, "trials", "inner", sc.trials.inner);
        if (sc.trials.inner < 1) {
            throw ConfigError("trials.inner must be >= 1");
        }
    }
    return sc;
}

inline Scenario load_scenario(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open scenario '" + path + "'");
    }
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("scenario '" + path + "': " + e.what());
    }
    return parse_scenario(doc, std::filesystem::path(path).parent_path());
}

/// One evaluated (sweep value, scheme) combination.
struct ResultRow {
    double sweep_value = 0.0;
    std::string scheme;
    std::string status = "ok"; // ok | infeasible | capacity
    std::optional<std::size_t> k;
    std::optional<std::size_t> s;
    double p_act = std::nan("");
    double a_th = std::nan("");
    double infout_gaussian = std::nan("");
    double infout_exact = std::nan("");
    double infout_exact_halfwidth = std::nan("");
    double infout_empirical = std::nan("");
    double stderr_empirical = std::nan("");
    double first_percentile = std::nan("");
    bool filter_fallback = false;
    double wall_time = std::nan("");
};

struct ResultTable {
    SweepAxis axis = SweepAxis::features;
    std::vector<ResultRow> rows;
};

inline std::vector<std::string> result_header() {
    return {"sweep_value", "scheme",          "status",    "k",
            "s",           "p_act",           "a_th",      "infout_gaussian",
            "infout_exact", "infout_exact_halfwidth", "infout_empirical", "stderr",
            "first_percentile", "filter_fallback", "wall_time_s"};
}

inline void emit_csv(const ResultTable& table, std::ostream& os) {
    using csv::format_real;
    csv::write_row(os, result_header());
    auto opt = [](const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : std::string{}; };
    for (const auto& r : table.rows) {
        csv::write_row(os, {format_real(r.sweep_value), r.scheme, r.status, opt(r.k), opt(r.s),
                            format_real(r.p_act), format_real(r.a_th), format_real(r.infout_gaussian),
                            format_real(r.infout_exact), format_real(r.infout_exact_halfwidth),
                            format_real(r.infout_empirical), format_real(r.stderr_empirical),
                            format_real(r.first_percentile), r.filter_fallback ? "1" : "0",
                            format_real(r.wall_time)});
    }
}

inline void emit_csv(const ResultTable& table, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write results to '" + path + "'");
    }
    emit_csv(table, out);
    out.flush();
    if (!out) {
        throw IoError("write failed for '" + path + "'");
    }
}

inline std::vector<ResultRow> parse_result_csv(std::istream& is) {
    std::vector<std::string> f;
    if (!csv::read_row(is, f) || f != result_header()) {
        throw ConfigError("results: unexpected header");
    }
    std::vector<ResultRow> rows;
    auto opt = [](const std::string& s) -> std::optional<std::size_t> {
        if (s.empty()) {
            return std::nullopt;
        }
        return static_cast<std::size_t>(std::stoull(s));
    };
    while (csv::read_row(is, f)) {
        if (f.size() != result_header().size()) {
            throw ConfigError("results: row with " + std::to_string(f.size()) + " fields");
        }
        ResultRow r;
        r.sweep_value = csv::parse_real(f[0]);
        r.scheme = f[1];
        r.status = f[2];
        r.k = opt(f[3]);
        r.s = opt(f[4]);
        r.p_act = csv::parse_real(f[5]);
        r.a_th = csv::parse_real(f[6]);
        r.infout_gaussian = csv::parse_real(f[7]);
        r.infout_exact = csv::parse_real(f[8]);
        r.infout_exact_halfwidth = csv::parse_real(f[9]);
        r.infout_empirical = csv::parse_real(f[10]);
        r.stderr_empirical = csv::parse_real(f[11]);
        r.first_percentile = csv::parse_real(f[12]);
        r.filter_fallback = f[13] == "1";
        r.wall_time = csv::parse_real(f[14]);
        rows.push_back(std::move(r));
    }
    return rows;
}

/// Per-S quantities along the feature axis at K = K_hat(S).
struct FeatureSweepRow {
    std::size_t s = 0;
    std::size_t k_hat = 0;
    double f = std::nan("");
    double infout_gaussian = std::nan("");
    Bracket infout_exact;
};

/// Surrogate, Gaussian InfOut and exact InfOut for every S in [1, S_max].
/// Exact values come from the enumerated law while it fits and from an
/// incrementally grown lattice bracket (quantum G1(S_max) / bins) after.
inline std::vector<FeatureSweepRow> feature_sweep(const GmmModel& model, const ChannelLatencyConfig& cfg,
                                                  Probability p_act, double a_th,
                                                  std::size_t bins = std::size_t{1} << 20) {
    const auto profile = dg_profile(model);
    const DgFunction fn(profile);
    const double g_th = dg_threshold(a_th, model.classes());
    const auto range = feasible_feature_range(cfg, model.dimension());
    std::vector<FeatureSweepRow> rows;
    if (range.s_max == 0) {
        return rows;
    }
    const auto& gains = profile.sorted_gains();
    double total = 0.0;
    for (std::size_t i = 0; i < range.s_max; ++i) {
        total += gains[i];
    }
    std::optional<GridBracketLaw> grid;
    for (std::size_t s = 1; s <= range.s_max; ++s) {
        FeatureSweepRow row;
        row.s = s;
        row.k_hat = max_observations_for(s, cfg);
        const auto dist = receive_dg_distribution(profile, s, p_act);
        if (cfg.b0() - cfg.b1() * static_cast<double>(s) > 0.0 && fn.g_hat_2(static_cast<double>(s)) > 0.0) {
            row.f = surrogate_f(fn, cfg, p_act, g_th, static_cast<double>(s));
        }
        if (row.k_hat >= 1) {
            row.infout_gaussian = infout_gaussian(dist, row.k_hat, g_th);
            if (!grid) {
                try {
                    const double v = infout_exact(dist, row.k_hat, g_th);
                    row.infout_exact = {v, v};
                } catch (const CapacityError&) {
                    grid.emplace(total > 0.0 ? total / static_cast<double>(bins) : 1.0, p_act);
                    for (std::size_t i = 0; i + 1 < s; ++i) {
                        grid->add_gain(gains[i]);
                    }
                }
            }
        }
        if (grid) {
            grid->add_gain(gains[s - 1]);
            if (row.k_hat >= 1) {
                row.infout_exact = grid->probability_at_most(row.k_hat, g_th);
            }
        }
        rows.push_back(row);
    }
    return rows;
}

inline std::vector<std::string> feature_sweep_header() {
    return {"s", "k_hat", "f", "infout_gaussian", "infout_exact", "exact_halfwidth"};
}

inline void emit_feature_sweep(const std::vector<FeatureSweepRow>& rows, std::ostream& os) {
    using csv::format_real;
    csv::write_row(os, feature_sweep_header());
    for (const auto& r : rows) {
        const bool has = r.k_hat >= 1;
        csv::write_row(os, {std::to_string(r.s), std::to_string(r.k_hat), format_real(r.f),
                            format_real(r.infout_gaussian),
                            has ? format_real(r.infout_exact.mid()) : std::string{},
                            has ? format_real(r.infout_exact.half_width()) : std::string{}});
    }
}

/// All estimators at one (k, s). `rng` drives the empirical trials.
inline void evaluate_point(ResultRow& row, const GmmModel& model, const DgProfile& profile,
                           Probability p_act, double a_th, std::size_t k, std::size_t s,
                           const TrialSpec& trials, std::size_t bins, const RngStream& rng) {
    const double g_th = dg_threshold(a_th, model.classes());
    const auto dist = receive_dg_distribution(profile, s, p_act);
    row.k = k;
    row.s = s;
    row.infout_gaussian = infout_gaussian(dist, k, g_th);
    const auto exact = infout_oracle(dist, k, g_th, bins);
    row.infout_exact = exact.mid();
    row.infout_exact_halfwidth = exact.half_width();
    if (trials.outer > 0) {
        const auto emp = infout_empirical(model, p_act, k, s, a_th, trials.outer, trials.inner, rng);
        row.infout_empirical = emp.value;
        row.stderr_empirical = emp.standard_error;
        row.first_percentile = first_percentile(emp.accuracies);
    }
}

inline const std::vector<std::string>& scheme_names() {
    static const std::vector<std::string> names{"optimal_c2", "brute_force", "max_feat",
                                                "max_obs", "atb_max_feat", "atb_max_obs"};
    return names;
}

/// Evaluate the scenario. Point i uses RngStream(seed, i); within a point,
/// scheme j runs its empirical trials on substream j and its calibration on
/// substream 100 + j. Rows come out by sweep value, then scheme.
inline ResultTable run_scenario(const Scenario& sc) {
    const auto model = sc.model.build();
    const auto profile = dg_profile(model);
    const double a_th = sc.target.absolute();
    ResultTable table;
    table.axis = sc.axis;
    for (std::size_t i = 0; i < sc.values.size(); ++i) {
        const double value = sc.values[i];
        ChannelLatencyConfig cfg = sc.channel;
        std::optional<double> p_override = sc.activation_probability;
        switch (sc.axis) {
        case SweepAxis::features: break;
        case SweepAxis::power: cfg.transmit_power = value; break;
        case SweepAxis::compute_speed: cfg.compute_speed = value; break;
        case SweepAxis::deadline: cfg.deadline = value; break;
        case SweepAxis::channel_outage:
            if (!(value >= 0.0 && value <= 1.0)) {
                throw ConfigError("sweep.values: channel outage must lie in [0, 1]");
            }
            p_override = 1.0 - value;
            break;
        }
        cfg.validate();
        const Probability p_act = p_override ? Probability(*p_override) : activation_probability(cfg);
        const RngStream point_rng(sc.seed, i);

        auto base_row = [&](const std::string& scheme) {
            ResultRow r;
            r.sweep_value = value;
            r.scheme = scheme;
            r.p_act = p_act;
            r.a_th = a_th;
            return r;
        };

        if (sc.axis == SweepAxis::features) {
            ResultRow r = base_row("fixed_s");
            const auto start = std::chrono::steady_clock::now();
            const double rounded = std::round(value);
            if (!(value >= 1.0) || rounded != value || rounded > static_cast<double>(model.dimension())) {
                throw ConfigError("sweep.values: feature counts must be integers in [1, D]");
            }
            const auto s = static_cast<std::size_t>(rounded);
            const auto k = max_observations_for(s, cfg);
            if (k == 0) {
                r.status = "infeasible";
                r.s = s;
            } else {
                evaluate_point(r, model, profile, p_act, a_th, k, s, sc.trials, sc.oracle_bins,
                               point_rng.substream(0));
            }
            if (sc.record_wall_time) {
                r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            }
            table.rows.push_back(std::move(r));
            continue;
        }

        const auto& names = scheme_names();
        for (std::size_t j = 0; j < names.size(); ++j) {
            ResultRow r = base_row(names[j]);
            const auto start = std::chrono::steady_clock::now();
            try {
                OperatingPoint op;
                if (names[j] == "optimal_c2") {
                    const auto sol = optimize_features(model, cfg, p_act, a_th);
                    op.k = sol.k_star;
                    op.s = sol.s_star;
                } else if (names[j] == "brute_force") {
                    op = brute_force_search(model, cfg, p_act, a_th, Estimator::exact);
                } else {
                    op = benchmark_scheme(parse_benchmark_scheme(names[j]), model, cfg, p_act, a_th,
                                          point_rng.substream(100 + j));
                }
                r.filter_fallback = op.filter_fallback;
                evaluate_point(r, model, profile, p_act, a_th, op.k, op.s, sc.trials, sc.oracle_bins,
                               point_rng.substream(j));
            } catch (const InfeasibleError&) {
                r.status = "infeasible";
            } catch (const CapacityError&) {
                r.status = "capacity";
            }
            if (sc.record_wall_time) {
                r.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
            }
            table.rows.push_back(std::move(r));
        }
    }
    return table;
}

} // namespace infout

#endif
