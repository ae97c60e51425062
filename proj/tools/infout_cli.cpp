// infout: command-line front end.
//
// Exit codes: 0 success, 1 other failure, 2 bad configuration, usage or input,
// 3 infeasible deadline, 4 file I/O.

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "infout/infout.hpp"

using namespace infout;

namespace {

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kInfeasible = 3, kIo = 4 };

struct ChannelFlags {
    ChannelLatencyConfig cfg;
    std::optional<std::size_t> max_observations;
    std::optional<double> activation_probability;

    void add(CLI::App* app) {
        app->add_option("--transmit_power", cfg.transmit_power, "Transmit power [W]");
        app->add_option("--bandwidth", cfg.bandwidth, "Bandwidth [Hz]");
        app->add_option("--noise_density", cfg.noise_density, "Noise power spectral density [W/Hz]");
        app->add_option("--slot_length", cfg.slot_length, "Slot length [s]");
        app->add_option("--bits_per_feature", cfg.bits_per_feature, "Payload bits per feature");
        app->add_option("--bits_per_index", cfg.bits_per_index, "Index bits per feature");
        app->add_option("--compute_speed", cfg.compute_speed, "Device compute speed [FLOP/s]");
        app->add_option("--flops_per_observation", cfg.flops_per_observation, "FLOPs per observation");
        app->add_option("--deadline", cfg.deadline, "End-to-end deadline [s]");
        app->add_option("--max_observations", max_observations, "Cap on observations K");
        app->add_option("--activation_probability", activation_probability,
                        "Override the per-slot activation probability");
    }

    ChannelLatencyConfig config() const {
        ChannelLatencyConfig c = cfg;
        c.max_observations = max_observations;
        c.validate();
        return c;
    }

    Probability p_act() const {
        if (activation_probability) {
            if (!(*activation_probability >= 0.0 && *activation_probability <= 1.0)) {
                throw ConfigError("--activation_probability must lie in [0, 1]");
            }
            return Probability(*activation_probability);
        }
        return infout::activation_probability(config());
    }
};

struct ModelFlags {
    ModelSpec spec;
    void add(CLI::App* app) {
        app->add_option("--model", spec.file, "GMM model JSON (overrides the synthetic model)");
        app->add_option("--dimension", spec.dimension, "Synthetic model dimension");
        app->add_option("--centroid_scale", spec.centroid_scale, "Synthetic centroids at +/- scale");
        app->add_option("--variance_slope", spec.variance_slope, "Synthetic variance slope");
        app->add_option("--variance_offset", spec.variance_offset, "Synthetic variance offset");
    }
};

void write_output(const std::optional<std::string>& path, const std::function<void(std::ostream&)>& emit) {
    if (!path) {
        emit(std::cout);
        return;
    }
    std::ofstream out(*path, std::ios::binary);
    if (!out) {
        throw IoError("cannot write '" + *path + "'");
    }
    emit(out);
    out.flush();
    if (!out) {
        throw IoError("write failed for '" + *path + "'");
    }
}

std::string optional_real(const std::optional<double>& v) {
    return v ? csv::format_real(*v) : std::string{};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Inference outage analysis and feature/observation optimisation"};
    app.require_subcommand(1);

    ChannelFlags channel;
    ModelFlags model;
    double accuracy = 0.968;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::size_t trials = 2000;
    std::size_t inner = 1000;

    auto common = [&](CLI::App* sub, bool stochastic) {
        channel.add(sub);
        model.add(sub);
        sub->add_option("--accuracy", accuracy, "Target accuracy A_th");
        sub->add_option("--out", out, "Output file (default stdout)");
        if (stochastic) {
            sub->add_option("--seed", seed, "RNG seed")->required();
            sub->add_option("--trials", trials, "Outer Monte-Carlo trials");
            sub->add_option("--inner", inner, "Inner trials for L > 2");
        }
    };

    std::size_t k = 0;
    std::size_t s = 0;
    auto* analyze = app.add_subcommand("analyze", "InfOut estimates at one (K, S)");
    common(analyze, true);
    analyze->add_option("-k,--observations", k, "Observations K")->required();
    analyze->add_option("-s,--features", s, "Transmitted features S")->required();

    bool with_brute_force = false;
    auto* optimize = app.add_subcommand("optimize", "Surrogate-optimal (K, S)");
    common(optimize, false);
    optimize->add_flag("--brute_force", with_brute_force, "Also report the exhaustive optimum");

    std::string scenario_path;
    bool curve = false;
    std::size_t bins = std::size_t{1} << 20;
    auto* sweep = app.add_subcommand("sweep", "Run a scenario file");
    sweep->add_option("scenario", scenario_path, "Scenario JSON")->required();
    sweep->add_option("--seed", seed, "Override the scenario seed");
    sweep->add_option("--out", out, "Output CSV (default stdout)");
    sweep->add_flag("--curve", curve, "Per-S curve at the scenario's channel instead of the sweep");
    sweep->add_option("--bins", bins, "Lattice bins for exact values past enumeration");

    std::string scheme = "all";
    auto* benchmark = app.add_subcommand("benchmark", "Every scheme at one channel setting");
    common(benchmark, true);
    benchmark->add_option("--scheme", scheme, "One scheme name or 'all'");

    std::size_t dataset = 2000;
    std::size_t pool = 0;
    std::size_t table_trials = 200;
    std::vector<double> p_grid;
    std::vector<std::size_t> k_grid;
    std::vector<std::size_t> s_grid;
    DgMapping mapping;
    auto* calibrate = app.add_subcommand("calibrate", "Estimate a DG lookup table on the GMM backend");
    channel.add(calibrate);
    model.add(calibrate);
    calibrate->add_option("--seed", seed, "RNG seed")->required();
    calibrate->add_option("--out", out, "Output table CSV (default stdout)");
    calibrate->add_option("--dataset", dataset, "Calibration samples M");
    calibrate->add_option("--pool", pool, "Observation pool per sample (0: fresh draws)");
    calibrate->add_option("--trials", table_trials, "Trials N per key");
    calibrate->add_option("--p_act", p_grid, "Activation probabilities (0.05 grid)")->required();
    calibrate->add_option("--k", k_grid, "K values (full product with --s)");
    calibrate->add_option("--s", s_grid, "S values (full product with --k)");
    calibrate->add_option("--alpha", mapping.alpha, "Mapping scale alpha");
    calibrate->add_option("--beta", mapping.beta, "Mapping scale beta");

    std::string table_path;
    double p_lookup = 0.0;
    std::optional<std::size_t> table_dim;
    auto* optimize_cnn = app.add_subcommand("optimize-cnn", "Optimise (K, S) from a DG lookup table");
    channel.add(optimize_cnn);
    optimize_cnn->add_option("table", table_path, "Lookup table CSV")->required();
    optimize_cnn->add_option("--p_act", p_lookup, "Activation probability key")->required();
    optimize_cnn->add_option("--accuracy", accuracy, "Target accuracy A_th");
    optimize_cnn->add_option("--feature_dimension", table_dim, "Feature dimension D (default: largest S)");
    optimize_cnn->add_option("--alpha", mapping.alpha, "Mapping scale alpha");
    optimize_cnn->add_option("--beta", mapping.beta, "Mapping scale beta");
    optimize_cnn->add_option("--out", out, "Output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (analyze->parsed()) {
            const auto m = model.spec.build();
            const auto report = analyze_operating_point(m, channel.p_act(), k, s, accuracy, trials, inner,
                                                        RngStream(*seed));
            write_output(out, [&](std::ostream& os) {
                csv::write_row(os, outage_report_header());
                csv::write_row(os, to_csv_fields(report));
            });
        } else if (optimize->parsed()) {
            const auto m = model.spec.build();
            const auto cfg = channel.config();
            const auto p = channel.p_act();
            const auto sol = optimize_features(m, cfg, p, accuracy);
            const auto profile = dg_profile(m);
            const double g_th = dg_threshold(accuracy, m.classes());
            auto exact_of = [&](std::size_t kk, std::size_t ss) {
                const auto b = infout_oracle(receive_dg_distribution(profile, ss, p), kk, g_th);
                return b.mid();
            };
            write_output(out, [&](std::ostream& os) {
                csv::write_row(os, {"scheme", "k", "s", "x_star", "f", "solved_by", "p_act", "infout_gaussian",
                                    "infout_exact"});
                csv::write_row(os, {"optimal_c2", std::to_string(sol.k_star), std::to_string(sol.s_star),
                                    optional_real(sol.x_star), csv::format_real(sol.f_value),
                                    to_string(sol.solved_by), csv::format_real(p),
                                    csv::format_real(infout_gaussian(receive_dg_distribution(profile, sol.s_star, p),
                                                                     sol.k_star, g_th)),
                                    csv::format_real(exact_of(sol.k_star, sol.s_star))});
                if (with_brute_force) {
                    const auto bf = brute_force_search(m, cfg, p, accuracy);
                    csv::write_row(os, {"brute_force", std::to_string(bf.k), std::to_string(bf.s), "", "", "",
                                        csv::format_real(p),
                                        csv::format_real(infout_gaussian(receive_dg_distribution(profile, bf.s, p),
                                                                         bf.k, g_th)),
                                        csv::format_real(*bf.objective)});
                }
            });
        } else if (sweep->parsed()) {
            auto sc = load_scenario(scenario_path);
            if (seed) {
                sc.seed = *seed;
            }
            sc.oracle_bins = bins;
            if (curve) {
                const auto m = sc.model.build();
                const auto p = sc.activation_probability ? Probability(*sc.activation_probability)
                                                         : activation_probability(sc.channel);
                const auto rows = feature_sweep(m, sc.channel, p, sc.target.absolute(), bins);
                write_output(out, [&](std::ostream& os) { emit_feature_sweep(rows, os); });
            } else {
                const auto table = run_scenario(sc);
                write_output(out, [&](std::ostream& os) { emit_csv(table, os); });
            }
        } else if (benchmark->parsed()) {
            Scenario sc;
            sc.model = model.spec;
            sc.channel = channel.config();
            sc.activation_probability = channel.activation_probability;
            sc.target.accuracy = accuracy;
            sc.axis = SweepAxis::deadline;
            sc.values = {sc.channel.deadline};
            sc.trials = {trials, inner};
            sc.seed = *seed;
            if (scheme != "all") {
                const auto& names = scheme_names();
                if (std::find(names.begin(), names.end(), scheme) == names.end()) {
                    throw ConfigError("unknown scheme '" + scheme + "'");
                }
            }
            auto table = run_scenario(sc);
            if (scheme != "all") {
                std::erase_if(table.rows, [&](const ResultRow& r) { return r.scheme != scheme; });
            }
            write_output(out, [&](std::ostream& os) { emit_csv(table, os); });
        } else if (calibrate->parsed()) {
            mapping.validate();
            const auto m = model.spec.build();
            const GmmBackend backend(m, dataset, pool, *seed);
            std::vector<KeyPair> pairs;
            if (k_grid.empty() != s_grid.empty()) {
                throw ConfigError("--k and --s must be given together");
            }
            if (k_grid.empty()) {
                pairs = deadline_pairs(channel.config(), m.dimension());
            } else {
                for (auto kk : k_grid) {
                    for (auto ss : s_grid) {
                        pairs.push_back({kk, ss});
                    }
                }
            }
            const auto table = estimate_lookup_table(backend, p_grid, pairs, table_trials, mapping,
                                                     RngStream(*seed, 1));
            write_output(out, [&](std::ostream& os) { table.write_csv(os); });
        } else if (optimize_cnn->parsed()) {
            const auto table = DgLookupTable::load(table_path);
            std::size_t dim = 0;
            for (const auto& [key, e] : table.entries()) {
                dim = std::max(dim, std::get<1>(key));
            }
            if (table_dim) {
                dim = *table_dim;
            }
            const auto cfg = channel.config();
            const auto sol = optimize_features_cnn(table, cfg, dim, p_lookup, accuracy, mapping);
            const double g_th = cnn_dg_threshold(mapping, accuracy);
            write_output(out, [&](std::ostream& os) {
                csv::write_row(os, {"k", "s", "psi", "solved_by", "infout_cnn"});
                csv::write_row(os, {std::to_string(sol.k_star), std::to_string(sol.s_star),
                                    csv::format_real(sol.f_value), to_string(sol.solved_by),
                                    csv::format_real(infout_cnn(table, sol.k_star, sol.s_star, p_lookup, g_th))});
            });
        }
    } catch (const InfeasibleError& e) {
        std::cerr << "infeasible: " << e.what() << '\n';
        return kInfeasible;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfig;
    } catch (const DomainError& e) {
        std::cerr << "invalid input: " << e.what() << '\n';
        return kConfig;
    } catch (const LookupError& e) {
        std::cerr << "lookup error: " << e.what() << '\n';
        return kConfig;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << '\n';
        return kIo;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kOther;
    }
    return kOk;
}
