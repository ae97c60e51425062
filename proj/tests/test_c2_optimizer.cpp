#include "infout/c2_optimizer.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "oracles.hpp"

namespace infout {

namespace {

ChannelLatencyConfig default_config() { return {}; }

double prefix_sum(const std::vector<double>& w, std::size_t s, bool squared) {
    double total = 0.0;
    for (std::size_t i = 0; i < s; ++i) {
        total += squared ? w[i] * w[i] : w[i];
    }
    return total;
}

} // namespace

TEST(DgFunction, KnotsAndShape) {
    const DgFunction fn({4.0, 2.0, 1.0});
    EXPECT_EQ(fn.dimension(), 3U);
    EXPECT_EQ(fn.knots(), (std::vector<double>{4.0, 2.0, 1.0, 1.0}));
    EXPECT_DOUBLE_EQ(fn.value(0.0), 4.0);
    EXPECT_DOUBLE_EQ(fn.value(1.0), 2.0);
    EXPECT_DOUBLE_EQ(fn.value(2.0), 1.0);
    EXPECT_DOUBLE_EQ(fn.value(3.0), 1.0);
    EXPECT_DOUBLE_EQ(fn.value(0.5), 3.0);
    EXPECT_EQ(fn.value(-0.1), 0.0);
    EXPECT_EQ(fn.value(3.1), 0.0);
    double prev = fn.value(0.0);
    for (double t = 0.01; t <= 3.0; t += 0.01) {
        const double v = fn.value(t);
        EXPECT_LE(v, prev + 1e-15);
        EXPECT_GE(v, 0.0);
        prev = v;
    }
}

TEST(DgFunction, Rejects) {
    EXPECT_THROW(DgFunction(std::vector<double>{}), DomainError);
    EXPECT_THROW(DgFunction({1.0, 2.0}), DomainError);
    EXPECT_THROW(DgFunction({1.0, -1.0}), DomainError);
}

TEST(DgFunction, DerivativeMatchesFiniteDifference) {
    std::mt19937_64 gen(3);
    const DgFunction fn(oracle::random_profile(gen, 9));
    for (double t = 0.05; t < 9.0; t += 0.173) {
        const double h = 1e-6;
        EXPECT_NEAR(fn.derivative(t), (fn.value(t + h) - fn.value(t - h)) / (2 * h), 1e-6) << t;
    }
}

TEST(DgFunction, FlatProfile) {
    const DgFunction fn(std::vector<double>(6, 0.7));
    for (double x = 0.0; x <= 6.0; x += 0.25) {
        EXPECT_NEAR(fn.g_hat_1(x), 0.7 * x, 1e-14);
        EXPECT_NEAR(fn.g_hat_2(x), 0.49 * x, 1e-14);
    }
    EXPECT_EQ(fn.g_hat_1(0.0), 0.0);
    EXPECT_EQ(fn.g_hat_2(-1.0), 0.0);
    EXPECT_NEAR(fn.g_hat_1(10.0), 0.7 * 6.0, 1e-14);
}

TEST(DgFunction, IntegralsMatchQuadrature) {
    std::mt19937_64 gen(17);
    for (int rep = 0; rep < 40; ++rep) {
        const auto w = oracle::random_profile(gen, 2 + rep % 15);
        const DgFunction fn(w);
        const auto g = [&](double t) { return fn.value(t); };
        const auto g2 = [&](double t) { return fn.value(t) * fn.value(t); };
        const double d = static_cast<double>(w.size());
        for (double x = 0.3; x <= d; x += 0.61) {
            const double q1 = oracle::integrate(g, 0.0, x);
            const double q2 = oracle::integrate(g2, 0.0, x);
            EXPECT_NEAR(fn.g_hat_1(x), q1, 1e-9 * std::max(1.0, q1)) << rep << " " << x;
            EXPECT_NEAR(fn.g_hat_2(x), q2, 1e-9 * std::max(1.0, q2)) << rep << " " << x;
        }
        for (std::size_t s = 1; s <= w.size(); ++s) {
            const double q2 = oracle::integrate(g2, 0.0, static_cast<double>(s));
            EXPECT_NEAR(fn.g_hat_2(static_cast<double>(s)), q2, 1e-9 * std::max(1e-300, q2));
        }
    }
}

TEST(DgFunction, LowerBoundsTransmitDg) {
    std::mt19937_64 gen(29);
    for (int rep = 0; rep < 300; ++rep) {
        const auto w = oracle::random_profile(gen, 1 + rep % 25);
        const DgFunction fn(w);
        for (std::size_t s = 1; s <= w.size(); ++s) {
            const auto x = static_cast<double>(s);
            EXPECT_LE(fn.g_hat_1(x), prefix_sum(w, s, false) * (1 + 1e-14));
            EXPECT_LE(fn.g_hat_2(x), prefix_sum(w, s, true) * (1 + 1e-14));
        }
    }
}

TEST(DgFunction, FourDimensionExample) {
    const std::vector<double> w{1.0, 0.6, 0.5, 0.1};
    const DgFunction fn(w);
    for (std::size_t s = 1; s <= 4; ++s) {
        const double q = oracle::integrate([&](double t) { return fn.value(t); }, 0.0, static_cast<double>(s));
        EXPECT_NEAR(fn.g_hat_1(static_cast<double>(s)), q, 1e-10);
        EXPECT_LE(q, prefix_sum(w, s, false));
    }
    EXPECT_NEAR(fn.g_hat_1(1.0), 0.8, 1e-15);
    EXPECT_NEAR(fn.g_hat_1(4.0), 0.8 + 0.55 + 0.3 + 0.1, 1e-15);
}

TEST(DgFunction, ZetaNonNegative) {
    std::mt19937_64 gen(31);
    for (int rep = 0; rep < 200; ++rep) {
        const auto w = oracle::random_profile(gen, 1 + rep % 20);
        const DgFunction fn(w);
        for (double x = 0.0; x <= static_cast<double>(w.size()); x += 0.05) {
            EXPECT_GE(fn.g_hat_2(x) - fn.g_hat_1(x) * fn.value(x), -1e-12) << rep << " " << x;
        }
    }
}

TEST(TransmitDgRatio, NonDecreasingInS) {
    std::mt19937_64 gen(37);
    for (int rep = 0; rep < 500; ++rep) {
        const auto w = oracle::random_profile(gen, 1 + rep % 40);
        double prev = 0.0;
        for (std::size_t s = 1; s <= w.size(); ++s) {
            const double g2 = prefix_sum(w, s, true);
            const double gf = g2 > 0.0 ? prefix_sum(w, s, false) / std::sqrt(g2) : 0.0;
            EXPECT_GE(gf, prev * (1 - 1e-14));
            prev = gf;
        }
    }
}

TEST(Surrogate, Values) {
    const auto cfg = default_config();
    const DgFunction fn(oracle::reciprocal_profile(30));
    const double x = 12.0;
    const double expected = 0.9 * fn.g_hat_1(x) / std::sqrt(fn.g_hat_2(x)) -
                            13.7 / ((cfg.b0() - cfg.b1() * x) * std::sqrt(fn.g_hat_2(x)));
    EXPECT_NEAR(surrogate_f(fn, cfg, Probability(0.9), 13.7, x), expected, 1e-14);
    EXPECT_GT(surrogate_f(fn, cfg, Probability(0.9), 0.0, x), 0.0);
    EXPECT_LT(surrogate_f(fn, cfg, Probability(1e-6), 13.7, x), 0.0);
    EXPECT_THROW(surrogate_f(fn, cfg, Probability(0.9), 13.7, 40.0), DomainError);
    EXPECT_THROW(nu(fn, cfg, Probability(0.9), 13.7, 40.0), DomainError);
    EXPECT_THROW(surrogate_f(fn, cfg, Probability(0.9), 13.7, 0.0), DomainError);
}

TEST(Surrogate, NuSignMatchesFiniteDifference) {
    const auto cfg = default_config();
    std::mt19937_64 gen(41);
    for (int rep = 0; rep < 30; ++rep) {
        const DgFunction fn(oracle::random_profile(gen, 30, 1.0));
        const double p = 0.5 + 0.05 * (rep % 10);
        for (double x = 3.0; x <= 30.0; x += 0.37) {
            const double h = 1e-5;
            const double fd = (surrogate_f(fn, cfg, Probability(p), 13.7, x + h) -
                               surrogate_f(fn, cfg, Probability(p), 13.7, x - h)) / (2 * h);
            const double scaled = nu(fn, cfg, Probability(p), 13.7, x) / std::pow(fn.g_hat_2(x), 1.5);
            EXPECT_NEAR(scaled, fd, 1e-5 * std::max(1.0, std::abs(fd))) << rep << " " << x;
        }
    }
}

TEST(Surrogate, FlatGainsNu) {
    const auto cfg = default_config();
    const double w = 0.4;
    const DgFunction fn(std::vector<double>(30, w));
    for (double x = 3.0; x <= 30.0; x += 1.5) {
        EXPECT_NEAR(nu(fn, cfg, Probability(0.8), 0.0, x), 0.8 * w * (w * w * x - w * w * x / 2.0), 1e-14);
    }
    const auto sol = optimize_features(fn, cfg, Probability(0.8), 0.0);
    EXPECT_EQ(sol.s_star, 30U);
    EXPECT_EQ(sol.solved_by, SolvedBy::endpoint);
}

TEST(Optimize, MatchesGridMaximumOnDefaultScenario) {
    const auto cfg = default_config();
    const auto model = symmetric_two_class_model(30);
    const DgFunction fn(dg_profile(model));
    for (double p : {0.3, 0.5, 0.7, 0.8, 0.9, 0.95, activation_probability(cfg).value()}) {
        const double g_th = dg_threshold(0.968, 2);
        const auto sol = optimize_features(fn, cfg, Probability(p), g_th);
        const auto range = feasible_feature_range(cfg, 30);
        double best = -INFINITY;
        for (std::size_t s = range.s_min; s <= range.s_max; ++s) {
            best = std::max(best, surrogate_f(fn, cfg, Probability(p), g_th, static_cast<double>(s)));
        }
        EXPECT_EQ(sol.f_value, best) << p;
        EXPECT_EQ(sol.k_star, max_observations_for(sol.s_star, cfg));
        EXPECT_TRUE(within_deadline(sol.k_star, sol.s_star, cfg));
        EXPECT_GE(sol.s_star, range.s_min);
        EXPECT_LE(sol.s_star, range.s_max);
    }
}

TEST(Optimize, SingleFeasibleValue) {
    ChannelLatencyConfig cfg;
    cfg.deadline = 2e-3;
    cfg.slot_length = 1e-3;
    const DgFunction fn(oracle::reciprocal_profile(30));
    const auto range = feasible_feature_range(cfg, 30);
    ASSERT_EQ(range.s_min, range.s_max);
    const auto sol = optimize_features(fn, cfg, Probability(0.8), 1.0);
    EXPECT_EQ(sol.s_star, range.s_min);
    EXPECT_EQ(sol.solved_by, SolvedBy::endpoint);
    EXPECT_FALSE(sol.x_star.has_value());
}

TEST(Optimize, Infeasible) {
    ChannelLatencyConfig cfg;
    cfg.deadline = 1e-3;
    const DgFunction fn(oracle::reciprocal_profile(30));
    EXPECT_THROW(optimize_features(fn, cfg, Probability(0.8), 1.0), InfeasibleError);
    const auto m = symmetric_two_class_model(30);
    EXPECT_THROW(brute_force_search(m, cfg, Probability(0.8), 0.9), InfeasibleError);
    EXPECT_THROW(benchmark_scheme(BenchmarkScheme::max_feat, m, cfg, Probability(0.8), 0.9, RngStream(1)),
                 InfeasibleError);
}

TEST(FeasiblePairs, Enumeration) {
    const auto cfg = default_config();
    const auto pairs = feasible_pairs(cfg, 30);
    for (const auto& [k, s] : pairs) {
        EXPECT_TRUE(within_deadline(k, s, cfg));
        EXPECT_LE(k, cfg.k_max());
    }
    std::size_t expected = 0;
    for (std::size_t s = 1; s <= 30; ++s) {
        for (std::size_t k = 1; k <= cfg.k_max(); ++k) {
            expected += within_deadline(k, s, cfg);
        }
    }
    EXPECT_EQ(pairs.size(), expected);
}

TEST(BruteForce, SinglePair) {
    ChannelLatencyConfig cfg;
    cfg.deadline = 0.3e-3 + 936.2e6 / 1e12 + 1e-5;
    const auto m = symmetric_two_class_model(5);
    const auto op = brute_force_search(m, cfg, Probability(0.8), 0.7);
    EXPECT_EQ(op.k, 1U);
    EXPECT_EQ(op.s, 1U);
}

TEST(BruteForce, IsMinimumAndTieBreaks) {
    const auto cfg = default_config();
    const auto m = symmetric_two_class_model(30);
    const auto profile = dg_profile(m);
    const double g_th = dg_threshold(0.968, 2);
    for (double p : {0.6, 0.8}) {
        const auto op = brute_force_search(m, cfg, Probability(p), 0.968);
        for (const auto& [k, s] : feasible_pairs(cfg, 30)) {
            const double v = infout_exact(receive_dg_distribution(profile, s, Probability(p)), k, g_th);
            EXPECT_GE(v, *op.objective);
            if (v == *op.objective) {
                EXPECT_TRUE(s > op.s || (s == op.s && k <= op.k));
            }
        }
    }
    // Unreachable target: every pair has InfOut 1, so the smallest s with
    // the largest k wins.
    const auto all_one = brute_force_search(m, cfg, Probability(0.05), 1.0 - 1e-12);
    EXPECT_EQ(all_one.s, 1U);
    EXPECT_EQ(all_one.k, cfg.k_max());
}

TEST(BruteForce, RelaxingDeadlineNeverHurts) {
    const auto m = symmetric_two_class_model(30);
    double prev = 2.0;
    for (double t = 6e-3; t <= 14e-3; t += 1e-3) {
        ChannelLatencyConfig cfg;
        cfg.deadline = t;
        const auto op = brute_force_search(m, cfg, Probability(0.8), 0.968);
        EXPECT_LE(*op.objective, prev + 1e-15);
        prev = *op.objective;
    }
}

TEST(BruteForce, GaussianEstimator) {
    const auto cfg = default_config();
    const auto m = symmetric_two_class_model(30);
    const auto op = brute_force_search(m, cfg, Probability(0.8), 0.968, Estimator::gaussian);
    const auto profile = dg_profile(m);
    const double g_th = dg_threshold(0.968, 2);
    for (const auto& [k, s] : feasible_pairs(cfg, 30)) {
        EXPECT_GE(infout_gaussian(receive_dg_distribution(profile, s, Probability(0.8)), k, g_th),
                  *op.objective);
    }
}

TEST(Benchmarks, LexicographicRules) {
    const auto cfg = default_config();
    const auto m = symmetric_two_class_model(30);
    const auto range = feasible_feature_range(cfg, 30);
    const auto mf = benchmark_scheme(BenchmarkScheme::max_feat, m, cfg, Probability(0.9), 0.968, RngStream(1));
    EXPECT_EQ(mf.s, range.s_max);
    EXPECT_EQ(mf.k, max_observations_for(range.s_max, cfg));
    const auto mo = benchmark_scheme(BenchmarkScheme::max_obs, m, cfg, Probability(0.9), 0.968, RngStream(1));
    EXPECT_EQ(mo.k, cfg.k_max());
    EXPECT_EQ(max_observations_for(mo.s, cfg), cfg.k_max());
    EXPECT_LT(max_observations_for(mo.s + 1, cfg), cfg.k_max());
    EXPECT_EQ(mo.scheme, "max_obs");
}

TEST(Benchmarks, ThresholdFilter) {
    const auto cfg = default_config();
    const auto m = symmetric_two_class_model(30);
    const RngStream cal(99);
    const auto a = benchmark_scheme(BenchmarkScheme::atb_max_feat, m, cfg, Probability(0.9), 0.968, cal);
    const auto b = benchmark_scheme(BenchmarkScheme::atb_max_feat, m, cfg, Probability(0.9), 0.968, cal);
    EXPECT_EQ(a.k, b.k);
    EXPECT_EQ(a.s, b.s);
    EXPECT_FALSE(a.filter_fallback);
    // The chosen pair passed its own one-shot draw.
    const auto pairs = feasible_pairs(cfg, 30);
    const auto profile = dg_profile(m);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
        if (pairs[i].k == a.k && pairs[i].s == a.s) {
            RngStream local = cal.substream(i);
            EXPECT_GT(one_shot_accuracy(m, profile, Probability(0.9), a.k, a.s, local), 0.968);
        }
    }
    // Impossible target: the filter empties the set and falls back.
    const auto fb = benchmark_scheme(BenchmarkScheme::atb_max_obs, m, cfg, Probability(0.9), 0.99999999, cal);
    EXPECT_TRUE(fb.filter_fallback);
    const auto mo = benchmark_scheme(BenchmarkScheme::max_obs, m, cfg, Probability(0.9), 0.99999999, cal);
    EXPECT_EQ(fb.k, mo.k);
    EXPECT_EQ(fb.s, mo.s);
}

TEST(Benchmarks, Names) {
    EXPECT_EQ(parse_benchmark_scheme("atb_max_obs"), BenchmarkScheme::atb_max_obs);
    EXPECT_THROW(parse_benchmark_scheme("best"), ConfigError);
}

} // namespace infout
