#include "infout/outage_analysis.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "oracles.hpp"

namespace infout {

TEST(DgThreshold, Values) {
    EXPECT_NEAR(dg_threshold(1.0 - q_function(1.0), 2), 4.0, 1e-9);
    EXPECT_NEAR(dg_threshold(0.9999, 2), 55.3243, 0.01);
    EXPECT_NEAR(dg_threshold(0.968, 2), 4.0 * std::pow(inverse_q(0.032), 2), 1e-12);
    EXPECT_NEAR(dg_threshold(0.9, 3), 4.0 * std::pow(inverse_q(0.05), 2), 1e-12);
}

TEST(DgThreshold, Infeasible) {
    EXPECT_THROW(dg_threshold(0.5, 2), InfeasibleError);
    EXPECT_THROW(dg_threshold(0.3, 2), InfeasibleError);
    EXPECT_THROW(dg_threshold(1.0, 2), InfeasibleError);
    EXPECT_THROW(dg_threshold(0.0, 3), InfeasibleError);
    EXPECT_NO_THROW(dg_threshold(0.4, 3));
    EXPECT_THROW(dg_threshold(0.9, 1), DomainError);
}

TEST(ReceiveDgDistribution, Moments) {
    const auto d = receive_dg_distribution(std::vector<double>{2.0, 1.0}, Probability(0.5));
    EXPECT_DOUBLE_EQ(d.mean, 1.5);
    EXPECT_DOUBLE_EQ(d.variance, 1.25);
    EXPECT_DOUBLE_EQ(d.transmit_dg, 3.0);
    EXPECT_DOUBLE_EQ(d.transmit_dg_power, 5.0);
    const auto one = receive_dg_distribution(std::vector<double>{2.0, 1.0}, Probability(1.0));
    EXPECT_DOUBLE_EQ(one.variance, 0.0);
    EXPECT_DOUBLE_EQ(one.mean, 3.0);
    const auto zero = receive_dg_distribution(std::vector<double>{2.0, 1.0}, Probability(0.0));
    EXPECT_DOUBLE_EQ(zero.mean, 0.0);
    EXPECT_DOUBLE_EQ(zero.variance, 0.0);
}

TEST(ReceiveDgDistribution, FromProfile) {
    const auto p = DgProfile::from_gains({1.0, 3.0, 2.0});
    const auto d = receive_dg_distribution(p, 2, Probability(0.25));
    EXPECT_EQ(d.selected_gains, (std::vector<double>{3.0, 2.0}));
    EXPECT_THROW(receive_dg_distribution(p, 0, Probability(0.5)), DomainError);
    EXPECT_THROW(receive_dg_distribution(p, 4, Probability(0.5)), DomainError);
}

TEST(InfoutGaussian, Values) {
    const auto d = receive_dg_distribution(std::vector<double>{2.0, 1.0}, Probability(0.5));
    EXPECT_DOUBLE_EQ(infout_gaussian(d, 1, 1.5), 0.5);
    EXPECT_DOUBLE_EQ(infout_gaussian(d, 2, 3.0), 0.5);
    // Hand evaluation: numerator 0.5*3/sqrt5 - 1/sqrt5 = 0.5/sqrt5 over 0.5.
    EXPECT_NEAR(infout_gaussian(d, 1, 1.0), q_function(1.0 / std::sqrt(5.0)), 1e-15);
    EXPECT_THROW(infout_gaussian(d, 0, 1.0), DomainError);
}

TEST(InfoutGaussian, DegenerateActivation) {
    const std::vector<double> g{2.0, 1.0};
    EXPECT_EQ(infout_gaussian(receive_dg_distribution(g, Probability(1.0)), 1, 2.5), 0.0);
    EXPECT_EQ(infout_gaussian(receive_dg_distribution(g, Probability(1.0)), 1, 3.0), 1.0);
    EXPECT_EQ(infout_gaussian(receive_dg_distribution(g, Probability(0.0)), 4, 0.1), 1.0);
    EXPECT_EQ(infout_gaussian(receive_dg_distribution(std::vector<double>{0.0}, Probability(0.5)), 1, 0.1), 1.0);
}

TEST(InfoutGaussian, NonIncreasingInK) {
    const auto d = receive_dg_distribution(oracle::reciprocal_profile(20), Probability(0.7));
    for (std::size_t k = 1; k < 20; ++k) {
        EXPECT_LE(infout_gaussian(d, k + 1, 13.7), infout_gaussian(d, k, 13.7));
    }
}

TEST(InfoutExact, Enumeration) {
    const auto d = receive_dg_distribution(std::vector<double>{2.0, 1.0}, Probability(0.5));
    EXPECT_DOUBLE_EQ(infout_exact(d, 1, 1.5), 0.5);
    EXPECT_DOUBLE_EQ(infout_exact(d, 1, -0.1), 0.0);
    EXPECT_DOUBLE_EQ(infout_exact(d, 1, 3.0), 1.0);
    EXPECT_DOUBLE_EQ(infout_exact(d, 2, 1.99), 0.25);
}

TEST(InfoutExact, MatchesSubsetOracle) {
    std::mt19937_64 gen(21);
    std::uniform_real_distribution<double> u(0.05, 0.95);
    for (int rep = 0; rep < 60; ++rep) {
        const auto w = oracle::random_profile(gen, 1 + rep % 14);
        const double p = u(gen);
        const ExactReceiveDgLaw law(w, Probability(p));
        double total = 0.0;
        for (double x : w) {
            total += x;
        }
        for (double t = -0.1; t <= total + 0.1; t += total / 13.0 + 1e-3) {
            ASSERT_NEAR(law.cdf(t), oracle::subset_cdf(w, p, t), 1e-12) << rep << " " << t;
        }
    }
}

TEST(ExactLaw, MeetInTheMiddleMatchesDirect) {
    // 24 generic gains: 2^24 atoms, held as two halves.
    std::vector<double> w;
    for (int d = 1; d <= 24; ++d) {
        w.push_back(1.0 / (d + std::sqrt(2.0) * 0.01 * d * d));
    }
    const ExactReceiveDgLaw split(w, Probability(0.6));
    EXPECT_TRUE(split.split());
    EXPECT_THROW(split.atoms(), CapacityError);
    // Compare with a direct law over the first 20 gains convolved by hand
    // with the last 4.
    const std::vector<double> head(w.begin(), w.begin() + 20);
    const std::vector<double> tail(w.begin() + 20, w.end());
    const ExactReceiveDgLaw direct(head, Probability(0.6));
    ASSERT_FALSE(direct.split());
    for (double t : {0.5, 1.0, 1.7, 2.3, 3.0}) {
        double expected = 0.0;
        for (std::uint64_t mask = 0; mask < 16; ++mask) {
            double sum = 0.0;
            double pr = 1.0;
            for (std::size_t i = 0; i < 4; ++i) {
                const bool on = mask >> i & 1U;
                sum += on ? tail[i] : 0.0;
                pr *= on ? 0.6 : 0.4;
            }
            expected += pr * direct.cdf(t - sum);
        }
        EXPECT_NEAR(split.cdf(t), expected, 1e-10) << t;
    }
}

TEST(ExactLaw, MergesEqualSums) {
    const std::vector<double> w(200, 0.5);
    const ExactReceiveDgLaw law(w, Probability(0.3));
    EXPECT_FALSE(law.split());
    EXPECT_EQ(law.atoms().size(), 201U);
    // Binomial(200, 0.3) <= 60 has probability 0.5348...
    double binom = 0.0;
    double term = std::pow(0.7, 200);
    for (int i = 0; i <= 60; ++i) {
        binom += term;
        term *= (200.0 - i) / (i + 1.0) * 0.3 / 0.7;
    }
    EXPECT_NEAR(law.cdf(30.0), binom, 1e-12);
}

TEST(ExactLaw, CapacityError) {
    std::vector<double> w;
    for (int d = 1; d <= 60; ++d) {
        w.push_back(1.0 / (d + 0.1234567 * std::sqrt(static_cast<double>(d))));
    }
    EXPECT_THROW(ExactReceiveDgLaw(w, Probability(0.5)), CapacityError);
    const auto d = receive_dg_distribution(w, Probability(0.5));
    EXPECT_THROW(infout_exact(d, 1, 1.0), CapacityError);
    // The oracle falls back to a bracket.
    const auto b = infout_oracle(d, 1, 5.0);
    EXPECT_LE(b.lo, b.hi);
    EXPECT_LT(b.hi - b.lo, 0.01);
}

TEST(GridBracket, ContainsExactValue) {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(0.1, 0.9);
    for (int rep = 0; rep < 30; ++rep) {
        const auto w = oracle::random_profile(gen, 3 + rep % 12);
        const double p = u(gen);
        const auto grid = GridBracketLaw::for_gains(w, Probability(p), 4096);
        const ExactReceiveDgLaw exact(w, Probability(p));
        double total = 0.0;
        for (double x : w) {
            total += x;
        }
        for (double t = 0.0; t <= total; t += total / 17.0) {
            const auto b = grid.cdf(t);
            const double e = exact.cdf(t);
            ASSERT_LE(b.lo, e + 1e-12) << rep << " " << t;
            ASSERT_GE(b.hi, e - 1e-12) << rep << " " << t;
        }
    }
}

TEST(GridBracket, KsBoundDominatesExactKs) {
    const auto w = oracle::reciprocal_profile(16);
    const auto dist = receive_dg_distribution(w, Probability(0.8));
    const ExactReceiveDgLaw exact(w, Probability(0.8));
    const auto grid = GridBracketLaw::for_gains(w, Probability(0.8), 1 << 16);
    const double sd = std::sqrt(dist.variance);
    const double ks = exact.ks_distance_to_normal(dist.mean, sd);
    const double bound = grid.ks_upper_bound_to_normal(dist.mean, sd);
    EXPECT_GE(bound, ks - 1e-12);
    EXPECT_LT(bound - ks, 0.01);
}

TEST(GridBracket, Incremental) {
    GridBracketLaw law(0.01, Probability(0.5));
    EXPECT_EQ(law.cdf(0.0).lo, 1.0);
    law.add_gain(0.5);
    law.add_gain(0.25);
    EXPECT_EQ(law.terms(), 2U);
    EXPECT_NEAR(law.cdf(0.3).lo, 0.5, 1e-15);
    EXPECT_NEAR(law.cdf(0.3).hi, 0.5, 1e-15);
    EXPECT_EQ(law.cdf(-1.0).hi, 0.0);
    EXPECT_THROW(GridBracketLaw(0.0, Probability(0.5)), DomainError);
    EXPECT_THROW(law.add_gain(-1.0), DomainError);
}

TEST(InfoutExact, MonotoneProperties) {
    const auto w = oracle::reciprocal_profile(16);
    const double g_th = dg_threshold(0.968, 2);
    for (std::size_t s = 2; s <= 16; ++s) {
        const std::vector<double> head(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(s));
        const std::vector<double> shorter(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(s - 1));
        for (double p = 0.1; p < 0.95; p += 0.1) {
            const auto d = receive_dg_distribution(head, Probability(p));
            for (std::size_t k = 1; k <= 10; ++k) {
                const double v = infout_exact(d, k, g_th);
                EXPECT_LE(infout_exact(d, k + 1, g_th), v + 1e-15);
                EXPECT_LE(infout_exact(receive_dg_distribution(head, Probability(p + 0.05)), k, g_th), v + 1e-15);
                EXPECT_LE(v, infout_exact(receive_dg_distribution(shorter, Probability(p)), k, g_th) * (1 + 1e-12));
            }
        }
    }
}

TEST(InfoutExact, CloseToGaussianForLongProfiles) {
    const auto w = oracle::reciprocal_profile(30);
    const double g_th = dg_threshold(0.968, 2);
    for (double p = 0.2; p <= 0.9 + 1e-9; p += 0.1) {
        const auto d = receive_dg_distribution(w, Probability(p));
        for (std::size_t k = 1; k <= 12; ++k) {
            EXPECT_LE(std::abs(infout_exact(d, k, g_th) - infout_gaussian(d, k, g_th)), 0.05) << p << " " << k;
        }
    }
}

TEST(Lindeberg, Cases) {
    const auto d1 = receive_dg_distribution(std::vector<double>{1.0}, Probability(0.5));
    EXPECT_NEAR(lindeberg_diagnostic(d1, 1e-6), 1.0, 1e-12);
    EXPECT_EQ(lindeberg_diagnostic(d1, 10.0), 0.0);
    const auto flat = receive_dg_distribution(std::vector<double>(100, 0.3), Probability(0.8));
    EXPECT_EQ(lindeberg_diagnostic(flat, 0.5), 0.0);
    EXPECT_THROW(lindeberg_diagnostic(receive_dg_distribution(std::vector<double>{1.0}, Probability(1.0)), 0.5),
                 DegenerateError);
    EXPECT_THROW(lindeberg_diagnostic(d1, 0.0), DomainError);
}

TEST(Lindeberg, VanishesAsProfileGrows) {
    double prev = 2.0;
    for (std::size_t s : {2, 8, 32, 128, 512}) {
        const auto d = receive_dg_distribution(oracle::reciprocal_profile(s), Probability(0.7));
        const double v = lindeberg_diagnostic(d, 0.5);
        EXPECT_LE(v, prev);
        prev = v;
    }
    EXPECT_EQ(prev, 0.0);
}

TEST(FirstPercentile, OrderStatistic) {
    EXPECT_EQ(first_percentile(std::vector<double>(100, 0.7)), 0.7);
    std::vector<double> v;
    for (int i = 100; i >= 1; --i) {
        v.push_back(i / 100.0);
    }
    EXPECT_EQ(first_percentile(v), 0.01);
    std::vector<double> w;
    for (int i = 1; i <= 1000; ++i) {
        w.push_back(i);
    }
    EXPECT_EQ(first_percentile(w), 10.0);
    EXPECT_THROW(first_percentile({}), DomainError);
}

TEST(InfoutEmpirical, DeterministicChannel) {
    const auto m = symmetric_two_class_model(10);
    const auto good = infout_empirical(m, Probability(1.0), 10, 10, 0.9, 50, 1, RngStream(1));
    EXPECT_EQ(good.value, 0.0);
    const auto bad = infout_empirical(m, Probability(1.0), 1, 1, 0.9, 50, 1, RngStream(1));
    EXPECT_EQ(bad.value, 1.0);
    EXPECT_EQ(bad.accuracies.size(), 50U);
    EXPECT_THROW(infout_empirical(m, Probability(1.0), 1, 1, 0.9, 0, 1, RngStream(1)), DomainError);
}

TEST(InfoutEmpirical, MatchesExactForTwoClasses) {
    const auto m = symmetric_two_class_model(12);
    const auto profile = dg_profile(m);
    const double a_th = 0.9;
    const double g_th = dg_threshold(a_th, 2);
    for (double p : {0.5, 0.7, 0.9}) {
        for (std::size_t k : {4, 8}) {
            const auto emp = infout_empirical(m, Probability(p), k, 12, a_th, 20000, 1, RngStream(3, k));
            const auto d = receive_dg_distribution(profile, 12, Probability(p));
            const double ex = infout_exact(d, k, g_th);
            EXPECT_NEAR(emp.value, ex, 3.0 * std::sqrt(ex * (1 - ex) / 20000) + 1e-9) << p << " " << k;
        }
    }
}

TEST(InfoutEmpirical, ThreeClassesUseInnerMonteCarlo) {
    const GmmModel m({{0.0, 0.0, 0.0}, {1.5, 0.0, 1.0}, {0.0, 1.5, -1.0}}, {1.0, 1.0, 2.0});
    const auto a = infout_empirical(m, Probability(0.8), 3, 3, 0.8, 30, 500, RngStream(4));
    const auto b = infout_empirical(m, Probability(0.8), 3, 3, 0.8, 30, 500, RngStream(4));
    EXPECT_EQ(a.accuracies, b.accuracies);
    for (double acc : a.accuracies) {
        EXPECT_GE(acc, 0.0);
        EXPECT_LE(acc, 1.0);
    }
}

TEST(OutageReport, CsvRow) {
    const auto m = symmetric_two_class_model(8);
    const auto r = analyze_operating_point(m, Probability(0.8), 4, 8, 0.9, 100, 1, RngStream(2));
    const auto fields = to_csv_fields(r);
    ASSERT_EQ(fields.size(), outage_report_header().size());
    EXPECT_EQ(fields[0], "4");
    EXPECT_EQ(fields[1], "8");
    EXPECT_EQ(fields[2], "0.8");
    EXPECT_FALSE(fields[5].empty());
    const auto no_mc = analyze_operating_point(m, Probability(0.8), 4, 8, 0.9, 0, 1, RngStream(2));
    EXPECT_TRUE(to_csv_fields(no_mc)[6].empty());
}

} // namespace infout
