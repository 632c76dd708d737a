#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "cascade/core.hpp"

using namespace cascade;

TEST(Distribution, UniformCdf) {
    const auto u = Distribution::uniform(20, 180);
    EXPECT_EQ(u.cdf(20), 0.0);
    EXPECT_EQ(u.cdf(100), 0.5);
    EXPECT_EQ(u.cdf(10), 0.0);
    EXPECT_EQ(u.cdf(500), 1.0);
}

TEST(Distribution, ExponentialCdfAtOneMean) {
    const auto e = Distribution::shifted_exponential(20, 1.0 / 120);
    EXPECT_NEAR(e.cdf(140), 1.0 - std::exp(-1.0), 1e-15);
    EXPECT_NEAR(e.cdf(140), 0.63212, 5e-6);
    EXPECT_EQ(e.cdf(20), 0.0);
    EXPECT_NEAR(e.survival(140) + e.cdf(140), 1.0, 1e-15);
}

TEST(Distribution, PointCdfIsStep) {
    const auto p = Distribution::point(75);
    EXPECT_EQ(p.cdf(74.999), 0.0);
    EXPECT_EQ(p.cdf(75), 1.0);
}

TEST(Distribution, Means) {
    EXPECT_EQ(dist_mean(Distribution::uniform(10, 30)), 20.0);
    EXPECT_EQ(dist_mean(Distribution::point(75)), 75.0);
    EXPECT_DOUBLE_EQ(dist_mean(Distribution::shifted_exponential(20, 1.0 / 120)), 140.0);
}

TEST(Distribution, RejectsInvalidParameters) {
    EXPECT_THROW(Distribution::uniform(-1, 5), CascadeError);
    EXPECT_THROW(Distribution::uniform(5, 5), CascadeError);
    EXPECT_THROW(Distribution::shifted_exponential(-1, 1), CascadeError);
    EXPECT_THROW(Distribution::shifted_exponential(0, 0), CascadeError);
    EXPECT_THROW(Distribution::point(-0.5), CascadeError);
    EXPECT_NO_THROW(Distribution::point(0));
}

TEST(Distribution, CdfMonotoneOnRandomPairs) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> x(-50, 600);
    const Distribution ds[] = {Distribution::uniform(20, 180), Distribution::uniform(10, 65),
                               Distribution::shifted_exponential(20, 1.0 / 120), Distribution::point(75)};
    for (const auto& d : ds)
        for (int i = 0; i < 10000; ++i) {
            double a = x(rng), b = x(rng);
            if (a > b) std::swap(a, b);
            ASSERT_LE(d.cdf(a), d.cdf(b)) << d.to_string() << " at " << a << ", " << b;
        }
}

TEST(Distribution, SampleMeanWithinHalfPercent) {
    const Distribution ds[] = {Distribution::uniform(20, 180), Distribution::shifted_exponential(20, 1.0 / 120),
                               Distribution::uniform(10, 30)};
    std::mt19937_64 rng(12345);
    for (const auto& d : ds) {
        double sum = 0.0;
        const int n = 1000000;
        for (int i = 0; i < n; ++i) sum += d.sample(rng);
        EXPECT_NEAR(sum / n, d.mean(), 0.005 * d.mean()) << d.to_string();
    }
}

TEST(Coupling, IdentityAndFixedAreValid) {
    EXPECT_FALSE(validate_coupling(CouplingMatrix::identity(2)));
    EXPECT_FALSE(validate_coupling(CouplingMatrix(2, {0.65, 0.35, 0.35, 0.65})));
}

TEST(Coupling, ReportsShortRow) {
    const auto v = validate_coupling(CouplingMatrix(2, {0.6, 0.3, 0.5, 0.5}));
    ASSERT_TRUE(v);
    EXPECT_EQ(v->row, 0u);
    EXPECT_FALSE(v->col);
}

TEST(Coupling, ReportsOutOfRangeEntry) {
    const auto v = validate_coupling(CouplingMatrix(2, {1.3, -0.3, 0.5, 0.5}));
    ASSERT_TRUE(v);
    EXPECT_EQ(v->row, 0u);
    ASSERT_TRUE(v->col);
    EXPECT_EQ(*v->col, 0u);
}

TEST(Coupling, RowSumToleranceIsTight) {
    EXPECT_FALSE(validate_coupling(CouplingMatrix(2, {0.5, 0.5 + 5e-13, 0, 1})));
    EXPECT_TRUE(validate_coupling(CouplingMatrix(2, {0.5, 0.5 + 5e-12, 0, 1})));
}

TEST(Attack, ValidationAndScaling) {
    EXPECT_NO_THROW((AttackSpec{{0.5, 0}}.validate(2)));
    EXPECT_THROW(AttackSpec{{0.5}}.validate(2), CascadeError);
    EXPECT_THROW((AttackSpec{{1.5, 0}}.validate(2)), CascadeError);
    const auto a = AttackSpec::scaled({1.0, 0.5}, 0.4);
    EXPECT_DOUBLE_EQ(a.p[0], 0.4);
    EXPECT_DOUBLE_EQ(a.p[1], 0.2);
}

TEST(Network, DegreeRange) {
    NetworkConfig c{1000, Distribution::point(1), Distribution::uniform(0, 1), ErdosRenyi{20}};
    EXPECT_NO_THROW(c.validate());
    c.topology = ErdosRenyi{1000};
    EXPECT_THROW(c.validate(), CascadeError);
    c.topology = BarabasiAlbert{0};
    EXPECT_THROW(c.validate(), CascadeError);
    c.node_count = 0;
    c.topology = CompleteGraph{};
    EXPECT_THROW(c.validate(), CascadeError);
}

TEST(Seeds, DerivedStreamsDiffer) {
    EXPECT_NE(derive_seed(1, 0, 0), derive_seed(1, 1, 0));
    EXPECT_NE(derive_seed(1, 0, 0), derive_seed(1, 0, 1));
    EXPECT_NE(derive_seed(1, 0, 0), derive_seed(2, 0, 0));
    EXPECT_EQ(derive_seed(9, 3, 4), derive_seed(9, 3, 4));
}
