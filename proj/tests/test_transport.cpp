#include "fibretrans/transport.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace fibretrans;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

CoefficientTensor paper_system() {
    Mat a1(2, 2);
    a1 << 2, 2, 1, 3;
    return CoefficientTensor({a1, 2.0 * a1});
}

TransportSystem paper_transport() {
    const auto A = paper_system();
    return TransportSystem::from_directions(A, check_rank_one_spanning(A, 42).directions);
}

Vec point(double a, double b) { return (Vec(2) << a, b).finished(); }

ManufacturedPresets smooth_presets(double g0, double g1) {
    return {{ScalarProfile::sine(1, 1.0, 0), ScalarProfile::cosine(1, 0.5, 1)},
            {ScalarProfile::constant(g0), ScalarProfile::constant(g1)},
            Vec(),
            0};
}

}  // namespace

TEST(TransportSystem, VelocitiesFromCertificates) {
    const auto ts = paper_transport();
    ASSERT_EQ(ts.d(), 2);
    ASSERT_EQ(ts.N(), 2);
    // eigenvalues 1 and 4 of A₁ with A₂ = 2A₁
    EXPECT_NEAR(ts.velocity(0)(0), 1.0, 1e-12);
    EXPECT_NEAR(ts.velocity(0)(1), 2.0, 1e-12);
    EXPECT_NEAR(ts.velocity(1)(0), 4.0, 1e-12);
    EXPECT_NEAR(ts.velocity(1)(1), 8.0, 1e-12);
    EXPECT_LT(ts.condition, 10.0);
}

TEST(TransportSystem, RejectsNonEigenvector) {
    const auto A = paper_system();
    std::vector<RankOneDirection> dirs{{point(1.0, 0.0), (Vec(3) << 1, 2, 4).finished()}};
    EXPECT_THROW(TransportSystem::from_directions(A, dirs), FibreError);
}

TEST(Characteristics, ZeroVelocityIsStationary) {
    const Grid g(1, 1.0, 1.0, 8, 32);
    const auto v0 = ScalarProfile::tent(1.0, 0, 0.3);
    const auto v = characteristic_solve(Vec::Zero(1), v0, ScalarProfile::zero(), g);
    for (std::size_t p = 0; p < g.points(); ++p) EXPECT_EQ(v.at(p, 0), v0(g.x_of(p), 1.0));
}

TEST(Characteristics, SineIsTransportedExactly) {
    const Grid g(1, 1.0, 1.0, 16, 64);
    const Vec c = Vec::Constant(1, 0.7);
    const auto v = characteristic_solve(c, ScalarProfile::sine(2, 1.0, 0), ScalarProfile::zero(), g);
    for (std::size_t p = 0; p < g.points(); ++p)
        EXPECT_NEAR(v.at(p, 0), std::sin(2 * kTwoPi * (g.x_of(p)(0) - 0.7 * g.t_of(p))), 1e-12);
}

TEST(Characteristics, ConstantSourceGrowsLinearly) {
    const Grid g(2, 0.5, 1.0, 8, 8);
    const auto v = characteristic_solve(point(1.0, -2.0), ScalarProfile::zero(), ScalarProfile::constant(1.0), g);
    for (std::size_t p = 0; p < g.points(); ++p) EXPECT_NEAR(v.at(p, 0), g.t_of(p), 1e-14);
}

TEST(Characteristics, SineSourceMatchesClosedForm) {
    const Vec c = Vec::Constant(1, 0.8);
    const auto src = ScalarProfile::sine(1, 1.0, 0);
    for (double t : {0.1, 0.37, 0.9})
        for (double x : {0.0, 0.25, 0.61}) {
            const double v =
                characteristic_value(c, ScalarProfile::zero(), src, t, Vec::Constant(1, x), 1.0, 400);
            const double exact = (std::cos(kTwoPi * (x - 0.8 * t)) - std::cos(kTwoPi * x)) / (0.8 * kTwoPi);
            EXPECT_NEAR(v, exact, 1e-5);
        }
}

TEST(Characteristics, ConstantAlongCharacteristicsProperty) {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const Vec c = rng.normal_vector(2);
        const Vec x = point(rng.uniform(), rng.uniform());
        const double t = rng.uniform(0.0, 1.0);
        const double s = rng.uniform(0.0, 1.0);
        const double g0 = rng.uniform(-1.0, 1.0);
        const auto v0 = ScalarProfile::cosine(1, 1.0, trial % 2);
        const auto g = ScalarProfile::constant(g0);
        const double a = characteristic_value(c, v0, g, t, x, 1.0, 16);
        const double b = characteristic_value(c, v0, g, t + s, x + s * c, 1.0, 16);
        EXPECT_NEAR(b, a + s * g0, 1e-12);
    }
}

TEST(Manufactured, GridMatchesPointwiseAndSourceIsMapped) {
    const auto ts = paper_transport();
    const Grid g(2, 0.5, 1.0, 8, 8);
    const auto pr = smooth_presets(1.0, -0.5);
    const auto ms = manufactured_solution(ts, pr, g);
    const Vec gv = point(1.0, -0.5);
    const Vec f_exact = ts.xi.lu().solve(gv);
    for (std::size_t p = 0; p < g.points(); ++p) {
        const Vec u = manufactured_value(ts, pr, g.t_of(p), g.x_of(p), g.L());
        EXPECT_LT((ms.u.value(p) - u).norm(), 1e-12);
        EXPECT_LT((ms.f.value(p) - f_exact).norm(), 1e-12);
        const Vec v = ts.xi * ms.u.value(p);
        EXPECT_NEAR(v(0), std::sin(kTwoPi * (g.x_of(p) - g.t_of(p) * ts.velocity(0))(0)) + g.t_of(p), 1e-12);
    }
}

TEST(Manufactured, ZeroDataGivesZeroSolution) {
    const auto ts = paper_transport();
    const Grid g(2, 0.5, 1.0, 4, 4);
    ManufacturedPresets pr{{ScalarProfile::zero(), ScalarProfile::zero()},
                           {ScalarProfile::zero(), ScalarProfile::zero()},
                           Vec(),
                           0};
    const auto ms = manufactured_solution(ts, pr, g);
    for (double v : ms.u.values()) EXPECT_EQ(v, 0.0);
    for (double v : ms.f.values()) EXPECT_EQ(v, 0.0);
}

TEST(Manufactured, StrongResidualIsSecondOrder) {
    const auto A = paper_system();
    const auto ts = paper_transport();
    const auto pr = smooth_presets(0.3, 1.0);
    const Vec f = ts.xi.lu().solve(point(0.3, 1.0));
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const double t = rng.uniform(0.1, 0.4);
        const Vec x = point(rng.uniform(), rng.uniform());
        auto residual = [&](double d) {
            Vec r = (manufactured_value(ts, pr, t + d, x, 1.0) - manufactured_value(ts, pr, t - d, x, 1.0)) / (2 * d);
            for (int i = 0; i < 2; ++i) {
                Vec e = Vec::Zero(2);
                e(i) = d;
                r += A.slice(i) *
                     (manufactured_value(ts, pr, t, x + e, 1.0) - manufactured_value(ts, pr, t, x - e, 1.0)) / (2 * d);
            }
            return (r - f).norm();
        };
        const double coarse = residual(2e-4);
        const double fine = residual(1e-4);
        EXPECT_LT(fine, 1e-3);
        EXPECT_NEAR(coarse / fine, 4.0, 0.5);
    }
}

TEST(Manufactured, WeakResidualSmallAndShiftDetected) {
    const auto A = paper_system();
    const auto ts = paper_transport();
    const Grid g(2, 0.5, 1.0, 64, 64);
    auto pr = smooth_presets(0.0, 0.0);
    const auto bumps = default_bumps(g, Extension::Periodic, 42);
    const auto good = manufactured_solution(ts, pr, g);
    EXPECT_LT(weak_residual(good.u, good.f, A, bumps).max_normalized, 1e-3);
    pr.velocity_shift = point(1.0, 0.0);
    const auto bad = manufactured_solution(ts, pr, g);
    EXPECT_GT(weak_residual(bad.u, bad.f, A, bumps).max_normalized, 1e-2);
}

TEST(Manufactured, RequiresFullInvertibleDirectionSet) {
    const auto A = paper_system();
    const auto dirs = check_rank_one_spanning(A, 42).directions;
    const auto partial = TransportSystem::from_directions(A, {dirs[0]});
    const Grid g(2, 0.5, 1.0, 4, 4);
    ManufacturedPresets pr{{ScalarProfile::zero()}, {ScalarProfile::zero()}, Vec(), 0};
    try {
        manufactured_solution(partial, pr, g);
        FAIL() << "expected SingularXi";
    } catch (const FibreError& e) {
        EXPECT_EQ(e.code(), ErrorCode::SingularXi);
    }
    auto singular = TransportSystem::from_directions(A, dirs);
    singular.xi.row(1) = singular.xi.row(0);
    singular.condition = std::numeric_limits<double>::infinity();
    EXPECT_THROW(manufactured_value(singular, smooth_presets(0, 0), 0.1, point(0, 0), 1.0), FibreError);
    EXPECT_THROW(manufactured_solution(paper_transport(), pr, g), FibreError);
}
