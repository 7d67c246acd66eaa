#include "fibretrans/operator_core.hpp"
#include "fibretrans/generators.hpp"

#include <gtest/gtest.h>

using namespace fibretrans;

namespace {

CoefficientTensor worked_example() {
    Mat a1(2, 2);
    a1 << 2, 2, 1, 3;
    return CoefficientTensor({a1, 2.0 * a1});
}

// Independent contraction: (A:X)_α = Σ_{β,i} A_{αβi} X_{βi}, written with loops only.
Vec contract_by_hand(const CoefficientTensor& A, const SpaceTimeMatrix& x) {
    Vec out(A.N());
    for (int alpha = 0; alpha < A.N(); ++alpha) {
        double s = x(alpha, 0);
        for (int beta = 0; beta < A.N(); ++beta)
            for (int i = 0; i < A.n(); ++i) s += A(alpha, beta, i) * x(beta, 1 + i);
        out(alpha) = s;
    }
    return out;
}

}  // namespace

TEST(CoefficientTensor, SlicesRoundTripExactly) {
    Rng rng(3);
    std::vector<Mat> slices{rng.normal_matrix(3, 3), rng.normal_matrix(3, 3)};
    const CoefficientTensor A(slices);
    for (int i = 0; i < 2; ++i) EXPECT_EQ(A.slice(i), slices[i]);
    EXPECT_EQ(A(1, 2, 1), slices[1](1, 2));
}

TEST(CoefficientTensor, RejectsBadShapes) {
    EXPECT_THROW(CoefficientTensor(std::vector<Mat>{}), FibreError);
    EXPECT_THROW(CoefficientTensor({Mat::Zero(2, 2), Mat::Zero(3, 3)}), FibreError);
    Mat bad = Mat::Zero(2, 2);
    bad(0, 0) = std::nan("");
    EXPECT_THROW(CoefficientTensor({bad}), FibreError);
}

TEST(Augment, CaseSplitIsExact) {
    const auto A = worked_example();
    const auto abar = augment(A);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            EXPECT_EQ(abar(a, b, 0), a == b ? 1.0 : 0.0);
            for (int i = 0; i < 2; ++i) EXPECT_EQ(abar(a, b, 1 + i), A(a, b, i));
        }
}

TEST(Augment, ScalarCaseIsOneByTwoRow) {
    Mat c(1, 1);
    c << 0.7;
    const auto abar = augment(CoefficientTensor({c}));
    ASSERT_EQ(abar.as_matrix().rows(), 1);
    ASSERT_EQ(abar.as_matrix().cols(), 2);
    EXPECT_EQ(abar.as_matrix()(0, 0), 1.0);
    EXPECT_EQ(abar.as_matrix()(0, 1), 0.7);
}

TEST(Apply, WorkedExampleDirection) {
    const auto abar = augment(worked_example());
    Vec xi(2), a(3);
    xi << 1, 2;
    a << 1, 4, 8;
    const Vec r = abar.apply(xi * a.transpose());
    EXPECT_EQ(r(0), 121.0);
    EXPECT_EQ(r(1), 142.0);
    Vec eta(2);
    eta << 1, 2;
    EXPECT_EQ(eta.dot(r), 405.0);
    EXPECT_EQ(xi.squaredNorm() * a.squaredNorm(), 405.0);
    EXPECT_EQ(frobenius(abar.adjoint_apply(eta), xi * a.transpose()), 405.0);
}

TEST(Apply, NullspaceElementMapsToZero) {
    Rng rng(11);
    const CoefficientTensor A({rng.normal_matrix(3, 3), rng.normal_matrix(3, 3)});
    SpaceTimeMatrix x = rng.normal_matrix(3, 3);
    x.col(0).setZero();
    x.col(0) = -contract_by_hand(A, x);
    EXPECT_LT(augment(A).apply(x).norm(), 1e-12);
}

TEST(Apply, ZeroSpatialPartReturnsTimeColumn) {
    Rng rng(5);
    const SpaceTimeMatrix x = rng.normal_matrix(2, 3);
    EXPECT_EQ(augment(CoefficientTensor::zero(2, 2)).apply(x), Vec(x.col(0)));
}

TEST(Apply, MatchesLoopContractionOnRandomInput) {
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        const CoefficientTensor A({rng.normal_matrix(3, 3), rng.normal_matrix(3, 3), rng.normal_matrix(3, 3)});
        const SpaceTimeMatrix x = rng.normal_matrix(3, 4);
        EXPECT_LT((augment(A).apply(x) - contract_by_hand(A, x)).norm(), 1e-12);
    }
    EXPECT_THROW(augment(CoefficientTensor::zero(2, 1)).apply(Mat::Zero(2, 3)), FibreError);
}

TEST(AdjointApply, WorkedExampleGivesRankOneMatrix) {
    Vec eta(2);
    eta << 1, 2;
    Mat expected(2, 3);
    expected << 1, 4, 8, 2, 8, 16;
    EXPECT_EQ(augment(worked_example()).adjoint_apply(eta), expected);
}

TEST(AdjointApply, ZeroSystemGivesTimeUnitMatrix) {
    const auto abar = augment(CoefficientTensor::zero(2, 2));
    Mat expected = Mat::Zero(2, 3);
    expected(1, 0) = 1.0;
    EXPECT_EQ(abar.adjoint_apply(Vec::Unit(2, 1)), expected);
}

TEST(AdjointApply, DualityOnThousandRandomTriples) {
    Rng rng(23);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const int N = 1 + static_cast<int>(rng.uniform() * 4);
        const int n = 1 + static_cast<int>(rng.uniform() * 3);
        std::vector<Mat> s;
        for (int i = 0; i < n; ++i) s.push_back(rng.normal_matrix(N, N));
        const auto abar = augment(CoefficientTensor(s));
        const Vec eta = rng.normal_vector(N);
        const SpaceTimeMatrix x = rng.normal_matrix(N, 1 + n);
        // Oracle: double contraction Σ_{αβi} η_α Ā_{αβi} X_{βi}.
        double direct = 0.0;
        for (int a = 0; a < N; ++a)
            for (int b = 0; b < N; ++b)
                for (int i = 0; i <= n; ++i) direct += eta(a) * abar(a, b, i) * x(b, i);
        worst = std::max(worst, std::abs(frobenius(abar.adjoint_apply(eta), x) - direct));
        worst = std::max(worst, std::abs(eta.dot(abar.apply(x)) - direct));
    }
    EXPECT_LT(worst, 1e-12);
}

TEST(FibreSubspace, ZeroSystemIsTimeBlock) {
    const auto pi = fibre_subspace(augment(CoefficientTensor::zero(2, 2)));
    EXPECT_EQ(pi.dim(), 2);
    EXPECT_NEAR(pi.coercivity(), 1.0, 1e-14);
    Mat time_block = Mat::Zero(2, 3);
    time_block(0, 0) = 0.3;
    time_block(1, 0) = -1.2;
    EXPECT_LT(pi.relative_residual(time_block), 1e-14);
}

TEST(FibreSubspace, WorkedExampleContainsPaperMatrices) {
    const auto pi = fibre_subspace(augment(worked_example()));
    EXPECT_EQ(pi.dim(), 2);
    Vec xi1(2), a1(3), xi2(2), a2(3);
    xi1 << 1, 2;
    a1 << 1, 4, 8;
    xi2 << 1, -1;
    a2 << 1, 1, 2;
    const Mat p1 = xi1 * a1.transpose();
    const Mat p2 = xi2 * a2.transpose();
    EXPECT_LT((p1 - pi.project(p1)).norm(), 1e-10);
    EXPECT_LT((p2 - pi.project(p2)).norm(), 1e-10);
}

TEST(FibreSubspace, ScalarCaseIsOneRowRange) {
    const double c = -1.7;
    Mat m(1, 1);
    m << c;
    const auto pi = fibre_subspace(augment(CoefficientTensor({m})));
    ASSERT_EQ(pi.dim(), 1);
    Vec expected(2);
    expected << 1.0, c;
    expected /= std::sqrt(1.0 + c * c);
    const Vec got = vectorize(pi.onb(0));
    EXPECT_NEAR(std::abs(got.dot(expected)), 1.0, 1e-14);
    EXPECT_NEAR(pi.coercivity(), std::sqrt(1.0 + c * c), 1e-12);
}

TEST(FibreSubspace, ProjectorIsOrthogonalAndSplitsSpace) {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        const int N = 2 + trial % 3;
        const int n = 1 + trial % 2;
        const auto A = random_hyperbolic_system(N, n, rng);
        const auto abar = augment(A);
        const auto pi = fibre_subspace(abar);
        EXPECT_EQ(pi.dim(), N);
        EXPECT_EQ(pi.dim() + pi.nullspace_dim(), N * (1 + n));
        const Mat P = pi.projector();
        EXPECT_LT((P * P - P).norm(), 1e-10);
        EXPECT_LT((P - P.transpose()).norm(), 1e-10);
        EXPECT_LT((pi.onb_columns().transpose() * pi.null_columns()).norm(), 1e-10);
        EXPECT_LT((abar.as_matrix() * pi.null_columns()).norm(), 1e-10 * abar.operator_norm());
        for (int b = 0; b < N; ++b) {
            const Mat g = abar.adjoint_apply(Vec::Unit(N, b));
            EXPECT_LT((g - pi.project(g)).norm(), 1e-10 * std::max(1.0, g.norm()));
        }
    }
}

TEST(Project, IdempotentOrthogonalAndPythagorean) {
    Rng rng(37);
    const auto A = random_hyperbolic_system(3, 2, rng);
    const auto pi = fibre_subspace(augment(A));
    for (int trial = 0; trial < 200; ++trial) {
        const SpaceTimeMatrix x = rng.normal_matrix(3, 3);
        const SpaceTimeMatrix px = project(pi, x);
        EXPECT_LT((pi.project(px) - px).norm(), 1e-12 * x.norm());
        EXPECT_NEAR(px.squaredNorm() + (x - px).squaredNorm(), x.squaredNorm(), 1e-12 * x.squaredNorm());
        const SpaceTimeMatrix nb = pi.null_basis(trial % pi.nullspace_dim());
        EXPECT_LT(pi.project(nb).norm(), 1e-12);
    }
    EXPECT_THROW(pi.project(Mat::Zero(3, 2)), FibreError);
}

TEST(FibreSubspace, AlgebraicIdentitiesOnRandomMatrices) {
    Rng rng(41);
    const auto A = random_hyperbolic_system(3, 2, rng);
    const auto abar = augment(A);
    const auto pi = fibre_subspace(abar);
    for (int trial = 0; trial < 1000; ++trial) {
        const SpaceTimeMatrix x = rng.normal_matrix(3, 3);
        const Vec ax = abar.apply(x);
        EXPECT_LT((abar.apply(pi.project(x)) - ax).norm(), 1e-10 * x.norm());
        EXPECT_GE(ax.norm(), pi.coercivity() * pi.project(x).norm() * (1.0 - 1e-10));
    }
}
