#include "fibretrans/frames.hpp"
#include "fibretrans/generators.hpp"

#include <gtest/gtest.h>

using namespace fibretrans;

namespace {

CoefficientTensor worked_example() {
    Mat a1(2, 2);
    a1 << 2, 2, 1, 3;
    return CoefficientTensor({a1, 2.0 * a1});
}

}  // namespace

TEST(BuildAdaptedFrame, ZeroSystemDirectionsGiveStandardBasis) {
    std::vector<RankOneDirection> dirs;
    for (int a = 0; a < 2; ++a) dirs.push_back(RankOneDirection::normalized(Vec::Unit(2, a), Vec::Unit(3, 0)));
    const auto f = build_adapted_frame(dirs, 2, 2);
    const auto s = MatrixFrame::standard(2, 2);
    for (int k = 0; k < 6; ++k) EXPECT_LT((f.element(k) - s.element(k)).norm(), 1e-15);
    EXPECT_EQ(f.adapted_rows(), 2);
}

TEST(BuildAdaptedFrame, WorkedExampleFrame) {
    const auto A = worked_example();
    const auto rep = check_rank_one_spanning(A, 42);
    const auto f = build_adapted_frame(rep.directions, 2, 2);
    EXPECT_EQ(f.dim(), 6);
    const auto pi = fibre_subspace(augment(A));
    for (int a = 0; a < 2; ++a) {
        const Mat e = f.element(a, 0);
        const Mat p = rep.directions[a].matrix();
        EXPECT_NEAR(std::abs(frobenius(e, p)), e.norm() * p.norm(), 1e-12 * p.norm());
        EXPECT_LT(pi.relative_residual(e), 1e-10);
        for (int i = 1; i <= 2; ++i) EXPECT_NEAR(f.right(a, i).dot(f.right(a, 0)), 0.0, 1e-14);
    }
    EXPECT_GT(std::abs(f.gram().determinant()), 1e-8);
    EXPECT_TRUE(std::isfinite(f.condition_number()));
}

TEST(BuildAdaptedFrame, OrthonormalInputsGiveOrthonormalFrame) {
    Rng rng(4);
    const Mat q = random_orthogonal(3, rng);
    std::vector<RankOneDirection> dirs;
    for (int a = 0; a < 3; ++a) {
        RankOneDirection d;
        d.xi = q.col(a);
        d.a = Vec::Unit(3, 0);
        dirs.push_back(d);
    }
    const auto f = build_adapted_frame(dirs, 3, 2);
    EXPECT_LT((f.gram() - Mat::Identity(9, 9)).norm(), 1e-12);
}

TEST(BuildAdaptedFrame, PartialDirectionsAreCompleted) {
    Rng rng(5);
    const auto sys = random_hyperbolic_structure(3, 2, rng);
    Vec a(3);
    a << 1.0, sys.lambda(0, 0), sys.lambda(0, 1);
    const auto dir = RankOneDirection::normalized(sys.xi.row(0).transpose(), a);
    const auto f = build_adapted_frame({dir}, 3, 2);
    EXPECT_EQ(f.adapted_rows(), 1);
    EXPECT_LT(f.condition_number(), 1e8);
    for (int b = 1; b < 3; ++b) EXPECT_NEAR(f.left(b).dot(f.left(0)), 0.0, 1e-12);
}

TEST(BuildAdaptedFrame, DependentDirectionsThrow) {
    RankOneDirection d = RankOneDirection::normalized(Vec::Unit(2, 0), Vec::Unit(2, 0));
    try {
        build_adapted_frame({d, d}, 2, 1);
        FAIL();
    } catch (const FibreError& e) {
        EXPECT_EQ(e.code(), ErrorCode::DependentDirections);
    }
}

TEST(ExpansionTensor, OrthonormalSelfExpansionIsIdentity) {
    const auto s = MatrixFrame::standard(2, 3);
    EXPECT_LT((expansion_tensor(s, s).matrix() - Mat::Identity(8, 8)).norm(), 1e-15);
}

TEST(ExpansionTensor, AdaptedFrameReconstruction) {
    const auto rep = check_rank_one_spanning(worked_example(), 42);
    const auto f = build_adapted_frame(rep.directions, 2, 2);
    const auto C = expansion_tensor(f, f);
    Rng rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const SpaceTimeMatrix x = rng.normal_matrix(2, 3);
        EXPECT_LT((reconstruct(f, expand_coefficients(C, f, x)) - x).norm(), 1e-10 * x.norm());
    }
}

TEST(ExpansionTensor, StandardDualMatchesLinearSolve) {
    Rng rng(12);
    const auto E = random_frame(2, 2, rng);
    const auto F = MatrixFrame::standard(2, 2);
    const auto C = expansion_tensor(E, F);
    // Oracle: column (β,j) holds the E-coordinates of e^β⊗e^j, from a direct solve.
    Mat oracle(6, 6);
    for (int k = 0; k < 6; ++k) oracle.col(k) = E.stacked().partialPivLu().solve(vectorize(F.element(k)));
    EXPECT_LT((C.matrix() - oracle).norm(), 1e-10 * oracle.norm());
}

TEST(ExpansionTensor, BasisElementAndZeroCoefficients) {
    Rng rng(13);
    const auto E = random_frame(2, 1, rng, 1e3);
    const auto F = random_frame(2, 1, rng, 1e3);
    const auto C = expansion_tensor(E, F);
    for (int k = 0; k < E.dim(); ++k) {
        const Mat kappa = expand_coefficients(C, F, E.element(k));
        Mat expected = Mat::Zero(2, 2);
        expected(k / 2, k % 2) = 1.0;
        EXPECT_LT((kappa - expected).norm(), 1e-9);
    }
    EXPECT_EQ(expand_coefficients(C, F, Mat::Zero(2, 2)), Mat::Zero(2, 2));
}

TEST(ExpansionTensor, TwoRoutesAgreeAndReconstruct) {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const int N = 1 + trial % 3;
        const int n = 1 + trial % 2;
        const auto E = random_frame(N, n, rng, 1e4);
        const auto F = random_frame(N, n, rng, 1e4);
        const auto c1 = expansion_tensor(E, F);
        const auto c2 = expansion_tensor_by_solves(E, F);
        EXPECT_LT((c1.matrix() - c2.matrix()).norm(), 1e-10 * c1.matrix().norm());
        for (int k = 0; k < 50; ++k) {
            const SpaceTimeMatrix x = rng.normal_matrix(N, 1 + n);
            EXPECT_LT((reconstruct(E, expand_coefficients(c1, F, x)) - x).norm(), 1e-8 * x.norm());
        }
    }
}

TEST(ExpansionTensor, SingularFrameThrows) {
    std::vector<Vec> left{Vec::Unit(2, 0), Vec::Unit(2, 0)};
    std::vector<std::vector<Vec>> right{{Vec::Unit(2, 0), Vec::Unit(2, 1)}, {Vec::Unit(2, 0), Vec::Unit(2, 1)}};
    const MatrixFrame bad(2, 1, 0, left, right);
    const auto good = MatrixFrame::standard(2, 1);
    EXPECT_FALSE(bad.warnings().empty());
    for (auto route : {expansion_tensor, expansion_tensor_by_solves}) {
        try {
            route(bad, good);
            FAIL();
        } catch (const FibreError& e) {
            EXPECT_EQ(e.code(), ErrorCode::SingularGram);
        }
    }
}
