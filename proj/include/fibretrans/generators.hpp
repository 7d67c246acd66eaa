#pragma once

// Random systems and frames with prescribed structure, for property tests.

#include "fibretrans/matrix_frame.hpp"
#include "fibretrans/operator_core.hpp"

#include <vector>

namespace fibretrans {

/// Random invertible N×N matrix with condition number at most max_condition.
inline Mat random_well_conditioned(int N, Rng& rng, double max_condition = 10.0) {
    for (;;) {
        const Mat m = rng.normal_matrix(N, N);
        Eigen::JacobiSVD<Mat> svd(m);
        const Vec& s = svd.singularValues();
        if (s(N - 1) > 0.0 && s(0) / s(N - 1) <= max_condition) return m;
    }
}

inline Mat random_orthogonal(int N, Rng& rng) {
    Eigen::HouseholderQR<Mat> qr(rng.normal_matrix(N, N));
    return qr.householderQ() * Mat::Identity(N, N);
}

struct ManufacturedSystem {
    CoefficientTensor A;
    /// rows ξ^p, common left eigenvectors
    Mat xi;
    /// (p, i) ↦ eigenvalue of A_i for ξ^p
    Mat lambda;
};

/// A_i = Ξ⁻¹Λ_iΞ with random well-conditioned Ξ and eigenvalues in [-2, 2].
inline ManufacturedSystem random_hyperbolic_structure(int N, int n, Rng& rng) {
    const Mat xi = random_well_conditioned(N, rng);
    Mat lambda(N, n);
    for (int i = 0; i < n; ++i)
        for (int p = 0; p < N; ++p) lambda(p, i) = rng.uniform(-2.0, 2.0);
    const Mat xi_inv = xi.inverse();
    std::vector<Mat> slices;
    for (int i = 0; i < n; ++i) slices.push_back(xi_inv * lambda.col(i).asDiagonal() * xi);
    return {CoefficientTensor(std::move(slices)), xi, lambda};
}

inline CoefficientTensor random_hyperbolic_system(int N, int n, Rng& rng) {
    return random_hyperbolic_structure(N, n, rng).A;
}

/// A_i = Q D_i Qᵀ with shared random orthogonal Q.
inline CoefficientTensor random_commuting_symmetric(int N, int n, Rng& rng) {
    const Mat q = random_orthogonal(N, rng);
    std::vector<Mat> slices;
    for (int i = 0; i < n; ++i) {
        Vec d(N);
        for (int k = 0; k < N; ++k) d(k) = rng.uniform(-2.0, 2.0);
        Mat s = q * d.asDiagonal() * q.transpose();
        slices.push_back(0.5 * (s + s.transpose()));
    }
    return CoefficientTensor(std::move(slices));
}

/// Rank-one frame with random factors whose condition number is below max_condition.
inline MatrixFrame random_frame(int N, int n, Rng& rng, double max_condition = 1e6) {
    for (;;) {
        std::vector<Vec> left;
        std::vector<std::vector<Vec>> right;
        for (int a = 0; a < N; ++a) {
            left.push_back(rng.normal_vector(N));
            std::vector<Vec> row;
            for (int i = 0; i <= n; ++i) row.push_back(rng.normal_vector(1 + n));
            right.push_back(std::move(row));
        }
        MatrixFrame f(N, n, 0, std::move(left), std::move(right));
        if (f.condition_number() < max_condition) return f;
    }
}

}  // namespace fibretrans
