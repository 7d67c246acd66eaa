#pragma once

// Coefficient tensor of D_t u + A:Du = f, its augmentation Ā acting on
// space-time matrices, the adjoint η ↦ ηᵀĀ and the fibre subspace
// Π = N(Ā)^⊥ = R(Ā*).

#include "fibretrans/core.hpp"

#include <vector>

namespace fibretrans {

/// Constant coefficients A_{αβi}, held as the n slice matrices
/// (A_i)_{αβ} = A_{αβi}. Spatial index i runs 1..n in the math and 0..n-1 here.
class CoefficientTensor {
public:
    CoefficientTensor() = default;

    explicit CoefficientTensor(std::vector<Mat> slices) : slices_(std::move(slices)) {
        require(!slices_.empty(), ErrorCode::InvalidArgument, "coefficient tensor needs n >= 1 slices");
        const auto N = slices_.front().rows();
        require(N >= 1, ErrorCode::InvalidArgument, "state dimension N must be positive");
        for (const auto& s : slices_) {
            require(s.rows() == N && s.cols() == N, ErrorCode::DimensionMismatch,
                    "every slice A_i must be N x N");
            require(s.allFinite(), ErrorCode::InvalidArgument, "coefficients must be finite");
        }
    }

    static CoefficientTensor zero(int N, int n) { return CoefficientTensor(std::vector<Mat>(n, Mat::Zero(N, N))); }

    int N() const { return static_cast<int>(slices_.front().rows()); }
    int n() const { return static_cast<int>(slices_.size()); }

    /// A_{αβi} with i in 0..n-1.
    double operator()(int alpha, int beta, int i) const { return slices_[i](alpha, beta); }

    const Mat& slice(int i) const { return slices_[i]; }
    const std::vector<Mat>& slices() const { return slices_; }

    /// max_i ‖A_i‖_F
    double max_slice_norm() const {
        double m = 0.0;
        for (const auto& s : slices_) m = std::max(m, s.norm());
        return m;
    }

    CoefficientTensor scaled(double s) const {
        std::vector<Mat> out;
        for (const auto& a : slices_) out.push_back(s * a);
        return CoefficientTensor(std::move(out));
    }

private:
    std::vector<Mat> slices_;
};

/// Ā with Ā_{αβ0} = δ_{αβ} and Ā_{αβi} = A_{αβi} for i ≥ 1, stored as the
/// N × N(1+n) matrix acting on vectorize(X̄).
class AugmentedOperator {
public:
    explicit AugmentedOperator(CoefficientTensor base) : base_(std::move(base)) {
        const int N = base_.N();
        const int n = base_.n();
        matrix_ = Mat::Zero(N, N * (1 + n));
        matrix_.leftCols(N).setIdentity();
        for (int i = 0; i < n; ++i) matrix_.middleCols(N * (1 + i), N) = base_.slice(i);
    }

    const CoefficientTensor& base() const { return base_; }
    int N() const { return base_.N(); }
    int n() const { return base_.n(); }
    int matrix_dim() const { return N() * (1 + n()); }

    /// Ā_{αβi}, i in 0..n (0 is the temporal slot).
    double operator()(int alpha, int beta, int i) const { return matrix_(alpha, beta + N() * i); }

    const Mat& as_matrix() const { return matrix_; }

    /// Ā:X̄ = X₀ + A:X
    Vec apply(const SpaceTimeMatrix& x) const {
        check_shape(x);
        return matrix_ * vectorize(x);
    }

    /// ηᵀĀ, the matrix with entries Σ_β η_β Ā_{βαi}.
    SpaceTimeMatrix adjoint_apply(const Vec& eta) const {
        require(eta.size() == N(), ErrorCode::DimensionMismatch, "adjoint_apply: eta must have length N");
        return unvectorize(matrix_.transpose() * eta, N(), 1 + n());
    }

    /// Spectral norm of Ā.
    double operator_norm() const {
        Eigen::JacobiSVD<Mat> svd(matrix_);
        return svd.singularValues()(0);
    }

private:
    void check_shape(const SpaceTimeMatrix& x) const {
        require(x.rows() == N() && x.cols() == 1 + n(), ErrorCode::DimensionMismatch,
                "space-time matrix must be N x (1+n)");
    }

    CoefficientTensor base_;
    Mat matrix_;
};

inline AugmentedOperator augment(const CoefficientTensor& a) { return AugmentedOperator(a); }

/// Π = R(Ā*) with an orthonormal basis, the complementary nullspace basis and
/// the coercivity constant c with |Ā:X̄| ≥ c|ΠX̄|.
class FibreSubspace {
public:
    FibreSubspace(int N, int n, Mat onb_columns, Mat null_columns, double coercivity)
        : N_(N), n_(n), onb_(std::move(onb_columns)), null_(std::move(null_columns)), coercivity_(coercivity) {}

    int dim() const { return static_cast<int>(onb_.cols()); }
    int nullspace_dim() const { return static_cast<int>(null_.cols()); }
    double coercivity() const { return coercivity_; }

    /// Basis element k as a space-time matrix.
    SpaceTimeMatrix onb(int k) const { return unvectorize(onb_.col(k), N_, 1 + n_); }
    SpaceTimeMatrix null_basis(int k) const { return unvectorize(null_.col(k), N_, 1 + n_); }

    const Mat& onb_columns() const { return onb_; }
    const Mat& null_columns() const { return null_; }

    /// Orthogonal projector on vectorized matrices.
    Mat projector() const { return onb_ * onb_.transpose(); }

    SpaceTimeMatrix project(const SpaceTimeMatrix& x) const {
        require(x.rows() == N_ && x.cols() == 1 + n_, ErrorCode::DimensionMismatch,
                "project: space-time matrix must be N x (1+n)");
        const Vec v = vectorize(x);
        return unvectorize(onb_ * (onb_.transpose() * v), N_, 1 + n_);
    }

    /// ‖X̄ − ΠX̄‖ / ‖X̄‖ (0 for X̄ = 0).
    double relative_residual(const SpaceTimeMatrix& x) const {
        const double nx = x.norm();
        return nx > 0.0 ? (x - project(x)).norm() / nx : 0.0;
    }

private:
    int N_;
    int n_;
    Mat onb_;
    Mat null_;
    double coercivity_;
};

/// Relative singular-value rank threshold used throughout: rel · σ_max · max(K, N).
inline double rank_threshold(const Vec& singular_values, int K, int N, double rel = 1e-10) {
    const double smax = singular_values.size() > 0 ? singular_values.maxCoeff() : 0.0;
    return rel * smax * static_cast<double>(std::max(K, N));
}

/// Orthonormalizes {ηᵀĀ : η = e^β}; the nullspace is the orthogonal
/// complement. `tol` is the relative rank factor.
inline FibreSubspace fibre_subspace(const AugmentedOperator& abar, double tol = 1e-10) {
    require(tol > 0.0, ErrorCode::InvalidArgument, "fibre_subspace: tol must be positive");
    const int N = abar.N();
    const int K = abar.matrix_dim();
    // Columns are vectorize(e^βᵀĀ).
    const Mat range_gen = abar.as_matrix().transpose();
    Eigen::JacobiSVD<Mat> svd(range_gen, Eigen::ComputeFullU);
    const Vec& s = svd.singularValues();
    const double thr = rank_threshold(s, K, N, tol);
    int rank = 0;
    for (Eigen::Index k = 0; k < s.size(); ++k)
        if (s(k) > thr) ++rank;
    Mat onb = svd.matrixU().leftCols(rank);
    Mat null = svd.matrixU().rightCols(K - rank);
    double coercivity = 0.0;
    if (rank > 0) {
        Eigen::JacobiSVD<Mat> restricted(abar.as_matrix() * onb);
        coercivity = restricted.singularValues().minCoeff();
    }
    return FibreSubspace(N, abar.n(), std::move(onb), std::move(null), coercivity);
}

inline SpaceTimeMatrix project(const FibreSubspace& pi, const SpaceTimeMatrix& x) { return pi.project(x); }

}  // namespace fibretrans
