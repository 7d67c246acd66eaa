#pragma once

#include "fibretrans/hyperbolicity.hpp"
#include "fibretrans/matrix_frame.hpp"

#include <vector>

namespace fibretrans {

/// Frame adapted to Π: rows α < d carry E^α = ξ^α and right factors
/// E^{(α)0} = a^α/|a^α| completed orthonormally inside (a^α)^⊥; the rows
/// α ≥ d use an orthonormal completion of span{ξ} with right factors e^i.
inline MatrixFrame build_adapted_frame(const std::vector<RankOneDirection>& directions, int N, int n,
                                       double tol = kAcceptTolerance) {
    require(N >= 1 && n >= 1, ErrorCode::InvalidArgument, "build_adapted_frame: N and n must be positive");
    const int d = static_cast<int>(directions.size());
    require(d <= N, ErrorCode::DependentDirections, "more directions than the state dimension");
    Mat xis(N, d);
    for (int p = 0; p < d; ++p) {
        require(directions[p].xi.size() == N && directions[p].a.size() == 1 + n, ErrorCode::DimensionMismatch,
                "build_adapted_frame: direction has wrong shape");
        require(directions[p].a.norm() > 0.0, ErrorCode::ZeroVector, "build_adapted_frame: zero a vector");
        xis.col(p) = directions[p].xi / directions[p].xi.norm();
    }
    if (d > 0) {
        Eigen::JacobiSVD<Mat> svd(xis);
        const Vec& s = svd.singularValues();
        require(s(s.size() - 1) > tol * std::max(1.0, s(0)), ErrorCode::DependentDirections,
                "xi vectors are linearly dependent");
    }

    const Mat completion = orthonormal_completion(orthonormal_range(xis, 1e-12));
    std::vector<Vec> left;
    std::vector<std::vector<Vec>> right;
    for (int p = 0; p < d; ++p) {
        left.push_back(xis.col(p));
        const Vec a0 = directions[p].a / directions[p].a.norm();
        const Mat perp = orthonormal_completion(a0);
        std::vector<Vec> row{a0};
        for (int i = 0; i < n; ++i) row.push_back(perp.col(i));
        right.push_back(std::move(row));
    }
    for (Eigen::Index c = 0; c < completion.cols(); ++c) {
        left.push_back(completion.col(c));
        std::vector<Vec> row;
        for (int i = 0; i <= n; ++i) row.push_back(Vec::Unit(1 + n, i));
        right.push_back(std::move(row));
    }
    return MatrixFrame(N, n, d, std::move(left), std::move(right));
}

/// C_{αiβj} stored as a K×K matrix over flat indices, with
/// X̄ = Σ C_{αiβj}⟨F^{βj}, X̄⟩E^{αi}.
class ExpansionTensor {
public:
    ExpansionTensor(int N, int n, Mat c) : N_(N), n_(n), c_(std::move(c)) {}

    int N() const { return N_; }
    int n() const { return n_; }
    const Mat& matrix() const { return c_; }
    double operator()(int flat_ai, int flat_bj) const { return c_(flat_ai, flat_bj); }

private:
    int N_;
    int n_;
    Mat c_;
};

namespace detail {

inline void check_frame_pair(const MatrixFrame& E, const MatrixFrame& F) {
    require(E.N() == F.N() && E.n() == F.n(), ErrorCode::DimensionMismatch,
            "expansion tensor needs frames of the same matrix space");
}

inline void check_nonsingular(const Mat& m, const char* what) {
    Eigen::JacobiSVD<Mat> svd(m);
    const Vec& s = svd.singularValues();
    require(s(s.size() - 1) > 1e-14 * s(0), ErrorCode::SingularGram, what);
}

}  // namespace detail

/// C = G⁻¹ with the paired Gram matrix G_{βj,γk} = ⟨F^{βj}, E^{γk}⟩.
inline ExpansionTensor expansion_tensor(const MatrixFrame& E, const MatrixFrame& F) {
    detail::check_frame_pair(E, F);
    const Mat G = F.stacked().transpose() * E.stacked();
    detail::check_nonsingular(G, "paired Gram matrix is numerically singular");
    Eigen::FullPivLU<Mat> lu(G);
    return ExpansionTensor(E.N(), E.n(), lu.inverse());
}

/// Independent route: C = E⁻¹F⁻ᵀ from column-wise QR solves against the
/// stacked frame matrices.
inline ExpansionTensor expansion_tensor_by_solves(const MatrixFrame& E, const MatrixFrame& F) {
    detail::check_frame_pair(E, F);
    detail::check_nonsingular(E.stacked(), "frame E is numerically dependent");
    detail::check_nonsingular(F.stacked(), "frame F is numerically dependent");
    const int K = E.dim();
    Eigen::ColPivHouseholderQR<Mat> qe(E.stacked());
    Eigen::ColPivHouseholderQR<Mat> qf(F.stacked().transpose());
    Mat finv_t(K, K);
    for (int c = 0; c < K; ++c) finv_t.col(c) = qf.solve(Vec::Unit(K, c));
    Mat out(K, K);
    for (int c = 0; c < K; ++c) out.col(c) = qe.solve(finv_t.col(c));
    return ExpansionTensor(E.N(), E.n(), out);
}

/// κ_{αi} = Σ_{βj} C_{αiβj}⟨F^{βj}, X̄⟩ as an N×(1+n) array.
inline Mat expand_coefficients(const ExpansionTensor& C, const MatrixFrame& F, const SpaceTimeMatrix& x) {
    require(C.N() == F.N() && C.n() == F.n() && x.rows() == F.N() && x.cols() == 1 + F.n(),
            ErrorCode::DimensionMismatch, "expand_coefficients: inconsistent dimensions");
    const Vec kappa = C.matrix() * (F.stacked().transpose() * vectorize(x));
    Mat out(F.N(), 1 + F.n());
    for (int a = 0; a < F.N(); ++a)
        for (int i = 0; i <= F.n(); ++i) out(a, i) = kappa(F.index(a, i));
    return out;
}

/// Σ κ_{αi}E^{αi}
inline SpaceTimeMatrix reconstruct(const MatrixFrame& E, const Mat& kappa) {
    require(kappa.rows() == E.N() && kappa.cols() == 1 + E.n(), ErrorCode::DimensionMismatch,
            "reconstruct: coefficient array must be N x (1+n)");
    SpaceTimeMatrix x = SpaceTimeMatrix::Zero(E.N(), 1 + E.n());
    for (int a = 0; a < E.N(); ++a)
        for (int i = 0; i <= E.n(); ++i) x += kappa(a, i) * E.element(a, i);
    return x;
}

}  // namespace fibretrans
