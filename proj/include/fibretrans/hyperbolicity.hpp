#pragma once

// Decides whether Π is spanned by rank-one matrices ξ⊗a, using the
// characterization ξ⊗a ∈ Π∖{0} ⇔ a₀ ≠ 0 and ξᵀA_i = (a_i/a₀)ξᵀ for all i,
// i.e. a common family of real left eigenvectors of the slices A_i.

#include "fibretrans/matrix_frame.hpp"
#include "fibretrans/operator_core.hpp"

#include <algorithm>
#include <limits>
#include <string>
#include <vector>

namespace fibretrans {

inline constexpr double kAcceptTolerance = 1e-9;
inline constexpr double kRejectTolerance = 1e-3;

/// ξ⊗a with a₀ = 1, |ξ| = 1 and the first non-negligible ξ component positive.
struct RankOneDirection {
    Vec xi;
    Vec a;

    SpaceTimeMatrix matrix() const { return xi * a.transpose(); }

    /// a_i / a₀ for spatial i in 0..n-1.
    double eigenvalue(int i) const { return a(1 + i); }

    static RankOneDirection normalized(const Vec& xi, const Vec& a) {
        require(xi.norm() > 0.0, ErrorCode::ZeroVector, "direction needs a nonzero xi");
        require(a.size() >= 1 && a(0) != 0.0, ErrorCode::InvalidArgument, "direction needs a_0 != 0");
        RankOneDirection d{xi / xi.norm(), a / a(0)};
        for (Eigen::Index k = 0; k < d.xi.size(); ++k) {
            if (std::abs(d.xi(k)) > 1e-12) {
                if (d.xi(k) < 0.0) d.xi = -d.xi;
                break;
            }
        }
        return d;
    }
};

struct MembershipResult {
    bool accepted = false;
    /// max_i ‖ξᵀA_i − (a_i/a₀)ξᵀ‖, +inf when a₀ = 0
    double residual = 0.0;
};

/// Certificate for ξ⊗a ∈ Π. Accepts iff a₀ ≠ 0 and the residual is at most
/// tol · max_i‖A_i‖ · |ξ|. No normalization is applied to the inputs.
inline MembershipResult membership_test(const CoefficientTensor& A, const Vec& xi, const Vec& a, double tol) {
    require(xi.size() == A.N() && a.size() == 1 + A.n(), ErrorCode::DimensionMismatch,
            "membership_test: xi must have length N and a length 1+n");
    require(xi.norm() > 0.0, ErrorCode::ZeroVector, "membership_test: xi must be nonzero");
    require(tol > 0.0, ErrorCode::InvalidArgument, "membership_test: tol must be positive");
    if (a(0) == 0.0) return {false, std::numeric_limits<double>::infinity()};
    double residual = 0.0;
    for (int i = 0; i < A.n(); ++i) {
        const Vec r = A.slice(i).transpose() * xi - (a(1 + i) / a(0)) * xi;
        residual = std::max(residual, r.norm());
    }
    return {residual <= tol * A.max_slice_norm() * xi.norm(), residual};
}

/// (i, j) ↦ ‖A_iA_j − A_jA_i‖_F
inline Mat commutator_norms(const CoefficientTensor& A) {
    const int n = A.n();
    Mat out = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const double c = (A.slice(i) * A.slice(j) - A.slice(j) * A.slice(i)).norm();
            out(i, j) = c;
            out(j, i) = c;
        }
    return out;
}

struct EigendirectionSearch {
    std::vector<RankOneDirection> directions;
    /// relative eigen-residual of each accepted direction
    std::vector<double> residuals;
    /// candidates whose relative residual fell between accept and reject thresholds
    std::vector<RankOneDirection> near_misses;
    std::vector<double> near_miss_residuals;
    bool complex_spectrum = false;
    bool degenerate_spectrum = false;
    /// some intermediate quantity fell between the accept and reject thresholds
    bool ambiguous = false;
    std::vector<std::string> notes;
};

namespace detail {

inline double coefficient_scale(const CoefficientTensor& A) {
    const double s = A.max_slice_norm();
    return s > 0.0 ? s : 1.0;
}

inline Vec rayleigh_eigenvalues(const CoefficientTensor& A, const Vec& xi) {
    Vec lam(A.n());
    const double nn = xi.squaredNorm();
    for (int i = 0; i < A.n(); ++i) lam(i) = xi.dot(A.slice(i).transpose() * xi) / nn;
    return lam;
}

/// max_i ‖A_iᵀξ − λ_iξ‖ for unit ξ.
inline double eigen_residual(const CoefficientTensor& A, const Vec& xi, const Vec& lam) {
    double r = 0.0;
    for (int i = 0; i < A.n(); ++i) r = std::max(r, (A.slice(i).transpose() * xi - lam(i) * xi).norm());
    return r;
}

/// Least-squares common eigenvector refinement: smallest right singular
/// vector of the stacked [A_iᵀ − λ_i I].
inline Vec polish_common_eigenvector(const CoefficientTensor& A, Vec xi) {
    const int N = A.N();
    xi.normalize();
    double best = eigen_residual(A, xi, rayleigh_eigenvalues(A, xi));
    for (int iter = 0; iter < 3; ++iter) {
        const Vec lam = rayleigh_eigenvalues(A, xi);
        Mat S(N * A.n(), N);
        for (int i = 0; i < A.n(); ++i)
            S.middleRows(N * i, N) = A.slice(i).transpose() - lam(i) * Mat::Identity(N, N);
        Eigen::JacobiSVD<Mat> svd(S, Eigen::ComputeFullV);
        Vec v = svd.matrixV().col(N - 1);
        if (v.dot(xi) < 0.0) v = -v;
        const double r = eigen_residual(A, v, rayleigh_eigenvalues(A, v));
        if (!(r < best)) break;
        best = r;
        xi = v;
    }
    return xi;
}

struct Candidate {
    Vec xi;
    Vec lam;
};

/// Exhaustive search: recursive intersection of eigenspaces of A_1ᵀ, A_2ᵀ, …
inline void intersect_eigenspaces(const CoefficientTensor& A, int i, const Mat& V, std::vector<double> lams,
                                  double tol, EigendirectionSearch& search, std::vector<Candidate>& out) {
    const int N = A.N();
    const double scale = coefficient_scale(A);
    if (i == A.n()) {
        for (Eigen::Index c = 0; c < V.cols(); ++c) {
            Vec lam(A.n());
            for (int k = 0; k < A.n(); ++k) lam(k) = lams[k];
            out.push_back({V.col(c), lam});
        }
        return;
    }
    const Mat At = A.slice(i).transpose();
    const Mat B = V.transpose() * At * V;
    Eigen::EigenSolver<Mat> es(B, false);
    std::vector<double> reals;
    for (Eigen::Index k = 0; k < B.rows(); ++k) {
        const auto ev = es.eigenvalues()(k);
        const double im = std::abs(ev.imag());
        if (im > kRejectTolerance * scale) {
            search.complex_spectrum = true;
            continue;
        }
        if (im > tol * scale) search.ambiguous = true;
        reals.push_back(ev.real());
    }
    std::sort(reals.begin(), reals.end());
    std::vector<double> clusters;
    std::vector<int> counts;
    for (double r : reals) {
        if (!clusters.empty() && r - clusters.back() / counts.back() <= 1e-6 * scale) {
            clusters.back() += r;
            ++counts.back();
        } else {
            clusters.push_back(r);
            counts.push_back(1);
        }
    }
    const double null_thr = 1e-6 * scale;
    for (std::size_t c = 0; c < clusters.size(); ++c) {
        const double mu = clusters[c] / counts[c];
        const Mat R = (At - mu * Mat::Identity(N, N)) * V;
        Eigen::JacobiSVD<Mat> svd(R, Eigen::ComputeFullV);
        const Vec& s = svd.singularValues();
        std::vector<Eigen::Index> null_cols;
        for (Eigen::Index k = 0; k < V.cols(); ++k) {
            const double sk = k < s.size() ? s(k) : 0.0;
            if (sk <= null_thr)
                null_cols.push_back(k);
            else if (sk <= kRejectTolerance * scale)
                search.ambiguous = true;
        }
        if (null_cols.empty()) continue;
        Mat W(V.cols(), static_cast<Eigen::Index>(null_cols.size()));
        for (std::size_t k = 0; k < null_cols.size(); ++k) W.col(k) = svd.matrixV().col(null_cols[k]);
        Mat Vn = V * W;
        Eigen::HouseholderQR<Mat> qr(Vn);
        Vn = qr.householderQ() * Mat::Identity(N, Vn.cols());
        auto next = lams;
        next.push_back(mu);
        intersect_eigenspaces(A, i + 1, Vn, next, tol, search, out);
    }
}

}  // namespace detail

/// Common real left eigenvectors of A_1..A_n. A seeded random combination
/// M = Σ t_iA_iᵀ is eigendecomposed; repeated eigenvalues of M (gap below
/// 1e-8‖M‖) switch to the exhaustive eigenspace-intersection fallback.
/// Returned directions pass membership_test with `tol` and are sorted
/// lexicographically by their eigenvalue vectors.
inline EigendirectionSearch common_left_eigendirections(const CoefficientTensor& A, std::uint64_t seed,
                                                        double tol = kAcceptTolerance) {
    require(tol > 0.0, ErrorCode::InvalidArgument, "common_left_eigendirections: tol must be positive");
    const int N = A.N();
    const double scale = detail::coefficient_scale(A);
    EigendirectionSearch search;

    Rng rng(seed);
    Mat M = Mat::Zero(N, N);
    for (int i = 0; i < A.n(); ++i) M += rng.uniform(0.5, 1.5) * A.slice(i).transpose();
    const double mnorm = M.norm();

    std::vector<detail::Candidate> candidates;
    bool degenerate = mnorm <= 1e-14 * scale;
    Eigen::EigenSolver<Mat> es;
    if (!degenerate) {
        es.compute(M, true);
        const auto& ev = es.eigenvalues();
        for (Eigen::Index k = 0; k < ev.size() && !degenerate; ++k)
            for (Eigen::Index j = k + 1; j < ev.size(); ++j)
                if (std::abs(ev(k) - ev(j)) < 1e-8 * mnorm) {
                    degenerate = true;
                    break;
                }
    }
    if (degenerate) {
        search.degenerate_spectrum = true;
        search.notes.push_back("repeated eigenvalues in the random probe; used eigenspace intersection");
        detail::intersect_eigenspaces(A, 0, Mat::Identity(N, N), {}, tol, search, candidates);
    } else {
        const auto& ev = es.eigenvalues();
        for (Eigen::Index k = 0; k < ev.size(); ++k) {
            const double im = ev(k).imag();
            if (std::abs(im) > kRejectTolerance * mnorm) {
                search.complex_spectrum = true;
                continue;
            }
            if (im < 0.0) continue;  // one representative of a near-real conjugate pair
            if (std::abs(im) > tol * mnorm) search.ambiguous = true;
            Vec xi = es.eigenvectors().col(k).real();
            if (xi.norm() == 0.0) xi = es.eigenvectors().col(k).imag();
            xi = detail::polish_common_eigenvector(A, xi);
            candidates.push_back({xi, detail::rayleigh_eigenvalues(A, xi)});
        }
    }
    if (search.complex_spectrum)
        search.notes.push_back("non-real eigenvalues found; those directions are excluded");

    // Classify, keeping only candidates that enlarge span{ξ}.
    Mat accepted_xi(N, 0);
    std::vector<std::pair<RankOneDirection, double>> accepted;
    for (const auto& c : candidates) {
        Vec a(1 + A.n());
        a(0) = 1.0;
        a.tail(A.n()) = c.lam;
        const RankOneDirection dir = RankOneDirection::normalized(c.xi, a);
        const double rel = detail::eigen_residual(A, dir.xi, dir.a.tail(A.n())) / scale;
        if (rel <= tol) {
            Mat trial(N, accepted_xi.cols() + 1);
            trial << accepted_xi, dir.xi;
            Eigen::JacobiSVD<Mat> svd(trial);
            if (svd.singularValues().minCoeff() <= 1e-8) continue;
            accepted_xi = trial;
            accepted.emplace_back(dir, rel);
        } else if (rel <= kRejectTolerance) {
            search.near_misses.push_back(dir);
            search.near_miss_residuals.push_back(rel);
            search.ambiguous = true;
        }
    }
    std::stable_sort(accepted.begin(), accepted.end(), [](const auto& l, const auto& r) {
        const Vec& a = l.first.a;
        const Vec& b = r.first.a;
        for (Eigen::Index k = 1; k < a.size(); ++k)
            if (a(k) != b(k)) return a(k) < b(k);
        return false;
    });
    for (auto& [dir, rel] : accepted) {
        search.directions.push_back(dir);
        search.residuals.push_back(rel);
    }
    return search;
}

enum class Verdict { Hyperbolic, NotHyperbolic, Inconclusive };

inline const char* to_string(Verdict v) {
    switch (v) {
        case Verdict::Hyperbolic: return "Hyperbolic";
        case Verdict::NotHyperbolic: return "NotHyperbolic";
        case Verdict::Inconclusive: return "Inconclusive";
    }
    return "Unknown";
}

struct HyperbolicityReport {
    Verdict verdict = Verdict::Inconclusive;
    std::vector<RankOneDirection> directions;
    int span_dim = 0;
    int pi_dim = 0;
    Mat commutator_norms;
    /// relative eigen-residual per direction
    std::vector<double> residuals;
    /// ‖ξ⊗a − Π(ξ⊗a)‖ / ‖ξ⊗a‖ per direction
    std::vector<double> projection_residuals;
    /// smallest singular value of the stacked ξ's (independence of the ξ's)
    double xi_min_singular_value = 0.0;
    bool complex_spectrum = false;
    bool fallback_used = false;
    double accept_tol = kAcceptTolerance;
    double reject_tol = kRejectTolerance;
    std::string decoupling_note;
    std::vector<std::string> notes;
};

inline bool slices_symmetric(const CoefficientTensor& A, double tol) {
    for (const auto& s : A.slices())
        if ((s - s.transpose()).norm() > tol * std::max(1.0, s.norm())) return false;
    return true;
}

inline bool slices_commute(const CoefficientTensor& A, double tol) {
    const double scale = detail::coefficient_scale(A);
    return commutator_norms(A).maxCoeff() <= tol * std::max(1.0, scale * scale);
}

inline HyperbolicityReport check_rank_one_spanning(const CoefficientTensor& A, std::uint64_t seed,
                                                   double tol = kAcceptTolerance) {
    require(tol > 0.0, ErrorCode::InvalidArgument, "check_rank_one_spanning: tol must be positive");
    const int N = A.N();
    const int n = A.n();
    const FibreSubspace pi = fibre_subspace(augment(A));
    auto search = common_left_eigendirections(A, seed, tol);

    HyperbolicityReport rep;
    rep.accept_tol = tol;
    rep.directions = search.directions;
    rep.residuals = search.residuals;
    rep.pi_dim = pi.dim();
    rep.commutator_norms = commutator_norms(A);
    rep.complex_spectrum = search.complex_spectrum;
    rep.fallback_used = search.degenerate_spectrum;
    rep.notes = search.notes;

    const double scale = detail::coefficient_scale(A);
    bool projections_ok = true;
    Mat stacked(N * (1 + n), static_cast<Eigen::Index>(rep.directions.size()));
    Mat xis(N, static_cast<Eigen::Index>(rep.directions.size()));
    for (std::size_t k = 0; k < rep.directions.size(); ++k) {
        const auto m = rep.directions[k].matrix();
        const double pr = pi.relative_residual(m);
        rep.projection_residuals.push_back(pr);
        if (pr > tol * std::max(1.0, scale)) projections_ok = false;
        stacked.col(static_cast<Eigen::Index>(k)) = vectorize(m);
        xis.col(static_cast<Eigen::Index>(k)) = rep.directions[k].xi;
    }
    if (!rep.directions.empty()) {
        Eigen::JacobiSVD<Mat> svd(stacked);
        const Vec& s = svd.singularValues();
        const double thr = rank_threshold(s, N * (1 + n), N);
        for (Eigen::Index k = 0; k < s.size(); ++k)
            if (s(k) > thr) ++rep.span_dim;
        Eigen::JacobiSVD<Mat> xsvd(xis);
        rep.xi_min_singular_value = xsvd.singularValues().minCoeff();
    }

    if (rep.span_dim == rep.pi_dim && projections_ok && rep.xi_min_singular_value > tol)
        rep.verdict = Verdict::Hyperbolic;
    else if (search.ambiguous)
        rep.verdict = Verdict::Inconclusive;
    else
        rep.verdict = Verdict::NotHyperbolic;

    if (rep.verdict == Verdict::Hyperbolic)
        rep.notes.push_back("rank-one spanning certified; the " + std::to_string(rep.span_dim) +
                            " xi vectors are linearly independent");
    if (rep.pi_dim == N)
        rep.notes.push_back("dim Pi = N: the identity time block makes the augmented operator surjective");
    if (rep.verdict == Verdict::NotHyperbolic)
        rep.notes.push_back("only " + std::to_string(rep.span_dim) + " independent real common left eigendirections for dim Pi = " +
                            std::to_string(rep.pi_dim));
    if (rep.verdict == Verdict::Inconclusive)
        rep.notes.push_back("residuals between accept and reject thresholds; no verdict drawn");

    bool diagonal = true;
    for (const auto& s : A.slices())
        if ((s - Mat(s.diagonal().asDiagonal())).norm() > 0.0) diagonal = false;
    if (diagonal)
        rep.decoupling_note = "system is already decoupled (every A_i is diagonal)";
    else if (slices_symmetric(A, tol) && slices_commute(A, tol))
        rep.decoupling_note = "system decouples into N independent equations in an orthonormal common eigenbasis";
    else if (rep.verdict == Verdict::Hyperbolic)
        rep.decoupling_note = "system does not decouple into independent equations: the common left eigenvectors are not orthogonal";
    else
        rep.decoupling_note = "system does not decouple: no full set of real common left eigenvectors";
    return rep;
}

/// Orthonormal rank-one basis built from a common orthonormal eigenbasis of
/// symmetric commuting slices.
struct OrthonormalRankOneBasis {
    MatrixFrame frame;
    /// columns η^α
    Mat eigenbasis;
    /// (α, i) ↦ c^{(i)α}
    Mat eigenvalues;
};

namespace detail {

inline void simultaneous_symmetric_split(const CoefficientTensor& A, int i, const Mat& V, double cluster_tol,
                                         std::vector<Mat>& leaves) {
    if (i == A.n() || V.cols() <= 1) {
        leaves.push_back(V);
        return;
    }
    const Mat B = V.transpose() * A.slice(i) * V;
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (B + B.transpose()));
    const Vec& ev = es.eigenvalues();
    if (ev(ev.size() - 1) - ev(0) <= cluster_tol) {
        simultaneous_symmetric_split(A, i + 1, V, cluster_tol, leaves);
        return;
    }
    Eigen::Index start = 0;
    for (Eigen::Index k = 1; k <= ev.size(); ++k) {
        if (k == ev.size() || ev(k) - ev(k - 1) > cluster_tol) {
            const Mat sub = V * es.eigenvectors().middleCols(start, k - start);
            simultaneous_symmetric_split(A, i + 1, sub, cluster_tol, leaves);
            start = k;
        }
    }
}

}  // namespace detail

/// For symmetric, pairwise commuting A_i: orthonormal rank-one basis
/// E^{αi} = η^α ⊗ E^{(α)i} with {E^{α0}} spanning Π and {E^{αi}, i ≥ 1}
/// spanning N(Ā). E^{(α)0} = (1, c^α)/√(1+|c^α|²); the rows E^{(α)i} are
/// Gram-Schmidt orthonormalizations of (−c^{(i)α}, e^i).
inline OrthonormalRankOneBasis lemma12_basis(const CoefficientTensor& A, double tol = kAcceptTolerance) {
    require(tol > 0.0, ErrorCode::InvalidArgument, "lemma12_basis: tol must be positive");
    require(slices_symmetric(A, tol), ErrorCode::NotSymmetric, "lemma12_basis requires symmetric A_i");
    require(slices_commute(A, tol), ErrorCode::NotCommuting, "lemma12_basis requires commuting A_i");
    const int N = A.N();
    const int n = A.n();
    const double scale = detail::coefficient_scale(A);

    std::vector<Mat> leaves;
    detail::simultaneous_symmetric_split(A, 0, Mat::Identity(N, N), 1e-8 * scale, leaves);
    Mat Q(N, N);
    Eigen::Index col = 0;
    for (const auto& leaf : leaves) {
        Q.middleCols(col, leaf.cols()) = leaf;
        col += leaf.cols();
    }
    for (Eigen::Index c = 0; c < N; ++c) {
        for (Eigen::Index k = 0; k < N; ++k)
            if (std::abs(Q(k, c)) > 1e-12) {
                if (Q(k, c) < 0.0) Q.col(c) = -Q.col(c);
                break;
            }
    }

    Mat eig(N, n);
    for (int i = 0; i < n; ++i) {
        const Mat D = Q.transpose() * A.slice(i) * Q;
        const Mat off = D - Mat(D.diagonal().asDiagonal());
        require(off.norm() <= tol * std::max(1.0, A.slice(i).norm()), ErrorCode::EigenbasisVerificationFailed,
                "common eigenbasis does not diagonalize A_" + std::to_string(i + 1));
        eig.col(i) = D.diagonal();
    }

    std::vector<Vec> left;
    std::vector<std::vector<Vec>> right;
    for (int alpha = 0; alpha < N; ++alpha) {
        left.push_back(Q.col(alpha));
        std::vector<Vec> row;
        Vec n0(1 + n);
        n0(0) = 1.0;
        n0.tail(n) = eig.row(alpha).transpose();
        row.push_back(n0 / std::sqrt(1.0 + eig.row(alpha).squaredNorm()));
        for (int i = 1; i <= n; ++i) {
            Vec v = Vec::Zero(1 + n);
            v(0) = -eig(alpha, i - 1);
            v(i) = 1.0;
            for (int pass = 0; pass < 2; ++pass)
                for (int k = 1; k < i; ++k) v -= row[k].dot(v) * row[k];
            row.push_back(v / v.norm());
        }
        right.push_back(std::move(row));
    }
    return {MatrixFrame(N, n, N, std::move(left), std::move(right)), Q, eig};
}

}  // namespace fibretrans
