#pragma once

// Empirical Young measures of frame difference quotients over an
// h-sequence, and the D-solution statistic
//   T(ν) = max_Φ ∫_E |Φ(D^{1,h_ν}u)| |Ā:D^{1,h_ν}u − f| dx̄.

#include "fibretrans/fields.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace fibretrans {

enum class TestFunctionKind { Plateau, Radial };

/// Compactly supported Φ on space-time matrices (acting on vectorize(X̄)).
/// Plateau: 1 on |X| ≤ R, smooth decay to 0 at |X| = 2R.
/// Radial:  β(|X − c|/r)/β(0) with β(s) = exp(−1/(1−s²)).
struct MatrixTestFunction {
    TestFunctionKind kind = TestFunctionKind::Plateau;
    Vec center;
    double radius = 1.0;

    static MatrixTestFunction plateau(int dim, double R) { return {TestFunctionKind::Plateau, Vec::Zero(dim), R}; }
    static MatrixTestFunction radial(Vec center, double r) {
        return {TestFunctionKind::Radial, std::move(center), r};
    }

    /// Radius of a centred ball containing the support.
    double support_radius() const {
        return kind == TestFunctionKind::Plateau ? 2.0 * radius : center.norm() + radius;
    }

    double operator()(const Eigen::Ref<const Vec>& x) const {
        if (kind == TestFunctionKind::Plateau) {
            const double s = x.norm() / radius - 1.0;
            if (s <= 0.0) return 1.0;
            if (s >= 1.0) return 0.0;
            const double a = std::exp(-1.0 / (1.0 - s));
            const double b = std::exp(-1.0 / s);
            return a / (a + b);
        }
        const double s = (x - center).norm() / radius;
        return s < 1.0 ? std::exp(1.0 - 1.0 / (1.0 - s * s)) : 0.0;
    }
};

/// Empirical quantile (nearest-rank) of |D| over valid points.
inline double quotient_norm_quantile(const MatrixField& d, double q) {
    std::vector<double> norms;
    for (std::size_t p = 0; p < d.grid.points(); ++p)
        if (d.valid[p]) norms.push_back(d.vec(p).norm());
    if (norms.empty()) return 0.0;
    std::sort(norms.begin(), norms.end());
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(norms.size())));
    return norms[std::min(norms.size() - 1, rank == 0 ? 0 : rank - 1)];
}

/// One plateau bump of radius R = 4·(99th percentile of |D^{1,h₀}u|) and
/// `radial` seeded bumps of radius R/2 centred uniformly in the R-ball.
inline std::vector<MatrixTestFunction> default_test_functions(const MatrixField& d0, std::uint64_t seed,
                                                              int radial = 8) {
    double R = 4.0 * quotient_norm_quantile(d0, 0.99);
    if (!(R > 0.0)) R = 1.0;
    const int K = d0.K();
    std::vector<MatrixTestFunction> out{MatrixTestFunction::plateau(K, R)};
    Rng rng(seed ^ 0x5851f42d4c957f2dULL);
    for (int k = 0; k < radial; ++k) {
        Vec dir = rng.normal_vector(K);
        while (dir.norm() == 0.0) dir = rng.normal_vector(K);
        const double r = R * std::pow(rng.uniform(), 1.0 / K);
        out.push_back(MatrixTestFunction::radial(dir / dir.norm() * r, 0.5 * R));
    }
    return out;
}

/// Per point, the atoms D^{1,h_ν}u(x̄) for ν = 0..levels−1; atoms with norm
/// above R_inf sit in the infinity bucket instead.
struct EmpiricalYoungMeasure {
    Grid grid;
    int N = 1;
    int n = 1;
    std::vector<double> h;
    double R_inf = std::numeric_limits<double>::infinity();
    /// grid indices of the points carried
    std::vector<std::size_t> points;
    /// [point][level][matrix entry]
    std::vector<double> atoms;
    /// [point][level]: 1 for a finite atom, 0 for the infinity bucket
    std::vector<std::uint8_t> finite;

    int matrix_dim() const { return N * (1 + n); }
    int levels() const { return static_cast<int>(h.size()); }
    std::size_t size() const { return points.size(); }

    std::size_t slot(std::size_t i, int level) const {
        return i * static_cast<std::size_t>(levels()) + static_cast<std::size_t>(level);
    }
    Eigen::Map<const Vec> atom(std::size_t i, int level) const {
        return Eigen::Map<const Vec>(&atoms[slot(i, level) * static_cast<std::size_t>(matrix_dim())], matrix_dim());
    }
    Eigen::Map<Vec> atom(std::size_t i, int level) {
        return Eigen::Map<Vec>(&atoms[slot(i, level) * static_cast<std::size_t>(matrix_dim())], matrix_dim());
    }
    bool is_finite(std::size_t i, int level) const { return finite[slot(i, level)] != 0; }

    int finite_count(std::size_t i) const {
        int c = 0;
        for (int l = 0; l < levels(); ++l) c += is_finite(i, l) ? 1 : 0;
        return c;
    }
    double infinity_mass(std::size_t i) const {
        return static_cast<double>(levels() - finite_count(i)) / static_cast<double>(levels());
    }
};

namespace detail {

inline void check_h_sequence(const std::vector<double>& h_seq, std::size_t min_len) {
    require(h_seq.size() >= min_len, ErrorCode::InvalidArgument,
            "h sequence needs at least " + std::to_string(min_len) + " entries");
    for (std::size_t k = 0; k < h_seq.size(); ++k) {
        require(h_seq[k] > 0.0 && std::isfinite(h_seq[k]), ErrorCode::InvalidArgument, "h values must be positive");
        if (k > 0)
            require(h_seq[k] < h_seq[k - 1], ErrorCode::InvalidArgument, "h sequence must be strictly decreasing");
    }
}

}  // namespace detail

/// h_ν = h₀·2^{−ν}, ν = 0..levels−1.
inline std::vector<double> dyadic_steps(double h0, int levels) {
    require(h0 > 0.0 && levels >= 1, ErrorCode::InvalidArgument, "dyadic_steps needs h0 > 0 and levels >= 1");
    std::vector<double> h;
    for (int k = 0; k < levels; ++k) h.push_back(std::ldexp(h0, -k));
    return h;
}

inline std::vector<MatrixField> quotient_sequence(const GridField& u, const MatrixFrame& E, const ExpansionTensor& C,
                                                  const std::vector<double>& h_seq,
                                                  ShiftMode mode = ShiftMode::Interpolated) {
    std::vector<MatrixField> out;
    for (double h : h_seq) out.push_back(frame_dq(u, E, C, h, mode));
    return out;
}

/// Points valid at every level.
inline std::vector<std::uint8_t> common_valid(const std::vector<MatrixField>& seq) {
    std::vector<std::uint8_t> mask(seq.front().grid.points(), 1);
    for (const auto& m : seq)
        for (std::size_t p = 0; p < mask.size(); ++p) mask[p] = mask[p] && m.valid[p];
    return mask;
}

inline EmpiricalYoungMeasure empirical_young_measure(const std::vector<MatrixField>& seq,
                                                     const std::vector<double>& h_seq, double R_inf) {
    require(!seq.empty() && seq.size() == h_seq.size(), ErrorCode::DimensionMismatch,
            "one quotient field per step is required");
    detail::check_h_sequence(h_seq, 3);
    require(R_inf > 0.0, ErrorCode::InvalidArgument, "R_inf must be positive");
    EmpiricalYoungMeasure ym;
    ym.grid = seq.front().grid;
    ym.N = seq.front().N;
    ym.n = seq.front().n;
    ym.h = h_seq;
    ym.R_inf = R_inf;
    const auto mask = common_valid(seq);
    for (std::size_t p = 0; p < mask.size(); ++p)
        if (mask[p]) ym.points.push_back(p);
    const int K = ym.matrix_dim();
    const int L = ym.levels();
    ym.atoms.assign(ym.points.size() * static_cast<std::size_t>(L * K), 0.0);
    ym.finite.assign(ym.points.size() * static_cast<std::size_t>(L), 0);
    parallel_for(ym.points.size(), [&](std::size_t i) {
        for (int l = 0; l < L; ++l) {
            const auto x = seq[static_cast<std::size_t>(l)].vec(ym.points[i]);
            if (x.norm() > R_inf) continue;
            ym.atom(i, l) = x;
            ym.finite[ym.slot(i, l)] = 1;
        }
    });
    return ym;
}

inline EmpiricalYoungMeasure empirical_young_measure(const GridField& u, const MatrixFrame& E,
                                                     const ExpansionTensor& C, const std::vector<double>& h_seq,
                                                     double R_inf, ShiftMode mode = ShiftMode::Interpolated) {
    detail::check_h_sequence(h_seq, 3);
    return empirical_young_measure(quotient_sequence(u, E, C, h_seq, mode), h_seq, R_inf);
}

struct Barycenter {
    /// mean of the finite atoms, per carried point
    std::vector<Vec> mean;
    /// 1 where more than half of the mass sits at infinity
    std::vector<std::uint8_t> masked;
};

inline Barycenter barycenter(const EmpiricalYoungMeasure& ym) {
    Barycenter b;
    b.mean.assign(ym.size(), Vec::Zero(ym.matrix_dim()));
    b.masked.assign(ym.size(), 0);
    for (std::size_t i = 0; i < ym.size(); ++i) {
        const int c = ym.finite_count(i);
        if (ym.infinity_mass(i) > 0.5 || c == 0) {
            b.masked[i] = 1;
            continue;
        }
        for (int l = 0; l < ym.levels(); ++l)
            if (ym.is_finite(i, l)) b.mean[i] += ym.atom(i, l);
        b.mean[i] /= c;
    }
    return b;
}

/// True where the last ⌈levels/2⌉ atoms are all finite and lie within tol
/// of their mean.
inline std::vector<std::uint8_t> dirac_check(const EmpiricalYoungMeasure& ym, double tol) {
    require(ym.levels() >= 3, ErrorCode::InvalidArgument, "dirac_check needs at least three levels");
    const int tail = (ym.levels() + 1) / 2;
    std::vector<std::uint8_t> out(ym.size(), 0);
    for (std::size_t i = 0; i < ym.size(); ++i) {
        Vec mean = Vec::Zero(ym.matrix_dim());
        bool ok = true;
        for (int l = ym.levels() - tail; l < ym.levels(); ++l) {
            ok = ok && ym.is_finite(i, l);
            if (ok) mean += ym.atom(i, l);
        }
        if (!ok) continue;
        mean /= tail;
        double spread = 0.0;
        for (int l = ym.levels() - tail; l < ym.levels(); ++l) spread = std::max(spread, (ym.atom(i, l) - mean).norm());
        out[i] = spread <= tol ? 1 : 0;
    }
    return out;
}

/// Pushes every finite atom through the orthogonal projector onto Π.
inline EmpiricalYoungMeasure restrict_to_fibre(const EmpiricalYoungMeasure& ym, const FibreSubspace& pi) {
    const Mat P = pi.projector();
    require(P.rows() == ym.matrix_dim(), ErrorCode::DimensionMismatch, "fibre subspace and measure disagree");
    EmpiricalYoungMeasure out = ym;
    for (std::size_t i = 0; i < ym.size(); ++i)
        for (int l = 0; l < ym.levels(); ++l)
            if (ym.is_finite(i, l)) out.atom(i, l) = P * ym.atom(i, l);
    return out;
}

struct DSolutionOptions {
    /// verdict threshold on the normalized statistic
    double pass_threshold = 1e-2;
    /// verdict taken at the finest level with h ≥ min_h_over_dx·Δx
    double min_h_over_dx = 4.0;
    /// quotients with norm above R_inf are treated as infinite (Φ = 0 there)
    double R_inf = std::numeric_limits<double>::infinity();
};

struct DSolutionStatistic {
    std::vector<double> h;
    /// T(ν)
    std::vector<double> T;
    /// T(ν) / (‖Ā‖·∫_E|D^{1,h_ν}u| + ∫_E|f| + ε)
    std::vector<double> normalized;
    /// index of the maximizing Φ per level
    std::vector<int> argmax_phi;
    /// least-squares slope of log T against log h (NaN if fewer than two positive T)
    double slope = std::numeric_limits<double>::quiet_NaN();
    std::size_t pass_level = 0;
    double pass_value = 0.0;
    bool pass = false;
    std::size_t region_points = 0;
};

inline double log_log_slope(const std::vector<double>& h, const std::vector<double>& T) {
    std::vector<double> xs, ys;
    for (std::size_t k = 0; k < h.size(); ++k)
        if (T[k] > 0.0 && std::isfinite(T[k])) {
            xs.push_back(std::log(h[k]));
            ys.push_back(std::log(T[k]));
        }
    if (xs.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double mx = pairwise_sum(xs) / static_cast<double>(xs.size());
    const double my = pairwise_sum(ys) / static_cast<double>(ys.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        sxy += (xs[k] - mx) * (ys[k] - my);
        sxx += (xs[k] - mx) * (xs[k] - mx);
    }
    return sxx > 0.0 ? sxy / sxx : std::numeric_limits<double>::quiet_NaN();
}

/// Statistic from precomputed quotient fields. The region is intersected with
/// the points valid at every level so all levels integrate over the same set.
inline DSolutionStatistic dsolution_statistic(const std::vector<MatrixField>& seq, const GridField& f,
                                              const CoefficientTensor& A,
                                              const std::vector<MatrixTestFunction>& phis,
                                              const std::vector<double>& h_seq,
                                              const std::vector<std::uint8_t>& region = {},
                                              const DSolutionOptions& opt = {}) {
    require(!phis.empty(), ErrorCode::InvalidArgument, "dsolution_statistic needs at least one test function");
    require(seq.size() == h_seq.size() && !seq.empty(), ErrorCode::DimensionMismatch,
            "one quotient field per step is required");
    detail::check_h_sequence(h_seq, 1);
    const Grid& g = f.grid();
    require(seq.front().grid == g && f.N() == A.N() && seq.front().N == A.N() && seq.front().n == A.n(),
            ErrorCode::DimensionMismatch, "dsolution_statistic: inconsistent dimensions");
    require(region.empty() || region.size() == g.points(), ErrorCode::DimensionMismatch, "region mask has wrong size");

    auto mask = common_valid(seq);
    std::size_t count = 0;
    for (std::size_t p = 0; p < mask.size(); ++p) {
        mask[p] = mask[p] && (region.empty() || region[p]);
        count += mask[p];
    }
    require(count > 0, ErrorCode::EmptyRegion, "statistic region is empty (time shifts h*a0 may exceed T)");

    const auto abar = augment(A);
    const double anorm = abar.operator_norm();
    const double vol = g.cell_volume();
    const std::size_t P = g.points();

    DSolutionStatistic st;
    st.h = h_seq;
    st.region_points = count;
    std::vector<double> f_terms(P, 0.0);
    for (std::size_t p = 0; p < P; ++p)
        if (mask[p]) f_terms[p] = f.value(p).norm();
    const double f_int = vol * pairwise_sum(f_terms);

    for (std::size_t l = 0; l < seq.size(); ++l) {
        const MatrixField& D = seq[l];
        std::vector<double> residual(P, 0.0), dnorm(P, 0.0);
        std::vector<std::uint8_t> clamped(P, 0);
        parallel_for(P, [&](std::size_t p) {
            if (!mask[p]) return;
            const auto x = D.vec(p);
            const double nx = x.norm();
            dnorm[p] = nx;
            if (nx > opt.R_inf) {
                clamped[p] = 1;
                return;
            }
            residual[p] = (abar.as_matrix() * x - f.value(p)).norm();
        });
        double best = 0.0;
        int best_k = 0;
        std::vector<double> terms(P, 0.0);
        for (std::size_t k = 0; k < phis.size(); ++k) {
            parallel_for(P, [&](std::size_t p) {
                terms[p] = (mask[p] && !clamped[p] && residual[p] != 0.0) ? std::abs(phis[k](D.vec(p))) * residual[p]
                                                                          : 0.0;
            });
            const double val = vol * pairwise_sum(terms);
            if (val > best) {
                best = val;
                best_k = static_cast<int>(k);
            }
        }
        const double d_int = vol * pairwise_sum(dnorm);
        st.T.push_back(best);
        st.argmax_phi.push_back(best_k);
        st.normalized.push_back(best / (anorm * d_int + f_int + 1e-300));
    }
    st.slope = log_log_slope(st.h, st.T);
    const double h_min = opt.min_h_over_dx * g.dx() * (1.0 - 1e-12);
    st.pass_level = 0;
    for (std::size_t l = 0; l < h_seq.size(); ++l)
        if (h_seq[l] >= h_min) st.pass_level = l;
    st.pass_value = st.normalized[st.pass_level];
    st.pass = st.pass_value < opt.pass_threshold;
    return st;
}

inline DSolutionStatistic dsolution_statistic(const GridField& u, const GridField& f, const CoefficientTensor& A,
                                              const MatrixFrame& E, const ExpansionTensor& C,
                                              const std::vector<MatrixTestFunction>& phis,
                                              const std::vector<double>& h_seq,
                                              const std::vector<std::uint8_t>& region = {},
                                              const DSolutionOptions& opt = {},
                                              ShiftMode mode = ShiftMode::Interpolated) {
    return dsolution_statistic(quotient_sequence(u, E, C, h_seq, mode), f, A, phis, h_seq, region, opt);
}

}  // namespace fibretrans
