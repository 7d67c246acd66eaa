#pragma once

// Exact solutions by characteristics: each v_p = ξ^p·u solves the scalar
// transport D_t v_p + Σ a^p_i D_i v_p = g_p, and u = Ξ⁻¹v.

#include "fibretrans/fields.hpp"
#include "fibretrans/hyperbolicity.hpp"
#include "fibretrans/profiles.hpp"

#include <vector>

namespace fibretrans {

struct TransportSystem {
    std::vector<RankOneDirection> directions;
    /// d×N, row p is ξ^p
    Mat xi;
    double condition = 1.0;

    int N() const { return static_cast<int>(xi.cols()); }
    int d() const { return static_cast<int>(xi.rows()); }

    /// Spatial part of a^p (with a₀ = 1 this is the characteristic velocity).
    Vec velocity(int p) const {
        const Vec& a = directions[static_cast<std::size_t>(p)].a;
        return a.tail(a.size() - 1) / a(0);
    }

    static TransportSystem from_directions(const CoefficientTensor& A, std::vector<RankOneDirection> dirs,
                                           double tol = kAcceptTolerance) {
        TransportSystem ts;
        ts.xi = Mat(static_cast<Eigen::Index>(dirs.size()), A.N());
        for (std::size_t p = 0; p < dirs.size(); ++p) {
            const auto m = membership_test(A, dirs[p].xi, dirs[p].a, tol);
            require(m.accepted, ErrorCode::InvalidArgument,
                    "transport direction " + std::to_string(p) + " is not a common left eigenvector");
            ts.xi.row(static_cast<Eigen::Index>(p)) = dirs[p].xi.transpose();
        }
        ts.directions = std::move(dirs);
        if (ts.d() == ts.N() && ts.d() > 0) {
            Eigen::JacobiSVD<Mat> svd(ts.xi);
            const Vec& s = svd.singularValues();
            ts.condition = s(s.size() - 1) > 0.0 ? s(0) / s(s.size() - 1) : std::numeric_limits<double>::infinity();
        } else {
            ts.condition = std::numeric_limits<double>::infinity();
        }
        return ts;
    }
};

/// v(t,x) = v0(x − t·vel) + ∫₀ᵗ g(x − (t−s)·vel) ds, composite midpoint rule.
inline double characteristic_value(const Vec& velocity, const ScalarProfile& v0, const ScalarProfile& g, double t,
                                   const Vec& x, double L, int substeps) {
    double v = v0(x - t * velocity, L);
    if (g.kind == ProfileKind::Zero || t == 0.0) return v;
    const double ds = t / substeps;
    double integral = 0.0;
    for (int k = 0; k < substeps; ++k) {
        const double s = (k + 0.5) * ds;
        integral += g(x - (t - s) * velocity, L);
    }
    return v + ds * integral;
}

inline GridField characteristic_solve(const Vec& velocity, const ScalarProfile& v0, const ScalarProfile& g,
                                      const Grid& grid, Extension ext = Extension::Periodic, int substeps = 0) {
    require(velocity.size() == grid.n(), ErrorCode::DimensionMismatch, "velocity must have n components");
    const int m = substeps > 0 ? substeps : grid.m_t();
    GridField out(grid, 1, ext);
    parallel_for(grid.points(), [&](std::size_t p) {
        out.at(p, 0) = characteristic_value(velocity, v0, g, grid.t_of(p), grid.x_of(p), grid.L(), m);
    });
    return out;
}

/// Per-direction data for a manufactured solution. velocity_shift (length n,
/// optional) is added to every characteristic velocity; a nonzero shift
/// produces a deliberately wrong solution.
struct ManufacturedPresets {
    std::vector<ScalarProfile> v0;
    std::vector<ScalarProfile> g;
    Vec velocity_shift;
    int substeps = 0;
};

struct ManufacturedSolution {
    GridField u;
    GridField f;
};

namespace detail {

inline Eigen::PartialPivLU<Mat> checked_xi_lu(const TransportSystem& ts) {
    require(ts.d() == ts.N(), ErrorCode::SingularXi, "manufactured solutions need d = N directions");
    require(ts.condition <= 1e12, ErrorCode::SingularXi, "xi matrix is ill-conditioned beyond 1e12");
    return Eigen::PartialPivLU<Mat>(ts.xi);
}

inline Vec shifted_velocity(const TransportSystem& ts, const ManufacturedPresets& pr, int p) {
    Vec v = ts.velocity(p);
    if (pr.velocity_shift.size() > 0) v += pr.velocity_shift;
    return v;
}

}  // namespace detail

/// Analytic u(t,x) of the manufactured solution.
inline Vec manufactured_value(const TransportSystem& ts, const ManufacturedPresets& pr, double t, const Vec& x,
                              double L) {
    const auto lu = detail::checked_xi_lu(ts);
    Vec v(ts.d());
    for (int p = 0; p < ts.d(); ++p)
        v(p) = characteristic_value(detail::shifted_velocity(ts, pr, p), pr.v0[static_cast<std::size_t>(p)],
                                    pr.g[static_cast<std::size_t>(p)], t, x, L, pr.substeps > 0 ? pr.substeps : 64);
    return lu.solve(v);
}

/// u = Ξ⁻¹(v_p) and f = Ξ⁻¹(g_p); the pair solves D_t u + A:Du = f classically
/// for smooth presets and zero velocity shift.
inline ManufacturedSolution manufactured_solution(const TransportSystem& ts, const ManufacturedPresets& pr,
                                                  const Grid& grid, Extension ext = Extension::Periodic) {
    const auto lu = detail::checked_xi_lu(ts);
    const int N = ts.N();
    require(static_cast<int>(pr.v0.size()) == N && static_cast<int>(pr.g.size()) == N, ErrorCode::DimensionMismatch,
            "need one initial profile and one source per direction");
    require(pr.velocity_shift.size() == 0 || pr.velocity_shift.size() == grid.n(), ErrorCode::DimensionMismatch,
            "velocity shift must have n components");
    const Mat xi_inv = lu.inverse();
    GridField v(grid, N, ext);
    GridField g(grid, N, ext);
    for (int p = 0; p < N; ++p) {
        const GridField vp = characteristic_solve(detail::shifted_velocity(ts, pr, p), pr.v0[static_cast<std::size_t>(p)],
                                                  pr.g[static_cast<std::size_t>(p)], grid, ext, pr.substeps);
        for (std::size_t q = 0; q < grid.points(); ++q) {
            v.at(q, p) = vp.at(q, 0);
            g.at(q, p) = pr.g[static_cast<std::size_t>(p)](grid.x_of(q), grid.L());
        }
    }
    return {v.transform(xi_inv), g.transform(xi_inv)};
}

}  // namespace fibretrans
