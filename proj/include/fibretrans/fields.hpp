#pragma once

// Cell-centred space-time fields on [0,T]×[0,L)^n, difference quotients
// along arbitrary space-time directions, frame quotients, and the weak-form
// residual against smooth bumps.

#include "fibretrans/frames.hpp"
#include "fibretrans/operator_core.hpp"
#include "fibretrans/profiles.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace fibretrans {

enum class Extension { Periodic, ZeroExtension };

inline const char* to_string(Extension e) { return e == Extension::Periodic ? "periodic" : "zero"; }

inline Extension extension_from_string(const std::string& s) {
    if (s == "periodic") return Extension::Periodic;
    if (s == "zero") return Extension::ZeroExtension;
    throw FibreError(ErrorCode::InvalidArgument, "extension must be 'periodic' or 'zero', got '" + s + "'");
}

/// Uniform grid: m_t cells of width Δt = T/m_t in time, m_x cells of width
/// Δx = L/m_x along each of n spatial axes. Point p enumerates (k, j_1..j_n)
/// in row-major order with time slowest.
class Grid {
public:
    Grid() = default;
    Grid(int n, double T, double L, int m_t, int m_x) : n_(n), T_(T), L_(L), m_t_(m_t), m_x_(m_x) {
        require(n >= 1, ErrorCode::InvalidArgument, "grid needs n >= 1");
        require(T > 0.0 && L > 0.0 && std::isfinite(T) && std::isfinite(L), ErrorCode::InvalidArgument,
                "grid extents must be positive");
        require(m_t >= 2 && m_x >= 2, ErrorCode::InvalidArgument, "grid needs at least two cells per axis");
        spatial_ = 1;
        for (int d = 0; d < n; ++d) spatial_ *= static_cast<std::size_t>(m_x);
    }

    int n() const { return n_; }
    double T() const { return T_; }
    double L() const { return L_; }
    int m_t() const { return m_t_; }
    int m_x() const { return m_x_; }
    double dt() const { return T_ / m_t_; }
    double dx() const { return L_ / m_x_; }
    double spacing(int dim) const { return dim == 0 ? dt() : dx(); }
    int cells(int dim) const { return dim == 0 ? m_t_ : m_x_; }
    double cell_volume() const { return dt() * std::pow(dx(), n_); }
    std::size_t spatial_points() const { return spatial_; }
    std::size_t points() const { return spatial_ * static_cast<std::size_t>(m_t_); }

    double t_center(int k) const { return (k + 0.5) * dt(); }
    double x_center(int j) const { return (j + 0.5) * dx(); }

    /// idx[0] = k, idx[1..n] = spatial indices.
    void decompose(std::size_t p, int* idx) const {
        for (int d = n_; d >= 1; --d) {
            idx[d] = static_cast<int>(p % static_cast<std::size_t>(m_x_));
            p /= static_cast<std::size_t>(m_x_);
        }
        idx[0] = static_cast<int>(p);
    }

    std::size_t compose(const int* idx) const {
        std::size_t p = static_cast<std::size_t>(idx[0]);
        for (int d = 1; d <= n_; ++d) p = p * static_cast<std::size_t>(m_x_) + static_cast<std::size_t>(idx[d]);
        return p;
    }

    double t_of(std::size_t p) const { return t_center(static_cast<int>(p / spatial_)); }

    Vec x_of(std::size_t p) const {
        std::vector<int> idx(static_cast<std::size_t>(n_ + 1));
        decompose(p, idx.data());
        Vec x(n_);
        for (int d = 0; d < n_; ++d) x(d) = x_center(idx[static_cast<std::size_t>(d + 1)]);
        return x;
    }

    bool operator==(const Grid& o) const {
        return n_ == o.n_ && T_ == o.T_ && L_ == o.L_ && m_t_ == o.m_t_ && m_x_ == o.m_x_;
    }

private:
    int n_ = 1;
    double T_ = 1.0;
    double L_ = 1.0;
    int m_t_ = 2;
    int m_x_ = 2;
    std::size_t spatial_ = 2;
};

using AnalyticField = std::function<Vec(double t, const Vec& x)>;

class GridField {
public:
    GridField() = default;
    GridField(Grid grid, int N, Extension ext = Extension::Periodic)
        : grid_(grid), N_(N), ext_(ext), values_(grid.points() * static_cast<std::size_t>(N), 0.0) {
        require(N >= 1, ErrorCode::InvalidArgument, "field needs N >= 1 components");
    }

    /// Pointwise evaluation at cell centres ((k+½)Δt, (j+½)Δx).
    static GridField sample(const AnalyticField& fn, const Grid& grid, int N, Extension ext = Extension::Periodic) {
        GridField out(grid, N, ext);
        require(fn(grid.t_of(0), grid.x_of(0)).size() == N, ErrorCode::DimensionMismatch,
                "analytic field returned wrong component count");
        parallel_for(grid.points(), [&](std::size_t p) { out.set(p, fn(grid.t_of(p), grid.x_of(p))); });
        return out;
    }

    const Grid& grid() const { return grid_; }
    int N() const { return N_; }
    Extension extension() const { return ext_; }
    void set_extension(Extension e) { ext_ = e; }

    std::vector<double>& values() { return values_; }
    const std::vector<double>& values() const { return values_; }

    double& at(std::size_t p, int c) { return values_[p * static_cast<std::size_t>(N_) + static_cast<std::size_t>(c)]; }
    double at(std::size_t p, int c) const {
        return values_[p * static_cast<std::size_t>(N_) + static_cast<std::size_t>(c)];
    }

    Vec value(std::size_t p) const { return Eigen::Map<const Vec>(&values_[p * static_cast<std::size_t>(N_)], N_); }
    void set(std::size_t p, const Vec& v) {
        Eigen::Map<Vec>(&values_[p * static_cast<std::size_t>(N_)], N_) = v;
    }

    /// Scalar field w·u.
    GridField contract(const Vec& w) const {
        require(w.size() == N_, ErrorCode::DimensionMismatch, "contract: weight must have length N");
        GridField out(grid_, 1, ext_);
        for (std::size_t p = 0; p < grid_.points(); ++p) out.values_[p] = w.dot(value(p));
        return out;
    }

    /// Pointwise M·u for an (N'×N) matrix M.
    GridField transform(const Mat& m) const {
        require(m.cols() == N_, ErrorCode::DimensionMismatch, "transform: matrix must have N columns");
        GridField out(grid_, static_cast<int>(m.rows()), ext_);
        for (std::size_t p = 0; p < grid_.points(); ++p) out.set(p, m * value(p));
        return out;
    }

    GridField operator+(const GridField& o) const {
        require(grid_ == o.grid_ && N_ == o.N_, ErrorCode::DimensionMismatch, "adding fields on different grids");
        GridField out = *this;
        for (std::size_t k = 0; k < values_.size(); ++k) out.values_[k] += o.values_[k];
        return out;
    }

    GridField scaled(double s) const {
        GridField out = *this;
        for (auto& v : out.values_) v *= s;
        return out;
    }

private:
    Grid grid_;
    int N_ = 1;
    Extension ext_ = Extension::Periodic;
    std::vector<double> values_;
};

/// Quadrature-weighted L² norm over the points where mask is set (all if empty).
inline double l2_norm(const GridField& u, const std::vector<std::uint8_t>& mask = {}) {
    std::vector<double> terms(u.grid().points(), 0.0);
    for (std::size_t p = 0; p < terms.size(); ++p)
        if (mask.empty() || mask[p]) terms[p] = u.value(p).squaredNorm();
    return std::sqrt(u.grid().cell_volume() * pairwise_sum(terms));
}

// ---------------------------------------------------------------------------
// FGRID1 files

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_fgrid(const GridField& u, std::ostream& os) {
    const Grid& g = u.grid();
    os << "FGRID1," << u.N() << ',' << g.n() << ',' << g.m_t() << ',' << g.m_x() << ',' << format_double(g.T())
       << ',' << format_double(g.L()) << ',' << to_string(u.extension()) << '\n';
    for (std::size_t p = 0; p < g.points(); ++p) {
        for (int c = 0; c < u.N(); ++c) {
            if (c) os << ',';
            os << format_double(u.at(p, c));
        }
        os << '\n';
    }
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

inline double parse_double(const std::string& s, std::size_t line) {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    require(!s.empty() && end == s.c_str() + s.size() && std::isfinite(v), ErrorCode::MalformedInput,
            "FGRID1 line " + std::to_string(line) + ": bad number '" + s + "'");
    return v;
}

inline int parse_int(const std::string& s, std::size_t line) {
    const double v = parse_double(s, line);
    require(v == std::floor(v) && std::abs(v) < 1e9, ErrorCode::MalformedInput,
            "FGRID1 line " + std::to_string(line) + ": expected an integer, got '" + s + "'");
    return static_cast<int>(v);
}

}  // namespace detail

inline GridField read_fgrid(std::istream& is) {
    std::string line;
    require(static_cast<bool>(std::getline(is, line)), ErrorCode::MalformedInput, "FGRID1 line 1: empty input");
    const auto head = detail::split_csv(line);
    require(head.size() == 8 && head[0] == "FGRID1", ErrorCode::MalformedInput,
            "FGRID1 line 1: expected header FGRID1,N,n,m_t,m_x,T,L,extension");
    const int N = detail::parse_int(head[1], 1);
    const Grid g(detail::parse_int(head[2], 1), detail::parse_double(head[5], 1), detail::parse_double(head[6], 1),
                 detail::parse_int(head[3], 1), detail::parse_int(head[4], 1));
    GridField u(g, N, extension_from_string(head[7]));
    for (std::size_t p = 0; p < g.points(); ++p) {
        require(static_cast<bool>(std::getline(is, line)), ErrorCode::MalformedInput,
                "FGRID1 line " + std::to_string(p + 2) + ": missing data row");
        const auto cells = detail::split_csv(line);
        require(static_cast<int>(cells.size()) == N, ErrorCode::MalformedInput,
                "FGRID1 line " + std::to_string(p + 2) + ": expected " + std::to_string(N) + " values");
        for (int c = 0; c < N; ++c) u.at(p, c) = detail::parse_double(cells[static_cast<std::size_t>(c)], p + 2);
    }
    return u;
}

inline void save_fgrid(const GridField& u, const std::string& path) {
    std::ofstream os(path);
    require(static_cast<bool>(os), ErrorCode::Io, "cannot open '" + path + "' for writing");
    write_fgrid(u, os);
}

inline GridField load_fgrid(const std::string& path) {
    std::ifstream is(path);
    require(static_cast<bool>(is), ErrorCode::Io, "cannot open '" + path + "'");
    return read_fgrid(is);
}

// ---------------------------------------------------------------------------
// Difference quotients

enum class ShiftMode {
    /// multilinear interpolation at x̄ + h·a
    Interpolated,
    /// h·a rounded to the nearest lattice vector
    Aligned,
};

struct QuotientField {
    GridField values;
    /// 1 where the shifted point is meaningful
    std::vector<std::uint8_t> valid;
    /// step actually used along a (differs from h only in aligned mode)
    double step = 0.0;
};

namespace detail {

/// u(x̄ + s) at every grid point, s given in lattice units per axis.
/// Periodic: space wraps, time is linearly extrapolated from the nearest
/// in-range pair and the point is valid iff the shifted time lies in [0, T).
/// ZeroExtension: out-of-range cells read as 0 and every point is valid.
inline void shifted_values(const GridField& u, const std::vector<double>& lattice_shift, GridField& out,
                           std::vector<std::uint8_t>& valid) {
    const Grid& g = u.grid();
    const int n = g.n();
    const int N = u.N();
    const bool periodic = u.extension() == Extension::Periodic;

    auto split = [](double s, int& fl, double& w) {
        fl = static_cast<int>(std::floor(s));
        w = s - fl;
        if (w < 1e-12) w = 0.0;
        if (w > 1.0 - 1e-12) {
            w = 0.0;
            ++fl;
        }
    };
    std::vector<int> fl(static_cast<std::size_t>(n + 1));
    std::vector<double> w(static_cast<std::size_t>(n + 1));
    for (int d = 0; d <= n; ++d) split(lattice_shift[static_cast<std::size_t>(d)], fl[d], w[d]);

    // Spatial corner offsets and weights are the same for every point.
    struct Corner {
        std::vector<int> offset;
        double weight;
    };
    std::vector<Corner> corners;
    for (int mask = 0; mask < (1 << n); ++mask) {
        Corner c{std::vector<int>(static_cast<std::size_t>(n)), 1.0};
        for (int d = 0; d < n; ++d) {
            const int bit = (mask >> d) & 1;
            c.offset[static_cast<std::size_t>(d)] = fl[static_cast<std::size_t>(d + 1)] + bit;
            c.weight *= bit ? w[static_cast<std::size_t>(d + 1)] : 1.0 - w[static_cast<std::size_t>(d + 1)];
        }
        if (c.weight != 0.0) corners.push_back(std::move(c));
    }

    out = GridField(g, N, u.extension());
    valid.assign(g.points(), 1);
    const int mt = g.m_t();
    const int mx = g.m_x();
    parallel_for(g.points(), [&](std::size_t p) {
        int idx[8];
        int nb[8];
        g.decompose(p, idx);
        int k0 = idx[0] + fl[0];
        double wt = w[0];
        if (periodic) {
            const double tc = idx[0] + lattice_shift[0] + 0.5;
            if (!(tc >= 0.0 && tc < mt)) {
                valid[p] = 0;
                return;
            }
            const double exact = idx[0] + lattice_shift[0];
            if (k0 < 0) {
                k0 = 0;
                wt = exact;
            } else if (k0 > mt - 2 && !(k0 == mt - 1 && wt == 0.0)) {
                k0 = mt - 2;
                wt = exact - k0;
            }
        }
        double acc[16] = {0.0};
        for (int tb = 0; tb < 2; ++tb) {
            const double tw = tb ? wt : 1.0 - wt;
            if (tw == 0.0) continue;
            const int kk = k0 + tb;
            if (kk < 0 || kk >= mt) continue;  // zero extension
            nb[0] = kk;
            for (const auto& c : corners) {
                bool inside = true;
                for (int d = 0; d < n; ++d) {
                    int j = idx[d + 1] + c.offset[static_cast<std::size_t>(d)];
                    if (periodic) {
                        j %= mx;
                        if (j < 0) j += mx;
                    } else if (j < 0 || j >= mx) {
                        inside = false;
                        break;
                    }
                    nb[d + 1] = j;
                }
                if (!inside) continue;
                const std::size_t q = g.compose(nb);
                for (int comp = 0; comp < N; ++comp) acc[comp] += tw * c.weight * u.at(q, comp);
            }
        }
        for (int comp = 0; comp < N; ++comp) out.at(p, comp) = acc[comp];
    });
}

}  // namespace detail

/// (u(x̄ + h·a) − u(x̄))/h at every cell centre; a = (a₀, a_1..a_n).
inline QuotientField directional_dq(const GridField& u, const Vec& a, double h,
                                    ShiftMode mode = ShiftMode::Interpolated) {
    const Grid& g = u.grid();
    require(h != 0.0 && std::isfinite(h), ErrorCode::ZeroStep, "difference quotient needs h != 0");
    require(a.size() == 1 + g.n(), ErrorCode::DimensionMismatch, "direction must have length 1+n");
    require(g.n() <= 7 && u.N() <= 16, ErrorCode::InvalidArgument, "directional_dq supports n <= 7 and N <= 16");
    std::vector<double> shift(static_cast<std::size_t>(g.n() + 1));
    double step = h;
    if (mode == ShiftMode::Interpolated) {
        for (int d = 0; d <= g.n(); ++d) shift[static_cast<std::size_t>(d)] = h * a(d) / g.spacing(d);
    } else {
        Vec sigma(1 + g.n());
        for (int d = 0; d <= g.n(); ++d) {
            const double s = std::round(h * a(d) / g.spacing(d));
            shift[static_cast<std::size_t>(d)] = s;
            sigma(d) = s * g.spacing(d);
        }
        require(a.squaredNorm() > 0.0, ErrorCode::ZeroVector, "aligned quotient needs a nonzero direction");
        step = sigma.dot(a) / a.squaredNorm();
        require(step != 0.0, ErrorCode::ZeroStep, "aligned step rounds to zero lattice shift");
    }
    QuotientField q;
    q.step = step;
    detail::shifted_values(u, shift, q.values, q.valid);
    auto& vals = q.values.values();
    const auto& base = u.values();
    const std::size_t N = static_cast<std::size_t>(u.N());
    for (std::size_t p = 0; p < g.points(); ++p) {
        for (std::size_t c = 0; c < N; ++c) {
            const std::size_t k = p * N + c;
            vals[k] = q.valid[p] ? (vals[k] - base[k]) / step : 0.0;
        }
    }
    return q;
}

/// Space-time-matrix valued field; entries stored per point as vectorize(X̄).
struct MatrixField {
    Grid grid;
    int N = 1;
    int n = 1;
    std::vector<double> values;
    std::vector<std::uint8_t> valid;

    int K() const { return N * (1 + n); }

    SpaceTimeMatrix at(std::size_t p) const {
        return Eigen::Map<const Mat>(&values[p * static_cast<std::size_t>(K())], N, 1 + n);
    }
    Eigen::Map<const Vec> vec(std::size_t p) const {
        return Eigen::Map<const Vec>(&values[p * static_cast<std::size_t>(K())], K());
    }
    Eigen::Map<Vec> vec(std::size_t p) { return Eigen::Map<Vec>(&values[p * static_cast<std::size_t>(K())], K()); }
};

/// D^{1,h}u = Σ C_{αiβj} D^{1,h}_{E^{(β)j}}(E^β·u) E^{αi}.
inline MatrixField frame_dq(const GridField& u, const MatrixFrame& E, const ExpansionTensor& C, double h,
                            ShiftMode mode = ShiftMode::Interpolated) {
    const Grid& g = u.grid();
    require(E.N() == u.N() && E.n() == g.n() && C.N() == E.N() && C.n() == E.n(), ErrorCode::DimensionMismatch,
            "frame_dq: frame, tensor and field dimensions disagree");
    const int K = E.dim();
    std::vector<QuotientField> q;
    q.reserve(static_cast<std::size_t>(K));
    for (int beta = 0; beta < E.N(); ++beta) {
        const GridField w = u.contract(E.left(beta));
        for (int j = 0; j <= E.n(); ++j) q.push_back(directional_dq(w, E.right(beta, j), h, mode));
    }
    const Mat M = E.stacked() * C.matrix();
    MatrixField out{g, E.N(), E.n(), std::vector<double>(g.points() * static_cast<std::size_t>(K), 0.0),
                    std::vector<std::uint8_t>(g.points(), 1)};
    parallel_for(g.points(), [&](std::size_t p) {
        Vec coeffs(K);
        bool ok = true;
        for (int k = 0; k < K; ++k) {
            coeffs(k) = q[static_cast<std::size_t>(k)].values.values()[p];
            ok = ok && q[static_cast<std::size_t>(k)].valid[p];
        }
        out.valid[p] = ok ? 1 : 0;
        if (ok) out.vec(p) = M * coeffs;
    });
    return out;
}

/// L² distance between two matrix fields over points valid in both.
inline double l2_distance(const MatrixField& a, const MatrixField& b) {
    std::vector<double> terms(a.grid.points(), 0.0);
    for (std::size_t p = 0; p < terms.size(); ++p)
        if (a.valid[p] && b.valid[p]) terms[p] = (a.vec(p) - b.vec(p)).squaredNorm();
    return std::sqrt(a.grid.cell_volume() * pairwise_sum(terms));
}

inline MatrixField project_field(const MatrixField& m, const FibreSubspace& pi) {
    const Mat P = pi.projector();
    MatrixField out = m;
    parallel_for(m.grid.points(), [&](std::size_t p) {
        if (m.valid[p]) out.vec(p) = P * m.vec(p);
    });
    return out;
}

struct FibreGradient {
    /// Π D^{1,h}u at the smallest h
    MatrixField field;
    /// ‖Π D^{1,h_k}u − Π D^{1,h_{k+1}}u‖_{L²}
    std::vector<double> increments;
};

inline FibreGradient fibre_gradient(const GridField& u, const FibreSubspace& pi, const MatrixFrame& E,
                                    const ExpansionTensor& C, const std::vector<double>& h_seq,
                                    ShiftMode mode = ShiftMode::Interpolated) {
    require(h_seq.size() >= 3, ErrorCode::InvalidArgument, "fibre_gradient needs at least three steps");
    for (std::size_t k = 1; k < h_seq.size(); ++k)
        require(h_seq[k] < h_seq[k - 1] && h_seq[k] > 0.0, ErrorCode::InvalidArgument,
                "h sequence must be positive and strictly decreasing");
    FibreGradient out;
    MatrixField prev = project_field(frame_dq(u, E, C, h_seq[0], mode), pi);
    for (std::size_t k = 1; k < h_seq.size(); ++k) {
        MatrixField cur = project_field(frame_dq(u, E, C, h_seq[k], mode), pi);
        out.increments.push_back(l2_distance(prev, cur));
        prev = std::move(cur);
    }
    out.field = std::move(prev);
    return out;
}

// ---------------------------------------------------------------------------
// Weak residual

/// φ(t,x) = β((t−t₀)/r_t)·Π_i β((x_i−x₀_i)/r_i), β(s) = exp(−1/(1−s²)) on |s| < 1.
/// Spatial offsets are periodic when the field is.
struct TestBump {
    double t0 = 0.5;
    Vec x0;
    double r_t = 0.1;
    Vec r_x;

    static double profile(double s) { return std::abs(s) < 1.0 ? std::exp(-1.0 / (1.0 - s * s)) : 0.0; }

    static double profile_derivative(double s) {
        if (std::abs(s) >= 1.0) return 0.0;
        const double q = 1.0 - s * s;
        return profile(s) * (-2.0 * s / (q * q));
    }
};

inline void validate_bump(const TestBump& b, const Grid& g, Extension ext) {
    require(b.x0.size() == g.n() && b.r_x.size() == g.n(), ErrorCode::DimensionMismatch,
            "bump centre and radii need n spatial entries");
    require(b.r_t > 0.0 && b.t0 - b.r_t > 0.0 && b.t0 + b.r_t < g.T(), ErrorCode::BumpOutsideDomain,
            "bump time support must lie strictly inside (0, T)");
    for (int d = 0; d < g.n(); ++d) {
        require(b.r_x(d) > 0.0, ErrorCode::BumpOutsideDomain, "bump radii must be positive");
        if (ext == Extension::Periodic)
            require(b.r_x(d) <= 0.5 * g.L(), ErrorCode::BumpOutsideDomain,
                    "bump spatial radius exceeds half the periodic box");
        else
            require(b.x0(d) - b.r_x(d) > 0.0 && b.x0(d) + b.r_x(d) < g.L(), ErrorCode::BumpOutsideDomain,
                    "bump spatial support must lie strictly inside (0, L)");
    }
}

/// Seeded bumps with radii r_t·T and r_x·L, centred strictly inside the domain.
inline std::vector<TestBump> default_bumps(const Grid& g, Extension ext, std::uint64_t seed, int count = 8,
                                           double rel_rt = 0.35, double rel_rx = 0.3) {
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<TestBump> out;
    const double rt = rel_rt * g.T();
    const double rx = rel_rx * g.L();
    for (int k = 0; k < count; ++k) {
        TestBump b;
        b.r_t = rt;
        b.t0 = rng.uniform(rt + 0.05 * g.T(), g.T() - rt - 0.05 * g.T());
        b.x0 = Vec(g.n());
        b.r_x = Vec::Constant(g.n(), rx);
        for (int d = 0; d < g.n(); ++d)
            b.x0(d) = ext == Extension::Periodic ? rng.uniform(0.0, g.L())
                                                 : rng.uniform(rx + 0.05 * g.L(), g.L() - rx - 0.05 * g.L());
        validate_bump(b, g, ext);
        out.push_back(std::move(b));
    }
    return out;
}

struct WeakResidual {
    /// R(φ) ∈ R^N per bump
    std::vector<Vec> residuals;
    /// ‖φ‖_{W^{1,1}} per bump
    std::vector<double> w11;
    /// |R(φ)| / (‖φ‖_{W^{1,1}}(‖u‖_{L²} + ‖f‖_{L²} + ε))
    std::vector<double> normalized;
    double max_normalized = 0.0;
    double u_l2 = 0.0;
    double f_l2 = 0.0;
};

/// Midpoint quadrature of ∫ u·D_tφ + Σ_i (A_i u)·D_iφ + f·φ for each bump.
inline WeakResidual weak_residual(const GridField& u, const GridField& f, const CoefficientTensor& A,
                                  const std::vector<TestBump>& bumps) {
    const Grid& g = u.grid();
    require(g == f.grid() && u.N() == f.N() && u.N() == A.N() && g.n() == A.n(), ErrorCode::DimensionMismatch,
            "weak_residual: u, f and A must share grid and dimensions");
    require(!bumps.empty(), ErrorCode::InvalidArgument, "weak_residual needs at least one bump");
    const int n = g.n();
    const int N = u.N();
    const double vol = g.cell_volume();
    WeakResidual out;
    out.u_l2 = l2_norm(u);
    out.f_l2 = l2_norm(f);

    for (const auto& b : bumps) {
        validate_bump(b, g, u.extension());
        std::vector<double> bt(static_cast<std::size_t>(g.m_t())), dbt(bt.size());
        for (int k = 0; k < g.m_t(); ++k) {
            const double s = (g.t_center(k) - b.t0) / b.r_t;
            bt[static_cast<std::size_t>(k)] = TestBump::profile(s);
            dbt[static_cast<std::size_t>(k)] = TestBump::profile_derivative(s) / b.r_t;
        }
        std::vector<std::vector<double>> bx(static_cast<std::size_t>(n)), dbx(static_cast<std::size_t>(n));
        for (int d = 0; d < n; ++d) {
            bx[d].resize(static_cast<std::size_t>(g.m_x()));
            dbx[d].resize(static_cast<std::size_t>(g.m_x()));
            for (int j = 0; j < g.m_x(); ++j) {
                const double off = u.extension() == Extension::Periodic
                                       ? periodic_offset(g.x_center(j), b.x0(d), g.L())
                                       : g.x_center(j) - b.x0(d);
                const double s = off / b.r_x(d);
                bx[d][static_cast<std::size_t>(j)] = TestBump::profile(s);
                dbx[d][static_cast<std::size_t>(j)] = TestBump::profile_derivative(s) / b.r_x(d);
            }
        }
        std::vector<double> terms(g.points() * static_cast<std::size_t>(N), 0.0);
        std::vector<double> w11_terms(g.points(), 0.0);
        parallel_for(g.points(), [&](std::size_t p) {
            int idx[8];
            g.decompose(p, idx);
            const double t_part = bt[static_cast<std::size_t>(idx[0])];
            const double dt_part = dbt[static_cast<std::size_t>(idx[0])];
            double space = 1.0;
            for (int d = 0; d < n; ++d) space *= bx[d][static_cast<std::size_t>(idx[d + 1])];
            double grad[8];
            bool any = t_part != 0.0 || dt_part != 0.0;
            for (int d = 0; d < n && any; ++d) {
                double prod = t_part * dbx[d][static_cast<std::size_t>(idx[d + 1])];
                for (int e = 0; e < n; ++e)
                    if (e != d) prod *= bx[e][static_cast<std::size_t>(idx[e + 1])];
                grad[d] = prod;
            }
            if (!any) return;
            const double phi = t_part * space;
            const double phi_t = dt_part * space;
            double w = std::abs(phi) + std::abs(phi_t);
            for (int d = 0; d < n; ++d) w += std::abs(grad[d]);
            if (w == 0.0) return;
            w11_terms[p] = w;
            const Vec up = u.value(p);
            Vec term = phi_t * up + phi * f.value(p);
            for (int d = 0; d < n; ++d)
                if (grad[d] != 0.0) term += grad[d] * (A.slice(d) * up);
            for (int c = 0; c < N; ++c) terms[p * static_cast<std::size_t>(N) + static_cast<std::size_t>(c)] = term(c);
        });
        Vec R(N);
        std::vector<double> comp(g.points());
        for (int c = 0; c < N; ++c) {
            for (std::size_t p = 0; p < g.points(); ++p) comp[p] = terms[p * static_cast<std::size_t>(N) + static_cast<std::size_t>(c)];
            R(c) = vol * pairwise_sum(comp);
        }
        const double w11 = vol * pairwise_sum(w11_terms);
        const double norm = R.norm() / (w11 * (out.u_l2 + out.f_l2 + 1e-300));
        out.residuals.push_back(R);
        out.w11.push_back(w11);
        out.normalized.push_back(norm);
        out.max_normalized = std::max(out.max_normalized, norm);
    }
    return out;
}

}  // namespace fibretrans
