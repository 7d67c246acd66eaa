#pragma once

// Shared vocabulary for the fibretrans library: dense types, the error type,
// a portable RNG, pairwise summation and a deterministic parallel_for.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fibretrans {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// A space-time matrix X̄ = [X₀ | X] stored as an N×(1+n) matrix; column 0 is
/// the temporal column, columns 1..n the spatial gradient block.
using SpaceTimeMatrix = Eigen::MatrixXd;

inline constexpr const char* kVersion = "0.1.0";

enum class ErrorCode {
    InvalidArgument,
    DimensionMismatch,
    ZeroVector,
    NotSymmetric,
    NotCommuting,
    EigenbasisVerificationFailed,
    DependentDirections,
    SingularGram,
    SingularXi,
    ZeroStep,
    BumpOutsideDomain,
    EmptyRegion,
    UnknownPreset,
    MalformedInput,
    Io,
};

inline const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::ZeroVector: return "ZeroVector";
        case ErrorCode::NotSymmetric: return "NotSymmetric";
        case ErrorCode::NotCommuting: return "NotCommuting";
        case ErrorCode::EigenbasisVerificationFailed: return "EigenbasisVerificationFailed";
        case ErrorCode::DependentDirections: return "DependentDirections";
        case ErrorCode::SingularGram: return "SingularGram";
        case ErrorCode::SingularXi: return "SingularXi";
        case ErrorCode::ZeroStep: return "ZeroStep";
        case ErrorCode::BumpOutsideDomain: return "BumpOutsideDomain";
        case ErrorCode::EmptyRegion: return "EmptyRegion";
        case ErrorCode::UnknownPreset: return "UnknownPreset";
        case ErrorCode::MalformedInput: return "MalformedInput";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

class FibreError : public std::runtime_error {
public:
    FibreError(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
    if (!condition) throw FibreError(code, what);
}

inline double frobenius(const Mat& x, const Mat& y) {
    require(x.rows() == y.rows() && x.cols() == y.cols(), ErrorCode::DimensionMismatch,
            "Frobenius product of differently shaped matrices");
    return (x.array() * y.array()).sum();
}

/// Column-major flattening; entry (α, i) lands at α + N·i.
inline Vec vectorize(const Mat& x) {
    return Eigen::Map<const Vec>(x.data(), x.size());
}

inline Mat unvectorize(const Vec& v, Eigen::Index rows, Eigen::Index cols) {
    return Eigen::Map<const Mat>(v.data(), rows, cols);
}

/// Seeded generator with platform-independent transforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    Mat normal_matrix(Eigen::Index rows, Eigen::Index cols) {
        Mat m(rows, cols);
        for (Eigen::Index j = 0; j < cols; ++j)
            for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal();
        return m;
    }

    Vec normal_vector(Eigen::Index size) { return normal_matrix(size, 1); }

    std::uint64_t next() { return engine_(); }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Pairwise (cascade) summation; the association order depends only on the
/// length, so results are independent of how the terms were produced.
inline double pairwise_sum(std::span<const double> values) {
    constexpr std::size_t kBlock = 8;
    if (values.size() <= kBlock) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

/// Worker count, capped by FIBRETRANS_THREADS when set.
inline unsigned worker_count() {
    unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("FIBRETRANS_THREADS")) {
        const long cap = std::strtol(env, nullptr, 10);
        if (cap >= 1) hw = std::min<unsigned>(hw, static_cast<unsigned>(cap));
    }
    return hw;
}

/// Runs body(i) for i in [0, count). Each index is written by exactly one
/// worker, so outputs are identical for any thread count.
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
    const unsigned workers = std::min<std::size_t>(worker_count(), std::max<std::size_t>(1, count / 4096));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) body(i);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (unsigned w = 0; w < workers; ++w) {
        const std::size_t lo = w * chunk;
        const std::size_t hi = std::min(count, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([lo, hi, &body] {
            for (std::size_t i = lo; i < hi; ++i) body(i);
        });
    }
    for (auto& t : pool) t.join();
}

/// Orthonormal basis of the column span of `cols` (rank decided relative to
/// the largest singular value), returned as columns.
inline Mat orthonormal_range(const Mat& cols, double rel_tol) {
    if (cols.cols() == 0) return Mat(cols.rows(), 0);
    Eigen::JacobiSVD<Mat> svd(cols, Eigen::ComputeFullU);
    const Vec& s = svd.singularValues();
    const double smax = s.size() > 0 ? s(0) : 0.0;
    Eigen::Index rank = 0;
    for (Eigen::Index k = 0; k < s.size(); ++k)
        if (s(k) > rel_tol * smax && s(k) > 0.0) ++rank;
    return svd.matrixU().leftCols(rank);
}

/// Completes an orthonormal set (columns of `onb`) to an orthonormal basis of
/// R^m by pivoted modified Gram-Schmidt over the standard basis vectors.
/// Returns only the completion vectors.
inline Mat orthonormal_completion(const Mat& onb) {
    const Eigen::Index m = onb.rows();
    const Eigen::Index need = m - onb.cols();
    Mat basis(m, onb.cols() + need);
    basis.leftCols(onb.cols()) = onb;
    Eigen::Index filled = onb.cols();
    std::vector<bool> used(static_cast<std::size_t>(m), false);
    for (Eigen::Index step = 0; step < need; ++step) {
        Eigen::Index best = -1;
        double best_norm = -1.0;
        Vec best_vec;
        for (Eigen::Index j = 0; j < m; ++j) {
            if (used[static_cast<std::size_t>(j)]) continue;
            Vec v = Vec::Unit(m, j);
            for (int pass = 0; pass < 2; ++pass)
                for (Eigen::Index k = 0; k < filled; ++k) v -= basis.col(k).dot(v) * basis.col(k);
            const double nv = v.norm();
            if (nv > best_norm + 1e-12) {
                best = j;
                best_norm = nv;
                best_vec = v;
            }
        }
        used[static_cast<std::size_t>(best)] = true;
        basis.col(filled++) = best_vec / best_norm;
    }
    return basis.rightCols(need);
}

}  // namespace fibretrans
