#pragma once

// Analytic scalar profiles on the periodic box, used as initial data and
// sources for manufactured solutions.

#include "fibretrans/core.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace fibretrans {

enum class ProfileKind { Zero, Constant, Sine, Cosine, Tent, SqrtAbs };

inline const char* to_string(ProfileKind k) {
    switch (k) {
        case ProfileKind::Zero: return "zero";
        case ProfileKind::Constant: return "constant";
        case ProfileKind::Sine: return "sine";
        case ProfileKind::Cosine: return "cosine";
        case ProfileKind::Tent: return "tent";
        case ProfileKind::SqrtAbs: return "sqrt_abs";
    }
    return "unknown";
}

inline ProfileKind profile_kind_from_string(const std::string& s) {
    if (s == "zero") return ProfileKind::Zero;
    if (s == "constant") return ProfileKind::Constant;
    if (s == "sine") return ProfileKind::Sine;
    if (s == "cosine") return ProfileKind::Cosine;
    if (s == "tent") return ProfileKind::Tent;
    if (s == "sqrt_abs") return ProfileKind::SqrtAbs;
    throw FibreError(ErrorCode::UnknownPreset, "unknown profile '" + s + "'");
}

/// Signed periodic offset of y from `center`, folded into [-L/2, L/2).
inline double periodic_offset(double y, double center, double L) {
    double d = std::fmod(y - center, L);
    if (d < -0.5 * L) d += L;
    if (d >= 0.5 * L) d -= L;
    return d;
}

/// w(x) along one spatial axis, L-periodic:
///   constant  amplitude
///   sine      amplitude·sin(2πk x_axis/L)
///   cosine    amplitude·cos(2πk x_axis/L)
///   tent      amplitude·|x_axis − center| (periodic distance)
///   sqrt_abs  amplitude·√|x_axis − center| (periodic distance)
struct ScalarProfile {
    ProfileKind kind = ProfileKind::Zero;
    double amplitude = 1.0;
    int wavenumber = 1;
    int axis = 0;
    double center = 0.0;

    static ScalarProfile zero() { return {}; }
    static ScalarProfile constant(double v) { return {ProfileKind::Constant, v, 1, 0, 0.0}; }
    static ScalarProfile sine(int k, double amp, int axis) { return {ProfileKind::Sine, amp, k, axis, 0.0}; }
    static ScalarProfile cosine(int k, double amp, int axis) { return {ProfileKind::Cosine, amp, k, axis, 0.0}; }
    static ScalarProfile tent(double amp, int axis, double center) { return {ProfileKind::Tent, amp, 1, axis, center}; }
    static ScalarProfile sqrt_abs(double amp, int axis, double center) {
        return {ProfileKind::SqrtAbs, amp, 1, axis, center};
    }

    bool smooth() const { return kind != ProfileKind::Tent && kind != ProfileKind::SqrtAbs; }

    double operator()(const Vec& x, double L) const {
        const double y = kind == ProfileKind::Zero || kind == ProfileKind::Constant ? 0.0 : x(axis);
        const double w = 2.0 * std::numbers::pi * wavenumber / L;
        switch (kind) {
            case ProfileKind::Zero: return 0.0;
            case ProfileKind::Constant: return amplitude;
            case ProfileKind::Sine: return amplitude * std::sin(w * y);
            case ProfileKind::Cosine: return amplitude * std::cos(w * y);
            case ProfileKind::Tent: return amplitude * std::abs(periodic_offset(y, center, L));
            case ProfileKind::SqrtAbs: return amplitude * std::sqrt(std::abs(periodic_offset(y, center, L)));
        }
        return 0.0;
    }

    /// ∂w/∂x_j where defined (one-sided choice at kinks is irrelevant a.e.).
    double derivative(const Vec& x, double L, int j) const {
        if (j != axis) return 0.0;
        const double w = 2.0 * std::numbers::pi * wavenumber / L;
        switch (kind) {
            case ProfileKind::Zero:
            case ProfileKind::Constant: return 0.0;
            case ProfileKind::Sine: return amplitude * w * std::cos(w * x(axis));
            case ProfileKind::Cosine: return -amplitude * w * std::sin(w * x(axis));
            case ProfileKind::Tent: {
                const double d = periodic_offset(x(axis), center, L);
                return d > 0 ? amplitude : (d < 0 ? -amplitude : 0.0);
            }
            case ProfileKind::SqrtAbs: {
                const double d = periodic_offset(x(axis), center, L);
                if (d == 0.0) return 0.0;
                return amplitude * (d > 0 ? 0.5 : -0.5) / std::sqrt(std::abs(d));
            }
        }
        return 0.0;
    }

    double second_derivative_bound(double L) const {
        const double w = 2.0 * std::numbers::pi * wavenumber / L;
        if (kind == ProfileKind::Sine || kind == ProfileKind::Cosine) return std::abs(amplitude) * w * w;
        return kind == ProfileKind::Zero || kind == ProfileKind::Constant ? 0.0
                                                                          : std::numeric_limits<double>::infinity();
    }
};

}  // namespace fibretrans
