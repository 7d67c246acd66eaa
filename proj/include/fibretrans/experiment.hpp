#pragma once

// Experiment orchestration for the command-line tool: analyze, basis, solve,
// verify-weak, verify-dsol, paper-example and equivalence-suite. Every command
// writes deterministic JSON (and CSV where tabular) into the output directory.

#include "fibretrans/dsolution.hpp"
#include "fibretrans/frames.hpp"
#include "fibretrans/generators.hpp"
#include "fibretrans/hyperbolicity.hpp"
#include "fibretrans/system_spec.hpp"
#include "fibretrans/transport.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace fibretrans {

/// Verdict threshold shared by both verifiers (normalized residual/statistic).
inline constexpr double kVerifierThreshold = 1e-2;

enum ExitCode : int { kExitPass = 0, kExitInputError = 1, kExitVerdictFail = 2 };

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names{"analyze",     "basis",       "solve",           "verify-weak",
                                                "verify-dsol", "paper-example", "equivalence-suite"};
    return names;
}

struct RunOptions {
    std::string command;
    std::optional<std::string> spec_path;
    std::string out_dir = "out";
    SpecOverrides overrides;
};

// ---------------------------------------------------------------------------
// Output helpers

inline Json provenance(const SystemSpec& s) {
    const bool periodic = s.extension == Extension::Periodic;
    return Json{{"spec_hash", spec_hash(s)},
                {"seed", s.seed},
                {"version", kVersion},
                {"domain", periodic ? "periodic box in space, bounded time slab [0, T)" : "box with zero extension"}};
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    require(static_cast<bool>(os), ErrorCode::Io, "cannot write '" + path.string() + "'");
    os << text;
}

inline void write_json(const std::filesystem::path& path, const Json& j) { write_text(path, j.dump(2) + "\n"); }

inline std::string csv_row(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t k = 0; k < cells.size(); ++k) out += (k ? "," : "") + cells[k];
    return out + "\n";
}

inline Json optional_number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json numbers(const std::vector<double>& v) {
    Json a = Json::array();
    for (double x : v) a.push_back(optional_number(x));
    return a;
}

// ---------------------------------------------------------------------------
// Analysis

struct Analysis {
    CoefficientTensor A;
    HyperbolicityReport report;
    FibreSubspace pi;
    std::optional<MatrixFrame> frame;
};

inline Analysis analyze_system(const SystemSpec& s) {
    CoefficientTensor A = s.tensor();
    auto report = check_rank_one_spanning(A, s.seed, s.tol);
    auto pi = fibre_subspace(augment(A));
    std::optional<MatrixFrame> frame;
    if (report.verdict == Verdict::Hyperbolic) frame = build_adapted_frame(report.directions, s.N, s.n);
    return {std::move(A), std::move(report), std::move(pi), std::move(frame)};
}

inline Json analysis_json(const SystemSpec& s, const Analysis& an) {
    const auto& r = an.report;
    Json dirs = Json::array();
    for (std::size_t k = 0; k < r.directions.size(); ++k)
        dirs.push_back(Json{{"xi", vec_to_json(r.directions[k].xi)},
                            {"a", vec_to_json(r.directions[k].a)},
                            {"eigen_residual", r.residuals[k]},
                            {"projection_residual", r.projection_residuals[k]}});
    Json j;
    j["command"] = "analyze";
    j["N"] = s.N;
    j["n"] = s.n;
    j["verdict"] = to_string(r.verdict);
    j["span_dim"] = r.span_dim;
    j["pi_dim"] = r.pi_dim;
    j["nullspace_dim"] = an.pi.nullspace_dim();
    j["coercivity"] = an.pi.coercivity();
    j["operator_norm"] = augment(an.A).operator_norm();
    j["directions"] = dirs;
    j["xi_min_singular_value"] = r.xi_min_singular_value;
    j["commutator_norms"] = mat_to_json(r.commutator_norms);
    j["max_commutator_norm"] = r.commutator_norms.size() ? r.commutator_norms.maxCoeff() : 0.0;
    j["complex_spectrum"] = r.complex_spectrum;
    j["fallback_used"] = r.fallback_used;
    j["accept_tol"] = r.accept_tol;
    j["reject_tol"] = r.reject_tol;
    j["frame_condition_number"] = an.frame ? Json(an.frame->condition_number()) : Json(nullptr);
    j["decoupling_note"] = r.decoupling_note;
    j["notes"] = r.notes;
    j["provenance"] = provenance(s);
    return j;
}

// ---------------------------------------------------------------------------
// Basis

inline Json frame_json(const MatrixFrame& E) {
    Json left = Json::array(), right = Json::array();
    for (int a = 0; a < E.N(); ++a) {
        left.push_back(vec_to_json(E.left(a)));
        Json row = Json::array();
        for (int i = 0; i <= E.n(); ++i) row.push_back(vec_to_json(E.right(a, i)));
        right.push_back(row);
    }
    return Json{{"adapted_rows", E.adapted_rows()},
                {"left", left},
                {"right", right},
                {"condition_number", E.condition_number()},
                {"warnings", E.warnings()}};
}

struct BasisResult {
    Json report;
    std::string expansion_csv;
};

inline BasisResult basis_report(const SystemSpec& s, const Analysis& an) {
    Json j;
    j["command"] = "basis";
    j["verdict"] = to_string(an.report.verdict);
    std::string csv = csv_row({"row", "col", "value"});
    if (an.frame) {
        const MatrixFrame& E = *an.frame;
        const auto C = expansion_tensor(E, E);
        const auto C2 = expansion_tensor_by_solves(E, E);
        j["frame"] = frame_json(E);
        j["expansion_routes_max_difference"] = (C.matrix() - C2.matrix()).cwiseAbs().maxCoeff();
        for (Eigen::Index r = 0; r < C.matrix().rows(); ++r)
            for (Eigen::Index c = 0; c < C.matrix().cols(); ++c)
                csv += csv_row({std::to_string(r), std::to_string(c), format_double(C.matrix()(r, c))});
    } else {
        j["frame"] = nullptr;
    }
    if (slices_symmetric(an.A, s.tol) && slices_commute(an.A, s.tol)) {
        const auto ob = lemma12_basis(an.A, s.tol);
        const Mat gram = ob.frame.gram();
        const auto abar = augment(an.A);
        double annihilation = 0.0;
        for (int a = 0; a < ob.frame.N(); ++a)
            for (int i = 1; i <= ob.frame.n(); ++i)
                annihilation = std::max(annihilation, abar.apply(ob.frame.element(a, i)).norm());
        j["orthonormal_basis"] = Json{{"frame", frame_json(ob.frame)},
                                      {"eigenbasis", mat_to_json(ob.eigenbasis)},
                                      {"eigenvalues", mat_to_json(ob.eigenvalues)},
                                      {"gram_identity_error",
                                       (gram - Mat::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff()},
                                      {"max_annihilation_residual", annihilation}};
    } else {
        j["orthonormal_basis"] = nullptr;
    }
    j["provenance"] = provenance(s);
    return {j, csv};
}

// ---------------------------------------------------------------------------
// Fields from a spec

struct ProblemFields {
    GridField u;
    GridField f;
};

inline std::vector<ScalarProfile> direction_sources(const SystemSpec& s, const TransportSystem& ts) {
    if (s.u.g) return *s.u.g;
    std::vector<ScalarProfile> g;
    for (int p = 0; p < ts.d(); ++p) {
        const Vec xi = ts.xi.row(p).transpose();
        switch (s.f.kind) {
            case SourceKind::Zero: g.push_back(ScalarProfile::zero()); break;
            case SourceKind::Constant: g.push_back(ScalarProfile::constant(xi.dot(s.f.value))); break;
            case SourceKind::Sinewave:
                g.push_back(ScalarProfile::sine(s.f.wavenumber, xi.dot(s.f.value), s.f.axis));
                break;
            case SourceKind::Transported: g.push_back(s.f.g[static_cast<std::size_t>(p)]); break;
            case SourceKind::File:
                throw FibreError(ErrorCode::InvalidArgument, "tabulated f needs explicit u.g sources");
        }
    }
    return g;
}

inline GridField load_matching(const SystemSpec& s, const std::string& path, const Grid& g) {
    GridField u = load_fgrid(s.resolve(path));
    require(u.grid() == g && u.N() == s.N, ErrorCode::DimensionMismatch,
            "field '" + path + "' does not match the spec grid and N");
    u.set_extension(s.extension);
    return u;
}

/// Builds u and f. A transported u needs a hyperbolic system (d = N).
inline ProblemFields problem_fields(const SystemSpec& s, const Analysis& an) {
    const Grid g = s.grid();
    std::optional<TransportSystem> ts;
    std::optional<GridField> u_manufactured;
    std::optional<GridField> f_transported;
    if (s.u.kind == InitialKind::Transported || s.f.kind == SourceKind::Transported) {
        require(an.report.verdict == Verdict::Hyperbolic, ErrorCode::InvalidArgument,
                "transported presets need a hyperbolic system (verdict " +
                    std::string(to_string(an.report.verdict)) + ")");
        ts = TransportSystem::from_directions(an.A, an.report.directions, s.tol);
    }
    if (s.u.kind == InitialKind::Transported) {
        ManufacturedPresets pr{s.u.v0, direction_sources(s, *ts), s.u.velocity_shift, 0};
        u_manufactured = manufactured_solution(*ts, pr, g, s.extension).u;
    }
    GridField u = u_manufactured ? *u_manufactured : load_matching(s, s.u.path, g);

    GridField f(g, s.N, s.extension);
    switch (s.f.kind) {
        case SourceKind::Zero: break;
        case SourceKind::Constant:
            f = GridField::sample([&](double, const Vec&) { return Vec(s.f.value); }, g, s.N, s.extension);
            break;
        case SourceKind::Sinewave:
            f = GridField::sample(
                [&](double, const Vec& x) {
                    return Vec(s.f.value * std::sin(2.0 * std::numbers::pi * s.f.wavenumber * x(s.f.axis) / s.L));
                },
                g, s.N, s.extension);
            break;
        case SourceKind::Transported: {
            ManufacturedPresets pr{std::vector<ScalarProfile>(static_cast<std::size_t>(s.N)), s.f.g, Vec(), 0};
            f = manufactured_solution(*ts, pr, g, s.extension).f;
            break;
        }
        case SourceKind::File: f = load_matching(s, s.f.path, g); break;
    }
    return {std::move(u), std::move(f)};
}

// ---------------------------------------------------------------------------
// Verifiers

struct WeakVerification {
    WeakResidual residual;
    std::vector<TestBump> bumps;
    bool pass = false;
};

inline WeakVerification verify_weak(const GridField& u, const GridField& f, const CoefficientTensor& A,
                                    std::uint64_t seed) {
    auto bumps = default_bumps(u.grid(), u.extension(), seed);
    auto w = weak_residual(u, f, A, bumps);
    const bool pass = w.max_normalized < kVerifierThreshold;
    return {std::move(w), std::move(bumps), pass};
}

inline Json weak_json(const WeakVerification& v) {
    Json rows = Json::array();
    for (std::size_t k = 0; k < v.bumps.size(); ++k) {
        const auto& b = v.bumps[k];
        rows.push_back(Json{{"t0", b.t0},
                            {"x0", vec_to_json(b.x0)},
                            {"r_t", b.r_t},
                            {"r_x", vec_to_json(b.r_x)},
                            {"residual", vec_to_json(v.residual.residuals[k])},
                            {"w11", v.residual.w11[k]},
                            {"normalized", v.residual.normalized[k]}});
    }
    return Json{{"bumps", rows},
                {"u_l2", v.residual.u_l2},
                {"f_l2", v.residual.f_l2},
                {"max_normalized", v.residual.max_normalized},
                {"threshold", kVerifierThreshold},
                {"pass", v.pass}};
}

inline std::string weak_csv(const WeakVerification& v) {
    std::string out = csv_row({"bump", "t0", "r_t", "r_x_max", "residual_norm", "w11", "normalized"});
    for (std::size_t k = 0; k < v.bumps.size(); ++k)
        out += csv_row({std::to_string(k), format_double(v.bumps[k].t0), format_double(v.bumps[k].r_t),
                        format_double(v.bumps[k].r_x.maxCoeff()), format_double(v.residual.residuals[k].norm()),
                        format_double(v.residual.w11[k]), format_double(v.residual.normalized[k])});
    return out;
}

struct DsolVerification {
    DSolutionStatistic stat;
    std::vector<MatrixTestFunction> phis;
    std::string frame_kind;
    double frame_condition = 1.0;
    double dirac_fraction_fibre = 0.0;
    double mean_infinity_mass = 0.0;
};

/// Adapted frame when available, standard frame otherwise; interpolated shifts.
inline DsolVerification verify_dsol(const GridField& u, const GridField& f, const Analysis& an, std::uint64_t seed,
                                    std::optional<double> h0, int levels, std::optional<double> R_inf) {
    const Grid& g = u.grid();
    const MatrixFrame E = an.frame ? *an.frame : MatrixFrame::standard(an.A.N(), an.A.n());
    const auto C = expansion_tensor(E, E);
    const auto h = dyadic_steps(h0 ? *h0 : 8.0 * g.dx(), levels);
    const auto seq = quotient_sequence(u, E, C, h);
    DsolVerification v;
    v.phis = default_test_functions(seq.front(), seed);
    DSolutionOptions opt;
    opt.pass_threshold = kVerifierThreshold;
    if (R_inf) opt.R_inf = *R_inf;
    v.stat = dsolution_statistic(seq, f, an.A, v.phis, h, {}, opt);
    v.frame_kind = an.frame ? "adapted" : "standard";
    v.frame_condition = E.condition_number();

    const auto ym = restrict_to_fibre(empirical_young_measure(seq, h, opt.R_inf), an.pi);
    const double scale = std::max(1.0, quotient_norm_quantile(seq.front(), 0.99));
    const auto dirac = dirac_check(ym, 0.1 * scale);
    double concentrated = 0.0, infinity = 0.0;
    for (std::size_t i = 0; i < ym.size(); ++i) {
        concentrated += dirac[i];
        infinity += ym.infinity_mass(i);
    }
    if (ym.size() > 0) {
        v.dirac_fraction_fibre = concentrated / static_cast<double>(ym.size());
        v.mean_infinity_mass = infinity / static_cast<double>(ym.size());
    }
    return v;
}

inline Json dsol_json(const DsolVerification& v) {
    Json phis = Json::array();
    for (const auto& p : v.phis)
        phis.push_back(Json{{"kind", p.kind == TestFunctionKind::Plateau ? "plateau" : "radial"},
                            {"center_norm", p.center.norm()},
                            {"radius", p.radius}});
    return Json{{"frame", v.frame_kind},
                {"frame_condition_number", v.frame_condition},
                {"h", numbers(v.stat.h)},
                {"T", numbers(v.stat.T)},
                {"normalized", numbers(v.stat.normalized)},
                {"argmax_phi", v.stat.argmax_phi},
                {"slope", optional_number(v.stat.slope)},
                {"test_functions", phis},
                {"region_points", v.stat.region_points},
                {"pass_level", v.stat.pass_level},
                {"pass_value", v.stat.pass_value},
                {"threshold", kVerifierThreshold},
                {"pass", v.stat.pass},
                {"fibre_dirac_fraction", v.dirac_fraction_fibre},
                {"mean_infinity_mass", v.mean_infinity_mass},
                {"scope", "one fixed h-sequence is sampled; other subsequences are not examined"}};
}

inline std::string dsol_csv(const DsolVerification& v) {
    std::string out = csv_row({"level", "h", "T", "normalized", "argmax_phi"});
    for (std::size_t l = 0; l < v.stat.h.size(); ++l)
        out += csv_row({std::to_string(l), format_double(v.stat.h[l]), format_double(v.stat.T[l]),
                        format_double(v.stat.normalized[l]), std::to_string(v.stat.argmax_phi[l])});
    return out;
}

// ---------------------------------------------------------------------------
// Built-in presets

inline Mat paper_slice() {
    Mat a(2, 2);
    a << 2, 2, 1, 3;
    return a;
}

/// The two-equation, two-dimensional example with A₂ = 2A₁, smooth transported data.
inline SystemSpec paper_example_spec() {
    SystemSpec s;
    s.N = 2;
    s.n = 2;
    s.T = 0.5;
    s.L = 1.0;
    s.A = {paper_slice(), 2.0 * paper_slice()};
    s.u.v0 = default_initial_profiles(2, 2);
    s.u.velocity_shift = Vec::Zero(2);
    s.m_t = 128;
    s.m_x = 64;
    return s;
}

enum class SuiteVariant { Correct, WithSource, WrongSpeed, WrongSource };

inline const char* to_string(SuiteVariant v) {
    switch (v) {
        case SuiteVariant::Correct: return "correct";
        case SuiteVariant::WithSource: return "correct-with-source";
        case SuiteVariant::WrongSpeed: return "wrong-speed";
        case SuiteVariant::WrongSource: return "wrong-f";
    }
    return "?";
}

struct SuiteCase {
    std::string name;
    SystemSpec spec;
    SuiteVariant variant;
    bool expected_pass;
};

inline SystemSpec with_variant(SystemSpec s, SuiteVariant v) {
    s.u.velocity_shift = Vec::Zero(s.n);
    s.u.g.reset();
    s.f = SourceSpec{};
    switch (v) {
        case SuiteVariant::Correct: break;
        case SuiteVariant::WithSource:
            s.f.kind = SourceKind::Transported;
            s.f.g.assign(static_cast<std::size_t>(s.N), ScalarProfile::constant(1.0));
            break;
        case SuiteVariant::WrongSpeed: s.u.velocity_shift(0) = 1.0; break;
        case SuiteVariant::WrongSource:
            s.u.g = std::vector<ScalarProfile>(static_cast<std::size_t>(s.N), ScalarProfile::zero());
            s.f.kind = SourceKind::Constant;
            s.f.value = Vec::Constant(s.N, 5.0);
            break;
    }
    return s;
}

/// The 16-case matrix: four variants of the worked example and three of each
/// random hyperbolic system (N, n) ∈ {(2,1), (2,2), (3,1), (3,2)}.
inline std::vector<SuiteCase> equivalence_cases(std::uint64_t seed) {
    std::vector<SuiteCase> out;
    const SystemSpec paper = paper_example_spec();
    for (auto v : {SuiteVariant::Correct, SuiteVariant::WithSource, SuiteVariant::WrongSpeed, SuiteVariant::WrongSource})
        out.push_back({std::string("example/") + to_string(v), with_variant(paper, v), v,
                       v == SuiteVariant::Correct || v == SuiteVariant::WithSource});
    Rng rng(seed);
    for (auto [N, n] : std::vector<std::pair<int, int>>{{2, 1}, {2, 2}, {3, 1}, {3, 2}}) {
        SystemSpec s;
        s.N = N;
        s.n = n;
        s.T = 0.5;
        s.A = random_hyperbolic_system(N, n, rng).slices();
        s.u.v0 = default_initial_profiles(N, n);
        s.m_t = n == 1 ? 256 : 128;
        s.m_x = n == 1 ? 128 : 64;
        s.seed = seed;
        const std::string base = "random-N" + std::to_string(N) + "-n" + std::to_string(n) + "/";
        for (auto v : {SuiteVariant::Correct, SuiteVariant::WrongSpeed, SuiteVariant::WrongSource})
            out.push_back({base + to_string(v), with_variant(s, v), v, v == SuiteVariant::Correct});
    }
    for (auto& c : out) c.spec.seed = seed;
    return out;
}

struct SuiteRow {
    std::string name;
    std::string variant;
    int N = 0, n = 0;
    bool expected_pass = false;
    double weak_value = 0.0;
    bool weak_pass = false;
    double dsol_value = 0.0;
    bool dsol_pass = false;
    std::string spec_hash;
};

inline SuiteRow run_suite_case(const SuiteCase& c) {
    const Analysis an = analyze_system(c.spec);
    const auto fields = problem_fields(c.spec, an);
    const auto w = verify_weak(fields.u, fields.f, an.A, c.spec.seed);
    const auto d = verify_dsol(fields.u, fields.f, an, c.spec.seed, c.spec.h0, c.spec.levels, c.spec.R_inf);
    return {c.name,
            to_string(c.variant),
            c.spec.N,
            c.spec.n,
            c.expected_pass,
            w.residual.max_normalized,
            w.pass,
            d.stat.pass_value,
            d.stat.pass,
            spec_hash(c.spec)};
}

struct SuiteResult {
    std::vector<SuiteRow> rows;
    bool biconditional = true;
    bool controls_ok = true;
};

inline SuiteResult run_equivalence_suite(std::uint64_t seed) {
    SuiteResult r;
    for (const auto& c : equivalence_cases(seed)) {
        r.rows.push_back(run_suite_case(c));
        const auto& row = r.rows.back();
        r.biconditional = r.biconditional && row.weak_pass == row.dsol_pass;
        r.controls_ok = r.controls_ok && row.weak_pass == row.expected_pass && row.dsol_pass == row.expected_pass;
    }
    return r;
}

inline Json suite_json(const SuiteResult& r, std::uint64_t seed) {
    Json rows = Json::array();
    for (const auto& row : r.rows)
        rows.push_back(Json{{"name", row.name},
                            {"variant", row.variant},
                            {"N", row.N},
                            {"n", row.n},
                            {"expected_pass", row.expected_pass},
                            {"weak_value", row.weak_value},
                            {"weak_pass", row.weak_pass},
                            {"dsol_value", row.dsol_value},
                            {"dsol_pass", row.dsol_pass},
                            {"agree", row.weak_pass == row.dsol_pass},
                            {"spec_hash", row.spec_hash}});
    std::string all;
    for (const auto& row : r.rows) all += row.spec_hash;
    return Json{{"command", "equivalence-suite"},
                {"threshold", kVerifierThreshold},
                {"cases", rows},
                {"case_count", r.rows.size()},
                {"biconditional_holds", r.biconditional},
                {"controls_as_expected", r.controls_ok},
                {"provenance",
                 Json{{"spec_hash", fnv1a_hex(all)},
                      {"seed", seed},
                      {"version", kVersion},
                      {"domain", "periodic box in space, bounded time slab [0, T)"}}}};
}

inline std::string suite_csv(const SuiteResult& r) {
    std::string out =
        csv_row({"name", "variant", "N", "n", "expected_pass", "weak_value", "weak_pass", "dsol_value", "dsol_pass"});
    for (const auto& row : r.rows)
        out += csv_row({row.name, row.variant, std::to_string(row.N), std::to_string(row.n),
                        row.expected_pass ? "1" : "0", format_double(row.weak_value), row.weak_pass ? "1" : "0",
                        format_double(row.dsol_value), row.dsol_pass ? "1" : "0"});
    return out;
}

// ---------------------------------------------------------------------------
// Command dispatch

namespace detail {

inline SystemSpec spec_for(const RunOptions& o, bool required) {
    SystemSpec s;
    if (o.spec_path) {
        s = load_spec(*o.spec_path);
    } else {
        require(!required, ErrorCode::InvalidArgument, "command '" + o.command + "' needs --spec");
        s = paper_example_spec();
    }
    apply_overrides(s, o.overrides);
    return s;
}

inline int verdict_exit(Verdict v) { return v == Verdict::NotHyperbolic ? kExitVerdictFail : kExitPass; }

}  // namespace detail

/// Runs one command. Returns 0 on pass, 2 on a failed verdict and 1 on input
/// errors; Inconclusive hyperbolicity verdicts exit 0.
inline int run_command(const RunOptions& o, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    try {
        const auto& names = command_names();
        require(std::find(names.begin(), names.end(), o.command) != names.end(), ErrorCode::InvalidArgument,
                "unknown command '" + o.command + "'");
        const std::filesystem::path out(o.out_dir);
        std::filesystem::create_directories(out);

        if (o.command == "equivalence-suite") {
            const SystemSpec s = detail::spec_for(o, false);
            const auto r = run_equivalence_suite(s.seed);
            write_json(out / "equivalence_suite.json", suite_json(r, s.seed));
            write_text(out / "equivalence_suite.csv", suite_csv(r));
            for (const auto& row : r.rows)
                log << row.name << ": weak " << format_double(row.weak_value) << (row.weak_pass ? " pass" : " fail")
                    << ", dsol " << format_double(row.dsol_value) << (row.dsol_pass ? " pass" : " fail") << "\n";
            log << "biconditional " << (r.biconditional ? "holds" : "violated") << " over " << r.rows.size()
                << " cases\n";
            return r.biconditional && r.controls_ok ? kExitPass : kExitVerdictFail;
        }

        const bool paper = o.command == "paper-example";
        if (paper) require(!o.spec_path, ErrorCode::InvalidArgument, "paper-example uses its built-in system");
        const SystemSpec s = detail::spec_for(o, !paper);
        const Analysis an = analyze_system(s);
        const Json analysis = analysis_json(s, an);

        if (o.command == "analyze") {
            write_json(out / "analysis.json", analysis);
            log << "verdict: " << to_string(an.report.verdict) << "\n" << an.report.decoupling_note << "\n";
            return detail::verdict_exit(an.report.verdict);
        }
        if (o.command == "basis") {
            const auto b = basis_report(s, an);
            write_json(out / "basis.json", b.report);
            write_text(out / "expansion.csv", b.expansion_csv);
            log << "verdict: " << to_string(an.report.verdict) << "\n";
            return an.frame ? kExitPass : kExitVerdictFail;
        }
        if (an.report.verdict != Verdict::Hyperbolic && s.u.kind == InitialKind::Transported) {
            Json j{{"command", o.command},
                   {"verdict", to_string(an.report.verdict)},
                   {"error", "transported solutions need a hyperbolic system"},
                   {"provenance", provenance(s)}};
            write_json(out / (o.command + ".json"), j);
            err << "error: transported solutions need a hyperbolic system\n";
            return kExitVerdictFail;
        }
        const auto fields = problem_fields(s, an);
        if (o.command == "solve") {
            save_fgrid(fields.u, (out / "u.fgrid").string());
            save_fgrid(fields.f, (out / "f.fgrid").string());
            write_json(out / "solve.json", Json{{"command", "solve"},
                                                {"u_l2", l2_norm(fields.u)},
                                                {"f_l2", l2_norm(fields.f)},
                                                {"points", fields.u.grid().points()},
                                                {"provenance", provenance(s)}});
            return kExitPass;
        }
        if (o.command == "verify-weak") {
            const auto w = verify_weak(fields.u, fields.f, an.A, s.seed);
            Json j{{"command", "verify-weak"}, {"weak", weak_json(w)}, {"provenance", provenance(s)}};
            write_json(out / "verify_weak.json", j);
            write_text(out / "verify_weak.csv", weak_csv(w));
            log << "weak residual " << format_double(w.residual.max_normalized) << (w.pass ? " pass" : " fail") << "\n";
            return w.pass ? kExitPass : kExitVerdictFail;
        }
        const auto d = verify_dsol(fields.u, fields.f, an, s.seed, s.h0, s.levels, s.R_inf);
        if (o.command == "verify-dsol") {
            Json j{{"command", "verify-dsol"}, {"dsol", dsol_json(d)}, {"provenance", provenance(s)}};
            write_json(out / "verify_dsol.json", j);
            write_text(out / "verify_dsol.csv", dsol_csv(d));
            log << "dsol statistic " << format_double(d.stat.pass_value) << (d.stat.pass ? " pass" : " fail") << "\n";
            return d.stat.pass ? kExitPass : kExitVerdictFail;
        }

        // paper-example
        const auto w = verify_weak(fields.u, fields.f, an.A, s.seed);
        const auto b = basis_report(s, an);
        Json known = Json::array();
        for (const auto& [xi, a] : std::vector<std::pair<Vec, Vec>>{{(Vec(2) << 1, 2).finished(), (Vec(3) << 1, 4, 8).finished()},
                                                                    {(Vec(2) << 1, -1).finished(), (Vec(3) << 1, 1, 2).finished()}}) {
            const auto m = membership_test(an.A, xi, a, s.tol);
            known.push_back(Json{{"xi", vec_to_json(xi)}, {"a", vec_to_json(a)}, {"accepted", m.accepted}, {"residual", m.residual}});
        }
        Json j{{"command", "paper-example"},
               {"analysis", analysis},
               {"known_directions", known},
               {"basis", b.report},
               {"weak", weak_json(w)},
               {"dsol", dsol_json(d)},
               {"provenance", provenance(s)}};
        write_json(out / "paper_example.json", j);
        write_text(out / "verify_weak.csv", weak_csv(w));
        write_text(out / "verify_dsol.csv", dsol_csv(d));
        log << "verdict: " << to_string(an.report.verdict) << "\n"
            << an.report.decoupling_note << "\n"
            << "weak " << format_double(w.residual.max_normalized) << ", dsol " << format_double(d.stat.pass_value)
            << "\n";
        const bool ok = an.report.verdict == Verdict::Hyperbolic && w.pass && d.stat.pass;
        return ok ? kExitPass : kExitVerdictFail;
    } catch (const FibreError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitInputError;
    }
}

}  // namespace fibretrans
