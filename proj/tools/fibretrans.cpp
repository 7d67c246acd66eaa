#include "fibretrans/experiment.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <optional>
#include <string>

int main(int argc, char** argv) {
    using namespace fibretrans;
    CLI::App app{"Rank-one structure, exact solutions and weak/D-solution verification for constant-coefficient "
                 "first-order systems"};
    app.set_version_flag("--version", kVersion);

    RunOptions opt;
    std::string spec;
    std::string grid;
    std::string extension;
    std::optional<double> tol, h0, rinf;
    std::optional<std::uint64_t> seed;
    std::optional<int> levels;

    app.add_option("command", opt.command, "Command to run")->required()->check(CLI::IsMember(command_names()));
    app.add_option("--spec", spec, "System spec (JSON)");
    app.add_option("--out", opt.out_dir, "Output directory")->capture_default_str();
    app.add_option("--tol", tol, "Relative acceptance tolerance");
    app.add_option("--seed", seed, "Random seed");
    app.add_option("--grid", grid, "Grid cells as mt,mx");
    app.add_option("--levels", levels, "Number of h levels");
    app.add_option("--h0", h0, "Coarsest quotient step");
    app.add_option("--rinf", rinf, "Norm above which quotients count as infinite");
    app.add_option("--extension", extension, "Boundary extension")->check(CLI::IsMember({"periodic", "zero"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitInputError;
    }

    if (!spec.empty()) opt.spec_path = spec;
    opt.overrides.tol = tol;
    opt.overrides.seed = seed;
    opt.overrides.levels = levels;
    opt.overrides.h0 = h0;
    opt.overrides.R_inf = rinf;
    if (!extension.empty()) opt.overrides.extension = extension_from_string(extension);
    if (!grid.empty()) {
        int mt = 0, mx = 0;
        char comma = 0;
        std::istringstream ss(grid);
        if (!(ss >> mt >> comma >> mx) || comma != ',' || !ss.eof()) {
            std::cerr << "error: --grid expects mt,mx\n";
            return kExitInputError;
        }
        opt.overrides.grid = std::make_pair(mt, mx);
    }
    return run_command(opt);
}
