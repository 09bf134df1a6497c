// koopman: spectral analysis of dynamical systems from trajectory data.
//
// koopman <command> [--system NAME | --input PATH] [--params k=v,...]
//                   [--out PATH] [--format csv|json]
//
// Exit codes: 0 success, 1 input error, 2 numerical failure,
//             3 non-convergence (results still written).

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "koopman/cli.hpp"

namespace {

struct CommandSpec {
    const char* name;
    const char* help;
};

constexpr CommandSpec kCommands[] = {
    {"simulate", "generate a trajectory of a built-in map or flow"},
    {"dmd", "dynamic mode decomposition of a snapshot sequence"},
    {"gla", "generalized Laplace analysis / Fourier-average projections"},
    {"average", "ergodic or Fourier averages of an observable over seeds"},
    {"quotient", "ergodic-quotient embedding via Sobolev distances and diffusion maps"},
    {"indicator", "ergodicity and mixing indicator series"},
    {"search", "greedy spectral-coverage trajectory planning"},
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Koopman-operator spectral analysis toolkit"};
    app.set_version_flag("--version", std::string("koopman ") + koopman::cli::tool_version);
    app.require_subcommand(1);

    koopman::cli::RunConfig cfg;
    std::vector<std::string> param_args;
    std::string format = "csv";

    for (const auto& spec : kCommands) {
        auto* sub = app.add_subcommand(spec.name, spec.help);
        sub->add_option("--system", cfg.system, "built-in system name");
        sub->add_option("--input", cfg.input, "input data file (csv or json)");
        sub->add_option("--params", param_args, "comma-separated k=v parameters")
            ->take_all();
        sub->add_option("--out", cfg.out, "output path (default: stdout)");
        sub->add_option("--format", format, "csv or json")
            ->check(CLI::IsMember({"csv", "json"}));
        sub->callback([&cfg, spec]() { cfg.command = spec.name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;  // --help/--version exit 0, any parse error is input error
    }

    try {
        cfg.format = koopman::io::format_from_string(format);
        for (const auto& arg : param_args) {
            for (const auto& pair : koopman::io::detail::split(arg, ',')) {
                if (pair.empty()) continue;
                auto eq = pair.find('=');
                if (eq == std::string::npos)
                    throw koopman::input_error("parameters are k=v pairs, got '" + pair + "'");
                cfg.params[pair.substr(0, eq)] = pair.substr(eq + 1);
            }
        }
        auto bundle = koopman::cli::run(cfg);
        return koopman::cli::finish(cfg, bundle);
    } catch (const koopman::input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const koopman::divergence_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const koopman::numerical_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
