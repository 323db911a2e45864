// isorate command line: rates | estimate | simulate-limit | coverage | minimax.
//
// Exit codes: 0 ok, 2 config error, 3 infeasible parameters, 4 numeric diagnostic failure.

#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "isorate.hpp"

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw isorate::ConfigError("--config", "cannot read " + path);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Monotone estimation rates: rate equations, simulation and two-point experiments"};
    app.require_subcommand(1, 1);

    std::string config_path, out_dir, plot;
    std::uint64_t seed = 0, reps = 0;
    std::vector<CLI::App*> subs;
    for (const char* name : {"rates", "estimate", "simulate-limit", "coverage", "minimax"}) {
        CLI::App* s = app.add_subcommand(name, std::string("run the ") + name + " experiment");
        s->add_option("--config", config_path, "experiment JSON file")->required();
        s->add_option("--seed", seed, "override the master seed");
        s->add_option("--reps", reps, "override the replicate count");
        s->add_option("--out", out_dir, "output directory (overrides config.out)");
        s->add_option("--plot", plot, "also write plot.csv: survival | cdf | loglog-rate");
        subs.push_back(s);
    }

    CLI11_PARSE(app, argc, argv);

    const CLI::App* chosen = app.get_subcommands().front();
    try {
        isorate::ExperimentConfig cfg = isorate::parse_config(slurp(config_path));
        if (cfg.command != isorate::command_from_string(chosen->get_name()))
            throw isorate::ConfigError("command", std::string("config is for '") + isorate::to_string(cfg.command) +
                                                      "', not '" + chosen->get_name() + "'");
        if (chosen->count("--seed")) cfg.seed = seed;
        if (chosen->count("--reps")) cfg.reps = reps;
        if (chosen->count("--out")) cfg.out = out_dir;

        isorate::ResultBundle b = isorate::run(cfg);
        if (!plot.empty()) b.files["plot.csv"] = isorate::emit_plotdata(b, isorate::plot_kind_from_string(plot));
        isorate::write_bundle(b, b.config.out);
        std::cout << isorate::bundle_to_json(b)["summary"].dump(2) << "\n";
        if (b.diagnostic_failure) {
            std::cerr << "numeric diagnostic failed: " << b.diagnostics.dump() << "\n";
            return 4;
        }
        return 0;
    } catch (const isorate::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const isorate::Infeasible& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 3;
    } catch (const isorate::NumericDiagnostic& e) {
        std::cerr << "numeric diagnostic: " << e.what() << "\n";
        return 4;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
