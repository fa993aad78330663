// illposed-iter: experiment runner for the iteration engines.
//
//   illposed-iter <run|rates|noise|compare|oracle-check> --config <path>
//                 [--set section.key=value]... [--out <path>] [--jobs N]
//                 [--dry-run]

#include <string>
#include <vector>

#include <CLI11.hpp>

#include "illposed/cli/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"iteration methods for ill-posed operator equations"};
    app.require_subcommand(1);

    struct SubArgs {
        std::string config;
        std::vector<std::string> sets;
        std::string out;
        int jobs = 1;
        bool dry_run = false;
    };

    const std::vector<std::pair<std::string, illposed::cli::ExperimentKind>> kinds = {
        {"run", illposed::cli::ExperimentKind::run},
        {"rates", illposed::cli::ExperimentKind::rates},
        {"noise", illposed::cli::ExperimentKind::noise},
        {"compare", illposed::cli::ExperimentKind::compare},
        {"oracle-check", illposed::cli::ExperimentKind::oracle_check},
    };
    const std::vector<std::string> descriptions = {
        "run one iteration and write the diagnostics CSV",
        "tabulate gamma_n: numeric, closed form, asymptotic",
        "sweep noise levels: best error, stopping rule",
        "side-by-side gamma_n table with fitted (C, p) per scheme",
        "validate the spectral engine against the dense oracle",
    };

    std::vector<SubArgs> args(kinds.size());
    for (std::size_t i = 0; i < kinds.size(); ++i) {
        CLI::App* sub = app.add_subcommand(kinds[i].first, descriptions[i]);
        sub->add_option("--config", args[i].config, "experiment config file")->required();
        sub->add_option("--set", args[i].sets, "override: section.key=value");
        sub->add_option("--out", args[i].out, "output CSV path (overrides config)");
        sub->add_option("--jobs", args[i].jobs, "max concurrent sweep rows")
            ->check(CLI::PositiveNumber);
        sub->add_flag("--dry-run", args[i].dry_run, "print the resolved config, write nothing");
    }

    CLI11_PARSE(app, argc, argv);

    for (std::size_t i = 0; i < kinds.size(); ++i) {
        if (app.get_subcommand(kinds[i].first)->parsed()) {
            illposed::cli::CommandOptions opts;
            if (!args[i].out.empty()) opts.out_override = args[i].out;
            opts.jobs = args[i].jobs;
            opts.dry_run = args[i].dry_run;
            return illposed::cli::dispatch(kinds[i].second, args[i].config, args[i].sets, opts);
        }
    }
    return illposed::cli::exit_validation;
}
