#include "tftsim/errors.hpp"
#include "tftsim/experiments.hpp"
#include "tftsim/io.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumeric = 3, kInternal = 4 };

struct Invocation {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<int> threads;
    std::optional<std::string> out;
};

} // namespace

int main(int argc, char** argv)
{
    using namespace tft;
    CLI::App app{"Tunable-coupler CZ gate simulator"};
    app.set_version_flag("--version", tftsim_version());
    app.require_subcommand(1);

    std::string schema_out;
    auto* schema = app.add_subcommand("schema", "print the JSON Schema of configuration files");
    schema->add_option("-o,--output", schema_out, "write to a file instead of stdout");

    auto* list = app.add_subcommand("list", "list experiments and their parameters");

    std::map<std::string, CLI::App*> subs;
    Invocation inv;
    for (const auto& def : experiment_registry()) {
        auto* s = app.add_subcommand(def.name, def.description);
        s->add_option("-c,--config", inv.config, "configuration file (JSON)")->required()->check(CLI::ExistingFile);
        s->add_option("--seed", inv.seed, "random seed (overrides the file)");
        s->add_option("--threads", inv.threads, "worker threads (overrides the file)")->check(CLI::PositiveNumber);
        s->add_option("-o,--out", inv.out, "output directory (overrides the file)");
        subs[def.name] = s;
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kConfig;
    }

    try {
        if (schema->parsed()) {
            const std::string text = config_schema(experiment_registry()).dump(2) + "\n";
            if (schema_out.empty())
                std::cout << text;
            else
                write_text(schema_out, text);
            return kOk;
        }
        if (list->parsed()) {
            for (const auto& def : experiment_registry()) {
                std::cout << def.name << (def.stochastic ? " (needs seed)" : "") << "\n  " << def.description << "\n";
                for (const auto& p : def.params)
                    std::cout << "    " << p.name << " = "
                              << (p.default_value.is_null() ? (p.optional ? "(unset)" : "(required)")
                                                            : p.default_value.dump())
                              << "  " << p.description << "\n";
            }
            return kOk;
        }
        for (const auto& [name, s] : subs) {
            if (!s->parsed())
                continue;
            const RunConfig rc =
                load_config(inv.config, name, experiment_registry(), CliOverrides{inv.seed, inv.threads, inv.out});
            const Json manifest = run_experiment(rc);
            std::cout << name << ": wrote";
            for (const auto& o : manifest["outputs"])
                std::cout << ' ' << o["file"].get<std::string>();
            std::cout << " to " << rc.out_dir << " (" << fmt_num(manifest["wall_time_s"].get<double>()) << " s)\n";
            return kOk;
        }
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return kConfig;
    } catch (const NumericError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        return kNumeric;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kInternal;
    }
    return kInternal;
}
