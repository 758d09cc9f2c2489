// Command-line front end: cpitk <subcommand> --config PATH [options]

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "cpitk/error.hpp"
#include "cpitk/pipeline.hpp"

int main(int argc, char** argv) {
    using namespace cpitk;

    CLI::App app{"CPI forecasting toolkit"};
    app.set_version_flag("--version", std::string(pipeline::kVersion));
    app.require_subcommand(1, 1);

    std::string config_path;
    std::string out_dir;
    int threads = 0;
    std::uint64_t seed = 0;
    bool fast = false;

    for (const auto& name : pipeline::subcommands()) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config_path, "JSON config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--out", out_dir, "output directory (overrides the config)");
        sub->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--seed", seed, "optimizer restart seed");
        sub->add_flag("--fast", fast, "refit every 6 months in backtests and the forecast criterion");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    const std::string name = app.get_subcommands().front()->get_name();
    try {
        auto config = pipeline::load_config(config_path);
        if (!out_dir.empty()) config.output_dir = out_dir;
        if (threads > 0) config.threads = threads;
        if (app.get_subcommands().front()->count("--seed") > 0) config.seed = seed;
        config.fast = fast;
        pipeline::run_subcommand(name, config, std::cerr);
    } catch (const DataError& e) {
        std::cerr << "cpitk " << name << ": data error: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        std::cerr << "cpitk " << name << ": numerical failure: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
