// modsr: multi-frame super-resolution of planar module images.

#include <CLI11.hpp>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "modsr/config.hpp"
#include "modsr/error.hpp"
#include "modsr/pipeline.hpp"

namespace {

struct Common {
    std::string config;
    std::vector<std::string> overrides;
    std::string out = "out";
    bool force = false;
    std::optional<std::uint64_t> seed;
    std::optional<int> magnification;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "Config file (dotted key = value)");
    cmd->add_option("--set", c.overrides, "Override a config key, key=value (repeatable)");
    cmd->add_option("--out", c.out, "Output directory")->capture_default_str();
    cmd->add_flag("--force", c.force, "Overwrite existing outputs");
    cmd->add_option("--seed", c.seed, "Random seed (same as --set seed=N)");
    cmd->add_option("--magnification", c.magnification, "Magnification factor")->check(CLI::IsMember({2, 3, 4}));
}

modsr::PipelineConfig load(const Common& c) {
    modsr::Config cfg = c.config.empty() ? modsr::Config{} : modsr::Config::from_file(c.config);
    for (const auto& o : c.overrides) cfg.apply_override(o);
    if (c.seed) cfg.set("seed", std::to_string(*c.seed));
    if (c.magnification) cfg.set("magnification", std::to_string(*c.magnification));
    return modsr::resolve_config(cfg, c.out);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Multi-frame super-resolution for planar module imagery"};
    app.require_subcommand(1);
    Common common;
    struct Sub {
        const char* name;
        const char* help;
    };
    const Sub subs[] = {
        {"synth", "Generate a synthetic module and LR frame sequence"},
        {"register", "Register frames to the module plane"},
        {"reconstruct", "Reconstruct the HR module image"},
        {"evaluate", "Compare reconstruction and bicubic baseline with ground truth"},
        {"pipeline", "Run synth, register, reconstruct, baseline and evaluate"},
    };
    for (const auto& s : subs) add_common(app.add_subcommand(s.name, s.help), common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        const modsr::PipelineConfig pc = load(common);
        const std::string cmd = app.get_subcommands().front()->get_name();
        if (cmd == "synth") modsr::cmd_synth(pc, common.force, std::cout);
        else if (cmd == "register") modsr::cmd_register(pc, common.force, std::cout);
        else if (cmd == "reconstruct") modsr::cmd_reconstruct(pc, common.force, std::cout);
        else if (cmd == "evaluate") modsr::cmd_evaluate(pc, common.force, std::cout);
        else modsr::cmd_pipeline(pc, common.force, std::cout);
    } catch (const modsr::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const modsr::DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const modsr::NumericalError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
