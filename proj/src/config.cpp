#include "modsr/config.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "modsr/error.hpp"

namespace modsr {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

const std::vector<std::pair<std::string, std::string>>& defaults() {
    static const std::vector<std::pair<std::string, std::string>> table = {
        {"seed", "1"},
        {"magnification", "3"},

        {"paths.frames", "frames/frame_*.pgm"},
        {"paths.correspondences", "correspondences.txt"},
        {"paths.registration", "registration.txt"},
        {"paths.truth", "truth.pgm"},

        {"grid.y1_min", "0"},
        {"grid.y1_max", "10"},
        {"grid.y2_min", "0"},
        {"grid.y2_max", "6"},
        {"grid.lr_density", "30"},

        {"registration.levels", "3"},
        {"registration.alternations", "2"},
        {"registration.template_magnification", "2"},
        {"registration.max_iterations", "50"},
        {"registration.huber", "false"},
        {"registration.huber_delta", "0.05"},
        {"registration.refine_kappa", "true"},
        {"registration.fix_kappa_zero", "false"},
        {"registration.strict", "false"},

        {"btv.window", "2"},
        {"btv.alpha", "0.7"},
        {"btv.lambda", "auto"},
        {"btv.lambda_s2", "0.0001"},
        {"btv.lambda_s3", "0.0001"},
        {"btv.lambda_s4", "0.0001"},
        {"btv.epsilon", "0.001"},

        {"solver.max_outer", "1"},
        {"solver.max_cg", "200"},
        {"solver.grad_tol", "0.0001"},
        {"solver.robust", "false"},

        {"psf_sigma", "auto"},

        {"synth.enabled", "true"},
        {"synth.n_frames", "20"},
        {"synth.lr_width", "640"},
        {"synth.lr_height", "512"},
        {"synth.fx", "480"},
        {"synth.fy", "480"},
        {"synth.cx", "320"},
        {"synth.cy", "256"},
        {"synth.skew", "0"},
        {"synth.kappa", "0"},
        {"synth.distance", "16"},
        {"synth.jitter.translation", "0.2"},
        {"synth.jitter.rotation_deg", "2"},
        {"synth.jitter.tilt", "0.05"},
        {"synth.noise.gaussian", "0"},
        {"synth.noise.impulse", "0"},
        {"synth.correspondence_noise", "0"},
        {"synth.background", "0.05"},
        {"synth.margin", "8"},

        {"scene.cell_rows", "6"},
        {"scene.cell_cols", "10"},
        {"scene.busbar_count", "2"},
        {"scene.crack_count", "3"},
        {"scene.texture_amplitude", "0.5"},
    };
    return table;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

Config::Config() {
    for (const auto& [k, v] : defaults()) values_[k] = v;
}

Config Config::from_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    Config cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        if (trim(line).empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": expected `key = value`");
        try {
            cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return cfg;
}

void Config::apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override `" + assignment + "` is not of the form key=value");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value) {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key `" + key + "`");
    if (value.empty()) throw ConfigError("empty value for `" + key + "`");
    it->second = value;
}

const std::string& Config::get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key `" + key + "`");
    return it->second;
}

int Config::get_int(const std::string& key) const {
    const std::string& v = get(key);
    try {
        std::size_t used = 0;
        const int out = std::stoi(v, &used);
        if (used == v.size()) return out;
    } catch (const std::exception&) {
    }
    throw ConfigError("`" + key + "` expects an integer, got `" + v + "`");
}

double Config::get_double(const std::string& key) const {
    const std::string& v = get(key);
    try {
        std::size_t used = 0;
        const double out = std::stod(v, &used);
        if (used == v.size()) return out;
    } catch (const std::exception&) {
    }
    throw ConfigError("`" + key + "` expects a number, got `" + v + "`");
}

bool Config::get_bool(const std::string& key) const {
    const std::string& v = get(key);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("`" + key + "` expects true or false, got `" + v + "`");
}

std::uint64_t Config::get_seed(const std::string& key) const {
    const std::string& v = get(key);
    try {
        std::size_t used = 0;
        const unsigned long long out = std::stoull(v, &used);
        if (used == v.size() && v.front() != '-') return out;
    } catch (const std::exception&) {
    }
    throw ConfigError("`" + key + "` expects a nonnegative integer, got `" + v + "`");
}

std::string Config::serialize() const {
    std::ostringstream out;
    std::string section;
    for (const auto& [k, v] : values_) {
        const auto dot = k.find('.');
        const std::string s = dot == std::string::npos ? std::string{} : k.substr(0, dot);
        if (s != section && !out.str().empty()) out << "\n";
        section = s;
        out << k << " = " << v << "\n";
    }
    return out.str();
}

PipelineConfig resolve_config(const Config& cfg, const std::filesystem::path& out_dir) {
    PipelineConfig pc;
    pc.effective = cfg;
    pc.out_dir = out_dir;
    auto rel = [&](const std::string& key) {
        std::filesystem::path p = cfg.get(key);
        return p.is_absolute() ? p : out_dir / p;
    };
    pc.frames_glob = rel("paths.frames");
    pc.correspondences = rel("paths.correspondences");
    pc.registration = rel("paths.registration");
    pc.truth = rel("paths.truth");

    pc.magnification = cfg.get_int("magnification");
    if (pc.magnification < 2 || pc.magnification > 4)
        throw ConfigError("magnification must be 2, 3 or 4, got " + std::to_string(pc.magnification));

    const ModuleRect rect{cfg.get_double("grid.y1_min"), cfg.get_double("grid.y2_min"), cfg.get_double("grid.y1_max"),
                          cfg.get_double("grid.y2_max")};
    pc.grid = HrGridSpec::from_density(rect, cfg.get_double("grid.lr_density"), pc.magnification);

    auto& ro = pc.registration_options;
    ro.levels = cfg.get_int("registration.levels");
    ro.alternations = cfg.get_int("registration.alternations");
    ro.template_magnification = cfg.get_int("registration.template_magnification");
    ro.max_iterations = cfg.get_int("registration.max_iterations");
    ro.huber = cfg.get_bool("registration.huber");
    ro.huber_delta = cfg.get_double("registration.huber_delta");
    ro.refine_kappa = cfg.get_bool("registration.refine_kappa");
    ro.fix_kappa_zero = cfg.get_bool("registration.fix_kappa_zero");
    ro.strict = cfg.get_bool("registration.strict");
    if (ro.levels < 1 || ro.alternations < 1 || ro.template_magnification < 1 || ro.max_iterations < 1)
        throw ConfigError("registration levels, alternations, template_magnification and max_iterations must be >= 1");

    pc.btv.window = cfg.get_int("btv.window");
    pc.btv.alpha = cfg.get_double("btv.alpha");
    pc.btv.lambda = cfg.is_auto("btv.lambda") ? cfg.get_double("btv.lambda_s" + std::to_string(pc.magnification))
                                               : cfg.get_double("btv.lambda");
    pc.btv.epsilon = cfg.get_double("btv.epsilon");
    pc.btv.validate();
    pc.effective.set("btv.lambda", format_double(pc.btv.lambda));

    pc.solver.max_outer = cfg.get_int("solver.max_outer");
    pc.solver.max_cg = cfg.get_int("solver.max_cg");
    pc.solver.grad_tol = cfg.get_double("solver.grad_tol");
    pc.solver.robust_data_weights = cfg.get_bool("solver.robust");
    pc.solver.validate();

    pc.psf_sigma = cfg.is_auto("psf_sigma") ? default_psf_sigma(pc.magnification) : cfg.get_double("psf_sigma");
    if (!(pc.psf_sigma > 0.0)) throw ConfigError("psf_sigma must be positive");
    pc.effective.set("psf_sigma", format_double(pc.psf_sigma));

    const std::uint64_t seed = cfg.get_seed("seed");
    pc.run_synth = cfg.get_bool("synth.enabled");

    pc.scene.hr = pc.grid;
    pc.scene.cell_rows = cfg.get_int("scene.cell_rows");
    pc.scene.cell_cols = cfg.get_int("scene.cell_cols");
    pc.scene.busbar_count = cfg.get_int("scene.busbar_count");
    pc.scene.crack_count = cfg.get_int("scene.crack_count");
    pc.scene.texture_amplitude = cfg.get_double("scene.texture_amplitude");
    pc.scene.seed = seed;
    pc.scene.validate();

    auto& acq = pc.acquisition;
    acq.n_frames = cfg.get_int("synth.n_frames");
    acq.lr_width = cfg.get_int("synth.lr_width");
    acq.lr_height = cfg.get_int("synth.lr_height");
    acq.camera = CameraModel(cfg.get_double("synth.fx"), cfg.get_double("synth.fy"), cfg.get_double("synth.cx"),
                             cfg.get_double("synth.cy"), cfg.get_double("synth.skew"), cfg.get_double("synth.kappa"));
    acq.distance = cfg.get_double("synth.distance");
    acq.jitter.translation = cfg.get_double("synth.jitter.translation");
    acq.jitter.rotation_deg = cfg.get_double("synth.jitter.rotation_deg");
    acq.jitter.tilt = cfg.get_double("synth.jitter.tilt");
    acq.psf_sigma = pc.psf_sigma;
    acq.noise.gaussian_sigma = cfg.get_double("synth.noise.gaussian");
    acq.noise.impulse_fraction = cfg.get_double("synth.noise.impulse");
    acq.background = cfg.get_double("synth.background");
    acq.margin = cfg.get_int("synth.margin");
    // Independent streams for scene, poses/noise and correspondence noise.
    acq.seed = seed * 0x9E3779B97F4A7C15ull + 1;
    acq.validate();
    pc.correspondence_noise = cfg.get_double("synth.correspondence_noise");
    if (!(pc.correspondence_noise >= 0.0)) throw ConfigError("synth.correspondence_noise must be nonnegative");
    pc.correspondence_seed = seed * 0x9E3779B97F4A7C15ull + 2;
    return pc;
}

}  // namespace modsr
