#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "modsr/observation.hpp"
#include "modsr/reconstruction.hpp"
#include "modsr/registration.hpp"
#include "modsr/synth.hpp"

namespace modsr {

/// Flat key/value configuration with dotted keys. Every key has a default;
/// unknown keys are rejected so typos fail loudly.
///
/// File syntax: one `key = value` per line, `#` starts a comment.
class Config {
public:
    Config();

    static Config from_file(const std::filesystem::path& path);

    /// `key=value`; throws ConfigError on an unknown key or missing `=`.
    void apply_override(const std::string& assignment);
    void set(const std::string& key, const std::string& value);

    const std::string& get(const std::string& key) const;
    std::string get_string(const std::string& key) const { return get(key); }
    int get_int(const std::string& key) const;
    double get_double(const std::string& key) const;
    bool get_bool(const std::string& key) const;
    std::uint64_t get_seed(const std::string& key) const;

    bool is_auto(const std::string& key) const { return get(key) == "auto"; }

    /// Serialized effective configuration, keys sorted; parses back to an equal Config.
    std::string serialize() const;

    const std::map<std::string, std::string>& values() const { return values_; }
    bool operator==(const Config& other) const { return values_ == other.values_; }

private:
    std::map<std::string, std::string> values_;
};

/// Typed view of a Config with derived defaults resolved.
struct PipelineConfig {
    std::filesystem::path out_dir;
    std::filesystem::path frames_glob;
    std::filesystem::path correspondences;
    std::filesystem::path registration;
    std::filesystem::path truth;

    int magnification = 3;
    HrGridSpec grid;
    RegistrationOptions registration_options;
    BtvParams btv;
    SolverOptions solver;
    double psf_sigma = 0.0;

    bool run_synth = true;
    SceneSpec scene;
    AcquisitionSpec acquisition;
    double correspondence_noise = 0.0;
    std::uint64_t correspondence_seed = 0;

    /// Config with every `auto` replaced by its resolved value.
    Config effective;
};

/// Validates and resolves `cfg`; relative paths are taken relative to `out_dir`.
PipelineConfig resolve_config(const Config& cfg, const std::filesystem::path& out_dir);

}  // namespace modsr
