#pragma once

// Run configuration: a flat `section.key = value` file.  Unknown or
// repeated keys are errors (except `scene.particle`, which lists one
// particle per line as `cx_um, cy_um, z_um, diameter_um`).

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nldholo/io.hpp"
#include "nldholo/simulate.hpp"
#include "nldholo/solver.hpp"

namespace nldholo {

class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct OutputOptions {
    std::string directory = "run";
    bool emit_png = false;
    bool emit_slices = false;
};

struct RunConfig {
    OpticalGrid grid{256, 256, 2.0, 0.66};
    DepthAxis depth{4338.0, 20.0, 101};
    std::vector<Particle> particles;
    MaskOptions mask;
    NoiseSpec noise;
    SolverConfig solver;
    OutputOptions output;
    std::size_t min_separation = 5;

    double z_scale() const { return grid.pixel_pitch / depth.dz; }
};

namespace detail {

inline bool parse_bool(const std::string& v)
{
    if (v == "true" || v == "on" || v == "yes" || v == "1")
        return true;
    if (v == "false" || v == "off" || v == "no" || v == "0")
        return false;
    throw std::invalid_argument("expected a boolean (true/false)");
}

inline double parse_double(const std::string& v)
{
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size())
        throw std::invalid_argument("trailing characters after number");
    return d;
}

inline std::uint64_t parse_unsigned(const std::string& v)
{
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
        throw std::invalid_argument("expected a non-negative integer");
    return std::stoull(v);
}

inline Particle parse_particle(const std::string& v)
{
    std::vector<double> fields;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ','))
        fields.push_back(parse_double(trim(item)));
    if (fields.size() != 4 && fields.size() != 5)
        throw std::invalid_argument("particle needs cx_um, cy_um, z_um, diameter_um[, refractive_index]");
    Particle p{fields[0], fields[1], fields[2], fields[3]};
    if (fields.size() == 5)
        p.refractive_index = fields[4];
    return p;
}

} // namespace detail

inline RunConfig parse_config(const std::string& text, const std::string& source = "<config>")
{
    RunConfig cfg;
    bool have_wavelength = false;
    std::vector<std::size_t> particle_lines;

    using Setter = std::function<void(const std::string&)>;
    auto size_of = [](const std::string& v) { return static_cast<std::size_t>(detail::parse_unsigned(v)); };
    const std::map<std::string, Setter> setters = {
        {"grid.nx", [&](const std::string& v) { cfg.grid.nx = size_of(v); }},
        {"grid.ny", [&](const std::string& v) { cfg.grid.ny = size_of(v); }},
        {"grid.pixel_pitch_um", [&](const std::string& v) { cfg.grid.pixel_pitch = detail::parse_double(v); }},
        {"grid.wavelength_um",
         [&](const std::string& v) {
             if (have_wavelength)
                 throw std::invalid_argument("wavelength given twice");
             cfg.grid.wavelength = detail::parse_double(v);
             have_wavelength = true;
         }},
        {"grid.wavelength_nm",
         [&](const std::string& v) {
             if (have_wavelength)
                 throw std::invalid_argument("wavelength given twice");
             cfg.grid.wavelength = detail::parse_double(v) * 1e-3;
             have_wavelength = true;
         }},
        {"depth.z0_um", [&](const std::string& v) { cfg.depth.z0 = detail::parse_double(v); }},
        {"depth.dz_um", [&](const std::string& v) { cfg.depth.dz = detail::parse_double(v); }},
        {"depth.nz", [&](const std::string& v) { cfg.depth.nz = size_of(v); }},
        {"scene.model",
         [&](const std::string& v) {
             if (v == "disk")
                 cfg.mask.model = ParticleModel::disk;
             else if (v == "ring")
                 cfg.mask.model = ParticleModel::ring;
             else
                 throw std::invalid_argument("model must be disk or ring");
         }},
        {"scene.rim_gain", [&](const std::string& v) { cfg.mask.rim_gain = detail::parse_double(v); }},
        {"scene.particle", [&](const std::string& v) { cfg.particles.push_back(detail::parse_particle(v)); }},
        {"noise.enabled", [&](const std::string& v) { cfg.noise.enabled = detail::parse_bool(v); }},
        {"noise.gaussian_fraction",
         [&](const std::string& v) { cfg.noise.gaussian_fraction = detail::parse_double(v); }},
        {"noise.photons_per_pixel",
         [&](const std::string& v) { cfg.noise.photons_per_pixel = detail::parse_double(v); }},
        {"noise.seed", [&](const std::string& v) { cfg.noise.rng_seed = detail::parse_unsigned(v); }},
        {"solver.tau", [&](const std::string& v) { cfg.solver.tau = detail::parse_double(v); }},
        {"solver.k0", [&](const std::string& v) { cfg.solver.diffusion.k0 = detail::parse_double(v); }},
        {"solver.epsilon", [&](const std::string& v) { cfg.solver.diffusion.epsilon = detail::parse_double(v); }},
        {"solver.stop_threshold", [&](const std::string& v) { cfg.solver.stop_threshold = detail::parse_double(v); }},
        {"solver.max_iters", [&](const std::string& v) { cfg.solver.max_iters = size_of(v); }},
        {"solver.step_init", [&](const std::string& v) { cfg.solver.step_init = detail::parse_double(v); }},
        {"solver.step_decay", [&](const std::string& v) { cfg.solver.step_decay = detail::parse_double(v); }},
        {"solver.normalize_input", [&](const std::string& v) { cfg.solver.normalize_input = detail::parse_bool(v); }},
        {"solver.kind",
         [&](const std::string& v) {
             if (v == "hwnld")
                 cfg.solver.diffusion.kind = DiffusionKind::hwnld;
             else if (v == "tv")
                 cfg.solver.diffusion.kind = DiffusionKind::tv;
             else
                 throw std::invalid_argument("kind must be hwnld or tv");
         }},
        {"outputs.directory", [&](const std::string& v) { cfg.output.directory = v; }},
        {"outputs.emit_png", [&](const std::string& v) { cfg.output.emit_png = detail::parse_bool(v); }},
        {"outputs.emit_slices", [&](const std::string& v) { cfg.output.emit_slices = detail::parse_bool(v); }},
        {"analysis.min_separation", [&](const std::string& v) { cfg.min_separation = size_of(v); }},
    };

    auto fail = [&](std::size_t line, const std::string& msg) -> config_error {
        return config_error(source + ":" + std::to_string(line) + ": " + msg);
    };

    std::set<std::string> seen;
    std::istringstream in(text);
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = detail::trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw fail(line_no, "expected 'key = value'");
        const auto key = detail::trim(line.substr(0, eq));
        const auto value = detail::trim(line.substr(eq + 1));
        const auto it = setters.find(key);
        if (it == setters.end())
            throw fail(line_no, "unknown key '" + key + "'");
        if (key != "scene.particle" && !seen.insert(key).second)
            throw fail(line_no, "key '" + key + "' given more than once");
        if (value.empty())
            throw fail(line_no, "key '" + key + "' has no value");
        try {
            it->second(value);
        } catch (const std::exception& e) {
            throw fail(line_no, key + ": " + e.what());
        }
        if (key == "scene.particle")
            particle_lines.push_back(line_no);
    }

    try {
        cfg.grid.validate();
        cfg.depth.validate();
        cfg.noise.validate();
        cfg.solver.diffusion.z_scale = cfg.z_scale();
        cfg.solver.validate();
        if (cfg.mask.rim_gain < 0.0)
            throw domain_error("rim_gain must be >= 0");
    } catch (const std::exception& e) {
        throw config_error(source + ": " + e.what());
    }
    for (std::size_t i = 0; i < cfg.particles.size(); ++i) {
        try {
            const auto& p = cfg.particles[i];
            particle_mask(p, cfg.grid, cfg.mask);
            if (!cfg.depth.contains(p.z))
                throw domain_error("particle z lies outside the depth range");
        } catch (const std::exception& e) {
            throw fail(particle_lines[i], std::string("scene.particle: ") + e.what());
        }
    }
    return cfg;
}

inline RunConfig load_config(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw io_error("cannot open config " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), path.string());
}

/// Canonical text form; parse_config(to_text(c)) reproduces c.
inline std::string to_text(const RunConfig& c)
{
    std::ostringstream os;
    auto b = [](bool v) { return v ? "true" : "false"; };
    os << "grid.nx = " << c.grid.nx << "\n"
       << "grid.ny = " << c.grid.ny << "\n"
       << "grid.pixel_pitch_um = " << format_number(c.grid.pixel_pitch) << "\n"
       << "grid.wavelength_um = " << format_number(c.grid.wavelength) << "\n"
       << "depth.z0_um = " << format_number(c.depth.z0) << "\n"
       << "depth.dz_um = " << format_number(c.depth.dz) << "\n"
       << "depth.nz = " << c.depth.nz << "\n"
       << "scene.model = " << to_string(c.mask.model) << "\n"
       << "scene.rim_gain = " << format_number(c.mask.rim_gain) << "\n";
    for (const auto& p : c.particles)
        os << "scene.particle = " << format_number(p.cx) << ", " << format_number(p.cy) << ", "
           << format_number(p.z) << ", " << format_number(p.diameter) << ", " << format_number(p.refractive_index)
           << "\n";
    os << "noise.enabled = " << b(c.noise.enabled) << "\n"
       << "noise.gaussian_fraction = " << format_number(c.noise.gaussian_fraction) << "\n"
       << "noise.photons_per_pixel = " << format_number(c.noise.photons_per_pixel) << "\n"
       << "noise.seed = " << c.noise.rng_seed << "\n"
       << "solver.tau = " << format_number(c.solver.tau) << "\n"
       << "solver.k0 = " << format_number(c.solver.diffusion.k0) << "\n"
       << "solver.epsilon = " << format_number(c.solver.diffusion.epsilon) << "\n"
       << "solver.stop_threshold = " << format_number(c.solver.stop_threshold) << "\n"
       << "solver.max_iters = " << c.solver.max_iters << "\n"
       << "solver.step_init = " << format_number(c.solver.step_init) << "\n"
       << "solver.step_decay = " << format_number(c.solver.step_decay) << "\n"
       << "solver.normalize_input = " << b(c.solver.normalize_input) << "\n"
       << "solver.kind = " << to_string(c.solver.diffusion.kind) << "\n"
       << "outputs.directory = " << c.output.directory << "\n"
       << "outputs.emit_png = " << b(c.output.emit_png) << "\n"
       << "outputs.emit_slices = " << b(c.output.emit_slices) << "\n"
       << "analysis.min_separation = " << c.min_separation << "\n";
    return os.str();
}

/// 64-bit FNV-1a, used to fingerprint the canonical config in manifests.
inline std::uint64_t fnv1a64(const std::string& s)
{
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace nldholo
