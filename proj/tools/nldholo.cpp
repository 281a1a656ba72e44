#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "nldholo/config.hpp"
#include "nldholo/io.hpp"
#include "nldholo/metrics.hpp"
#include "nldholo/presets.hpp"
#include "nldholo/simulate.hpp"
#include "nldholo/solver.hpp"
#include "nldholo/version.hpp"

namespace fs = std::filesystem;
using namespace nldholo;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_failure = 1;
constexpr int exit_config = 2;
constexpr int exit_io = 3;
constexpr int exit_not_converged = 4;

struct Options {
    std::string config_path;
    std::string preset;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::string hologram;
    std::string volume;
    std::string scene;
    bool png = false;
    bool quiet = false;
};

struct LoadedConfig {
    RunConfig cfg;
    std::string source;
    fs::path out;
};

std::string hex64(std::uint64_t v)
{
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

std::optional<LoadedConfig> load(const Options& o, bool required)
{
    if (!o.config_path.empty() && !o.preset.empty())
        throw config_error("--config and --preset are mutually exclusive");
    LoadedConfig lc;
    if (!o.config_path.empty()) {
        if (!fs::exists(o.config_path))
            throw config_error("config file not found: " + o.config_path);
        lc.cfg = load_config(o.config_path);
        lc.source = o.config_path;
    } else if (!o.preset.empty()) {
        bool found = false;
        for (const auto& p : presets::all) {
            if (p.name == o.preset) {
                lc.cfg = parse_config(std::string(p.text), "preset:" + o.preset);
                found = true;
            }
        }
        if (!found)
            throw config_error("unknown preset '" + o.preset + "'");
        lc.source = "preset:" + o.preset;
    } else if (required) {
        throw config_error("a configuration is required (--config PATH or --preset NAME)");
    } else {
        return std::nullopt;
    }
    if (o.seed)
        lc.cfg.noise.rng_seed = *o.seed;
    if (o.png)
        lc.cfg.output.emit_png = true;
    lc.out = o.out_dir.empty() ? fs::path(lc.cfg.output.directory) : fs::path(o.out_dir);
    return lc;
}

void write_text(const fs::path& path, const std::string& text)
{
    fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
    std::ofstream out(path);
    if (!out)
        throw io_error("cannot write " + path.string());
    out << text;
    if (!out)
        throw io_error("short write to " + path.string());
}

/// Run manifest: enough to repeat the run (the config echo sits next to it).
void write_manifest(const fs::path& dir, const std::string& command, const std::string& source, const RunConfig* cfg,
                    const std::vector<std::pair<std::string, std::string>>& extra)
{
    std::ostringstream os;
    os << "format = nldholo-manifest\n"
       << "manifest_version = " << manifest_format_version << "\n"
       << "tool_version = " << version << "\n"
       << "raster_format_version = " << raster_format_version << "\n"
       << "command = " << command << "\n";
    if (cfg) {
        const auto text = to_text(*cfg);
        os << "config_source = " << source << "\n"
           << "config_echo = config.cfg\n"
           << "config_fnv1a64 = " << hex64(fnv1a64(text)) << "\n"
           << "seed = " << cfg->noise.rng_seed << "\n";
        write_text(dir / "config.cfg", text);
    }
    for (const auto& [k, v] : extra)
        os << k << " = " << v << "\n";
    write_text(dir / ("manifest_" + command + ".txt"), os.str());
}

void log(const Options& o, const std::string& msg)
{
    if (!o.quiet)
        std::cerr << msg << "\n";
}

SceneManifest scene_of(const RunConfig& c) { return {c.grid, c.depth, c.mask, c.particles}; }

void simulate_into(const LoadedConfig& lc, const Options& o)
{
    const auto& c = lc.cfg;
    const FresnelOperator op(c.grid, c.depth);
    const auto vol = build_scene_volume(Scene{c.grid, c.particles}, c.depth, c.mask);
    auto holo = form_hologram(vol, op);
    if (c.noise.enabled)
        holo = add_noise(holo, c.noise);
    write_hologram(lc.out / "hologram", holo);
    write_scene_manifest(lc.out / "scene.txt", scene_of(c));
    if (c.output.emit_png) {
        double lo = holo[0], hi = holo[0];
        for (double v : holo.values()) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        std::vector<unsigned char> px(holo.size());
        for (std::size_t i = 0; i < holo.size(); ++i)
            px[i] = hi > lo ? static_cast<unsigned char>(std::lround(255.0 * (holo[i] - lo) / (hi - lo))) : 0;
        write_png_gray(lc.out / "hologram.png", holo.nx(), holo.ny(), px);
    }
    write_manifest(lc.out, "simulate", lc.source, &c,
                   {{"hologram", "hologram.raw"}, {"scene", "scene.txt"}, {"noise_enabled", c.noise.enabled ? "true" : "false"}});
    log(o, "simulate: wrote " + (lc.out / "hologram.raw").string());
}

/// Returns true when the solver converged.
bool reconstruct_into(const LoadedConfig& lc, const Options& o, const fs::path& hologram)
{
    const auto& c = lc.cfg;
    const auto holo = read_hologram(hologram);
    if (!(holo.grid() == c.grid))
        throw io_error(hologram.string() + ": hologram grid does not match the configuration");
    const auto t0 = std::chrono::steady_clock::now();
    const auto m = linearize(holo);
    auto res = solve(m, c.depth, c.solver, [&](const TraceRecord& r) {
        if (!o.quiet && r.iter % 25 == 0)
            std::cerr << "  iter " << r.iter << "  objective " << r.objective << "  step " << r.step_size << "\n";
    });
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_volume(lc.out / "volume", res.volume, res.scale);
    write_trace_csv(lc.out / "trace.csv", res.trace);
    const auto& last = res.trace.records.back();
    write_manifest(lc.out, "reconstruct", lc.source, &c,
                   {{"hologram_input", hologram.string()},
                    {"volume", "volume.raw"},
                    {"trace", "trace.csv"},
                    {"stop_reason", to_string(res.reason)},
                    {"converged", res.converged() ? "true" : "false"},
                    {"iterations", std::to_string(res.iterations)},
                    {"accepted_iterations", std::to_string(res.trace.records.size() - 1)},
                    {"final_objective", format_number(last.objective)},
                    {"final_step_size", format_number(last.step_size)},
                    {"normalization_scale", format_number(res.scale)},
                    {"solve_seconds", format_number(secs)}});
    log(o, "reconstruct: " + to_string(res.reason) + " after " + std::to_string(res.iterations) + " iterations");
    return res.converged();
}

void analyze_into(const fs::path& out, const Options& o, const fs::path& volume_path, const fs::path& scene_path,
                  const std::optional<LoadedConfig>& lc)
{
    const auto vf = read_volume(volume_path);
    const auto& v = vf.volume;
    const double z_scale = v.grid().pixel_pitch / v.depth().dz;
    const auto intensity = max_intensity_curve(v);
    const auto gradient = max_gradient_curve(v, z_scale);
    write_curve_csv(out / "curve_max_intensity.csv", intensity);
    write_curve_csv(out / "curve_max_gradient.csv", gradient);

    const bool emit_png = o.png || (lc && lc->cfg.output.emit_png);
    const bool emit_slices = lc && lc->cfg.output.emit_slices;
    if (emit_png) {
        write_curve_png(out / "curve_max_intensity.png", intensity);
        write_curve_png(out / "curve_max_gradient.png", gradient);
    }
    if (emit_slices) {
        for (std::size_t iz = 0; iz < v.nz(); ++iz) {
            std::ostringstream name;
            name << "slice_" << std::setw(3) << std::setfill('0') << iz << ".png";
            write_slice_png(out / "slices" / name.str(), v, iz);
        }
    }

    std::vector<std::pair<std::string, std::string>> extra{{"volume_input", volume_path.string()},
                                                           {"curve_max_intensity", "curve_max_intensity.csv"},
                                                           {"curve_max_gradient", "curve_max_gradient.csv"}};
    if (fs::exists(scene_path)) {
        const auto scene = read_scene_manifest(scene_path);
        const std::size_t min_sep = lc ? lc->cfg.min_separation : 5;
        const auto rep = build_report(gradient, true_slices(scene, v.depth()), min_sep);
        write_report(out / "report.txt", rep, gradient);
        extra.push_back({"scene_input", scene_path.string()});
        extra.push_back({"report", "report.txt"});
        for (const auto& p : rep.particles) {
            std::ostringstream msg;
            msg << "analyze: true slice " << p.true_slice << " -> "
                << (p.detected ? "detected " + std::to_string(p.detected_slice) : std::string("not detected"));
            log(o, msg.str());
        }
    } else {
        std::cerr << "warning: scene manifest " << scene_path.string() << " not found; report skipped\n";
    }
    write_manifest(out, "analyze", lc ? lc->source : std::string(), lc ? &lc->cfg : nullptr, extra);
}

int run(const std::string& command, const Options& o)
{
    if (command == "simulate") {
        const auto lc = *load(o, true);
        simulate_into(lc, o);
        return exit_ok;
    }
    if (command == "reconstruct") {
        const auto lc = *load(o, true);
        const fs::path holo = o.hologram.empty() ? lc.out / "hologram" : fs::path(o.hologram);
        return reconstruct_into(lc, o, holo) ? exit_ok : exit_not_converged;
    }
    if (command == "analyze") {
        const auto lc = load(o, false);
        const fs::path out = !o.out_dir.empty() ? fs::path(o.out_dir) : lc ? lc->out : fs::path(".");
        const fs::path volume = o.volume.empty() ? out / "volume" : fs::path(o.volume);
        const fs::path scene = o.scene.empty() ? out / "scene.txt" : fs::path(o.scene);
        analyze_into(out, o, volume, scene, lc);
        return exit_ok;
    }
    // pipeline
    const auto lc = *load(o, true);
    simulate_into(lc, o);
    const bool converged = reconstruct_into(lc, o, lc.out / "hologram");
    analyze_into(lc.out, o, lc.out / "volume", lc.out / "scene.txt", lc);
    write_manifest(lc.out, "pipeline", lc.source, &lc.cfg, {{"converged", converged ? "true" : "false"}});
    return converged ? exit_ok : exit_not_converged;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"In-line hologram simulation and nonlinear-diffusion reconstruction"};
    app.set_version_flag("--version", std::string(version));
    app.require_subcommand(1);

    Options o;
    auto add_common = [&](CLI::App* sub, bool with_seed) {
        sub->add_option("--config", o.config_path, "Configuration file");
        std::string names;
        for (const auto& p : presets::all)
            names += (names.empty() ? "" : "|") + std::string(p.name);
        sub->add_option("--preset", o.preset, "Built-in configuration: " + names);
        sub->add_option("--out", o.out_dir, "Output directory (default: outputs.directory)");
        if (with_seed)
            sub->add_option("--seed", o.seed, "Noise seed, overrides noise.seed");
        sub->add_flag("--png", o.png, "Also write PNG previews");
        sub->add_flag("-q,--quiet", o.quiet, "Suppress progress messages");
    };
    auto* sim = app.add_subcommand("simulate", "Synthesize a hologram and its scene manifest");
    add_common(sim, true);
    auto* rec = app.add_subcommand("reconstruct", "Reconstruct a volume from a hologram");
    add_common(rec, true);
    rec->add_option("--hologram", o.hologram, "Hologram raster (default: OUT/hologram)");
    auto* ana = app.add_subcommand("analyze", "Focus curves and localization report for a volume");
    add_common(ana, true);
    ana->add_option("--volume", o.volume, "Volume raster (default: OUT/volume)");
    ana->add_option("--scene", o.scene, "Scene manifest (default: OUT/scene.txt)");
    auto* pipe = app.add_subcommand("pipeline", "simulate, reconstruct and analyze in one directory");
    add_common(pipe, true);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? exit_ok : exit_config;
    }

    try {
        return run(app.get_subcommands().front()->get_name(), o);
    } catch (const config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return exit_config;
    } catch (const io_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return exit_io;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return exit_io;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_failure;
    }
}
