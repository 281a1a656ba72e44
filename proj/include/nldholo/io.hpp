#pragma once

// On-disk formats.
//
// Rasters are a little-endian float32 payload (`<stem>.raw`; complex
// volumes interleave re, im) plus a text sidecar (`<stem>.hdr`) of
// `key = value` lines describing shape and optics.  CSV files carry the
// convergence trace and focus curves; reports and scene manifests are
// flat `key = value` text.

#include <png.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "nldholo/field_core.hpp"
#include "nldholo/metrics.hpp"
#include "nldholo/simulate.hpp"
#include "nldholo/solver.hpp"

namespace nldholo {

inline constexpr int raster_format_version = 1;

class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Round-trip formatting for doubles in text files.
inline std::string format_number(double v)
{
    if (std::isnan(v))
        return "nan";
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

namespace detail {

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

/// Parses `key = value` lines; '#' starts a comment.  Later keys overwrite
/// earlier ones.
inline std::map<std::string, std::string> read_key_values(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw io_error("cannot open " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        if (auto hash = line.find('#'); hash != std::string::npos)
            line.erase(hash);
        line = trim(line);
        if (line.empty())
            continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw io_error(path.string() + ": malformed line '" + line + "'");
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

inline const std::string& require(const std::map<std::string, std::string>& kv, const std::string& key,
                                  const std::filesystem::path& src)
{
    auto it = kv.find(key);
    if (it == kv.end())
        throw io_error(src.string() + ": missing key '" + key + "'");
    return it->second;
}

inline double require_number(const std::map<std::string, std::string>& kv, const std::string& key,
                             const std::filesystem::path& src)
{
    const auto& s = require(kv, key, src);
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size())
            throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw io_error(src.string() + ": key '" + key + "' is not a number");
    }
}

inline std::size_t require_count(const std::map<std::string, std::string>& kv, const std::string& key,
                                 const std::filesystem::path& src)
{
    const double v = require_number(kv, key, src);
    if (!(v >= 0.0) || v != std::floor(v))
        throw io_error(src.string() + ": key '" + key + "' must be a non-negative integer");
    return static_cast<std::size_t>(v);
}

inline void write_floats(const std::filesystem::path& path, const std::vector<float>& values)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw io_error("cannot write " + path.string());
    std::vector<unsigned char> bytes(values.size() * 4);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const auto u = std::bit_cast<std::uint32_t>(values[i]);
        for (int b = 0; b < 4; ++b)
            bytes[4 * i + static_cast<std::size_t>(b)] = static_cast<unsigned char>((u >> (8 * b)) & 0xffu);
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw io_error("short write to " + path.string());
}

inline std::vector<float> read_floats(const std::filesystem::path& path, std::size_t count)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw io_error("cannot open " + path.string());
    std::vector<unsigned char> bytes(count * 4);
    in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (in.gcount() != static_cast<std::streamsize>(bytes.size()))
        throw io_error(path.string() + ": payload shorter than header says");
    if (in.peek() != std::char_traits<char>::eof())
        throw io_error(path.string() + ": payload longer than header says");
    std::vector<float> values(count);
    for (std::size_t i = 0; i < count; ++i) {
        std::uint32_t u = 0;
        for (int b = 0; b < 4; ++b)
            u |= static_cast<std::uint32_t>(bytes[4 * i + static_cast<std::size_t>(b)]) << (8 * b);
        values[i] = std::bit_cast<float>(u);
    }
    return values;
}

inline void ensure_parent(const std::filesystem::path& p)
{
    if (p.has_parent_path())
        std::filesystem::create_directories(p.parent_path());
}

} // namespace detail

inline std::filesystem::path raw_path(const std::filesystem::path& stem)
{
    auto p = stem;
    p += ".raw";
    return p;
}

inline std::filesystem::path header_path(const std::filesystem::path& stem)
{
    auto p = stem;
    p += ".hdr";
    return p;
}

/// Accepts a stem, `<stem>.hdr` or `<stem>.raw`.
inline std::filesystem::path raster_stem(std::filesystem::path p)
{
    if (p.extension() == ".hdr" || p.extension() == ".raw")
        p.replace_extension();
    return p;
}

struct RasterHeader {
    std::string kind;    // hologram | volume
    std::string element; // float32 | complex64
    OpticalGrid grid;
    DepthAxis depth;
    double scale = 1.0;
    int version = raster_format_version;
};

inline void write_header(const std::filesystem::path& path, const RasterHeader& h)
{
    std::ofstream out(path);
    if (!out)
        throw io_error("cannot write " + path.string());
    out << "format = nldholo-raster\n"
        << "version = " << h.version << "\n"
        << "kind = " << h.kind << "\n"
        << "element = " << h.element << "\n"
        << "byte_order = little\n"
        << "nx = " << h.grid.nx << "\n"
        << "ny = " << h.grid.ny << "\n"
        << "nz = " << h.depth.nz << "\n"
        << "pixel_pitch_um = " << format_number(h.grid.pixel_pitch) << "\n"
        << "wavelength_um = " << format_number(h.grid.wavelength) << "\n"
        << "z0_um = " << format_number(h.depth.z0) << "\n"
        << "dz_um = " << format_number(h.depth.dz) << "\n"
        << "scale = " << format_number(h.scale) << "\n";
    if (!out)
        throw io_error("short write to " + path.string());
}

inline RasterHeader read_header(const std::filesystem::path& path)
{
    const auto kv = detail::read_key_values(path);
    if (detail::require(kv, "format", path) != "nldholo-raster")
        throw io_error(path.string() + ": not an nldholo raster header");
    RasterHeader h;
    h.version = static_cast<int>(detail::require_count(kv, "version", path));
    if (h.version != raster_format_version)
        throw io_error(path.string() + ": unsupported raster version " + std::to_string(h.version));
    h.kind = detail::require(kv, "kind", path);
    h.element = detail::require(kv, "element", path);
    if (auto it = kv.find("byte_order"); it != kv.end() && it->second != "little")
        throw io_error(path.string() + ": only little-endian payloads are supported");
    h.grid.nx = detail::require_count(kv, "nx", path);
    h.grid.ny = detail::require_count(kv, "ny", path);
    h.depth.nz = detail::require_count(kv, "nz", path);
    h.grid.pixel_pitch = detail::require_number(kv, "pixel_pitch_um", path);
    h.grid.wavelength = detail::require_number(kv, "wavelength_um", path);
    h.depth.z0 = detail::require_number(kv, "z0_um", path);
    h.depth.dz = detail::require_number(kv, "dz_um", path);
    h.scale = detail::require_number(kv, "scale", path);
    try {
        h.grid.validate();
        h.depth.validate();
    } catch (const domain_error& e) {
        throw io_error(path.string() + ": " + e.what());
    }
    return h;
}

inline void write_hologram(const std::filesystem::path& stem, const Hologram& h)
{
    detail::ensure_parent(stem);
    std::vector<float> payload(h.size());
    for (std::size_t i = 0; i < h.size(); ++i)
        payload[i] = static_cast<float>(h[i]);
    detail::write_floats(raw_path(stem), payload);
    write_header(header_path(stem), {"hologram", "float32", h.grid(), DepthAxis{}, 1.0});
}

inline Hologram read_hologram(const std::filesystem::path& stem_or_file)
{
    const auto stem = raster_stem(stem_or_file);
    const auto hdr = read_header(header_path(stem));
    if (hdr.kind != "hologram" || hdr.element != "float32" || hdr.depth.nz != 1)
        throw io_error(header_path(stem).string() + ": not a float32 hologram");
    const auto payload = detail::read_floats(raw_path(stem), hdr.grid.pixels());
    Hologram h(hdr.grid);
    for (std::size_t i = 0; i < h.size(); ++i)
        h[i] = payload[i];
    return h;
}

inline void write_volume(const std::filesystem::path& stem, const Volume& v, double scale = 1.0)
{
    detail::ensure_parent(stem);
    std::vector<float> payload(2 * v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        payload[2 * i] = static_cast<float>(v[i].real());
        payload[2 * i + 1] = static_cast<float>(v[i].imag());
    }
    detail::write_floats(raw_path(stem), payload);
    write_header(header_path(stem), {"volume", "complex64", v.grid(), v.depth(), scale});
}

struct VolumeFile {
    Volume volume;
    double scale = 1.0;
};

inline VolumeFile read_volume(const std::filesystem::path& stem_or_file)
{
    const auto stem = raster_stem(stem_or_file);
    const auto hdr = read_header(header_path(stem));
    if (hdr.kind != "volume" || hdr.element != "complex64")
        throw io_error(header_path(stem).string() + ": not a complex64 volume");
    const auto payload = detail::read_floats(raw_path(stem), 2 * hdr.grid.pixels() * hdr.depth.nz);
    VolumeFile f{Volume(hdr.grid, hdr.depth), hdr.scale};
    for (std::size_t i = 0; i < f.volume.size(); ++i)
        f.volume[i] = complex(payload[2 * i], payload[2 * i + 1]);
    return f;
}

inline void write_trace_csv(const std::filesystem::path& path, const ConvergenceTrace& trace)
{
    detail::ensure_parent(path);
    std::ofstream out(path);
    if (!out)
        throw io_error("cannot write " + path.string());
    out << "iter,objective,data_term,penalty_term,step_size,delta_obj\n";
    for (const auto& r : trace.records)
        out << r.iter << ',' << format_number(r.objective) << ',' << format_number(r.data_term) << ','
            << format_number(r.penalty_term) << ',' << format_number(r.step_size) << ','
            << format_number(r.delta_obj) << '\n';
    if (!out)
        throw io_error("short write to " + path.string());
}

inline void write_curve_csv(const std::filesystem::path& path, const SliceCurve& c)
{
    detail::ensure_parent(path);
    std::ofstream out(path);
    if (!out)
        throw io_error("cannot write " + path.string());
    out << "slice_index,z_um,value\n";
    for (std::size_t i = 0; i < c.values.size(); ++i)
        out << i << ',' << format_number(c.depth.z(i)) << ',' << format_number(c.values[i]) << '\n';
    if (!out)
        throw io_error("short write to " + path.string());
}

/// Ground truth for the analysis step.
struct SceneManifest {
    OpticalGrid grid;
    DepthAxis depth;
    MaskOptions mask;
    std::vector<Particle> particles;
};

inline void write_scene_manifest(const std::filesystem::path& path, const SceneManifest& s)
{
    detail::ensure_parent(path);
    std::ofstream out(path);
    if (!out)
        throw io_error("cannot write " + path.string());
    out << "format = nldholo-scene\n"
        << "version = 1\n"
        << "nx = " << s.grid.nx << "\nny = " << s.grid.ny << "\n"
        << "pixel_pitch_um = " << format_number(s.grid.pixel_pitch) << "\n"
        << "wavelength_um = " << format_number(s.grid.wavelength) << "\n"
        << "z0_um = " << format_number(s.depth.z0) << "\n"
        << "dz_um = " << format_number(s.depth.dz) << "\n"
        << "nz = " << s.depth.nz << "\n"
        << "model = " << to_string(s.mask.model) << "\n"
        << "rim_gain = " << format_number(s.mask.rim_gain) << "\n"
        << "particle_count = " << s.particles.size() << "\n";
    for (std::size_t i = 0; i < s.particles.size(); ++i) {
        const auto& p = s.particles[i];
        out << "particle." << i << " = " << format_number(p.cx) << ", " << format_number(p.cy) << ", "
            << format_number(p.z) << ", " << format_number(p.diameter) << "\n";
        out << "particle." << i << ".true_slice = " << s.depth.nearest_slice(p.z) << "\n";
    }
    if (!out)
        throw io_error("short write to " + path.string());
}

inline SceneManifest read_scene_manifest(const std::filesystem::path& path)
{
    const auto kv = detail::read_key_values(path);
    if (detail::require(kv, "format", path) != "nldholo-scene")
        throw io_error(path.string() + ": not a scene manifest");
    SceneManifest s;
    s.grid.nx = detail::require_count(kv, "nx", path);
    s.grid.ny = detail::require_count(kv, "ny", path);
    s.grid.pixel_pitch = detail::require_number(kv, "pixel_pitch_um", path);
    s.grid.wavelength = detail::require_number(kv, "wavelength_um", path);
    s.depth.z0 = detail::require_number(kv, "z0_um", path);
    s.depth.dz = detail::require_number(kv, "dz_um", path);
    s.depth.nz = detail::require_count(kv, "nz", path);
    const auto& model = detail::require(kv, "model", path);
    if (model != "disk" && model != "ring")
        throw io_error(path.string() + ": unknown particle model '" + model + "'");
    s.mask.model = model == "disk" ? ParticleModel::disk : ParticleModel::ring;
    s.mask.rim_gain = detail::require_number(kv, "rim_gain", path);
    const auto n = detail::require_count(kv, "particle_count", path);
    for (std::size_t i = 0; i < n; ++i) {
        const auto key = "particle." + std::to_string(i);
        std::stringstream ss(detail::require(kv, key, path));
        Particle p;
        char c1 = 0, c2 = 0, c3 = 0;
        if (!(ss >> p.cx >> c1 >> p.cy >> c2 >> p.z >> c3 >> p.diameter) || c1 != ',' || c2 != ',' || c3 != ',')
            throw io_error(path.string() + ": malformed " + key);
        s.particles.push_back(p);
    }
    return s;
}

inline std::vector<std::size_t> true_slices(const SceneManifest& s, const DepthAxis& depth)
{
    std::vector<std::size_t> out;
    for (const auto& p : s.particles)
        out.push_back(depth.nearest_slice(p.z));
    return out;
}

inline void write_report(const std::filesystem::path& path, const LocalizationReport& rep, const SliceCurve& curve)
{
    detail::ensure_parent(path);
    std::ofstream out(path);
    if (!out)
        throw io_error("cannot write " + path.string());
    out << "format = nldholo-report\n"
        << "curve = " << to_string(curve.kind) << "\n"
        << "particle_count = " << rep.particles.size() << "\n"
        << "peaks_found = " << rep.peaks_found << "\n"
        << "all_detected = " << (rep.all_detected ? "true" : "false") << "\n";
    if (rep.peaks_found == 0)
        out << "status = no peaks\n";
    for (std::size_t i = 0; i < rep.particles.size(); ++i) {
        const auto& p = rep.particles[i];
        const auto key = "particle." + std::to_string(i);
        out << key << ".true_slice = " << p.true_slice << "\n";
        out << key << ".detected = " << (p.detected ? "true" : "false") << "\n";
        if (p.detected) {
            out << key << ".detected_slice = " << p.detected_slice << "\n"
                << key << ".slice_error = " << p.slice_error << "\n"
                << key << ".detected_z_um = " << format_number(p.detected_z_um) << "\n";
        }
    }
    if (!out)
        throw io_error("short write to " + path.string());
}

/// 8-bit grayscale PNG.  Display only; never read back.
inline void write_png_gray(const std::filesystem::path& path, std::size_t width, std::size_t height,
                           const std::vector<unsigned char>& pixels)
{
    detail::ensure_parent(path);
    std::FILE* fp = std::fopen(path.string().c_str(), "wb");
    if (!fp)
        throw io_error("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        std::fclose(fp);
        throw io_error("libpng failed writing " + path.string());
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height), 8,
                 PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (std::size_t y = 0; y < height; ++y)
        png_write_row(png, const_cast<png_bytep>(pixels.data() + y * width));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    std::fclose(fp);
}

/// Per-slice min-max normalized |x|.
inline void write_slice_png(const std::filesystem::path& path, const Volume& v, std::size_t iz)
{
    const auto s = v.slice(iz);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& e : s) {
        lo = std::min(lo, std::abs(e));
        hi = std::max(hi, std::abs(e));
    }
    std::vector<unsigned char> px(s.size(), 0);
    if (hi > lo)
        for (std::size_t i = 0; i < s.size(); ++i)
            px[i] = static_cast<unsigned char>(std::lround(255.0 * (std::abs(s[i]) - lo) / (hi - lo)));
    write_png_gray(path, v.nx(), v.ny(), px);
}

/// A simple bar plot of the curve, one column group per slice.
inline void write_curve_png(const std::filesystem::path& path, const SliceCurve& c)
{
    const std::size_t n = std::max<std::size_t>(c.values.size(), 1);
    const std::size_t col = std::max<std::size_t>(1, 400 / n);
    const std::size_t width = col * n, height = 200;
    std::vector<unsigned char> px(width * height, 255);
    const double hi = c.values.empty() ? 0.0 : *std::max_element(c.values.begin(), c.values.end());
    for (std::size_t i = 0; i < c.values.size(); ++i) {
        const auto h = hi > 0.0 ? static_cast<std::size_t>(std::lround(c.values[i] / hi * (height - 1))) : 0;
        for (std::size_t y = height - h; y < height; ++y)
            for (std::size_t x = i * col; x < (i + 1) * col; ++x)
                px[y * width + x] = 0;
    }
    write_png_gray(path, width, height, px);
}

} // namespace nldholo
