#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "nldholo/config.hpp"
#include "nldholo/io.hpp"
#include "nldholo/presets.hpp"

using namespace nldholo;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    auto p = fs::temp_directory_path() / "nldholo_tests" / name;
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string config_error_of(const std::string& text)
{
    try {
        parse_config(text, "t.cfg");
    } catch (const config_error& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST(Raster, HologramRoundTripIsBitExact)
{
    const auto dir = scratch("holo");
    Hologram h(OpticalGrid{17, 9, 2.0, 0.66});
    for (std::size_t i = 0; i < h.size(); ++i)
        h[i] = static_cast<float>(0.25 + 0.001 * double(i));
    write_hologram(dir / "h", h);
    const auto back = read_hologram(dir / "h");
    EXPECT_TRUE(back.grid() == h.grid());
    for (std::size_t i = 0; i < h.size(); ++i)
        EXPECT_EQ(back[i], h[i]);
    // a second round trip reproduces the payload byte for byte
    write_hologram(dir / "h2", back);
    EXPECT_EQ(slurp(dir / "h.raw"), slurp(dir / "h2.raw"));
    EXPECT_EQ(fs::file_size(dir / "h.raw"), 17u * 9u * 4u);
    EXPECT_NO_THROW(read_hologram(dir / "h.raw"));
}

TEST(Raster, PayloadIsLittleEndianFloat32)
{
    const auto dir = scratch("endian");
    Hologram h(OpticalGrid{2, 2, 2.0, 0.66});
    h[0] = 1.0;
    write_hologram(dir / "h", h);
    const auto bytes = slurp(dir / "h.raw");
    ASSERT_EQ(bytes.size(), 16u);
    // 1.0f = 0x3f800000
    EXPECT_EQ(static_cast<unsigned char>(bytes[0]), 0x00);
    EXPECT_EQ(static_cast<unsigned char>(bytes[2]), 0x80);
    EXPECT_EQ(static_cast<unsigned char>(bytes[3]), 0x3f);
}

TEST(Raster, VolumeRoundTripKeepsScaleAndAxes)
{
    const auto dir = scratch("vol");
    const OpticalGrid g{8, 6, 2.0, 0.66};
    const DepthAxis d{4338.0, 20.0, 3};
    Volume v(g, d);
    std::mt19937_64 rng(2);
    std::normal_distribution<float> n;
    for (auto& x : v.values())
        x = complex(n(rng), n(rng));
    write_volume(dir / "v", v, 9.5);
    const auto f = read_volume(dir / "v");
    EXPECT_EQ(f.scale, 9.5);
    EXPECT_TRUE(f.volume.grid() == g);
    EXPECT_TRUE(f.volume.depth() == d);
    for (std::size_t i = 0; i < v.size(); ++i)
        EXPECT_EQ(f.volume[i], v[i]);
    write_volume(dir / "v2", f.volume, f.scale);
    EXPECT_EQ(slurp(dir / "v.raw"), slurp(dir / "v2.raw"));
}

TEST(Raster, DetectsTruncatedAndMismatchedFiles)
{
    const auto dir = scratch("bad");
    Hologram h(OpticalGrid{4, 4, 2.0, 0.66});
    write_hologram(dir / "h", h);
    fs::resize_file(dir / "h.raw", 10);
    EXPECT_THROW(read_hologram(dir / "h"), io_error);
    EXPECT_THROW(read_hologram(dir / "missing"), io_error);
    write_volume(dir / "v", Volume(OpticalGrid{4, 4, 2.0, 0.66}, DepthAxis{1.0, 1.0, 2}));
    EXPECT_THROW(read_hologram(dir / "v"), io_error);
}

TEST(Csv, TraceAndCurveColumns)
{
    const auto dir = scratch("csv");
    ConvergenceTrace t;
    t.records.push_back({0, 10.0, 8.0, 2.0, 1.0, std::numeric_limits<double>::quiet_NaN()});
    t.records.push_back({3, 5.0, 4.0, 1.0, 0.25, 0.5});
    write_trace_csv(dir / "trace.csv", t);
    EXPECT_EQ(slurp(dir / "trace.csv"),
              "iter,objective,data_term,penalty_term,step_size,delta_obj\n"
              "0,10,8,2,1,nan\n"
              "3,5,4,1,0.25,0.5\n");
    const SliceCurve c{DepthAxis{100.0, 20.0, 2}, {0.5, 1.0}, CurveKind::max_intensity};
    write_curve_csv(dir / "curve.csv", c);
    EXPECT_EQ(slurp(dir / "curve.csv"), "slice_index,z_um,value\n0,100,0.5\n1,120,1\n");
}

TEST(SceneManifest, RoundTrip)
{
    const auto dir = scratch("scene");
    SceneManifest s{OpticalGrid{256, 256, 2.0, 0.66}, DepthAxis{4338.0, 20.0, 101}, {ParticleModel::ring, 0.5},
                    {{256.0, 256.0, 4538.0, 20.0}, {256.0, 256.0, 5341.0, 15.0}}};
    write_scene_manifest(dir / "scene.txt", s);
    const auto back = read_scene_manifest(dir / "scene.txt");
    EXPECT_TRUE(back.grid == s.grid);
    EXPECT_TRUE(back.depth == s.depth);
    ASSERT_EQ(back.particles.size(), 2u);
    EXPECT_EQ(back.particles[1].z, 5341.0);
    EXPECT_EQ(true_slices(back, back.depth), (std::vector<std::size_t>{10, 50}));
}

TEST(Report, NoPeaksStatus)
{
    const auto dir = scratch("report");
    const SliceCurve c{DepthAxis{1.0, 1.0, 4}, {0, 0, 0, 0}, CurveKind::max_gradient};
    write_report(dir / "r.txt", build_report(c, {1}), c);
    const auto text = slurp(dir / "r.txt");
    EXPECT_NE(text.find("status = no peaks"), std::string::npos);
    EXPECT_NE(text.find("particle.0.detected = false"), std::string::npos);
}

TEST(Png, WritesValidSignature)
{
    const auto dir = scratch("png");
    Volume v(OpticalGrid{8, 8, 2.0, 0.66}, DepthAxis{1.0, 1.0, 2});
    v(2, 2, 1) = 1.0;
    write_slice_png(dir / "s.png", v, 1);
    write_curve_png(dir / "c.png", SliceCurve{v.depth(), {0.0, 1.0}, CurveKind::max_gradient});
    for (const char* name : {"s.png", "c.png"}) {
        const auto bytes = slurp(dir / name);
        ASSERT_GE(bytes.size(), 8u);
        EXPECT_EQ(bytes.substr(1, 3), "PNG");
    }
}

TEST(Config, DefaultsAndUnits)
{
    const auto c = parse_config("grid.wavelength_nm = 532\nscene.particle = 256, 256, 5338, 15\n");
    EXPECT_DOUBLE_EQ(c.grid.wavelength, 0.532);
    EXPECT_EQ(c.grid.nx, 256u);
    EXPECT_EQ(c.depth.nz, 101u);
    EXPECT_DOUBLE_EQ(c.solver.diffusion.z_scale, 0.1);
    ASSERT_EQ(c.particles.size(), 1u);
    EXPECT_EQ(c.particles[0].refractive_index, 1.58);
}

TEST(Config, ErrorsCarryLineNumbers)
{
    EXPECT_NE(config_error_of("grid.nx = 64\n\nsolver.tua = 2\n").find("t.cfg:3: unknown key 'solver.tua'"),
              std::string::npos);
    EXPECT_NE(config_error_of("grid.nx = 64\ngrid.nx = 32\n").find("t.cfg:2:"), std::string::npos);
    EXPECT_NE(config_error_of("just words\n").find("t.cfg:1: expected 'key = value'"), std::string::npos);
    EXPECT_NE(config_error_of("grid.nx = -3\n").find("t.cfg:1:"), std::string::npos);
    EXPECT_NE(config_error_of("solver.tau = 1x\n").find("t.cfg:1:"), std::string::npos);
    EXPECT_NE(config_error_of("scene.particle = 1, 2\n").find("t.cfg:1:"), std::string::npos);
    EXPECT_NE(config_error_of("# ok\nscene.particle = 256, 256, 9000, 15\n").find("t.cfg:2:"), std::string::npos);
    EXPECT_NE(config_error_of("grid.wavelength_um = 0.5\ngrid.wavelength_nm = 500\n").find("t.cfg:2:"),
              std::string::npos);
    EXPECT_FALSE(config_error_of("solver.step_decay = 1.5\n").empty());
    EXPECT_FALSE(config_error_of("solver.kind = heat\n").empty());
}

TEST(Config, CanonicalTextRoundTrips)
{
    const auto c = parse_config("grid.nx = 128\nsolver.tau = 2.2\nsolver.kind = tv\nnoise.seed = 99\n"
                                "scene.particle = 100, 120, 5000, 12.5\nscene.particle = 140, 120, 5600, 20\n"
                                "outputs.emit_png = yes\n");
    const auto text = to_text(c);
    const auto again = parse_config(text);
    EXPECT_EQ(to_text(again), text);
    EXPECT_EQ(fnv1a64(text), fnv1a64(to_text(again)));
    EXPECT_EQ(again.particles.size(), 2u);
    EXPECT_EQ(again.solver.diffusion.kind, DiffusionKind::tv);
    EXPECT_TRUE(again.output.emit_png);
}

TEST(Config, Fnv1aReferenceValues)
{
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
}

TEST(Presets, AllParseAndMatchReferenceScenes)
{
    std::map<std::string, RunConfig> by_name;
    for (const auto& p : presets::all)
        by_name[std::string(p.name)] = parse_config(std::string(p.text), std::string(p.name));
    for (const char* name : {"single15", "single40", "overlap3"})
        ASSERT_TRUE(by_name.count(name)) << name;
    const auto& s15 = by_name["single15"];
    EXPECT_EQ(s15.grid.nx, 256u);
    EXPECT_DOUBLE_EQ(s15.grid.pixel_pitch, 2.0);
    EXPECT_DOUBLE_EQ(s15.grid.wavelength, 0.66);
    EXPECT_EQ(s15.depth.nz, 101u);
    ASSERT_EQ(s15.particles.size(), 1u);
    EXPECT_EQ(s15.particles[0].diameter, 15.0);
    EXPECT_EQ(s15.particles[0].z, 5338.0);
    EXPECT_DOUBLE_EQ(by_name["single40"].solver.tau, 2.2);
    EXPECT_EQ(by_name["single40"].particles[0].diameter, 40.0);
    const auto& o3 = by_name["overlap3"];
    ASSERT_EQ(o3.particles.size(), 3u);
    EXPECT_EQ(true_slices(SceneManifest{o3.grid, o3.depth, o3.mask, o3.particles}, o3.depth),
              (std::vector<std::size_t>{10, 50, 90}));
}
