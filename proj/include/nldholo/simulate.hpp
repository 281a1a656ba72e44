#pragma once

// Synthetic in-line holograms of particle scenes: object-plane masks,
// the depth-stacked scene volume, exact hologram intensity |1 + H|^2 and
// the photon + read noise model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "nldholo/field_core.hpp"
#include "nldholo/propagation.hpp"

namespace nldholo {

struct Particle {
    double cx = 0.0; // um; pixel ix is centred at ix * pitch
    double cy = 0.0; // um
    double z = 0.0;  // um, distance to the sensor
    double diameter = 0.0;
    double refractive_index = 1.58; // carried as metadata only
};

enum class ParticleModel { disk, ring };

inline std::string to_string(ParticleModel m) { return m == ParticleModel::disk ? "disk" : "ring"; }

struct MaskOptions {
    ParticleModel model = ParticleModel::ring;
    double rim_gain = 0.5;
};

struct Scene {
    OpticalGrid grid;
    std::vector<Particle> particles;
};

struct NoiseSpec {
    double gaussian_fraction = 0.01;
    double photons_per_pixel = 5000.0;
    std::uint64_t rng_seed = 0;
    bool enabled = true;

    void validate() const
    {
        if (!(gaussian_fraction >= 0.0))
            throw domain_error("gaussian noise fraction must be >= 0");
        if (!(photons_per_pixel > 0.0))
            throw domain_error("photons per pixel must be positive");
    }
};

/// Recorded intensity on the sensor grid; non-negative.
class Hologram : public RealField {
public:
    using RealField::RealField;
    explicit Hologram(RealField f) : RealField(std::move(f)) {}

    void validate() const
    {
        for (double v : values())
            if (!(v >= 0.0) || !std::isfinite(v))
                throw domain_error("hologram values must be finite and non-negative");
    }

    double mean() const
    {
        // Neumaier compensated sum
        double s = 0.0, c = 0.0;
        for (double v : values()) {
            const double t = s + v;
            c += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
            s = t;
        }
        return (s + c) / static_cast<double>(size());
    }
};

namespace detail {

/// Fraction of the pixel centred at (px, py) covered by the disc of radius r
/// centred at (cx, cy).  Edge pixels are supersampled on a 64 x 64 lattice.
inline double disc_coverage(double cx, double cy, double r, double px, double py, double pitch)
{
    const double h = 0.5 * pitch;
    const double dx = std::abs(px - cx), dy = std::abs(py - cy);
    const double far_x = dx + h, far_y = dy + h;
    if (far_x * far_x + far_y * far_y <= r * r)
        return 1.0;
    const double near_x = std::max(0.0, dx - h), near_y = std::max(0.0, dy - h);
    if (near_x * near_x + near_y * near_y >= r * r)
        return 0.0;
    constexpr int n = 64;
    const double step = pitch / n;
    int inside = 0;
    for (int j = 0; j < n; ++j) {
        const double y = py - h + (j + 0.5) * step - cy;
        for (int i = 0; i < n; ++i) {
            const double x = px - h + (i + 0.5) * step - cx;
            inside += (x * x + y * y <= r * r) ? 1 : 0;
        }
    }
    return static_cast<double>(inside) / (n * n);
}

} // namespace detail

inline void validate_particle(const Particle& p)
{
    if (!(p.diameter > 0.0) || !std::isfinite(p.diameter))
        throw domain_error("particle diameter must be positive");
    if (!(p.z > 0.0) || !std::isfinite(p.z))
        throw domain_error("particle distance must be positive");
    if (!std::isfinite(p.cx) || !std::isfinite(p.cy))
        throw domain_error("particle centre must be finite");
}

/// Object-plane perturbation of one particle: -1 (area weighted) over the
/// disc, and for the ring model an extra +rim_gain annulus one pixel wide
/// just outside the edge.
inline ComplexField particle_mask(const Particle& p, const OpticalGrid& grid, const MaskOptions& opt = {})
{
    grid.validate();
    validate_particle(p);
    const double pitch = grid.pixel_pitch;
    const double r = 0.5 * p.diameter;
    const double r_out = opt.model == ParticleModel::ring ? r + pitch : r;
    const double lo = -0.5 * pitch;
    const double hi_x = (static_cast<double>(grid.nx) - 0.5) * pitch;
    const double hi_y = (static_cast<double>(grid.ny) - 0.5) * pitch;
    if (p.cx - r_out < lo || p.cx + r_out > hi_x || p.cy - r_out < lo || p.cy + r_out > hi_y)
        throw domain_error("particle extends beyond the grid");

    ComplexField mask(grid);
    const auto first = [&](double c) {
        return static_cast<std::size_t>(std::max(0.0, std::floor((c - r_out) / pitch)));
    };
    const auto last = [&](double c, std::size_t n) {
        return std::min(n - 1, static_cast<std::size_t>(std::ceil((c + r_out) / pitch)));
    };
    for (std::size_t iy = first(p.cy); iy <= last(p.cy, grid.ny); ++iy) {
        for (std::size_t ix = first(p.cx); ix <= last(p.cx, grid.nx); ++ix) {
            const double px = static_cast<double>(ix) * pitch, py = static_cast<double>(iy) * pitch;
            const double core = detail::disc_coverage(p.cx, p.cy, r, px, py, pitch);
            double v = -core;
            if (opt.model == ParticleModel::ring)
                v += opt.rim_gain * (detail::disc_coverage(p.cx, p.cy, r_out, px, py, pitch) - core);
            mask(ix, iy) = v;
        }
    }
    return mask;
}

/// Each particle's mask is placed (additively) on the slice nearest its z.
inline Volume build_scene_volume(const Scene& scene, const DepthAxis& depth, const MaskOptions& opt = {})
{
    scene.grid.validate();
    depth.validate();
    Volume vol(scene.grid, depth);
    for (const auto& p : scene.particles) {
        validate_particle(p);
        if (!depth.contains(p.z))
            throw domain_error("particle z lies outside the reconstruction depth range");
        const auto mask = particle_mask(p, scene.grid, opt);
        auto slice = vol.slice(depth.nearest_slice(p.z));
        for (std::size_t i = 0; i < slice.size(); ++i)
            slice[i] += mask[i];
    }
    return vol;
}

/// I = |1 + H|^2 with H = A vol; no linearization.
inline Hologram form_hologram(const Volume& vol, const FresnelOperator& op)
{
    const auto h = op.forward(vol);
    Hologram out(vol.grid());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = std::norm(1.0 + h[i]);
    return out;
}

inline Hologram form_hologram(const Volume& vol)
{
    return form_hologram(vol, FresnelOperator(vol.grid(), vol.depth()));
}

/// Poisson photon noise (mean value * photons), then zero-mean Gaussian
/// read noise with sigma = gaussian_fraction * mean intensity, clamped at 0.
inline Hologram add_noise(const Hologram& h, const NoiseSpec& spec)
{
    spec.validate();
    if (!spec.enabled)
        return h;
    std::mt19937_64 rng(spec.rng_seed);
    const double sigma = spec.gaussian_fraction * h.mean();
    std::normal_distribution<double> gauss(0.0, 1.0);
    Hologram out(h.grid());
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double mean_photons = h[i] * spec.photons_per_pixel;
        double v = 0.0;
        if (mean_photons > 0.0) {
            std::poisson_distribution<long long> poisson(mean_photons);
            v = static_cast<double>(poisson(rng)) / spec.photons_per_pixel;
        }
        if (sigma > 0.0)
            v += sigma * gauss(rng);
        out[i] = std::max(0.0, v);
    }
    return out;
}

} // namespace nldholo
