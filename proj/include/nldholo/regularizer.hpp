#pragma once

// Hybrid-Weickert nonlinear diffusion on complex volumes, its TV special
// case, and the matching penalty energy.

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "nldholo/error.hpp"
#include "nldholo/field_core.hpp"

namespace nldholo {

enum class DiffusionKind { hwnld, tv };

inline std::string to_string(DiffusionKind k) { return k == DiffusionKind::hwnld ? "hwnld" : "tv"; }

struct DiffusionParams {
    double k0 = 1.0 / 3.0;   // gradient magnitude scale
    double epsilon = 1e-8;   // guards |grad| = 0 in the flux
    double z_scale = 1.0;    // pixel pitch / depth spacing
    DiffusionKind kind = DiffusionKind::hwnld;

    void validate() const
    {
        if (!(k0 > 0.0))
            throw domain_error("k0 must be positive");
        if (!(epsilon > 0.0))
            throw domain_error("epsilon must be positive");
        if (!(z_scale > 0.0))
            throw domain_error("z scale must be positive");
    }
};

/// F_H(s) = 1 - exp(-3.86 / s^12); 1 at s = 0.
inline double hw_function(double s)
{
    if (s <= 0.0)
        return 1.0;
    const double s2 = s * s, s4 = s2 * s2;
    const double a = 3.86 / (s4 * s4 * s4);
    if (a > 40.0) // 1 - exp(-a) rounds to exactly 1
        return 1.0;
    return -std::expm1(-a);
}

/// Sum with a fixed pairwise reduction order.
inline double pairwise_sum(std::span<const double> v)
{
    if (v.size() <= 64) {
        double s = 0.0;
        for (double e : v)
            s += e;
        return s;
    }
    const auto half = v.size() / 2;
    return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

/// Psi(s) = integral of F_H over [0, s], tabulated on [0, 8] and
/// interpolated with cubic Hermite segments whose node slopes are F_H
/// itself.  Beyond the table the large-s expansion F_H ~ 3.86 s^-12 is
/// integrated in closed form.
class PsiTable {
public:
    static constexpr std::size_t node_count = 4096;
    static constexpr double s_max = 8.0;

    static const PsiTable& instance()
    {
        static const PsiTable table;
        return table;
    }

    double spacing() const { return h_; }
    double node(std::size_t k) const { return static_cast<double>(k) * h_; }
    double value_at_node(std::size_t k) const { return psi_[k]; }

    double operator()(double s) const
    {
        if (s <= 0.0)
            return 0.0;
        if (s >= s_max)
            return psi_.back() + 3.86 / 11.0 * (std::pow(s_max, -11) - std::pow(s, -11));
        auto k = static_cast<std::size_t>(s / h_);
        if (k >= node_count - 1)
            k = node_count - 2;
        const double u = (s - node(k)) / h_;
        const double u2 = u * u, u3 = u2 * u;
        const double h00 = 2 * u3 - 3 * u2 + 1, h10 = u3 - 2 * u2 + u;
        const double h01 = -2 * u3 + 3 * u2, h11 = u3 - u2;
        return h00 * psi_[k] + h10 * h_ * slope_[k] + h01 * psi_[k + 1] + h11 * h_ * slope_[k + 1];
    }

private:
    PsiTable() : h_(s_max / static_cast<double>(node_count - 1)), psi_(node_count), slope_(node_count)
    {
        using boost::math::quadrature::gauss_kronrod;
        psi_[0] = 0.0;
        slope_[0] = hw_function(0.0);
        for (std::size_t k = 1; k < node_count; ++k) {
            const double piece =
                gauss_kronrod<double, 31>::integrate(hw_function, node(k - 1), node(k), 8, 1e-11);
            psi_[k] = psi_[k - 1] + piece;
            slope_[k] = hw_function(node(k));
        }
    }

    double h_;
    std::vector<double> psi_;
    std::vector<double> slope_;
};

/// Per-voxel energy density: k0 * Psi(g / k0) for hwnld, g for tv.  Its
/// derivative in g is F_H(g / k0).
inline double psi_energy(double grad_mag, const DiffusionParams& p)
{
    if (p.kind == DiffusionKind::tv)
        return grad_mag;
    return p.k0 * PsiTable::instance()(grad_mag / p.k0);
}

inline double flux_value(double grad_mag, const DiffusionParams& p)
{
    const double f = p.kind == DiffusionKind::hwnld ? hw_function(grad_mag / p.k0) : 1.0;
    return f / (grad_mag + p.epsilon);
}

/// FLX = F_H(|grad| / k0) / (|grad| + eps) for hwnld, 1 / (|grad| + eps) for tv.
inline ScalarVolume flux_coefficient(const ScalarVolume& grad_mag, const DiffusionParams& p)
{
    ScalarVolume c(grad_mag.grid(), grad_mag.depth());
    for (std::size_t i = 0; i < c.size(); ++i)
        c[i] = flux_value(grad_mag[i], p);
    return c;
}

namespace detail {

/// Fills `out` with |grad |x|| using scaled forward differences (zero past
/// the last row, column or slice).  `out` may not alias anything in x.
inline void magnitude_gradient_norm(const Volume& x, double z_scale, ScalarVolume& out)
{
    if (!out.same_shape(x))
        out = ScalarVolume(x.grid(), x.depth());
    double* m = out.data();
    for (std::size_t i = 0; i < x.size(); ++i)
        m[i] = std::abs(x[i]);
    const std::size_t nx = x.nx(), ny = x.ny(), nz = x.nz(), plane = nx * ny;
    // forward neighbours are read before they are overwritten
    for (std::size_t iz = 0; iz < nz; ++iz) {
        const bool has_z = iz + 1 < nz;
        for (std::size_t iy = 0; iy < ny; ++iy) {
            const bool has_y = iy + 1 < ny;
            const std::size_t row = nx * (iy + ny * iz);
            for (std::size_t ix = 0; ix < nx; ++ix) {
                const std::size_t i = row + ix;
                const double dx = ix + 1 < nx ? m[i + 1] - m[i] : 0.0;
                const double dy = has_y ? m[i + nx] - m[i] : 0.0;
                const double dz = has_z ? z_scale * (m[i + plane] - m[i]) : 0.0;
                m[i] = std::sqrt(dx * dx + dy * dy + dz * dz);
            }
        }
    }
}

} // namespace detail

/// |grad m| with m = |x|, the quantity the diffusivity and penalty see.
inline ScalarVolume diffusion_gradient_magnitude(const Volume& x, double z_scale)
{
    ScalarVolume g;
    detail::magnitude_gradient_norm(x, z_scale, g);
    return g;
}

/// One explicit Euler step out = x + t div(FLX grad x).  The diffusivity
/// comes from |grad |x|| and is shared by the real and imaginary parts.
/// `flux` is scratch space and is resized as needed.
inline void diffusion_step_into(const Volume& x, const DiffusionParams& p, double t, Volume& out,
                                ScalarVolume& flux)
{
    p.validate();
    if (!(t >= 0.0))
        throw domain_error("diffusion time must be non-negative");
    if (!out.same_shape(x) || &out == &x)
        out = Volume(x.grid(), x.depth());

    detail::magnitude_gradient_norm(x, p.z_scale, flux);
    for (auto& g : flux.values())
        g = flux_value(g, p);

    const std::size_t nx = x.nx(), ny = x.ny(), nz = x.nz(), plane = nx * ny;
    const double zs = p.z_scale;
    const complex* v = x.data();
    const double* c = flux.data();
    complex* o = out.data();
    for (std::size_t iz = 0; iz < nz; ++iz) {
        for (std::size_t iy = 0; iy < ny; ++iy) {
            const std::size_t row = nx * (iy + ny * iz);
            for (std::size_t ix = 0; ix < nx; ++ix) {
                const std::size_t i = row + ix;
                complex d{};
                if (ix + 1 < nx)
                    d += c[i] * (v[i + 1] - v[i]);
                if (ix > 0)
                    d -= c[i - 1] * (v[i] - v[i - 1]);
                if (iy + 1 < ny)
                    d += c[i] * (v[i + nx] - v[i]);
                if (iy > 0)
                    d -= c[i - nx] * (v[i] - v[i - nx]);
                complex dzv{};
                if (iz + 1 < nz)
                    dzv += c[i] * (zs * (v[i + plane] - v[i]));
                if (iz > 0)
                    dzv -= c[i - plane] * (zs * (v[i] - v[i - plane]));
                o[i] = v[i] + t * (d + zs * dzv);
            }
        }
    }
    if (!all_finite<complex>(out.values()))
        throw numeric_error("diffusion step produced non-finite values");
}

inline Volume diffusion_step(const Volume& x, const DiffusionParams& p, double t)
{
    Volume out;
    ScalarVolume flux;
    diffusion_step_into(x, p, t, out, flux);
    return out;
}

/// Sum over voxels of the energy density of |grad |x||.  Rows are summed
/// sequentially and the row sums pairwise, so the result does not depend
/// on anything but the input.
inline double penalty(const Volume& x, const DiffusionParams& p)
{
    p.validate();
    ScalarVolume g;
    detail::magnitude_gradient_norm(x, p.z_scale, g);
    const std::size_t nx = x.nx();
    std::vector<double> rows(x.ny() * x.nz(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i)
        rows[i / nx] += psi_energy(g[i], p);
    return pairwise_sum(rows);
}

} // namespace nldholo
