#pragma once

// Fresnel transfer-function propagation and the multi-slice hologram
// operator A: volume -> sensor field, with its exact adjoint.

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "nldholo/fft.hpp"
#include "nldholo/field_core.hpp"

namespace nldholo {

/// exp(j 2 pi z / lambda) * exp(-j pi lambda z (fx^2 + fy^2)) sampled on
/// the FFT-ordered frequency lattice of `grid`.
struct PropagationKernel {
    OpticalGrid grid;
    double z = 0.0;
    std::vector<complex> values;
};

inline PropagationKernel make_kernel(const OpticalGrid& grid, double z)
{
    grid.validate();
    constexpr double pi = std::numbers::pi;
    const double lambda = grid.wavelength;
    // fmod is exact, so the carrier phase keeps full precision for large z
    const double carrier = 2.0 * pi * (std::fmod(z, lambda) / lambda);
    std::vector<double> phase_x(grid.nx), phase_y(grid.ny);
    for (std::size_t ix = 0; ix < grid.nx; ++ix)
        phase_x[ix] = -pi * lambda * z * grid.fx(ix) * grid.fx(ix);
    for (std::size_t iy = 0; iy < grid.ny; ++iy)
        phase_y[iy] = -pi * lambda * z * grid.fy(iy) * grid.fy(iy);

    PropagationKernel k{grid, z, std::vector<complex>(grid.pixels())};
    for (std::size_t iy = 0; iy < grid.ny; ++iy)
        for (std::size_t ix = 0; ix < grid.nx; ++ix)
            k.values[ix + grid.nx * iy] = std::polar(1.0, carrier + phase_x[ix] + phase_y[iy]);
    return k;
}

inline ComplexField propagate(const ComplexField& field, double z)
{
    const auto& grid = field.grid();
    const auto kernel = make_kernel(grid, z);
    const Fft2d fft(grid.nx, grid.ny);
    std::vector<complex> buf(field.values().begin(), field.values().end());
    fft.forward(buf);
    for (std::size_t i = 0; i < buf.size(); ++i)
        buf[i] *= kernel.values[i];
    fft.inverse(buf);
    return ComplexField(grid, std::move(buf));
}

/// The hologram operator for a fixed grid and depth axis.  Kernels for
/// every slice are computed once at construction and carry the 1/(nx ny)
/// normalization of the unscaled FFT pair.  Slice contributions are summed
/// in the frequency domain in slice-index order.
class FresnelOperator {
public:
    FresnelOperator(const OpticalGrid& grid, const DepthAxis& depth)
        : grid_(grid), depth_(depth), fft_(grid.nx, grid.ny)
    {
        grid.validate();
        depth.validate();
        const double norm = 1.0 / static_cast<double>(grid.pixels());
        kernels_.reserve(depth.nz * grid.pixels());
        for (std::size_t iz = 0; iz < depth.nz; ++iz) {
            for (const auto& k : make_kernel(grid, depth.z(iz)).values)
                kernels_.push_back(k * norm);
        }
    }

    const OpticalGrid& grid() const { return grid_; }
    const DepthAxis& depth() const { return depth_; }

    /// H = sum_i propagate(slice_i, z_i).
    ComplexField forward(const Volume& vol) const
    {
        ComplexField out(grid_);
        forward_into(vol, out);
        return out;
    }

    void forward_into(const Volume& vol, ComplexField& out) const
    {
        check(vol);
        const std::size_t n = grid_.pixels();
        std::vector<complex> spectrum(n), buf(n);
        for (std::size_t iz = 0; iz < depth_.nz; ++iz) {
            auto s = vol.slice(iz);
            std::copy(s.begin(), s.end(), buf.begin());
            fft_.forward_unscaled(buf);
            const complex* k = kernels_.data() + iz * n;
            for (std::size_t i = 0; i < n; ++i)
                spectrum[i] += k[i] * buf[i];
        }
        fft_.inverse_unscaled(spectrum);
        if (out.grid().nx != grid_.nx || out.grid().ny != grid_.ny)
            out = ComplexField(grid_);
        std::copy(spectrum.begin(), spectrum.end(), out.values().begin());
    }

    /// Slice i = propagate(field, -z_i), the conjugate transpose of forward.
    Volume adjoint(const ComplexField& field) const
    {
        Volume out(grid_, depth_);
        adjoint_into(field, out);
        return out;
    }

    void adjoint_into(const ComplexField& field, Volume& out) const
    {
        if (field.nx() != grid_.nx || field.ny() != grid_.ny)
            throw dimension_error("adjoint: field grid does not match operator");
        if (!out.same_shape(grid_, depth_))
            out = Volume(grid_, depth_);
        const std::size_t n = grid_.pixels();
        std::vector<complex> spectrum(field.values().begin(), field.values().end());
        fft_.forward_unscaled(spectrum);
        for (std::size_t iz = 0; iz < depth_.nz; ++iz) {
            auto s = out.slice(iz);
            const complex* k = kernels_.data() + iz * n;
            for (std::size_t i = 0; i < n; ++i)
                s[i] = std::conj(k[i]) * spectrum[i];
            fft_.inverse_unscaled(s);
        }
    }

private:
    void check(const Volume& vol) const
    {
        if (!vol.same_shape(grid_, depth_))
            throw dimension_error("forward: volume shape does not match operator");
    }

    OpticalGrid grid_;
    DepthAxis depth_;
    Fft2d fft_;
    std::vector<complex> kernels_;
};

inline ComplexField forward(const Volume& vol)
{
    return FresnelOperator(vol.grid(), vol.depth()).forward(vol);
}

inline Volume adjoint(const ComplexField& field, const DepthAxis& depth)
{
    return FresnelOperator(field.grid(), depth).adjoint(field);
}

} // namespace nldholo
