#pragma once

// Sampling geometry, 2D fields, 3D stacks and the scaled 3D difference
// operators shared by the regularizer and the focus metrics.
//
// All lengths are micrometres.  Arrays are row-major with x fastest:
// index = ix + nx * (iy + ny * iz).

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "nldholo/error.hpp"

namespace nldholo {

using complex = std::complex<double>;

struct OpticalGrid {
    std::size_t nx = 0;
    std::size_t ny = 0;
    double pixel_pitch = 0.0; // um
    double wavelength = 0.0;  // um

    void validate() const
    {
        if (nx < 2 || ny < 2)
            throw domain_error("grid needs at least 2x2 pixels");
        if (!(pixel_pitch > 0.0) || !std::isfinite(pixel_pitch))
            throw domain_error("pixel pitch must be positive");
        if (!(wavelength > 0.0) || !std::isfinite(wavelength))
            throw domain_error("wavelength must be positive");
    }

    std::size_t pixels() const { return nx * ny; }

    /// Spatial frequency of column ix on the FFT-ordered lattice, in 1/um.
    double fx(std::size_t ix) const { return fft_frequency(ix, nx); }
    double fy(std::size_t iy) const { return fft_frequency(iy, ny); }

    bool operator==(const OpticalGrid&) const = default;

private:
    double fft_frequency(std::size_t i, std::size_t n) const
    {
        const auto k = i < (n + 1) / 2 ? static_cast<double>(i)
                                       : static_cast<double>(i) - static_cast<double>(n);
        return k / (static_cast<double>(n) * pixel_pitch);
    }
};

/// Reconstruction planes z0, z0 + dz, ..., z0 + (nz - 1) dz.
struct DepthAxis {
    double z0 = 0.0; // um, nearest plane to the sensor
    double dz = 1.0; // um
    std::size_t nz = 1;

    void validate() const
    {
        if (!(dz > 0.0) || !std::isfinite(dz))
            throw domain_error("depth spacing must be positive");
        if (nz < 1)
            throw domain_error("depth axis needs at least one slice");
        if (!std::isfinite(z0))
            throw domain_error("depth origin must be finite");
    }

    double z(std::size_t i) const { return z0 + static_cast<double>(i) * dz; }
    double z_last() const { return z(nz - 1); }

    bool contains(double z_um) const { return z_um >= z0 && z_um <= z_last(); }

    /// Nearest slice; ties go to the lower index.
    std::size_t nearest_slice(double z_um) const
    {
        const double t = (z_um - z0) / dz;
        if (t <= 0.0)
            return 0;
        auto i = static_cast<std::size_t>(std::floor(t));
        if (t - static_cast<double>(i) > 0.5)
            ++i;
        return i < nz ? i : nz - 1;
    }

    bool operator==(const DepthAxis&) const = default;
};

/// One ny x nx slice on an optical grid.
template <class T>
class Plane {
public:
    Plane() = default;
    explicit Plane(const OpticalGrid& grid, T fill = T{})
        : grid_(grid), values_(grid.pixels(), fill)
    {}
    Plane(const OpticalGrid& grid, std::vector<T> values)
        : grid_(grid), values_(std::move(values))
    {
        if (values_.size() != grid_.pixels())
            throw dimension_error("plane value count does not match grid");
    }

    const OpticalGrid& grid() const { return grid_; }
    std::size_t nx() const { return grid_.nx; }
    std::size_t ny() const { return grid_.ny; }
    std::size_t size() const { return values_.size(); }

    T& operator()(std::size_t ix, std::size_t iy) { return values_[ix + grid_.nx * iy]; }
    const T& operator()(std::size_t ix, std::size_t iy) const { return values_[ix + grid_.nx * iy]; }
    T& operator[](std::size_t i) { return values_[i]; }
    const T& operator[](std::size_t i) const { return values_[i]; }

    std::span<T> values() { return values_; }
    std::span<const T> values() const { return values_; }
    T* data() { return values_.data(); }
    const T* data() const { return values_.data(); }

private:
    OpticalGrid grid_;
    std::vector<T> values_;
};

/// nz slices on a common grid, stored contiguously.
template <class T>
class Stack {
public:
    Stack() = default;
    Stack(const OpticalGrid& grid, const DepthAxis& depth, T fill = T{})
        : grid_(grid), depth_(depth), values_(grid.pixels() * depth.nz, fill)
    {}

    const OpticalGrid& grid() const { return grid_; }
    const DepthAxis& depth() const { return depth_; }
    std::size_t nx() const { return grid_.nx; }
    std::size_t ny() const { return grid_.ny; }
    std::size_t nz() const { return depth_.nz; }
    std::size_t slice_size() const { return grid_.pixels(); }
    std::size_t size() const { return values_.size(); }

    T& operator()(std::size_t ix, std::size_t iy, std::size_t iz)
    {
        return values_[ix + grid_.nx * (iy + grid_.ny * iz)];
    }
    const T& operator()(std::size_t ix, std::size_t iy, std::size_t iz) const
    {
        return values_[ix + grid_.nx * (iy + grid_.ny * iz)];
    }
    T& operator[](std::size_t i) { return values_[i]; }
    const T& operator[](std::size_t i) const { return values_[i]; }

    std::span<T> slice(std::size_t iz) { return {values_.data() + iz * slice_size(), slice_size()}; }
    std::span<const T> slice(std::size_t iz) const
    {
        return {values_.data() + iz * slice_size(), slice_size()};
    }

    Plane<T> slice_plane(std::size_t iz) const
    {
        auto s = slice(iz);
        return Plane<T>(grid_, std::vector<T>(s.begin(), s.end()));
    }

    std::span<T> values() { return values_; }
    std::span<const T> values() const { return values_; }
    T* data() { return values_.data(); }
    const T* data() const { return values_.data(); }

    bool same_shape(const OpticalGrid& g, const DepthAxis& d) const
    {
        return g.nx == grid_.nx && g.ny == grid_.ny && d.nz == depth_.nz;
    }
    template <class U>
    bool same_shape(const Stack<U>& other) const
    {
        return same_shape(other.grid(), other.depth());
    }

private:
    OpticalGrid grid_;
    DepthAxis depth_;
    std::vector<T> values_;
};

using ComplexField = Plane<complex>;
using RealField = Plane<double>;
using Volume = Stack<complex>;
using ScalarVolume = Stack<double>;

template <class T>
struct Gradient3 {
    Stack<T> x;
    Stack<T> y;
    Stack<T> z;
};

inline double squared_modulus(double v) { return v * v; }
inline double squared_modulus(const complex& v) { return std::norm(v); }

template <class T>
bool all_finite(std::span<const T> v)
{
    for (const auto& e : v)
        if (!std::isfinite(squared_modulus(e)))
            return false;
    return true;
}

/// Forward differences with replicate boundary.  x and y are in index
/// units; the z difference is multiplied by z_scale (pixel pitch over
/// depth spacing).  The last row, column and slice differences are zero.
template <class T>
Gradient3<T> gradient3d(const Stack<T>& v, double z_scale)
{
    const auto nx = v.nx(), ny = v.ny(), nz = v.nz();
    Gradient3<T> g{Stack<T>(v.grid(), v.depth()), Stack<T>(v.grid(), v.depth()),
                   Stack<T>(v.grid(), v.depth())};
    for (std::size_t iz = 0; iz < nz; ++iz) {
        for (std::size_t iy = 0; iy < ny; ++iy) {
            const std::size_t row = nx * (iy + ny * iz);
            for (std::size_t ix = 0; ix + 1 < nx; ++ix)
                g.x[row + ix] = v[row + ix + 1] - v[row + ix];
            if (iy + 1 < ny)
                for (std::size_t ix = 0; ix < nx; ++ix)
                    g.y[row + ix] = v[row + nx + ix] - v[row + ix];
            if (iz + 1 < nz) {
                const std::size_t plane = nx * ny;
                for (std::size_t ix = 0; ix < nx; ++ix)
                    g.z[row + ix] = z_scale * (v[row + plane + ix] - v[row + ix]);
            }
        }
    }
    return g;
}

/// Exact negative adjoint of gradient3d (backward differences).
template <class T>
Stack<T> divergence3d(const Stack<T>& gx, const Stack<T>& gy, const Stack<T>& gz, double z_scale)
{
    if (!gx.same_shape(gy) || !gx.same_shape(gz))
        throw dimension_error("divergence3d: component shapes differ");
    const auto nx = gx.nx(), ny = gx.ny(), nz = gx.nz();
    const std::size_t plane = nx * ny;
    Stack<T> out(gx.grid(), gx.depth());
    for (std::size_t iz = 0; iz < nz; ++iz) {
        for (std::size_t iy = 0; iy < ny; ++iy) {
            const std::size_t row = nx * (iy + ny * iz);
            for (std::size_t ix = 0; ix < nx; ++ix) {
                const std::size_t i = row + ix;
                T d{};
                if (ix + 1 < nx)
                    d += gx[i];
                if (ix > 0)
                    d -= gx[i - 1];
                if (iy + 1 < ny)
                    d += gy[i];
                if (iy > 0)
                    d -= gy[i - nx];
                T dzv{};
                if (iz + 1 < nz)
                    dzv += gz[i];
                if (iz > 0)
                    dzv -= gz[i - plane];
                out[i] = d + z_scale * dzv;
            }
        }
    }
    return out;
}

template <class T>
Stack<T> divergence3d(const Gradient3<T>& g, double z_scale)
{
    return divergence3d(g.x, g.y, g.z, z_scale);
}

inline ScalarVolume magnitude(const Volume& v)
{
    ScalarVolume m(v.grid(), v.depth());
    for (std::size_t i = 0; i < v.size(); ++i)
        m[i] = std::abs(v[i]);
    return m;
}

/// Pointwise |(gx, gy, gz)|; complex components contribute |re|^2 + |im|^2.
template <class T>
ScalarVolume gradient_magnitude(const Gradient3<T>& g)
{
    ScalarVolume m(g.x.grid(), g.x.depth());
    for (std::size_t i = 0; i < m.size(); ++i)
        m[i] = std::sqrt(squared_modulus(g.x[i]) + squared_modulus(g.y[i]) + squared_modulus(g.z[i]));
    return m;
}

} // namespace nldholo
