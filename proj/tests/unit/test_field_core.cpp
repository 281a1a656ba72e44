#include <gtest/gtest.h>

#include <random>

#include "nldholo/field_core.hpp"

using namespace nldholo;

namespace {

ScalarVolume random_scalar(std::size_t nx, std::size_t ny, std::size_t nz, std::uint64_t seed)
{
    ScalarVolume v(OpticalGrid{nx, ny, 2.0, 0.66}, DepthAxis{100.0, 20.0, nz});
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (auto& x : v.values())
        x = u(rng);
    return v;
}

double dot(const ScalarVolume& a, const ScalarVolume& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        s += a[i] * b[i];
    return s;
}

} // namespace

TEST(OpticalGrid, RejectsInvalidGeometry)
{
    EXPECT_THROW((OpticalGrid{1, 4, 2.0, 0.66}.validate()), domain_error);
    EXPECT_THROW((OpticalGrid{4, 4, 0.0, 0.66}.validate()), domain_error);
    EXPECT_THROW((OpticalGrid{4, 4, 2.0, -1.0}.validate()), domain_error);
    EXPECT_NO_THROW((OpticalGrid{2, 2, 2.0, 0.66}.validate()));
}

TEST(OpticalGrid, FrequencyLatticeIsFftOrdered)
{
    const OpticalGrid g{8, 5, 2.0, 0.66};
    const double df = 1.0 / (8 * 2.0);
    EXPECT_DOUBLE_EQ(g.fx(0), 0.0);
    EXPECT_DOUBLE_EQ(g.fx(1), df);
    EXPECT_DOUBLE_EQ(g.fx(3), 3 * df);
    EXPECT_DOUBLE_EQ(g.fx(4), -4 * df); // Nyquist sits on the negative side
    EXPECT_DOUBLE_EQ(g.fx(7), -df);
    for (std::size_t i = 0; i < 8; ++i) {
        EXPECT_GE(g.fx(i), -0.5 / 2.0);
        EXPECT_LT(g.fx(i), 0.5 / 2.0);
    }
    EXPECT_DOUBLE_EQ(g.fy(2), 2.0 / (5 * 2.0));
    EXPECT_DOUBLE_EQ(g.fy(3), -2.0 / (5 * 2.0));
}

TEST(DepthAxis, SlicePositionsAndSnapping)
{
    const DepthAxis d{4338.0, 20.0, 101};
    EXPECT_DOUBLE_EQ(d.z(0), 4338.0);
    EXPECT_DOUBLE_EQ(d.z(50), 5338.0);
    EXPECT_DOUBLE_EQ(d.z_last(), 6338.0);
    EXPECT_EQ(d.nearest_slice(5341.0), 50u);
    EXPECT_EQ(d.nearest_slice(5348.0), 50u); // halfway ties go to the lower slice
    EXPECT_EQ(d.nearest_slice(5349.0), 51u);
    EXPECT_TRUE(d.contains(4338.0));
    EXPECT_FALSE(d.contains(6338.5));
    EXPECT_THROW((DepthAxis{0.0, 0.0, 3}.validate()), domain_error);
    EXPECT_THROW((DepthAxis{0.0, 1.0, 0}.validate()), domain_error);
}

TEST(Gradient3d, ConstantVolumeHasZeroGradient)
{
    ScalarVolume v(OpticalGrid{5, 4, 1.0, 1.0}, DepthAxis{1.0, 1.0, 3});
    for (auto& x : v.values())
        x = 3.25;
    const auto g = gradient3d(v, 0.1);
    for (std::size_t i = 0; i < v.size(); ++i) {
        EXPECT_EQ(g.x[i], 0.0);
        EXPECT_EQ(g.y[i], 0.0);
        EXPECT_EQ(g.z[i], 0.0);
    }
}

TEST(Gradient3d, ImpulseMatchesHandStencil)
{
    ScalarVolume v(OpticalGrid{3, 3, 1.0, 1.0}, DepthAxis{1.0, 1.0, 3});
    v(1, 1, 1) = 1.0;
    const double zs = 0.1;
    const auto g = gradient3d(v, zs);
    // oracle: forward differences, zero on the last row/column/slice
    for (std::size_t z = 0; z < 3; ++z)
        for (std::size_t y = 0; y < 3; ++y)
            for (std::size_t x = 0; x < 3; ++x) {
                const double gx = x + 1 < 3 ? v(x + 1, y, z) - v(x, y, z) : 0.0;
                const double gy = y + 1 < 3 ? v(x, y + 1, z) - v(x, y, z) : 0.0;
                const double gz = z + 1 < 3 ? zs * (v(x, y, z + 1) - v(x, y, z)) : 0.0;
                EXPECT_EQ(g.x(x, y, z), gx);
                EXPECT_EQ(g.y(x, y, z), gy);
                EXPECT_EQ(g.z(x, y, z), gz);
            }
    EXPECT_EQ(g.x(1, 1, 1), -1.0);
    EXPECT_EQ(g.x(0, 1, 1), 1.0);
    EXPECT_DOUBLE_EQ(g.z(1, 1, 0), zs);
}

TEST(Gradient3d, SingleSliceHasNoZComponent)
{
    const auto v = random_scalar(6, 5, 1, 3);
    const auto g = gradient3d(v, 0.1);
    for (double x : g.z.values())
        EXPECT_EQ(x, 0.0);
}

TEST(Gradient3d, ZScaleIsLinear)
{
    const auto v = random_scalar(6, 5, 4, 4);
    const auto a = gradient3d(v, 0.1);
    const auto b = gradient3d(v, 0.3);
    for (std::size_t i = 0; i < v.size(); ++i) {
        EXPECT_EQ(a.x[i], b.x[i]);
        EXPECT_EQ(a.y[i], b.y[i]);
        EXPECT_NEAR(3.0 * a.z[i], b.z[i], 1e-15);
    }
}

TEST(Divergence3d, IsNegativeAdjointOfGradient)
{
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<std::size_t> dim(4, 16);
    for (int trial = 0; trial < 10; ++trial) {
        const auto nx = dim(rng), ny = dim(rng), nz = dim(rng);
        const auto u = random_scalar(nx, ny, nz, 100 + trial);
        const Gradient3<double> p{random_scalar(nx, ny, nz, 200 + trial), random_scalar(nx, ny, nz, 300 + trial),
                                  random_scalar(nx, ny, nz, 400 + trial)};
        const double zs = 0.1;
        const auto gu = gradient3d(u, zs);
        const double lhs = dot(gu.x, p.x) + dot(gu.y, p.y) + dot(gu.z, p.z);
        const double rhs = -dot(u, divergence3d(p.x, p.y, p.z, zs));
        EXPECT_LE(std::abs(lhs - rhs), 1e-12 * std::max(1.0, std::abs(lhs))) << "trial " << trial;
    }
}

TEST(Divergence3d, ZeroFieldAndShapeMismatch)
{
    const ScalarVolume z(OpticalGrid{4, 4, 1.0, 1.0}, DepthAxis{1.0, 1.0, 2});
    const auto div = divergence3d(z, z, z, 0.1);
    for (double v : div.values())
        EXPECT_EQ(v, 0.0);
    const ScalarVolume other(OpticalGrid{5, 4, 1.0, 1.0}, DepthAxis{1.0, 1.0, 2});
    EXPECT_THROW(divergence3d(z, other, z, 0.1), dimension_error);
}

TEST(Divergence3d, LaplacianOfQuadraticRamp)
{
    // u = x^2 + 2 y^2 + 3 z^2: interior discrete Laplacian is 2 + 4 + 6 zs^2
    ScalarVolume u(OpticalGrid{7, 7, 1.0, 1.0}, DepthAxis{1.0, 1.0, 7});
    for (std::size_t z = 0; z < 7; ++z)
        for (std::size_t y = 0; y < 7; ++y)
            for (std::size_t x = 0; x < 7; ++x)
                u(x, y, z) = double(x * x) + 2.0 * double(y * y) + 3.0 * double(z * z);
    const double zs = 0.5;
    const auto lap = divergence3d(gradient3d(u, zs), zs);
    for (std::size_t z = 1; z < 6; ++z)
        for (std::size_t y = 1; y < 6; ++y)
            for (std::size_t x = 1; x < 6; ++x)
                EXPECT_NEAR(lap(x, y, z), 2.0 + 4.0 + 6.0 * zs * zs, 1e-12);
}

TEST(Magnitude, ModulusOfComplexVolume)
{
    Volume v(OpticalGrid{4, 3, 1.0, 1.0}, DepthAxis{1.0, 1.0, 2});
    v(2, 1, 1) = complex(3.0, 4.0);
    const auto m = magnitude(v);
    EXPECT_EQ(m(2, 1, 1), 5.0);
    EXPECT_EQ(m(0, 0, 0), 0.0);

    std::mt19937_64 rng(5);
    std::normal_distribution<double> n;
    for (auto& x : v.values())
        x = complex(n(rng), n(rng));
    const auto m2 = magnitude(v);
    for (std::size_t i = 0; i < v.size(); ++i)
        EXPECT_NEAR(m2[i] * m2[i], v[i].real() * v[i].real() + v[i].imag() * v[i].imag(), 1e-14);
}
