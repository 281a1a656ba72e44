#pragma once

// Per-slice focus curves, peak picking and the hologram resolution limits.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "nldholo/field_core.hpp"

namespace nldholo {

enum class CurveKind { max_intensity, max_gradient };

inline std::string to_string(CurveKind k) { return k == CurveKind::max_intensity ? "max_intensity" : "max_gradient"; }

struct SliceCurve {
    DepthAxis depth;
    std::vector<double> values;
    CurveKind kind = CurveKind::max_intensity;
};

/// max over pixels of |slice_i|^2.
inline SliceCurve max_intensity_curve(const Volume& x)
{
    SliceCurve c{x.depth(), std::vector<double>(x.nz(), 0.0), CurveKind::max_intensity};
    for (std::size_t iz = 0; iz < x.nz(); ++iz)
        for (const auto& v : x.slice(iz))
            c.values[iz] = std::max(c.values[iz], std::norm(v));
    return c;
}

/// max over pixels of the scaled 3D gradient magnitude of |x|, per slice.
inline SliceCurve max_gradient_curve(const Volume& x, double z_scale)
{
    const auto gm = gradient_magnitude(gradient3d(magnitude(x), z_scale));
    SliceCurve c{x.depth(), std::vector<double>(x.nz(), 0.0), CurveKind::max_gradient};
    for (std::size_t iz = 0; iz < x.nz(); ++iz)
        for (double v : gm.slice(iz))
            c.values[iz] = std::max(c.values[iz], v);
    return c;
}

inline std::size_t argmax(const std::vector<double>& v)
{
    return static_cast<std::size_t>(std::distance(v.begin(), std::max_element(v.begin(), v.end())));
}

/// Positive local maxima.  A plateau counts once, at its lowest index, when
/// both sides fall off (or it touches an end of the curve).
inline std::vector<std::size_t> local_maxima(const std::vector<double>& v)
{
    std::vector<std::size_t> out;
    const std::size_t n = v.size();
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[j + 1] == v[i])
            ++j;
        const bool left_ok = i == 0 || v[i - 1] < v[i];
        const bool right_ok = j + 1 == n || v[j + 1] < v[i];
        if (left_ok && right_ok && v[i] > 0.0)
            out.push_back(i);
        i = j + 1;
    }
    return out;
}

struct PeakPick {
    std::vector<std::size_t> slices; // ascending
    std::size_t shortfall = 0;       // expected_count - slices.size()
};

/// The expected_count largest local maxima, pairwise at least
/// min_separation slices apart; ties prefer the lower index.
inline PeakPick localize(const SliceCurve& curve, std::size_t expected_count, std::size_t min_separation = 5)
{
    if (expected_count < 1)
        throw domain_error("localize: expected_count must be at least 1");
    auto candidates = local_maxima(curve.values);
    std::stable_sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) {
        return curve.values[a] > curve.values[b];
    });
    PeakPick pick;
    for (auto c : candidates) {
        if (pick.slices.size() == expected_count)
            break;
        const bool far_enough = std::all_of(pick.slices.begin(), pick.slices.end(), [&](std::size_t s) {
            return (c > s ? c - s : s - c) >= min_separation;
        });
        if (far_enough)
            pick.slices.push_back(c);
    }
    std::sort(pick.slices.begin(), pick.slices.end());
    pick.shortfall = expected_count - pick.slices.size();
    return pick;
}

struct ResolutionLimits {
    double lateral_um = 0.0;
    double axial_um = 0.0;
};

/// lateral = lambda z / (2 d), axial = 2 lambda z^2 / d^2, d = ny * pitch.
inline ResolutionLimits resolution_limits(const OpticalGrid& grid, double z)
{
    grid.validate();
    if (!(z > 0.0))
        throw domain_error("resolution_limits: z must be positive");
    const double d = static_cast<double>(grid.ny) * grid.pixel_pitch;
    return {grid.wavelength * z / (2.0 * d), 2.0 * grid.wavelength * z * z / (d * d)};
}

struct ParticleLocalization {
    std::size_t true_slice = 0;
    std::size_t detected_slice = 0;
    long long slice_error = 0;
    double detected_z_um = 0.0;
    bool detected = false;
};

struct LocalizationReport {
    std::vector<ParticleLocalization> particles;
    bool all_detected = false;
    std::size_t peaks_found = 0;
};

/// Pairs ascending true slices with ascending detected peaks.  The number
/// of peaks searched for is the number of distinct true slices; when fewer
/// are found, each peak goes to the nearest still unmatched true slice.
inline LocalizationReport build_report(const SliceCurve& curve, std::vector<std::size_t> true_slices,
                                       std::size_t min_separation = 5)
{
    LocalizationReport rep;
    std::sort(true_slices.begin(), true_slices.end());
    true_slices.erase(std::unique(true_slices.begin(), true_slices.end()), true_slices.end());
    if (true_slices.empty())
        return rep;
    const auto pick = localize(curve, true_slices.size(), min_separation);
    rep.peaks_found = pick.slices.size();
    rep.all_detected = pick.shortfall == 0;
    for (auto t : true_slices)
        rep.particles.push_back({t, 0, 0, 0.0, false});

    auto assign = [&](ParticleLocalization& p, std::size_t peak) {
        p.detected = true;
        p.detected_slice = peak;
        p.slice_error = static_cast<long long>(peak) - static_cast<long long>(p.true_slice);
        p.detected_z_um = curve.depth.z(peak);
    };
    if (rep.all_detected) {
        for (std::size_t i = 0; i < pick.slices.size(); ++i)
            assign(rep.particles[i], pick.slices[i]);
        return rep;
    }
    for (auto peak : pick.slices) {
        ParticleLocalization* best = nullptr;
        for (auto& p : rep.particles) {
            if (p.detected)
                continue;
            const auto d = peak > p.true_slice ? peak - p.true_slice : p.true_slice - peak;
            if (!best || d < (peak > best->true_slice ? peak - best->true_slice : best->true_slice - peak))
                best = &p;
        }
        if (best)
            assign(*best, peak);
    }
    return rep;
}

} // namespace nldholo
