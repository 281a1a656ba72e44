#pragma once

// Iterative shrinkage/thresholding reconstruction of a volume from one
// hologram: back-propagated residual steps alternating with nonlinear
// diffusion, with a halve-on-increase step-size schedule.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "nldholo/field_core.hpp"
#include "nldholo/propagation.hpp"
#include "nldholo/regularizer.hpp"
#include "nldholo/simulate.hpp"

namespace nldholo {

struct SolverConfig {
    double tau = 1.0;
    DiffusionParams diffusion;
    double stop_threshold = 1e-5;
    std::size_t max_iters = 2000; // 0 returns the back-propagated estimate
    double step_init = 1.0;
    double step_decay = 0.5;
    bool normalize_input = true;

    void validate() const
    {
        if (!(tau >= 0.0) || !std::isfinite(tau))
            throw domain_error("tau must be finite and non-negative");
        diffusion.validate();
        if (!(stop_threshold > 0.0))
            throw domain_error("stop threshold must be positive");
        if (!(step_init > 0.0))
            throw domain_error("initial step size must be positive");
        if (!(step_decay > 0.0 && step_decay < 1.0))
            throw domain_error("step decay must lie in (0, 1)");
    }
};

struct TraceRecord {
    std::size_t iter = 0; // trial index at which the iterate was accepted
    double objective = 0.0;
    double data_term = 0.0;
    double penalty_term = 0.0;
    double step_size = 0.0;
    double delta_obj = std::numeric_limits<double>::quiet_NaN(); // NaN for the initial row
};

/// Accepted iterates only; row 0 is the initial estimate.
struct ConvergenceTrace {
    std::vector<TraceRecord> records;
};

struct LinearizedMeasurement {
    RealField y_prime;
    double background = 0.0;
};

struct ObjectiveValue {
    double total = 0.0;
    double data_term = 0.0;
    double penalty_term = 0.0;
};

enum class StopReason { converged, max_iters, stalled, skipped };

inline std::string to_string(StopReason r)
{
    switch (r) {
    case StopReason::converged: return "converged";
    case StopReason::max_iters: return "max_iters";
    case StopReason::stalled: return "stalled";
    case StopReason::skipped: return "skipped";
    }
    return "unknown";
}

struct SolveResult {
    Volume volume; // de-normalized
    ConvergenceTrace trace;
    StopReason reason = StopReason::max_iters;
    std::size_t iterations = 0; // trials, accepted or not
    double scale = 1.0;         // factor applied to data and estimate while solving

    bool converged() const { return reason == StopReason::converged || reason == StopReason::skipped; }
};

/// Mean background removal; the remaining signal is modelled as 2 Re{A x}.
inline LinearizedMeasurement linearize(const Hologram& h)
{
    LinearizedMeasurement m{RealField(h.grid()), h.mean()};
    for (std::size_t i = 0; i < h.size(); ++i)
        m.y_prime[i] = h[i] - m.background;
    return m;
}

inline RealField data_residual(const LinearizedMeasurement& m, const Volume& x, const FresnelOperator& op)
{
    const auto h = op.forward(x);
    RealField r(m.y_prime.grid());
    for (std::size_t i = 0; i < r.size(); ++i)
        r[i] = m.y_prime[i] - 2.0 * h[i].real();
    return r;
}

inline RealField data_residual(const LinearizedMeasurement& m, const Volume& x)
{
    return data_residual(m, x, FresnelOperator(x.grid(), x.depth()));
}

inline double half_squared_norm(const RealField& r)
{
    std::vector<double> sq(r.size());
    for (std::size_t i = 0; i < r.size(); ++i)
        sq[i] = r[i] * r[i];
    return 0.5 * pairwise_sum(sq);
}

inline ObjectiveValue objective_from_residual(const RealField& r, const Volume& x, const SolverConfig& cfg)
{
    ObjectiveValue v;
    v.data_term = half_squared_norm(r);
    v.penalty_term = cfg.tau == 0.0 ? 0.0 : cfg.tau * penalty(x, cfg.diffusion);
    v.total = v.data_term + v.penalty_term;
    return v;
}

inline ObjectiveValue objective(const LinearizedMeasurement& m, const Volume& x, const SolverConfig& cfg)
{
    return objective_from_residual(data_residual(m, x), x, cfg);
}

inline ComplexField lift(const RealField& r)
{
    ComplexField f(r.grid());
    for (std::size_t i = 0; i < r.size(); ++i)
        f[i] = complex(r[i], 0.0);
    return f;
}

/// 99th percentile of |x|.
inline double magnitude_percentile99(const Volume& x)
{
    std::vector<double> mags(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        mags[i] = std::abs(x[i]);
    if (mags.empty())
        return 0.0;
    const auto k = static_cast<std::size_t>(std::floor(0.99 * static_cast<double>(mags.size() - 1)));
    std::nth_element(mags.begin(), mags.begin() + static_cast<std::ptrdiff_t>(k), mags.end());
    return mags[k];
}

struct InitialEstimate {
    Volume x;          // already multiplied by scale
    double scale = 1.0;
};

/// Back-propagation of the centred hologram, optionally scaled so the
/// 99th percentile of its modulus is 1.
inline InitialEstimate initialize(const LinearizedMeasurement& m, const FresnelOperator& op, const SolverConfig& cfg)
{
    InitialEstimate e{op.adjoint(lift(m.y_prime)), 1.0};
    if (cfg.normalize_input) {
        const double p99 = magnitude_percentile99(e.x);
        if (p99 > 0.0 && std::isfinite(p99)) {
            e.scale = 1.0 / p99;
            for (auto& v : e.x.values())
                v *= e.scale;
        }
    }
    return e;
}

inline InitialEstimate initialize(const LinearizedMeasurement& m, const DepthAxis& depth, const SolverConfig& cfg)
{
    return initialize(m, FresnelOperator(m.y_prime.grid(), depth), cfg);
}

using TraceObserver = std::function<void(const TraceRecord&)>;

inline SolveResult solve(const LinearizedMeasurement& m, const DepthAxis& depth, const SolverConfig& cfg,
                         const TraceObserver& observer = {})
{
    cfg.validate();
    const FresnelOperator op(m.y_prime.grid(), depth);
    auto init = initialize(m, op, cfg);

    SolveResult result;
    result.scale = init.scale;
    Volume x_hat = std::move(init.x);

    LinearizedMeasurement scaled{m.y_prime, m.background * init.scale};
    for (auto& v : scaled.y_prime.values())
        v *= init.scale;

    auto finish = [&](StopReason reason) {
        result.reason = reason;
        for (auto& v : x_hat.values())
            v /= result.scale;
        result.volume = std::move(x_hat);
        return std::move(result);
    };
    auto record = [&](TraceRecord rec) {
        result.trace.records.push_back(rec);
        if (observer)
            observer(rec);
    };

    auto r_hat = data_residual(scaled, x_hat, op);
    auto obj_hat = objective_from_residual(r_hat, x_hat, cfg);
    if (!std::isfinite(obj_hat.total))
        throw numeric_error("initial objective is not finite");
    double step = cfg.step_init;
    record({0, obj_hat.total, obj_hat.data_term, obj_hat.penalty_term, step,
            std::numeric_limits<double>::quiet_NaN()});

    if (cfg.max_iters == 0)
        return finish(StopReason::skipped);

    Volume back(op.grid(), depth), trial(op.grid(), depth);
    ScalarVolume flux(op.grid(), depth);
    while (result.iterations < cfg.max_iters) {
        ++result.iterations;
        if (obj_hat.total == 0.0) {
            record({result.iterations, 0.0, 0.0, 0.0, step, 0.0});
            return finish(StopReason::converged);
        }
        // tau = 0 is plain Landweber: the data step uses the step size itself
        const double t = cfg.tau > 0.0 ? cfg.tau * step : step;
        op.adjoint_into(lift(r_hat), back);
        if (cfg.tau > 0.0) {
            for (std::size_t i = 0; i < back.size(); ++i)
                back[i] = x_hat[i] + t * back[i];
            diffusion_step_into(back, cfg.diffusion, t, trial, flux);
        } else {
            for (std::size_t i = 0; i < back.size(); ++i)
                trial[i] = x_hat[i] + t * back[i];
        }

        auto r = data_residual(scaled, trial, op);
        const auto obj = objective_from_residual(r, trial, cfg);
        if (!std::isfinite(obj.total)) {
            std::ostringstream msg;
            msg << "objective became non-finite at iteration " << result.iterations << " (step size "
                << step << ")";
            throw numeric_error(msg.str());
        }
        if (obj.total < obj_hat.total) {
            const double delta = std::abs(obj.total - obj_hat.total) / obj_hat.total;
            std::swap(x_hat, trial);
            r_hat = std::move(r);
            obj_hat = obj;
            record({result.iterations, obj.total, obj.data_term, obj.penalty_term, step, delta});
            if (delta < cfg.stop_threshold)
                return finish(StopReason::converged);
        } else {
            // a rejected trial that no longer moves the objective by more than
            // the threshold means the step schedule has run its course
            if ((obj.total - obj_hat.total) / obj_hat.total < cfg.stop_threshold)
                return finish(StopReason::converged);
            step *= cfg.step_decay;
            if (!(step > 0.0))
                return finish(StopReason::stalled);
        }
    }
    return finish(StopReason::max_iters);
}

} // namespace nldholo
