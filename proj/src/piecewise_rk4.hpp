#pragma once

// Fixed-step RK4 for vector fields that are smooth between boundary contacts.
// The set of active constraints is frozen over a step; when an inactive
// constraint would be crossed the step is bisected down to the crossing.

#include <algorithm>
#include <cmath>
#include <vector>

#include "laplab/errors.hpp"

namespace laplab::detail
{
    using Vec = std::vector<double>;

    struct StepControl
    {
        double step = 1e-3;
        double boundary_tol = 1e-9;
        double output_interval = 1e-2;
        // Consecutive sub-1e-13 steps tolerated before reporting chattering.
        int max_tiny_steps = 10000;
    };

    // Model concept:
    //   Vec gaps(const Vec& y)            constraint slacks, >= 0 when feasible
    //   Vec derivative(const Vec& y, const std::vector<bool>& active)
    //   void project(Vec& y, double tol)  snap float noise onto the boundary
    template <typename Model, typename Sink>
    void integrate_piecewise(Vec y, Model& model, double horizon, const StepControl& ctl, Sink&& sink)
    {
        const std::size_t n = y.size();
        auto active_set = [&](const Vec& state) {
            const Vec g = model.gaps(state);
            std::vector<bool> a(g.size());
            for (std::size_t k = 0; k < g.size(); ++k)
                a[k] = g[k] <= ctl.boundary_tol;
            return a;
        };
        auto rk4 = [&](const Vec& y0, double h, const std::vector<bool>& active) {
            Vec k1 = model.derivative(y0, active);
            Vec tmp(n);
            for (std::size_t i = 0; i < n; ++i)
                tmp[i] = y0[i] + 0.5 * h * k1[i];
            Vec k2 = model.derivative(tmp, active);
            for (std::size_t i = 0; i < n; ++i)
                tmp[i] = y0[i] + 0.5 * h * k2[i];
            Vec k3 = model.derivative(tmp, active);
            for (std::size_t i = 0; i < n; ++i)
                tmp[i] = y0[i] + h * k3[i];
            Vec k4 = model.derivative(tmp, active);
            Vec out(n);
            for (std::size_t i = 0; i < n; ++i)
                out[i] = y0[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            return out;
        };
        auto crossed = [&](const Vec& y1, const std::vector<bool>& active) {
            const Vec g = model.gaps(y1);
            for (std::size_t k = 0; k < g.size(); ++k)
                if (!active[k] && g[k] < 0.0)
                    return true;
            return false;
        };

        model.project(y, ctl.boundary_tol);
        double t = 0.0;
        long out_index = 0;
        sink(0.0, y);
        ++out_index;
        int tiny_steps = 0;
        while (t < horizon)
        {
            const double next_out = std::min(horizon, static_cast<double>(out_index) * ctl.output_interval);
            const double h = std::min(ctl.step, next_out - t);
            const auto active = active_set(y);
            Vec y1 = rk4(y, h, active);
            double taken = h;
            if (crossed(y1, active))
            {
                double lo = 0.0, hi = h;
                for (int it = 0; it < 200 && hi - lo > 1e-15 * std::max(1.0, t); ++it)
                {
                    const double mid = 0.5 * (lo + hi);
                    if (crossed(rk4(y, mid, active), active))
                        hi = mid;
                    else
                        lo = mid;
                }
                taken = hi;
                y1 = rk4(y, hi, active);
            }
            tiny_steps = taken < 1e-13 ? tiny_steps + 1 : 0;
            if (tiny_steps > ctl.max_tiny_steps)
                throw StepUnderflowError("integration step underflow near a boundary (chattering)");
            model.project(y1, ctl.boundary_tol);
            y = std::move(y1);
            if (taken == h && h == next_out - t)
            {
                t = next_out;
                sink(t, y);
                ++out_index;
            }
            else
                t += taken;
        }
    }
}
