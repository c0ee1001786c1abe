#include "laplab/fluid.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "laplab/errors.hpp"
#include "laplab/rng.hpp"
#include "piecewise_rk4.hpp"

namespace laplab
{
    namespace
    {
        // Violations larger than this are logic errors, not float noise.
        constexpr double abort_tol = 1e-6;

        struct FluidModel
        {
            const Network& net;
            const PriorityOrder& po;
            std::vector<std::size_t> order;
            std::size_t E;
            int I;
            int J;

            FluidModel(const Network& n, const PriorityOrder& p)
                : net(n), po(p), order(p.activities_by_rank()), E(n.num_activities()), I(n.num_classes),
                  J(n.num_pools)
            {
            }

            // Layout: psi (E), q (I), cumulative departures (E).
            detail::Vec gaps(const detail::Vec& y) const
            {
                detail::Vec g(I + J);
                for (int i = 0; i < I; ++i)
                    g[i] = y[E + i];
                for (int j = 0; j < J; ++j)
                    g[I + j] = net.beta[j];
                for (std::size_t e = 0; e < E; ++e)
                    g[I + net.activities[e].pool] -= y[e];
                return g;
            }

            detail::Vec derivative(const detail::Vec& y, const std::vector<bool>& active) const
            {
                BoundaryFlags flags;
                flags.queue_positive.resize(I);
                flags.pool_full.resize(J);
                for (int i = 0; i < I; ++i)
                    flags.queue_positive[i] = !active[i];
                for (int j = 0; j < J; ++j)
                    flags.pool_full[j] = active[I + j];
                std::vector<double> budget(J, 0.0);
                for (std::size_t e = 0; e < E; ++e)
                    budget[net.activities[e].pool] += net.activities[e].mu * y[e];
                const auto start = allocate_start_rates(net, po, budget, flags);
                detail::Vec d(2 * E + I, 0.0);
                for (std::size_t e = 0; e < E; ++e)
                {
                    const double served = net.activities[e].mu * y[e];
                    d[e] = start[e] - served;
                    d[E + net.activities[e].cls] -= start[e];
                    d[E + I + e] = served;
                }
                for (int i = 0; i < I; ++i)
                    d[E + i] += net.lambda[i];
                return d;
            }

            void project(detail::Vec& y, double tol) const
            {
                for (std::size_t e = 0; e < E; ++e)
                {
                    if (y[e] < -abort_tol)
                        throw InvalidStateError("fluid occupancy became negative");
                    if (y[e] < 0.0)
                        y[e] = 0.0;
                }
                for (int i = 0; i < I; ++i)
                {
                    double& q = y[E + i];
                    if (q < -abort_tol)
                        throw InvalidStateError("fluid queue became negative");
                    if (q <= tol)
                        q = 0.0;
                }
                auto g = gaps(y);
                for (int j = 0; j < J; ++j)
                {
                    double over = -g[I + j];
                    if (over > abort_tol * std::max(1.0, net.beta[j]))
                        throw InvalidStateError("fluid pool " + std::to_string(j + 1) + " over capacity");
                    // Trim overshoot from the lowest-priority activities of the pool.
                    for (auto it = order.rbegin(); it != order.rend() && over > 0.0; ++it)
                    {
                        if (net.activities[*it].pool != j)
                            continue;
                        const double cut = std::min(over, y[*it]);
                        y[*it] -= cut;
                        over -= cut;
                    }
                }
            }
        };

        double gaussian(Rng& rng)
        {
            return std::sqrt(-2.0 * std::log(rng.uniform())) * std::cos(2.0 * std::numbers::pi * rng.uniform());
        }
    }

    double FluidState::in_system(int cls, const Network& net) const
    {
        double x = q[cls];
        for (auto e : net.activities_of_class(cls))
            x += psi[e];
        return x;
    }

    std::vector<double> allocate_start_rates(const Network& net, const PriorityOrder& po,
                                             const std::vector<double>& service_budget, const BoundaryFlags& flags)
    {
        std::vector<double> inflow_left = net.lambda;
        std::vector<double> service_left = service_budget;
        std::vector<double> rate(net.num_activities(), 0.0);
        for (auto e : po.activities_by_rank())
        {
            const int i = net.activities[e].cls;
            const int j = net.activities[e].pool;
            bool blocked = false;
            for (auto f : net.activities_of_pool(j))
            {
                const int other = net.activities[f].cls;
                if (po.class_rank[other] < po.class_rank[i] && flags.queue_positive[other])
                {
                    blocked = true;
                    break;
                }
            }
            double r = 0.0;
            if (blocked)
                r = 0.0;
            else if (flags.queue_positive[i])
                r = service_left[j];
            else if (!flags.pool_full[j])
                r = inflow_left[i];
            else
                r = std::min(inflow_left[i], service_left[j]);
            r = std::max(0.0, r);
            rate[e] = r;
            inflow_left[i] -= r;
            service_left[j] -= r;
        }
        return rate;
    }

    BoundaryFlags fluid_flags(const FluidState& s, const Network& net, double tol)
    {
        BoundaryFlags f;
        f.queue_positive.resize(net.num_classes);
        for (int i = 0; i < net.num_classes; ++i)
            f.queue_positive[i] = s.q[i] > tol;
        const auto occ = pool_occupancy(net, s.psi);
        f.pool_full.resize(net.num_pools);
        for (int j = 0; j < net.num_pools; ++j)
            f.pool_full[j] = net.beta[j] - occ[j] <= tol;
        return f;
    }

    FluidRates allocate_rates(const FluidState& s, const Network& net, const PriorityOrder& po, double tol)
    {
        if (s.psi.size() != net.num_activities() || s.q.size() != static_cast<std::size_t>(net.num_classes))
            throw InvalidStateError("fluid state dimensions do not match the network");
        for (double v : s.psi)
            if (v < -tol)
                throw InvalidStateError("negative fluid occupancy");
        for (double v : s.q)
            if (v < -tol)
                throw InvalidStateError("negative fluid queue");
        const auto occ = pool_occupancy(net, s.psi);
        for (int j = 0; j < net.num_pools; ++j)
            if (occ[j] > net.beta[j] + tol)
                throw InvalidStateError("fluid pool " + std::to_string(j + 1) + " over capacity");

        const auto flags = fluid_flags(s, net, tol);
        std::vector<double> budget(net.num_pools, 0.0);
        for (std::size_t e = 0; e < net.num_activities(); ++e)
            budget[net.activities[e].pool] += net.activities[e].mu * s.psi[e];
        FluidRates out;
        out.start_rate = allocate_start_rates(net, po, budget, flags);
        out.psi_dot.resize(net.num_activities());
        out.q_dot = net.lambda;
        for (std::size_t e = 0; e < net.num_activities(); ++e)
        {
            out.psi_dot[e] = out.start_rate[e] - net.activities[e].mu * s.psi[e];
            out.q_dot[net.activities[e].cls] -= out.start_rate[e];
        }
        return out;
    }

    FluidState settle_fluid_state(FluidState s, const Network& net, const PriorityOrder& po)
    {
        auto occ = pool_occupancy(net, s.psi);
        for (auto e : po.activities_by_rank())
        {
            const int i = net.activities[e].cls;
            const int j = net.activities[e].pool;
            const double move = std::max(0.0, std::min(s.q[i], net.beta[j] - occ[j]));
            s.psi[e] += move;
            s.q[i] -= move;
            occ[j] += move;
        }
        return s;
    }

    FluidTrajectory integrate_fluid(const FluidState& initial, const Network& net, const PriorityOrder& po,
                                    double horizon, const IntegratorOptions& opts)
    {
        require_consistent(net, po);
        // Validates the initial state.
        allocate_rates(initial, net, po, opts.boundary_tol);
        const auto settled = settle_fluid_state(initial, net, po);
        FluidModel model(net, po);
        const std::size_t E = net.num_activities();
        const int I = net.num_classes;
        detail::Vec y(2 * E + I, 0.0);
        std::copy(settled.psi.begin(), settled.psi.end(), y.begin());
        std::copy(settled.q.begin(), settled.q.end(), y.begin() + E);

        FluidTrajectory traj;
        detail::StepControl ctl;
        ctl.step = opts.step;
        ctl.boundary_tol = opts.boundary_tol;
        ctl.output_interval = opts.output_interval;
        detail::integrate_piecewise(y, model, horizon, ctl, [&](double t, const detail::Vec& v) {
            traj.t.push_back(t);
            traj.states.push_back({std::vector<double>(v.begin(), v.begin() + E),
                                   std::vector<double>(v.begin() + E, v.begin() + E + I)});
            traj.departed.emplace_back(v.begin() + E + I, v.end());
        });
        return traj;
    }

    double distance_to_equilibrium(const FluidState& s, const EquilibriumPoint& eq)
    {
        double ss = 0.0;
        for (std::size_t e = 0; e < s.psi.size(); ++e)
            ss += (s.psi[e] - eq.occupancy[e]) * (s.psi[e] - eq.occupancy[e]);
        for (double v : s.q)
            ss += v * v;
        return std::sqrt(ss);
    }

    std::vector<FluidState> drain_initial_states(double bound, const Network& net, int random_samples,
                                                 std::uint64_t seed)
    {
        const std::size_t E = net.num_activities();
        const int I = net.num_classes;
        auto blank = [&] { return FluidState{std::vector<double>(E, 0.0), std::vector<double>(I, 0.0)}; };
        std::vector<FluidState> out;
        out.push_back(blank());
        for (std::size_t e = 0; e < E; ++e)
        {
            auto s = blank();
            s.psi[e] = std::min(bound, net.beta[net.activities[e].pool]);
            out.push_back(s);
        }
        for (int i = 0; i < I; ++i)
        {
            auto s = blank();
            s.q[i] = bound;
            out.push_back(s);
        }
        {
            auto s = blank();
            for (int i = 0; i < I; ++i)
                s.q[i] = bound / std::sqrt(static_cast<double>(I));
            out.push_back(s);
        }
        Rng rng(stream_seed(seed, 0xd7a1));
        const auto dim = static_cast<double>(E + I);
        for (int k = 0; k < random_samples; ++k)
        {
            std::vector<double> dir(E + I);
            double norm = 0.0;
            for (auto& d : dir)
            {
                d = std::abs(gaussian(rng));
                norm += d * d;
            }
            norm = std::sqrt(norm);
            const double radius = bound * std::pow(rng.uniform(), 1.0 / dim);
            auto s = blank();
            for (std::size_t e = 0; e < E; ++e)
                s.psi[e] = radius * dir[e] / norm;
            for (int i = 0; i < I; ++i)
                s.q[i] = radius * dir[E + i] / norm;
            const auto occ = pool_occupancy(net, s.psi);
            for (std::size_t e = 0; e < E; ++e)
            {
                const int j = net.activities[e].pool;
                if (occ[j] > net.beta[j])
                    s.psi[e] *= net.beta[j] / occ[j];
            }
            out.push_back(s);
        }
        return out;
    }

    DrainReport drain_time(double bound, double tol, const Network& net, const PriorityOrder& po,
                           const DrainOptions& opts)
    {
        const auto eq = compute_equilibrium(net, po, true);
        DrainReport report;
        report.initial = drain_initial_states(bound, net, opts.random_samples, opts.seed);
        for (const auto& init : report.initial)
        {
            const auto traj = integrate_fluid(init, net, po, opts.horizon, opts.integrator);
            std::size_t last_out = traj.t.size();
            for (std::size_t k = traj.t.size(); k-- > 0;)
                if (distance_to_equilibrium(traj.states[k], eq) >= tol)
                {
                    last_out = k;
                    break;
                }
            if (last_out + 1 == traj.t.size())
                throw HorizonExceededError("fluid trajectory did not settle near the equilibrium by the horizon");
            const double t = last_out == traj.t.size() ? 0.0 : traj.t[last_out + 1];
            report.times.push_back(t);
            report.terminal.push_back(traj.states.back());
            report.drain_time = std::max(report.drain_time, t);
        }
        return report;
    }
}
