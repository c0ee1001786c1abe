#pragma once

#include <cstdint>
#include <vector>

#include "laplab/network.hpp"
#include "laplab/priority.hpp"

namespace laplab
{
    struct FluidState
    {
        std::vector<double> psi; // per activity
        std::vector<double> q;   // per class

        double in_system(int cls, const Network& net) const;
    };

    struct FluidRates
    {
        std::vector<double> start_rate; // d xi_ij / dt
        std::vector<double> psi_dot;
        std::vector<double> q_dot;
    };

    // Which boundary each class queue and pool sits on.
    struct BoundaryFlags
    {
        std::vector<bool> queue_positive; // per class
        std::vector<bool> pool_full;      // per pool
    };

    // Sequential budget allocation of service-start rates. Activities are
    // visited in priority order with the class inflow still unrouted and the
    // freed service capacity of each pool as budgets:
    //   0 if a higher-priority class queues at the pool,
    //   the pool's remaining freed capacity if the class queues,
    //   the remaining inflow if the pool is slack,
    //   the smaller of the two otherwise.
    // Shared by the fluid and hydrodynamic models, which differ only in the
    // budgets and the boundary flags they pass.
    std::vector<double> allocate_start_rates(const Network& net, const PriorityOrder& po,
                                             const std::vector<double>& service_budget, const BoundaryFlags& flags);

    BoundaryFlags fluid_flags(const FluidState& s, const Network& net, double tol = 1e-9);

    // Throws InvalidStateError when the state leaves the feasible region by
    // more than tol.
    FluidRates allocate_rates(const FluidState& s, const Network& net, const PriorityOrder& po, double tol = 1e-9);

    // Moves queued fluid into idle capacity (activities in priority order), the
    // instantaneous jump a state with queued fluid and idle compatible servers
    // undergoes at time 0+.
    FluidState settle_fluid_state(FluidState s, const Network& net, const PriorityOrder& po);

    struct IntegratorOptions
    {
        double step = 1e-3;
        double boundary_tol = 1e-9;
        double output_interval = 1e-2;
    };

    struct FluidTrajectory
    {
        std::vector<double> t;
        std::vector<FluidState> states;
        std::vector<std::vector<double>> departed; // cumulative int mu_ij psi_ij per activity
    };

    FluidTrajectory integrate_fluid(const FluidState& initial, const Network& net, const PriorityOrder& po,
                                    double horizon, const IntegratorOptions& opts = {});

    // Euclidean distance of (psi - psi*, q) from the equilibrium.
    double distance_to_equilibrium(const FluidState& s, const EquilibriumPoint& eq);

    struct DrainOptions
    {
        int random_samples = 20;
        std::uint64_t seed = 1;
        double horizon = 60.0;
        IntegratorOptions integrator;
    };

    struct DrainReport
    {
        double drain_time = 0.0;          // max over sampled initial states
        std::vector<FluidState> initial;  // grid points then random samples
        std::vector<double> times;        // per initial state
        std::vector<FluidState> terminal; // state at the horizon
    };

    // Latest time, over a deterministic grid plus random initial states with
    // |(psi, q)| <= bound, after which the trajectory stays within tol of the
    // equilibrium up to the horizon. Throws HorizonExceededError when some
    // trajectory has not settled by the horizon.
    DrainReport drain_time(double bound, double tol, const Network& net, const PriorityOrder& po,
                           const DrainOptions& opts = {});

    std::vector<FluidState> drain_initial_states(double bound, const Network& net, int random_samples,
                                                 std::uint64_t seed);
}
