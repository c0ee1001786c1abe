#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <variant>
#include <vector>

#include "laplab/model.hpp"
#include "laplab/network.hpp"
#include "laplab/priority.hpp"
#include "laplab/rng.hpp"

namespace laplab
{
    // Integer state of the r-scaled chain plus cumulative counters.
    struct SystemState
    {
        int scale = 1;
        std::vector<std::int64_t> psi;  // in service, per activity
        std::vector<std::int64_t> q;    // queued, per class
        std::vector<std::int64_t> busy; // busy servers per pool (derived from psi)
        double t = 0.0;
        std::vector<std::int64_t> arrivals;   // A_i
        std::vector<std::int64_t> departures; // D_ij
        std::vector<std::int64_t> starts;     // Xi_ij
        std::vector<std::int64_t> psi0;       // state at time 0 for flow identities
        std::vector<std::int64_t> q0;

        std::int64_t in_system(int cls, const Network& net) const;
    };

    // LAP lookup tables for one network, priority order and scale.
    class LapPolicy
    {
    public:
        LapPolicy(const Network& net, const PriorityOrder& po, int scale);

        const Network& network() const noexcept { return net_; }
        const PriorityOrder& order() const noexcept { return po_; }
        int scale() const noexcept { return scale_; }
        std::int64_t capacity(int pool) const { return capacity_[pool]; }
        const std::vector<std::int64_t>& capacities() const noexcept { return capacity_; }

        // Activities of a class, highest priority first.
        const std::vector<std::size_t>& routing_list(int cls) const { return routing_[cls]; }
        // Activities of a pool, highest class priority first.
        const std::vector<std::size_t>& scheduling_list(int pool) const { return scheduling_[pool]; }

    private:
        Network net_;
        PriorityOrder po_;
        int scale_;
        std::vector<std::int64_t> capacity_;
        std::vector<std::vector<std::size_t>> routing_;
        std::vector<std::vector<std::size_t>> scheduling_;
    };

    SystemState empty_state(const Network& net, int scale);

    // psi_ij = round(psi*_ij r); overflow in a pool is removed from its
    // lowest-priority activities first.
    SystemState equilibrium_rounded_state(const Network& net, const PriorityOrder& po,
                                          const EquilibriumPoint& eq, int scale);

    // Starts service for queued customers wherever a compatible server is idle
    // (activities in priority order), restoring work conservation. Throws
    // InvalidStateError on negative entries or pool overflow.
    void normalize_state(SystemState& state, const LapPolicy& policy);

    // Every violated SystemState invariant; empty when consistent.
    std::vector<std::string> state_violations(const SystemState& state, const LapPolicy& policy);

    // Arrival of a class: idle server at the highest-priority compatible pool,
    // otherwise the queue. Returns the pool used or -1 when queued.
    int route_arrival(SystemState& state, int cls, const LapPolicy& policy);

    // A server in the pool just freed up: it takes the highest-priority class
    // with a waiting customer. Returns the class started or -1 when idle.
    int schedule_server(SystemState& state, int pool, const LapPolicy& policy);

    struct EventRecord
    {
        enum class Kind
        {
            arrival,
            departure,
        };
        double t = 0.0;
        Kind kind = Kind::arrival;
        int cls = 0;
        int pool = -1; // pool served / departed from; -1 for an arrival that queued
    };

    double total_event_rate(const SystemState& state, const LapPolicy& policy);

    // One transition of the chain: exponential holding time at the total rate,
    // event chosen proportionally to its rate, LAP applied.
    EventRecord step_event(SystemState& state, const LapPolicy& policy, Rng& rng);

    enum class InitialKind
    {
        empty,
        equilibrium_rounded,
    };

    struct SimConfig
    {
        std::uint64_t seed = 1;
        int scale = 1;
        double horizon = 100.0;
        double warmup = 0.0;
        std::variant<InitialKind, SystemState> initial_state = InitialKind::equilibrium_rounded;
        double sample_interval = 1.0;
        bool record_trace = false;
        bool record_events = false;
        int num_batches = 1;
        // Time fraction with |F| above this level is reported as a tail estimate.
        double tail_threshold = std::numeric_limits<double>::infinity();

        void validate() const;
    };

    struct TraceRow
    {
        double t = 0.0;
        std::vector<std::int64_t> psi;
        std::vector<std::int64_t> q;
        double norm_f = 0.0;
    };

    // Time averages over a post-warmup window.
    struct WindowAverages
    {
        double duration = 0.0;
        std::vector<double> psi;
        std::vector<double> q;
        double norm_f = 0.0;    // Euclidean |F|
        double norm_f_l1 = 0.0; // L1 ||F||
        double total = 0.0;     // customers in system
        double workload = 0.0;  // fluid-scaled W = sum_i nu_i X_i / r
        double tail_fraction = 0.0;
    };

    struct SimResult
    {
        std::vector<TraceRow> trace;
        std::vector<EventRecord> events;
        WindowAverages summary;
        std::vector<WindowAverages> batches;
        SystemState final_state;
        std::int64_t num_events = 0;
    };

    // Deviation from the (unfloored) equilibrium: (Psi - psi* r, Q).
    double deviation_norm(const SystemState& s, const EquilibriumPoint& eq);
    double deviation_norm_l1(const SystemState& s, const EquilibriumPoint& eq);

    SystemState initial_state_for(const SimConfig& cfg, const LapPolicy& policy, const EquilibriumPoint& eq);

    SimResult simulate_horizon(const Network& net, const PriorityOrder& po, const EquilibriumPoint& eq,
                               const SimConfig& cfg);

    struct Estimate
    {
        double mean = 0.0;
        double half_width = 0.0;
    };

    struct StationaryEstimate
    {
        Estimate norm_f;
        Estimate norm_f_l1;
        Estimate total;
        Estimate workload;
        Estimate tail_fraction;
        std::vector<Estimate> psi;
        std::vector<Estimate> q;
        int num_batches = 0;
        double batch_length = 0.0;
    };

    // Batch means over num_batches equal post-warmup segments; 95% Student-t
    // half-widths. Throws InsufficientDataError for fewer than two batches.
    StationaryEstimate estimate_stationary(const Network& net, const PriorityOrder& po,
                                           const EquilibriumPoint& eq, SimConfig cfg, int num_batches);
}
