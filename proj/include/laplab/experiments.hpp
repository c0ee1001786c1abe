#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "laplab/execution.hpp"
#include "laplab/model.hpp"
#include "laplab/network.hpp"
#include "laplab/priority.hpp"
#include "laplab/simulator.hpp"
#include "laplab/stats.hpp"

namespace laplab
{
    struct ScalingConfig
    {
        std::vector<int> r_values{25, 50, 100, 200, 400};
        double epsilon = 0.25;
        // Horizon at scale r is T log r. Zero picks T so that the smallest r
        // runs for 20 fluid drain times.
        double horizon_multiplier = 0.0;
        double warmup_fraction = 0.2;
        int replications = 10;
        int num_batches = 10;
        std::uint64_t base_seed = 1;
        double tail_constant = 1.0; // tail event |F| > C r^(1/2+eps)
        int workers = 0;            // 0 = OpenMP default

        void validate() const;
    };

    struct ReplicationSummary
    {
        int r = 0;
        int replication = 0;
        std::uint64_t seed = 0;
        double mean_norm_f = 0.0;  // time average of |F| after warmup
        double ci_half_width = 0.0; // batch-means half-width
        double mean_norm_f_l1 = 0.0;
        double mean_w = 0.0;        // fluid-scaled workload
        double tail_fraction = 0.0;
    };

    struct ScaleSummary
    {
        int r = 0;
        double horizon = 0.0;
        Estimate norm_f;          // across replications
        double mean_w = 0.0;
        double scaled_norm = 0.0; // E|F| / r^(1/2+eps)
        double median_scaled_norm = 0.0;
        double fluid_scaled_norm = 0.0; // E|F| / r
        double tail_probability = 0.0;
    };

    struct ScalingResult
    {
        ScalingConfig config;
        double horizon_multiplier = 0.0; // resolved T
        std::vector<ReplicationSummary> replications;
        std::vector<ScaleSummary> scales;
        stats::LinearFit fit;
    };

    // Lower bound on the multiplier: 20 drain times (K = 1) at the smallest r.
    double default_horizon_multiplier(const Network& net, const PriorityOrder& po, int r_min);

    // Refuses to run (UnsupportedExperimentError) unless rho < 1.
    ScalingResult run_scaling_sweep(const Network& net, const PriorityOrder& po, const EquilibriumPoint& eq,
                                    const ScalingConfig& cfg, Execution mode = Execution::parallel);

    // Recomputes per-r aggregates and the fit from the per-replication rows.
    void summarise_sweep(ScalingResult& res);

    // OLS of log E|F| on log r.
    stats::LinearFit fit_tightness_exponent(const ScalingResult& res);
    stats::LinearFit fit_tightness_exponent(const std::vector<int>& r_values, const std::vector<double>& mean_norms);

    struct LyapunovConfig
    {
        int scale = 100;
        double window = 20.0;
        // Fluid-scaled workload to start from; empty = equilibrium start.
        std::optional<double> level = 5.0;
        int replications = 50;
        std::uint64_t base_seed = 1;
        int workers = 0;
    };

    struct DriftEstimate
    {
        double initial_workload = 0.0;
        std::int64_t padded_queue = 0;
        int padded_class = 0;
        Estimate drift;             // E[W(T) - W(0)], 95% half-width
        std::vector<double> samples;
        bool negative_with_confidence = false; // mean + half-width < 0
    };

    double fluid_workload(const SystemState& s, const Network& net, const DualVariables& duals);

    DriftEstimate lyapunov_drift_check(const Network& net, const PriorityOrder& po, const EquilibriumPoint& eq,
                                       const DualVariables& duals, const LyapunovConfig& cfg,
                                       Execution mode = Execution::parallel);

    struct FluidLlnConfig
    {
        std::vector<int> r_values{100, 400};
        int seeds = 20;
        double horizon = 10.0;
        double sample_interval = 0.05;
        std::uint64_t base_seed = 1;
        int workers = 0;
    };

    struct FluidLlnResult
    {
        std::vector<int> r_values;
        std::vector<std::vector<double>> sup_distance; // [r][seed]
        std::vector<double> median;                    // per r
    };

    // Sup over sample times of |(Psi/r, Q/r) - (psi, q)| for runs from empty
    // against the fluid model from zero.
    FluidLlnResult fluid_lln_check(const Network& net, const PriorityOrder& po, const EquilibriumPoint& eq,
                                   const FluidLlnConfig& cfg, Execution mode = Execution::parallel);

    std::string sweep_csv(const ScalingResult& res);
    nlohmann::json sweep_json(const ScalingResult& res);
    nlohmann::json drift_json(const DriftEstimate& d, const LyapunovConfig& cfg);
}
