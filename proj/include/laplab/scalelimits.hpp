#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "laplab/execution.hpp"
#include "laplab/fluid.hpp"
#include "laplab/network.hpp"
#include "laplab/priority.hpp"

namespace laplab
{
    // Deviation from the equilibrium: u_ij centred at psi*_ij, w_i queue part.
    struct DeviationState
    {
        std::vector<double> u; // per activity
        std::vector<double> w; // per class

        // z_i = w_i + sum_j u_ij
        std::vector<double> z(const Network& net) const;
        static DeviationState zero(const Network& net);
    };

    // Every violated DeviationState invariant (queues nonnegative, pools other
    // than the lowest-priority one at or below their equilibrium fill).
    std::vector<std::string> deviation_violations(const DeviationState& d, const Network& net,
                                                  const PriorityOrder& po, double tol = 1e-9);

    struct LinearMaps
    {
        Eigen::MatrixXd L;       // (E+I) x (E+I) on [u; w]
        Eigen::MatrixXd L_prime; // E x I, class totals z -> occupancy deviations c
        Eigen::MatrixXd B;       // I x I, dz/dt = -B z
        int lowest_pool = 0;
    };

    // Occupancy deviations c solving sum_j c_ij = z_i for every class and
    // sum_i c_ij = 0 for every pool except the lowest-priority one.
    std::vector<double> solve_l_prime(const std::vector<double>& z, const Network& net, const PriorityOrder& po);

    // (L'(z), 0).
    DeviationState map_L(const DeviationState& dev, const Network& net, const PriorityOrder& po);

    // Throws Assumption3Error unless every activity carries flow, every pool but the
    // lowest-priority one is full and that one is strictly slack at equilibrium.
    LinearMaps lfm_matrix(const Network& net, const PriorityOrder& po);

    nlohmann::json maps_to_json(const LinearMaps& maps, const Network& net);

    struct DeviationTrajectory
    {
        std::vector<double> t;
        std::vector<DeviationState> states;
    };

    // Hydrodynamic model: the fluid allocation with service budgets frozen at
    // sum_i mu_ij psi*_ij, departures at mu_ij psi*_ij and the lowest-priority
    // pool never full. Queued mass facing idle capacity is settled at time 0+.
    DeviationTrajectory integrate_hydro(const DeviationState& initial, const Network& net, const PriorityOrder& po,
                                        double horizon, const IntegratorOptions& opts = {});

    DeviationState settle_deviation(DeviationState d, const Network& net, const PriorityOrder& po);

    enum class LfmMethod
    {
        matrix_exponential,
        rk4,
    };

    struct LfmTrajectory
    {
        std::vector<double> t;
        std::vector<std::vector<double>> x;   // class totals
        std::vector<std::vector<double>> psi; // L'(x), queues identically 0
    };

    // Projects the initial state through L and evolves x by dx/dt = -B x.
    LfmTrajectory integrate_lfm(const DeviationState& initial, const LinearMaps& maps, const Network& net,
                                double horizon, double output_interval = 1e-2,
                                LfmMethod method = LfmMethod::matrix_exponential, double rk_step = 1e-3);

    // x(t) = exp(-B t) x0.
    std::vector<double> lfm_state(const LinearMaps& maps, const std::vector<double>& x0, double t);

    struct DecayConstants
    {
        double c1 = 1.0;
        double c2 = 0.0;
        double min_real_eigenvalue = 0.0;
        double eigenbasis_condition = 1.0; // infinite when B is defective
        // sup_t ||exp(-B t)|| e^{c2 t} on a grid; the tightest c1 for this c2.
        // The grid extends past envelope_horizon when the envelope decays slowly.
        double c1_measured = 1.0;
    };

    // c2 = 0.99 * min Re eig(B); c1 = cond(V) for the eigenbasis V, or the
    // measured envelope when B is not diagonalisable.
    DecayConstants decay_constants(const LinearMaps& maps, double margin = 0.01, double envelope_horizon = 20.0);

    struct ScalingComparisonConfig
    {
        std::vector<int> r_values{100, 400};
        double gamma = 0.75;
        int num_seeds = 10;
        std::uint64_t base_seed = 1;
        DeviationState perturbation; // empty = w_i = 1, u = 0
        double lfm_t_min = 1.0;
        double lfm_horizon = 5.0;
        double hydro_horizon = 2.0; // rescaled time s, real time s h(r)/r
        double hydro_output_interval = 0.02;
        int workers = 0; // 0 = OpenMP default
    };

    struct ScalingComparisonRow
    {
        int r = 0;
        double gamma = 0.0;
        std::uint64_t seed = 0;
        double sup_dist_lfm = 0.0;
        double sup_dist_hydro = 0.0;
        double noise_floor = 0.0;  // sup rescaled |F| from an equilibrium start
        double final_queue = 0.0;  // max_i w_i at the end of the hydro window
    };

    struct ScalingComparison
    {
        std::vector<ScalingComparisonRow> rows;
        std::vector<int> r_values;
        std::vector<double> median_lfm;   // per r
        std::vector<double> median_hydro; // per r
        std::vector<double> median_noise; // per r
    };

    // Runs the chain from round(r psi* + h u), Q = round(h w) with h = r^gamma,
    // and measures the sup distance of the rescaled deviation to the local
    // fluid model on [t_min, lfm_horizon] and to the hydrodynamic model on
    // rescaled time [0, hydro_horizon]. Both limit models start from the
    // rescaled state actually simulated.
    ScalingComparison compare_scalings(const Network& net, const PriorityOrder& po, const EquilibriumPoint& eq,
                                       const ScalingComparisonConfig& cfg, Execution mode = Execution::parallel);
}
