#pragma once

#include <string>
#include <vector>

#include "laplab/network.hpp"

namespace laplab
{
    // Optimum of the load-balancing static planning LP.
    struct SppSolution
    {
        std::vector<double> routing_rates;         // per activity
        double rho = 0.0;
        std::vector<std::size_t> basic_activities; // activities with positive rate
        bool unique = false;                       // optimal routing is unique
    };

    struct SppOptions
    {
        // Throw DegenerateOptimumError when the optimal routing is not unique.
        bool require_unique = true;
        // Relaxation of rho used when probing the optimal face for uniqueness.
        double degeneracy_tol = 1e-9;
    };

    // Minimises the maximum pool load rho over splits of class inflow onto the
    // activity set. Uniqueness is probed by re-solving with each routing rate
    // minimised and maximised on the (slightly relaxed) optimal face.
    SppSolution solve_spp(const Network& net, const SppOptions& opts = {});

    struct CrpReport
    {
        bool holds = false;
        std::string diagnostic;
    };

    // Complete resource pooling: unique optimum whose basic activities span
    // the class/pool graph as a tree.
    CrpReport check_crp(const SppSolution& sol, const Network& net);

    // Workload duals: nu_i per class, alpha_j per pool.
    struct DualVariables
    {
        std::vector<double> nu;
        std::vector<double> alpha;
    };

    // Unique solution of nu_i mu_ij = alpha_j / beta_j on every activity with
    // sum_j alpha_j = 1, obtained by propagating along the tree from pool 1.
    DualVariables compute_duals(const Network& net);

    // Sum_i nu_i lambda_i, which equals rho under CRP.
    double workload_rate(const Network& net, const DualVariables& duals);
}
