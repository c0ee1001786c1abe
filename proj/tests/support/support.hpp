#pragma once

#include <cstdint>
#include <vector>

#include "laplab/network.hpp"
#include "laplab/rng.hpp"
#include "laplab/scalelimits.hpp"

namespace laplab::testing
{
    Network net_1();
    Network net_n();
    Network net_w();
    std::vector<Network> canonical_nets();

    // Random tree with positive routing rates on every edge and every pool
    // loaded to exactly rho, so the planning LP has a unique optimum there.
    Network random_crp_network(Rng& rng, int classes, int pools, double rho);

    // Random tree with arbitrary positive parameters (CRP not guaranteed).
    Network random_tree_network(Rng& rng, int classes, int pools);

    // Minimum load over all basic feasible solutions of the planning LP in
    // standard form, enumerated by brute force.
    double vertex_enumeration_rho(const Network& net);

    // M/M/N with unit service rate and offered load a = lambda / mu.
    double erlang_c_probability(int servers, double a);
    double erlang_c_mean_in_system(int servers, double a);

    // w >= 0 and every pool other than the lowest one at or below equilibrium.
    DeviationState random_deviation(Rng& rng, const Network& net, int lowest_pool, double scale = 1.0);

    double euclidean(const std::vector<double>& a, const std::vector<double>& b);
}
