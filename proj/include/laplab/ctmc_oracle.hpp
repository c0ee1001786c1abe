#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "laplab/network.hpp"
#include "laplab/priority.hpp"

namespace laplab
{
    struct OracleState
    {
        std::vector<std::int64_t> psi;
        std::vector<std::int64_t> q;
    };

    struct OracleResult
    {
        std::vector<OracleState> states;
        std::vector<double> probabilities;
        double mean_total = 0.0;      // customers in system
        std::vector<double> mean_psi; // per activity
        std::vector<double> mean_q;   // per class
        double blocking_mass = 0.0;   // probability some queue sits at the cap
    };

    // Exact stationary law of the LAP chain truncated at queue_cap per class
    // (arrivals that would queue beyond the cap are lost). States are those
    // reachable from the empty system under the LAP routing and scheduling
    // rules; throws StateSpaceTooLargeError past max_states.
    OracleResult solve_ctmc_oracle(const Network& net, const PriorityOrder& po, int scale, int queue_cap,
                                   std::size_t max_states = 200000);
}
