#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "laplab/network.hpp"

namespace laplab
{
    // Rule used when leaf elimination has several eligible leaves or edges.
    enum class TieBreak
    {
        lowest_index,  // lowest class index, then lowest pool index
        highest_index, // mirror image; useful to exercise non-uniqueness
    };

    // LAP priorities. Ranks are 1-based, 1 = highest priority.
    struct PriorityOrder
    {
        std::vector<int> class_rank;    // per class
        std::vector<int> activity_rank; // per activity index

        std::vector<int> classes_by_rank() const;
        std::vector<std::size_t> activities_by_rank() const;

        bool operator==(const PriorityOrder&) const = default;
    };

    PriorityOrder assign_priorities(const Network& net, TieBreak tie_break = TieBreak::lowest_index);

    // Throws ValidationError unless po is a pair of total orders over net's
    // classes and activities with class order implying activity order.
    void require_consistent(const Network& net, const PriorityOrder& po);

    // Pool of the lowest-priority activity; the only pool left slack at the
    // LAP equilibrium.
    int lowest_priority_pool(const Network& net, const PriorityOrder& po);

    struct EquilibriumPoint
    {
        std::vector<double> occupancy; // psi*_ij per activity
        std::vector<double> queue;     // q*_i, identically zero
        std::vector<double> lap_rates; // lambda_ij from the priority recursion
        int lowest_pool = 0;
    };

    // Fills activities in priority order: each takes the smaller of the class
    // inflow not yet routed and the service capacity its pool has left.
    // With enforce_assumption3, throws Assumption3Error when the result does
    // not employ every activity with all pools but the lowest one full.
    EquilibriumPoint compute_equilibrium(const Network& net, const PriorityOrder& po,
                                         bool enforce_assumption3 = true);

    struct Assumption3Report
    {
        bool holds = false;
        std::vector<std::string> diagnostics;
        std::string summary() const;
    };

    Assumption3Report check_assumption3(const Network& net, const EquilibriumPoint& eq);

    std::vector<double> pool_occupancy(const Network& net, const std::vector<double>& psi);

    nlohmann::json priority_to_json(const Network& net, const PriorityOrder& po);
    PriorityOrder priority_from_json(const Network& net, const nlohmann::json& j);
}
