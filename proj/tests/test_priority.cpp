#include <algorithm>
#include <numeric>

#include <gtest/gtest.h>

#include "laplab/errors.hpp"
#include "laplab/model.hpp"
#include "laplab/priority.hpp"
#include "support.hpp"

using namespace laplab;
using namespace laplab::testing;

namespace
{
    int rank_of(const Network& net, const PriorityOrder& po, int i, int j)
    {
        return po.activity_rank[*net.activity_index(i, j)];
    }

    void expect_valid_order(const Network& net, const PriorityOrder& po)
    {
        std::vector<int> cr = po.class_rank;
        std::sort(cr.begin(), cr.end());
        for (int k = 0; k < net.num_classes; ++k)
            EXPECT_EQ(cr[k], k + 1);
        std::vector<int> ar = po.activity_rank;
        std::sort(ar.begin(), ar.end());
        for (std::size_t k = 0; k < ar.size(); ++k)
            EXPECT_EQ(ar[k], static_cast<int>(k) + 1);
        for (std::size_t e = 0; e < net.num_activities(); ++e)
            for (std::size_t f = 0; f < net.num_activities(); ++f)
                if (po.class_rank[net.activities[e].cls] < po.class_rank[net.activities[f].cls])
                    EXPECT_LT(po.activity_rank[e], po.activity_rank[f]);
        EXPECT_NO_THROW(require_consistent(net, po));
    }
}

TEST(AssignPriorities, Net1)
{
    const auto po = assign_priorities(net_1());
    EXPECT_EQ(po.class_rank, std::vector<int>{1});
    EXPECT_EQ(po.activity_rank, std::vector<int>{1});
}

TEST(AssignPriorities, NetN)
{
    const auto net = net_n();
    const auto po = assign_priorities(net);
    EXPECT_EQ(po.class_rank, (std::vector<int>{1, 2}));
    EXPECT_EQ(rank_of(net, po, 0, 1), 1);
    EXPECT_EQ(rank_of(net, po, 1, 0), 2);
    EXPECT_EQ(rank_of(net, po, 1, 1), 3);
    EXPECT_EQ(lowest_priority_pool(net, po), 1);
}

TEST(AssignPriorities, NetWTieBreak)
{
    const auto net = net_w();
    const auto low = assign_priorities(net, TieBreak::lowest_index);
    EXPECT_EQ(low.class_rank, (std::vector<int>{1, 2}));
    EXPECT_EQ(rank_of(net, low, 0, 0), 1);
    EXPECT_EQ(rank_of(net, low, 1, 0), 2);
    const auto high = assign_priorities(net, TieBreak::highest_index);
    EXPECT_EQ(high.class_rank, (std::vector<int>{2, 1}));
}

TEST(AssignPriorities, ValidForEveryTieBreakOnRandomTrees)
{
    Rng rng(41);
    for (int k = 0; k < 200; ++k)
    {
        const auto net = random_tree_network(rng, 1 + k % 5, 1 + (k / 5) % 5);
        for (auto tb : {TieBreak::lowest_index, TieBreak::highest_index})
            expect_valid_order(net, assign_priorities(net, tb));
    }
}

TEST(AssignPriorities, DeterministicGivenTieBreak)
{
    Rng rng(43);
    for (int k = 0; k < 20; ++k)
    {
        const auto net = random_tree_network(rng, 3, 3);
        EXPECT_EQ(assign_priorities(net), assign_priorities(net));
    }
}

TEST(RequireConsistent, RejectsBrokenOrders)
{
    const auto net = net_n();
    auto po = assign_priorities(net);
    auto swapped = po;
    std::swap(swapped.activity_rank[0], swapped.activity_rank[2]); // class 2 above class 1
    EXPECT_THROW(require_consistent(net, swapped), ValidationError);
    auto tie = po;
    tie.class_rank = {1, 1};
    EXPECT_THROW(require_consistent(net, tie), ValidationError);
}

TEST(ComputeEquilibrium, Net1)
{
    const auto net = net_1();
    const auto eq = compute_equilibrium(net, assign_priorities(net));
    EXPECT_NEAR(eq.lap_rates[0], 0.5, 1e-12);
    EXPECT_NEAR(eq.occupancy[0], 0.5, 1e-12);
}

TEST(ComputeEquilibrium, NetN)
{
    const auto net = net_n();
    const auto eq = compute_equilibrium(net, assign_priorities(net));
    EXPECT_NEAR(eq.lap_rates[0], 0.5, 1e-12);
    EXPECT_NEAR(eq.lap_rates[1], 1.0, 1e-12);
    EXPECT_NEAR(eq.lap_rates[2], 0.2, 1e-12);
    EXPECT_NEAR(eq.occupancy[0], 0.5, 1e-12);
    EXPECT_NEAR(eq.occupancy[1], 1.0, 1e-12);
    EXPECT_NEAR(eq.occupancy[2], 0.2, 1e-12);
    const auto occ = pool_occupancy(net, eq.occupancy);
    EXPECT_NEAR(occ[0], 1.0, 1e-12);
    EXPECT_NEAR(occ[1], 0.7, 1e-12);
    EXPECT_EQ(eq.queue, (std::vector<double>{0.0, 0.0}));
    EXPECT_EQ(eq.lowest_pool, 1);
    EXPECT_TRUE(check_assumption3(net, eq).holds);
}

TEST(ComputeEquilibrium, NetW)
{
    const auto net = net_w();
    const auto eq = compute_equilibrium(net, assign_priorities(net));
    EXPECT_NEAR(eq.lap_rates[0], 0.3, 1e-12);
    EXPECT_NEAR(eq.lap_rates[1], 0.4, 1e-12);
    EXPECT_NEAR(eq.occupancy[0], 0.3, 1e-12);
    EXPECT_NEAR(eq.occupancy[1], 0.2, 1e-12);
    EXPECT_NEAR(pool_occupancy(net, eq.occupancy)[0], 0.5, 1e-12);
    EXPECT_TRUE(check_assumption3(net, eq).holds);
}

TEST(CheckAssumption3, LowInflowLeavesPoolOneSlack)
{
    auto net = net_n();
    net.lambda[1] = 0.8;
    const auto po = assign_priorities(net);
    const auto eq = compute_equilibrium(net, po, false);
    EXPECT_NEAR(eq.lap_rates[1], 0.8, 1e-12);
    const auto report = check_assumption3(net, eq);
    EXPECT_FALSE(report.holds);
    EXPECT_NE(report.summary().find("pool 1 not full"), std::string::npos);
    EXPECT_THROW(compute_equilibrium(net, po, true), Assumption3Error);
}

TEST(CheckAssumption3, FullLowestPoolFails)
{
    auto net = net_1();
    net.lambda[0] = 1.0;
    EXPECT_FALSE(check_assumption3(net, compute_equilibrium(net, assign_priorities(net), false)).holds);
}

TEST(ComputeEquilibrium, FlowConservationOnRandomCrpTrees)
{
    Rng rng(47);
    int checked = 0;
    for (int k = 0; k < 300; ++k)
    {
        const auto net = random_crp_network(rng, 1 + k % 4, 1 + (k / 4) % 4, 0.6 + 0.3 * rng.uniform());
        for (auto tb : {TieBreak::lowest_index, TieBreak::highest_index})
        {
            const auto po = assign_priorities(net, tb);
            const auto eq = compute_equilibrium(net, po, false);
            if (!check_assumption3(net, eq).holds)
                continue;
            ++checked;
            for (int i = 0; i < net.num_classes; ++i)
            {
                double routed = 0.0;
                for (auto e : net.activities_of_class(i))
                    routed += eq.lap_rates[e];
                EXPECT_NEAR(routed, net.lambda[i], 1e-12);
            }
            const auto occ = pool_occupancy(net, eq.occupancy);
            for (int j = 0; j < net.num_pools; ++j)
                EXPECT_LE(occ[j], net.beta[j] * (1 + 1e-12));
        }
    }
    EXPECT_GT(checked, 20);
}

TEST(ComputeEquilibrium, EquivariantUnderRelabeling)
{
    // Reverse class and pool labels of NET-N; the order and equilibrium follow.
    const auto net = net_n();
    Network flipped = net;
    flipped.lambda = {net.lambda[1], net.lambda[0]};
    flipped.beta = {net.beta[1], net.beta[0]};
    for (auto& a : flipped.activities)
    {
        a.cls = 1 - a.cls;
        a.pool = 1 - a.pool;
    }
    const auto eq = compute_equilibrium(net, assign_priorities(net));
    const auto fq = compute_equilibrium(flipped, assign_priorities(flipped));
    for (std::size_t e = 0; e < net.num_activities(); ++e)
        EXPECT_NEAR(fq.occupancy[e], eq.occupancy[e], 1e-12);
    EXPECT_EQ(fq.lowest_pool, 1 - eq.lowest_pool);
}

TEST(PriorityJson, RoundTrip)
{
    const auto net = net_n();
    const auto po = assign_priorities(net);
    const auto j = priority_to_json(net, po);
    EXPECT_EQ(j.at("class_rank"), nlohmann::json::array({1, 2}));
    EXPECT_EQ(j.at("activity_rank")[0], nlohmann::json::array({1, 2, 1}));
    EXPECT_EQ(priority_from_json(net, j), po);
}
