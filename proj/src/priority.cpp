#include "laplab/priority.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>
#include <optional>

#include "laplab/errors.hpp"

namespace laplab
{
    namespace
    {
        constexpr double full_tol = 1e-9;

        // Mutable view of the activity tree used by both elimination passes.
        struct Forest
        {
            int I = 0;
            int J = 0;
            std::vector<bool> edge_alive;
            std::vector<bool> class_alive;
            std::vector<bool> pool_alive;
            std::vector<int> class_deg;
            std::vector<int> pool_deg;
            const Network* net = nullptr;

            explicit Forest(const Network& n)
                : I(n.num_classes), J(n.num_pools), edge_alive(n.num_activities(), true),
                  class_alive(I, true), pool_alive(J, true), class_deg(I, 0), pool_deg(J, 0), net(&n)
            {
                for (const auto& a : n.activities)
                {
                    ++class_deg[a.cls];
                    ++pool_deg[a.pool];
                }
            }

            void remove_edge(std::size_t e)
            {
                assert(edge_alive[e]);
                edge_alive[e] = false;
                --class_deg[net->activities[e].cls];
                --pool_deg[net->activities[e].pool];
            }

            void remove_class(int i)
            {
                for (std::size_t e = 0; e < edge_alive.size(); ++e)
                    if (edge_alive[e] && net->activities[e].cls == i)
                        remove_edge(e);
                class_alive[i] = false;
            }

            void remove_pool(int j)
            {
                for (std::size_t e = 0; e < edge_alive.size(); ++e)
                    if (edge_alive[e] && net->activities[e].pool == j)
                        remove_edge(e);
                pool_alive[j] = false;
            }
        };

        template <typename Pred>
        std::optional<int> pick(int n, TieBreak tb, Pred eligible)
        {
            if (tb == TieBreak::lowest_index)
            {
                for (int k = 0; k < n; ++k)
                    if (eligible(k))
                        return k;
            }
            else
            {
                for (int k = n - 1; k >= 0; --k)
                    if (eligible(k))
                        return k;
            }
            return std::nullopt;
        }
    }

    std::vector<int> PriorityOrder::classes_by_rank() const
    {
        std::vector<int> out(class_rank.size());
        for (std::size_t i = 0; i < class_rank.size(); ++i)
            out[class_rank[i] - 1] = static_cast<int>(i);
        return out;
    }

    std::vector<std::size_t> PriorityOrder::activities_by_rank() const
    {
        std::vector<std::size_t> out(activity_rank.size());
        for (std::size_t e = 0; e < activity_rank.size(); ++e)
            out[activity_rank[e] - 1] = e;
        return out;
    }

    PriorityOrder assign_priorities(const Network& net, TieBreak tie_break)
    {
        require_valid(net);
        const int I = net.num_classes;
        const int J = net.num_pools;
        PriorityOrder po;
        po.class_rank.assign(I, 0);
        po.activity_rank.assign(net.num_activities(), 0);

        // Class priorities: strip leaves, ranking customer-class leaves as they go.
        // Class leaves are preferred over pool leaves when both are available.
        {
            Forest f(net);
            int next_rank = 1;
            int remaining = I + J;
            while (remaining > 0)
            {
                auto c = pick(I, tie_break, [&](int i) { return f.class_alive[i] && f.class_deg[i] <= 1; });
                if (c)
                {
                    po.class_rank[*c] = next_rank++;
                    f.remove_class(*c);
                    --remaining;
                    continue;
                }
                auto p = pick(J, tie_break, [&](int j) { return f.pool_alive[j] && f.pool_deg[j] <= 1; });
                if (!p)
                    throw Error("leaf elimination stalled; activity graph is not a tree");
                f.remove_pool(*p);
                --remaining;
            }
        }

        // Activity priorities: highest remaining class takes its own edge when it
        // is a leaf, otherwise an edge to a pool leaf.
        {
            Forest f(net);
            int next_rank = 1;
            for (int i : po.classes_by_rank())
            {
                while (f.class_deg[i] > 0)
                {
                    std::vector<std::size_t> edges;
                    for (auto e : net.activities_of_class(i))
                        if (f.edge_alive[e])
                            edges.push_back(e);
                    if (edges.size() == 1)
                    {
                        po.activity_rank[edges.front()] = next_rank++;
                        f.remove_edge(edges.front());
                        break;
                    }
                    int non_leaf = 0;
                    for (auto e : edges)
                        if (f.pool_deg[net.activities[e].pool] > 1)
                            ++non_leaf;
                    if (non_leaf > 1)
                        throw Error("activity assignment found a class with several edges to non-leaf pools");
                    auto k = pick(static_cast<int>(edges.size()), tie_break, [&](int k) {
                        return f.pool_deg[net.activities[edges[k]].pool] == 1;
                    });
                    if (!k)
                        throw Error("activity assignment stalled; no pool leaf adjacent to a non-leaf class");
                    po.activity_rank[edges[*k]] = next_rank++;
                    f.remove_edge(edges[*k]);
                }
                f.class_alive[i] = false;
            }
            assert(next_rank == static_cast<int>(net.num_activities()) + 1);
        }
        return po;
    }

    void require_consistent(const Network& net, const PriorityOrder& po)
    {
        std::vector<std::string> v;
        auto is_permutation = [](const std::vector<int>& ranks, std::size_t n) {
            if (ranks.size() != n)
                return false;
            std::vector<int> s = ranks;
            std::sort(s.begin(), s.end());
            for (std::size_t k = 0; k < n; ++k)
                if (s[k] != static_cast<int>(k) + 1)
                    return false;
            return true;
        };
        if (!is_permutation(po.class_rank, static_cast<std::size_t>(net.num_classes)))
            v.push_back("class ranks are not a permutation of 1..I");
        if (!is_permutation(po.activity_rank, net.num_activities()))
            v.push_back("activity ranks are not a permutation of 1..|E|");
        if (v.empty())
        {
            for (std::size_t e = 0; e < net.num_activities(); ++e)
                for (std::size_t f = 0; f < net.num_activities(); ++f)
                {
                    const int ci = po.class_rank[net.activities[e].cls];
                    const int cf = po.class_rank[net.activities[f].cls];
                    if (ci < cf && po.activity_rank[e] > po.activity_rank[f])
                    {
                        v.push_back("activity order contradicts class order");
                        e = f = net.num_activities();
                        break;
                    }
                }
        }
        if (!v.empty())
            throw ValidationError(std::move(v));
    }

    int lowest_priority_pool(const Network& net, const PriorityOrder& po)
    {
        auto order = po.activities_by_rank();
        return net.activities[order.back()].pool;
    }

    std::vector<double> pool_occupancy(const Network& net, const std::vector<double>& psi)
    {
        std::vector<double> occ(net.num_pools, 0.0);
        for (std::size_t e = 0; e < net.num_activities(); ++e)
            occ[net.activities[e].pool] += psi[e];
        return occ;
    }

    EquilibriumPoint compute_equilibrium(const Network& net, const PriorityOrder& po, bool enforce_assumption3)
    {
        require_valid(net);
        require_consistent(net, po);
        std::vector<double> inflow_left = net.lambda;
        std::vector<double> capacity_left = net.beta;
        EquilibriumPoint eq;
        eq.occupancy.assign(net.num_activities(), 0.0);
        eq.lap_rates.assign(net.num_activities(), 0.0);
        eq.queue.assign(net.num_classes, 0.0);
        eq.lowest_pool = lowest_priority_pool(net, po);
        for (auto e : po.activities_by_rank())
        {
            const auto& a = net.activities[e];
            const double rate = std::max(0.0, std::min(inflow_left[a.cls], a.mu * capacity_left[a.pool]));
            eq.lap_rates[e] = rate;
            eq.occupancy[e] = rate / a.mu;
            inflow_left[a.cls] -= rate;
            capacity_left[a.pool] -= eq.occupancy[e];
        }
        if (enforce_assumption3)
        {
            auto report = check_assumption3(net, eq);
            if (!report.holds)
                throw Assumption3Error("equilibrium violates the all-activities-employed condition: " + report.summary());
        }
        return eq;
    }

    std::string Assumption3Report::summary() const
    {
        std::string s;
        for (const auto& d : diagnostics)
        {
            if (!s.empty())
                s += "; ";
            s += d;
        }
        return s;
    }

    Assumption3Report check_assumption3(const Network& net, const EquilibriumPoint& eq)
    {
        Assumption3Report r;
        for (std::size_t e = 0; e < net.num_activities(); ++e)
            if (!(eq.lap_rates[e] > 0.0))
                r.diagnostics.push_back("activity (" + std::to_string(net.activities[e].cls + 1) + "," +
                                        std::to_string(net.activities[e].pool + 1) + ") carries no flow");
        auto occ = pool_occupancy(net, eq.occupancy);
        for (int j = 0; j < net.num_pools; ++j)
        {
            const bool full = std::abs(occ[j] - net.beta[j]) <= full_tol * net.beta[j];
            if (j == eq.lowest_pool && full)
                r.diagnostics.push_back("lowest-priority pool " + std::to_string(j + 1) + " is not strictly slack");
            if (j != eq.lowest_pool && !full)
                r.diagnostics.push_back("pool " + std::to_string(j + 1) + " not full");
        }
        for (int i = 0; i < net.num_classes; ++i)
        {
            double routed = 0.0;
            for (auto e : net.activities_of_class(i))
                routed += eq.lap_rates[e];
            if (std::abs(routed - net.lambda[i]) > full_tol * net.lambda[i])
                r.diagnostics.push_back("class " + std::to_string(i + 1) + " inflow not fully routed");
        }
        r.holds = r.diagnostics.empty();
        return r;
    }

    nlohmann::json priority_to_json(const Network& net, const PriorityOrder& po)
    {
        nlohmann::json acts = nlohmann::json::array();
        for (auto e : po.activities_by_rank())
            acts.push_back({net.activities[e].cls + 1, net.activities[e].pool + 1, po.activity_rank[e]});
        nlohmann::json j;
        j["class_rank"] = po.class_rank;
        j["activity_rank"] = acts;
        return j;
    }

    PriorityOrder priority_from_json(const Network& net, const nlohmann::json& j)
    {
        PriorityOrder po;
        try
        {
            po.class_rank = j.at("class_rank").get<std::vector<int>>();
            po.activity_rank.assign(net.num_activities(), 0);
            for (const auto& t : j.at("activity_rank"))
            {
                auto e = net.activity_index(t.at(0).get<int>() - 1, t.at(1).get<int>() - 1);
                if (!e)
                    throw ValidationError({"priority order names an activity that is not in the network"});
                po.activity_rank[*e] = t.at(2).get<int>();
            }
        }
        catch (const nlohmann::json::exception& e)
        {
            throw ValidationError({std::string("malformed priority JSON: ") + e.what()});
        }
        require_consistent(net, po);
        return po;
    }
}
