#include "laplab/ctmc_oracle.hpp"

#include <deque>
#include <map>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "laplab/errors.hpp"
#include "laplab/simulator.hpp"

namespace laplab
{
    namespace
    {
        using Key = std::vector<std::int64_t>;

        Key key_of(const SystemState& s)
        {
            Key k(s.psi);
            k.insert(k.end(), s.q.begin(), s.q.end());
            return k;
        }
    }

    OracleResult solve_ctmc_oracle(const Network& net, const PriorityOrder& po, int scale, int queue_cap,
                                   std::size_t max_states)
    {
        const LapPolicy policy(net, po, scale);
        if (queue_cap < 0)
            throw ValidationError({"queue cap must be nonnegative"});

        std::map<Key, std::size_t> index;
        std::vector<SystemState> states;
        std::vector<Eigen::Triplet<double>> entries; // (from, to, rate)
        std::vector<double> outflow;

        auto intern = [&](const SystemState& s) {
            auto [it, inserted] = index.emplace(key_of(s), states.size());
            if (inserted)
            {
                if (states.size() >= max_states)
                    throw StateSpaceTooLargeError("truncated state space exceeds " + std::to_string(max_states) +
                                                  " states");
                states.push_back(s);
                outflow.push_back(0.0);
            }
            return it->second;
        };

        intern(empty_state(net, scale));
        for (std::size_t k = 0; k < states.size(); ++k)
        {
            const SystemState base = states[k];
            for (int i = 0; i < net.num_classes; ++i)
            {
                SystemState next = base;
                if (route_arrival(next, i, policy) < 0 && next.q[i] > queue_cap)
                    continue; // lost at the cap
                const double rate = net.lambda[i] * scale;
                const auto to = intern(next);
                entries.emplace_back(static_cast<int>(k), static_cast<int>(to), rate);
                outflow[k] += rate;
            }
            for (std::size_t e = 0; e < net.num_activities(); ++e)
            {
                if (base.psi[e] == 0)
                    continue;
                SystemState next = base;
                const int j = net.activities[e].pool;
                --next.psi[e];
                --next.busy[j];
                schedule_server(next, j, policy);
                const double rate = net.activities[e].mu * static_cast<double>(base.psi[e]);
                const auto to = intern(next);
                entries.emplace_back(static_cast<int>(k), static_cast<int>(to), rate);
                outflow[k] += rate;
            }
        }

        // Balance equations pi Q = 0 as Q^T pi = 0 with the first row replaced
        // by the normalisation sum(pi) = 1.
        const auto n = static_cast<Eigen::Index>(states.size());
        std::vector<Eigen::Triplet<double>> a;
        a.reserve(entries.size() + 2 * states.size());
        for (const auto& t : entries)
            if (t.col() != 0 && t.row() != t.col())
                a.emplace_back(t.col(), t.row(), t.value());
        for (Eigen::Index k = 0; k < n; ++k)
        {
            if (k != 0)
                a.emplace_back(k, k, -outflow[k]);
            a.emplace_back(0, k, 1.0);
        }
        Eigen::SparseMatrix<double> A(n, n);
        A.setFromTriplets(a.begin(), a.end());
        A.makeCompressed();
        Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
        b(0) = 1.0;
        Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
        lu.compute(A);
        if (lu.info() != Eigen::Success)
            throw Error("truncated generator factorisation failed");
        Eigen::VectorXd pi = lu.solve(b);

        OracleResult out;
        out.mean_psi.assign(net.num_activities(), 0.0);
        out.mean_q.assign(net.num_classes, 0.0);
        out.states.reserve(states.size());
        out.probabilities.resize(states.size());
        for (std::size_t k = 0; k < states.size(); ++k)
        {
            const double p = pi(static_cast<Eigen::Index>(k));
            out.probabilities[k] = p;
            const auto& s = states[k];
            bool capped = false;
            for (std::size_t e = 0; e < s.psi.size(); ++e)
            {
                out.mean_psi[e] += p * static_cast<double>(s.psi[e]);
                out.mean_total += p * static_cast<double>(s.psi[e]);
            }
            for (std::size_t i = 0; i < s.q.size(); ++i)
            {
                out.mean_q[i] += p * static_cast<double>(s.q[i]);
                out.mean_total += p * static_cast<double>(s.q[i]);
                capped = capped || s.q[i] >= queue_cap;
            }
            if (capped)
                out.blocking_mass += p;
            out.states.push_back({s.psi, s.q});
        }
        return out;
    }
}
