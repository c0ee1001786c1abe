#include "laplab/model.hpp"

#include <cmath>
#include <queue>
#include <sstream>

#include "laplab/errors.hpp"
#include "laplab/lp.hpp"

namespace laplab
{
    namespace
    {
        constexpr double feasibility_tol = 1e-9;

        // Variables: routing rates (one per activity), rho, pool slacks.
        // Rows: class conservation, then pool capacity.
        lp::StandardForm build_spp(const Network& net)
        {
            const int E = static_cast<int>(net.num_activities());
            const int I = net.num_classes;
            const int J = net.num_pools;
            const int n = E + 1 + J;
            lp::StandardForm p;
            p.A = Eigen::MatrixXd::Zero(I + J, n);
            p.b = Eigen::VectorXd::Zero(I + J);
            p.c = Eigen::VectorXd::Zero(n);
            for (int e = 0; e < E; ++e)
            {
                const auto& a = net.activities[e];
                p.A(a.cls, e) = 1.0;
                p.A(I + a.pool, e) = 1.0 / (net.beta[a.pool] * a.mu);
            }
            for (int i = 0; i < I; ++i)
                p.b(i) = net.lambda[i];
            for (int j = 0; j < J; ++j)
            {
                p.A(I + j, E) = -1.0;
                p.A(I + j, E + 1 + j) = 1.0;
            }
            p.c(E) = 1.0;
            return p;
        }

        // Adds rho <= bound as an extra row with its own slack column.
        lp::StandardForm with_rho_cap(const lp::StandardForm& base, int rho_col, double bound)
        {
            const auto m = base.A.rows();
            const auto n = base.A.cols();
            lp::StandardForm p;
            p.A = Eigen::MatrixXd::Zero(m + 1, n + 1);
            p.A.topLeftCorner(m, n) = base.A;
            p.A(m, rho_col) = 1.0;
            p.A(m, n) = 1.0;
            p.b = Eigen::VectorXd::Zero(m + 1);
            p.b.head(m) = base.b;
            p.b(m) = bound;
            p.c = Eigen::VectorXd::Zero(n + 1);
            return p;
        }
    }

    SppSolution solve_spp(const Network& net, const SppOptions& opts)
    {
        require_valid(net);
        const int E = static_cast<int>(net.num_activities());
        const auto problem = build_spp(net);
        const auto opt = lp::solve(problem, 1e-12);
        if (opt.status != lp::Status::optimal)
            throw InfeasibleError("static planning LP has no optimal solution");

        SppSolution sol;
        sol.rho = opt.x(E);
        sol.routing_rates.resize(E);
        for (int e = 0; e < E; ++e)
        {
            double v = opt.x(e);
            sol.routing_rates[e] = std::abs(v) < 1e-13 ? 0.0 : v;
            if (sol.routing_rates[e] > feasibility_tol)
                sol.basic_activities.push_back(static_cast<std::size_t>(e));
        }

        // Probe the optimal face: every routing rate must be pinned.
        const double bound = sol.rho + opts.degeneracy_tol * std::max(1.0, sol.rho);
        auto face = with_rho_cap(problem, E, bound);
        sol.unique = true;
        for (int e = 0; e < E && sol.unique; ++e)
        {
            const double scale = std::max(1.0, net.lambda[net.activities[e].cls]);
            face.c.setZero();
            face.c(e) = 1.0;
            const auto lo = lp::solve(face, 1e-12);
            face.c(e) = -1.0;
            const auto hi = lp::solve(face, 1e-12);
            if (lo.status != lp::Status::optimal || hi.status != lp::Status::optimal)
                throw InfeasibleError("optimal face of the static planning LP is empty");
            if (hi.x(e) - lo.x(e) > 1e-6 * scale)
                sol.unique = false;
        }
        if (opts.require_unique && !sol.unique)
            throw DegenerateOptimumError("static planning LP optimum is not unique (complete resource pooling fails)");
        return sol;
    }

    CrpReport check_crp(const SppSolution& sol, const Network& net)
    {
        if (!sol.unique)
            return {false, "optimal routing is not unique"};
        const int I = net.num_classes;
        const int J = net.num_pools;
        if (static_cast<int>(sol.basic_activities.size()) != I + J - 1)
        {
            std::ostringstream os;
            os << "basic activities (" << sol.basic_activities.size() << ") do not form a spanning tree on "
               << I + J << " vertices";
            return {false, os.str()};
        }
        // Connectivity of the basic subgraph.
        std::vector<std::vector<int>> adj(I + J);
        for (auto e : sol.basic_activities)
        {
            const auto& a = net.activities[e];
            adj[a.cls].push_back(I + a.pool);
            adj[I + a.pool].push_back(a.cls);
        }
        std::vector<bool> seen(I + J, false);
        std::queue<int> frontier;
        frontier.push(0);
        seen[0] = true;
        int count = 1;
        while (!frontier.empty())
        {
            int v = frontier.front();
            frontier.pop();
            for (int w : adj[v])
                if (!seen[w])
                {
                    seen[w] = true;
                    ++count;
                    frontier.push(w);
                }
        }
        if (count != I + J)
            return {false, "basic activities do not connect all classes and pools"};
        return {true, ""};
    }

    DualVariables compute_duals(const Network& net)
    {
        require_valid(net);
        const int I = net.num_classes;
        const int J = net.num_pools;
        // Per-server workload rate alpha_j / beta_j for pools, nu_i for classes.
        std::vector<double> value(I + J, 0.0);
        std::vector<bool> set(I + J, false);
        std::vector<std::vector<std::size_t>> incident(I + J);
        for (std::size_t e = 0; e < net.num_activities(); ++e)
        {
            incident[net.activities[e].cls].push_back(e);
            incident[I + net.activities[e].pool].push_back(e);
        }
        std::queue<int> frontier;
        value[I] = 1.0;
        set[I] = true;
        frontier.push(I);
        while (!frontier.empty())
        {
            int v = frontier.front();
            frontier.pop();
            for (auto e : incident[v])
            {
                const auto& a = net.activities[e];
                if (v >= I)
                {
                    if (!set[a.cls])
                    {
                        value[a.cls] = value[v] / a.mu;
                        set[a.cls] = true;
                        frontier.push(a.cls);
                    }
                }
                else if (!set[I + a.pool])
                {
                    value[I + a.pool] = value[v] * a.mu;
                    set[I + a.pool] = true;
                    frontier.push(I + a.pool);
                }
            }
        }
        DualVariables d;
        d.alpha.resize(J);
        double total = 0.0;
        for (int j = 0; j < J; ++j)
        {
            d.alpha[j] = value[I + j] * net.beta[j];
            total += d.alpha[j];
        }
        for (auto& a : d.alpha)
            a /= total;
        d.nu.resize(I);
        for (int i = 0; i < I; ++i)
            d.nu[i] = value[i] / total;
        return d;
    }

    double workload_rate(const Network& net, const DualVariables& duals)
    {
        double s = 0.0;
        for (int i = 0; i < net.num_classes; ++i)
            s += duals.nu[i] * net.lambda[i];
        return s;
    }
}
