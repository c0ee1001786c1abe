#include "support.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

namespace laplab::testing
{
    Network net_1() { return {1, 1, {0.5}, {1.0}, {{0, 0, 1.0}}}; }

    Network net_n() { return {2, 2, {0.5, 1.2}, {1.0, 1.0}, {{0, 1, 1.0}, {1, 0, 1.0}, {1, 1, 1.0}}}; }

    Network net_w() { return {2, 1, {0.3, 0.4}, {1.0}, {{0, 0, 1.0}, {1, 0, 2.0}}}; }

    std::vector<Network> canonical_nets() { return {net_1(), net_n(), net_w()}; }

    namespace
    {
        double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * rng.uniform(); }

        int pick(Rng& rng, int n) { return std::min(n - 1, static_cast<int>(rng.uniform() * n)); }

        // Random spanning tree of the complete bipartite graph K(I, J).
        std::vector<std::pair<int, int>> random_tree(Rng& rng, int classes, int pools)
        {
            std::vector<int> nodes(classes + pools);
            std::iota(nodes.begin(), nodes.end(), 0);
            for (int k = static_cast<int>(nodes.size()) - 1; k > 0; --k)
                std::swap(nodes[k], nodes[pick(rng, k + 1)]);
            std::vector<int> in_classes{pick(rng, classes)};
            std::vector<int> in_pools{pick(rng, pools)};
            std::vector<std::pair<int, int>> edges{{in_classes[0], in_pools[0]}};
            for (int node : nodes)
            {
                if (node < classes)
                {
                    if (node == in_classes[0])
                        continue;
                    edges.emplace_back(node, in_pools[pick(rng, static_cast<int>(in_pools.size()))]);
                    in_classes.push_back(node);
                }
                else
                {
                    const int j = node - classes;
                    if (j == in_pools[0])
                        continue;
                    edges.emplace_back(in_classes[pick(rng, static_cast<int>(in_classes.size()))], j);
                    in_pools.push_back(j);
                }
            }
            return edges;
        }
    }

    Network random_crp_network(Rng& rng, int classes, int pools, double rho)
    {
        Network net;
        net.num_classes = classes;
        net.num_pools = pools;
        net.lambda.assign(classes, 0.0);
        net.beta.assign(pools, 0.0);
        for (auto [i, j] : random_tree(rng, classes, pools))
        {
            const double mu = uniform(rng, 0.5, 2.0);
            const double flow = uniform(rng, 0.1, 1.0);
            net.activities.push_back({i, j, mu});
            net.lambda[i] += flow;
            net.beta[j] += flow / (mu * rho);
        }
        return net;
    }

    Network random_tree_network(Rng& rng, int classes, int pools)
    {
        Network net;
        net.num_classes = classes;
        net.num_pools = pools;
        for (int i = 0; i < classes; ++i)
            net.lambda.push_back(uniform(rng, 0.1, 2.0));
        for (int j = 0; j < pools; ++j)
            net.beta.push_back(uniform(rng, 0.5, 2.0));
        for (auto [i, j] : random_tree(rng, classes, pools))
            net.activities.push_back({i, j, uniform(rng, 0.5, 2.0)});
        return net;
    }

    double vertex_enumeration_rho(const Network& net)
    {
        // Columns: lambda_e (E), rho, pool slacks (J). Rows: classes, pools.
        const int E = static_cast<int>(net.num_activities());
        const int I = net.num_classes;
        const int J = net.num_pools;
        const int n = E + 1 + J;
        const int m = I + J;
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, n);
        Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
        for (int e = 0; e < E; ++e)
        {
            const auto& a = net.activities[e];
            A(a.cls, e) = 1.0;
            A(I + a.pool, e) = 1.0 / (net.beta[a.pool] * a.mu);
        }
        for (int i = 0; i < I; ++i)
            b(i) = net.lambda[i];
        for (int j = 0; j < J; ++j)
        {
            A(I + j, E) = -1.0;
            A(I + j, E + 1 + j) = 1.0;
        }
        double best = std::numeric_limits<double>::infinity();
        std::vector<bool> choose(n, false);
        std::fill(choose.begin(), choose.begin() + m, true);
        do
        {
            Eigen::MatrixXd basis(m, m);
            int c = 0;
            std::vector<int> cols;
            for (int k = 0; k < n; ++k)
                if (choose[k])
                {
                    basis.col(c++) = A.col(k);
                    cols.push_back(k);
                }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(basis);
            if (lu.rank() < m)
                continue;
            const Eigen::VectorXd x = lu.solve(b);
            if (x.minCoeff() < -1e-12)
                continue;
            for (int k = 0; k < m; ++k)
                if (cols[k] == E)
                    best = std::min(best, x(k));
        } while (std::prev_permutation(choose.begin(), choose.end()));
        return best;
    }

    double erlang_c_probability(int servers, double a)
    {
        double erlang_b = 1.0;
        for (int k = 1; k <= servers; ++k)
            erlang_b = a * erlang_b / (k + a * erlang_b);
        return servers * erlang_b / (servers - a * (1.0 - erlang_b));
    }

    double erlang_c_mean_in_system(int servers, double a)
    {
        return erlang_c_probability(servers, a) * a / (servers - a) + a;
    }

    double euclidean(const std::vector<double>& a, const std::vector<double>& b)
    {
        double ss = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k)
            ss += (a[k] - b[k]) * (a[k] - b[k]);
        return std::sqrt(ss);
    }

    DeviationState random_deviation(Rng& rng, const Network& net, int lowest_pool, double scale)
    {
        auto d = DeviationState::zero(net);
        for (auto& u : d.u)
            u = scale * (2 * rng.uniform() - 1);
        for (auto& w : d.w)
            w = rng.uniform() < 0.5 ? 0.0 : scale * rng.uniform();
        for (int j = 0; j < net.num_pools; ++j)
        {
            if (j == lowest_pool)
                continue;
            double fill = 0.0;
            for (auto e : net.activities_of_pool(j))
                fill += d.u[e];
            if (fill > 0.0)
                d.u[net.activities_of_pool(j).front()] -= fill + scale * rng.uniform();
        }
        return d;
    }
}
