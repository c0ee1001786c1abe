#include "laplab/scalelimits.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <unsupported/Eigen/MatrixFunctions>

#include "laplab/errors.hpp"
#include "laplab/rng.hpp"
#include "laplab/simulator.hpp"
#include "laplab/stats.hpp"
#include "parallel.hpp"
#include "piecewise_rk4.hpp"

namespace laplab
{
    namespace
    {
        constexpr double abort_tol = 1e-6;

        Eigen::VectorXd to_eigen(const std::vector<double>& v)
        {
            return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
        }

        std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

        struct HydroModel
        {
            const Network& net;
            const PriorityOrder& po;
            std::vector<std::size_t> order;
            std::vector<double> budget; // sum_i mu_ij psi*_ij per pool
            std::vector<double> served; // mu_ij psi*_ij per activity
            int lowest;
            std::size_t E;
            int I;
            int J;

            HydroModel(const Network& n, const PriorityOrder& p, const EquilibriumPoint& eq)
                : net(n), po(p), order(p.activities_by_rank()), budget(n.num_pools, 0.0),
                  served(n.num_activities()), lowest(eq.lowest_pool), E(n.num_activities()), I(n.num_classes),
                  J(n.num_pools)
            {
                for (std::size_t e = 0; e < E; ++e)
                {
                    served[e] = net.activities[e].mu * eq.occupancy[e];
                    budget[net.activities[e].pool] += served[e];
                }
            }

            // Layout: u (E), w (I). The lowest pool has no capacity boundary.
            detail::Vec gaps(const detail::Vec& y) const
            {
                detail::Vec g(I + J, 0.0);
                for (int i = 0; i < I; ++i)
                    g[i] = y[E + i];
                for (std::size_t e = 0; e < E; ++e)
                    g[I + net.activities[e].pool] -= y[e];
                g[I + lowest] = std::numeric_limits<double>::infinity();
                return g;
            }

            detail::Vec derivative(const detail::Vec&, const std::vector<bool>& active) const
            {
                BoundaryFlags flags;
                flags.queue_positive.resize(I);
                flags.pool_full.resize(J);
                for (int i = 0; i < I; ++i)
                    flags.queue_positive[i] = !active[i];
                for (int j = 0; j < J; ++j)
                    flags.pool_full[j] = j != lowest && active[I + j];
                const auto start = allocate_start_rates(net, po, budget, flags);
                detail::Vec d(E + I, 0.0);
                for (std::size_t e = 0; e < E; ++e)
                {
                    d[e] = start[e] - served[e];
                    d[E + net.activities[e].cls] -= start[e];
                }
                for (int i = 0; i < I; ++i)
                    d[E + i] += net.lambda[i];
                return d;
            }

            void project(detail::Vec& y, double tol) const
            {
                for (int i = 0; i < I; ++i)
                {
                    double& w = y[E + i];
                    if (w < -abort_tol)
                        throw InvalidStateError("hydrodynamic queue became negative");
                    if (w <= tol)
                        w = 0.0;
                }
                auto g = gaps(y);
                for (int j = 0; j < J; ++j)
                {
                    if (j == lowest)
                        continue;
                    const double over = -g[I + j];
                    if (over > abort_tol)
                        throw InvalidStateError("hydrodynamic pool " + std::to_string(j + 1) + " over capacity");
                    if (over <= 0.0)
                        continue;
                    for (auto it = order.rbegin(); it != order.rend(); ++it)
                        if (net.activities[*it].pool == j)
                        {
                            y[*it] -= over;
                            break;
                        }
                }
            }
        };

        // Chain state round(r psi* + h u), round(h w), with pool overflow
        // trimmed from the lowest-priority activities.
        SystemState perturbed_state(const Network& net, const PriorityOrder& po, const EquilibriumPoint& eq,
                                    const LapPolicy& policy, double h, const DeviationState& dev)
        {
            const int r = policy.scale();
            SystemState s = empty_state(net, r);
            for (std::size_t e = 0; e < net.num_activities(); ++e)
                s.psi[e] = std::max<std::int64_t>(0, std::llround(eq.occupancy[e] * r + h * dev.u[e]));
            for (int i = 0; i < net.num_classes; ++i)
                s.q[i] = std::max<std::int64_t>(0, std::llround(h * dev.w[i]));
            std::vector<std::int64_t> busy(net.num_pools, 0);
            for (std::size_t e = 0; e < net.num_activities(); ++e)
                busy[net.activities[e].pool] += s.psi[e];
            const auto by_rank = po.activities_by_rank();
            for (auto it = by_rank.rbegin(); it != by_rank.rend(); ++it)
            {
                const int j = net.activities[*it].pool;
                const auto excess = std::min(s.psi[*it], std::max<std::int64_t>(0, busy[j] - policy.capacity(j)));
                s.psi[*it] -= excess;
                busy[j] -= excess;
            }
            normalize_state(s, policy);
            return s;
        }

        DeviationState rescale(const std::vector<std::int64_t>& psi, const std::vector<std::int64_t>& q,
                               const EquilibriumPoint& eq, int r, double h)
        {
            DeviationState d;
            d.u.resize(psi.size());
            d.w.resize(q.size());
            for (std::size_t e = 0; e < psi.size(); ++e)
                d.u[e] = (static_cast<double>(psi[e]) - eq.occupancy[e] * r) / h;
            for (std::size_t i = 0; i < q.size(); ++i)
                d.w[i] = static_cast<double>(q[i]) / h;
            return d;
        }

        double distance(const DeviationState& a, const std::vector<double>& u, const std::vector<double>& w)
        {
            double ss = 0.0;
            for (std::size_t e = 0; e < u.size(); ++e)
                ss += (a.u[e] - u[e]) * (a.u[e] - u[e]);
            for (std::size_t i = 0; i < w.size(); ++i)
                ss += (a.w[i] - w[i]) * (a.w[i] - w[i]);
            return std::sqrt(ss);
        }
    }

    std::vector<double> DeviationState::z(const Network& net) const
    {
        std::vector<double> out = w;
        for (std::size_t e = 0; e < net.num_activities(); ++e)
            out[net.activities[e].cls] += u[e];
        return out;
    }

    DeviationState DeviationState::zero(const Network& net)
    {
        return {std::vector<double>(net.num_activities(), 0.0), std::vector<double>(net.num_classes, 0.0)};
    }

    std::vector<std::string> deviation_violations(const DeviationState& d, const Network& net,
                                                  const PriorityOrder& po, double tol)
    {
        std::vector<std::string> v;
        if (d.u.size() != net.num_activities() || d.w.size() != static_cast<std::size_t>(net.num_classes))
        {
            v.push_back("deviation dimensions do not match the network");
            return v;
        }
        for (int i = 0; i < net.num_classes; ++i)
            if (d.w[i] < -tol)
                v.push_back("queue component of class " + std::to_string(i + 1) + " is negative");
        const int lowest = lowest_priority_pool(net, po);
        std::vector<double> fill(net.num_pools, 0.0);
        for (std::size_t e = 0; e < net.num_activities(); ++e)
            fill[net.activities[e].pool] += d.u[e];
        for (int j = 0; j < net.num_pools; ++j)
            if (j != lowest && fill[j] > tol)
                v.push_back("pool " + std::to_string(j + 1) + " deviation is positive");
        return v;
    }

    std::vector<double> solve_l_prime(const std::vector<double>& z, const Network& net, const PriorityOrder& po)
    {
        const int I = net.num_classes;
        const int J = net.num_pools;
        const int root = I + lowest_priority_pool(net, po);
        // Nodes: classes 0..I-1, pools I..I+J-1. Post-order from the root pool
        // fixes each edge to its parent from the node's own equation.
        std::vector<std::vector<std::size_t>> incident(I + J);
        for (std::size_t e = 0; e < net.num_activities(); ++e)
        {
            incident[net.activities[e].cls].push_back(e);
            incident[I + net.activities[e].pool].push_back(e);
        }
        auto other = [&](std::size_t e, int node) {
            const auto& a = net.activities[e];
            return node < I ? I + a.pool : a.cls;
        };
        std::vector<int> parent_edge(I + J, -1);
        std::vector<int> visit_order;
        std::vector<bool> seen(I + J, false);
        std::vector<int> stack{root};
        seen[root] = true;
        while (!stack.empty())
        {
            const int node = stack.back();
            stack.pop_back();
            visit_order.push_back(node);
            for (auto e : incident[node])
            {
                const int next = other(e, node);
                if (seen[next])
                    continue;
                seen[next] = true;
                parent_edge[next] = static_cast<int>(e);
                stack.push_back(next);
            }
        }
        if (static_cast<int>(visit_order.size()) != I + J)
            throw ValidationError({"activity set not a tree (disconnected)"});

        std::vector<double> c(net.num_activities(), 0.0);
        for (auto it = visit_order.rbegin(); it != visit_order.rend(); ++it)
        {
            const int node = *it;
            if (node == root)
                continue;
            double rest = node < I ? z[node] : 0.0;
            for (auto e : incident[node])
                if (static_cast<int>(e) != parent_edge[node])
                    rest -= c[e];
            c[parent_edge[node]] = rest;
        }
        return c;
    }

    DeviationState map_L(const DeviationState& dev, const Network& net, const PriorityOrder& po)
    {
        return {solve_l_prime(dev.z(net), net, po), std::vector<double>(net.num_classes, 0.0)};
    }

    LinearMaps lfm_matrix(const Network& net, const PriorityOrder& po)
    {
        compute_equilibrium(net, po, true);
        const auto E = static_cast<Eigen::Index>(net.num_activities());
        const Eigen::Index I = net.num_classes;
        LinearMaps m;
        m.lowest_pool = lowest_priority_pool(net, po);
        m.L_prime = Eigen::MatrixXd::Zero(E, I);
        for (Eigen::Index i = 0; i < I; ++i)
        {
            std::vector<double> unit(I, 0.0);
            unit[i] = 1.0;
            m.L_prime.col(i) = to_eigen(solve_l_prime(unit, net, po));
        }
        Eigen::MatrixXd incidence = Eigen::MatrixXd::Zero(I, E); // z = incidence u + w
        Eigen::MatrixXd service = Eigen::MatrixXd::Zero(I, E);   // departures per class
        for (Eigen::Index e = 0; e < E; ++e)
        {
            incidence(net.activities[e].cls, e) = 1.0;
            service(net.activities[e].cls, e) = net.activities[e].mu;
        }
        m.L = Eigen::MatrixXd::Zero(E + I, E + I);
        m.L.topLeftCorner(E, E) = m.L_prime * incidence;
        m.L.topRightCorner(E, I) = m.L_prime;
        m.B = service * m.L_prime;
        return m;
    }

    nlohmann::json maps_to_json(const LinearMaps& maps, const Network& net)
    {
        auto rows = [](const Eigen::MatrixXd& a) {
            nlohmann::json out = nlohmann::json::array();
            for (Eigen::Index i = 0; i < a.rows(); ++i)
            {
                nlohmann::json row = nlohmann::json::array();
                for (Eigen::Index k = 0; k < a.cols(); ++k)
                    row.push_back(a(i, k));
                out.push_back(row);
            }
            return out;
        };
        nlohmann::json classes = nlohmann::json::array();
        for (int i = 0; i < net.num_classes; ++i)
            classes.push_back("z_" + std::to_string(i + 1));
        nlohmann::json acts = nlohmann::json::array();
        for (const auto& a : net.activities)
            acts.push_back("c_" + std::to_string(a.cls + 1) + "_" + std::to_string(a.pool + 1));
        nlohmann::json state = nlohmann::json::array();
        for (const auto& a : net.activities)
            state.push_back("u_" + std::to_string(a.cls + 1) + "_" + std::to_string(a.pool + 1));
        for (int i = 0; i < net.num_classes; ++i)
            state.push_back("w_" + std::to_string(i + 1));
        return {
            {"lowest_priority_pool", maps.lowest_pool + 1},
            {"L_prime", {{"rows", acts}, {"cols", classes}, {"data", rows(maps.L_prime)}}},
            {"L", {{"rows", state}, {"cols", state}, {"data", rows(maps.L)}}},
            {"B", {{"rows", classes}, {"cols", classes}, {"data", rows(maps.B)}}},
        };
    }

    DeviationState settle_deviation(DeviationState d, const Network& net, const PriorityOrder& po)
    {
        const int lowest = lowest_priority_pool(net, po);
        std::vector<double> slack(net.num_pools, 0.0);
        for (std::size_t e = 0; e < net.num_activities(); ++e)
            slack[net.activities[e].pool] -= d.u[e];
        slack[lowest] = std::numeric_limits<double>::infinity();
        for (auto e : po.activities_by_rank())
        {
            const int i = net.activities[e].cls;
            const int j = net.activities[e].pool;
            const double move = std::max(0.0, std::min(d.w[i], slack[j]));
            d.u[e] += move;
            d.w[i] -= move;
            slack[j] -= move;
        }
        return d;
    }

    DeviationTrajectory integrate_hydro(const DeviationState& initial, const Network& net, const PriorityOrder& po,
                                        double horizon, const IntegratorOptions& opts)
    {
        require_consistent(net, po);
        const auto eq = compute_equilibrium(net, po, true);
        if (auto v = deviation_violations(initial, net, po, opts.boundary_tol); !v.empty())
            throw InvalidStateError(v.front());
        const auto settled = settle_deviation(initial, net, po);
        HydroModel model(net, po, eq);
        const std::size_t E = net.num_activities();
        detail::Vec y(settled.u);
        y.insert(y.end(), settled.w.begin(), settled.w.end());

        DeviationTrajectory traj;
        detail::StepControl ctl;
        ctl.step = opts.step;
        ctl.boundary_tol = opts.boundary_tol;
        ctl.output_interval = opts.output_interval;
        detail::integrate_piecewise(y, model, horizon, ctl, [&](double t, const detail::Vec& v) {
            traj.t.push_back(t);
            traj.states.push_back({std::vector<double>(v.begin(), v.begin() + E), std::vector<double>(v.begin() + E, v.end())});
        });
        return traj;
    }

    std::vector<double> lfm_state(const LinearMaps& maps, const std::vector<double>& x0, double t)
    {
        const Eigen::MatrixXd P = (-maps.B * t).exp();
        return to_std(P * to_eigen(x0));
    }

    LfmTrajectory integrate_lfm(const DeviationState& initial, const LinearMaps& maps, const Network& net,
                                double horizon, double output_interval, LfmMethod method, double rk_step)
    {
        if (!(horizon >= 0.0) || !(output_interval > 0.0) || !(rk_step > 0.0))
            throw ValidationError({"horizon, output interval and step must be positive"});
        const Eigen::VectorXd x0 = to_eigen(initial.z(net));
        LfmTrajectory traj;
        auto emit = [&](double t, const Eigen::VectorXd& x) {
            traj.t.push_back(t);
            traj.x.push_back(to_std(x));
            traj.psi.push_back(to_std(maps.L_prime * x));
        };
        const auto n_out = static_cast<long>(std::ceil(horizon / output_interval - 1e-9));
        auto out_time = [&](long k) { return std::min(horizon, static_cast<double>(k) * output_interval); };
        if (method == LfmMethod::matrix_exponential)
        {
            for (long k = 0; k <= n_out; ++k)
            {
                const double t = out_time(k);
                emit(t, (-maps.B * t).exp() * x0);
            }
            return traj;
        }
        const Eigen::MatrixXd A = -maps.B;
        Eigen::VectorXd x = x0;
        emit(0.0, x);
        double t = 0.0;
        for (long k = 1; k <= n_out; ++k)
        {
            const double target = out_time(k);
            while (t < target)
            {
                const double h = std::min(rk_step, target - t);
                const Eigen::VectorXd k1 = A * x;
                const Eigen::VectorXd k2 = A * (x + 0.5 * h * k1);
                const Eigen::VectorXd k3 = A * (x + 0.5 * h * k2);
                const Eigen::VectorXd k4 = A * (x + h * k3);
                x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                t = (h == target - t) ? target : t + h;
            }
            emit(target, x);
        }
        return traj;
    }

    DecayConstants decay_constants(const LinearMaps& maps, double margin, double envelope_horizon)
    {
        Eigen::EigenSolver<Eigen::MatrixXd> es(maps.B);
        if (es.info() != Eigen::Success)
            throw NonDecayingSpectrumError("eigen-decomposition of the local fluid generator failed");
        DecayConstants dc;
        dc.min_real_eigenvalue = es.eigenvalues().real().minCoeff();
        if (!(dc.min_real_eigenvalue > 0.0))
            throw NonDecayingSpectrumError("local fluid generator has an eigenvalue with nonpositive real part");
        dc.c2 = (1.0 - margin) * dc.min_real_eigenvalue;

        const Eigen::MatrixXcd V = es.eigenvectors();
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(V);
        const auto sv = svd.singularValues();
        const double smin = sv(sv.size() - 1);
        dc.eigenbasis_condition = smin > 0.0 ? sv(0) / smin : std::numeric_limits<double>::infinity();

        // Envelope of ||exp(-B t)|| e^{c2 t}. The margin makes it decay, but
        // only at rate margin * lambda_min, and a Jordan block of size n peaks
        // near (n - 1) / (margin * lambda_min). The grid covers a few of those.
        const double slack = std::max(margin * dc.min_real_eigenvalue, 1e-12);
        const double horizon = std::max(envelope_horizon, 4.0 * static_cast<double>(maps.B.rows()) / slack);
        const Eigen::MatrixXd shifted = maps.B - dc.c2 * Eigen::MatrixXd::Identity(maps.B.rows(), maps.B.cols());
        const auto envelope = [&](double t) {
            Eigen::JacobiSVD<Eigen::MatrixXd> ps((-shifted * t).exp());
            return ps.singularValues()(0);
        };
        const int steps = 2000;
        const double dt = horizon / steps;
        dc.c1_measured = 1.0;
        int best = 0;
        for (int k = 1; k <= steps; ++k)
        {
            const double v = envelope(k * dt);
            if (v > dc.c1_measured)
            {
                dc.c1_measured = v;
                best = k;
            }
        }
        if (best > 0)
            for (int k = -100; k <= 100; ++k)
                dc.c1_measured = std::max(dc.c1_measured, envelope(std::max(0.0, (best + k / 100.0) * dt)));
        dc.c1 = std::isfinite(dc.eigenbasis_condition) && dc.eigenbasis_condition < 1e8
                    ? std::max(1.0, dc.eigenbasis_condition)
                    : dc.c1_measured;
        return dc;
    }

    ScalingComparison compare_scalings(const Network& net, const PriorityOrder& po, const EquilibriumPoint& eq,
                                       const ScalingComparisonConfig& cfg, Execution mode)
    {
        if (!(cfg.gamma > 0.5 && cfg.gamma <= 1.0))
            throw ValidationError({"gamma must lie in (1/2, 1]"});
        if (cfg.r_values.empty() || cfg.num_seeds < 1)
            throw ValidationError({"need at least one r value and one seed"});
        for (int r : cfg.r_values)
            if (r < 1)
                throw ValidationError({"r values must be positive"});
        if (!(cfg.hydro_output_interval > 0.0) || !(cfg.hydro_horizon > 0.0) || !(cfg.lfm_horizon > cfg.lfm_t_min))
            throw ValidationError({"comparison windows must be nonempty"});
        DeviationState pert = cfg.perturbation;
        if (pert.u.empty() && pert.w.empty())
        {
            pert = DeviationState::zero(net);
            std::fill(pert.w.begin(), pert.w.end(), 1.0);
        }
        if (auto v = deviation_violations(pert, net, po); !v.empty())
            throw ValidationError(v);

        const auto maps = lfm_matrix(net, po);
        const std::size_t E = net.num_activities();
        const int I = net.num_classes;
        const int n_r = static_cast<int>(cfg.r_values.size());
        const int n_jobs = n_r * cfg.num_seeds;
        std::vector<ScalingComparisonRow> rows(n_jobs);

        auto run_job = [&](int job) {
            const int r = cfg.r_values[job / cfg.num_seeds];
            const int k = job % cfg.num_seeds;
            const double h = std::pow(static_cast<double>(r), cfg.gamma);
            const double dt = cfg.hydro_output_interval * h / r;
            const LapPolicy policy(net, po, r);
            ScalingComparisonRow row;
            row.r = r;
            row.gamma = cfg.gamma;
            row.seed = stream_seed(cfg.base_seed, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(k));

            SimConfig sc;
            sc.scale = r;
            sc.seed = row.seed;
            sc.warmup = 0.0;
            sc.horizon = std::max(cfg.lfm_horizon, cfg.hydro_horizon * h / r);
            sc.sample_interval = dt;
            sc.record_trace = true;
            sc.initial_state = perturbed_state(net, po, eq, policy, h, pert);
            const auto run = simulate_horizon(net, po, eq, sc);

            const auto start = rescale(run.trace.front().psi, run.trace.front().q, eq, r, h);
            const auto x0 = start.z(net);
            const auto n_hydro = static_cast<std::size_t>(std::llround(cfg.hydro_horizon / cfg.hydro_output_interval));
            IntegratorOptions io;
            io.output_interval = cfg.hydro_output_interval;
            const auto hydro =
                integrate_hydro(start, net, po, static_cast<double>(n_hydro) * cfg.hydro_output_interval, io);

            for (std::size_t s = 0; s < run.trace.size(); ++s)
            {
                const auto& tr = run.trace[s];
                const auto dev = rescale(tr.psi, tr.q, eq, r, h);
                if (s < hydro.states.size() && s <= n_hydro)
                {
                    row.sup_dist_hydro =
                        std::max(row.sup_dist_hydro, distance(dev, hydro.states[s].u, hydro.states[s].w));
                    if (s == std::min(n_hydro, hydro.states.size() - 1))
                        row.final_queue = *std::max_element(dev.w.begin(), dev.w.end());
                }
                if (tr.t >= cfg.lfm_t_min - 1e-12 && tr.t <= cfg.lfm_horizon + 1e-12)
                {
                    const auto xt = lfm_state(maps, x0, tr.t);
                    const auto c = to_std(maps.L_prime * to_eigen(xt));
                    row.sup_dist_lfm = std::max(row.sup_dist_lfm, distance(dev, c, std::vector<double>(I, 0.0)));
                }
            }

            SimConfig nc = sc;
            nc.seed = stream_seed(row.seed, 1);
            nc.initial_state = InitialKind::equilibrium_rounded;
            const auto base = simulate_horizon(net, po, eq, nc);
            const auto zero_u = std::vector<double>(E, 0.0);
            const auto zero_w = std::vector<double>(I, 0.0);
            for (const auto& tr : base.trace)
                row.noise_floor = std::max(row.noise_floor, distance(rescale(tr.psi, tr.q, eq, r, h), zero_u, zero_w));
            rows[job] = row;
        };

        detail::for_each_job(n_jobs, cfg.workers, mode == Execution::parallel, run_job);

        ScalingComparison out;
        out.rows = rows;
        out.r_values = cfg.r_values;
        for (int ri = 0; ri < n_r; ++ri)
        {
            std::vector<double> lfm, hyd, noise;
            for (int k = 0; k < cfg.num_seeds; ++k)
            {
                const auto& row = rows[ri * cfg.num_seeds + k];
                lfm.push_back(row.sup_dist_lfm);
                hyd.push_back(row.sup_dist_hydro);
                noise.push_back(row.noise_floor);
            }
            out.median_lfm.push_back(stats::median(lfm));
            out.median_hydro.push_back(stats::median(hyd));
            out.median_noise.push_back(stats::median(noise));
        }
        return out;
    }
}
