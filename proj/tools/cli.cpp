#include "cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "laplab/ctmc_oracle.hpp"
#include "laplab/errors.hpp"
#include "laplab/experiments.hpp"
#include "laplab/fluid.hpp"
#include "laplab/io.hpp"
#include "laplab/model.hpp"
#include "laplab/network.hpp"
#include "laplab/priority.hpp"
#include "laplab/scalelimits.hpp"
#include "laplab/simulator.hpp"
#include "laplab/stats.hpp"

#ifndef LAPLAB_VERSION
#define LAPLAB_VERSION "0.0.0"
#endif

namespace laplab::cli
{
    namespace
    {
        using nlohmann::json;
        namespace fs = std::filesystem;

        struct Param
        {
            std::string name;
            json def;
            std::string help;
            bool nullable = false; // accepts "none"
        };

        struct Context
        {
            json cfg;
            fs::path out_dir;
            int workers = 0;
            std::ostream& out;

            double num(const char* k) const { return cfg.at(k).get<double>(); }
            int integer(const char* k) const { return cfg.at(k).get<int>(); }
            std::string str(const char* k) const { return cfg.at(k).get<std::string>(); }
            std::vector<double> list(const char* k) const { return cfg.at(k).get<std::vector<double>>(); }
            std::uint64_t seed() const { return cfg.at("seed").get<std::uint64_t>(); }
        };

        using Handler = std::function<std::vector<std::string>(const Context&)>;

        struct Command
        {
            std::string name;
            std::string description;
            std::vector<Param> params;
            Handler run;
        };

        // ---- shared helpers ----

        struct Loaded
        {
            Network net;
            PriorityOrder po;
        };

        Loaded load(const Context& ctx)
        {
            const auto path = ctx.str("net");
            if (path.empty())
                throw ValidationError({"--net is required (path to a network JSON file)"});
            Loaded l{load_network(path), {}};
            require_valid(l.net);
            const auto tb = ctx.str("tie_break");
            if (tb != "lowest" && tb != "highest")
                throw ValidationError({"--tie_break must be 'lowest' or 'highest'"});
            l.po = assign_priorities(l.net, tb == "lowest" ? TieBreak::lowest_index : TieBreak::highest_index);
            return l;
        }

        std::string activity_label(const std::string& prefix, const Activity& a)
        {
            return prefix + "_" + std::to_string(a.cls + 1) + "_" + std::to_string(a.pool + 1);
        }

        std::vector<std::string> state_header(const Network& net, const std::string& occ, const std::string& queue)
        {
            std::vector<std::string> h{"t"};
            for (const auto& a : net.activities)
                h.push_back(activity_label(occ, a));
            for (int i = 0; i < net.num_classes; ++i)
                h.push_back(queue + "_" + std::to_string(i + 1));
            return h;
        }

        void append_numbers(std::vector<std::string>& cells, const std::vector<double>& xs)
        {
            for (double x : xs)
                cells.push_back(io::format_number(x));
        }

        std::vector<double> sized(const std::vector<double>& v, std::size_t n, double fill, const char* what)
        {
            if (v.empty())
                return std::vector<double>(n, fill);
            if (v.size() != n)
                throw ValidationError({std::string("--") + what + " needs " + std::to_string(n) + " values"});
            return v;
        }

        DeviationState deviation_from(const Context& ctx, const Network& net)
        {
            return {sized(ctx.list("u"), net.num_activities(), 0.0, "u"),
                    sized(ctx.list("w"), net.num_classes, 1.0, "w")};
        }

        json deviation_json(const DeviationState& d) { return {{"u", d.u}, {"w", d.w}}; }

        void write(const Context& ctx, std::vector<std::string>& outputs, const std::string& name,
                   const std::string& content)
        {
            io::write_text((ctx.out_dir / name).string(), content);
            outputs.push_back(name);
        }

        void write(const Context& ctx, std::vector<std::string>& outputs, const std::string& name, const json& j)
        {
            io::write_json((ctx.out_dir / name).string(), j);
            outputs.push_back(name);
        }

        // ---- subcommands ----

        std::vector<std::string> run_analyze(const Context& ctx)
        {
            const auto [net, po] = load(ctx);
            SppOptions opts;
            opts.require_unique = false;
            const auto spp = solve_spp(net, opts);
            const auto crp = check_crp(spp, net);
            const auto duals = compute_duals(net);
            const auto eq = compute_equilibrium(net, po, false);
            const auto a3 = check_assumption3(net, eq);
            json rates = json::array();
            for (std::size_t e = 0; e < net.num_activities(); ++e)
                rates.push_back({{"activity", {net.activities[e].cls + 1, net.activities[e].pool + 1}},
                                 {"rate", spp.routing_rates[e]}});
            json basic = json::array();
            for (auto e : spp.basic_activities)
                basic.push_back({net.activities[e].cls + 1, net.activities[e].pool + 1});
            json report = {
                {"network", network_to_json(net)},
                {"spp", {{"rho", spp.rho}, {"routing_rates", rates}, {"basic_activities", basic}, {"unique", spp.unique}}},
                {"crp", {{"holds", crp.holds}, {"diagnostic", crp.diagnostic}}},
                {"duals", {{"nu", duals.nu}, {"alpha", duals.alpha}, {"workload_rate", workload_rate(net, duals)}}},
                {"priority", priority_to_json(net, po)},
                {"equilibrium",
                 {{"psi", eq.occupancy},
                  {"q", eq.queue},
                  {"lap_rates", eq.lap_rates},
                  {"pool_occupancy", pool_occupancy(net, eq.occupancy)},
                  {"lowest_priority_pool", eq.lowest_pool + 1}}},
                {"assumption3", {{"holds", a3.holds}, {"diagnostics", a3.diagnostics}}},
            };
            std::vector<std::string> outputs;
            write(ctx, outputs, "analysis.json", report);
            ctx.out << report.dump(2) << "\n";
            return outputs;
        }

        std::vector<std::string> run_fluid(const Context& ctx)
        {
            const auto [net, po] = load(ctx);
            const auto eq = compute_equilibrium(net, po, true);
            FluidState init{sized(ctx.list("psi"), net.num_activities(), 0.0, "psi"),
                            sized(ctx.list("q"), net.num_classes, 0.0, "q")};
            IntegratorOptions io;
            io.step = ctx.num("step");
            io.output_interval = ctx.num("interval");
            const auto traj = integrate_fluid(init, net, po, ctx.num("horizon"), io);
            auto header = state_header(net, "psi", "q");
            header.push_back("dist_to_eq");
            std::string csv = io::csv_row(header);
            for (std::size_t k = 0; k < traj.t.size(); ++k)
            {
                std::vector<std::string> cells{io::format_number(traj.t[k])};
                append_numbers(cells, traj.states[k].psi);
                append_numbers(cells, traj.states[k].q);
                cells.push_back(io::format_number(distance_to_equilibrium(traj.states[k], eq)));
                csv += io::csv_row(cells);
            }
            std::vector<std::string> outputs;
            write(ctx, outputs, "fluid.csv", csv);
            if (!ctx.cfg.at("drain").is_null())
            {
                DrainOptions d;
                d.random_samples = ctx.integer("drain_samples");
                d.seed = ctx.seed();
                d.horizon = ctx.num("drain_horizon");
                d.integrator = io;
                const double bound = ctx.num("drain");
                const double tol = ctx.num("drain_tol");
                const auto rep = drain_time(bound, tol, net, po, d);
                write(ctx, outputs, "drain.json",
                      json{{"bound", bound}, {"tol", tol}, {"drain_time", rep.drain_time}, {"times", rep.times}});
                ctx.out << "drain time " << io::format_number(rep.drain_time) << "\n";
            }
            return outputs;
        }

        std::vector<std::string> run_hydro(const Context& ctx)
        {
            const auto [net, po] = load(ctx);
            const auto init = deviation_from(ctx, net);
            IntegratorOptions io;
            io.step = ctx.num("step");
            io.output_interval = ctx.num("interval");
            const auto traj = integrate_hydro(init, net, po, ctx.num("horizon"), io);
            const auto target = map_L(init, net, po);
            auto dist = [](const DeviationState& a, const DeviationState& b) {
                double ss = 0.0;
                for (std::size_t e = 0; e < a.u.size(); ++e)
                    ss += (a.u[e] - b.u[e]) * (a.u[e] - b.u[e]);
                for (std::size_t i = 0; i < a.w.size(); ++i)
                    ss += (a.w[i] - b.w[i]) * (a.w[i] - b.w[i]);
                return std::sqrt(ss);
            };
            auto header = state_header(net, "u", "w");
            header.push_back("dist_to_L");
            std::string csv = io::csv_row(header);
            const auto z0 = init.z(net);
            double conservation = 0.0;
            double freeze = 0.0;
            for (std::size_t k = 0; k < traj.t.size(); ++k)
            {
                std::vector<std::string> cells{io::format_number(traj.t[k])};
                append_numbers(cells, traj.states[k].u);
                append_numbers(cells, traj.states[k].w);
                cells.push_back(io::format_number(dist(traj.states[k], target)));
                csv += io::csv_row(cells);
                const auto z = traj.states[k].z(net);
                for (std::size_t i = 0; i < z.size(); ++i)
                    conservation = std::max(conservation, std::abs(z[i] - z0[i]));
                if (dist(traj.states[k], traj.states.back()) > 1e-8)
                    freeze = k + 1 < traj.t.size() ? traj.t[k + 1] : traj.t[k];
            }
            std::vector<std::string> outputs;
            write(ctx, outputs, "hydro.csv", csv);
            write(ctx, outputs, "hydro.json",
                  json{{"initial", deviation_json(init)},
                       {"map_L", deviation_json(target)},
                       {"terminal", deviation_json(traj.states.back())},
                       {"terminal_distance_to_map_L", dist(traj.states.back(), target)},
                       {"freeze_time", freeze},
                       {"max_conservation_error", conservation}});
            return outputs;
        }

        std::vector<std::string> run_lfm(const Context& ctx)
        {
            const auto [net, po] = load(ctx);
            const auto init = deviation_from(ctx, net);
            const auto maps = lfm_matrix(net, po);
            const auto method_name = ctx.str("method");
            if (method_name != "expm" && method_name != "rk4")
                throw ValidationError({"--method must be 'expm' or 'rk4'"});
            const auto method = method_name == "expm" ? LfmMethod::matrix_exponential : LfmMethod::rk4;
            const auto other = method == LfmMethod::rk4 ? LfmMethod::matrix_exponential : LfmMethod::rk4;
            const double horizon = ctx.num("horizon");
            const double interval = ctx.num("interval");
            const auto traj = integrate_lfm(init, maps, net, horizon, interval, method);
            const auto check = integrate_lfm(init, maps, net, horizon, interval, other);
            double agreement = 0.0;
            for (std::size_t k = 0; k < traj.t.size(); ++k)
                for (std::size_t i = 0; i < traj.x[k].size(); ++i)
                    agreement = std::max(agreement, std::abs(traj.x[k][i] - check.x[k][i]));
            const auto dc = decay_constants(maps);

            std::vector<std::string> header{"t"};
            for (int i = 0; i < net.num_classes; ++i)
                header.push_back("x_" + std::to_string(i + 1));
            for (const auto& a : net.activities)
                header.push_back(activity_label("psi", a));
            std::string csv = io::csv_row(header);
            for (std::size_t k = 0; k < traj.t.size(); ++k)
            {
                std::vector<std::string> cells{io::format_number(traj.t[k])};
                append_numbers(cells, traj.x[k]);
                append_numbers(cells, traj.psi[k]);
                csv += io::csv_row(cells);
            }
            std::vector<std::string> outputs;
            write(ctx, outputs, "lfm.csv", csv);
            write(ctx, outputs, "maps.json", maps_to_json(maps, net));
            write(ctx, outputs, "decay.json",
                  json{{"c1", dc.c1},
                       {"c2", dc.c2},
                       {"min_real_eigenvalue", dc.min_real_eigenvalue},
                       {"eigenbasis_condition", std::isfinite(dc.eigenbasis_condition) ? json(dc.eigenbasis_condition)
                                                                                        : json(nullptr)},
                       {"c1_measured", dc.c1_measured},
                       {"expm_vs_rk4_sup", agreement}});
            return outputs;
        }

        std::vector<std::string> run_simulate(const Context& ctx)
        {
            const auto [net, po] = load(ctx);
            const auto eq = compute_equilibrium(net, po, true);
            SimConfig sc;
            sc.seed = ctx.seed();
            sc.scale = ctx.integer("r");
            sc.horizon = ctx.num("horizon");
            sc.warmup = ctx.num("warmup");
            sc.sample_interval = ctx.num("interval");
            sc.num_batches = ctx.integer("batches");
            sc.record_trace = true;
            sc.record_events = ctx.cfg.at("events").get<bool>();
            const auto init = ctx.str("init");
            if (init != "empty" && init != "equilibrium")
                throw ValidationError({"--init must be 'empty' or 'equilibrium'"});
            sc.initial_state = init == "empty" ? InitialKind::empty : InitialKind::equilibrium_rounded;
            const auto run = simulate_horizon(net, po, eq, sc);

            auto header = state_header(net, "psi", "q");
            header.push_back("norm_F");
            std::string csv = io::csv_row(header);
            for (const auto& row : run.trace)
            {
                std::vector<std::string> cells{io::format_number(row.t)};
                for (auto v : row.psi)
                    cells.push_back(std::to_string(v));
                for (auto v : row.q)
                    cells.push_back(std::to_string(v));
                cells.push_back(io::format_number(row.norm_f));
                csv += io::csv_row(cells);
            }
            auto window_json = [](const WindowAverages& w) {
                return json{{"duration", w.duration}, {"psi", w.psi},           {"q", w.q},
                            {"normF", w.norm_f},      {"normF_l1", w.norm_f_l1}, {"total", w.total},
                            {"W", w.workload}};
            };
            json summary = {{"num_events", run.num_events}, {"window", window_json(run.summary)}};
            if (run.batches.size() >= 2)
            {
                auto est = [&](auto field) {
                    std::vector<double> xs;
                    for (const auto& b : run.batches)
                        xs.push_back(field(b));
                    return json{{"mean", stats::mean(xs)}, {"half_width", stats::ci_half_width(xs)}};
                };
                summary["batch_means"] = {
                    {"num_batches", run.batches.size()},
                    {"normF", est([](const WindowAverages& w) { return w.norm_f; })},
                    {"normF_l1", est([](const WindowAverages& w) { return w.norm_f_l1; })},
                    {"total", est([](const WindowAverages& w) { return w.total; })},
                    {"W", est([](const WindowAverages& w) { return w.workload; })},
                };
            }
            summary["final_state"] = {{"psi", run.final_state.psi}, {"q", run.final_state.q}};
            std::vector<std::string> outputs;
            write(ctx, outputs, "trace.csv", csv);
            write(ctx, outputs, "summary.json", summary);
            if (sc.record_events)
            {
                std::string ev = "t,kind,class,pool\n";
                for (const auto& e : run.events)
                    ev += io::csv_row({io::format_number(e.t),
                                       e.kind == EventRecord::Kind::arrival ? "arrival" : "departure",
                                       std::to_string(e.cls + 1), std::to_string(e.pool < 0 ? 0 : e.pool + 1)});
                write(ctx, outputs, "events.csv", ev);
            }
            return outputs;
        }

        std::vector<std::string> run_sweep(const Context& ctx)
        {
            const auto [net, po] = load(ctx);
            const auto eq = compute_equilibrium(net, po, true);
            ScalingConfig sc;
            sc.r_values = ctx.cfg.at("r").get<std::vector<int>>();
            sc.epsilon = ctx.num("eps");
            sc.horizon_multiplier = ctx.num("T");
            sc.warmup_fraction = ctx.num("warmup");
            sc.replications = ctx.integer("reps");
            sc.num_batches = ctx.integer("batches");
            sc.tail_constant = ctx.num("tail_c");
            sc.base_seed = ctx.seed();
            sc.workers = ctx.workers;
            const auto mode = ctx.cfg.at("serial").get<bool>() ? Execution::serial : Execution::parallel;
            const auto res = run_scaling_sweep(net, po, eq, sc, mode);
            std::vector<std::string> outputs;
            write(ctx, outputs, "sweep.csv", sweep_csv(res));
            write(ctx, outputs, "sweep.json", sweep_json(res));
            ctx.out << "slope " << io::format_number(res.fit.slope) << " +/- "
                    << io::format_number(res.fit.slope_stderr) << "\n";
            return outputs;
        }

        std::vector<std::string> run_lyapunov(const Context& ctx)
        {
            const auto [net, po] = load(ctx);
            const auto eq = compute_equilibrium(net, po, true);
            const auto duals = compute_duals(net);
            LyapunovConfig lc;
            lc.scale = ctx.integer("r");
            lc.window = ctx.num("window");
            if (ctx.cfg.at("level").is_null())
                lc.level.reset();
            else
                lc.level = ctx.num("level");
            lc.replications = ctx.integer("reps");
            lc.base_seed = ctx.seed();
            lc.workers = ctx.workers;
            const auto d = lyapunov_drift_check(net, po, eq, duals, lc);
            std::vector<std::string> outputs;
            write(ctx, outputs, "drift.json", drift_json(d, lc));
            ctx.out << "drift " << io::format_number(d.drift.mean) << " +/- " << io::format_number(d.drift.half_width)
                    << "\n";
            return outputs;
        }

        std::vector<std::string> run_oracle(const Context& ctx)
        {
            const auto [net, po] = load(ctx);
            const int r = ctx.integer("r");
            const int cap = ctx.integer("queue_cap");
            const auto res = solve_ctmc_oracle(net, po, r, cap, ctx.cfg.at("max_states").get<std::size_t>());
            std::vector<std::string> outputs;
            write(ctx, outputs, "oracle.json",
                  json{{"r", r},
                       {"queue_cap", cap},
                       {"num_states", res.states.size()},
                       {"mean_total", res.mean_total},
                       {"mean_psi", res.mean_psi},
                       {"mean_q", res.mean_q},
                       {"blocking_mass", res.blocking_mass}});
            ctx.out << "mean in system " << io::format_number(res.mean_total) << "\n";
            return outputs;
        }

        std::vector<std::string> run_compare(const Context& ctx)
        {
            const auto [net, po] = load(ctx);
            const auto eq = compute_equilibrium(net, po, true);
            ScalingComparisonConfig cc;
            cc.r_values = ctx.cfg.at("r").get<std::vector<int>>();
            cc.gamma = ctx.num("gamma");
            cc.num_seeds = ctx.integer("seeds");
            cc.base_seed = ctx.seed();
            cc.perturbation = deviation_from(ctx, net);
            cc.lfm_t_min = ctx.num("t_min");
            cc.lfm_horizon = ctx.num("lfm_horizon");
            cc.hydro_horizon = ctx.num("hydro_horizon");
            cc.workers = ctx.workers;
            const auto res = compare_scalings(net, po, eq, cc);
            std::string csv = "r,gamma,seed,sup_dist_lfm,sup_dist_hydro\n";
            for (const auto& row : res.rows)
                csv += io::csv_row({std::to_string(row.r), io::format_number(row.gamma), std::to_string(row.seed),
                                    io::format_number(row.sup_dist_lfm), io::format_number(row.sup_dist_hydro)});
            json per_r = json::array();
            for (std::size_t k = 0; k < res.r_values.size(); ++k)
                per_r.push_back({{"r", res.r_values[k]},
                                 {"median_sup_dist_lfm", res.median_lfm[k]},
                                 {"median_sup_dist_hydro", res.median_hydro[k]},
                                 {"median_noise_floor", res.median_noise[k]}});
            std::vector<std::string> outputs;
            write(ctx, outputs, "compare.csv", csv);
            write(ctx, outputs, "compare.json", json{{"perturbation", deviation_json(cc.perturbation)}, {"per_r", per_r}});
            return outputs;
        }

        // ---- command table ----

        std::vector<Param> with_common(std::vector<Param> ps)
        {
            ps.insert(ps.begin(), {{"net", "", "network JSON file"},
                                   {"seed", nullptr, "base seed (falls back to LAPLAB_SEED, then 1)"},
                                   {"tie_break", "lowest", "leaf tie-break: lowest | highest"}});
            return ps;
        }

        const std::vector<Command>& commands()
        {
            static const std::vector<Command> table = {
                {"analyze", "SPP, duals, priorities and equilibrium", with_common({}), run_analyze},
                {"fluid", "integrate the fluid model",
                 with_common({{"psi", json::array(), "initial occupancies (comma list, default 0)"},
                              {"q", json::array(), "initial queues (comma list, default 0)"},
                              {"horizon", 20.0, "time horizon"},
                              {"step", 1e-3, "RK4 step"},
                              {"interval", 0.1, "output interval"},
                              {"drain", nullptr, "also measure the drain time for this bound K"},
                              {"drain_tol", 1e-3, "drain tolerance"},
                              {"drain_samples", 20, "random initial states for the drain time"},
                              {"drain_horizon", 60.0, "horizon for each drain trajectory"}}),
                 run_fluid},
                {"hydro", "integrate the hydrodynamic model",
                 with_common({{"u", json::array(), "occupancy deviations (default 0)"},
                              {"w", json::array(), "queue components (default 1)"},
                              {"horizon", 20.0, "time horizon"},
                              {"step", 1e-3, "RK4 step"},
                              {"interval", 0.1, "output interval"}}),
                 run_hydro},
                {"lfm", "local fluid model, maps and decay constants",
                 with_common({{"u", json::array(), "occupancy deviations (default 0)"},
                              {"w", json::array(), "queue components (default 1)"},
                              {"horizon", 10.0, "time horizon"},
                              {"interval", 0.1, "output interval"},
                              {"method", "expm", "expm | rk4"}}),
                 run_lfm},
                {"simulate", "simulate the r-scaled chain under LAP",
                 with_common({{"r", 100, "scale"},
                              {"horizon", 100.0, "time horizon"},
                              {"warmup", 0.0, "warmup discarded from averages"},
                              {"interval", 1.0, "trace sample interval"},
                              {"init", "equilibrium", "empty | equilibrium"},
                              {"batches", 10, "batch means over the post-warmup window"},
                              {"events", false, "write the event log"}}),
                 run_simulate},
                {"sweep", "stationary deviation scaling sweep",
                 with_common({{"r", json::array({25, 50, 100, 200, 400}), "increasing scales"},
                              {"eps", 0.25, "reporting exponent 1/2 + eps"},
                              {"T", 0.0, "horizon multiplier (0 = 20 drain times at the smallest r)"},
                              {"warmup", 0.2, "warmup fraction"},
                              {"reps", 10, "replications per r"},
                              {"batches", 10, "batches per replication"},
                              {"tail_c", 1.0, "tail level C in |F| > C r^(1/2+eps)"},
                              {"serial", false, "use the serial reference loop"}}),
                 run_sweep},
                {"lyapunov", "workload drift from a high-workload start",
                 with_common({{"r", 100, "scale"},
                              {"window", 20.0, "drift window"},
                              {"level", 5.0, "initial fluid workload (none = equilibrium start)", true},
                              {"reps", 50, "replications"}}),
                 run_lyapunov},
                {"oracle", "exact stationary law of the truncated chain",
                 with_common({{"r", 5, "scale"},
                              {"queue_cap", 200, "queue truncation per class"},
                              {"max_states", 200000, "state-space limit"}}),
                 run_oracle},
                {"compare", "simulation against the hydrodynamic and local fluid models",
                 with_common({{"r", json::array({100, 400}), "scales"},
                              {"gamma", 0.75, "h(r) = r^gamma"},
                              {"seeds", 10, "seeds per r"},
                              {"u", json::array(), "occupancy deviations (default 0)"},
                              {"w", json::array(), "queue components (default 1)"},
                              {"t_min", 1.0, "start of the local fluid window"},
                              {"lfm_horizon", 5.0, "end of the local fluid window"},
                              {"hydro_horizon", 2.0, "hydrodynamic window in rescaled time"}}),
                 run_compare},
            };
            return table;
        }

        const Command& find_command(const std::string& name)
        {
            for (const auto& c : commands())
                if (c.name == name)
                    return c;
            throw ValidationError({"unknown subcommand '" + name + "'"});
        }

        json parse_value(const json& def, const std::string& name, const std::string& text, bool nullable = false)
        {
            auto fail = [&] { return ValidationError({"invalid value for --" + name + ": '" + text + "'"}); };
            auto number = [&](const std::string& s, bool integral) -> json {
                std::size_t pos = 0;
                try
                {
                    if (integral)
                    {
                        const long long v = std::stoll(s, &pos);
                        if (pos == s.size())
                            return v;
                    }
                    else
                    {
                        const double v = std::stod(s, &pos);
                        if (pos == s.size())
                            return v;
                    }
                }
                catch (const std::exception&)
                {
                }
                throw fail();
            };
            if (def.is_array())
            {
                const bool integral = !def.empty() && def.front().is_number_integer();
                json arr = json::array();
                std::stringstream ss(text);
                std::string item;
                while (std::getline(ss, item, ','))
                    if (!item.empty())
                        arr.push_back(number(item, integral));
                return arr;
            }
            if (name == "seed")
                return number(text, true);
            if (nullable && text == "none")
                return nullptr;
            if (def.is_null())
                return text == "none" ? json(nullptr) : number(text, false);
            if (def.is_string())
                return text;
            if (def.is_number_integer())
                return number(text, true);
            if (def.is_number())
                return number(text, false);
            throw fail();
        }

        std::string value_text(const json& v)
        {
            if (v.is_string())
                return v.get<std::string>();
            if (v.is_null())
                return "none";
            if (v.is_array())
            {
                std::string s;
                for (const auto& x : v)
                    s += (s.empty() ? "" : ",") + x.dump();
                return s;
            }
            return v.dump();
        }

        // Equivalent invocation rebuilt from the resolved configuration.
        std::vector<std::string> canonical_argv(const Command& cmd, const json& cfg)
        {
            std::vector<std::string> argv{cmd.name};
            for (const auto& p : cmd.params)
            {
                const auto& v = cfg.at(p.name);
                if (v.is_boolean())
                {
                    if (v.get<bool>())
                        argv.push_back("--" + p.name);
                    continue;
                }
                if (v.is_array() && v.empty())
                    continue;
                argv.push_back("--" + p.name);
                argv.push_back(value_text(v));
            }
            return argv;
        }

        void execute(const Command& cmd, const json& cfg, const fs::path& out_dir, int workers, std::ostream& out)
        {
            fs::create_directories(out_dir);
            Context ctx{cfg, out_dir, workers, out};
            auto outputs = cmd.run(ctx);
            outputs.push_back("manifest.json");
            const json manifest = {
                {"command", cmd.name},
                {"argv", canonical_argv(cmd, cfg)},
                {"inputs", {{"net", cfg.at("net")}}},
                {"config", cfg},
                {"version", LAPLAB_VERSION},
                {"seed", cfg.at("seed")},
                {"outputs", outputs},
            };
            io::write_json((out_dir / "manifest.json").string(), manifest);
        }

        // Defaults, then the config file, then explicit flags.
        json resolve(const Command& cmd, const std::string& config_path, const std::map<std::string, std::string>& flags,
                     const std::map<std::string, bool>& switches)
        {
            json cfg = json::object();
            for (const auto& p : cmd.params)
                cfg[p.name] = p.def;
            if (!config_path.empty())
            {
                const auto file = io::read_json(config_path);
                if (!file.is_object())
                    throw ValidationError({"config file " + config_path + " must hold a JSON object"});
                for (const auto& [k, v] : file.items())
                {
                    if (!cfg.contains(k))
                        throw ValidationError({"unknown key '" + k + "' in config file " + config_path});
                    cfg[k] = v;
                }
            }
            for (const auto& [k, text] : flags)
                for (const auto& p : cmd.params)
                    if (p.name == k)
                        cfg[k] = parse_value(p.def, k, text, p.nullable);
            for (const auto& [k, on] : switches)
                if (on)
                    cfg[k] = true;
            if (cfg.at("seed").is_null())
            {
                const char* env = std::getenv("LAPLAB_SEED");
                cfg["seed"] = env ? parse_value(json(0ULL), "seed", env) : json(1);
            }
            if (!cfg.at("seed").is_number_integer() || cfg.at("seed").get<long long>() < 0)
                throw ValidationError({"seed must be a nonnegative integer"});
            cfg["seed"] = cfg.at("seed").get<std::uint64_t>();
            return cfg;
        }
    }

    int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
    {
        CLI::App app{"leaf activity priority analysis and simulation", "laplab"};
        app.set_version_flag("--version", LAPLAB_VERSION);
        app.require_subcommand(1);

        struct Bound
        {
            const Command* cmd;
            CLI::App* sub;
            std::map<std::string, std::string> values;
            std::map<std::string, bool> switches;
            std::string config;
            std::string out_dir = "laplab_out";
            int workers = 0;
        };
        std::vector<std::unique_ptr<Bound>> bound;
        for (const auto& cmd : commands())
        {
            auto b = std::make_unique<Bound>();
            b->cmd = &cmd;
            b->sub = app.add_subcommand(cmd.name, cmd.description);
            for (const auto& p : cmd.params)
            {
                if (p.def.is_boolean())
                    b->sub->add_flag("--" + p.name, b->switches[p.name], p.help);
                else
                    b->sub->add_option("--" + p.name, b->values[p.name], p.help);
            }
            b->sub->add_option("--config", b->config, "JSON config; flags override its values");
            b->sub->add_option("--out", b->out_dir, "output directory")->capture_default_str();
            b->sub->add_option("--workers", b->workers, "worker threads (0 = all cores)");
            bound.push_back(std::move(b));
        }
        std::string manifest_path;
        std::string replay_out = "laplab_out";
        int replay_workers = 0;
        auto* replay = app.add_subcommand("replay", "re-run a command from its manifest");
        replay->add_option("--manifest", manifest_path, "manifest.json of an earlier run")->required();
        replay->add_option("--out", replay_out, "output directory")->capture_default_str();
        replay->add_option("--workers", replay_workers, "worker threads (0 = all cores)");

        std::vector<std::string> reversed(args.rbegin(), args.rend());
        try
        {
            app.parse(reversed);
        }
        catch (const CLI::ParseError& e)
        {
            return app.exit(e, out, err) == 0 ? 0 : 2;
        }

        try
        {
            if (replay->parsed())
            {
                const auto m = io::read_json(manifest_path);
                const auto& cmd = find_command(m.at("command").get<std::string>());
                execute(cmd, m.at("config"), replay_out, replay_workers, out);
                return 0;
            }
            for (const auto& b : bound)
            {
                if (!b->sub->parsed())
                    continue;
                std::map<std::string, std::string> given;
                for (const auto& [k, v] : b->values)
                    if (b->sub->count("--" + k) > 0)
                        given[k] = v;
                const auto cfg = resolve(*b->cmd, b->config, given, b->switches);
                execute(*b->cmd, cfg, b->out_dir, b->workers, out);
                return 0;
            }
            return 2;
        }
        catch (const ValidationError& e)
        {
            for (const auto& v : e.violations)
                err << "error: " << v << "\n";
            return 2;
        }
        catch (const Assumption3Error& e)
        {
            err << "error: " << e.what() << "\n";
            return 2;
        }
        catch (const UnsupportedExperimentError& e)
        {
            err << "error: " << e.what() << "\n";
            return 2;
        }
        catch (const DegenerateOptimumError& e)
        {
            err << "error: " << e.what() << "\n";
            return 2;
        }
        catch (const nlohmann::json::exception& e)
        {
            err << "error: malformed config: " << e.what() << "\n";
            return 2;
        }
        catch (const std::exception& e)
        {
            err << "error: " << e.what() << "\n";
            return 1;
        }
    }
}
