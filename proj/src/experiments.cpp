#include "laplab/experiments.hpp"

#include <algorithm>
#include <cmath>

#include "laplab/errors.hpp"
#include "laplab/fluid.hpp"
#include "laplab/io.hpp"
#include "laplab/rng.hpp"
#include "parallel.hpp"

namespace laplab
{
    namespace
    {
        void require_underloaded(const Network& net)
        {
            SppOptions opts;
            opts.require_unique = false;
            const double rho = solve_spp(net, opts).rho;
            if (!(rho < 1.0))
                throw UnsupportedExperimentError("experiment needs rho < 1 (rho = " + io::format_number(rho) + ")");
        }

        nlohmann::json estimate_json(const Estimate& e) { return {{"mean", e.mean}, {"half_width", e.half_width}}; }
    }

    void ScalingConfig::validate() const
    {
        std::vector<std::string> v;
        if (r_values.size() < 3)
            v.push_back("need at least 3 r values to fit an exponent");
        for (std::size_t k = 0; k < r_values.size(); ++k)
        {
            if (r_values[k] < 2)
                v.push_back("r values must be integers >= 2");
            if (k > 0 && r_values[k] <= r_values[k - 1])
                v.push_back("r values must be strictly increasing");
        }
        if (!(epsilon > 0.0 && epsilon < 0.5))
            v.push_back("epsilon must lie in (0, 1/2)");
        if (horizon_multiplier < 0.0 || !std::isfinite(horizon_multiplier))
            v.push_back("horizon multiplier must be positive (or 0 for the default)");
        if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0))
            v.push_back("warmup fraction must lie in [0, 1)");
        if (replications < 1)
            v.push_back("replications must be positive");
        if (num_batches < 2)
            v.push_back("at least two batches are needed");
        if (!(tail_constant > 0.0))
            v.push_back("tail constant must be positive");
        if (!v.empty())
            throw ValidationError(v);
    }

    double default_horizon_multiplier(const Network& net, const PriorityOrder& po, int r_min)
    {
        DrainOptions opts;
        opts.horizon = 60.0;
        const double t = drain_time(1.0, 1e-3, net, po, opts).drain_time;
        return 20.0 * std::max(t, 1.0) / std::log(static_cast<double>(r_min));
    }

    ScalingResult run_scaling_sweep(const Network& net, const PriorityOrder& po, const EquilibriumPoint& eq,
                                    const ScalingConfig& cfg, Execution mode)
    {
        cfg.validate();
        require_underloaded(net);
        ScalingResult res;
        res.config = cfg;
        res.horizon_multiplier = cfg.horizon_multiplier > 0.0 ? cfg.horizon_multiplier
                                                              : default_horizon_multiplier(net, po, cfg.r_values.front());
        const int n_r = static_cast<int>(cfg.r_values.size());
        const int n_jobs = n_r * cfg.replications;
        res.replications.resize(n_jobs);

        detail::for_each_job(n_jobs, cfg.workers, mode == Execution::parallel, [&](int job) {
            const int r = cfg.r_values[job / cfg.replications];
            const int rep = job % cfg.replications;
            SimConfig sc;
            sc.scale = r;
            sc.seed = stream_seed(cfg.base_seed, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(rep));
            sc.horizon = res.horizon_multiplier * std::log(static_cast<double>(r));
            sc.warmup = cfg.warmup_fraction * sc.horizon;
            sc.initial_state = InitialKind::equilibrium_rounded;
            sc.tail_threshold = cfg.tail_constant * std::pow(static_cast<double>(r), 0.5 + cfg.epsilon);
            const auto est = estimate_stationary(net, po, eq, sc, cfg.num_batches);
            ReplicationSummary& row = res.replications[job];
            row.r = r;
            row.replication = rep;
            row.seed = sc.seed;
            row.mean_norm_f = est.norm_f.mean;
            row.ci_half_width = est.norm_f.half_width;
            row.mean_norm_f_l1 = est.norm_f_l1.mean;
            row.mean_w = est.workload.mean;
            row.tail_fraction = est.tail_fraction.mean;
        });
        summarise_sweep(res);
        return res;
    }

    void summarise_sweep(ScalingResult& res)
    {
        const auto& cfg = res.config;
        res.scales.clear();
        for (int r : cfg.r_values)
        {
            std::vector<double> norms, scaled, ws, tails;
            for (const auto& row : res.replications)
                if (row.r == r)
                {
                    norms.push_back(row.mean_norm_f);
                    scaled.push_back(row.mean_norm_f / std::pow(static_cast<double>(r), 0.5 + cfg.epsilon));
                    ws.push_back(row.mean_w);
                    tails.push_back(row.tail_fraction);
                }
            ScaleSummary s;
            s.r = r;
            s.horizon = res.horizon_multiplier * std::log(static_cast<double>(r));
            s.norm_f.mean = stats::mean(norms);
            s.norm_f.half_width = norms.size() > 1 ? stats::ci_half_width(norms) : 0.0;
            s.mean_w = stats::mean(ws);
            s.scaled_norm = s.norm_f.mean / std::pow(static_cast<double>(r), 0.5 + cfg.epsilon);
            s.median_scaled_norm = stats::median(scaled);
            s.fluid_scaled_norm = s.norm_f.mean / r;
            s.tail_probability = stats::mean(tails);
            res.scales.push_back(s);
        }
        res.fit = fit_tightness_exponent(res);
    }

    stats::LinearFit fit_tightness_exponent(const std::vector<int>& r_values, const std::vector<double>& mean_norms)
    {
        if (r_values.size() != mean_norms.size())
            throw DegenerateRegressionError("r values and norms differ in length");
        std::vector<double> x, y;
        for (std::size_t k = 0; k < r_values.size(); ++k)
        {
            if (!(mean_norms[k] > 0.0))
                throw DegenerateRegressionError("mean norms must be positive to take logs");
            x.push_back(std::log(static_cast<double>(r_values[k])));
            y.push_back(std::log(mean_norms[k]));
        }
        return stats::least_squares(x, y);
    }

    stats::LinearFit fit_tightness_exponent(const ScalingResult& res)
    {
        std::vector<int> rs;
        std::vector<double> ms;
        for (const auto& s : res.scales)
        {
            rs.push_back(s.r);
            ms.push_back(s.norm_f.mean);
        }
        return fit_tightness_exponent(rs, ms);
    }

    double fluid_workload(const SystemState& s, const Network& net, const DualVariables& duals)
    {
        double w = 0.0;
        for (int i = 0; i < net.num_classes; ++i)
            w += duals.nu[i] * static_cast<double>(s.in_system(i, net));
        return w / s.scale;
    }

    DriftEstimate lyapunov_drift_check(const Network& net, const PriorityOrder& po, const EquilibriumPoint& eq,
                                       const DualVariables& duals, const LyapunovConfig& cfg, Execution mode)
    {
        if (cfg.scale < 1 || !(cfg.window > 0.0) || cfg.replications < 2)
            throw ValidationError({"drift check needs r >= 1, a positive window and at least two replications"});
        require_underloaded(net);
        const LapPolicy policy(net, po, cfg.scale);
        SystemState start = equilibrium_rounded_state(net, po, eq, cfg.scale);
        DriftEstimate out;
        out.padded_class = static_cast<int>(std::max_element(duals.nu.begin(), duals.nu.end()) - duals.nu.begin());
        if (cfg.level)
        {
            const double w_eq = fluid_workload(start, net, duals);
            const double gap = *cfg.level - w_eq;
            out.padded_queue =
                gap > 0.0 ? static_cast<std::int64_t>(std::ceil(gap * cfg.scale / duals.nu[out.padded_class] - 1e-9)) : 0;
            start.q[out.padded_class] += out.padded_queue;
        }
        normalize_state(start, policy);
        out.initial_workload = fluid_workload(start, net, duals);

        out.samples.resize(cfg.replications);
        detail::for_each_job(cfg.replications, cfg.workers, mode == Execution::parallel, [&](int rep) {
            SimConfig sc;
            sc.scale = cfg.scale;
            sc.seed = stream_seed(cfg.base_seed, static_cast<std::uint64_t>(cfg.scale), static_cast<std::uint64_t>(rep));
            sc.horizon = cfg.window;
            sc.initial_state = start;
            const auto run = simulate_horizon(net, po, eq, sc);
            out.samples[rep] = fluid_workload(run.final_state, net, duals) - out.initial_workload;
        });
        out.drift = {stats::mean(out.samples), stats::ci_half_width(out.samples)};
        out.negative_with_confidence = out.drift.mean + out.drift.half_width < 0.0;
        return out;
    }

    FluidLlnResult fluid_lln_check(const Network& net, const PriorityOrder& po, const EquilibriumPoint& eq,
                                   const FluidLlnConfig& cfg, Execution mode)
    {
        if (cfg.r_values.empty() || cfg.seeds < 1 || !(cfg.horizon > 0.0) || !(cfg.sample_interval > 0.0))
            throw ValidationError({"fluid LLN check needs r values, seeds and a positive horizon and interval"});
        const std::size_t E = net.num_activities();
        const int I = net.num_classes;
        IntegratorOptions io;
        io.output_interval = cfg.sample_interval;
        const auto fluid = integrate_fluid({std::vector<double>(E, 0.0), std::vector<double>(I, 0.0)}, net, po,
                                           cfg.horizon, io);
        FluidLlnResult out;
        out.r_values = cfg.r_values;
        const int n_r = static_cast<int>(cfg.r_values.size());
        std::vector<double> flat(n_r * cfg.seeds);
        detail::for_each_job(n_r * cfg.seeds, cfg.workers, mode == Execution::parallel, [&](int job) {
            const int r = cfg.r_values[job / cfg.seeds];
            const int k = job % cfg.seeds;
            SimConfig sc;
            sc.scale = r;
            sc.seed = stream_seed(cfg.base_seed, static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(k));
            sc.horizon = cfg.horizon;
            sc.sample_interval = cfg.sample_interval;
            sc.record_trace = true;
            sc.initial_state = InitialKind::empty;
            const auto run = simulate_horizon(net, po, eq, sc);
            double sup = 0.0;
            const auto n = std::min(run.trace.size(), fluid.states.size());
            for (std::size_t s = 0; s < n; ++s)
            {
                const auto& tr = run.trace[s];
                const auto& fs = fluid.states[s];
                double ss = 0.0;
                for (std::size_t e = 0; e < E; ++e)
                {
                    const double d = static_cast<double>(tr.psi[e]) / r - fs.psi[e];
                    ss += d * d;
                }
                for (int i = 0; i < I; ++i)
                {
                    const double d = static_cast<double>(tr.q[i]) / r - fs.q[i];
                    ss += d * d;
                }
                sup = std::max(sup, std::sqrt(ss));
            }
            flat[job] = sup;
        });
        for (int ri = 0; ri < n_r; ++ri)
        {
            out.sup_distance.emplace_back(flat.begin() + ri * cfg.seeds, flat.begin() + (ri + 1) * cfg.seeds);
            out.median.push_back(stats::median(out.sup_distance.back()));
        }
        return out;
    }

    std::string sweep_csv(const ScalingResult& res)
    {
        std::string out = "r,replication,mean_normF,ci_halfwidth,mean_W\n";
        for (const auto& row : res.replications)
            out += io::csv_row({std::to_string(row.r), std::to_string(row.replication),
                                io::format_number(row.mean_norm_f), io::format_number(row.ci_half_width),
                                io::format_number(row.mean_w)});
        return out;
    }

    nlohmann::json sweep_json(const ScalingResult& res)
    {
        const auto& cfg = res.config;
        nlohmann::json scales = nlohmann::json::array();
        for (const auto& s : res.scales)
            scales.push_back({{"r", s.r},
                              {"horizon", s.horizon},
                              {"mean_normF", estimate_json(s.norm_f)},
                              {"mean_W", s.mean_w},
                              {"scaled_normF", s.scaled_norm},
                              {"median_scaled_normF", s.median_scaled_norm},
                              {"fluid_scaled_normF", s.fluid_scaled_norm},
                              {"tail_probability", s.tail_probability}});
        nlohmann::json reps = nlohmann::json::array();
        for (const auto& row : res.replications)
            reps.push_back({{"r", row.r},
                            {"replication", row.replication},
                            {"seed", row.seed},
                            {"mean_normF", row.mean_norm_f},
                            {"ci_halfwidth", row.ci_half_width},
                            {"mean_normF_l1", row.mean_norm_f_l1},
                            {"mean_W", row.mean_w},
                            {"tail_fraction", row.tail_fraction}});
        return {
            {"config",
             {{"r_values", cfg.r_values},
              {"epsilon", cfg.epsilon},
              {"horizon_multiplier", cfg.horizon_multiplier},
              {"warmup_fraction", cfg.warmup_fraction},
              {"replications", cfg.replications},
              {"num_batches", cfg.num_batches},
              {"base_seed", cfg.base_seed},
              {"tail_constant", cfg.tail_constant}}},
            {"resolved_horizon_multiplier", res.horizon_multiplier},
            {"fit", {{"slope", res.fit.slope}, {"intercept", res.fit.intercept}, {"slope_stderr", res.fit.slope_stderr}}},
            {"scales", scales},
            {"replications", reps},
        };
    }

    nlohmann::json drift_json(const DriftEstimate& d, const LyapunovConfig& cfg)
    {
        return {
            {"config",
             {{"r", cfg.scale},
              {"window", cfg.window},
              {"level", cfg.level ? nlohmann::json(*cfg.level) : nlohmann::json(nullptr)},
              {"replications", cfg.replications},
              {"base_seed", cfg.base_seed}}},
            {"initial_W", d.initial_workload},
            {"padded_class", d.padded_class + 1},
            {"padded_queue", d.padded_queue},
            {"drift", estimate_json(d.drift)},
            {"negative_with_95pct_confidence", d.negative_with_confidence},
            {"samples", d.samples},
        };
    }
}
