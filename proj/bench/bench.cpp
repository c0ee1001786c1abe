// Serial reference loops against the OpenMP kernels on the same jobs.
#include <chrono>
#include <cstdio>
#include <functional>
#include <string>

#include <CLI11.hpp>
#include <omp.h>

#include "laplab/experiments.hpp"
#include "laplab/io.hpp"
#include "laplab/network.hpp"
#include "laplab/scalelimits.hpp"

using namespace laplab;

namespace
{
    double seconds(const std::function<void()>& fn)
    {
        const auto start = std::chrono::steady_clock::now();
        fn();
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }

    void report(const char* name, double serial, double parallel, bool same)
    {
        std::printf("%-10s serial %8.3f s  parallel %8.3f s  speedup %5.2f  %s\n", name, serial, parallel,
                    serial / parallel, same ? "identical" : "MISMATCH");
    }
}

int main(int argc, char** argv)
{
    CLI::App app{"serial vs parallel kernels"};
    std::string net_path = std::string(LAPLAB_DATA_DIR) + "/net_n.json";
    int reps = 10;
    app.add_option("--net", net_path, "network JSON file");
    app.add_option("--reps", reps, "replications per r");
    CLI11_PARSE(app, argc, argv);

    const auto net = load_network(net_path);
    const auto po = assign_priorities(net);
    const auto eq = compute_equilibrium(net, po);
    std::printf("threads available: %d\n", omp_get_max_threads());

    ScalingConfig sweep;
    sweep.replications = reps;
    sweep.horizon_multiplier = default_horizon_multiplier(net, po, sweep.r_values.front());
    ScalingResult a, b;
    const double ts = seconds([&] { a = run_scaling_sweep(net, po, eq, sweep, Execution::serial); });
    const double tp = seconds([&] { b = run_scaling_sweep(net, po, eq, sweep, Execution::parallel); });
    report("sweep", ts, tp, sweep_csv(a) == sweep_csv(b));

    LyapunovConfig drift;
    const auto duals = compute_duals(net);
    DriftEstimate da, db;
    const double ds = seconds([&] { da = lyapunov_drift_check(net, po, eq, duals, drift, Execution::serial); });
    const double dp = seconds([&] { db = lyapunov_drift_check(net, po, eq, duals, drift, Execution::parallel); });
    report("lyapunov", ds, dp, da.samples == db.samples);

    FluidLlnConfig lln;
    FluidLlnResult la, lb;
    const double ls = seconds([&] { la = fluid_lln_check(net, po, eq, lln, Execution::serial); });
    const double lp = seconds([&] { lb = fluid_lln_check(net, po, eq, lln, Execution::parallel); });
    report("fluid-lln", ls, lp, la.sup_distance == lb.sup_distance);

    ScalingComparisonConfig cmp;
    ScalingComparison ca, cb;
    const double cs = seconds([&] { ca = compare_scalings(net, po, eq, cmp, Execution::serial); });
    const double cp = seconds([&] { cb = compare_scalings(net, po, eq, cmp, Execution::parallel); });
    bool same = ca.rows.size() == cb.rows.size();
    for (std::size_t k = 0; same && k < ca.rows.size(); ++k)
        same = ca.rows[k].sup_dist_lfm == cb.rows[k].sup_dist_lfm && ca.rows[k].sup_dist_hydro == cb.rows[k].sup_dist_hydro;
    report("compare", cs, cp, same);
    return 0;
}
