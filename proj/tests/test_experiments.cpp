#include <cmath>

#include <gtest/gtest.h>

#include "laplab/errors.hpp"
#include "laplab/experiments.hpp"
#include "support.hpp"

using namespace laplab;
using namespace laplab::testing;

namespace
{
    struct Fixture
    {
        Network net;
        PriorityOrder po;
        EquilibriumPoint eq;
        DualVariables duals;

        explicit Fixture(Network n)
            : net(std::move(n)), po(assign_priorities(net)), eq(compute_equilibrium(net, po)), duals(compute_duals(net))
        {
        }
    };

    ScalingConfig small_sweep()
    {
        ScalingConfig cfg;
        cfg.r_values = {4, 8, 16};
        cfg.replications = 2;
        cfg.horizon_multiplier = 10.0;
        cfg.base_seed = 5;
        return cfg;
    }
}

TEST(FitTightness, RecoversPowerLaw)
{
    const std::vector<int> r{25, 50, 100, 200, 400};
    std::vector<double> y;
    for (int x : r)
        y.push_back(3.0 * std::sqrt(static_cast<double>(x)));
    const auto fit = fit_tightness_exponent(r, y);
    EXPECT_NEAR(fit.slope, 0.5, 1e-12);
    EXPECT_NEAR(std::exp(fit.intercept), 3.0, 1e-12);
}

TEST(FitTightness, DegenerateInputsThrow)
{
    EXPECT_THROW(fit_tightness_exponent(std::vector<int>{100}, std::vector<double>{1.0}), DegenerateRegressionError);
    EXPECT_THROW(fit_tightness_exponent(std::vector<int>{100, 100}, std::vector<double>{1.0, 2.0}),
                 DegenerateRegressionError);
    EXPECT_THROW(fit_tightness_exponent(std::vector<int>{10, 100}, std::vector<double>{0.0, 2.0}),
                 DegenerateRegressionError);
}

TEST(ScalingSweep, SerialAndParallelAgreeBitForBit)
{
    Fixture f(net_n());
    const auto cfg = small_sweep();
    const auto a = run_scaling_sweep(f.net, f.po, f.eq, cfg, Execution::parallel);
    const auto b = run_scaling_sweep(f.net, f.po, f.eq, cfg, Execution::serial);
    ASSERT_EQ(a.replications.size(), 6u);
    ASSERT_EQ(a.replications.size(), b.replications.size());
    for (std::size_t k = 0; k < a.replications.size(); ++k)
    {
        EXPECT_EQ(a.replications[k].seed, b.replications[k].seed);
        EXPECT_EQ(a.replications[k].mean_norm_f, b.replications[k].mean_norm_f);
        EXPECT_EQ(a.replications[k].ci_half_width, b.replications[k].ci_half_width);
    }
    EXPECT_EQ(sweep_csv(a), sweep_csv(b));
    EXPECT_EQ(sweep_json(a).dump(), sweep_json(b).dump());
}

TEST(ScalingSweep, DeterministicAndSeedSensitive)
{
    Fixture f(net_1());
    auto cfg = small_sweep();
    const auto a = run_scaling_sweep(f.net, f.po, f.eq, cfg);
    const auto b = run_scaling_sweep(f.net, f.po, f.eq, cfg);
    EXPECT_EQ(sweep_csv(a), sweep_csv(b));
    cfg.base_seed = 6;
    const auto c = run_scaling_sweep(f.net, f.po, f.eq, cfg);
    EXPECT_NE(sweep_csv(a), sweep_csv(c));
}

TEST(ScalingSweep, SummariesAreConsistent)
{
    Fixture f(net_1());
    const auto res = run_scaling_sweep(f.net, f.po, f.eq, small_sweep());
    ASSERT_EQ(res.scales.size(), 3u);
    for (const auto& s : res.scales)
    {
        EXPECT_NEAR(s.horizon, 10.0 * std::log(s.r), 1e-12);
        EXPECT_NEAR(s.scaled_norm, s.norm_f.mean / std::pow(s.r, 0.75), 1e-12);
        EXPECT_NEAR(s.fluid_scaled_norm, s.norm_f.mean / s.r, 1e-12);
        EXPECT_GE(s.tail_probability, 0.0);
        EXPECT_LE(s.tail_probability, 1.0);
    }
}

TEST(ScalingSweep, RefusesOverloadedNetworks)
{
    auto net = net_1();
    net.lambda[0] = 1.0;
    const auto po = assign_priorities(net);
    const auto eq = compute_equilibrium(net, po, false);
    EXPECT_THROW(run_scaling_sweep(net, po, eq, small_sweep()), UnsupportedExperimentError);
}

TEST(ScalingSweep, ConfigValidation)
{
    auto cfg = small_sweep();
    cfg.r_values = {};
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg = small_sweep();
    cfg.warmup_fraction = 1.0;
    EXPECT_THROW(cfg.validate(), ValidationError);
    cfg = small_sweep();
    cfg.replications = 0;
    EXPECT_THROW(cfg.validate(), ValidationError);
}

TEST(DefaultHorizon, CoversTwentyDrainTimes)
{
    Fixture f(net_1());
    const double T = default_horizon_multiplier(f.net, f.po, 25);
    EXPECT_GE(T * std::log(25.0), 20.0);
}

TEST(Lyapunov, Net1PaddingMatchesHandCount)
{
    Fixture f(net_1());
    LyapunovConfig cfg;
    cfg.replications = 4;
    cfg.window = 1.0;
    const auto d = lyapunov_drift_check(f.net, f.po, f.eq, f.duals, cfg);
    // nu = 1, W_eq = 0.5: (5 - 0.5) * 100 queued customers.
    EXPECT_EQ(d.padded_queue, 450);
    EXPECT_EQ(d.padded_class, 0);
    EXPECT_NEAR(d.initial_workload, 5.0, 1e-12);
    EXPECT_EQ(d.samples.size(), 4u);
}

TEST(Lyapunov, HighLevelDriftIsNegative)
{
    Fixture f(net_n());
    LyapunovConfig cfg;
    cfg.replications = 20;
    cfg.window = 5.0;
    const auto d = lyapunov_drift_check(f.net, f.po, f.eq, f.duals, cfg);
    EXPECT_TRUE(d.negative_with_confidence);
    // Workload falls at about 1 - rho per unit time while queues persist.
    EXPECT_NEAR(d.drift.mean, -(1.0 - 0.85) * 5.0, 0.3);
}

TEST(Lyapunov, EquilibriumStartHasNoDrift)
{
    Fixture f(net_1());
    LyapunovConfig cfg;
    cfg.level.reset();
    cfg.replications = 40;
    cfg.window = 5.0;
    const auto d = lyapunov_drift_check(f.net, f.po, f.eq, f.duals, cfg);
    EXPECT_EQ(d.padded_queue, 0);
    EXPECT_LT(std::abs(d.drift.mean), 3 * d.drift.half_width + 1e-12);
}

TEST(Lyapunov, SerialMatchesParallel)
{
    Fixture f(net_w());
    LyapunovConfig cfg;
    cfg.replications = 6;
    cfg.window = 2.0;
    const auto a = lyapunov_drift_check(f.net, f.po, f.eq, f.duals, cfg, Execution::parallel);
    const auto b = lyapunov_drift_check(f.net, f.po, f.eq, f.duals, cfg, Execution::serial);
    EXPECT_EQ(a.samples, b.samples);
}

TEST(Lyapunov, FluidWorkloadMatchesDefinition)
{
    Fixture f(net_n());
    auto s = equilibrium_rounded_state(f.net, f.po, f.eq, 10);
    s.q = {3, 7};
    double expect = 0.0;
    for (int i = 0; i < f.net.num_classes; ++i)
        expect += f.duals.nu[i] * s.in_system(i, f.net) / 10.0;
    EXPECT_NEAR(fluid_workload(s, f.net, f.duals), expect, 1e-12);
}

TEST(FluidLln, DistanceIsSmallAndShrinks)
{
    Fixture f(net_n());
    FluidLlnConfig cfg;
    cfg.r_values = {50, 200};
    cfg.seeds = 6;
    cfg.horizon = 5.0;
    const auto res = fluid_lln_check(f.net, f.po, f.eq, cfg);
    ASSERT_EQ(res.median.size(), 2u);
    EXPECT_LT(res.median[1], res.median[0]);
    EXPECT_LT(res.median[1], 0.2);
}
