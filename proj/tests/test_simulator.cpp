#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "laplab/ctmc_oracle.hpp"
#include "laplab/errors.hpp"
#include "laplab/simulator.hpp"
#include "laplab/stats.hpp"
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

        explicit Fixture(Network n) : net(std::move(n)), po(assign_priorities(net)), eq(compute_equilibrium(net, po)) {}
    };

    SystemState make_state(const LapPolicy& policy, std::vector<std::int64_t> psi, std::vector<std::int64_t> q)
    {
        SystemState s = empty_state(policy.network(), policy.scale());
        s.psi = std::move(psi);
        s.q = std::move(q);
        normalize_state(s, policy);
        return s;
    }
}

TEST(LapPolicy, PoolSizesAreFloored)
{
    Network net{1, 1, {0.3}, {0.7}, {{0, 0, 1.0}}};
    const auto po = assign_priorities(net);
    EXPECT_EQ(LapPolicy(net, po, 10).capacity(0), 7);
    EXPECT_EQ(LapPolicy(net, po, 3).capacity(0), 2);
}

TEST(RouteArrival, TakesIdleServerInRankOrder)
{
    Fixture f(net_n());
    const LapPolicy policy(f.net, f.po, 1);
    // Pool 1 full, pool 2 idle: class 2 goes to (2,2).
    auto s = make_state(policy, {0, 1, 0}, {0, 0});
    EXPECT_EQ(route_arrival(s, 1, policy), 1);
    EXPECT_EQ(s.psi, (std::vector<std::int64_t>{0, 1, 1}));
    // Both pools full: class 1 queues.
    EXPECT_EQ(route_arrival(s, 0, policy), -1);
    EXPECT_EQ(s.q, (std::vector<std::int64_t>{1, 0}));
    EXPECT_EQ(s.arrivals, (std::vector<std::int64_t>{1, 1}));
    // Both idle: (2,1) outranks (2,2).
    auto t = make_state(policy, {0, 0, 0}, {0, 0});
    EXPECT_EQ(route_arrival(t, 1, policy), 0);
    EXPECT_EQ(t.psi, (std::vector<std::int64_t>{0, 1, 0}));
}

TEST(ScheduleServer, PicksHighestPriorityQueue)
{
    Fixture w(net_w());
    const LapPolicy pw(w.net, w.po, 1);
    auto s = make_state(pw, {1, 0}, {2, 3});
    --s.psi[0];
    --s.busy[0];
    ++s.departures[0];
    EXPECT_EQ(schedule_server(s, 0, pw), 0);
    EXPECT_EQ(s.q, (std::vector<std::int64_t>{1, 3}));

    auto t = make_state(pw, {1, 0}, {0, 1});
    --t.psi[0];
    --t.busy[0];
    EXPECT_EQ(schedule_server(t, 0, pw), 1);
    EXPECT_EQ(t.q, (std::vector<std::int64_t>{0, 0}));

    Fixture n(net_n());
    const LapPolicy pn(n.net, n.po, 1);
    auto u = make_state(pn, {1, 1, 0}, {0, 1});
    --u.psi[0];
    --u.busy[1];
    EXPECT_EQ(schedule_server(u, 1, pn), 1);
    EXPECT_EQ(u.psi, (std::vector<std::int64_t>{0, 1, 1}));

    auto idle = make_state(pn, {1, 1, 0}, {0, 0});
    --idle.psi[0];
    --idle.busy[1];
    EXPECT_EQ(schedule_server(idle, 1, pn), -1);
}

TEST(StepEvent, EmptyNet1OnlyArrives)
{
    Fixture f(net_1());
    const LapPolicy policy(f.net, f.po, 1);
    EXPECT_DOUBLE_EQ(total_event_rate(empty_state(f.net, 1), policy), 0.5);
    Rng rng(1);
    double total = 0.0;
    const int n = 100000;
    for (int k = 0; k < n; ++k)
    {
        auto s = make_state(policy, {0}, {0});
        const auto ev = step_event(s, policy, rng);
        EXPECT_EQ(ev.kind, EventRecord::Kind::arrival);
        total += s.t;
    }
    EXPECT_NEAR(total / n, 2.0, 0.03);
}

TEST(StepEvent, DepartureProbabilityFollowsRates)
{
    Fixture f(net_1());
    const LapPolicy policy(f.net, f.po, 1);
    const auto base = make_state(policy, {1}, {0});
    EXPECT_DOUBLE_EQ(total_event_rate(base, policy), 1.5);
    Rng rng(2);
    int departures = 0;
    const int n = 100000;
    for (int k = 0; k < n; ++k)
    {
        auto s = base;
        departures += step_event(s, policy, rng).kind == EventRecord::Kind::departure;
    }
    EXPECT_NEAR(static_cast<double>(departures) / n, 2.0 / 3.0, 0.006);
}

TEST(StepEvent, InvariantsHoldOverAMillionEvents)
{
    for (const auto& net : canonical_nets())
    {
        Fixture f(net);
        for (int scale : {1, 10})
        {
            const LapPolicy policy(f.net, f.po, scale);
            auto s = empty_state(f.net, scale);
            Rng rng(stream_seed(99, scale));
            for (int k = 0; k < 1000000; ++k)
            {
                step_event(s, policy, rng);
                if (k % 97 == 0 || scale == 1)
                {
                    const auto v = state_violations(s, policy);
                    ASSERT_TRUE(v.empty()) << v.front() << " after event " << k;
                }
            }
            ASSERT_TRUE(state_violations(s, policy).empty());
            for (int i = 0; i < f.net.num_classes; ++i)
            {
                std::int64_t started = 0;
                for (auto e : f.net.activities_of_class(i))
                    started += s.starts[e];
                EXPECT_EQ(s.q[i] - s.q0[i], s.arrivals[i] - started);
            }
        }
    }
}

TEST(EquilibriumRounded, RespectsCapacity)
{
    Rng rng(61);
    int checked = 0;
    for (int k = 0; k < 200 && checked < 40; ++k)
    {
        const auto net = random_crp_network(rng, 1 + k % 3, 1 + (k / 3) % 3, 0.8);
        const auto po = assign_priorities(net);
        const auto eq = compute_equilibrium(net, po, false);
        if (!check_assumption3(net, eq).holds)
            continue;
        ++checked;
        for (int r : {1, 3, 7, 20, 50})
        {
            const LapPolicy policy(net, po, r);
            const auto s = equilibrium_rounded_state(net, po, eq, r);
            EXPECT_TRUE(state_violations(s, policy).empty());
            for (std::size_t e = 0; e < net.num_activities(); ++e)
                EXPECT_LE(std::abs(static_cast<double>(s.psi[e]) - eq.occupancy[e] * r), 1.0 + 1e-9 + net.num_classes);
        }
    }
    EXPECT_GT(checked, 10);
}

TEST(EquilibriumRounded, NetN)
{
    Fixture f(net_n());
    const auto s = equilibrium_rounded_state(f.net, f.po, f.eq, 10);
    EXPECT_EQ(s.psi, (std::vector<std::int64_t>{5, 10, 2}));
    EXPECT_EQ(s.q, (std::vector<std::int64_t>{0, 0}));
}

TEST(NormalizeState, FillsIdleServersAndRejectsOverflow)
{
    Fixture f(net_n());
    const LapPolicy policy(f.net, f.po, 10);
    auto s = empty_state(f.net, 10);
    s.q = {4, 25};
    normalize_state(s, policy);
    EXPECT_EQ(s.psi, (std::vector<std::int64_t>{4, 10, 6}));
    EXPECT_EQ(s.q, (std::vector<std::int64_t>{0, 9}));
    auto bad = empty_state(f.net, 10);
    bad.psi = {0, 11, 0};
    EXPECT_THROW(normalize_state(bad, policy), InvalidStateError);
}

TEST(SimConfig, Validation)
{
    SimConfig c;
    c.horizon = 10;
    c.warmup = 20;
    EXPECT_THROW(c.validate(), ValidationError);
    c.warmup = 1;
    c.sample_interval = 0;
    EXPECT_THROW(c.validate(), ValidationError);
}

TEST(SimulateHorizon, SameSeedSameTrace)
{
    Fixture f(net_n());
    SimConfig c;
    c.scale = 20;
    c.horizon = 50;
    c.sample_interval = 0.5;
    c.record_trace = true;
    c.seed = 77;
    const auto a = simulate_horizon(f.net, f.po, f.eq, c);
    const auto b = simulate_horizon(f.net, f.po, f.eq, c);
    ASSERT_EQ(a.trace.size(), b.trace.size());
    for (std::size_t k = 0; k < a.trace.size(); ++k)
    {
        EXPECT_EQ(a.trace[k].psi, b.trace[k].psi);
        EXPECT_EQ(a.trace[k].q, b.trace[k].q);
        EXPECT_EQ(a.trace[k].norm_f, b.trace[k].norm_f);
    }
    EXPECT_EQ(a.num_events, b.num_events);
    EXPECT_EQ(a.summary.norm_f, b.summary.norm_f);
}

TEST(SimulateHorizon, TraceSamplesAfterWarmup)
{
    Fixture f(net_1());
    SimConfig c;
    c.scale = 5;
    c.horizon = 10;
    c.warmup = 2;
    c.sample_interval = 1;
    c.record_trace = true;
    const auto run = simulate_horizon(f.net, f.po, f.eq, c);
    ASSERT_EQ(run.trace.size(), 9u);
    EXPECT_EQ(run.trace.front().t, 2.0);
    EXPECT_EQ(run.trace.back().t, 10.0);
    EXPECT_NEAR(run.summary.duration, 8.0, 1e-12);
}

TEST(SimulateHorizon, Net1MatchesErlangC)
{
    Fixture f(net_1());
    SimConfig c;
    c.scale = 20;
    c.horizon = 1000;
    c.warmup = 100;
    c.seed = 3;
    const auto est = estimate_stationary(f.net, f.po, f.eq, c, 10);
    const double exact = erlang_c_mean_in_system(20, 10.0);
    const double std_error = est.total.half_width / stats::t_quantile(0.975, 9);
    EXPECT_LT(std::abs(est.total.mean - exact), 3 * std_error) << est.total.mean << " vs " << exact;
}

TEST(SimulateHorizon, NetNDrainsFromEmpty)
{
    Fixture f(net_n());
    int close = 0;
    for (int seed = 0; seed < 20; ++seed)
    {
        SimConfig c;
        c.scale = 100;
        c.horizon = 50;
        c.sample_interval = 50;
        c.record_trace = true;
        c.initial_state = InitialKind::empty;
        c.seed = stream_seed(5, seed);
        const auto run = simulate_horizon(f.net, f.po, f.eq, c);
        const auto& last = run.trace.back();
        ASSERT_EQ(last.t, 50.0);
        // Occupancies keep O(sqrt(r)) stationary noise: psi_(1,2) alone is
        // roughly Poisson(50), a fluid-scaled sd of 0.07. Queues must be gone.
        double sup = 0.0;
        for (std::size_t e = 0; e < f.net.num_activities(); ++e)
            sup = std::max(sup, std::abs(static_cast<double>(last.psi[e]) / 100 - f.eq.occupancy[e]));
        double queued = 0.0;
        for (auto q : last.q)
            queued = std::max(queued, static_cast<double>(q) / 100);
        close += sup < 3.0 / std::sqrt(100.0) && queued < 0.05;
    }
    EXPECT_GE(close, 18);
}

TEST(EstimateStationary, NeedsTwoBatches)
{
    Fixture f(net_1());
    SimConfig c;
    EXPECT_THROW(estimate_stationary(f.net, f.po, f.eq, c, 1), InsufficientDataError);
}

TEST(EstimateStationary, MatchesOracleOnNet1)
{
    Fixture f(net_1());
    const auto oracle = solve_ctmc_oracle(f.net, f.po, 5, 200);
    SimConfig c;
    c.scale = 5;
    c.horizon = 20000;
    c.warmup = 200;
    c.seed = 12;
    const auto est = estimate_stationary(f.net, f.po, f.eq, c, 20);
    EXPECT_LT(std::abs(est.total.mean - oracle.mean_total), 3 * est.total.half_width);
}

TEST(EstimateStationary, MatchesOracleOnSmallNetN)
{
    Fixture f(net_n());
    const auto oracle = solve_ctmc_oracle(f.net, f.po, 4, 60);
    SimConfig c;
    c.scale = 4;
    c.horizon = 20000;
    c.warmup = 200;
    c.seed = 13;
    const auto est = estimate_stationary(f.net, f.po, f.eq, c, 20);
    EXPECT_LT(std::abs(est.total.mean - oracle.mean_total), 3 * est.total.half_width);
    for (std::size_t e = 0; e < f.net.num_activities(); ++e)
        EXPECT_LT(std::abs(est.psi[e].mean - oracle.mean_psi[e]), 3 * est.psi[e].half_width + 1e-9);
}

TEST(EstimateStationary, HalfWidthsShrinkWithHorizon)
{
    Fixture f(net_w());
    SimConfig c;
    c.scale = 50;
    c.warmup = 50;
    c.horizon = 1050;
    c.seed = 21;
    const auto short_run = estimate_stationary(f.net, f.po, f.eq, c, 10);
    c.horizon = 4050;
    const auto long_run = estimate_stationary(f.net, f.po, f.eq, c, 10);
    const double ratio = long_run.norm_f.half_width / short_run.norm_f.half_width;
    EXPECT_GT(ratio, 0.2);
    EXPECT_LT(ratio, 0.9);
}

TEST(EstimateStationary, NetNDeviationBelowScale)
{
    Fixture f(net_n());
    SimConfig c;
    c.scale = 100;
    c.horizon = 500;
    c.warmup = 50;
    const auto est = estimate_stationary(f.net, f.po, f.eq, c, 10);
    EXPECT_TRUE(std::isfinite(est.norm_f.mean));
    EXPECT_LT(est.norm_f.mean, 100.0);
}

TEST(CtmcOracle, Net1MatchesErlangC)
{
    Fixture f(net_1());
    const auto res = solve_ctmc_oracle(f.net, f.po, 5, 200);
    EXPECT_NEAR(res.mean_total, erlang_c_mean_in_system(5, 2.5), 1e-8);
    double mass = 0.0;
    for (double p : res.probabilities)
        mass += p;
    EXPECT_NEAR(mass, 1.0, 1e-12);
}

TEST(CtmcOracle, SingleServerBusyProbability)
{
    Fixture f(net_1());
    const auto res = solve_ctmc_oracle(f.net, f.po, 1, 100);
    EXPECT_NEAR(res.mean_psi[0], 0.5, 1e-10);
}

TEST(CtmcOracle, RejectsHugeStateSpace)
{
    Fixture f(net_n());
    EXPECT_THROW(solve_ctmc_oracle(f.net, f.po, 50, 1000, 1000), StateSpaceTooLargeError);
}
