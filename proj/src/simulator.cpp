#include "laplab/simulator.hpp"

#include <algorithm>
#include <cmath>

#include "laplab/errors.hpp"
#include "laplab/stats.hpp"

namespace laplab
{
    std::int64_t SystemState::in_system(int cls, const Network& net) const
    {
        std::int64_t x = q[cls];
        for (auto e : net.activities_of_class(cls))
            x += psi[e];
        return x;
    }

    LapPolicy::LapPolicy(const Network& net, const PriorityOrder& po, int scale)
        : net_(net), po_(po), scale_(scale)
    {
        require_valid(net_);
        require_consistent(net_, po_);
        if (scale <= 0)
            throw ValidationError({"scale r must be a positive integer"});
        capacity_.resize(net_.num_pools);
        // floor(beta_j r); the epsilon absorbs representation error such as 0.7 * 10.
        for (int j = 0; j < net_.num_pools; ++j)
            capacity_[j] = static_cast<std::int64_t>(std::floor(net_.beta[j] * scale + 1e-9));
        routing_.resize(net_.num_classes);
        scheduling_.resize(net_.num_pools);
        for (auto e : po_.activities_by_rank())
            routing_[net_.activities[e].cls].push_back(e);
        for (int j = 0; j < net_.num_pools; ++j)
        {
            auto& list = scheduling_[j];
            list = net_.activities_of_pool(j);
            std::sort(list.begin(), list.end(), [&](std::size_t a, std::size_t b) {
                return po_.class_rank[net_.activities[a].cls] < po_.class_rank[net_.activities[b].cls];
            });
        }
    }

    SystemState empty_state(const Network& net, int scale)
    {
        SystemState s;
        s.scale = scale;
        const auto E = net.num_activities();
        s.psi.assign(E, 0);
        s.q.assign(net.num_classes, 0);
        s.busy.assign(net.num_pools, 0);
        s.arrivals.assign(net.num_classes, 0);
        s.departures.assign(E, 0);
        s.starts.assign(E, 0);
        s.psi0 = s.psi;
        s.q0 = s.q;
        return s;
    }

    SystemState equilibrium_rounded_state(const Network& net, const PriorityOrder& po,
                                          const EquilibriumPoint& eq, int scale)
    {
        LapPolicy policy(net, po, scale);
        SystemState s = empty_state(net, scale);
        for (std::size_t e = 0; e < net.num_activities(); ++e)
        {
            s.psi[e] = std::llround(eq.occupancy[e] * scale);
            s.busy[net.activities[e].pool] += s.psi[e];
        }
        auto by_rank = po.activities_by_rank();
        for (auto it = by_rank.rbegin(); it != by_rank.rend(); ++it)
        {
            const int j = net.activities[*it].pool;
            const auto excess = std::min(s.psi[*it], std::max<std::int64_t>(0, s.busy[j] - policy.capacity(j)));
            s.psi[*it] -= excess;
            s.busy[j] -= excess;
        }
        s.psi0 = s.psi;
        return s;
    }

    void normalize_state(SystemState& s, const LapPolicy& policy)
    {
        const auto& net = policy.network();
        if (s.psi.size() != net.num_activities() || s.q.size() != static_cast<std::size_t>(net.num_classes))
            throw InvalidStateError("state dimensions do not match the network");
        s.scale = policy.scale();
        s.busy.assign(net.num_pools, 0);
        for (std::size_t e = 0; e < s.psi.size(); ++e)
        {
            if (s.psi[e] < 0)
                throw InvalidStateError("negative occupancy in initial state");
            s.busy[net.activities[e].pool] += s.psi[e];
        }
        for (auto v : s.q)
            if (v < 0)
                throw InvalidStateError("negative queue in initial state");
        for (int j = 0; j < net.num_pools; ++j)
            if (s.busy[j] > policy.capacity(j))
                throw InvalidStateError("pool " + std::to_string(j + 1) + " holds more customers than servers");
        for (auto e : policy.order().activities_by_rank())
        {
            const auto& a = net.activities[e];
            const auto move = std::min(s.q[a.cls], policy.capacity(a.pool) - s.busy[a.pool]);
            s.psi[e] += move;
            s.q[a.cls] -= move;
            s.busy[a.pool] += move;
        }
        s.arrivals.assign(net.num_classes, 0);
        s.departures.assign(net.num_activities(), 0);
        s.starts.assign(net.num_activities(), 0);
        s.psi0 = s.psi;
        s.q0 = s.q;
    }

    std::vector<std::string> state_violations(const SystemState& s, const LapPolicy& policy)
    {
        const auto& net = policy.network();
        std::vector<std::string> v;
        std::vector<std::int64_t> busy(net.num_pools, 0);
        for (std::size_t e = 0; e < s.psi.size(); ++e)
        {
            if (s.psi[e] < 0)
                v.push_back("negative occupancy");
            busy[net.activities[e].pool] += s.psi[e];
        }
        for (int j = 0; j < net.num_pools; ++j)
        {
            if (busy[j] != s.busy[j])
                v.push_back("busy-server cache out of sync at pool " + std::to_string(j + 1));
            if (busy[j] > policy.capacity(j))
                v.push_back("pool " + std::to_string(j + 1) + " over capacity");
        }
        for (int i = 0; i < net.num_classes; ++i)
        {
            if (s.q[i] < 0)
                v.push_back("negative queue");
            if (s.q[i] > 0)
                for (auto e : net.activities_of_class(i))
                {
                    const int j = net.activities[e].pool;
                    if (busy[j] < policy.capacity(j))
                        v.push_back("class " + std::to_string(i + 1) + " queues while pool " + std::to_string(j + 1) +
                                    " has an idle server");
                }
            std::int64_t started = 0;
            for (auto e : net.activities_of_class(i))
                started += s.starts[e];
            if (s.q[i] != s.q0[i] + s.arrivals[i] - started)
                v.push_back("queue flow identity broken for class " + std::to_string(i + 1));
        }
        for (std::size_t e = 0; e < s.psi.size(); ++e)
            if (s.psi[e] != s.psi0[e] + s.starts[e] - s.departures[e])
                v.push_back("occupancy flow identity broken");
        return v;
    }

    int route_arrival(SystemState& s, int cls, const LapPolicy& policy)
    {
        ++s.arrivals[cls];
        for (auto e : policy.routing_list(cls))
        {
            const int j = policy.network().activities[e].pool;
            if (s.busy[j] < policy.capacity(j))
            {
                ++s.psi[e];
                ++s.starts[e];
                ++s.busy[j];
                return j;
            }
        }
        ++s.q[cls];
        return -1;
    }

    int schedule_server(SystemState& s, int pool, const LapPolicy& policy)
    {
        if (s.busy[pool] >= policy.capacity(pool))
            return -1;
        for (auto e : policy.scheduling_list(pool))
        {
            const int i = policy.network().activities[e].cls;
            if (s.q[i] > 0)
            {
                --s.q[i];
                ++s.psi[e];
                ++s.starts[e];
                ++s.busy[pool];
                return i;
            }
        }
        return -1;
    }

    double total_event_rate(const SystemState& s, const LapPolicy& policy)
    {
        const auto& net = policy.network();
        double rate = 0.0;
        for (int i = 0; i < net.num_classes; ++i)
            rate += net.lambda[i] * s.scale;
        for (std::size_t e = 0; e < s.psi.size(); ++e)
            rate += net.activities[e].mu * static_cast<double>(s.psi[e]);
        return rate;
    }

    namespace
    {
        // Chooses and applies the event after the clock has advanced.
        EventRecord apply_event(SystemState& s, const LapPolicy& policy, double total_rate, double u)
        {
            const auto& net = policy.network();
            double target = u * total_rate;
            EventRecord rec;
            rec.t = s.t;
            int last_arrival = net.num_classes - 1;
            for (int i = 0; i < net.num_classes; ++i)
            {
                const double rate = net.lambda[i] * s.scale;
                if (target < rate)
                {
                    rec.kind = EventRecord::Kind::arrival;
                    rec.cls = i;
                    rec.pool = route_arrival(s, i, policy);
                    return rec;
                }
                target -= rate;
            }
            std::optional<std::size_t> chosen;
            for (std::size_t e = 0; e < s.psi.size(); ++e)
            {
                if (s.psi[e] == 0)
                    continue;
                const double rate = net.activities[e].mu * static_cast<double>(s.psi[e]);
                chosen = e;
                if (target < rate)
                    break;
                target -= rate;
            }
            if (!chosen)
            {
                // Rounding pushed the draw past the last arrival bucket.
                rec.kind = EventRecord::Kind::arrival;
                rec.cls = last_arrival;
                rec.pool = route_arrival(s, last_arrival, policy);
                return rec;
            }
            const auto& a = net.activities[*chosen];
            --s.psi[*chosen];
            ++s.departures[*chosen];
            --s.busy[a.pool];
            rec.kind = EventRecord::Kind::departure;
            rec.cls = a.cls;
            rec.pool = a.pool;
            schedule_server(s, a.pool, policy);
            return rec;
        }
    }

    EventRecord step_event(SystemState& s, const LapPolicy& policy, Rng& rng)
    {
        const double rate = total_event_rate(s, policy);
        if (!(rate > 0.0))
            throw ZeroRateError("total event rate is zero");
        s.t += rng.exponential(rate);
        return apply_event(s, policy, rate, rng.uniform());
    }

    void SimConfig::validate() const
    {
        std::vector<std::string> v;
        if (scale <= 0)
            v.push_back("scale r must be positive");
        if (!(horizon > warmup))
            v.push_back("horizon must exceed warmup");
        if (!(warmup >= 0.0))
            v.push_back("warmup must be nonnegative");
        if (!(sample_interval > 0.0))
            v.push_back("sample interval must be positive");
        if (num_batches < 1)
            v.push_back("number of batches must be positive");
        if (!v.empty())
            throw ValidationError(std::move(v));
    }

    double deviation_norm(const SystemState& s, const EquilibriumPoint& eq)
    {
        double ss = 0.0;
        for (std::size_t e = 0; e < s.psi.size(); ++e)
        {
            const double d = static_cast<double>(s.psi[e]) - eq.occupancy[e] * s.scale;
            ss += d * d;
        }
        for (auto v : s.q)
            ss += static_cast<double>(v) * static_cast<double>(v);
        return std::sqrt(ss);
    }

    double deviation_norm_l1(const SystemState& s, const EquilibriumPoint& eq)
    {
        double sum = 0.0;
        for (std::size_t e = 0; e < s.psi.size(); ++e)
            sum += std::abs(static_cast<double>(s.psi[e]) - eq.occupancy[e] * s.scale);
        for (auto v : s.q)
            sum += static_cast<double>(v);
        return sum;
    }

    SystemState initial_state_for(const SimConfig& cfg, const LapPolicy& policy, const EquilibriumPoint& eq)
    {
        const auto& net = policy.network();
        if (const auto* kind = std::get_if<InitialKind>(&cfg.initial_state))
        {
            if (*kind == InitialKind::empty)
                return empty_state(net, cfg.scale);
            return equilibrium_rounded_state(net, policy.order(), eq, cfg.scale);
        }
        SystemState s = std::get<SystemState>(cfg.initial_state);
        normalize_state(s, policy);
        s.t = 0.0;
        return s;
    }

    namespace
    {
        // Piecewise-constant time integrals split over equal post-warmup batches.
        class WindowRecorder
        {
        public:
            WindowRecorder(const Network& net, const EquilibriumPoint& eq, const DualVariables& duals,
                           const SimConfig& cfg)
                : net_(net), eq_(eq), duals_(duals), cfg_(cfg),
                  batch_len_((cfg.horizon - cfg.warmup) / cfg.num_batches), sums_(cfg.num_batches)
            {
                for (auto& w : sums_)
                {
                    w.psi.assign(net.num_activities(), 0.0);
                    w.q.assign(net.num_classes, 0.0);
                }
            }

            void refresh(const SystemState& s)
            {
                current_.norm_f = deviation_norm(s, eq_);
                current_.norm_f_l1 = deviation_norm_l1(s, eq_);
                double total = 0.0, work = 0.0;
                for (int i = 0; i < net_.num_classes; ++i)
                {
                    const auto x = static_cast<double>(s.in_system(i, net_));
                    total += x;
                    work += duals_.nu[i] * x;
                }
                current_.total = total;
                current_.workload = work / s.scale;
                current_.tail_fraction = current_.norm_f > cfg_.tail_threshold ? 1.0 : 0.0;
                state_ = &s;
            }

            void accumulate(double a, double b)
            {
                a = std::max(a, cfg_.warmup);
                b = std::min(b, cfg_.horizon);
                while (a < b)
                {
                    int k = static_cast<int>((a - cfg_.warmup) / batch_len_);
                    k = std::clamp(k, 0, cfg_.num_batches - 1);
                    double end = k == cfg_.num_batches - 1 ? cfg_.horizon : cfg_.warmup + (k + 1) * batch_len_;
                    if (end <= a)
                    {
                        // a sits on a boundary that rounding attributed to the earlier batch
                        if (k + 1 < cfg_.num_batches)
                        {
                            ++k;
                            end = k == cfg_.num_batches - 1 ? cfg_.horizon : cfg_.warmup + (k + 1) * batch_len_;
                        }
                        else
                            break;
                    }
                    const double seg = std::min(b, end);
                    add(sums_[k], seg - a);
                    a = seg;
                }
            }

            std::vector<WindowAverages> batches() const
            {
                std::vector<WindowAverages> out = sums_;
                for (auto& w : out)
                    scale(w, w.duration > 0.0 ? 1.0 / w.duration : 0.0);
                return out;
            }

            WindowAverages overall() const
            {
                WindowAverages tot;
                tot.psi.assign(net_.num_activities(), 0.0);
                tot.q.assign(net_.num_classes, 0.0);
                for (const auto& w : sums_)
                {
                    tot.duration += w.duration;
                    for (std::size_t e = 0; e < w.psi.size(); ++e)
                        tot.psi[e] += w.psi[e];
                    for (std::size_t i = 0; i < w.q.size(); ++i)
                        tot.q[i] += w.q[i];
                    tot.norm_f += w.norm_f;
                    tot.norm_f_l1 += w.norm_f_l1;
                    tot.total += w.total;
                    tot.workload += w.workload;
                    tot.tail_fraction += w.tail_fraction;
                }
                const double d = tot.duration;
                scale(tot, d > 0.0 ? 1.0 / d : 0.0);
                tot.duration = d;
                return tot;
            }

        private:
            void add(WindowAverages& w, double dt) const
            {
                w.duration += dt;
                for (std::size_t e = 0; e < w.psi.size(); ++e)
                    w.psi[e] += dt * static_cast<double>(state_->psi[e]);
                for (std::size_t i = 0; i < w.q.size(); ++i)
                    w.q[i] += dt * static_cast<double>(state_->q[i]);
                w.norm_f += dt * current_.norm_f;
                w.norm_f_l1 += dt * current_.norm_f_l1;
                w.total += dt * current_.total;
                w.workload += dt * current_.workload;
                w.tail_fraction += dt * current_.tail_fraction;
            }

            static void scale(WindowAverages& w, double f)
            {
                for (auto& v : w.psi)
                    v *= f;
                for (auto& v : w.q)
                    v *= f;
                w.norm_f *= f;
                w.norm_f_l1 *= f;
                w.total *= f;
                w.workload *= f;
                w.tail_fraction *= f;
            }

            const Network& net_;
            const EquilibriumPoint& eq_;
            const DualVariables& duals_;
            const SimConfig& cfg_;
            double batch_len_;
            std::vector<WindowAverages> sums_;
            WindowAverages current_;
            const SystemState* state_ = nullptr;
        };
    }

    SimResult simulate_horizon(const Network& net, const PriorityOrder& po, const EquilibriumPoint& eq,
                               const SimConfig& cfg)
    {
        cfg.validate();
        const LapPolicy policy(net, po, cfg.scale);
        const auto duals = compute_duals(net);
        SimResult out;
        SystemState s = initial_state_for(cfg, policy, eq);
        Rng rng(cfg.seed);
        WindowRecorder rec(net, eq, duals, cfg);
        rec.refresh(s);

        std::int64_t sample_index = 0;
        auto sample_time = [&](std::int64_t k) { return cfg.warmup + static_cast<double>(k) * cfg.sample_interval; };
        auto emit_samples_before = [&](double limit, bool inclusive) {
            if (!cfg.record_trace)
                return;
            for (;;)
            {
                const double ts = sample_time(sample_index);
                if (ts > cfg.horizon || ts > limit || (!inclusive && ts == limit))
                    break;
                out.trace.push_back({ts, s.psi, s.q, deviation_norm(s, eq)});
                ++sample_index;
            }
        };

        for (;;)
        {
            const double rate = total_event_rate(s, policy);
            if (!(rate > 0.0))
                throw ZeroRateError("total event rate is zero");
            const double t_next = s.t + rng.exponential(rate);
            const double seg_end = std::min(t_next, cfg.horizon);
            emit_samples_before(seg_end, false);
            rec.accumulate(s.t, seg_end);
            if (t_next >= cfg.horizon)
            {
                s.t = cfg.horizon;
                emit_samples_before(cfg.horizon, true);
                break;
            }
            s.t = t_next;
            auto ev = apply_event(s, policy, rate, rng.uniform());
            ++out.num_events;
            if (cfg.record_events)
                out.events.push_back(ev);
            rec.refresh(s);
        }
        out.summary = rec.overall();
        out.batches = rec.batches();
        out.final_state = std::move(s);
        return out;
    }

    StationaryEstimate estimate_stationary(const Network& net, const PriorityOrder& po, const EquilibriumPoint& eq,
                                           SimConfig cfg, int num_batches)
    {
        if (num_batches < 2)
            throw InsufficientDataError("batch means needs at least two batches");
        cfg.num_batches = num_batches;
        const auto run = simulate_horizon(net, po, eq, cfg);
        auto estimate = [&](auto field) {
            std::vector<double> xs;
            xs.reserve(run.batches.size());
            for (const auto& b : run.batches)
                xs.push_back(field(b));
            return Estimate{stats::mean(xs), stats::ci_half_width(xs)};
        };
        StationaryEstimate est;
        est.num_batches = num_batches;
        est.batch_length = (cfg.horizon - cfg.warmup) / num_batches;
        est.norm_f = estimate([](const WindowAverages& w) { return w.norm_f; });
        est.norm_f_l1 = estimate([](const WindowAverages& w) { return w.norm_f_l1; });
        est.total = estimate([](const WindowAverages& w) { return w.total; });
        est.workload = estimate([](const WindowAverages& w) { return w.workload; });
        est.tail_fraction = estimate([](const WindowAverages& w) { return w.tail_fraction; });
        for (std::size_t e = 0; e < net.num_activities(); ++e)
            est.psi.push_back(estimate([e](const WindowAverages& w) { return w.psi[e]; }));
        for (int i = 0; i < net.num_classes; ++i)
            est.q.push_back(estimate([i](const WindowAverages& w) { return w.q[i]; }));
        return est;
    }
}
