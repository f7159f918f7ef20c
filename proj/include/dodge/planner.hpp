#pragma once

#include "dodge/common.hpp"
#include "dodge/costs.hpp"
#include "dodge/lbfgs.hpp"
#include "dodge/minco.hpp"
#include "dodge/uncertainty.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace dodge
{

struct CostReport
{
    double smoothness = 0.0;
    double obstacle = 0.0;
    double time = 0.0;
    double feasibility = 0.0;
    double dodge = 0.0;
    double relativeVelocity = 0.0;
    double total = 0.0;
    double gradNormQ = 0.0;
    double gradNormT = 0.0;
    int iterations = 0;
    bool failed = false;
    // Accepted iterate costs of the chosen optimizer run.
    std::vector<double> history;

    double weightedSum(const CostWeights &w) const
    {
        return w.smoothness * smoothness + w.obstacle * obstacle + w.time * time + w.feasibility * feasibility +
               w.dodge * dodge + w.relativeVelocity * relativeVelocity;
    }
};

enum class Strategy
{
    Full,
    NoTemporal,
    NoSpatial,
};

inline const char *strategyName(Strategy s)
{
    switch (s)
    {
    case Strategy::Full:
        return "full";
    case Strategy::NoTemporal:
        return "no_temporal";
    case Strategy::NoSpatial:
        return "no_spatial";
    }
    return "full";
}

inline std::optional<Strategy> parseStrategy(const std::string &s)
{
    if (s == "full")
        return Strategy::Full;
    if (s == "no_temporal")
        return Strategy::NoTemporal;
    if (s == "no_spatial")
        return Strategy::NoSpatial;
    return std::nullopt;
}

// Everything the objective needs besides (q, T).
struct PlanningProblem
{
    BoundaryState start;
    Vec3 goal = Vec3::Zero();
    SurvivingSet threats;
    std::vector<StaticObstacle> obstacles;
    double planTime = 0.0;
    ThreatOptions threatOptions;
};

// Weighted sum of all six terms with partials w.r.t. (c, T).
inline CostTerm totalCost(const MincoTrajectory &traj, const PlanningProblem &prob, const PlannerConfig &cfg,
                          CostReport *report = nullptr)
{
    const auto &w = cfg.weights;
    CostTerm total = CostTerm::zero(traj);
    const CostTerm js = costSmoothness(traj);
    const CostTerm jo = costStatic(traj, prob.obstacles, cfg);
    const CostTerm jt = costTime(traj);
    const CostTerm jf = costFeasibility(traj, cfg);
    const CostTerm jd = costDodge(traj, prob.threats, prob.planTime, cfg, prob.threatOptions);
    const CostTerm jv = costRelativeVelocity(traj, prob.threats, prob.planTime, cfg);
    total.accumulate(js, w.smoothness);
    total.accumulate(jo, w.obstacle);
    total.accumulate(jt, w.time);
    total.accumulate(jf, w.feasibility);
    total.accumulate(jd, w.dodge);
    total.accumulate(jv, w.relativeVelocity);
    if (report)
    {
        report->smoothness = js.value;
        report->obstacle = jo.value;
        report->time = jt.value;
        report->feasibility = jf.value;
        report->dodge = jd.value;
        report->relativeVelocity = jv.value;
        report->total = total.value;
    }
    return total;
}

// Smooth bijection from R onto (0, inf), C2 at the origin.
namespace duration_map
{

inline double forward(double tau)
{
    return tau > 0.0 ? (0.5 * tau + 1.0) * tau + 1.0 : 1.0 / ((0.5 * tau - 1.0) * tau + 1.0);
}

inline double derivative(double tau)
{
    if (tau > 0.0)
    {
        return tau + 1.0;
    }
    const double den = (0.5 * tau - 1.0) * tau + 1.0;
    return (1.0 - tau) / (den * den);
}

inline double inverse(double T)
{
    return T > 1.0 ? std::sqrt(2.0 * T - 1.0) - 1.0 : 1.0 - std::sqrt(2.0 / T - 1.0);
}

} // namespace duration_map

struct PlanResult
{
    MincoTrajectory trajectory;
    CostReport report;
};

namespace detail
{

struct Packing
{
    int segments = 0;
    double floor = 0.0;

    Eigen::VectorXd pack(const WaypointMatrix &q, const Eigen::VectorXd &T) const
    {
        Eigen::VectorXd x(3 * (segments - 1) + segments);
        for (int i = 0; i < segments - 1; ++i)
        {
            x.segment<3>(3 * i) = q.col(i);
        }
        for (int i = 0; i < segments; ++i)
        {
            x(3 * (segments - 1) + i) = duration_map::inverse(std::max(T(i) - floor, 1e-3));
        }
        return x;
    }

    void unpack(const Eigen::VectorXd &x, WaypointMatrix &q, Eigen::VectorXd &T) const
    {
        q.resize(3, segments - 1);
        T.resize(segments);
        for (int i = 0; i < segments - 1; ++i)
        {
            q.col(i) = x.segment<3>(3 * i);
        }
        for (int i = 0; i < segments; ++i)
        {
            T(i) = floor + duration_map::forward(x(3 * (segments - 1) + i));
        }
    }
};

inline double objectiveAt(const Eigen::VectorXd &x, Eigen::VectorXd &grad, const Packing &pack,
                          const PlanningProblem &prob, const PlannerConfig &cfg)
{
    WaypointMatrix q;
    Eigen::VectorXd T;
    pack.unpack(x, q, T);
    if (!q.allFinite() || !T.allFinite() || (T.array() <= 0.0).any())
    {
        grad.setZero(x.size());
        return std::numeric_limits<double>::infinity();
    }
    const MincoTrajectory traj = MincoTrajectory::construct(q, T, prob.start, BoundaryState::rest(prob.goal));
    const CostTerm cost = totalCost(traj, prob, cfg);
    WaypointMatrix gq;
    Eigen::VectorXd gT;
    traj.propagateGradients(cost.gradC, cost.gradT, gq, gT);
    grad.resize(x.size());
    for (int i = 0; i < pack.segments - 1; ++i)
    {
        grad.segment<3>(3 * i) = gq.col(i);
    }
    for (int i = 0; i < pack.segments; ++i)
    {
        const int k = 3 * (pack.segments - 1) + i;
        grad(k) = gT(i) * duration_map::derivative(x(k));
    }
    return cost.value;
}

inline PlanResult runFrom(const WaypointMatrix &q0, const Eigen::VectorXd &T0, const Packing &pack,
                          const PlanningProblem &prob, const PlannerConfig &cfg)
{
    Eigen::VectorXd x = pack.pack(q0, T0);
    LbfgsParams params;
    params.maxIterations = cfg.maxIterations;
    params.gradTolerance = cfg.gradientTolerance;
    const LbfgsResult res = minimizeLbfgs(
        [&](const Eigen::VectorXd &xv, Eigen::VectorXd &g) { return objectiveAt(xv, g, pack, prob, cfg); }, x,
        params);

    PlanResult out;
    WaypointMatrix q;
    Eigen::VectorXd T;
    pack.unpack(x, q, T);
    out.trajectory = MincoTrajectory::construct(q, T, prob.start, BoundaryState::rest(prob.goal));
    const CostTerm final = totalCost(out.trajectory, prob, cfg, &out.report);
    WaypointMatrix gq;
    Eigen::VectorXd gT;
    out.trajectory.propagateGradients(final.gradC, final.gradT, gq, gT);
    out.report.gradNormQ = gq.norm();
    out.report.gradNormT = gT.norm();
    out.report.iterations = res.iterations;
    out.report.history = res.history;
    out.report.failed = res.failed() || !std::isfinite(out.report.total);
    return out;
}

inline bool threatTermsActive(const PlanningProblem &prob, const PlannerConfig &cfg)
{
    return !prob.threats.empty() && (cfg.weights.dodge > 0.0 || cfg.weights.relativeVelocity > 0.0);
}

} // namespace detail

struct OptimizeOptions
{
    std::optional<MincoTrajectory> warmStart;
    // Lower bound on every segment duration.
    double segmentFloor = 0.0;
    // Total initial duration; defaults to PlannerConfig::initialDuration.
    std::optional<double> initialTotal;
};

// Minimizes the weighted objective over waypoints and (mapped) durations.
// With active threats, also starts from laterally offset guesses and keeps
// the best result.
inline PlanResult optimize(const PlanningProblem &prob, const PlannerConfig &cfg, const OptimizeOptions &opts = {})
{
    cfg.validate();
    require(allFinite(prob.goal) && prob.start.finite(), "optimize: non-finite start or goal");
    const int M = cfg.segments;
    detail::Packing pack{M, opts.segmentFloor > 0.0 ? opts.segmentFloor : cfg.minSegmentDuration};

    std::vector<std::pair<WaypointMatrix, Eigen::VectorXd>> starts;
    const double total = opts.initialTotal.value_or(cfg.initialDuration);
    Eigen::VectorXd T0 = Eigen::VectorXd::Constant(M, std::max(total / M, pack.floor + 1e-3));
    WaypointMatrix line(3, M - 1);
    for (int i = 0; i < M - 1; ++i)
    {
        const double s = static_cast<double>(i + 1) / static_cast<double>(M);
        line.col(i) = (1.0 - s) * prob.start.position + s * prob.goal;
    }

    if (opts.warmStart && opts.warmStart->segments() == M)
    {
        Eigen::VectorXd Tw = opts.warmStart->durations();
        for (int i = 0; i < M; ++i)
        {
            Tw(i) = std::max(Tw(i), pack.floor + 1e-3);
        }
        starts.emplace_back(opts.warmStart->waypoints(), Tw);
    }
    else
    {
        starts.emplace_back(line, T0);
    }

    if (detail::threatTermsActive(prob, cfg) && M > 1)
    {
        // Lateral direction: horizontal normal of the mean threat heading.
        Vec3 heading = Vec3::Zero();
        for (const auto &st : prob.threats.members())
        {
            Vec3 h(st.ballistic.v0.x(), st.ballistic.v0.y(), 0.0);
            if (h.norm() > 1e-9)
            {
                heading += h.normalized();
            }
        }
        if (heading.norm() < 1e-9)
        {
            heading = Vec3::UnitX();
        }
        const Vec3 lateral = Vec3(-heading.y(), heading.x(), 0.0).normalized();
        double reach = cfg.safetyRadius;
        for (const auto &st : prob.threats.members())
        {
            reach = std::max(reach, cfg.safetyRadius + st.params.radius(st.survival));
        }
        for (double sign : {1.0, -1.0})
        {
            WaypointMatrix q = line;
            for (int i = 0; i < M - 1; ++i)
            {
                q.col(i) += sign * reach * lateral;
            }
            starts.emplace_back(q, T0);
        }
    }

    std::optional<PlanResult> best;
    for (const auto &[q0, Ts] : starts)
    {
        PlanResult r = detail::runFrom(q0, Ts, pack, prob, cfg);
        if (r.report.failed)
        {
            if (!best)
            {
                best = std::move(r);
            }
            continue;
        }
        if (!best || best->report.failed || r.report.total < best->report.total)
        {
            best = std::move(r);
        }
    }
    return std::move(*best);
}

// Periodic replanning against the latest surviving set. Single owner.
class Replanner
{
public:
    Replanner(PlannerConfig cfg, Vec3 goal, Strategy strategy = Strategy::Full,
              std::vector<StaticObstacle> obstacles = {})
        : cfg_(cfg), goal_(goal), strategy_(strategy), obstacles_(std::move(obstacles))
    {
        cfg_.validate();
    }

    struct Cycle
    {
        bool replanned = false;
        bool risky = false;
        bool dodgeMode = false;
        bool usedPrevious = false;
        std::size_t threatCount = 0;
        CostReport report;
        // J_d of the published plan against this cycle's (ablated) set.
        double publishedDodge = 0.0;
    };

    // The set handed in may contain dead members; it is pruned here.
    Cycle step(double tNow, const BoundaryState &uavState, const SurvivingSet &surviving)
    {
        Cycle cycle;
        SurvivingSet threats = surviving.pruned(tNow);
        if (strategy_ == Strategy::NoTemporal)
        {
            threats = threats.newestOnly();
        }
        RiskQuery rq;
        rq.safetyRadius = cfg_.safetyRadius;
        rq.samplesPerSegment = cfg_.samplesPerSegment;
        rq.ignoreSpatial = strategy_ == Strategy::NoSpatial;
        const bool risky = riskCheck(threats, uavState.position, plan_ ? &*plan_ : nullptr, planStart_, tNow, rq);
        cycle.risky = risky;
        if (risky || (dodgeMode_ && !threats.empty()))
        {
            dodgeMode_ = true;
        }
        else
        {
            dodgeMode_ = false;
        }
        cycle.dodgeMode = dodgeMode_;
        cycle.threatCount = threats.size();

        BoundaryState start = uavState;
        if (plan_)
        {
            const double local = tNow - planStart_;
            start.position = plan_->evalClamped(local, 0);
            start.velocity = plan_->evalClamped(local, 1);
            start.acceleration = plan_->evalClamped(local, 2);
        }

        PlanningProblem prob;
        prob.start = start;
        prob.goal = goal_;
        prob.obstacles = obstacles_;
        prob.planTime = tNow;
        prob.threatOptions.ignoreSpatial = strategy_ == Strategy::NoSpatial;
        prob.threatOptions.margin = cfg_.dodgeMargin;

        OptimizeOptions opts;
        if (dodgeMode_)
        {
            prob.threats = threats;
            double horizon = 0.0;
            for (const auto &st : threats.members())
            {
                horizon = std::max(horizon, st.deathTime() - tNow);
            }
            opts.segmentFloor = std::max(cfg_.minSegmentDuration, horizon / cfg_.segments);
        }
        else
        {
            const bool atRest = start.velocity.norm() < 1e-6 && start.acceleration.norm() < 1e-6;
            if (atRest && (start.position - goal_).norm() < 1e-6)
            {
                publishHold(tNow, start.position);
                cycle.replanned = true;
                cycle.publishedDodge = publishedDodge(threats, tNow);
                return cycle;
            }
        }

        if (plan_ && plan_->segments() == cfg_.segments && !justSwitched(dodgeMode_))
        {
            opts.warmStart = shiftedWarmStart(tNow);
        }
        PlanResult res = optimize(prob, cfg_, opts);
        cycle.report = res.report;
        if (res.report.failed)
        {
            cycle.usedPrevious = true;
            return cycle;
        }
        plan_ = std::move(res.trajectory);
        planStart_ = tNow;
        lastMode_ = dodgeMode_;
        cycle.replanned = true;
        cycle.publishedDodge = publishedDodge(threats, tNow);
        return cycle;
    }

    const std::optional<MincoTrajectory> &plan() const { return plan_; }
    double planStart() const { return planStart_; }
    bool dodgeMode() const { return dodgeMode_; }
    const PlannerConfig &config() const { return cfg_; }

private:
    bool justSwitched(bool mode) const { return mode != lastMode_; }

    double publishedDodge(const SurvivingSet &threats, double tNow) const
    {
        ThreatOptions opts;
        opts.ignoreSpatial = strategy_ == Strategy::NoSpatial;
        return costDodge(*plan_, threats, tNow, cfg_, opts).value;
    }

    // Previous plan's remaining part, re-timed to start now.
    std::optional<MincoTrajectory> shiftedWarmStart(double tNow) const
    {
        const int M = cfg_.segments;
        const double remaining = plan_->totalDuration() - (tNow - planStart_);
        if (remaining <= M * cfg_.minSegmentDuration)
        {
            return std::nullopt;
        }
        const double local0 = tNow - planStart_;
        WaypointMatrix q(3, M - 1);
        for (int i = 0; i < M - 1; ++i)
        {
            q.col(i) = plan_->evalClamped(local0 + remaining * (i + 1) / M, 0);
        }
        Eigen::VectorXd T = Eigen::VectorXd::Constant(M, remaining / M);
        BoundaryState s;
        s.position = plan_->evalClamped(local0, 0);
        return MincoTrajectory::construct(q, T, s, BoundaryState::rest(goal_));
    }

    void publishHold(double tNow, const Vec3 &p)
    {
        const int M = cfg_.segments;
        WaypointMatrix q(3, M - 1);
        for (int i = 0; i < M - 1; ++i)
        {
            q.col(i) = p;
        }
        Eigen::VectorXd T = Eigen::VectorXd::Constant(M, cfg_.initialDuration / M);
        plan_ = MincoTrajectory::construct(q, T, BoundaryState::rest(p), BoundaryState::rest(p));
        planStart_ = tNow;
        lastMode_ = false;
    }

    PlannerConfig cfg_;
    Vec3 goal_;
    Strategy strategy_;
    std::vector<StaticObstacle> obstacles_;
    std::optional<MincoTrajectory> plan_;
    double planStart_ = 0.0;
    bool dodgeMode_ = false;
    bool lastMode_ = false;
};

} // namespace dodge
