#pragma once

#include "dodge/common.hpp"
#include "dodge/minco.hpp"
#include "dodge/uncertainty.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <vector>

namespace dodge
{

struct CostWeights
{
    double smoothness = 1e-3;
    double obstacle = 10.0;
    double time = 0.5;
    double feasibility = 10.0;
    double dodge = 2000.0;
    double relativeVelocity = 1e-4;

    // The values published with the original formulation.
    static CostWeights published() { return {10.0, 10.0, 0.5, 10.0, 20.0, 5.8}; }
};

struct PlannerConfig
{
    CostWeights weights;
    int samplesPerSegment = 16;
    double safetyRadius = 0.4;
    double epsilon = 0.1;
    double maxVelocity = 6.0;
    double maxAcceleration = 20.0;
    int segments = 4;
    double initialDuration = 4.0;
    double replanPeriod = 0.05;
    int maxIterations = 200;
    double gradientTolerance = 1e-5;
    // Lower bound on each segment duration outside dodge mode.
    double minSegmentDuration = 0.05;
    // Hinge tightening used by the optimizer so converged plans clear the
    // untightened envelope exactly.
    double dodgeMargin = 0.02;

    void validate() const
    {
        const auto &w = weights;
        require(w.smoothness >= 0 && w.obstacle >= 0 && w.time >= 0 && w.feasibility >= 0 && w.dodge >= 0 &&
                    w.relativeVelocity >= 0,
                "planner.weights: must be >= 0");
        require(samplesPerSegment >= 2, "planner.samples_per_segment: must be >= 2");
        require(safetyRadius > 0.0, "planner.safety_radius: must be > 0");
        require(epsilon > 0.0, "planner.epsilon: must be > 0");
        require(maxVelocity > 0.0 && maxAcceleration > 0.0, "planner.max_velocity, planner.max_acceleration: must be > 0");
        require(segments >= 1, "planner.segments: must be >= 1");
        require(initialDuration > 0.0, "planner.initial_duration: must be > 0");
        require(replanPeriod > 0.0, "planner.replan_period: must be > 0");
        require(maxIterations >= 1, "planner.max_iterations: must be >= 1");
        require(gradientTolerance > 0.0, "planner.gradient_tolerance: must be > 0");
        require(minSegmentDuration > 0.0, "planner.min_segment_duration: must be > 0");
        require(dodgeMargin >= 0.0, "planner.dodge_margin: must be >= 0");
    }
};

struct StaticObstacle
{
    Vec3 center = Vec3::Zero();
    double radius = 0.5;
};

// A cost F(c, T) with its partials.
struct CostTerm
{
    double value = 0.0;
    CoefficientMatrix gradC;
    Eigen::VectorXd gradT;

    static CostTerm zero(const MincoTrajectory &traj)
    {
        CostTerm t;
        t.gradC = CoefficientMatrix::Zero(6 * traj.segments(), 3);
        t.gradT = Eigen::VectorXd::Zero(traj.segments());
        return t;
    }

    void accumulate(const CostTerm &other, double weight)
    {
        value += weight * other.value;
        gradC += weight * other.gradC;
        gradT += weight * other.gradT;
    }
};

namespace detail
{

struct SampleState
{
    Vec3 pos, vel, acc, jerk;
    double pw[6];
};

inline SampleState sampleState(const MincoTrajectory &traj, const PlanSample &s)
{
    SampleState out;
    const auto &c = traj.coefficients();
    const int r = 6 * s.segment;
    const double t = s.localT;
    out.pw[0] = 1.0;
    for (int n = 1; n < 6; ++n)
    {
        out.pw[n] = out.pw[n - 1] * t;
    }
    out.pos.setZero();
    out.vel.setZero();
    out.acc.setZero();
    out.jerk.setZero();
    for (int n = 0; n < 6; ++n)
    {
        const Vec3 cn = c.row(r + n).transpose();
        out.pos += out.pw[n] * cn;
        if (n >= 1)
            out.vel += n * out.pw[n - 1] * cn;
        if (n >= 2)
            out.acc += n * (n - 1) * out.pw[n - 2] * cn;
        if (n >= 3)
            out.jerk += n * (n - 1) * (n - 2) * out.pw[n - 3] * cn;
    }
    return out;
}

// Chain a sample's partials (w.r.t. UAV position/velocity/acceleration and
// the shared sample time tau) into coefficient and duration partials.
inline void scatterSampleGradient(CostTerm &term,
                                  const PlanSample &s,
                                  const SampleState &st,
                                  const Vec3 &gp,
                                  const Vec3 &gv,
                                  const Vec3 &ga,
                                  double gTau,
                                  int samplesPerSegment)
{
    const int r = 6 * s.segment;
    for (int n = 0; n < 6; ++n)
    {
        Vec3 g = st.pw[n] * gp;
        if (n >= 1)
            g += n * st.pw[n - 1] * gv;
        if (n >= 2)
            g += n * (n - 1) * st.pw[n - 2] * ga;
        term.gradC.row(r + n) += g.transpose();
    }
    const double frac = static_cast<double>(s.k) / static_cast<double>(samplesPerSegment);
    // Local time is frac * T_m, so the UAV state moves with T_m.
    term.gradT(s.segment) += frac * (gp.dot(st.vel) + gv.dot(st.acc) + ga.dot(st.jerk));
    // tau depends on every earlier duration and on frac * T_m.
    if (gTau != 0.0)
    {
        for (int j = 0; j < s.segment; ++j)
        {
            term.gradT(j) += gTau;
        }
        term.gradT(s.segment) += frac * gTau;
    }
}

} // namespace detail

// Closed-form integral of squared jerk.
inline CostTerm costSmoothness(const MincoTrajectory &traj)
{
    CostTerm term = CostTerm::zero(traj);
    const auto &c = traj.coefficients();
    for (int i = 0; i < traj.segments(); ++i)
    {
        const double T = traj.durations()(i);
        const double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
        const Vec3 c3 = c.row(6 * i + 3).transpose();
        const Vec3 c4 = c.row(6 * i + 4).transpose();
        const Vec3 c5 = c.row(6 * i + 5).transpose();
        const double c33 = c3.dot(c3), c34 = c3.dot(c4), c44 = c4.dot(c4);
        const double c35 = c3.dot(c5), c45 = c4.dot(c5), c55 = c5.dot(c5);
        term.value += 36.0 * c33 * T + 144.0 * c34 * T2 + 192.0 * c44 * T3 + 240.0 * c35 * T3 + 720.0 * c45 * T4 +
                      720.0 * c55 * T5;
        term.gradC.row(6 * i + 3) += (72.0 * c3 * T + 144.0 * c4 * T2 + 240.0 * c5 * T3).transpose();
        term.gradC.row(6 * i + 4) += (144.0 * c3 * T2 + 384.0 * c4 * T3 + 720.0 * c5 * T4).transpose();
        term.gradC.row(6 * i + 5) += (240.0 * c3 * T3 + 720.0 * c4 * T4 + 1440.0 * c5 * T5).transpose();
        term.gradT(i) += 36.0 * c33 + 288.0 * c34 * T + 576.0 * c44 * T2 + 720.0 * c35 * T2 + 2880.0 * c45 * T3 +
                         3600.0 * c55 * T4;
    }
    return term;
}

inline CostTerm costTime(const MincoTrajectory &traj)
{
    CostTerm term = CostTerm::zero(traj);
    term.value = traj.durations().sum();
    term.gradT.setOnes();
    return term;
}

// Sampled cubic hinges on squared speed and squared acceleration.
inline CostTerm costFeasibility(const MincoTrajectory &traj, const PlannerConfig &cfg)
{
    CostTerm term = CostTerm::zero(traj);
    const double vmax2 = cfg.maxVelocity * cfg.maxVelocity;
    const double amax2 = cfg.maxAcceleration * cfg.maxAcceleration;
    for (const PlanSample &s : planSamples(traj, cfg.samplesPerSegment))
    {
        const detail::SampleState st = detail::sampleState(traj, s);
        Vec3 gv = Vec3::Zero();
        Vec3 ga = Vec3::Zero();
        const double ev = st.vel.squaredNorm() - vmax2;
        if (ev > 0.0)
        {
            term.value += ev * ev * ev;
            gv = 6.0 * ev * ev * st.vel;
        }
        const double ea = st.acc.squaredNorm() - amax2;
        if (ea > 0.0)
        {
            term.value += ea * ea * ea;
            ga = 6.0 * ea * ea * st.acc;
        }
        if (ev > 0.0 || ea > 0.0)
        {
            detail::scatterSampleGradient(term, s, st, Vec3::Zero(), gv, ga, 0.0, cfg.samplesPerSegment);
        }
    }
    return term;
}

inline CostTerm costStatic(const MincoTrajectory &traj, const std::vector<StaticObstacle> &obstacles,
                           const PlannerConfig &cfg)
{
    CostTerm term = CostTerm::zero(traj);
    if (obstacles.empty())
    {
        return term;
    }
    for (const PlanSample &s : planSamples(traj, cfg.samplesPerSegment))
    {
        const detail::SampleState st = detail::sampleState(traj, s);
        Vec3 gp = Vec3::Zero();
        bool active = false;
        for (const auto &ob : obstacles)
        {
            const Vec3 d = st.pos - ob.center;
            const double dist = d.norm();
            const double h = ob.radius + cfg.safetyRadius - dist;
            if (h > 0.0 && dist > 1e-12)
            {
                term.value += h * h * h;
                gp -= 3.0 * h * h * d / dist;
                active = true;
            }
        }
        if (active)
        {
            detail::scatterSampleGradient(term, s, st, gp, Vec3::Zero(), Vec3::Zero(), 0.0, cfg.samplesPerSegment);
        }
    }
    return term;
}

struct ThreatOptions
{
    // Treat the predicted arc as exact (radius 0, safety radius kept).
    bool ignoreSpatial = false;
    // Extra clearance demanded while optimizing; reported J_d uses 0.
    double margin = 0.0;
};

// Squared hinge on the clearance between UAV samples and every surviving
// predicted projectile position at the same instant. Samples past a
// projectile's landing contribute nothing.
inline CostTerm costDodge(const MincoTrajectory &traj, const SurvivingSet &set, double planTime,
                          const PlannerConfig &cfg, const ThreatOptions &opts = {})
{
    CostTerm term = CostTerm::zero(traj);
    if (set.empty())
    {
        return term;
    }
    for (const PlanSample &s : planSamples(traj, cfg.samplesPerSegment))
    {
        const detail::SampleState st = detail::sampleState(traj, s);
        Vec3 gp = Vec3::Zero();
        double gTau = 0.0;
        bool active = false;
        for (const auto &sv : set.members())
        {
            const double t = s.tau + (planTime - sv.releaseTime());
            if (t < 0.0 || t > sv.survival)
            {
                continue;
            }
            const Vec3 center = sv.ballistic.position(t);
            const Vec3 d = st.pos - center;
            const double dist = d.norm();
            const double radius = opts.ignoreSpatial ? 0.0 : sv.params.radius(t);
            const double h = radius + cfg.safetyRadius + opts.margin - dist;
            if (h <= 0.0 || dist < 1e-12)
            {
                continue;
            }
            active = true;
            term.value += h * h;
            const Vec3 dir = d / dist;
            gp -= 2.0 * h * dir;
            const double radiusRate = opts.ignoreSpatial ? 0.0 : sv.params.radiusRate(t);
            gTau += 2.0 * h * (radiusRate + dir.dot(sv.ballistic.velocity(t)));
        }
        if (active)
        {
            detail::scatterSampleGradient(term, s, st, gp, Vec3::Zero(), Vec3::Zero(), gTau, cfg.samplesPerSegment);
        }
    }
    return term;
}

// Squared projection of the relative velocity onto the relative position.
inline CostTerm costRelativeVelocity(const MincoTrajectory &traj, const SurvivingSet &set, double planTime,
                                     const PlannerConfig &cfg)
{
    CostTerm term = CostTerm::zero(traj);
    if (set.empty())
    {
        return term;
    }
    for (const PlanSample &s : planSamples(traj, cfg.samplesPerSegment))
    {
        const detail::SampleState st = detail::sampleState(traj, s);
        Vec3 gp = Vec3::Zero();
        Vec3 gv = Vec3::Zero();
        double gTau = 0.0;
        bool active = false;
        for (const auto &sv : set.members())
        {
            const double t = s.tau + (planTime - sv.releaseTime());
            if (t < 0.0 || t > sv.survival)
            {
                continue;
            }
            const Vec3 vPro = sv.ballistic.velocity(t);
            const Vec3 d = st.pos - sv.ballistic.position(t);
            const Vec3 vRel = st.vel - vPro;
            const double dist = d.norm();
            const double denom = dist + cfg.epsilon;
            const double w = vRel.dot(d);
            const double f = w / denom;
            if (f == 0.0)
            {
                continue;
            }
            active = true;
            term.value += f * f;
            Vec3 dfdd = vRel / denom;
            if (dist > 1e-12)
            {
                dfdd -= (w / (denom * denom)) * (d / dist);
            }
            const Vec3 dfdv = d / denom;
            gp += 2.0 * f * dfdd;
            gv += 2.0 * f * dfdv;
            gTau += 2.0 * f * (-dfdd.dot(vPro) - dfdv.dot(sv.ballistic.acceleration()));
        }
        if (active)
        {
            detail::scatterSampleGradient(term, s, st, gp, gv, Vec3::Zero(), gTau, cfg.samplesPerSegment);
        }
    }
    return term;
}

} // namespace dodge
