#pragma once

#include "dodge/planner.hpp"

#include <array>
#include <functional>
#include <random>

namespace dodge
{

// A random planning instance whose threat and obstacle terms are active.
struct GradientInstance
{
    WaypointMatrix q;
    Eigen::VectorXd T;
    BoundaryState start;
    BoundaryState end;
    PlanningProblem problem;
    PlannerConfig config;
};

inline GradientInstance randomGradientInstance(std::mt19937_64 &rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto uni = [&](double a, double b) { return a + (b - a) * u(rng); };
    auto vec = [&](double a, double b) { return Vec3(uni(a, b), uni(a, b), uni(a, b)); };

    GradientInstance g;
    const int M = 2 + static_cast<int>(rng() % 4);
    g.config.segments = M;
    g.config.samplesPerSegment = 4 + static_cast<int>(rng() % 9);
    g.config.safetyRadius = uni(0.2, 0.6);
    g.config.epsilon = uni(0.05, 0.3);
    g.config.maxVelocity = uni(0.5, 2.0);
    g.config.maxAcceleration = uni(1.0, 4.0);
    auto &w = g.config.weights;
    w = {uni(0.1, 2.0), uni(0.1, 2.0), uni(0.1, 2.0), uni(0.1, 2.0), uni(0.1, 2.0), uni(0.1, 2.0)};

    g.start = {vec(-1.0, 1.0), vec(-1.5, 1.5), vec(-2.0, 2.0)};
    g.end = BoundaryState::rest(vec(2.0, 4.0));
    g.T.resize(M);
    g.q.resize(3, M - 1);
    for (int i = 0; i < M; ++i)
        g.T(i) = uni(0.3, 1.2);
    for (int i = 0; i < M - 1; ++i)
    {
        const double f = static_cast<double>(i + 1) / M;
        g.q.col(i) = (1.0 - f) * g.start.position + f * g.end.position + vec(-0.7, 0.7);
    }

    const MincoTrajectory traj = MincoTrajectory::construct(g.q, g.T, g.start, g.end);
    const double total = traj.totalDuration();
    g.problem.start = g.start;
    g.problem.goal = g.end.position;
    g.problem.planTime = uni(0.0, 2.0);

    // Threats pass near the plan at a random instant.
    const int nThreats = 1 + static_cast<int>(rng() % 8);
    for (int k = 0; k < nThreats; ++k)
    {
        const double tau = uni(0.05, 0.95) * total;
        const Vec3 target = traj.eval(tau, 0) + vec(-0.4, 0.4);
        const double flight = uni(0.3, 0.8);
        const Vec3 v0 = vec(-4.0, 4.0);
        const Vec3 gvec = gravityVector(kDefaultGravity);
        BallisticTrajectory b;
        b.g = kDefaultGravity;
        b.releaseTime = g.problem.planTime + tau - flight;
        b.v0 = v0;
        b.p0 = target - v0 * flight - 0.5 * gvec * flight * flight;
        UncertaintyParams up{uni(0.0, 0.4), uni(0.0, 0.2), uni(0.02, 0.1)};
        g.problem.threats.add(SurvivingTrajectory::make(b, up, b.p0.z() - 10.0));
    }
    const int nObs = 1 + static_cast<int>(rng() % 3);
    for (int k = 0; k < nObs; ++k)
    {
        const Vec3 c = traj.eval(uni(0.1, 0.9) * total, 0) + vec(-0.3, 0.3);
        g.problem.obstacles.push_back({c, uni(0.3, 0.8)});
    }
    g.problem.threatOptions.ignoreSpatial = false;
    g.problem.threatOptions.margin = uni(0.0, 0.05);
    return g;
}

inline constexpr std::array<const char *, 7> kGradientTermNames{"J_s", "J_o", "J_t", "J_f", "J_d", "J_v", "total"};

inline CostTerm evaluateGradientTerm(int term, const MincoTrajectory &traj, const GradientInstance &g)
{
    const auto &p = g.problem;
    switch (term)
    {
    case 0:
        return costSmoothness(traj);
    case 1:
        return costStatic(traj, p.obstacles, g.config);
    case 2:
        return costTime(traj);
    case 3:
        return costFeasibility(traj, g.config);
    case 4:
        return costDodge(traj, p.threats, p.planTime, g.config, p.threatOptions);
    case 5:
        return costRelativeVelocity(traj, p.threats, p.planTime, g.config);
    default:
        return totalCost(traj, p, g.config);
    }
}

struct TermGradientCheck
{
    double value = 0.0;
    // ||fd - analytic||_inf / max(||analytic||_inf, ||fd||_inf), 0 when both vanish.
    double relativeError = 0.0;
    double gradientNorm = 0.0;
};

// Central differences over (q, T) of J(q, T) = F(c(q, T), T).
inline TermGradientCheck checkTermGradient(int term, const GradientInstance &g, double h = 1e-6)
{
    const int M = static_cast<int>(g.T.size());
    const int nq = 3 * (M - 1);
    auto valueAt = [&](const WaypointMatrix &q, const Eigen::VectorXd &T) {
        return evaluateGradientTerm(term, MincoTrajectory::construct(q, T, g.start, g.end), g).value;
    };

    const MincoTrajectory traj = MincoTrajectory::construct(g.q, g.T, g.start, g.end);
    const CostTerm f = evaluateGradientTerm(term, traj, g);
    WaypointMatrix gq;
    Eigen::VectorXd gT;
    traj.propagateGradients(f.gradC, f.gradT, gq, gT);
    Eigen::VectorXd analytic(nq + M);
    for (int i = 0; i < M - 1; ++i)
        analytic.segment<3>(3 * i) = gq.col(i);
    analytic.tail(M) = gT;

    Eigen::VectorXd fd(nq + M);
    for (int idx = 0; idx < nq + M; ++idx)
    {
        WaypointMatrix qp = g.q, qm = g.q;
        Eigen::VectorXd Tp = g.T, Tm = g.T;
        if (idx < nq)
        {
            qp(idx % 3, idx / 3) += h;
            qm(idx % 3, idx / 3) -= h;
        }
        else
        {
            Tp(idx - nq) += h;
            Tm(idx - nq) -= h;
        }
        fd(idx) = (valueAt(qp, Tp) - valueAt(qm, Tm)) / (2.0 * h);
    }

    TermGradientCheck out;
    out.value = f.value;
    out.gradientNorm = analytic.cwiseAbs().maxCoeff();
    const double scale = std::max(out.gradientNorm, fd.cwiseAbs().maxCoeff());
    out.relativeError = scale > 0.0 ? (fd - analytic).cwiseAbs().maxCoeff() / scale : 0.0;
    return out;
}

struct GradientCheckSummary
{
    int instances = 0;
    std::array<double, 7> maxError{};
    // Instances on which the term had a nonzero gradient.
    std::array<int, 7> active{};

    bool passed(double tol) const
    {
        for (double e : maxError)
        {
            if (!(e < tol))
                return false;
        }
        return true;
    }
};

inline GradientCheckSummary runGradientCheck(int instances, std::uint64_t seed, double h = 1e-6)
{
    std::mt19937_64 rng(seed);
    GradientCheckSummary s;
    s.instances = instances;
    for (int n = 0; n < instances; ++n)
    {
        const GradientInstance g = randomGradientInstance(rng);
        for (int term = 0; term < 7; ++term)
        {
            const TermGradientCheck c = checkTermGradient(term, g, h);
            const auto k = static_cast<std::size_t>(term);
            s.maxError[k] = std::max(s.maxError[k], c.relativeError);
            if (c.gradientNorm > 0.0)
                ++s.active[k];
        }
    }
    return s;
}

} // namespace dodge
