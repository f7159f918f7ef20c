#pragma once

#include "dodge/common.hpp"
#include "dodge/minco.hpp"
#include "dodge/papt.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace dodge
{

// R(t) = alpha t^2 + beta t + gamma around a predicted ballistic arc.
struct UncertaintyParams
{
    double alpha = 0.2;
    double beta = 0.1;
    double gamma = 0.05;

    void validate() const
    {
        require(alpha >= 0.0 && beta >= 0.0 && gamma > 0.0,
                "uncertainty.alpha, uncertainty.beta, uncertainty.gamma: need alpha >= 0, beta >= 0, gamma > 0");
    }

    double radius(double t) const
    {
        if (!(t >= 0.0))
        {
            throw std::domain_error("uncertainty radius: negative time");
        }
        return (alpha * t + beta) * t + gamma;
    }

    double radiusRate(double t) const { return 2.0 * alpha * t + beta; }
};

// Positive root of p0z + v0z t - g t^2 / 2 = zGround.
inline double survivalDuration(const BallisticTrajectory &traj, double zGround)
{
    const double h = traj.p0.z() - zGround;
    if (!(h > 0.0))
    {
        throw ValidationError("survival_duration: release point is not above ground");
    }
    const double vz = traj.v0.z();
    const double disc = vz * vz + 2.0 * traj.g * h;
    const double root = std::sqrt(disc);
    // Numerically stable form of (vz + sqrt(disc)) / g.
    if (vz >= 0.0)
    {
        return (vz + root) / traj.g;
    }
    return 2.0 * h / (root - vz);
}

struct SurvivingTrajectory
{
    BallisticTrajectory ballistic;
    double survival = 0.0;
    UncertaintyParams params;
    JointId joint = JointId::RightWrist;

    double releaseTime() const { return ballistic.releaseTime; }
    double deathTime() const { return ballistic.releaseTime + survival; }
    bool alive(double tNow) const { return tNow < deathTime(); }

    static SurvivingTrajectory make(const BallisticTrajectory &b, const UncertaintyParams &p, double zGround,
                                    JointId joint = JointId::RightWrist)
    {
        p.validate();
        return SurvivingTrajectory{b, survivalDuration(b, zGround), p, joint};
    }
};

inline bool contains(const SurvivingTrajectory &st, double t, const Vec3 &p)
{
    if (!(t >= 0.0 && t <= st.survival))
    {
        throw std::out_of_range("contains: time outside survival window");
    }
    const double r = st.params.radius(t);
    return (p - st.ballistic.position(t)).squaredNorm() <= r * r;
}

class SurvivingSet
{
public:
    explicit SurvivingSet(std::size_t capacity = 64)
        : capacity_(capacity)
    {
        require(capacity_ >= 1, "surviving set: capacity must be >= 1");
    }

    void add(const SurvivingTrajectory &st) { members_.push_back(st); }

    const std::vector<SurvivingTrajectory> &members() const { return members_; }
    std::size_t size() const { return members_.size(); }
    bool empty() const { return members_.empty(); }
    std::size_t capacity() const { return capacity_; }

    // Drops dead members and, above capacity, the oldest releases.
    SurvivingSet pruned(double tNow) const
    {
        SurvivingSet out(capacity_);
        for (const auto &m : members_)
        {
            if (m.alive(tNow))
            {
                out.members_.push_back(m);
            }
        }
        while (out.members_.size() > capacity_)
        {
            const auto oldest = std::min_element(out.members_.begin(), out.members_.end(),
                                                 [](const auto &a, const auto &b) { return a.releaseTime() < b.releaseTime(); });
            out.members_.erase(oldest);
        }
        return out;
    }

    void prune(double tNow) { *this = pruned(tNow); }

    // Single most recent release, for the no-temporal ablation.
    SurvivingSet newestOnly() const
    {
        SurvivingSet out(capacity_);
        if (!members_.empty())
        {
            const auto newest = std::max_element(members_.begin(), members_.end(),
                                                 [](const auto &a, const auto &b) { return a.releaseTime() < b.releaseTime(); });
            out.members_.push_back(*newest);
        }
        return out;
    }

private:
    std::size_t capacity_;
    std::vector<SurvivingTrajectory> members_;
};

inline SurvivingSet prune(const SurvivingSet &set, double tNow)
{
    return set.pruned(tNow);
}

// Sample instants shared by the planner costs and the risk check:
// tau_{m,k} = sum_{j<m} T_j + (k/K) T_m, k = 0..K-1.
struct PlanSample
{
    int segment = 0;
    int k = 0;
    double localT = 0.0;
    double tau = 0.0;
};

inline std::vector<PlanSample> planSamples(const MincoTrajectory &traj, int samplesPerSegment)
{
    std::vector<PlanSample> out;
    out.reserve(static_cast<std::size_t>(traj.segments() * samplesPerSegment));
    double offset = 0.0;
    for (int m = 0; m < traj.segments(); ++m)
    {
        const double T = traj.durations()(m);
        for (int k = 0; k < samplesPerSegment; ++k)
        {
            const double frac = static_cast<double>(k) / static_cast<double>(samplesPerSegment);
            out.push_back({m, k, frac * T, offset + frac * T});
        }
        offset += T;
    }
    return out;
}

struct RiskQuery
{
    double safetyRadius = 0.4;
    int samplesPerSegment = 8;
    bool ignoreSpatial = false;
};

inline bool insideInflated(const SurvivingTrajectory &st, double sinceRelease, const Vec3 &p, const RiskQuery &q)
{
    if (sinceRelease < 0.0 || sinceRelease > st.survival)
    {
        return false;
    }
    const double r = (q.ignoreSpatial ? 0.0 : st.params.radius(sinceRelease)) + q.safetyRadius;
    return (p - st.ballistic.position(sinceRelease)).squaredNorm() <= r * r;
}

// True when the UAV position at tNow, or any future sample of the plan
// (started at planStart), is inside an inflated envelope.
inline bool riskCheck(const SurvivingSet &set,
                      const Vec3 &uavPosition,
                      const MincoTrajectory *plan,
                      double planStart,
                      double tNow,
                      const RiskQuery &q)
{
    for (const auto &st : set.members())
    {
        if (insideInflated(st, tNow - st.releaseTime(), uavPosition, q))
        {
            return true;
        }
    }
    if (plan == nullptr || plan->empty())
    {
        return false;
    }
    for (const PlanSample &s : planSamples(*plan, q.samplesPerSegment))
    {
        const double tAbs = planStart + s.tau;
        if (tAbs < tNow)
        {
            continue;
        }
        const Vec3 p = plan->evalSegment(s.segment, s.localT, 0);
        for (const auto &st : set.members())
        {
            if (insideInflated(st, tAbs - st.releaseTime(), p, q))
            {
                return true;
            }
        }
    }
    return false;
}

} // namespace dodge
