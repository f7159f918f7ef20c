#pragma once

#include "dodge/common.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace dodge
{

// 1-D motion with piecewise-constant jerk (so C2 position).
class PiecewiseJerkProfile
{
public:
    struct Piece
    {
        double t0;
        double s0, v0, a0;
        double jerk;
    };

    explicit PiecewiseJerkProfile(double tStart = 0.0)
    {
        pieces_.push_back({tStart, 0.0, 0.0, 0.0, 0.0});
    }

    // Appends a piece of `duration` with constant jerk starting at the
    // current end state.
    void append(double duration, double jerk)
    {
        Piece &last = pieces_.back();
        last.jerk = jerk;
        const double t = duration;
        Piece next{last.t0 + t,
                   last.s0 + last.v0 * t + 0.5 * last.a0 * t * t + jerk * t * t * t / 6.0,
                   last.v0 + last.a0 * t + 0.5 * jerk * t * t,
                   last.a0 + jerk * t,
                   0.0};
        pieces_.push_back(next);
    }

    // Position, velocity, acceleration at t (holds constant-acceleration
    // extrapolation beyond the last breakpoint with zero jerk).
    Eigen::Vector3d state(double t) const
    {
        if (t <= pieces_.front().t0)
        {
            const Piece &p = pieces_.front();
            return Eigen::Vector3d(p.s0, p.v0, p.a0);
        }
        auto it = std::upper_bound(pieces_.begin(), pieces_.end(), t,
                                   [](double v, const Piece &p) { return v < p.t0; });
        const Piece &p = *(it - 1);
        const double tau = t - p.t0;
        return Eigen::Vector3d(p.s0 + p.v0 * tau + 0.5 * p.a0 * tau * tau + p.jerk * tau * tau * tau / 6.0,
                               p.v0 + p.a0 * tau + 0.5 * p.jerk * tau * tau,
                               p.a0 + p.jerk * tau);
    }

    double endTime() const { return pieces_.back().t0; }
    const Piece &endPiece() const { return pieces_.back(); }

private:
    std::vector<Piece> pieces_;
};

struct ArmMotionParams
{
    double windupDuration = 0.6;
    double windupAmplitude = 0.3;
    // Acceleration phase: jerk-up over jerkDuration, then constant
    // acceleration until release.
    double accelerationDuration = 0.1;
    double jerkDuration = 0.1;
    // Jerk magnitude of the post-release acceleration drop.
    double releaseSnap = 6000.0;
    double followThroughDecel = 40.0;
};

// Analytic throwing wrist: rest, windup (back and stop), a linear
// acceleration ramp that reaches the release velocity exactly at the
// release time, then a follow-through that brings the wrist to rest.
// Motion is along the throw direction through the release point.
class ArmMotionModel
{
public:
    ArmMotionModel(const Vec3 &releasePoint, const Vec3 &releaseVelocity, double releaseTime,
                   const ArmMotionParams &p = {})
        : releasePoint_(releasePoint), releaseVelocity_(releaseVelocity), releaseTime_(releaseTime), params_(p)
    {
        require(p.windupDuration > 0.0 && p.accelerationDuration > 0.0 && p.releaseSnap > 0.0 &&
                    p.followThroughDecel > 0.0 && p.windupAmplitude >= 0.0 && p.jerkDuration > 0.0 &&
                    p.jerkDuration <= p.accelerationDuration,
                "arm model: invalid motion parameters");
        const double speed = releaseVelocity.norm();
        direction_ = speed > 1e-9 ? Vec3(releaseVelocity / speed) : Vec3::UnitX();

        const double rampStart = releaseTime - p.accelerationDuration;
        const double windupStart = rampStart - p.windupDuration;
        profile_ = PiecewiseJerkProfile(windupStart);
        // Windup: triangular acceleration pulses, net displacement -amplitude.
        const double q = p.windupDuration / 4.0;
        const double peak = p.windupAmplitude / (2.0 * q * q);
        profile_.append(q, -peak / q);
        profile_.append(q, peak / q);
        profile_.append(q, peak / q);
        profile_.append(q, -peak / q);
        if (speed > 1e-9)
        {
            const double aPeak = peakAcceleration();
            profile_.append(p.jerkDuration, aPeak / p.jerkDuration);
            profile_.append(p.accelerationDuration - p.jerkDuration, 0.0);
            const double D = p.followThroughDecel;
            const double drop = (aPeak + D) / p.releaseSnap;
            const double rise = D / p.releaseSnap;
            double hold = (speed + 0.5 * (aPeak - D) * drop - 0.5 * D * rise) / D;
            hold = std::max(hold, 0.0);
            profile_.append(drop, -p.releaseSnap);
            profile_.append(hold, 0.0);
            profile_.append(rise, p.releaseSnap);
        }
        // Shift so the wrist passes the release point at the release time.
        offset_ = releasePoint - direction_ * profile_.state(releaseTime)[0];
    }

    struct WristState
    {
        Vec3 position;
        Vec3 velocity;
        Vec3 acceleration;
    };

    WristState state(double t) const
    {
        const Eigen::Vector3d s = profile_.state(t);
        if (t >= profile_.endTime())
        {
            const auto &e = profile_.endPiece();
            // Residual velocity after follow-through is ~0; hold position.
            return {offset_ + direction_ * e.s0, Vec3::Zero(), Vec3::Zero()};
        }
        return {offset_ + direction_ * s[0], direction_ * s[1], direction_ * s[2]};
    }

    double releaseTime() const { return releaseTime_; }
    const Vec3 &releasePoint() const { return releasePoint_; }
    const Vec3 &releaseVelocity() const { return releaseVelocity_; }
    double rampStart() const { return releaseTime_ - params_.accelerationDuration; }

    double peakAcceleration() const
    {
        return releaseVelocity_.norm() / (params_.accelerationDuration - 0.5 * params_.jerkDuration);
    }

    // Instant where |a| reaches `threshold` on the jerk-up (a and v are
    // aligned there); NaN when the peak stays below it.
    double thresholdCrossing(double threshold) const
    {
        const double peak = peakAcceleration();
        if (!(threshold < peak))
        {
            return std::numeric_limits<double>::quiet_NaN();
        }
        return rampStart() + params_.jerkDuration * threshold / peak;
    }

private:
    Vec3 releasePoint_;
    Vec3 releaseVelocity_;
    double releaseTime_;
    ArmMotionParams params_;
    Vec3 direction_;
    PiecewiseJerkProfile profile_;
    Vec3 offset_ = Vec3::Zero();
};

} // namespace dodge
