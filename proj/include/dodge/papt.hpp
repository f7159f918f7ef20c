#pragma once

#include "dodge/camera.hpp"
#include "dodge/common.hpp"
#include "dodge/smoothing_spline.hpp"

#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace dodge
{

struct SplineConfig
{
    int windowLength = 8;
    double smoothing = 0.001;
    double evalGridDt = 0.005;

    void validate() const
    {
        require(windowLength >= 4, "spline.window_length: must be >= 4");
        require(smoothing >= 0.0, "spline.smoothing: must be >= 0");
        require(evalGridDt > 0.0, "spline.eval_grid_dt: must be > 0");
    }
};

struct ReleaseDetectorConfig
{
    double accelThreshold = 25.0;

    void validate() const { require(accelThreshold > 0.0, "detector.accel_threshold: must be > 0"); }
};

struct KinematicSample
{
    Vec3 position;
    Vec3 velocity;
    Vec3 acceleration;
};

// Per-axis smoothing splines over the most recent window of keypoints.
class KeypointSpline
{
public:
    KeypointSpline() = default;
    explicit KeypointSpline(std::vector<SmoothingSpline> axes)
        : axes_(std::move(axes))
    {
    }

    double domainBegin() const { return axes_.front().domainBegin(); }
    double domainEnd() const { return axes_.front().domainEnd(); }
    bool inDomain(double t) const { return axes_.front().inDomain(t); }
    const SmoothingSpline &axis(int i) const { return axes_.at(static_cast<std::size_t>(i)); }

    KinematicSample evaluate(double t) const
    {
        KinematicSample out;
        for (int i = 0; i < 3; ++i)
        {
            const Eigen::Vector3d e = axes_[static_cast<std::size_t>(i)].evaluate(t);
            out.position[i] = e[0];
            out.velocity[i] = e[1];
            out.acceleration[i] = e[2];
        }
        return out;
    }

    double jumpRoughness() const
    {
        double acc = 0.0;
        for (const auto &a : axes_)
        {
            acc += a.jumpRoughness();
        }
        return acc;
    }

private:
    std::vector<SmoothingSpline> axes_;
};

inline KeypointSpline fitSpline(std::span<const Keypoint3D> window, const SplineConfig &cfg)
{
    cfg.validate();
    if (window.size() < SmoothingSpline::kMinPoints)
    {
        throw ValidationError("fit_spline: too few points");
    }
    std::vector<double> t(window.size());
    Eigen::MatrixXd y(static_cast<Eigen::Index>(window.size()), 3);
    for (std::size_t i = 0; i < window.size(); ++i)
    {
        t[i] = window[i].timestamp;
        y.row(static_cast<Eigen::Index>(i)) = window[i].position.transpose();
    }
    return KeypointSpline(SmoothingSpline::fit(t, y, cfg.smoothing));
}

struct ReleaseCandidate
{
    double releaseTime = 0.0;
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    JointId joint = JointId::RightWrist;
};

// Grid instants are k * gridDt; scanning covers k in (afterIndex, lastIndex].
inline std::int64_t gridIndexAtOrBefore(double t, double gridDt)
{
    return static_cast<std::int64_t>(std::floor(t / gridDt + 1e-9));
}

inline bool isReleaseInstant(const KinematicSample &s, const ReleaseDetectorConfig &cfg)
{
    return s.acceleration.norm() > cfg.accelThreshold && s.acceleration.dot(s.velocity) > 0.0;
}

// Scans grid instants in (scanFrom, scanTo] that lie inside the spline domain.
inline std::vector<ReleaseCandidate> detectRelease(const KeypointSpline &spline,
                                                   const ReleaseDetectorConfig &cfg,
                                                   double scanFrom,
                                                   double scanTo,
                                                   double gridDt,
                                                   JointId joint = JointId::RightWrist)
{
    std::vector<ReleaseCandidate> out;
    const std::int64_t first = gridIndexAtOrBefore(scanFrom, gridDt) + 1;
    const std::int64_t last = gridIndexAtOrBefore(scanTo, gridDt);
    for (std::int64_t k = first; k <= last; ++k)
    {
        const double t = static_cast<double>(k) * gridDt;
        if (!spline.inDomain(t))
        {
            continue;
        }
        const KinematicSample s = spline.evaluate(std::clamp(t, spline.domainBegin(), spline.domainEnd()));
        if (isReleaseInstant(s, cfg))
        {
            out.push_back({t, s.position, s.velocity, joint});
        }
    }
    return out;
}

// Drag-free projectile released at `releaseTime`.
struct BallisticTrajectory
{
    double releaseTime = 0.0;
    Vec3 p0 = Vec3::Zero();
    Vec3 v0 = Vec3::Zero();
    double g = kDefaultGravity;

    void validate() const
    {
        require(g > 0.0, "ballistic: gravity must be positive");
        require(std::isfinite(releaseTime) && allFinite(p0) && allFinite(v0), "ballistic: non-finite state");
    }

    Vec3 position(double tau) const
    {
        checkTau(tau);
        return p0 + v0 * tau + 0.5 * gravityVector(g) * tau * tau;
    }

    Vec3 velocity(double tau) const
    {
        checkTau(tau);
        return v0 + gravityVector(g) * tau;
    }

    Vec3 acceleration() const { return gravityVector(g); }

private:
    static void checkTau(double tau)
    {
        if (!(tau >= 0.0))
        {
            throw std::domain_error("ballistic eval: negative time since release");
        }
    }
};

inline BallisticTrajectory predictBallistic(const ReleaseCandidate &c, double g = kDefaultGravity)
{
    BallisticTrajectory traj{c.releaseTime, c.position, c.velocity, g};
    traj.validate();
    return traj;
}

// One keypoint stream: depth filtering, back-projection, windowed spline
// fitting and release scanning. Single-owner state.
class PaptTracker
{
public:
    PaptTracker(SplineConfig spline, ReleaseDetectorConfig detector, DepthFilterConfig depth, JointId joint)
        : spline_(spline), detector_(detector), depth_(depth), joint_(joint)
    {
        spline_.validate();
        detector_.validate();
        depth_.validate();
    }

    struct FrameOutcome
    {
        bool accepted = false;
        std::optional<DepthRejection> rejection;
        std::vector<ReleaseCandidate> candidates;
    };

    FrameOutcome processObservation(const PixelObservation &obs, const CameraModel &cam)
    {
        FrameOutcome out;
        const DepthResult dr = filterDepth(obs, depth_, prevDepth_);
        if (!dr.accepted())
        {
            out.rejection = dr.reason;
            return out;
        }
        const double d = *dr.depth;
        if (d < cam.depthMin || d > cam.depthMax)
        {
            out.rejection = DepthRejection::TooFewSurvivors;
            return out;
        }
        prevDepth_ = AcceptedDepth{d, obs.timestamp};
        out.accepted = true;
        out.candidates = processKeypoint(backproject(obs, d, cam));
        return out;
    }

    std::vector<ReleaseCandidate> processKeypoint(const Keypoint3D &kp)
    {
        if (!window_.empty() && kp.timestamp <= window_.back().timestamp)
        {
            return {};
        }
        window_.push_back(kp);
        while (window_.size() > static_cast<std::size_t>(spline_.windowLength))
        {
            window_.pop_front();
        }
        if (window_.size() < static_cast<std::size_t>(spline_.windowLength))
        {
            return {};
        }
        const std::vector<Keypoint3D> w(window_.begin(), window_.end());
        const KeypointSpline spline = fitSpline(w, spline_);
        lastSpline_ = spline;

        const double newest = w.back().timestamp;
        const double previous = w[w.size() - 2].timestamp;
        double from = previous;
        if (cursor_)
        {
            from = std::max(from, static_cast<double>(*cursor_) * spline_.evalGridDt);
        }
        auto found = detectRelease(spline, detector_, from, newest, spline_.evalGridDt, joint_);
        const std::int64_t lastIdx = gridIndexAtOrBefore(newest, spline_.evalGridDt);
        if (!cursor_ || lastIdx > *cursor_)
        {
            cursor_ = lastIdx;
        }
        return found;
    }

    const std::optional<KeypointSpline> &lastSpline() const { return lastSpline_; }
    JointId joint() const { return joint_; }

private:
    SplineConfig spline_;
    ReleaseDetectorConfig detector_;
    DepthFilterConfig depth_;
    JointId joint_;
    std::deque<Keypoint3D> window_;
    std::optional<AcceptedDepth> prevDepth_;
    std::optional<std::int64_t> cursor_;
    std::optional<KeypointSpline> lastSpline_;
};

} // namespace dodge
