#pragma once

#include "dodge/arm_model.hpp"
#include "dodge/camera.hpp"
#include "dodge/common.hpp"
#include "dodge/costs.hpp"
#include "dodge/papt.hpp"
#include "dodge/planner.hpp"
#include "dodge/uncertainty.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <exception>
#include <mutex>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace dodge
{

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }

struct AttackerConfig
{
    // Ground point the attacker stands on.
    Vec3 position = Vec3(4.0, 0.0, 0.0);
    double releaseHeight = 1.8;
    // Horizontal distance the hand is ahead of the body toward the UAV at release.
    double releaseReach = 0.6;
    double throwSpeed = 6.0;
    double throwElevationDeg = 10.0;
    double throwAzimuthDeg = 0.0;
    // Solve the elevation so the drag-free arc passes through the UAV start;
    // throwAzimuthDeg is then an offset from the aim direction.
    bool aimAtUav = true;
    double releaseTime = 1.0;
    ArmMotionParams arm;
};

struct ScenarioConfig
{
    std::uint64_t seed = 1;
    std::vector<AttackerConfig> attackers{AttackerConfig{}};
    Vec3 uavStart = Vec3(0.0, 0.0, 1.5);
    Vec3 uavGoal = Vec3(0.0, 0.0, 1.5);
    double cameraHeadingDeg = 0.0;
    double dragCoefficient = 0.01;
    double noisePixels = 0.005;
    double noiseDepth = 0.0002;
    double outlierProbability = 0.02;
    double frameRate = 60.0;
    double perceptionLatency = 0.03;
    double zGround = 0.0;
    double gravity = kDefaultGravity;
    double simDt = 0.002;
    // Simulated time after the last projectile lands.
    double settleTime = 0.5;
    CameraModel camera;
    PlannerConfig planner;
    UncertaintyParams uncertainty;
    SplineConfig spline;
    ReleaseDetectorConfig detector;
    DepthFilterConfig depthFilter;
    std::size_t candidateCap = 64;
    std::vector<StaticObstacle> obstacles;
    // Tracking controller gains for the UAV plant.
    double trackKp = 30.0;
    double trackKv = 12.0;
    double attitudeLag = 0.02;
    double goalTolerance = 0.2;

    // Camera at the UAV start pose, looking along the configured heading.
    CameraModel effectiveCamera() const
    {
        const Vec3 fwd(std::cos(deg2rad(cameraHeadingDeg)), std::sin(deg2rad(cameraHeadingDeg)), 0.0);
        CameraModel cam = CameraModel::lookingAlong(uavStart, fwd);
        cam.fx = camera.fx;
        cam.fy = camera.fy;
        cam.cx = camera.cx;
        cam.cy = camera.cy;
        cam.width = camera.width;
        cam.height = camera.height;
        cam.depthMin = camera.depthMin;
        cam.depthMax = camera.depthMax;
        return cam;
    }

    void validate() const
    {
        require(frameRate > 0.0, "scenario.frame_rate: must be > 0");
        require(perceptionLatency >= 0.0, "scenario.perception_latency: must be >= 0");
        require(noisePixels >= 0.0 && noiseDepth >= 0.0, "scenario.noise_pixels, scenario.noise_depth: must be >= 0");
        require(outlierProbability >= 0.0 && outlierProbability <= 1.0, "scenario.outlier_probability: must be in [0,1]");
        require(dragCoefficient >= 0.0, "scenario.drag_coefficient: must be >= 0");
        require(gravity > 0.0, "scenario.gravity: must be > 0");
        require(simDt > 0.0, "scenario.sim_dt: must be > 0");
        require(settleTime >= 0.0, "scenario.settle_time: must be >= 0");
        require(candidateCap >= 1, "scenario.candidate_cap: must be >= 1");
        require(!attackers.empty(), "attacker: at least one attacker required");
        require(allFinite(uavStart) && allFinite(uavGoal), "scenario.uav_start, scenario.uav_goal: must be finite");
        require(uavStart.z() > zGround, "scenario.uav_start: must be above ground");
        require(trackKp > 0.0 && trackKv > 0.0 && attitudeLag > 0.0, "tracking.kp, tracking.kv, tracking.attitude_lag: must be > 0");
        for (const auto &a : attackers)
        {
            require(a.throwSpeed >= 0.0, "attacker.throw_speed: must be >= 0");
            require(a.releaseHeight > zGround, "attacker.release_height: must be above ground");
            require(a.releaseReach >= 0.0, "attacker.release_reach: must be >= 0");
            require(a.releaseTime > a.arm.windupDuration + a.arm.accelerationDuration,
                    "attacker.release_time: must leave room for windup and acceleration");
        }
        effectiveCamera().validate();
        planner.validate();
        uncertainty.validate();
        spline.validate();
        detector.validate();
        depthFilter.validate();
        for (const auto &o : obstacles)
        {
            require(o.radius > 0.0, "obstacle.radius: must be > 0");
        }
    }
};

// Release point and velocity for one attacker.
struct ThrowSpec
{
    Vec3 releasePoint;
    Vec3 releaseVelocity;
    double releaseTime;
};

// Low-arc elevation that passes a drag-free projectile through a target at
// horizontal range `range` and height difference `dz`; 45 degrees when out
// of reach.
inline double aimElevation(double speed, double range, double dz, double g)
{
    if (speed <= 1e-9)
    {
        return 0.0;
    }
    const double v2 = speed * speed;
    const double disc = v2 * v2 - g * (g * range * range + 2.0 * dz * v2);
    if (disc < 0.0)
    {
        return std::numbers::pi / 4.0;
    }
    return std::atan2(v2 - std::sqrt(disc), g * range);
}

inline ThrowSpec throwSpec(const AttackerConfig &a, const ScenarioConfig &sc)
{
    ThrowSpec spec;
    Vec3 ahead = sc.uavStart - a.position;
    ahead.z() = 0.0;
    ahead = ahead.norm() > 1e-9 ? Vec3(ahead.normalized()) : Vec3::UnitX();
    spec.releasePoint = a.position + a.releaseReach * ahead + Vec3(0.0, 0.0, a.releaseHeight);
    spec.releaseTime = a.releaseTime;
    double azimuth = deg2rad(a.throwAzimuthDeg);
    double elevation = deg2rad(a.throwElevationDeg);
    if (a.aimAtUav)
    {
        const Vec3 delta = sc.uavStart - spec.releasePoint;
        const double range = std::hypot(delta.x(), delta.y());
        azimuth += std::atan2(delta.y(), delta.x());
        elevation = aimElevation(a.throwSpeed, range, delta.z(), sc.gravity);
    }
    spec.releaseVelocity = a.throwSpeed * Vec3(std::cos(elevation) * std::cos(azimuth),
                                               std::cos(elevation) * std::sin(azimuth), std::sin(elevation));
    return spec;
}

struct ProjectileState
{
    Vec3 position;
    Vec3 velocity;
};

// RK4 step of p' = v, v' = g - c_d |v| v.
inline ProjectileState stepGroundTruth(const ProjectileState &s, double dt, double drag, double g = kDefaultGravity)
{
    require(dt > 0.0, "step_ground_truth: dt must be > 0");
    const Vec3 gv = gravityVector(g);
    auto accel = [&](const Vec3 &v) -> Vec3 { return gv - drag * v.norm() * v; };
    const Vec3 k1p = s.velocity;
    const Vec3 k1v = accel(s.velocity);
    const Vec3 k2p = s.velocity + 0.5 * dt * k1v;
    const Vec3 k2v = accel(k2p);
    const Vec3 k3p = s.velocity + 0.5 * dt * k2v;
    const Vec3 k3v = accel(k3p);
    const Vec3 k4p = s.velocity + dt * k3v;
    const Vec3 k4v = accel(k4p);
    return {s.position + dt / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p),
            s.velocity + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)};
}

// Ground-truth flight sampled every dt until it reaches zGround; the last
// sample is interpolated onto the ground plane.
struct GroundTruthFlight
{
    double releaseTime = 0.0;
    double dt = 0.002;
    std::vector<ProjectileState> samples;

    double landingTime() const { return releaseTime + dt * static_cast<double>(samples.size() - 1); }

    // Linear interpolation between RK4 samples; clamps to the flight window.
    Vec3 positionAt(double t) const
    {
        const double x = std::clamp((t - releaseTime) / dt, 0.0, static_cast<double>(samples.size() - 1));
        const std::size_t i = std::min(static_cast<std::size_t>(x), samples.size() - 1);
        if (i + 1 >= samples.size())
        {
            return samples.back().position;
        }
        const double f = x - static_cast<double>(i);
        return (1.0 - f) * samples[i].position + f * samples[i + 1].position;
    }
};

inline GroundTruthFlight simulateFlight(const ThrowSpec &spec, double drag, double zGround, double dt,
                                        double g = kDefaultGravity)
{
    GroundTruthFlight f;
    f.releaseTime = spec.releaseTime;
    f.dt = dt;
    ProjectileState s{spec.releasePoint, spec.releaseVelocity};
    f.samples.push_back(s);
    for (int i = 0; i < 200000; ++i)
    {
        ProjectileState n = stepGroundTruth(s, dt, drag, g);
        if (n.position.z() <= zGround)
        {
            const double frac = (s.position.z() - zGround) / (s.position.z() - n.position.z());
            n.position = s.position + frac * (n.position - s.position);
            n.velocity = s.velocity + frac * (n.velocity - s.velocity);
            f.samples.push_back(n);
            break;
        }
        f.samples.push_back(n);
        s = n;
    }
    return f;
}

struct StreamFrame
{
    PixelObservation observation;
    // False when the wrist is outside the frustum (the frame carries no data).
    bool valid = true;
    double deliveryTime = 0.0;
};

struct KeypointStream
{
    JointId joint = JointId::RightWrist;
    int attacker = 0;
    std::vector<StreamFrame> frames;
};

// Deterministic per-trial seed from (master, cell, trial).
inline std::uint64_t deriveSeed(std::uint64_t master, std::uint64_t cell, std::uint64_t trial)
{
    auto mix = [](std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    };
    return mix(mix(mix(master) ^ cell) ^ trial);
}

// Synthesized camera observations of both wrists of every attacker.
inline std::vector<KeypointStream> generateKeypointStream(const ScenarioConfig &sc, double duration)
{
    const CameraModel cam = sc.effectiveCamera();
    std::mt19937_64 rng(deriveSeed(sc.seed, 0xC0FFEEULL, 0));
    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const int frames = static_cast<int>(std::floor(duration * sc.frameRate + 1e-9));
    const std::size_t patch = sc.depthFilter.patchSize();

    std::vector<KeypointStream> out;
    for (std::size_t ai = 0; ai < sc.attackers.size(); ++ai)
    {
        const AttackerConfig &a = sc.attackers[ai];
        const ThrowSpec spec = throwSpec(a, sc);
        const ArmMotionModel arm(spec.releasePoint, spec.releaseVelocity, spec.releaseTime, a.arm);
        // Idle wrist hangs beside the body.
        const Vec3 toUav = (sc.uavStart - a.position).normalized();
        const Vec3 side = Vec3(-toUav.y(), toUav.x(), 0.0).normalized();
        const Vec3 idleWrist = a.position + Vec3(0.0, 0.0, 0.9) + 0.25 * side;

        for (JointId joint : {JointId::RightWrist, JointId::LeftWrist})
        {
            KeypointStream stream;
            stream.joint = joint;
            stream.attacker = static_cast<int>(ai);
            for (int i = 0; i < frames; ++i)
            {
                const double t = static_cast<double>(i) / sc.frameRate;
                const Vec3 world = joint == JointId::RightWrist ? arm.state(t).position : idleWrist;
                StreamFrame f;
                f.deliveryTime = t + sc.perceptionLatency;
                f.observation.timestamp = t;
                f.observation.joint = joint;
                const auto proj = project(world, cam);
                if (!proj)
                {
                    f.valid = false;
                    stream.frames.push_back(std::move(f));
                    continue;
                }
                const double u = proj->u + sc.noisePixels * unit(rng);
                const double v = proj->v + sc.noisePixels * unit(rng);
                if (!cam.inImage(u, v))
                {
                    f.valid = false;
                    stream.frames.push_back(std::move(f));
                    continue;
                }
                f.observation.u = u;
                f.observation.v = v;
                f.observation.depthPatch.resize(patch);
                for (std::size_t k = 0; k < patch; ++k)
                {
                    double d = proj->depth + sc.noiseDepth * unit(rng);
                    if (uni(rng) < sc.outlierProbability)
                    {
                        // Background or missing return.
                        d = uni(rng) < 0.5 ? kInvalidDepth : proj->depth + 1.0 + 3.0 * uni(rng);
                    }
                    if (d > cam.depthMax)
                    {
                        d = kInvalidDepth;
                    }
                    f.observation.depthPatch[k] = d;
                }
                stream.frames.push_back(std::move(f));
            }
            out.push_back(std::move(stream));
        }
    }
    return out;
}

struct TimelineEvent
{
    double time = 0.0;
    std::string tag;
};

struct CycleRecord
{
    double time = 0.0;
    bool dodgeMode = false;
    std::size_t threatCount = 0;
    int planId = 0;
    double publishedDodge = 0.0;
    CostReport report;
};

struct PublishedPlan
{
    int planId = 0;
    double start = 0.0;
    MincoTrajectory trajectory;
};

struct TrialResult
{
    double dMin = std::numeric_limits<double>::infinity();
    bool success = false;
    double detectionTime = std::numeric_limits<double>::quiet_NaN();
    double firstPlanTime = std::numeric_limits<double>::quiet_NaN();
    double releaseTime = std::numeric_limits<double>::quiet_NaN();
    double landingTime = std::numeric_limits<double>::quiet_NaN();
    bool goalReached = false;
    std::vector<TimelineEvent> timeline;
    // Diagnostics used by the acceptance checks.
    int candidateCount = 0;
    int replanCount = 0;
    int dodgePlanCount = 0;
    // Some published plan had J_d = 0 against a nonempty surviving set.
    bool clearPlanAchieved = false;
    bool descentMonotone = true;
};

inline constexpr double kCollisionDistance = 0.4;

inline bool isSuccess(double dMin) { return dMin >= kCollisionDistance; }

struct TrajectoryLogRow
{
    double t;
    Vec3 uav;
    Vec3 projectile;
    int planId;
    std::size_t survivingCount;
    double nearestRadius;
};

struct TrialOptions
{
    // Keep the initial hover plan forever (no replanning).
    bool freezePlanner = false;
    // Replace the synthesized perception stream.
    const std::vector<KeypointStream> *replay = nullptr;
    std::vector<TrajectoryLogRow> *log = nullptr;
    int logEvery = 5;
    std::vector<CycleRecord> *cycles = nullptr;
    std::vector<PublishedPlan> *plans = nullptr;
};

// Triple-integrator UAV tracking a reference with saturated acceleration.
struct UavPlant
{
    Vec3 p = Vec3::Zero();
    Vec3 v = Vec3::Zero();
    Vec3 a = Vec3::Zero();

    void step(const Vec3 &pr, const Vec3 &vr, const Vec3 &ar, double dt, double kp, double kv, double lag,
              double aMax)
    {
        Vec3 cmd = ar + kv * (vr - v) + kp * (pr - p);
        const double n = cmd.norm();
        if (n > aMax)
        {
            cmd *= aMax / n;
        }
        const double blend = std::min(1.0, dt / lag);
        a += blend * (cmd - a);
        p += v * dt + 0.5 * a * dt * dt;
        v += a * dt;
    }
};

// Tracks the minimum of a sampled distance and refines it with a parabola
// through the bracketing samples.
class MinDistanceTracker
{
public:
    void add(double d)
    {
        window_[0] = window_[1];
        window_[1] = window_[2];
        window_[2] = d;
        ++count_;
        if (d < best_)
        {
            best_ = d;
        }
        if (count_ >= 3 && window_[1] <= window_[0] && window_[1] <= window_[2])
        {
            const double den = window_[0] - 2.0 * window_[1] + window_[2];
            if (den > 1e-15)
            {
                const double x = 0.5 * (window_[0] - window_[2]) / den;
                const double refined = window_[1] - 0.25 * (window_[0] - window_[2]) * x;
                best_ = std::min(best_, std::max(0.0, refined));
            }
        }
    }

    double value() const { return best_; }

private:
    std::array<double, 3> window_{};
    int count_ = 0;
    double best_ = std::numeric_limits<double>::infinity();
};

// Closed loop: perception stream -> PAPT -> surviving set -> replanner ->
// UAV tracking, scored against drag-perturbed ground truth.
inline TrialResult runTrial(const ScenarioConfig &sc, Strategy strategy, const TrialOptions &opts = {})
{
    sc.validate();
    TrialResult res;
    const CameraModel cam = sc.effectiveCamera();

    std::vector<ThrowSpec> throws;
    std::vector<GroundTruthFlight> flights;
    double lastLanding = 0.0;
    double firstRelease = std::numeric_limits<double>::infinity();
    for (const auto &a : sc.attackers)
    {
        throws.push_back(throwSpec(a, sc));
        flights.push_back(simulateFlight(throws.back(), sc.dragCoefficient, sc.zGround, sc.simDt, sc.gravity));
        lastLanding = std::max(lastLanding, flights.back().landingTime());
        firstRelease = std::min(firstRelease, throws.back().releaseTime);
    }
    res.releaseTime = firstRelease;
    res.landingTime = lastLanding;
    const double tEnd = lastLanding + sc.settleTime;

    std::vector<KeypointStream> generated;
    if (!opts.replay)
    {
        generated = generateKeypointStream(sc, tEnd);
    }
    const std::vector<KeypointStream> &streams = opts.replay ? *opts.replay : generated;

    std::vector<PaptTracker> trackers;
    std::vector<std::size_t> cursors(streams.size(), 0);
    for (const auto &s : streams)
    {
        trackers.emplace_back(sc.spline, sc.detector, sc.depthFilter, s.joint);
    }

    SurvivingSet surviving(sc.candidateCap);
    Replanner replanner(sc.planner, sc.uavGoal, strategy, sc.obstacles);
    UavPlant uav;
    uav.p = sc.uavStart;
    MinDistanceTracker dmin;

    const auto steps = static_cast<long>(std::ceil(tEnd / sc.simDt));
    const long replanEvery = std::max(1L, std::lround(sc.planner.replanPeriod / sc.simDt));
    bool releasedLogged = false;
    int planId = 0;

    for (long step = 0; step <= steps; ++step)
    {
        const double t = static_cast<double>(step) * sc.simDt;

        // Perception: every frame delivered by now.
        for (std::size_t si = 0; si < streams.size(); ++si)
        {
            auto &frames = streams[si].frames;
            while (cursors[si] < frames.size() && frames[cursors[si]].deliveryTime <= t + 1e-12)
            {
                const StreamFrame &f = frames[cursors[si]++];
                if (!f.valid)
                {
                    continue;
                }
                const auto outcome = trackers[si].processObservation(f.observation, cam);
                for (const auto &c : outcome.candidates)
                {
                    const BallisticTrajectory b = predictBallistic(c, sc.gravity);
                    if (b.p0.z() <= sc.zGround)
                    {
                        continue;
                    }
                    surviving.add(SurvivingTrajectory::make(b, sc.uncertainty, sc.zGround, c.joint));
                    ++res.candidateCount;
                    if (std::isnan(res.detectionTime))
                    {
                        res.detectionTime = t;
                        res.timeline.push_back({t, "release_candidate"});
                    }
                }
            }
        }
        surviving.prune(t);

        // Planning.
        const bool initial = step == 0;
        if (initial || (!opts.freezePlanner && step % replanEvery == 0))
        {
            BoundaryState state{uav.p, uav.v, uav.a};
            const bool wasDodging = replanner.dodgeMode();
            const Replanner::Cycle cyc = replanner.step(t, state, surviving);
            if (cyc.replanned)
            {
                ++res.replanCount;
                ++planId;
                if (opts.cycles)
                    opts.cycles->push_back({t, cyc.dodgeMode, cyc.threatCount, planId, cyc.publishedDodge, cyc.report});
                if (opts.plans)
                    opts.plans->push_back({planId, replanner.planStart(), *replanner.plan()});
                if (cyc.threatCount > 0 && cyc.publishedDodge == 0.0)
                {
                    res.clearPlanAchieved = true;
                }
                if (cyc.dodgeMode)
                {
                    ++res.dodgePlanCount;
                    if (std::isnan(res.firstPlanTime))
                    {
                        res.firstPlanTime = t;
                        res.timeline.push_back({t, "dodge_plan"});
                    }
                }
            }
            if (!cyc.report.history.empty() && !historyNonIncreasing(cyc.report.history))
            {
                res.descentMonotone = false;
            }
            if (wasDodging && !cyc.dodgeMode)
            {
                res.timeline.push_back({t, "dodge_end"});
            }
        }

        // UAV plant.
        const auto &plan = replanner.plan();
        if (plan)
        {
            const double local = t - replanner.planStart();
            uav.step(plan->evalClamped(local, 0), plan->evalClamped(local, 1), plan->evalClamped(local, 2),
                     sc.simDt, sc.trackKp, sc.trackKv, sc.attitudeLag, sc.planner.maxAcceleration);
        }

        // Scoring against every projectile in flight.
        double nearest = std::numeric_limits<double>::infinity();
        Vec3 nearestProj = Vec3::Constant(std::numeric_limits<double>::quiet_NaN());
        for (const auto &f : flights)
        {
            if (t < f.releaseTime || t > f.landingTime())
            {
                continue;
            }
            if (!releasedLogged)
            {
                res.timeline.push_back({f.releaseTime, "release"});
                releasedLogged = true;
            }
            const Vec3 pp = f.positionAt(t);
            const double d = (uav.p - pp).norm();
            if (d < nearest)
            {
                nearest = d;
                nearestProj = pp;
            }
        }
        if (std::isfinite(nearest))
        {
            dmin.add(nearest);
        }

        if (opts.log && step % std::max(1, opts.logEvery) == 0)
        {
            double nearestR = std::numeric_limits<double>::quiet_NaN();
            double best = std::numeric_limits<double>::infinity();
            for (const auto &m : surviving.members())
            {
                const double tau = t - m.releaseTime();
                if (tau < 0.0 || tau > m.survival)
                    continue;
                const double d = (uav.p - m.ballistic.position(tau)).norm();
                if (d < best)
                {
                    best = d;
                    nearestR = m.params.radius(tau);
                }
            }
            opts.log->push_back({t, uav.p, nearestProj, planId, surviving.size(), nearestR});
        }
    }

    res.timeline.push_back({lastLanding, "landing"});
    std::stable_sort(res.timeline.begin(), res.timeline.end(),
                     [](const TimelineEvent &a, const TimelineEvent &b) { return a.time < b.time; });
    res.dMin = dmin.value();
    res.success = isSuccess(res.dMin);
    res.goalReached = (uav.p - sc.uavGoal).norm() <= sc.goalTolerance;
    return res;
}


// Per-distance average speeds of the Low/Medium/High/Extreme bands.
struct SpeedBandTable
{
    static constexpr std::array<double, 4> distances{3.0, 4.0, 5.0, 6.0};
    static constexpr std::array<std::array<double, 4>, 4> averages{{{3.16, 4.08, 5.27, 6.10},
                                                                    {4.83, 6.19, 7.30, 8.27},
                                                                    {6.45, 7.42, 9.01, 10.18},
                                                                    {8.92, 10.42, 11.96, 13.29}}};

    // Linear in distance between table rows, clamped outside.
    static double average(double distance, int band)
    {
        require(band >= 0 && band < 4, "speed band: index must be in [0,3]");
        const auto b = static_cast<std::size_t>(band);
        if (distance <= distances.front())
            return averages.front()[b];
        if (distance >= distances.back())
            return averages.back()[b];
        std::size_t i = 0;
        while (distances[i + 1] < distance)
            ++i;
        const double f = (distance - distances[i]) / (distances[i + 1] - distances[i]);
        return (1.0 - f) * averages[i][b] + f * averages[i + 1][b];
    }
};

inline const char *bandName(int band)
{
    static constexpr std::array<const char *, 4> names{"low", "medium", "high", "extreme"};
    return band >= 0 && band < 4 ? names[static_cast<std::size_t>(band)] : "unknown";
}

inline int parseBand(const std::string &s)
{
    for (int b = 0; b < 4; ++b)
    {
        if (s == bandName(b))
            return b;
    }
    throw ValidationError("sweep.bands: unknown speed band '" + s + "'");
}

struct SweepAxes
{
    std::vector<double> distances{4.0};
    std::vector<double> anglesDeg{0.0};
    std::vector<int> bands{1};
    int trialsPerCell = 21;
    // Speeds are drawn uniformly in average +- halfWidth.
    double bandHalfWidth = 0.4;
    // Gaussian aim error (deg) in azimuth.
    double aimJitterDeg = 1.0;

    std::size_t cellCount() const { return distances.size() * anglesDeg.size() * bands.size(); }

    void validate() const
    {
        require(!distances.empty() && !anglesDeg.empty() && !bands.empty(), "sweep: every axis needs a value");
        require(trialsPerCell >= 1, "sweep.trials: must be >= 1");
        require(bandHalfWidth >= 0.0 && aimJitterDeg >= 0.0, "sweep: widths must be >= 0");
        for (double d : distances)
            require(d > 0.0, "sweep.distances: must be > 0");
        for (int b : bands)
            require(b >= 0 && b < 4, "sweep.bands: index must be in [0,3]");
    }
};

struct CellId
{
    std::size_t index = 0;
    double distance = 0.0;
    double angleDeg = 0.0;
    int band = 0;
};

inline CellId cellAt(const SweepAxes &axes, std::size_t index)
{
    const std::size_t nb = axes.bands.size();
    const std::size_t na = axes.anglesDeg.size();
    CellId c;
    c.index = index;
    c.band = axes.bands[index % nb];
    c.angleDeg = axes.anglesDeg[(index / nb) % na];
    c.distance = axes.distances[index / (nb * na)];
    return c;
}

// Scenario for one trial: the attacker stands at `distance` from the UAV
// start, `angle` off the camera axis, and throws with a speed drawn from the
// band.
inline ScenarioConfig makeTrialScenario(const ScenarioConfig &base, const SweepAxes &axes, const CellId &cell,
                                        std::uint64_t trial, double *speedOut = nullptr)
{
    ScenarioConfig sc = base;
    sc.seed = deriveSeed(base.seed, cell.index, trial);
    std::mt19937_64 rng(sc.seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::normal_distribution<double> unit(0.0, 1.0);
    const double avg = SpeedBandTable::average(cell.distance, cell.band);
    const double speed = std::max(0.0, avg + axes.bandHalfWidth * uni(rng));
    const double bearing = deg2rad(base.cameraHeadingDeg + cell.angleDeg);
    AttackerConfig a = base.attackers.empty() ? AttackerConfig{} : base.attackers.front();
    a.position = Vec3(base.uavStart.x() + cell.distance * std::cos(bearing),
                      base.uavStart.y() + cell.distance * std::sin(bearing), base.zGround);
    a.throwSpeed = speed;
    a.aimAtUav = true;
    a.throwAzimuthDeg = axes.aimJitterDeg * unit(rng);
    sc.attackers = {a};
    if (speedOut)
        *speedOut = speed;
    return sc;
}

struct TrialRecord
{
    CellId cell;
    std::uint64_t trial = 0;
    std::uint64_t seed = 0;
    double speed = 0.0;
    Strategy strategy = Strategy::Full;
    TrialResult result;
};

struct CellReport
{
    CellId cell;
    int trials = 0;
    int successes = 0;
    double successRate = 0.0;
    double meanDmin = 0.0;
};

struct MonteCarloReport
{
    Strategy strategy = Strategy::Full;
    int trials = 0;
    int successes = 0;
    double successRate = 0.0;
    double meanDmin = 0.0;
    std::vector<CellReport> cells;
    std::vector<TrialRecord> records;
};

// Runs fn(i) for i in [0, n) on `jobs` worker threads; each index is handled
// exactly once and results go to caller-owned slots.
inline void parallelFor(std::size_t n, int jobs, const std::function<void(std::size_t)> &fn)
{
    const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
    if (workers <= 1)
    {
        for (std::size_t i = 0; i < n; ++i)
            fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failureMutex;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
    {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++)
            {
                try
                {
                    fn(i);
                }
                catch (...)
                {
                    std::lock_guard<std::mutex> lock(failureMutex);
                    if (!failure)
                        failure = std::current_exception();
                }
            }
        });
    }
    for (auto &t : pool)
        t.join();
    if (failure)
        std::rethrow_exception(failure);
}

inline MonteCarloReport summarize(std::vector<TrialRecord> records, Strategy strategy, std::size_t cellCount)
{
    MonteCarloReport rep;
    rep.strategy = strategy;
    rep.cells.resize(cellCount);
    double sum = 0.0;
    for (const auto &r : records)
    {
        CellReport &c = rep.cells[r.cell.index];
        c.cell = r.cell;
        ++c.trials;
        c.successes += r.result.success ? 1 : 0;
        c.meanDmin += r.result.dMin;
        ++rep.trials;
        rep.successes += r.result.success ? 1 : 0;
        sum += r.result.dMin;
    }
    for (auto &c : rep.cells)
    {
        if (c.trials > 0)
        {
            c.successRate = 100.0 * c.successes / c.trials;
            c.meanDmin /= c.trials;
        }
    }
    if (rep.trials > 0)
    {
        rep.successRate = 100.0 * rep.successes / rep.trials;
        rep.meanDmin = sum / rep.trials;
    }
    rep.records = std::move(records);
    return rep;
}

inline MonteCarloReport runMonteCarlo(const ScenarioConfig &base, const SweepAxes &axes, Strategy strategy,
                                      int jobs = 1)
{
    base.validate();
    axes.validate();
    const std::size_t cells = axes.cellCount();
    const auto perCell = static_cast<std::size_t>(axes.trialsPerCell);
    std::vector<TrialRecord> records(cells * perCell);
    parallelFor(records.size(), jobs, [&](std::size_t i) {
        TrialRecord &r = records[i];
        r.cell = cellAt(axes, i / perCell);
        r.trial = i % perCell;
        r.strategy = strategy;
        const ScenarioConfig sc = makeTrialScenario(base, axes, r.cell, r.trial, &r.speed);
        r.seed = sc.seed;
        r.result = runTrial(sc, strategy);
    });
    return summarize(std::move(records), strategy, cells);
}

// Ground-truth-versus-envelope residuals of the detection-time prediction for
// one throw: (tau since predicted release, distance to predicted centre).
struct ContainmentSample
{
    double tau;
    double error;
};

struct CalibrationTrial
{
    bool detected = false;
    std::vector<ContainmentSample> samples;
};

struct CalibrationOptions
{
    double targetFraction = 0.99;
    int samplesPerFlight = 20;
    std::vector<double> gammaGrid;
    std::vector<double> betaGrid;
    std::vector<double> alphaGrid;

    static std::vector<double> range(double lo, double hi, double step)
    {
        std::vector<double> v;
        for (int i = 0; lo + i * step <= hi + 1e-12; ++i)
            v.push_back(lo + i * step);
        return v;
    }

    CalibrationOptions()
        : gammaGrid(range(0.0, 0.5, 0.025)), betaGrid(range(0.0, 2.0, 0.05)), alphaGrid(range(0.0, 4.0, 0.1))
    {
    }
};

// Perception-only pass over one scenario; the candidate with release time
// closest to the true release stands for the detection-time prediction.
inline CalibrationTrial containmentResiduals(const ScenarioConfig &sc, int samplesPerFlight)
{
    sc.validate();
    CalibrationTrial out;
    const CameraModel cam = sc.effectiveCamera();
    const ThrowSpec spec = throwSpec(sc.attackers.front(), sc);
    const GroundTruthFlight flight = simulateFlight(spec, sc.dragCoefficient, sc.zGround, sc.simDt, sc.gravity);
    ScenarioConfig single = sc;
    single.attackers = {sc.attackers.front()};
    const auto streams = generateKeypointStream(single, flight.landingTime() + 0.1);

    std::optional<ReleaseCandidate> best;
    for (const auto &stream : streams)
    {
        PaptTracker tracker(sc.spline, sc.detector, sc.depthFilter, stream.joint);
        for (const auto &f : stream.frames)
        {
            if (!f.valid)
                continue;
            for (const auto &c : tracker.processObservation(f.observation, cam).candidates)
            {
                if (!best || std::abs(c.releaseTime - spec.releaseTime) < std::abs(best->releaseTime - spec.releaseTime))
                    best = c;
            }
        }
    }
    if (!best)
        return out;
    const BallisticTrajectory b = predictBallistic(*best, sc.gravity);
    if (b.p0.z() <= sc.zGround)
        return out;
    const double ts = survivalDuration(b, sc.zGround);
    const double t0 = std::max(spec.releaseTime, best->releaseTime);
    const double t1 = std::min(flight.landingTime(), best->releaseTime + ts);
    out.detected = true;
    if (t1 <= t0)
        return out;
    for (int k = 0; k <= samplesPerFlight; ++k)
    {
        const double t = t0 + (t1 - t0) * k / samplesPerFlight;
        const double tau = t - best->releaseTime;
        out.samples.push_back({tau, (flight.positionAt(t) - b.position(tau)).norm()});
    }
    return out;
}

inline double containmentFraction(const std::vector<CalibrationTrial> &batch, const UncertaintyParams &p)
{
    std::size_t total = 0, inside = 0;
    for (const auto &tr : batch)
    {
        for (const auto &s : tr.samples)
        {
            ++total;
            inside += s.error <= p.radius(s.tau) ? 1 : 0;
        }
    }
    return total == 0 ? 1.0 : static_cast<double>(inside) / static_cast<double>(total);
}

struct CalibrationResult
{
    UncertaintyParams params;
    double achievedFraction = 0.0;
    bool targetReached = false;
    int trials = 0;
    int detected = 0;
    std::size_t pairs = 0;
};

inline std::vector<CalibrationTrial> calibrationBatch(const std::vector<ScenarioConfig> &scenarios,
                                                      int samplesPerFlight, int jobs = 1)
{
    std::vector<CalibrationTrial> batch(scenarios.size());
    parallelFor(scenarios.size(), jobs,
                [&](std::size_t i) { batch[i] = containmentResiduals(scenarios[i], samplesPerFlight); });
    return batch;
}

// Smallest grid point in (gamma, beta, alpha) lexicographic order reaching
// the target; otherwise the best fraction seen.
inline CalibrationResult calibrateFromBatch(const std::vector<CalibrationTrial> &batch, const CalibrationOptions &opt)
{
    require(opt.targetFraction > 0.0 && opt.targetFraction <= 1.0, "calibrate.target: must be in (0,1]");
    require(!opt.gammaGrid.empty() && !opt.betaGrid.empty() && !opt.alphaGrid.empty(), "calibrate: empty grid");
    CalibrationResult res;
    res.trials = static_cast<int>(batch.size());
    for (const auto &t : batch)
    {
        res.detected += t.detected ? 1 : 0;
        res.pairs += t.samples.size();
    }
    double bestFrac = -1.0;
    for (double g : opt.gammaGrid)
    {
        for (double b : opt.betaGrid)
        {
            for (double a : opt.alphaGrid)
            {
                const UncertaintyParams p{a, b, g};
                const double f = containmentFraction(batch, p);
                if (f >= opt.targetFraction)
                {
                    res.params = p;
                    res.achievedFraction = f;
                    res.targetReached = true;
                    return res;
                }
                if (f > bestFrac)
                {
                    bestFrac = f;
                    res.params = p;
                    res.achievedFraction = f;
                }
            }
        }
    }
    return res;
}

// Seeded batch of throws drawn like a Monte-Carlo sweep.
inline std::vector<ScenarioConfig> throwBatch(const ScenarioConfig &base, const SweepAxes &axes, std::uint64_t seed,
                                              int count)
{
    std::vector<ScenarioConfig> out;
    ScenarioConfig seeded = base;
    seeded.seed = seed;
    for (int i = 0; i < count; ++i)
    {
        const CellId cell = cellAt(axes, static_cast<std::size_t>(i) % axes.cellCount());
        out.push_back(makeTrialScenario(seeded, axes, cell, static_cast<std::uint64_t>(i)));
    }
    return out;
}

inline CalibrationResult calibrateUncertainty(const std::vector<ScenarioConfig> &scenarios,
                                              const CalibrationOptions &opt = {}, int jobs = 1)
{
    return calibrateFromBatch(calibrationBatch(scenarios, opt.samplesPerFlight, jobs), opt);
}

} // namespace dodge
