// Acceptance run: one PASS/FAIL line per criterion with measured values.

#include "dodge/gradcheck.hpp"
#include "dodge/io.hpp"

#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <thread>

using namespace dodge;

namespace
{

using Clock = std::chrono::steady_clock;

int failures = 0;

double seconds(Clock::time_point since) { return std::chrono::duration<double>(Clock::now() - since).count(); }

void report(int id, bool pass, double elapsed, double limit, const std::string &detail)
{
    const bool inTime = limit <= 0.0 || elapsed < limit;
    const bool ok = pass && inTime;
    failures += ok ? 0 : 1;
    std::string timing = limit > 0.0 ? " time=" + std::to_string(elapsed).substr(0, 6) + "s (limit " +
                                           std::to_string(static_cast<int>(limit)) + "s)"
                                     : " time=" + std::to_string(elapsed).substr(0, 6) + "s";
    std::printf("%s criterion %d: %s%s\n", ok ? "PASS" : "FAIL", id, detail.c_str(), timing.c_str());
    std::fflush(stdout);
}

std::string fmt(const char *f, double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

int jobs() { return static_cast<int>(std::max(2u, std::thread::hardware_concurrency())); }

void gradients()
{
    const auto t0 = Clock::now();
    const GradientCheckSummary s = runGradientCheck(100, 2024);
    std::string detail = "max rel err";
    for (std::size_t k = 0; k < kGradientTermNames.size(); ++k)
        detail += std::string(" ") + kGradientTermNames[k] + "=" + fmt("%.2e", s.maxError[k]);
    report(1, s.passed(1e-5), seconds(t0), 10.0, detail + " (instances=100, tol 1e-5)");
}

void minco()
{
    const auto t0 = Clock::now();
    std::mt19937_64 rng(5150);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto vec = [&](double s) { return Vec3(s * u(rng), s * u(rng), s * u(rng)); };
    double coefErr = 0.0, residual = 0.0;
    for (int inst = 0; inst < 50; ++inst)
    {
        const int M = 1 + inst % 4;
        WaypointMatrix q(3, M - 1);
        Eigen::VectorXd T(M);
        for (int i = 0; i < M; ++i)
            T(i) = 1.0 + 0.9 * u(rng);
        for (int i = 0; i < M - 1; ++i)
            q.col(i) = vec(3.0);
        const BoundaryState a{vec(2.0), vec(1.0), vec(1.0)}, b{vec(2.0), vec(1.0), vec(1.0)};
        const auto tr = MincoTrajectory::construct(q, T, a, b);
        coefErr = std::max(coefErr, (tr.coefficients() - oracle::denseMinJerk(q, T, a, b)).cwiseAbs().maxCoeff());
        for (int k = 0; k < 3; ++k)
        {
            const Vec3 s0 = k == 0 ? a.position : k == 1 ? a.velocity : a.acceleration;
            const Vec3 s1 = k == 0 ? b.position : k == 1 ? b.velocity : b.acceleration;
            residual = std::max(residual, (tr.evalSegment(0, 0.0, k) - s0).norm());
            residual = std::max(residual, (tr.evalSegment(M - 1, T(M - 1), k) - s1).norm());
        }
        for (int i = 0; i + 1 < M; ++i)
        {
            residual = std::max(residual, (tr.evalSegment(i, T(i), 0) - q.col(i)).norm());
            for (int k = 0; k <= 4; ++k)
                residual = std::max(residual, (tr.evalSegment(i, T(i), k) - tr.evalSegment(i + 1, 0.0, k)).norm());
        }
    }
    const auto rest = MincoTrajectory::construct(WaypointMatrix(3, 0), Eigen::VectorXd::Constant(1, 1.0),
                                                 BoundaryState::rest(Vec3::Zero()),
                                                 BoundaryState::rest(Vec3::Ones()));
    const double quintic[6] = {0.0, 0.0, 0.0, 10.0, -15.0, 6.0};
    double quinticErr = 0.0;
    for (int n = 0; n < 6; ++n)
        for (int ax = 0; ax < 3; ++ax)
            quinticErr = std::max(quinticErr, std::abs(rest.coefficients()(n, ax) - quintic[n]));
    const bool pass = coefErr < 1e-8 && residual < 1e-9 && quinticErr < 1e-10;
    report(2, pass, seconds(t0), 5.0,
           "coef err=" + fmt("%.2e", coefErr) + " (tol 1e-8) residual=" + fmt("%.2e", residual) +
               " (tol 1e-9) quintic err=" + fmt("%.2e", quinticErr) + " (tol 1e-10)");
}

void ballistic()
{
    const auto t0 = Clock::now();
    const BallisticTrajectory b{0.0, Vec3(0.2, -0.1, 1.8), Vec3(6.0, 1.0, 4.0), kDefaultGravity};
    ProjectileState s{b.p0, b.v0};
    double rkErr = 0.0;
    for (int i = 1; i <= 1000; ++i)
    {
        s = stepGroundTruth(s, 0.002, 0.0);
        rkErr = std::max(rkErr, (s.position - b.position(i * 0.002)).norm());
    }
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-10.0, 10.0);
    double landing = 0.0;
    for (int i = 0; i < 1000; ++i)
    {
        const BallisticTrajectory r{0.0, Vec3(u(rng), u(rng), 0.05 + std::abs(u(rng))), Vec3(u(rng), u(rng), u(rng)),
                                    kDefaultGravity};
        landing = std::max(landing, std::abs(r.position(survivalDuration(r, 0.0)).z()));
    }
    const double drop = survivalDuration({0.0, Vec3(0.0, 0.0, 4.905), Vec3::Zero(), 9.81}, 0.0);
    const double up = survivalDuration({0.0, Vec3(0.0, 0.0, 1.5), Vec3(0.0, 0.0, 3.0), 9.81}, 0.0);
    const double formula = (3.0 + std::sqrt(9.0 + 29.43)) / 9.81;
    // The quoted 0.9385 s corresponds to g = 9.8.
    const double up98 = survivalDuration({0.0, Vec3(0.0, 0.0, 1.5), Vec3(0.0, 0.0, 3.0), 9.8}, 0.0);
    const bool pass = rkErr < 1e-9 && landing < 1e-9 && std::abs(drop - 1.0) < 1e-4 &&
                      std::abs(up - formula) < 1e-4 && std::abs(up98 - 0.9385) < 1e-4;
    report(3, pass, seconds(t0), 1.0,
           "rk4 vs closed form=" + fmt("%.2e", rkErr) + " (tol 1e-9) landing residual=" + fmt("%.2e", landing) +
               " drop T_s=" + fmt("%.6f", drop) + " v0z=3 T_s=" + fmt("%.5f", up) + " (formula " +
               fmt("%.5f", formula) + ") g=9.8 T_s=" + fmt("%.5f", up98) + " (quoted 0.9385)");
}

SweepAxes calibrationAxes()
{
    SweepAxes ax;
    ax.distances = {3.0, 4.0, 5.0, 6.0};
    ax.anglesDeg = {-30.0, 0.0, 30.0};
    ax.bands = {0, 1, 2, 3};
    return ax;
}

void containment()
{
    const auto t0 = Clock::now();
    const ScenarioConfig base;
    const SweepAxes ax = calibrationAxes();
    CalibrationOptions opt;
    opt.targetFraction = 0.99;
    const CalibrationResult cal = calibrateUncertainty(throwBatch(base, ax, 101, 200), opt, jobs());
    const auto held = calibrationBatch(throwBatch(base, ax, 202, 200), opt.samplesPerFlight, jobs());
    const double frac = containmentFraction(held, cal.params);
    int detected = 0;
    for (const auto &t : held)
        detected += t.detected ? 1 : 0;
    report(4, cal.targetReached && frac >= 0.99, seconds(t0), 120.0,
           "calibrated alpha=" + fmt("%.3f", cal.params.alpha) + " beta=" + fmt("%.3f", cal.params.beta) +
               " gamma=" + fmt("%.3f", cal.params.gamma) + " fit=" + fmt("%.4f", cal.achievedFraction) +
               " held-out containment=" + fmt("%.4f", frac) + " (>= 0.99, detected " + std::to_string(detected) +
               "/200)");
}

SweepAxes ablationAxes()
{
    SweepAxes ax;
    ax.distances = {3.0, 3.75, 4.5, 5.25, 6.0};
    ax.anglesDeg = {-30.0, 0.0, 30.0};
    ax.bands = {1, 2};
    ax.trialsPerCell = 1;
    return ax;
}

struct Ablation
{
    MonteCarloReport full, spatial, temporal;
};

Ablation ablation(int jobCount)
{
    const ScenarioConfig base;
    const SweepAxes ax = ablationAxes();
    return {runMonteCarlo(base, ax, Strategy::Full, jobCount), runMonteCarlo(base, ax, Strategy::NoSpatial, jobCount),
            runMonteCarlo(base, ax, Strategy::NoTemporal, jobCount)};
}

std::string ablationLines(const Ablation &a)
{
    return metricsJsonLines(a.full) + metricsJsonLines(a.spatial) + metricsJsonLines(a.temporal);
}

SweepAxes singleCell(double distance, int band)
{
    SweepAxes ax;
    ax.distances = {distance};
    ax.anglesDeg = {0.0};
    ax.bands = {band};
    ax.trialsPerCell = 21;
    return ax;
}

void detection()
{
    const auto t0 = Clock::now();
    int ok = 0, early = 0, late = 0, none = 0;
    for (int s = 0; s < 100; ++s)
    {
        ScenarioConfig sc;
        sc.seed = 1000 + static_cast<std::uint64_t>(s);
        sc.perceptionLatency = 0.0;
        AttackerConfig &a = sc.attackers.front();
        a.releaseTime = 1.0;
        a.throwSpeed = 4.0 + 4.0 * (s % 10) / 9.0;
        const ThrowSpec spec = throwSpec(a, sc);
        const ArmMotionModel arm(spec.releasePoint, spec.releaseVelocity, spec.releaseTime, a.arm);
        const double tStar = arm.thresholdCrossing(sc.detector.accelThreshold);
        const auto streams = generateKeypointStream(sc, a.releaseTime + 0.3);
        const CameraModel cam = sc.effectiveCamera();
        PaptTracker tracker(sc.spline, sc.detector, sc.depthFilter, JointId::RightWrist);
        double first = std::numeric_limits<double>::quiet_NaN();
        for (const auto &f : streams[0].frames)
        {
            if (!f.valid)
                continue;
            const auto out = tracker.processObservation(f.observation, cam);
            if (!out.candidates.empty())
            {
                first = out.candidates.front().releaseTime;
                break;
            }
        }
        if (std::isnan(first))
            ++none;
        else if (std::abs(first - tStar) <= sc.spline.evalGridDt + 1e-9)
            ++ok;
        else if (first < tStar)
            ++early;
        else
            ++late;
    }
    report(7, ok >= 95, seconds(t0), 30.0,
           "first candidate within 5 ms of t*: " + std::to_string(ok) + "/100 (>= 95) early=" + std::to_string(early) +
               " late=" + std::to_string(late) + " missed=" + std::to_string(none));
}

void roundTrip()
{
    const auto t0 = Clock::now();
    CameraModel cam = CameraModel::lookingAlong(Vec3(0.3, -0.2, 1.4), Vec3(1.0, 0.4, -0.2));
    cam.validate();
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    double worst = 0.0;
    int missing = 0;
    for (int i = 0; i < 100000; ++i)
    {
        const double z = cam.depthMin + (cam.depthMax - cam.depthMin) * u(rng);
        const Vec3 ray((u(rng) * cam.width - cam.cx) / cam.fx, (u(rng) * cam.height - cam.cy) / cam.fy, 1.0);
        const Vec3 p = cam.rotationWC * (z * ray) + cam.translationWC;
        const auto pr = project(p, cam);
        if (!pr)
        {
            ++missing;
            continue;
        }
        PixelObservation o;
        o.u = pr->u;
        o.v = pr->v;
        worst = std::max(worst, (backproject(o, pr->depth, cam).position - p).norm());
    }
    report(8, worst < 1e-9 && missing == 0, seconds(t0), 1.0,
           "max round-trip error=" + fmt("%.2e", worst) + " m over 1e5 points (tol 1e-9)");
}

} // namespace

int main()
{
    std::printf("acceptance: %d worker threads\n", jobs());
    gradients();
    minco();
    ballistic();
    containment();

    auto t0 = Clock::now();
    const Ablation ab = ablation(jobs());
    const double ablationTime = seconds(t0);
    const bool srOrdered =
        ab.full.successRate > ab.spatial.successRate && ab.spatial.successRate > ab.temporal.successRate;
    const bool dOrdered = ab.full.meanDmin > ab.spatial.meanDmin && ab.spatial.meanDmin > ab.temporal.meanDmin;
    report(5, srOrdered && dOrdered && ab.full.trials == 30, ablationTime, 300.0,
           "trials=" + std::to_string(ab.full.trials) + " SR full/no_spatial/no_temporal=" +
               fmt("%.2f", ab.full.successRate) + "/" + fmt("%.2f", ab.spatial.successRate) + "/" +
               fmt("%.2f", ab.temporal.successRate) + " mean d_min=" + fmt("%.3f", ab.full.meanDmin) + "/" +
               fmt("%.3f", ab.spatial.meanDmin) + "/" + fmt("%.3f", ab.temporal.meanDmin) + " m");

    t0 = Clock::now();
    const ScenarioConfig base;
    const MonteCarloReport medium = runMonteCarlo(base, singleCell(4.0, 1), Strategy::Full, jobs());
    const MonteCarloReport extreme = runMonteCarlo(base, singleCell(6.0, 3), Strategy::Full, jobs());
    report(6, medium.successRate >= 90.0 && extreme.successRate >= 60.0, seconds(t0), 300.0,
           "4 m/0 deg/medium SR=" + fmt("%.1f", medium.successRate) + "% (>= 90, mean d_min " +
               fmt("%.3f", medium.meanDmin) + ") 6 m/0 deg/extreme SR=" + fmt("%.1f", extreme.successRate) +
               "% (>= 60, mean d_min " + fmt("%.3f", extreme.meanDmin) + ")");

    detection();
    roundTrip();

    t0 = Clock::now();
    const std::string reference = ablationLines(ab);
    const std::string serial = ablationLines(ablation(1));
    const std::string parallel = ablationLines(ablation(jobs()));
    const auto lines = std::count(reference.begin(), reference.end(), '\n');
    report(9, serial == reference && parallel == reference, seconds(t0), 0.0,
           std::to_string(lines) + " metrics lines; serial rerun " + (serial == reference ? "identical" : "DIFFERS") +
               ", parallel rerun (" + std::to_string(jobs()) + " jobs) " +
               (parallel == reference ? "identical" : "DIFFERS"));

    t0 = Clock::now();
    int monotone = 0, successes = 0, clear = 0;
    for (const auto &r : medium.records)
    {
        monotone += r.result.descentMonotone ? 1 : 0;
        if (r.result.success)
        {
            ++successes;
            clear += r.result.clearPlanAchieved ? 1 : 0;
        }
    }
    const int n = static_cast<int>(medium.records.size());
    report(10, monotone == n && clear == successes, seconds(t0), 0.0,
           "trials with nonincreasing optimizer costs=" + std::to_string(monotone) + "/" + std::to_string(n) +
               " successful trials with a J_d = 0 plan=" + std::to_string(clear) + "/" + std::to_string(successes));

    std::printf("%s: %d criterion failure(s)\n", failures == 0 ? "ALL PASS" : "FAILURES", failures);
    return failures == 0 ? 0 : 1;
}
