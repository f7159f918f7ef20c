#include "dodge/sim.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace dodge;

namespace
{

ScenarioConfig quietScenario()
{
    ScenarioConfig sc;
    sc.noisePixels = 0.0;
    sc.noiseDepth = 0.0;
    sc.outlierProbability = 0.0;
    sc.perceptionLatency = 0.0;
    return sc;
}

} // namespace

TEST(KeypointStream, FrameCountAndLatency)
{
    ScenarioConfig sc;
    sc.frameRate = 30.0;
    sc.perceptionLatency = 0.04;
    const auto streams = generateKeypointStream(sc, 2.0);
    ASSERT_EQ(streams.size(), 2u);
    for (const auto &s : streams)
    {
        ASSERT_EQ(s.frames.size(), 60u);
        for (std::size_t i = 0; i < s.frames.size(); ++i)
        {
            EXPECT_DOUBLE_EQ(s.frames[i].observation.timestamp, static_cast<double>(i) / 30.0);
            EXPECT_DOUBLE_EQ(s.frames[i].deliveryTime, s.frames[i].observation.timestamp + 0.04);
        }
    }
}

TEST(KeypointStream, StaticWristRoundTrip)
{
    const ScenarioConfig sc = quietScenario();
    const auto streams = generateKeypointStream(sc, 1.0);
    const CameraModel cam = sc.effectiveCamera();
    const AttackerConfig &a = sc.attackers.front();
    // The idle wrist hangs 0.9 m up and 0.25 m to the attacker's side.
    const Vec3 toUav = (sc.uavStart - a.position).normalized();
    const Vec3 expected = a.position + Vec3(0.0, 0.0, 0.9) + 0.25 * Vec3(-toUav.y(), toUav.x(), 0.0).normalized();
    const auto &left = streams[1];
    ASSERT_EQ(left.joint, JointId::LeftWrist);
    int checked = 0;
    for (const auto &f : left.frames)
    {
        ASSERT_TRUE(f.valid);
        const auto d = filterDepth(f.observation, sc.depthFilter);
        ASSERT_TRUE(d.accepted());
        EXPECT_LT((backproject(f.observation, *d.depth, cam).position - expected).norm(), 1e-6);
        ++checked;
    }
    EXPECT_EQ(checked, 60);
}

TEST(KeypointStream, VelocityAtDetectionTracksWrist)
{
    for (std::uint64_t seed : {1u, 2u, 3u})
    {
        ScenarioConfig sc;
        sc.seed = seed;
        AttackerConfig &a = sc.attackers.front();
        a.aimAtUav = false;
        a.throwSpeed = std::sqrt(45.0);
        a.throwElevationDeg = std::atan2(3.0, 6.0) * 180.0 / std::numbers::pi;
        a.throwAzimuthDeg = 180.0;
        const ThrowSpec spec = throwSpec(a, sc);
        ASSERT_LT((spec.releaseVelocity - Vec3(-6.0, 0.0, 3.0)).norm(), 1e-12);
        const ArmMotionModel arm(spec.releasePoint, spec.releaseVelocity, spec.releaseTime, a.arm);
        EXPECT_LT((arm.state(spec.releaseTime).velocity - spec.releaseVelocity).norm(), 1e-6);

        const auto streams = generateKeypointStream(sc, 1.5);
        const CameraModel cam = sc.effectiveCamera();
        PaptTracker tracker(sc.spline, sc.detector, sc.depthFilter, streams[0].joint);
        std::optional<ReleaseCandidate> first;
        for (const auto &f : streams[0].frames)
        {
            if (!f.valid || first)
                continue;
            const auto out = tracker.processObservation(f.observation, cam);
            if (!out.candidates.empty())
                first = out.candidates.front();
        }
        ASSERT_TRUE(first.has_value());
        EXPECT_LT((first->velocity - arm.state(first->releaseTime).velocity).norm(), 0.2);
    }
}

TEST(KeypointStream, OneStreamPerWristPerAttacker)
{
    ScenarioConfig sc;
    AttackerConfig second = sc.attackers.front();
    second.position = Vec3(3.5, 1.5, 0.0);
    second.releaseTime = 1.3;
    sc.attackers.push_back(second);
    const auto streams = generateKeypointStream(sc, 1.0);
    ASSERT_EQ(streams.size(), 4u);
    EXPECT_EQ(streams[2].attacker, 1);
    EXPECT_EQ(streams[3].joint, JointId::LeftWrist);
}

TEST(UavPlant, CommandSaturatesAtMaxAcceleration)
{
    UavPlant uav;
    const double aMax = 20.0;
    for (int i = 0; i < 500; ++i)
    {
        uav.step(Vec3(50.0, -30.0, 10.0), Vec3::Zero(), Vec3(100.0, 0.0, 0.0), 0.002, 30.0, 12.0, 0.02, aMax);
        EXPECT_LE(uav.a.norm(), aMax * (1.0 + 1e-12));
    }
}

TEST(MinDistance, ParabolicRefinementHitsVertex)
{
    MinDistanceTracker t;
    for (double x = -1.0; x <= 1.0 + 1e-9; x += 0.1)
        t.add(0.7 + (x - 0.03) * (x - 0.03));
    EXPECT_NEAR(t.value(), 0.7, 1e-12);
}

TEST(Trial, CollisionCriterionIsExact)
{
    EXPECT_TRUE(isSuccess(0.4));
    EXPECT_FALSE(isSuccess(std::nextafter(0.4, 0.0)));
}

TEST(Trial, StillProjectileNeverThreatens)
{
    ScenarioConfig sc;
    sc.attackers.front().throwSpeed = 0.0;
    const TrialResult r = runTrial(sc, Strategy::Full);
    // The ball drops from the release point 0.6 m in front of a 4 m attacker.
    EXPECT_TRUE(r.success);
    EXPECT_NEAR(r.dMin, 3.4, 0.02);
    EXPECT_EQ(r.success, isSuccess(r.dMin));
}

TEST(Trial, DefaultThrowDodgedAndFrozenPlannerHit)
{
    const ScenarioConfig sc;
    const TrialResult live = runTrial(sc, Strategy::Full);
    EXPECT_TRUE(live.success) << live.dMin;
    EXPECT_TRUE(live.clearPlanAchieved);
    EXPECT_TRUE(live.descentMonotone);
    EXPECT_LE(live.releaseTime, live.landingTime);
    EXPECT_GT(live.detectionTime, 0.0);
    EXPECT_GE(live.firstPlanTime, live.detectionTime);

    TrialOptions frozen;
    frozen.freezePlanner = true;
    const TrialResult still = runTrial(sc, Strategy::Full, frozen);
    EXPECT_FALSE(still.success) << still.dMin;
    EXPECT_EQ(still.success, isSuccess(still.dMin));
}

TEST(Trial, DeterministicGivenSeed)
{
    ScenarioConfig sc;
    sc.seed = 42;
    const TrialResult a = runTrial(sc, Strategy::Full);
    const TrialResult b = runTrial(sc, Strategy::Full);
    EXPECT_EQ(a.dMin, b.dMin);
    EXPECT_EQ(a.detectionTime, b.detectionTime);
    EXPECT_EQ(a.replanCount, b.replanCount);
    ASSERT_EQ(a.timeline.size(), b.timeline.size());
    for (std::size_t i = 0; i < a.timeline.size(); ++i)
    {
        EXPECT_EQ(a.timeline[i].time, b.timeline[i].time);
        EXPECT_EQ(a.timeline[i].tag, b.timeline[i].tag);
    }
}

TEST(Trial, ReplayReproducesGeneratedRun)
{
    const ScenarioConfig sc;
    const auto streams = generateKeypointStream(sc, 3.0);
    TrialOptions opts;
    opts.replay = &streams;
    const TrialResult replayed = runTrial(sc, Strategy::Full, opts);
    const TrialResult generated = runTrial(sc, Strategy::Full);
    EXPECT_EQ(replayed.dMin, generated.dMin);
}

TEST(Trial, InvalidScenarioRejectedUpFront)
{
    ScenarioConfig sc;
    sc.frameRate = 0.0;
    EXPECT_THROW(runTrial(sc, Strategy::Full), ValidationError);
    sc = ScenarioConfig{};
    sc.attackers.front().throwSpeed = -1.0;
    EXPECT_THROW(runTrial(sc, Strategy::Full), ValidationError);
}

TEST(MonteCarlo, CellEnumerationCoversGridOnce)
{
    SweepAxes ax;
    ax.distances = {3.0, 4.0, 5.0};
    ax.anglesDeg = {-30.0, 0.0, 30.0};
    ax.bands = {0, 2};
    ASSERT_EQ(ax.cellCount(), 18u);
    std::set<std::tuple<double, double, int>> seen;
    for (std::size_t i = 0; i < ax.cellCount(); ++i)
    {
        const CellId c = cellAt(ax, i);
        EXPECT_EQ(c.index, i);
        seen.insert({c.distance, c.angleDeg, c.band});
    }
    EXPECT_EQ(seen.size(), 18u);
}

TEST(MonteCarlo, SeedsDistinctAndReproducible)
{
    std::set<std::uint64_t> seeds;
    for (std::uint64_t cell = 0; cell < 20; ++cell)
        for (std::uint64_t trial = 0; trial < 50; ++trial)
            seeds.insert(deriveSeed(7, cell, trial));
    EXPECT_EQ(seeds.size(), 1000u);
    EXPECT_EQ(deriveSeed(7, 3, 4), deriveSeed(7, 3, 4));
    EXPECT_NE(deriveSeed(7, 3, 4), deriveSeed(8, 3, 4));
}

TEST(MonteCarlo, SpeedBandsInterpolateBetweenRows)
{
    EXPECT_DOUBLE_EQ(SpeedBandTable::average(4.0, 1), 6.19);
    EXPECT_DOUBLE_EQ(SpeedBandTable::average(6.0, 3), 13.29);
    EXPECT_NEAR(SpeedBandTable::average(4.5, 1), 0.5 * (6.19 + 7.42), 1e-12);
    EXPECT_DOUBLE_EQ(SpeedBandTable::average(2.0, 3), 6.10);
    EXPECT_DOUBLE_EQ(SpeedBandTable::average(7.0, 0), 8.92);
    EXPECT_EQ(parseBand("extreme"), 3);
    EXPECT_THROW(parseBand("warp"), ValidationError);
}

TEST(MonteCarlo, SummaryFormula)
{
    std::vector<TrialRecord> recs(4);
    const double d[4] = {0.1, 0.5, 0.45, 0.3};
    for (int i = 0; i < 4; ++i)
    {
        recs[i].cell.index = static_cast<std::size_t>(i % 2);
        recs[i].result.dMin = d[i];
        recs[i].result.success = isSuccess(d[i]);
    }
    const MonteCarloReport r = summarize(recs, Strategy::Full, 2);
    EXPECT_EQ(r.trials, 4);
    EXPECT_DOUBLE_EQ(r.successRate, 100.0 * 2 / 4);
    EXPECT_DOUBLE_EQ(r.meanDmin, (0.1 + 0.5 + 0.45 + 0.3) / 4);
    EXPECT_DOUBLE_EQ(r.cells[0].successRate, 50.0);
    EXPECT_DOUBLE_EQ(r.cells[1].meanDmin, 0.4);
}

TEST(MonteCarlo, ParallelMatchesSerial)
{
    ScenarioConfig sc;
    SweepAxes ax;
    ax.distances = {4.0, 5.0};
    ax.trialsPerCell = 2;
    const MonteCarloReport a = runMonteCarlo(sc, ax, Strategy::Full, 1);
    const MonteCarloReport b = runMonteCarlo(sc, ax, Strategy::Full, 3);
    ASSERT_EQ(a.records.size(), 4u);
    ASSERT_EQ(b.records.size(), 4u);
    for (std::size_t i = 0; i < a.records.size(); ++i)
    {
        EXPECT_EQ(a.records[i].seed, b.records[i].seed);
        EXPECT_EQ(a.records[i].result.dMin, b.records[i].result.dMin);
        EXPECT_EQ(a.records[i].result.success, isSuccess(a.records[i].result.dMin));
    }
    EXPECT_DOUBLE_EQ(a.successRate, 100.0 * a.successes / a.trials);
}

TEST(Calibration, ExactPredictionNeedsOnlyTheFloor)
{
    std::vector<CalibrationTrial> batch(5);
    for (auto &t : batch)
    {
        t.detected = true;
        for (int k = 0; k <= 10; ++k)
            t.samples.push_back({0.1 * k, 0.0});
    }
    const CalibrationOptions opt;
    const CalibrationResult r = calibrateFromBatch(batch, opt);
    EXPECT_TRUE(r.targetReached);
    EXPECT_EQ(r.params.gamma, opt.gammaGrid.front());
    EXPECT_EQ(r.params.beta, opt.betaGrid.front());
    EXPECT_EQ(r.params.alpha, opt.alphaGrid.front());
}

TEST(Calibration, UnreachableTargetReportsBestFraction)
{
    std::vector<CalibrationTrial> batch(1);
    batch[0].samples = {{0.1, 0.01}, {0.2, 100.0}};
    const CalibrationResult r = calibrateFromBatch(batch, CalibrationOptions{});
    EXPECT_FALSE(r.targetReached);
    EXPECT_DOUBLE_EQ(r.achievedFraction, 0.5);
}

TEST(Calibration, SelfValidatesAndGrowsWithDrag)
{
    SweepAxes ax;
    ax.distances = {3.0, 4.0, 5.0, 6.0};
    ax.anglesDeg = {-30.0, 0.0, 30.0};
    ax.bands = {0, 1, 2, 3};
    double previousAlpha = -1.0;
    for (double cd : {0.0, 0.02})
    {
        ScenarioConfig sc;
        sc.dragCoefficient = cd;
        const CalibrationOptions opt;
        const auto batch = calibrationBatch(throwBatch(sc, ax, 7, 24), opt.samplesPerFlight);
        const CalibrationResult r = calibrateFromBatch(batch, opt);
        ASSERT_TRUE(r.targetReached);
        EXPECT_GE(containmentFraction(batch, r.params), 0.99);
        EXPECT_GE(r.params.alpha, previousAlpha);
        previousAlpha = r.params.alpha;
    }
}
