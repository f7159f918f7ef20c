#include "dodge/camera.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace dodge;

namespace
{

PixelObservation patchObs(std::vector<double> patch)
{
    PixelObservation o;
    o.u = 320.0;
    o.v = 240.0;
    o.depthPatch = std::move(patch);
    return o;
}

CameraModel tiltedCamera()
{
    CameraModel cam = CameraModel::lookingAlong(Vec3(0.3, -0.2, 1.4), Vec3(1.0, 0.4, -0.2));
    cam.validate();
    return cam;
}

} // namespace

TEST(Camera, ProjectBackprojectRoundTrip)
{
    const CameraModel cam = tiltedCamera();
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 2000; ++i)
    {
        const double z = cam.depthMin + (cam.depthMax - cam.depthMin) * u(rng);
        const Vec3 ray((u(rng) * cam.width - cam.cx) / cam.fx, (u(rng) * cam.height - cam.cy) / cam.fy, 1.0);
        const Vec3 p = cam.rotationWC * (z * ray) + cam.translationWC;
        const auto pr = project(p, cam);
        ASSERT_TRUE(pr.has_value());
        PixelObservation o;
        o.u = pr->u;
        o.v = pr->v;
        EXPECT_LT((backproject(o, pr->depth, cam).position - p).norm(), 1e-9);
    }
}

TEST(Camera, PrincipalPointBackprojectsOntoOpticalAxis)
{
    CameraModel cam;
    PixelObservation o;
    o.u = cam.cx;
    o.v = cam.cy;
    const Vec3 p = backproject(o, 2.5, cam).position;
    EXPECT_NEAR(p.x(), 0.0, 1e-15);
    EXPECT_NEAR(p.y(), 0.0, 1e-15);
    EXPECT_NEAR(p.z(), 2.5, 1e-15);
}

TEST(Camera, PointBehindCameraHasNoProjection)
{
    CameraModel cam;
    EXPECT_FALSE(project(Vec3(0.0, 0.0, -1.0), cam).has_value());
    EXPECT_FALSE(project(Vec3(0.5, 0.5, 0.0), cam).has_value());
}

TEST(Camera, BackprojectRejectsDepthOutsideRange)
{
    CameraModel cam;
    PixelObservation o;
    EXPECT_THROW(backproject(o, 0.1, cam), std::out_of_range);
    EXPECT_THROW(backproject(o, 7.0, cam), std::out_of_range);
}

TEST(Camera, ValidationCatchesBadIntrinsicsAndRotation)
{
    CameraModel cam;
    cam.fx = 0.0;
    EXPECT_THROW(cam.validate(), ValidationError);
    cam = CameraModel{};
    cam.rotationWC(0, 0) = -1.0;
    EXPECT_THROW(cam.validate(), ValidationError);
    cam = CameraModel{};
    cam.depthMin = 3.0;
    cam.depthMax = 2.0;
    EXPECT_THROW(cam.validate(), ValidationError);
}

TEST(DepthFilter, MedianMadByHand)
{
    // Valid: 2.0 2.12 1.9 2.0 2.05 1.95 5.0 2.0 -> median 2.0,
    // |dev| sorted 0 0 0 .05 .05 .1 .12 3 -> MAD 0.05, cut 0.15 drops 5.0,
    // mean of the seven survivors = 14.02 / 7.
    DepthFilterConfig cfg;
    cfg.windowHalfSize = 1;
    const auto r = filterDepth(patchObs({2.0, 2.12, 1.9, 2.0, 2.05, 1.95, 5.0, kInvalidDepth, 2.0}), cfg);
    ASSERT_TRUE(r.accepted());
    EXPECT_NEAR(*r.depth, 14.02 / 7.0, 1e-12);
}

TEST(DepthFilter, RejectionReasons)
{
    DepthFilterConfig cfg;
    cfg.windowHalfSize = 1;
    const double n = kInvalidDepth;
    EXPECT_EQ(filterDepth(patchObs({n, n, n, n, -1.0, 0.0, n, n, n}), cfg).reason, DepthRejection::AllInvalid);
    const auto few = filterDepth(patchObs({2.0, 2.0, 2.0, 2.0, n, n, n, n, n}), cfg);
    EXPECT_FALSE(few.accepted());
    EXPECT_EQ(few.reason, DepthRejection::TooFewSurvivors);
    const auto jump = filterDepth(patchObs(std::vector<double>(9, 2.0)), cfg, AcceptedDepth{1.0, 0.0});
    EXPECT_FALSE(jump.accepted());
    EXPECT_EQ(jump.reason, DepthRejection::TemporalJump);
    EXPECT_THROW(filterDepth(patchObs({2.0, 2.0}), cfg), ValidationError);
}

TEST(DepthFilter, ShrinkingJumpLimitNeverAccepts)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> noise(0.0, 0.2);
    DepthFilterConfig loose;
    loose.windowHalfSize = 1;
    loose.temporalJumpMax = 0.5;
    DepthFilterConfig tight = loose;
    tight.temporalJumpMax = 0.2;
    for (int i = 0; i < 500; ++i)
    {
        std::vector<double> p(9);
        for (double &d : p)
            d = 2.0 + noise(rng);
        const AcceptedDepth prev{2.0 + 3.0 * noise(rng), 0.0};
        if (!filterDepth(patchObs(p), loose, prev).accepted())
        {
            EXPECT_FALSE(filterDepth(patchObs(p), tight, prev).accepted());
        }
    }
}

TEST(DepthFilter, ResultIndependentOfPatchOrder)
{
    DepthFilterConfig cfg;
    std::vector<double> p(cfg.patchSize());
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(1.9, 2.1);
    for (double &d : p)
        d = u(rng);
    const double a = *filterDepth(patchObs(p), cfg).depth;
    std::shuffle(p.begin(), p.end(), rng);
    EXPECT_EQ(a, *filterDepth(patchObs(p), cfg).depth);
}
