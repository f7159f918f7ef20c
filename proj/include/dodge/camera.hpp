#pragma once

#include "dodge/common.hpp"

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace dodge
{

// Pinhole camera with a rigid camera-to-world transform. Camera frame is
// z forward, x right, y down.
struct CameraModel
{
    double fx = 390.0;
    double fy = 390.0;
    double cx = 320.0;
    double cy = 240.0;
    int width = 640;
    int height = 480;
    Mat3 rotationWC = Mat3::Identity();
    Vec3 translationWC = Vec3::Zero();
    double depthMin = 0.4;
    double depthMax = 6.0;

    void validate() const
    {
        require(fx > 0.0 && fy > 0.0, "camera.fx, camera.fy: must be > 0");
        require(width > 0 && height > 0, "camera.width, camera.height: must be > 0");
        require(cx >= 0.0 && cx < width && cy >= 0.0 && cy < height,
                "camera.cx, camera.cy: principal point outside the image");
        require(0.0 < depthMin && depthMin < depthMax, "camera.depth_min, camera.depth_max: need 0 < depth_min < depth_max");
        const double orthoErr = (rotationWC.transpose() * rotationWC - Mat3::Identity()).cwiseAbs().maxCoeff();
        require(orthoErr < 1e-9, "camera: rotation is not orthonormal");
        require(std::abs(rotationWC.determinant() - 1.0) < 1e-9, "camera: rotation determinant is not +1");
        require(allFinite(translationWC), "camera: translation not finite");
    }

    Mat3 intrinsics() const
    {
        Mat3 k;
        k << fx, 0.0, cx,
            0.0, fy, cy,
            0.0, 0.0, 1.0;
        return k;
    }

    bool inImage(double u, double v) const
    {
        return u >= 0.0 && u < width && v >= 0.0 && v < height;
    }

    // Camera at `position` looking along `forward` (world frame, z up).
    static CameraModel lookingAlong(const Vec3 &position, const Vec3 &forward)
    {
        CameraModel cam;
        const Vec3 zc = forward.normalized();
        Vec3 down(0.0, 0.0, -1.0);
        Vec3 xc = down.cross(zc);
        if (xc.norm() < 1e-9)
        {
            xc = Vec3(1.0, 0.0, 0.0);
        }
        xc.normalize();
        const Vec3 yc = zc.cross(xc);
        cam.rotationWC.col(0) = xc;
        cam.rotationWC.col(1) = yc;
        cam.rotationWC.col(2) = zc;
        cam.translationWC = position;
        return cam;
    }
};

struct PixelObservation
{
    double u = 0.0;
    double v = 0.0;
    // Row-major (2w+1)^2 samples; non-positive or non-finite entries are invalid.
    std::vector<double> depthPatch;
    double timestamp = 0.0;
    JointId joint = JointId::RightWrist;
};

inline constexpr double kInvalidDepth = std::numeric_limits<double>::quiet_NaN();

struct DepthFilterConfig
{
    int windowHalfSize = 2;
    double outlierK = 3.0;
    double minValidFraction = 0.5;
    double temporalJumpMax = 0.5;

    void validate() const
    {
        require(windowHalfSize >= 0, "depth_filter.window_half_size: must be >= 0");
        require(outlierK > 0.0, "depth_filter.outlier_k: must be > 0");
        require(minValidFraction > 0.0 && minValidFraction <= 1.0, "depth_filter.min_valid_fraction: must be in (0,1]");
        require(temporalJumpMax > 0.0, "depth_filter.temporal_jump_max: must be > 0");
    }

    std::size_t patchSize() const
    {
        const std::size_t side = static_cast<std::size_t>(2 * windowHalfSize + 1);
        return side * side;
    }
};

struct Keypoint3D
{
    Vec3 position = Vec3::Zero();
    double timestamp = 0.0;
    JointId joint = JointId::RightWrist;
};

enum class DepthRejection
{
    AllInvalid,
    TooFewSurvivors,
    TemporalJump,
};

inline const char *rejectionName(DepthRejection r)
{
    switch (r)
    {
    case DepthRejection::AllInvalid:
        return "all-invalid";
    case DepthRejection::TooFewSurvivors:
        return "too-few-survivors";
    case DepthRejection::TemporalJump:
        return "temporal-jump";
    }
    return "unknown";
}

struct DepthResult
{
    std::optional<double> depth;
    DepthRejection reason = DepthRejection::AllInvalid;

    bool accepted() const { return depth.has_value(); }
};

struct AcceptedDepth
{
    double depth = 0.0;
    double timestamp = 0.0;
};

namespace detail
{

inline double medianOf(std::vector<double> v)
{
    const std::size_t n = v.size();
    const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
    std::nth_element(v.begin(), mid, v.end());
    const double hi = *mid;
    if (n % 2 == 1)
    {
        return hi;
    }
    const double lo = *std::max_element(v.begin(), mid);
    return 0.5 * (lo + hi);
}

} // namespace detail

// Robust depth for one keypoint: median/MAD outlier rejection over the
// patch, mean of the survivors, then a jump check against the previous
// accepted depth.
inline DepthResult filterDepth(const PixelObservation &obs,
                               const DepthFilterConfig &cfg,
                               const std::optional<AcceptedDepth> &prev = std::nullopt)
{
    require(obs.depthPatch.size() == cfg.patchSize(), "filter_depth: depth patch has wrong size");

    std::vector<double> valid;
    valid.reserve(obs.depthPatch.size());
    for (double d : obs.depthPatch)
    {
        if (std::isfinite(d) && d > 0.0)
        {
            valid.push_back(d);
        }
    }
    if (valid.empty())
    {
        return {std::nullopt, DepthRejection::AllInvalid};
    }

    const double med = detail::medianOf(valid);
    std::vector<double> dev(valid.size());
    std::transform(valid.begin(), valid.end(), dev.begin(), [med](double d) { return std::abs(d - med); });
    const double mad = detail::medianOf(dev);

    std::vector<double> survivors;
    survivors.reserve(valid.size());
    for (double d : valid)
    {
        if (std::abs(d - med) <= cfg.outlierK * mad)
        {
            survivors.push_back(d);
        }
    }
    const double fraction = static_cast<double>(survivors.size()) / static_cast<double>(cfg.patchSize());
    if (survivors.empty() || fraction < cfg.minValidFraction)
    {
        return {std::nullopt, DepthRejection::TooFewSurvivors};
    }

    // Sorted summation keeps the result independent of sample order.
    std::sort(survivors.begin(), survivors.end());
    double sum = 0.0;
    for (double d : survivors)
    {
        sum += d;
    }
    const double depth = std::clamp(sum / static_cast<double>(survivors.size()), survivors.front(), survivors.back());

    if (prev && std::abs(depth - prev->depth) > cfg.temporalJumpMax)
    {
        return {std::nullopt, DepthRejection::TemporalJump};
    }
    return {depth, DepthRejection::AllInvalid};
}

inline Keypoint3D backproject(const PixelObservation &obs, double depth, const CameraModel &cam)
{
    if (!(depth >= cam.depthMin && depth <= cam.depthMax))
    {
        throw std::out_of_range("backproject: depth outside camera range");
    }
    const Vec3 ray((obs.u - cam.cx) / cam.fx, (obs.v - cam.cy) / cam.fy, 1.0);
    Keypoint3D kp;
    kp.position = cam.rotationWC * (depth * ray) + cam.translationWC;
    kp.timestamp = obs.timestamp;
    kp.joint = obs.joint;
    return kp;
}

struct Projection
{
    double u = 0.0;
    double v = 0.0;
    double depth = 0.0;
};

// std::nullopt when the point is at or behind the image plane.
inline std::optional<Projection> project(const Vec3 &world, const CameraModel &cam)
{
    const Vec3 pc = cam.rotationWC.transpose() * (world - cam.translationWC);
    if (!(pc.z() > 0.0))
    {
        return std::nullopt;
    }
    return Projection{cam.fx * pc.x() / pc.z() + cam.cx, cam.fy * pc.y() / pc.z() + cam.cy, pc.z()};
}

} // namespace dodge
