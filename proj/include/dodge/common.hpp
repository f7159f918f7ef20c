#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>
#include <string>

namespace dodge
{

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

inline constexpr double kDefaultGravity = 9.81;

// Thrown for contract violations on inputs (bad config, out-of-domain
// queries). Internal numerical faults use std::runtime_error.
class ValidationError : public std::invalid_argument
{
public:
    using std::invalid_argument::invalid_argument;
};

inline void require(bool cond, const std::string &what)
{
    if (!cond)
    {
        throw ValidationError(what);
    }
}

inline bool allFinite(const Vec3 &v)
{
    return std::isfinite(v.x()) && std::isfinite(v.y()) && std::isfinite(v.z());
}

inline Vec3 gravityVector(double g)
{
    return Vec3(0.0, 0.0, -g);
}

enum class JointId
{
    RightWrist = 0,
    LeftWrist = 1,
};

inline const char *jointName(JointId id)
{
    return id == JointId::RightWrist ? "right_wrist" : "left_wrist";
}

} // namespace dodge
