#pragma once

// Reference implementations used only by the tests. They share no code with
// the library beyond its plain data types.

#include "dodge/minco.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <random>

namespace oracle
{

using dodge::BoundaryState;
using dodge::Vec3;

// Minimizes the integrated squared jerk over piecewise quintics subject only
// to start/end states, waypoint positions and C2 joins, by solving the dense
// KKT system. Returns coefficients in the library's layout
// (row 6*i + n = t^n coefficient of segment i).
inline Eigen::MatrixXd denseMinJerk(const Eigen::Matrix<double, 3, Eigen::Dynamic> &q, const Eigen::VectorXd &T,
                                    const BoundaryState &start, const BoundaryState &end)
{
    // Solved in extended precision: the KKT system is poorly conditioned for
    // short segments.
    using Real = long double;
    using Mat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
    using Row = Eigen::Matrix<Real, 1, Eigen::Dynamic>;
    const int M = static_cast<int>(T.size());
    const int n = 6 * M;
    const int nc = 6 + (M - 1) + 3 * (M - 1);

    Mat H = Mat::Zero(n, n);
    for (int i = 0; i < M; ++i)
    {
        for (int a = 3; a < 6; ++a)
        {
            for (int b = 3; b < 6; ++b)
            {
                const Real ca = a * (a - 1) * (a - 2);
                const Real cb = b * (b - 1) * (b - 2);
                const int p = a + b - 5;
                H(6 * i + a, 6 * i + b) = 2 * ca * cb * std::pow(static_cast<Real>(T(i)), p) / p;
            }
        }
    }

    // Row of d^k/dt^k [1 t ... t^5] at t.
    auto basis = [](int k, Real t) {
        Row r = Row::Zero(6);
        for (int j = k; j < 6; ++j)
        {
            Real c = 1;
            for (int m = 0; m < k; ++m)
                c *= j - m;
            r(j) = c * std::pow(t, j - k);
        }
        return r;
    };

    Mat A = Mat::Zero(nc, n);
    Mat b = Mat::Zero(nc, 3);
    int row = 0;
    const Vec3 s[3] = {start.position, start.velocity, start.acceleration};
    const Vec3 e[3] = {end.position, end.velocity, end.acceleration};
    for (int k = 0; k < 3; ++k, ++row)
    {
        A.block(row, 0, 1, 6) = basis(k, 0);
        b.row(row) = s[k].transpose().cast<Real>();
    }
    for (int k = 0; k < 3; ++k, ++row)
    {
        A.block(row, 6 * (M - 1), 1, 6) = basis(k, T(M - 1));
        b.row(row) = e[k].transpose().cast<Real>();
    }
    for (int i = 0; i < M - 1; ++i)
    {
        A.block(row, 6 * i, 1, 6) = basis(0, T(i));
        b.row(row) = q.col(i).transpose().cast<Real>();
        ++row;
        for (int k = 0; k < 3; ++k, ++row)
        {
            A.block(row, 6 * i, 1, 6) = basis(k, T(i));
            A.block(row, 6 * (i + 1), 1, 6) = -basis(k, 0);
        }
    }

    Mat K = Mat::Zero(n + nc, n + nc);
    K.topLeftCorner(n, n) = H;
    K.topRightCorner(n, nc) = A.transpose();
    K.bottomLeftCorner(nc, n) = A;
    Mat rhs = Mat::Zero(n + nc, 3);
    rhs.bottomRows(nc) = b;
    const Mat sol = K.fullPivLu().solve(rhs);
    return sol.topRows(n).cast<double>();
}

// Drag-free position by hand: p0 + v0 t - (g/2) t^2 e_z.
inline Vec3 ballistic(const Vec3 &p0, const Vec3 &v0, double g, double t)
{
    return Vec3(p0.x() + v0.x() * t, p0.y() + v0.y() * t, p0.z() + v0.z() * t - 0.5 * g * t * t);
}

// Larger root of h + vz t - g t^2 / 2 = 0, textbook quadratic formula.
inline double fallTime(double h, double vz, double g)
{
    return (vz + std::sqrt(vz * vz + 2.0 * g * h)) / g;
}

} // namespace oracle
