#pragma once

#include "dodge/banded.hpp"
#include "dodge/common.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <stdexcept>

namespace dodge
{

struct BoundaryState
{
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    Vec3 acceleration = Vec3::Zero();

    bool finite() const { return allFinite(position) && allFinite(velocity) && allFinite(acceleration); }

    static BoundaryState rest(const Vec3 &p) { return {p, Vec3::Zero(), Vec3::Zero()}; }
};

// Coefficient layout: row 6*i + n holds the t^n coefficient (3-vector) of
// segment i in segment-local time.
using CoefficientMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3>;
using WaypointMatrix = Eigen::Matrix<double, 3, Eigen::Dynamic>;

namespace detail
{

// d^order/dt^order of t^n, evaluated at t.
inline double monomialDerivative(int n, int order, double t)
{
    if (order > n)
    {
        return 0.0;
    }
    double coeff = 1.0;
    for (int k = 0; k < order; ++k)
    {
        coeff *= static_cast<double>(n - k);
    }
    return coeff * std::pow(t, n - order);
}

} // namespace detail

// Minimum-jerk piecewise-quintic trajectory (MINCO, s = 3) determined by
// intermediate waypoints and segment durations. Immutable after
// construction; keeps the factorized system for gradient propagation.
class MincoTrajectory
{
public:
    MincoTrajectory() = default;

    static MincoTrajectory construct(const WaypointMatrix &waypoints,
                                     const Eigen::VectorXd &durations,
                                     const BoundaryState &start,
                                     const BoundaryState &end)
    {
        const int M = static_cast<int>(durations.size());
        require(M >= 1, "minco: need at least one segment");
        require(waypoints.cols() == M - 1, "minco: waypoint count must be segment count - 1");
        for (int i = 0; i < M; ++i)
        {
            require(std::isfinite(durations(i)) && durations(i) > 0.0, "minco: durations must be positive");
        }
        require(waypoints.allFinite() && start.finite() && end.finite(), "minco: non-finite inputs");

        MincoTrajectory traj;
        traj.durations_ = durations;
        traj.waypoints_ = waypoints;
        traj.start_ = start;
        traj.end_ = end;
        traj.system_ = BandedSystem(6 * M, 6, 6);
        BandedSystem &A = traj.system_;
        CoefficientMatrix b = CoefficientMatrix::Zero(6 * M, 3);

        A(0, 0) = 1.0;
        A(1, 1) = 1.0;
        A(2, 2) = 2.0;
        b.row(0) = start.position.transpose();
        b.row(1) = start.velocity.transpose();
        b.row(2) = start.acceleration.transpose();

        for (int i = 0; i < M - 1; ++i)
        {
            const double T = durations(i);
            const int r = 6 * i;
            const double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
            // jerk and snap continuity
            A(r + 3, r + 3) = 6.0;
            A(r + 3, r + 4) = 24.0 * T;
            A(r + 3, r + 5) = 60.0 * T2;
            A(r + 3, r + 9) = -6.0;
            A(r + 4, r + 4) = 24.0;
            A(r + 4, r + 5) = 120.0 * T;
            A(r + 4, r + 10) = -24.0;
            // waypoint
            A(r + 5, r) = 1.0;
            A(r + 5, r + 1) = T;
            A(r + 5, r + 2) = T2;
            A(r + 5, r + 3) = T3;
            A(r + 5, r + 4) = T4;
            A(r + 5, r + 5) = T5;
            // position, velocity, acceleration continuity
            A(r + 6, r) = 1.0;
            A(r + 6, r + 1) = T;
            A(r + 6, r + 2) = T2;
            A(r + 6, r + 3) = T3;
            A(r + 6, r + 4) = T4;
            A(r + 6, r + 5) = T5;
            A(r + 6, r + 6) = -1.0;
            A(r + 7, r + 1) = 1.0;
            A(r + 7, r + 2) = 2.0 * T;
            A(r + 7, r + 3) = 3.0 * T2;
            A(r + 7, r + 4) = 4.0 * T3;
            A(r + 7, r + 5) = 5.0 * T4;
            A(r + 7, r + 7) = -1.0;
            A(r + 8, r + 2) = 2.0;
            A(r + 8, r + 3) = 6.0 * T;
            A(r + 8, r + 4) = 12.0 * T2;
            A(r + 8, r + 5) = 20.0 * T3;
            A(r + 8, r + 8) = -2.0;
            b.row(r + 5) = waypoints.col(i).transpose();
        }

        {
            const double T = durations(M - 1);
            const int r = 6 * (M - 1);
            const double T2 = T * T, T3 = T2 * T, T4 = T3 * T, T5 = T4 * T;
            A(r + 3, r) = 1.0;
            A(r + 3, r + 1) = T;
            A(r + 3, r + 2) = T2;
            A(r + 3, r + 3) = T3;
            A(r + 3, r + 4) = T4;
            A(r + 3, r + 5) = T5;
            A(r + 4, r + 1) = 1.0;
            A(r + 4, r + 2) = 2.0 * T;
            A(r + 4, r + 3) = 3.0 * T2;
            A(r + 4, r + 4) = 4.0 * T3;
            A(r + 4, r + 5) = 5.0 * T4;
            A(r + 5, r + 2) = 2.0;
            A(r + 5, r + 3) = 6.0 * T;
            A(r + 5, r + 4) = 12.0 * T2;
            A(r + 5, r + 5) = 20.0 * T3;
            b.row(r + 3) = end.position.transpose();
            b.row(r + 4) = end.velocity.transpose();
            b.row(r + 5) = end.acceleration.transpose();
        }

        A.factorizeLU();
        A.solve(b);
        if (!b.allFinite())
        {
            throw std::runtime_error("minco: singular system");
        }
        traj.coeffs_ = std::move(b);
        return traj;
    }

    int segments() const { return static_cast<int>(durations_.size()); }
    const Eigen::VectorXd &durations() const { return durations_; }
    const WaypointMatrix &waypoints() const { return waypoints_; }
    const CoefficientMatrix &coefficients() const { return coeffs_; }
    const BoundaryState &startState() const { return start_; }
    const BoundaryState &endState() const { return end_; }
    double totalDuration() const { return durations_.sum(); }
    bool empty() const { return durations_.size() == 0; }

    // Segment-local evaluation.
    Vec3 evalSegment(int segment, double localT, int order) const
    {
        Vec3 out = Vec3::Zero();
        for (int n = order; n <= 5; ++n)
        {
            out += detail::monomialDerivative(n, order, localT) * coeffs_.row(6 * segment + n).transpose();
        }
        return out;
    }

    Vec3 eval(double t, int order = 0) const
    {
        if (order < 0 || order > 5)
        {
            throw std::out_of_range("minco eval: derivative order must be in [0, 5]");
        }
        const double total = totalDuration();
        if (!(t >= 0.0 && t <= total * (1.0 + 1e-12)))
        {
            throw std::out_of_range("minco eval: time outside trajectory");
        }
        int seg = 0;
        double local = t;
        while (seg < segments() - 1 && local > durations_(seg))
        {
            local -= durations_(seg);
            ++seg;
        }
        return evalSegment(seg, std::min(local, durations_(seg)), order);
    }

    // Clamped evaluation for tracking: beyond the end the trajectory holds
    // its terminal state.
    Vec3 evalClamped(double t, int order = 0) const
    {
        const double total = totalDuration();
        if (t >= total)
        {
            return order == 0 ? eval(total, 0) : (order <= 2 ? eval(total, order) : Vec3::Zero());
        }
        return eval(std::max(t, 0.0), order);
    }

    // Given dF/dc (shaped like the coefficients) and the explicit dF/dT,
    // returns dJ/dq (3 x (M-1)) and dJ/dT for J(q, T) = F(c(q, T), T).
    // Adjoint form: A^T lambda = dF/dc, then
    //   dJ/dq_i = lambda[waypoint row i],
    //   dJ/dT_i = dF/dT_i - lambda^T (dA/dT_i) c.
    void propagateGradients(const CoefficientMatrix &gradC,
                            const Eigen::VectorXd &gradT,
                            WaypointMatrix &gradQ,
                            Eigen::VectorXd &gradTotalT) const
    {
        const int M = segments();
        if (gradC.rows() != 6 * M || gradT.size() != M)
        {
            throw ValidationError("propagate_gradients: shape mismatch");
        }
        CoefficientMatrix adj = gradC;
        system_.solveTransposed(adj);

        gradQ.resize(3, M - 1);
        for (int i = 0; i < M - 1; ++i)
        {
            gradQ.col(i) = adj.row(6 * i + 5).transpose();
        }

        gradTotalT = gradT;
        for (int i = 0; i < M; ++i)
        {
            const double T = durations_(i);
            const int r = 6 * i;
            const Vec3 c1 = coeffs_.row(r + 1).transpose();
            const Vec3 c2 = coeffs_.row(r + 2).transpose();
            const Vec3 c3 = coeffs_.row(r + 3).transpose();
            const Vec3 c4 = coeffs_.row(r + 4).transpose();
            const Vec3 c5 = coeffs_.row(r + 5).transpose();
            const double T2 = T * T, T3 = T2 * T, T4 = T3 * T;
            const Vec3 vel = c1 + 2.0 * T * c2 + 3.0 * T2 * c3 + 4.0 * T3 * c4 + 5.0 * T4 * c5;
            const Vec3 acc = 2.0 * c2 + 6.0 * T * c3 + 12.0 * T2 * c4 + 20.0 * T3 * c5;
            const Vec3 jerk = 6.0 * c3 + 24.0 * T * c4 + 60.0 * T2 * c5;
            double dot = 0.0;
            if (i < M - 1)
            {
                const Vec3 dJerkRow = 24.0 * c4 + 120.0 * T * c5;
                const Vec3 dSnapRow = 120.0 * c5;
                dot += adj.row(r + 3).dot(dJerkRow.transpose());
                dot += adj.row(r + 4).dot(dSnapRow.transpose());
                dot += adj.row(r + 5).dot(vel.transpose());
                dot += adj.row(r + 6).dot(vel.transpose());
                dot += adj.row(r + 7).dot(acc.transpose());
                dot += adj.row(r + 8).dot(jerk.transpose());
            }
            else
            {
                dot += adj.row(r + 3).dot(vel.transpose());
                dot += adj.row(r + 4).dot(acc.transpose());
                dot += adj.row(r + 5).dot(jerk.transpose());
            }
            gradTotalT(i) -= dot;
        }
    }

private:
    Eigen::VectorXd durations_;
    WaypointMatrix waypoints_;
    BoundaryState start_;
    BoundaryState end_;
    CoefficientMatrix coeffs_;
    BandedSystem system_;
};

} // namespace dodge
