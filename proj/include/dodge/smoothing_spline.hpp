#pragma once

#include "dodge/common.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace dodge
{

// Cubic smoothing spline with knots at the sample times.
//
// Minimizes  sum_i (s(t_i) - y_i)^2 + lambda * sum_j (h^3 * jump_j(s'''))^2
// where jump_j is the discontinuity of the third derivative at interior
// knot j and h is the mean knot spacing. Cubic polynomials have no jumps,
// so they are reproduced exactly for every lambda; lambda -> inf gives the
// least-squares cubic, lambda = 0 the interpolant with the smallest jumps
// (equal to the not-a-knot spline for N = 4).
//
// The spline is stored by its knot values f_i and knot second derivatives
// m_i, which makes C2 continuity structural and leaves C1 as a linear
// constraint.
class SmoothingSpline
{
public:
    SmoothingSpline() = default;

    static constexpr std::size_t kMinPoints = 4;

    // Fits `columns` series sharing the same knots in one factorization.
    static std::vector<SmoothingSpline> fit(std::span<const double> t,
                                            const Eigen::MatrixXd &y,
                                            double lambda)
    {
        const std::size_t n = t.size();
        if (n < kMinPoints)
        {
            throw ValidationError("spline fit: too few points");
        }
        require(static_cast<std::size_t>(y.rows()) == n, "spline fit: value count mismatch");
        require(lambda >= 0.0 && std::isfinite(lambda), "spline fit: smoothing factor must be >= 0");
        for (std::size_t i = 0; i + 1 < n; ++i)
        {
            if (!(t[i + 1] > t[i]))
            {
                throw ValidationError("spline fit: timestamps not strictly increasing");
            }
        }

        const int N = static_cast<int>(n);
        const int nc = N - 2;
        std::vector<double> h(n - 1);
        for (std::size_t i = 0; i + 1 < n; ++i)
        {
            h[i] = t[i + 1] - t[i];
        }
        const double hMean = (t[n - 1] - t[0]) / static_cast<double>(n - 1);
        const double jumpScale = hMean * hMean * hMean;

        // C1 rows: cf * f + cm * m = 0.
        Eigen::MatrixXd cf = Eigen::MatrixXd::Zero(nc, N);
        Eigen::MatrixXd cm = Eigen::MatrixXd::Zero(nc, N);
        // Scaled third-derivative jumps: jm * m.
        Eigen::MatrixXd jm = Eigen::MatrixXd::Zero(nc, N);
        for (int r = 0; r < nc; ++r)
        {
            const int i = r + 1;
            const double hl = h[i - 1];
            const double hr = h[i];
            cf(r, i - 1) = 1.0 / hl;
            cf(r, i) = -1.0 / hl - 1.0 / hr;
            cf(r, i + 1) = 1.0 / hr;
            cm(r, i - 1) = -hl / 6.0;
            cm(r, i) = -(hl + hr) / 3.0;
            cm(r, i + 1) = -hr / 6.0;
            jm(r, i - 1) = jumpScale / hl;
            jm(r, i) = -jumpScale * (1.0 / hl + 1.0 / hr);
            jm(r, i + 1) = jumpScale / hr;
        }

        const int cols = static_cast<int>(y.cols());
        Eigen::MatrixXd f(N, cols);
        Eigen::MatrixXd m(N, cols);
        if (lambda == 0.0)
        {
            // Interpolate; minimize jumps subject to cm*m = -cf*y.
            Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(N + nc, N + nc);
            kkt.topLeftCorner(N, N) = 2.0 * jm.transpose() * jm;
            kkt.topRightCorner(N, nc) = cm.transpose();
            kkt.bottomLeftCorner(nc, N) = cm;
            Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(N + nc, cols);
            rhs.bottomRows(nc) = -cf * y;
            const Eigen::MatrixXd sol = kkt.fullPivLu().solve(rhs);
            f = y;
            m = sol.topRows(N);
        }
        else
        {
            const int nv = 2 * N;
            Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(nv + nc, nv + nc);
            kkt.topLeftCorner(N, N) = 2.0 * Eigen::MatrixXd::Identity(N, N);
            kkt.block(N, N, N, N) = 2.0 * lambda * jm.transpose() * jm;
            kkt.block(0, nv, N, nc) = cf.transpose();
            kkt.block(N, nv, N, nc) = cm.transpose();
            kkt.block(nv, 0, nc, N) = cf;
            kkt.block(nv, N, nc, N) = cm;
            Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(nv + nc, cols);
            rhs.topRows(N) = 2.0 * y;
            const Eigen::MatrixXd sol = kkt.fullPivLu().solve(rhs);
            f = sol.topRows(N);
            m = sol.middleRows(N, N);
        }
        if (!f.allFinite() || !m.allFinite())
        {
            throw std::runtime_error("spline fit: singular system");
        }

        std::vector<SmoothingSpline> out(static_cast<std::size_t>(cols));
        for (int c = 0; c < cols; ++c)
        {
            auto &s = out[static_cast<std::size_t>(c)];
            s.knots_.assign(t.begin(), t.end());
            s.values_.resize(n);
            s.second_.resize(n);
            for (int i = 0; i < N; ++i)
            {
                s.values_[static_cast<std::size_t>(i)] = f(i, c);
                s.second_[static_cast<std::size_t>(i)] = m(i, c);
            }
            s.jumpScale_ = jumpScale;
        }
        return out;
    }

    static SmoothingSpline fit(std::span<const double> t, std::span<const double> y, double lambda)
    {
        Eigen::MatrixXd col(static_cast<Eigen::Index>(y.size()), 1);
        for (std::size_t i = 0; i < y.size(); ++i)
        {
            col(static_cast<Eigen::Index>(i), 0) = y[i];
        }
        return fit(t, col, lambda).front();
    }

    double domainBegin() const { return knots_.front(); }
    double domainEnd() const { return knots_.back(); }
    const std::vector<double> &knots() const { return knots_; }

    bool inDomain(double t) const
    {
        const double tol = 1e-12 * std::max(1.0, std::abs(domainEnd()));
        return t >= domainBegin() - tol && t <= domainEnd() + tol;
    }

    // Value and first two derivatives at t.
    Eigen::Vector3d evaluate(double t) const
    {
        if (!inDomain(t))
        {
            throw std::out_of_range("spline eval: time outside fitted domain");
        }
        const std::size_t i = interval(t);
        const double t0 = knots_[i];
        const double t1 = knots_[i + 1];
        const double h = t1 - t0;
        const double a = t1 - t;
        const double b = t - t0;
        const double m0 = second_[i];
        const double m1 = second_[i + 1];
        const double c0 = values_[i] / h - m0 * h / 6.0;
        const double c1 = values_[i + 1] / h - m1 * h / 6.0;
        Eigen::Vector3d out;
        out[0] = m0 * a * a * a / (6.0 * h) + m1 * b * b * b / (6.0 * h) + c0 * a + c1 * b;
        out[1] = -m0 * a * a / (2.0 * h) + m1 * b * b / (2.0 * h) - c0 + c1;
        out[2] = (m0 * a + m1 * b) / h;
        return out;
    }

    // The penalized functional: sum of squared scaled third-derivative jumps.
    double jumpRoughness() const
    {
        double acc = 0.0;
        for (std::size_t i = 1; i + 1 < knots_.size(); ++i)
        {
            const double left = (second_[i] - second_[i - 1]) / (knots_[i] - knots_[i - 1]);
            const double right = (second_[i + 1] - second_[i]) / (knots_[i + 1] - knots_[i]);
            const double j = jumpScale_ * (right - left);
            acc += j * j;
        }
        return acc;
    }

    // Integral of s''(t)^2 over the domain (s'' is piecewise linear).
    double curvatureIntegral() const
    {
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < knots_.size(); ++i)
        {
            const double h = knots_[i + 1] - knots_[i];
            const double a = second_[i];
            const double b = second_[i + 1];
            acc += h * (a * a + a * b + b * b) / 3.0;
        }
        return acc;
    }

private:
    std::size_t interval(double t) const
    {
        const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
        std::size_t i = it == knots_.begin() ? 0 : static_cast<std::size_t>(it - knots_.begin()) - 1;
        return std::min(i, knots_.size() - 2);
    }

    std::vector<double> knots_;
    std::vector<double> values_;
    std::vector<double> second_;
    double jumpScale_ = 1.0;
};

} // namespace dodge
