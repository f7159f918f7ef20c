#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

namespace dodge
{

struct LbfgsParams
{
    int memory = 8;
    int maxIterations = 200;
    // Stop when ||g||_inf <= gradTolerance * max(1, ||x||_inf).
    double gradTolerance = 1e-5;
    // Stop when the relative cost decrease over `pastWindow` iterations is below deltaTolerance.
    int pastWindow = 3;
    double deltaTolerance = 1e-7;
    double armijo = 1e-4;
    double wolfe = 0.9;
    int maxLineSearch = 40;
    double maxStep = 1e10;
};

enum class LbfgsStatus
{
    Converged,
    DeltaConverged,
    MaxIterations,
    LineSearchFailed,
    NonFinite,
};

struct LbfgsResult
{
    LbfgsStatus status = LbfgsStatus::MaxIterations;
    double cost = 0.0;
    int iterations = 0;
    int evaluations = 0;
    // Accepted iterate costs, starting with the initial point.
    std::vector<double> history;

    bool failed() const { return status == LbfgsStatus::NonFinite; }
};

inline bool historyNonIncreasing(const std::vector<double> &h)
{
    for (std::size_t i = 1; i < h.size(); ++i)
    {
        if (h[i] > h[i - 1])
        {
            return false;
        }
    }
    return true;
}

// Objective: returns f(x) and writes the gradient.
using Objective = std::function<double(const Eigen::VectorXd &, Eigen::VectorXd &)>;

// Limited-memory BFGS with a Lewis-Overton weak Wolfe line search. Every
// accepted step satisfies the Armijo condition, so iterate costs never
// increase.
inline LbfgsResult minimizeLbfgs(const Objective &objective, Eigen::VectorXd &x, const LbfgsParams &params = {})
{
    LbfgsResult result;
    const Eigen::Index n = x.size();
    Eigen::VectorXd g(n);
    double f = objective(x, g);
    ++result.evaluations;
    result.history.push_back(f);
    result.cost = f;
    if (!std::isfinite(f) || !g.allFinite())
    {
        result.status = LbfgsStatus::NonFinite;
        return result;
    }

    std::deque<Eigen::VectorXd> sHist, yHist;
    std::deque<double> rhoHist;
    Eigen::VectorXd d = -g;
    Eigen::VectorXd xNew(n), gNew(n);

    auto gradSmall = [&](const Eigen::VectorXd &xv, const Eigen::VectorXd &gv) {
        const double xn = xv.size() ? xv.cwiseAbs().maxCoeff() : 0.0;
        const double gn = gv.size() ? gv.cwiseAbs().maxCoeff() : 0.0;
        return gn <= params.gradTolerance * std::max(1.0, xn);
    };

    if (n == 0 || gradSmall(x, g))
    {
        result.status = LbfgsStatus::Converged;
        return result;
    }

    double step = 1.0 / std::max(1.0, d.norm());
    for (int iter = 0; iter < params.maxIterations; ++iter)
    {
        double dg = g.dot(d);
        if (!(dg < 0.0))
        {
            // Not a descent direction; restart from steepest descent.
            sHist.clear();
            yHist.clear();
            rhoHist.clear();
            d = -g;
            dg = g.dot(d);
            step = 1.0 / std::max(1.0, d.norm());
        }

        // Lewis-Overton bracketing/bisection.
        double lo = 0.0;
        double hi = std::numeric_limits<double>::infinity();
        double fNew = f;
        bool accepted = false;
        bool nonFinite = false;
        for (int ls = 0; ls < params.maxLineSearch; ++ls)
        {
            xNew = x + step * d;
            fNew = objective(xNew, gNew);
            ++result.evaluations;
            if (!std::isfinite(fNew) || !gNew.allFinite())
            {
                nonFinite = true;
                hi = step;
            }
            else if (fNew > f + params.armijo * step * dg)
            {
                hi = step;
            }
            else if (gNew.dot(d) < params.wolfe * dg)
            {
                lo = step;
            }
            else
            {
                accepted = true;
                break;
            }
            if (std::isinf(hi))
            {
                step = std::min(2.0 * step, params.maxStep);
            }
            else
            {
                step = 0.5 * (lo + hi);
            }
        }
        if (!accepted)
        {
            // Fall back to the best Armijo point found, if any.
            if (lo > 0.0)
            {
                xNew = x + lo * d;
                fNew = objective(xNew, gNew);
                ++result.evaluations;
                if (std::isfinite(fNew) && fNew <= f && gNew.allFinite())
                {
                    accepted = true;
                    step = lo;
                }
            }
        }
        if (!accepted)
        {
            result.status = nonFinite && lo == 0.0 ? LbfgsStatus::NonFinite : LbfgsStatus::LineSearchFailed;
            break;
        }

        const Eigen::VectorXd s = xNew - x;
        const Eigen::VectorXd y = gNew - g;
        x = xNew;
        g = gNew;
        f = fNew;
        result.history.push_back(f);
        result.cost = f;
        result.iterations = iter + 1;

        if (gradSmall(x, g))
        {
            result.status = LbfgsStatus::Converged;
            return result;
        }
        const int past = params.pastWindow;
        if (past > 0 && static_cast<int>(result.history.size()) > past)
        {
            const double before = result.history[result.history.size() - 1 - static_cast<std::size_t>(past)];
            if ((before - f) <= params.deltaTolerance * std::max(1.0, std::abs(f)))
            {
                result.status = LbfgsStatus::DeltaConverged;
                return result;
            }
        }

        const double sy = s.dot(y);
        if (sy > 1e-16 * y.squaredNorm())
        {
            sHist.push_back(s);
            yHist.push_back(y);
            rhoHist.push_back(1.0 / sy);
            if (static_cast<int>(sHist.size()) > params.memory)
            {
                sHist.pop_front();
                yHist.pop_front();
                rhoHist.pop_front();
            }
        }

        // Two-loop recursion.
        Eigen::VectorXd qv = -g;
        const std::size_t mem = sHist.size();
        std::vector<double> alpha(mem);
        for (std::size_t i = mem; i-- > 0;)
        {
            alpha[i] = rhoHist[i] * sHist[i].dot(qv);
            qv -= alpha[i] * yHist[i];
        }
        if (mem > 0)
        {
            qv *= 1.0 / (rhoHist.back() * yHist.back().squaredNorm());
        }
        for (std::size_t i = 0; i < mem; ++i)
        {
            const double beta = rhoHist[i] * yHist[i].dot(qv);
            qv += (alpha[i] - beta) * sHist[i];
        }
        d = qv;
        step = 1.0;
    }
    return result;
}

} // namespace dodge
