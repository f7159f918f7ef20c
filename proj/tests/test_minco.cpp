#include "dodge/banded.hpp"
#include "dodge/minco.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace dodge;

namespace
{

struct Instance
{
    WaypointMatrix q;
    Eigen::VectorXd T;
    BoundaryState start, end;
};

Instance randomInstance(std::mt19937_64 &rng, int M)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto vec = [&](double s) { return Vec3(s * u(rng), s * u(rng), s * u(rng)); };
    Instance in;
    in.q.resize(3, M - 1);
    in.T.resize(M);
    for (int i = 0; i < M; ++i)
        in.T(i) = 1.25 + 0.75 * u(rng);
    for (int i = 0; i < M - 1; ++i)
        in.q.col(i) = vec(3.0);
    in.start = {vec(2.0), vec(1.0), vec(1.0)};
    in.end = {vec(2.0), vec(1.0), vec(1.0)};
    return in;
}

} // namespace

TEST(Minco, MatchesDenseOracle)
{
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 20; ++trial)
    {
        const int M = 1 + trial % 4;
        const Instance in = randomInstance(rng, M);
        const auto tr = MincoTrajectory::construct(in.q, in.T, in.start, in.end);
        const Eigen::MatrixXd ref = oracle::denseMinJerk(in.q, in.T, in.start, in.end);
        EXPECT_LT((tr.coefficients() - ref).cwiseAbs().maxCoeff(), 1e-8) << "M=" << M;
    }
}

TEST(Minco, RestToRestQuintic)
{
    const auto tr = MincoTrajectory::construct(WaypointMatrix(3, 0), Eigen::VectorXd::Constant(1, 1.0),
                                               BoundaryState::rest(Vec3::Zero()),
                                               BoundaryState::rest(Vec3(1.0, 1.0, 1.0)));
    const double expected[6] = {0.0, 0.0, 0.0, 10.0, -15.0, 6.0};
    for (int n = 0; n < 6; ++n)
        for (int a = 0; a < 3; ++a)
            EXPECT_NEAR(tr.coefficients()(n, a), expected[n], 1e-10);
}

TEST(Minco, BoundaryWaypointAndContinuityResiduals)
{
    std::mt19937_64 rng(4);
    const Instance in = randomInstance(rng, 4);
    const auto tr = MincoTrajectory::construct(in.q, in.T, in.start, in.end);
    EXPECT_LT((tr.evalSegment(0, 0.0, 0) - in.start.position).norm(), 1e-9);
    EXPECT_LT((tr.evalSegment(0, 0.0, 1) - in.start.velocity).norm(), 1e-9);
    EXPECT_LT((tr.evalSegment(0, 0.0, 2) - in.start.acceleration).norm(), 1e-9);
    EXPECT_LT((tr.evalSegment(3, in.T(3), 0) - in.end.position).norm(), 1e-9);
    EXPECT_LT((tr.evalSegment(3, in.T(3), 1) - in.end.velocity).norm(), 1e-9);
    EXPECT_LT((tr.evalSegment(3, in.T(3), 2) - in.end.acceleration).norm(), 1e-9);
    for (int i = 0; i < 3; ++i)
    {
        EXPECT_LT((tr.evalSegment(i, in.T(i), 0) - in.q.col(i)).norm(), 1e-9);
        for (int k = 0; k <= 4; ++k)
            EXPECT_LT((tr.evalSegment(i, in.T(i), k) - tr.evalSegment(i + 1, 0.0, k)).norm(), 1e-9) << k;
    }
}

TEST(Minco, EvalDomainAndValidation)
{
    std::mt19937_64 rng(9);
    const Instance in = randomInstance(rng, 2);
    const auto tr = MincoTrajectory::construct(in.q, in.T, in.start, in.end);
    EXPECT_THROW(tr.eval(-0.01), std::out_of_range);
    EXPECT_THROW(tr.eval(tr.totalDuration() + 0.1), std::out_of_range);
    EXPECT_THROW(tr.eval(0.1, 6), std::out_of_range);
    EXPECT_LT((tr.evalClamped(tr.totalDuration() + 1.0) - in.end.position).norm(), 1e-9);
    Eigen::VectorXd badT = in.T;
    badT(0) = 0.0;
    EXPECT_THROW(MincoTrajectory::construct(in.q, badT, in.start, in.end), ValidationError);
    EXPECT_THROW(MincoTrajectory::construct(WaypointMatrix(3, 3), in.T, in.start, in.end), ValidationError);
}

TEST(BandedSolver, MatchesDenseSolve)
{
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const int n = 24, lo = 3, up = 2;
    BandedSystem A(n, lo, up);
    Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
    {
        for (int j = std::max(0, i - lo); j <= std::min(n - 1, i + up); ++j)
        {
            const double v = (i == j ? 8.0 : 0.0) + u(rng);
            A(i, j) = v;
            D(i, j) = v;
        }
    }
    Eigen::MatrixXd b = Eigen::MatrixXd::Random(n, 3);
    A.factorizeLU();
    Eigen::MatrixXd x = b;
    A.solve(x);
    EXPECT_LT((D * x - b).cwiseAbs().maxCoeff(), 1e-12);
    Eigen::MatrixXd y = b;
    A.solveTransposed(y);
    EXPECT_LT((D.transpose() * y - b).cwiseAbs().maxCoeff(), 1e-12);
}
