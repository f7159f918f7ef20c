#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <vector>

namespace dodge
{

// Square band matrix with LU factorization in place (no pivoting).
// Storage follows Golub & Van Loan: entry (i, j) lives at row i - j + upper.
class BandedSystem
{
public:
    BandedSystem() = default;

    BandedSystem(int n, int lower, int upper)
        : n_(n), lower_(lower), upper_(upper),
          data_(static_cast<std::size_t>(n) * static_cast<std::size_t>(lower + upper + 1), 0.0)
    {
    }

    int size() const { return n_; }

    double &operator()(int i, int j)
    {
        return data_[static_cast<std::size_t>(i - j + upper_) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j)];
    }

    double operator()(int i, int j) const
    {
        return data_[static_cast<std::size_t>(i - j + upper_) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(j)];
    }

    // A zero pivot means the system is structurally singular.
    void factorizeLU()
    {
        for (int k = 0; k <= n_ - 2; ++k)
        {
            const int iM = std::min(k + lower_, n_ - 1);
            const double pivot = (*this)(k, k);
            for (int i = k + 1; i <= iM; ++i)
            {
                (*this)(i, k) /= pivot;
            }
            const int jM = std::min(k + upper_, n_ - 1);
            for (int j = k + 1; j <= jM; ++j)
            {
                const double ukj = (*this)(k, j);
                if (ukj == 0.0)
                {
                    continue;
                }
                for (int i = k + 1; i <= iM; ++i)
                {
                    (*this)(i, j) -= (*this)(i, k) * ukj;
                }
            }
        }
    }

    // Solves A x = b in place; b has n rows and any number of columns.
    template <typename Derived>
    void solve(Eigen::MatrixBase<Derived> &b) const
    {
        for (int j = 0; j <= n_ - 1; ++j)
        {
            const int iM = std::min(j + lower_, n_ - 1);
            for (int i = j + 1; i <= iM; ++i)
            {
                b.row(i) -= (*this)(i, j) * b.row(j);
            }
        }
        for (int j = n_ - 1; j >= 0; --j)
        {
            b.row(j) /= (*this)(j, j);
            const int iM = std::max(0, j - upper_);
            for (int i = iM; i <= j - 1; ++i)
            {
                b.row(i) -= (*this)(i, j) * b.row(j);
            }
        }
    }

    // Solves A^T x = b in place.
    template <typename Derived>
    void solveTransposed(Eigen::MatrixBase<Derived> &b) const
    {
        for (int j = 0; j <= n_ - 1; ++j)
        {
            const int iM = std::max(0, j - upper_);
            for (int i = iM; i <= j - 1; ++i)
            {
                b.row(j) -= (*this)(i, j) * b.row(i);
            }
            b.row(j) /= (*this)(j, j);
        }
        for (int j = n_ - 1; j >= 0; --j)
        {
            const int iM = std::min(j + lower_, n_ - 1);
            for (int i = j + 1; i <= iM; ++i)
            {
                b.row(j) -= (*this)(i, j) * b.row(i);
            }
        }
    }

private:
    int n_ = 0;
    int lower_ = 0;
    int upper_ = 0;
    std::vector<double> data_;
};

} // namespace dodge
