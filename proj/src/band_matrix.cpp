#include "mfvol/band_matrix.hpp"

#include "mfvol/errors.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace mfvol {

SymBandMatrix::SymBandMatrix(std::size_t n, std::size_t bandwidth)
    : n_(n), bw_(n == 0 ? 0 : std::min(bandwidth, n - 1)), data_(n * (bw_ + 1), 0.0)
{
}

double SymBandMatrix::operator()(std::size_t i, std::size_t j) const noexcept
{
    if (i < j)
        std::swap(i, j);
    const std::size_t d = i - j;
    return d > bw_ ? 0.0 : data_[i * (bw_ + 1) + d];
}

double& SymBandMatrix::at(std::size_t i, std::size_t j)
{
    if (i < j)
        std::swap(i, j);
    if (i >= n_ || i - j > bw_)
        throw std::out_of_range("SymBandMatrix: entry outside band");
    return data_[i * (bw_ + 1) + (i - j)];
}

void SymBandMatrix::add_diagonal(std::span<const double> d)
{
    if (d.size() != n_)
        throw std::invalid_argument("SymBandMatrix: diagonal length mismatch");
    for (std::size_t i = 0; i < n_; ++i)
        data_[i * (bw_ + 1)] += d[i];
}

SymBandMatrix& SymBandMatrix::operator*=(double s)
{
    for (double& v : data_)
        v *= s;
    return *this;
}

SymBandMatrix SymBandMatrix::operator-() const
{
    SymBandMatrix out = *this;
    out *= -1.0;
    return out;
}

std::vector<double> SymBandMatrix::multiply(std::span<const double> x) const
{
    if (x.size() != n_)
        throw std::invalid_argument("SymBandMatrix: vector length mismatch");
    std::vector<double> y(n_, 0.0);
    const std::size_t w = bw_ + 1;
    for (std::size_t i = 0; i < n_; ++i) {
        const double* row = &data_[i * w];
        double acc = row[0] * x[i];
        const std::size_t dmax = std::min(bw_, i);
        for (std::size_t d = 1; d <= dmax; ++d) {
            acc += row[d] * x[i - d];
            y[i - d] += row[d] * x[i];
        }
        y[i] += acc;
    }
    return y;
}

std::vector<double> SymBandMatrix::to_dense() const
{
    std::vector<double> out(n_ * n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i)
        for (std::size_t j = 0; j < n_; ++j)
            out[i * n_ + j] = (*this)(i, j);
    return out;
}

BandCholesky::BandCholesky(const SymBandMatrix& a) : factor_(a)
{
    const std::size_t n = factor_.n_;
    const std::size_t bw = factor_.bw_;
    const std::size_t w = bw + 1;
    double* L = factor_.data_.data();
    // L(i, j) = L[i * w + (i - j)]
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j0 = i > bw ? i - bw : 0;
        for (std::size_t j = j0; j <= i; ++j) {
            double s = L[i * w + (i - j)];
            const std::size_t k0 = std::max(j0, j > bw ? j - bw : 0);
            for (std::size_t k = k0; k < j; ++k)
                s -= L[i * w + (i - k)] * L[j * w + (j - k)];
            if (j == i) {
                if (!(s > 0.0) || !std::isfinite(s))
                    throw NotPositiveDefinite("band Cholesky: non-positive pivot at row " +
                                              std::to_string(i));
                L[i * w] = std::sqrt(s);
            } else {
                L[i * w + (i - j)] = s / L[j * w];
            }
        }
    }
}

double BandCholesky::log_det() const noexcept
{
    const std::size_t w = factor_.bw_ + 1;
    double s = 0.0;
    for (std::size_t i = 0; i < factor_.n_; ++i)
        s += std::log(factor_.data_[i * w]);
    return 2.0 * s;
}

std::vector<double> BandCholesky::solve(std::span<const double> b) const
{
    const std::size_t n = factor_.n_;
    const std::size_t bw = factor_.bw_;
    const std::size_t w = bw + 1;
    if (b.size() != n)
        throw std::invalid_argument("BandCholesky: right-hand side length mismatch");
    const double* L = factor_.data_.data();
    std::vector<double> y(b.begin(), b.end());
    for (std::size_t i = 0; i < n; ++i) {
        double s = y[i];
        const std::size_t dmax = std::min(bw, i);
        for (std::size_t d = 1; d <= dmax; ++d)
            s -= L[i * w + d] * y[i - d];
        y[i] = s / L[i * w];
    }
    for (std::size_t i = n; i-- > 0;) {
        y[i] /= L[i * w];
        const double yi = y[i];
        const std::size_t dmax = std::min(bw, i);
        for (std::size_t d = 1; d <= dmax; ++d)
            y[i - d] -= L[i * w + d] * yi;
    }
    return y;
}

} // namespace mfvol
