#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mfvol {

/**
 * Symmetric n x n matrix with entries only on |i - j| <= bandwidth.
 *
 * Only the lower band is stored, row by row; element (i, i - d) lives at
 * data[i * (bandwidth + 1) + d].  Entries outside the band read as zero.
 */
class SymBandMatrix {
public:
    SymBandMatrix() = default;
    SymBandMatrix(std::size_t n, std::size_t bandwidth);

    std::size_t size() const noexcept { return n_; }
    std::size_t bandwidth() const noexcept { return bw_; }

    double operator()(std::size_t i, std::size_t j) const noexcept;

    /// Mutable access to an in-band entry; (i, j) and (j, i) alias.
    double& at(std::size_t i, std::size_t j);

    void add_diagonal(std::span<const double> d);
    SymBandMatrix& operator*=(double s);
    SymBandMatrix operator-() const;

    std::vector<double> multiply(std::span<const double> x) const;

    /// Row-major dense copy, for diagnostics and tests.
    std::vector<double> to_dense() const;

private:
    friend class BandCholesky;
    std::size_t n_ = 0;
    std::size_t bw_ = 0;
    std::vector<double> data_;
};

/// Lower Cholesky factor of a positive definite SymBandMatrix.
class BandCholesky {
public:
    /// Throws NotPositiveDefinite if a pivot is not strictly positive.
    explicit BandCholesky(const SymBandMatrix& a);

    std::size_t size() const noexcept { return factor_.n_; }

    /// log det A = 2 * sum log L_ii.
    double log_det() const noexcept;

    std::vector<double> solve(std::span<const double> b) const;

private:
    SymBandMatrix factor_;
};

} // namespace mfvol
