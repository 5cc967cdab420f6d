#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace chb {

/// Rectangular banded matrix.  Row i stores the columns
/// j = i + offset - lower ... i + offset + upper; entries outside [0, cols)
/// are ignored.  The offset lets an operator map between index sets of
/// different length (e.g. all nodes onto interior nodes).
class BandedOperator {
public:
    BandedOperator() = default;
    BandedOperator(std::size_t rows, std::size_t cols, int lower, int upper,
                   std::ptrdiff_t offset = 0);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    int lower() const noexcept { return lower_; }
    int upper() const noexcept { return upper_; }
    std::ptrdiff_t offset() const noexcept { return offset_; }

    bool in_band(std::size_t i, std::size_t j) const noexcept;
    double operator()(std::size_t i, std::size_t j) const noexcept;
    /// Throws ContractViolation when (i, j) lies outside the band.
    void set(std::size_t i, std::size_t j, double value);
    void add(std::size_t i, std::size_t j, double value);

    /// y = A x
    void apply(std::span<const double> x, std::span<double> y) const;
    std::vector<double> apply(std::span<const double> x) const;
    /// x = A^T y (plain Euclidean transpose).
    void apply_transpose(std::span<const double> y, std::span<double> x) const;
    std::vector<double> apply_transpose(std::span<const double> y) const;

    /// Multiplies the operator by s without touching the stored entries, so
    /// an integer stencil keeps its exact row sums.
    void rescale(double s) noexcept { scale_ *= s; }
    BandedOperator scaled(double s) const {
        BandedOperator out = *this;
        out.rescale(s);
        return out;
    }

    /// Largest absolute entry; used for scale-aware round-off bounds.
    double max_abs() const noexcept;

    /// Calls f(i, j, value) for every stored entry inside the matrix.
    template <class F>
    void for_each(F&& f) const {
        const int width = lower_ + upper_ + 1;
        for (std::size_t i = 0; i < rows_; ++i) {
            for (int d = 0; d < width; ++d) {
                const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + offset_ - lower_ + d;
                if (j < 0 || j >= static_cast<std::ptrdiff_t>(cols_)) continue;
                f(i, static_cast<std::size_t>(j), scale_ * data_[i * width + d]);
            }
        }
    }

    /// alpha * A + beta * B with the union band.  Shapes and offsets must agree.
    friend BandedOperator combine(double alpha, const BandedOperator& a, double beta,
                                  const BandedOperator& b);
    /// diag(d) * A
    BandedOperator row_scaled(std::span<const double> d) const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    int lower_ = 0;
    int upper_ = 0;
    std::ptrdiff_t offset_ = 0;
    double scale_ = 1.0;
    std::vector<double> data_;
};

BandedOperator combine(double alpha, const BandedOperator& a, double beta,
                       const BandedOperator& b);

/// Square band matrix factorized once with partial pivoting (LAPACK dgbtrf),
/// solved many times in either orientation.
class BandLU {
public:
    BandLU() = default;
    /// Empty n x n band matrix; fill with add() before factorize().
    BandLU(std::size_t n, int lower, int upper);

    void add(std::size_t i, std::size_t j, double value);
    /// Throws NumericalError if the matrix is singular.
    void factorize();
    bool factorized() const noexcept { return factorized_; }
    std::size_t size() const noexcept { return n_; }

    /// In-place solve of A x = b, or A^T x = b when `transpose` is set.
    void solve(std::span<double> b, bool transpose = false) const;
    /// Same through LAPACK dgbtrs (reference for tests).
    void solve_lapack(std::span<double> b, bool transpose = false) const;

private:
    std::size_t n_ = 0;
    int kl_ = 0;
    int ku_ = 0;
    int ldab_ = 0;
    std::vector<double> ab_;  // column-major LAPACK band storage
    std::vector<int> ipiv_;
    bool factorized_ = false;
};

}  // namespace chb
