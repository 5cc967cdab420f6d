#include "chbctl/banded.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "chbctl/errors.hpp"

extern "C" void dgbtrf_(const int* m, const int* n, const int* kl, const int* ku, double* ab,
                        const int* ldab, int* ipiv, int* info);
extern "C" void dgbtrs_(const char* trans, const int* n, const int* kl, const int* ku,
                        const int* nrhs, const double* ab, const int* ldab, const int* ipiv,
                        double* b, const int* ldb, int* info);

namespace chb {

BandedOperator::BandedOperator(std::size_t rows, std::size_t cols, int lower, int upper,
                               std::ptrdiff_t offset)
    : rows_(rows), cols_(cols), lower_(lower), upper_(upper), offset_(offset),
      data_(rows * static_cast<std::size_t>(lower + upper + 1), 0.0) {
    if (lower < 0 || upper < 0) throw ContractViolation("BandedOperator: negative bandwidth");
}

bool BandedOperator::in_band(std::size_t i, std::size_t j) const noexcept {
    if (i >= rows_ || j >= cols_) return false;
    const std::ptrdiff_t d = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(i) - offset_;
    return d >= -lower_ && d <= upper_;
}

double BandedOperator::operator()(std::size_t i, std::size_t j) const noexcept {
    if (!in_band(i, j)) return 0.0;
    const std::ptrdiff_t d = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(i) - offset_;
    return scale_ * data_[i * static_cast<std::size_t>(lower_ + upper_ + 1) + static_cast<std::size_t>(d + lower_)];
}

void BandedOperator::set(std::size_t i, std::size_t j, double value) {
    if (!in_band(i, j)) {
        throw ContractViolation("BandedOperator: entry (" + std::to_string(i) + ", " +
                                std::to_string(j) + ") outside band");
    }
    const std::ptrdiff_t d = static_cast<std::ptrdiff_t>(j) - static_cast<std::ptrdiff_t>(i) - offset_;
    data_[i * static_cast<std::size_t>(lower_ + upper_ + 1) + static_cast<std::size_t>(d + lower_)] = value / scale_;
}

void BandedOperator::add(std::size_t i, std::size_t j, double value) { set(i, j, (*this)(i, j) + value); }

void BandedOperator::apply(std::span<const double> x, std::span<double> y) const {
    if (x.size() != cols_ || y.size() != rows_) throw ContractViolation("BandedOperator::apply: size mismatch");
    const int width = lower_ + upper_ + 1;
    for (std::size_t i = 0; i < rows_; ++i) {
        double acc = 0.0;
        for (int d = 0; d < width; ++d) {
            const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + offset_ - lower_ + d;
            if (j < 0 || j >= static_cast<std::ptrdiff_t>(cols_)) continue;
            acc += data_[i * width + d] * x[static_cast<std::size_t>(j)];
        }
        y[i] = scale_ * acc;
    }
}

std::vector<double> BandedOperator::apply(std::span<const double> x) const {
    std::vector<double> y(rows_);
    apply(x, y);
    return y;
}

void BandedOperator::apply_transpose(std::span<const double> y, std::span<double> x) const {
    if (y.size() != rows_ || x.size() != cols_) {
        throw ContractViolation("BandedOperator::apply_transpose: size mismatch");
    }
    std::fill(x.begin(), x.end(), 0.0);
    const int width = lower_ + upper_ + 1;
    for (std::size_t i = 0; i < rows_; ++i) {
        for (int d = 0; d < width; ++d) {
            const std::ptrdiff_t j = static_cast<std::ptrdiff_t>(i) + offset_ - lower_ + d;
            if (j < 0 || j >= static_cast<std::ptrdiff_t>(cols_)) continue;
            x[static_cast<std::size_t>(j)] += data_[i * width + d] * y[i];
        }
    }
    for (double& v : x) v *= scale_;
}

std::vector<double> BandedOperator::apply_transpose(std::span<const double> y) const {
    std::vector<double> x(cols_);
    apply_transpose(y, x);
    return x;
}

double BandedOperator::max_abs() const noexcept {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m * std::abs(scale_);
}

BandedOperator combine(double alpha, const BandedOperator& a, double beta, const BandedOperator& b) {
    if (a.rows_ != b.rows_ || a.cols_ != b.cols_ || a.offset_ != b.offset_) {
        throw ContractViolation("combine: operator shapes differ");
    }
    BandedOperator out(a.rows_, a.cols_, std::max(a.lower_, b.lower_), std::max(a.upper_, b.upper_),
                       a.offset_);
    a.for_each([&](std::size_t i, std::size_t j, double v) { out.add(i, j, alpha * v); });
    b.for_each([&](std::size_t i, std::size_t j, double v) { out.add(i, j, beta * v); });
    return out;
}

BandedOperator BandedOperator::row_scaled(std::span<const double> d) const {
    if (d.size() != rows_) throw ContractViolation("row_scaled: size mismatch");
    BandedOperator out = *this;
    const std::size_t width = static_cast<std::size_t>(lower_ + upper_ + 1);
    for (std::size_t i = 0; i < rows_; ++i) {
        for (std::size_t k = 0; k < width; ++k) out.data_[i * width + k] *= d[i];
    }
    return out;
}

BandLU::BandLU(std::size_t n, int lower, int upper)
    : n_(n), kl_(lower), ku_(upper), ldab_(2 * lower + upper + 1),
      ab_(static_cast<std::size_t>(2 * lower + upper + 1) * n, 0.0), ipiv_(n, 0) {}

void BandLU::add(std::size_t i, std::size_t j, double value) {
    if (factorized_) throw ContractViolation("BandLU::add after factorize");
    const std::ptrdiff_t d = static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(j);
    if (i >= n_ || j >= n_ || d > kl_ || -d > ku_) {
        throw ContractViolation("BandLU::add: entry (" + std::to_string(i) + ", " + std::to_string(j) +
                                ") outside band");
    }
    // LAPACK: A(i,j) -> AB(kl + ku + i - j, j), zero-based.
    ab_[j * static_cast<std::size_t>(ldab_) + static_cast<std::size_t>(kl_ + ku_ + d)] += value;
}

void BandLU::factorize() {
    const int n = static_cast<int>(n_);
    int info = 0;
    dgbtrf_(&n, &n, &kl_, &ku_, ab_.data(), &ldab_, ipiv_.data(), &info);
    if (info != 0) throw NumericalError("BandLU: dgbtrf failed, info = " + std::to_string(info));
    factorized_ = true;
}

// Same sweeps as dgbtrs on the dgbtrf factors, written out because dgbtrs
// issues one BLAS-2 call per column, which dominates at bandwidth 4.
void BandLU::solve(std::span<double> b, bool transpose) const {
    if (!factorized_) throw ContractViolation("BandLU::solve before factorize");
    if (b.size() != n_) throw ContractViolation("BandLU::solve: size mismatch");
    const auto n = static_cast<std::ptrdiff_t>(n_);
    const std::ptrdiff_t kd = kl_ + ku_;  // 0-based row of the diagonal in band storage
    const std::ptrdiff_t ku = kl_ + ku_;  // superdiagonals of U
    auto at = [&](std::ptrdiff_t row, std::ptrdiff_t col) { return ab_[row + col * ldab_]; };
    if (!transpose) {
        for (std::ptrdiff_t j = 0; j + 1 < n; ++j) {
            const std::ptrdiff_t lm = std::min<std::ptrdiff_t>(kl_, n - 1 - j);
            const std::ptrdiff_t l = ipiv_[j] - 1;
            if (l != j) std::swap(b[l], b[j]);
            const double bj = b[j];
            for (std::ptrdiff_t i = 1; i <= lm; ++i) b[j + i] -= at(kd + i, j) * bj;
        }
        for (std::ptrdiff_t j = n - 1; j >= 0; --j) {
            b[j] /= at(kd, j);
            const double bj = b[j];
            for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, j - ku); i < j; ++i) b[i] -= at(kd + i - j, j) * bj;
        }
    } else {
        for (std::ptrdiff_t j = 0; j < n; ++j) {
            double t = b[j];
            for (std::ptrdiff_t i = std::max<std::ptrdiff_t>(0, j - ku); i < j; ++i) t -= at(kd + i - j, j) * b[i];
            b[j] = t / at(kd, j);
        }
        for (std::ptrdiff_t j = n - 2; j >= 0; --j) {
            const std::ptrdiff_t lm = std::min<std::ptrdiff_t>(kl_, n - 1 - j);
            double t = b[j];
            for (std::ptrdiff_t i = 1; i <= lm; ++i) t -= at(kd + i, j) * b[j + i];
            b[j] = t;
            const std::ptrdiff_t l = ipiv_[j] - 1;
            if (l != j) std::swap(b[l], b[j]);
        }
    }
}

void BandLU::solve_lapack(std::span<double> b, bool transpose) const {
    if (!factorized_) throw ContractViolation("BandLU::solve before factorize");
    if (b.size() != n_) throw ContractViolation("BandLU::solve: size mismatch");
    const int n = static_cast<int>(n_);
    const int nrhs = 1;
    const char trans = transpose ? 'T' : 'N';
    int info = 0;
    dgbtrs_(&trans, &n, &kl_, &ku_, &nrhs, ab_.data(), &ldab_, ipiv_.data(), b.data(), &n, &info);
    if (info != 0) throw NumericalError("BandLU: dgbtrs failed, info = " + std::to_string(info));
}

}  // namespace chb
