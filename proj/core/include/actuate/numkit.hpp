#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace actuate {

using Vector = std::vector<double>;

/// Dense row-major matrix of 64-bit reals. Every public operation in this
/// kernel checks that no NaN/Inf leaves it.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    const double* row_ptr(std::size_t r) const { return data.data() + r * cols; }
    double* row_ptr(std::size_t r) { return data.data() + r * cols; }

    static Matrix identity(std::size_t n);
};

/// xoshiro256++ with splitmix64 seeding. Chosen by name so that any
/// implementation language reproduces the identical stream bit-for-bit;
/// seeds are part of every experiment config.
class Rng {
  public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t seed() const { return seed_; }
    std::uint64_t next_u64();

    /// Uniform in [0, 1), 53-bit resolution.
    double next_double();

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi);

    /// Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n);

  private:
    std::uint64_t seed_;
    std::uint64_t state_[4];
};

void ensure_finite(const double* data, std::size_t n, const std::string& what);
void ensure_finite(const Vector& v, const std::string& what);
void ensure_finite(const Matrix& m, const std::string& what);

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

/// argmin_B ||X B - Y||^2 + lambda ||B||^2 for X: N x d, Y: N x n,
/// solved with Cholesky on the normal equations. The systems in this
/// toolkit are small (d <= 128) and ridge-regularized, so Cholesky is
/// both sufficient and deterministic.
Matrix ridge_solve(const Matrix& x, const Matrix& y, double lambda);

/// Solve A z = rhs for symmetric positive definite A via Cholesky.
Vector solve_spd(Matrix a, const Vector& rhs, const std::string& what);

double dot(const Vector& a, const Vector& b);
double l2_norm(const Vector& v);

/// n Gaussian draws via Box-Muller on the deterministic stream.
/// std == 0 degenerates to n copies of mean.
Vector rng_normal(Rng& rng, std::size_t n, double mean, double std);

/// Shortest decimal string that round-trips the double (std::to_chars).
/// All text artifacts use this so reruns are byte-identical.
std::string format_double(double v);

}  // namespace actuate
