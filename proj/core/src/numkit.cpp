#include "actuate/numkit.hpp"

#include <charconv>
#include <cmath>
#include <numbers>

#include "actuate/errors.hpp"

namespace actuate {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

void ensure_finite(const double* data, std::size_t n, const std::string& what) {
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(data[i])) {
            throw NumericalError(what + ": non-finite value at index " + std::to_string(i));
        }
    }
}

void ensure_finite(const Vector& v, const std::string& what) {
    ensure_finite(v.data(), v.size(), what);
}

void ensure_finite(const Matrix& m, const std::string& what) {
    ensure_finite(m.data.data(), m.data.size(), what);
}

namespace {

std::uint64_t splitmix64(std::uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed) {
    std::uint64_t sm = seed;
    for (auto& s : state_) s = splitmix64(sm);
}

std::uint64_t Rng::next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
}

double Rng::next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * next_double();
}

std::uint64_t Rng::next_below(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased for any n.
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t v = next_u64();
    while (v >= limit) v = next_u64();
    return v % n;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) {
        throw ConfigError("matmul: dimension mismatch (" + std::to_string(a.rows) + "x" +
                          std::to_string(a.cols) + " * " + std::to_string(b.rows) + "x" +
                          std::to_string(b.cols) + ")");
    }
    Matrix out(a.rows, b.cols, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        double* orow = out.row_ptr(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            const double* brow = b.row_ptr(k);
            for (std::size_t j = 0; j < b.cols; ++j) orow[j] += aik * brow[j];
        }
    }
    ensure_finite(out, "matmul result");
    return out;
}

Matrix transpose(const Matrix& m) {
    Matrix out(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) out.at(j, i) = m.at(i, j);
    return out;
}

namespace {

// In-place lower Cholesky of a symmetric positive definite matrix.
void cholesky(Matrix& a, double lambda, const std::string& what) {
    const std::size_t n = a.rows;
    for (std::size_t j = 0; j < n; ++j) {
        double diag = a.at(j, j);
        for (std::size_t k = 0; k < j; ++k) diag -= a.at(j, k) * a.at(j, k);
        if (!(diag > 0.0) || !std::isfinite(diag)) {
            if (lambda <= 0.0) {
                throw NumericalError(what + ": system is singular; set lambda > 0");
            }
            throw NumericalError(what + ": Cholesky pivot failed at column " +
                                 std::to_string(j));
        }
        const double ljj = std::sqrt(diag);
        a.at(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = a.at(i, j);
            for (std::size_t k = 0; k < j; ++k) v -= a.at(i, k) * a.at(j, k);
            a.at(i, j) = v / ljj;
        }
    }
}

}  // namespace

Matrix ridge_solve(const Matrix& x, const Matrix& y, double lambda) {
    if (x.rows != y.rows) {
        throw ConfigError("ridge_solve: X and Y row counts differ (" +
                          std::to_string(x.rows) + " vs " + std::to_string(y.rows) + ")");
    }
    if (x.rows == 0) throw ConfigError("ridge_solve: empty system");
    if (lambda < 0.0) throw ConfigError("ridge_solve: lambda must be nonnegative");

    const std::size_t d = x.cols;
    const std::size_t n = y.cols;

    // A = X^T X + lambda I, rhs = X^T Y.
    Matrix a(d, d, 0.0);
    for (std::size_t r = 0; r < x.rows; ++r) {
        const double* xr = x.row_ptr(r);
        for (std::size_t i = 0; i < d; ++i) {
            const double xi = xr[i];
            double* ar = a.row_ptr(i);
            for (std::size_t j = 0; j < d; ++j) ar[j] += xi * xr[j];
        }
    }
    for (std::size_t i = 0; i < d; ++i) a.at(i, i) += lambda;

    Matrix rhs(d, n, 0.0);
    for (std::size_t r = 0; r < x.rows; ++r) {
        const double* xr = x.row_ptr(r);
        const double* yr = y.row_ptr(r);
        for (std::size_t i = 0; i < d; ++i) {
            const double xi = xr[i];
            double* rr = rhs.row_ptr(i);
            for (std::size_t j = 0; j < n; ++j) rr[j] += xi * yr[j];
        }
    }

    cholesky(a, lambda, "ridge_solve");

    // Forward then backward substitution, one right-hand side column at a time.
    Matrix b(d, n, 0.0);
    std::vector<double> col(d);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < d; ++i) {
            double v = rhs.at(i, j);
            for (std::size_t k = 0; k < i; ++k) v -= a.at(i, k) * col[k];
            col[i] = v / a.at(i, i);
        }
        for (std::size_t ii = d; ii-- > 0;) {
            double v = col[ii];
            for (std::size_t k = ii + 1; k < d; ++k) v -= a.at(k, ii) * col[k];
            col[ii] = v / a.at(ii, ii);
        }
        for (std::size_t i = 0; i < d; ++i) b.at(i, j) = col[i];
    }
    ensure_finite(b, "ridge_solve result");
    return b;
}

Vector solve_spd(Matrix a, const Vector& rhs, const std::string& what) {
    if (a.rows != a.cols || a.rows != rhs.size()) {
        throw ConfigError(what + ": solve_spd shape mismatch");
    }
    const std::size_t n = a.rows;
    cholesky(a, 1.0, what);  // lambda flag only selects the error message
    Vector z(rhs);
    for (std::size_t i = 0; i < n; ++i) {
        double v = z[i];
        for (std::size_t k = 0; k < i; ++k) v -= a.at(i, k) * z[k];
        z[i] = v / a.at(i, i);
    }
    for (std::size_t i = n; i-- > 0;) {
        double v = z[i];
        for (std::size_t k = i + 1; k < n; ++k) v -= a.at(k, i) * z[k];
        z[i] = v / a.at(i, i);
    }
    ensure_finite(z, what + " solution");
    return z;
}

double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size()) throw ConfigError("dot: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(const Vector& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

Vector rng_normal(Rng& rng, std::size_t n, double mean, double std) {
    if (std < 0.0) throw ConfigError("rng_normal: std must be nonnegative");
    Vector out(n, mean);
    if (std == 0.0) return out;
    for (std::size_t i = 0; i < n; i += 2) {
        // u1 in (0, 1] keeps the log finite.
        const double u1 = 1.0 - rng.next_double();
        const double u2 = rng.next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        out[i] = mean + std * (r * std::cos(theta));
        if (i + 1 < n) out[i + 1] = mean + std * (r * std::sin(theta));
    }
    ensure_finite(out, "rng_normal result");
    return out;
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

}  // namespace actuate
