#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace pmc {

/// Dense square matrix, row major. Small state spaces only, so no effort is
/// spent on blocking or pivoted factorizations beyond partial pivoting.
struct Matrix {
    std::size_t n = 0;
    std::vector<double> a;

    Matrix() = default;
    explicit Matrix(std::size_t n_) : n(n_), a(n_ * n_, 0.0) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * n + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * n + j]; }

    static Matrix identity(std::size_t n) {
        Matrix m(n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }
};

inline Matrix mat_mul(const Matrix& A, const Matrix& B) {
    Matrix C(A.n);
    for (std::size_t i = 0; i < A.n; ++i)
        for (std::size_t k = 0; k < A.n; ++k) {
            double aik = A(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < A.n; ++j) C(i, j) += aik * B(k, j);
        }
    return C;
}

/// Row vector times matrix.
inline std::vector<double> vec_mat(const std::vector<double>& v, const Matrix& A) {
    std::vector<double> out(A.n, 0.0);
    for (std::size_t i = 0; i < A.n; ++i) {
        double vi = v[i];
        if (vi == 0.0) continue;
        for (std::size_t j = 0; j < A.n; ++j) out[j] += vi * A(i, j);
    }
    return out;
}

/// Gaussian elimination with partial pivoting. Throws on a numerically
/// singular system.
inline std::vector<double> solve_linear(Matrix A, std::vector<double> b) {
    const std::size_t n = A.n;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(A(r, col)) > std::abs(A(piv, col))) piv = r;
        if (std::abs(A(piv, col)) < 1e-300)
            throw std::runtime_error("solve_linear: singular matrix");
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(A(piv, j), A(col, j));
            std::swap(b[piv], b[col]);
        }
        for (std::size_t r = col + 1; r < n; ++r) {
            double f = A(r, col) / A(col, col);
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) A(r, j) -= f * A(col, j);
            b[r] -= f * b[col];
        }
    }
    std::vector<double> x(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double s = b[i];
        for (std::size_t j = i + 1; j < n; ++j) s -= A(i, j) * x[j];
        x[i] = s / A(i, i);
    }
    return x;
}

/// exp(dt * A) for matrices with nonnegative off-diagonal entries, via the
/// shifted positive series exp(dt A) = e^{-c dt} sum_m (dt)^m/m! (A + cI)^m
/// with c = max(0, -min_i A_ii), plus squaring when dt is large. All series
/// terms are nonnegative, so there is no cancellation; for a generator this
/// is plain uniformization and preserves stochasticity to roundoff.
inline Matrix expm_metzler(const Matrix& A, double dt) {
    const std::size_t n = A.n;
    double c = 0.0;
    for (std::size_t i = 0; i < n; ++i) c = std::max(c, -A(i, i));

    int squarings = 0;
    double s = dt;
    while (s * c > 0.5 && squarings < 60) {
        s *= 0.5;
        ++squarings;
    }

    Matrix B(n); // s*(A + cI), entrywise nonnegative
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) B(i, j) = s * (A(i, j) + (i == j ? c : 0.0));

    Matrix term = Matrix::identity(n);
    Matrix acc = term;
    for (std::size_t m = 1; m <= 80; ++m) {
        term = mat_mul(term, B);
        double inv = 1.0 / static_cast<double>(m);
        double biggest = 0.0;
        for (std::size_t idx = 0; idx < term.a.size(); ++idx) {
            term.a[idx] *= inv;
            acc.a[idx] += term.a[idx];
            biggest = std::max(biggest, term.a[idx]);
        }
        if (biggest < 1e-19) break;
    }
    double shift = std::exp(-s * c);
    for (double& v : acc.a) v *= shift;
    for (int q = 0; q < squarings; ++q) acc = mat_mul(acc, acc);
    return acc;
}

/// Spectral radius of an entrywise positive matrix by power iteration
/// (deterministic uniform start).
inline double spectral_radius_positive(const Matrix& A, std::size_t max_iters = 20000,
                                       double rel_tol = 1e-15) {
    const std::size_t n = A.n;
    std::vector<double> v(n, 1.0 / static_cast<double>(n));
    double lambda = 0.0;
    for (std::size_t it = 0; it < max_iters; ++it) {
        std::vector<double> w(n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) w[j] += v[i] * A(i, j);
        double norm = 0.0;
        for (double x : w) norm += std::abs(x);
        if (!(norm > 0.0)) throw std::runtime_error("spectral_radius: vanishing iterate");
        for (double& x : w) x /= norm;
        if (it > 0 && std::abs(norm - lambda) <= rel_tol * norm) return norm;
        lambda = norm;
        v = std::move(w);
    }
    return lambda;
}

} // namespace pmc
