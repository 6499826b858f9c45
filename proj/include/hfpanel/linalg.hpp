#pragma once
// Dense linear algebra for the small symmetric systems this library needs
// (normal equations up to ~90 columns, 4x4 information matrices).

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace hfpanel {

struct Mat {
    size_t nrow = 0;
    size_t ncol = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(size_t n, size_t m) : nrow(n), ncol(m), a(n * m, 0.0) {}

    double& at(size_t i, size_t j) { return a[i * ncol + j]; }
    double at(size_t i, size_t j) const { return a[i * ncol + j]; }
};

struct RankDeficiency : std::runtime_error {
    std::vector<size_t> columns;
    explicit RankDeficiency(std::vector<size_t> cols, const std::string& what)
        : std::runtime_error(what), columns(std::move(cols)) {}
};

// Cholesky factor of a symmetric positive-definite matrix (lower triangle).
// On a non-positive pivot the offending columns are collected (the row/col is
// zeroed and factorization continues) and reported together, so callers can
// name every dependent column at once.
inline Mat cholesky(const Mat& A, const std::vector<std::string>* col_names = nullptr) {
    if (A.nrow != A.ncol) throw std::invalid_argument("cholesky: matrix not square");
    const size_t n = A.nrow;
    Mat L(n, n);
    std::vector<size_t> bad;
    // Tolerance relative to the diagonal scale.
    double scale = 0.0;
    for (size_t i = 0; i < n; ++i) scale = std::max(scale, std::abs(A.at(i, i)));
    double tol = scale * 1e-12 + 1e-300;
    for (size_t j = 0; j < n; ++j) {
        double d = A.at(j, j);
        for (size_t k = 0; k < j; ++k) d -= L.at(j, k) * L.at(j, k);
        if (!(d > tol)) {
            bad.push_back(j);
            for (size_t k = 0; k <= j; ++k) L.at(j, k) = 0.0;
            continue;
        }
        L.at(j, j) = std::sqrt(d);
        for (size_t i = j + 1; i < n; ++i) {
            double s = A.at(i, j);
            for (size_t k = 0; k < j; ++k) s -= L.at(i, k) * L.at(j, k);
            L.at(i, j) = s / L.at(j, j);
        }
    }
    if (!bad.empty()) {
        std::string msg = "rank-deficient system; dependent column(s):";
        for (size_t j : bad) {
            msg += ' ';
            msg += col_names && j < col_names->size() ? (*col_names)[j] : std::to_string(j);
        }
        throw RankDeficiency(std::move(bad), msg);
    }
    return L;
}

// Solve A x = b given the Cholesky factor L (A = L L^T).
inline std::vector<double> cholesky_solve(const Mat& L, const std::vector<double>& b) {
    const size_t n = L.nrow;
    if (b.size() != n) throw std::invalid_argument("cholesky_solve: size mismatch");
    std::vector<double> y(n), x(n);
    for (size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (size_t k = 0; k < i; ++k) s -= L.at(i, k) * y[k];
        y[i] = s / L.at(i, i);
    }
    for (size_t ii = n; ii-- > 0;) {
        double s = y[ii];
        for (size_t k = ii + 1; k < n; ++k) s -= L.at(k, ii) * x[k];
        x[ii] = s / L.at(ii, ii);
    }
    return x;
}

// Inverse of an SPD matrix from its Cholesky factor.
inline Mat cholesky_inverse(const Mat& L) {
    const size_t n = L.nrow;
    Mat inv(n, n);
    std::vector<double> e(n, 0.0);
    for (size_t j = 0; j < n; ++j) {
        e[j] = 1.0;
        std::vector<double> x = cholesky_solve(L, e);
        for (size_t i = 0; i < n; ++i) inv.at(i, j) = x[i];
        e[j] = 0.0;
    }
    // Symmetrize away round-off.
    for (size_t i = 0; i < n; ++i)
        for (size_t j = i + 1; j < n; ++j) {
            double v = 0.5 * (inv.at(i, j) + inv.at(j, i));
            inv.at(i, j) = v;
            inv.at(j, i) = v;
        }
    return inv;
}

// C = A * B
inline Mat mat_mul(const Mat& A, const Mat& B) {
    if (A.ncol != B.nrow) throw std::invalid_argument("mat_mul: shape mismatch");
    Mat C(A.nrow, B.ncol);
    for (size_t i = 0; i < A.nrow; ++i)
        for (size_t k = 0; k < A.ncol; ++k) {
            double aik = A.at(i, k);
            if (aik == 0.0) continue;
            for (size_t j = 0; j < B.ncol; ++j) C.at(i, j) += aik * B.at(k, j);
        }
    return C;
}

// General small-matrix inverse via Gauss-Jordan with partial pivoting.
inline Mat gauss_inverse(Mat A) {
    if (A.nrow != A.ncol) throw std::invalid_argument("gauss_inverse: not square");
    const size_t n = A.nrow;
    Mat inv(n, n);
    for (size_t i = 0; i < n; ++i) inv.at(i, i) = 1.0;
    for (size_t col = 0; col < n; ++col) {
        size_t piv = col;
        for (size_t r = col + 1; r < n; ++r)
            if (std::abs(A.at(r, col)) > std::abs(A.at(piv, col))) piv = r;
        if (A.at(piv, col) == 0.0) throw std::runtime_error("gauss_inverse: singular matrix");
        if (piv != col)
            for (size_t j = 0; j < n; ++j) {
                std::swap(A.at(piv, j), A.at(col, j));
                std::swap(inv.at(piv, j), inv.at(col, j));
            }
        double d = A.at(col, col);
        for (size_t j = 0; j < n; ++j) {
            A.at(col, j) /= d;
            inv.at(col, j) /= d;
        }
        for (size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            double f = A.at(r, col);
            if (f == 0.0) continue;
            for (size_t j = 0; j < n; ++j) {
                A.at(r, j) -= f * A.at(col, j);
                inv.at(r, j) -= f * inv.at(col, j);
            }
        }
    }
    return inv;
}

}  // namespace hfpanel
