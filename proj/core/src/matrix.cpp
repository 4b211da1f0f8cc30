#include "spacebind/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "spacebind/errors.hpp"

namespace spacebind {

Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows)
        throw ShapeError("matmul: incompatible shapes (" + std::to_string(a.rows) + "x" +
                         std::to_string(a.cols) + ") * (" + std::to_string(b.rows) + "x" +
                         std::to_string(b.cols) + ")");
    Matrix c(a.rows, b.cols);
    // ikj order: streams over rows of b, vectorizes well
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        double* crow = c.row_ptr(i);
        for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = arow[k];
            if (aik == 0.0) continue;
            const double* brow = b.row_ptr(k);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
        }
    }
    return c;
}

Matrix matmul_abt(const Matrix& a, const Matrix& b) {
    if (a.cols != b.cols)
        throw ShapeError("matmul_abt: incompatible shapes (" + std::to_string(a.rows) + "x" +
                         std::to_string(a.cols) + ") * (" + std::to_string(b.rows) + "x" +
                         std::to_string(b.cols) + ")^T");
    Matrix c(a.rows, b.rows);
    for (std::size_t i = 0; i < a.rows; ++i) {
        const double* arow = a.row_ptr(i);
        double* crow = c.row_ptr(i);
        for (std::size_t j = 0; j < b.rows; ++j) {
            const double* brow = b.row_ptr(j);
            double s = 0.0;
            for (std::size_t k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
            crow[j] = s;
        }
    }
    return c;
}

Matrix matmul_atb(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows)
        throw ShapeError("matmul_atb: incompatible shapes (" + std::to_string(a.rows) + "x" +
                         std::to_string(a.cols) + ")^T * (" + std::to_string(b.rows) + "x" +
                         std::to_string(b.cols) + ")");
    Matrix c(a.cols, b.cols);
    for (std::size_t k = 0; k < a.rows; ++k) {
        const double* arow = a.row_ptr(k);
        const double* brow = b.row_ptr(k);
        for (std::size_t i = 0; i < a.cols; ++i) {
            const double aki = arow[i];
            if (aki == 0.0) continue;
            double* crow = c.row_ptr(i);
            for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
        }
    }
    return c;
}

Matrix transpose(const Matrix& m) {
    Matrix t(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
    return t;
}

static void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows) + "x" +
                         std::to_string(a.cols) + ") vs (" + std::to_string(b.rows) + "x" +
                         std::to_string(b.cols) + ")");
}

Matrix add(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data[i] += b.data[i];
    return c;
}

Matrix sub(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "sub");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data[i] -= b.data[i];
    return c;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "hadamard");
    Matrix c = a;
    for (std::size_t i = 0; i < c.size(); ++i) c.data[i] *= b.data[i];
    return c;
}

Matrix scale(const Matrix& m, double s) {
    Matrix c = m;
    for (double& v : c.data) v *= s;
    return c;
}

void add_inplace(Matrix& a, const Matrix& b) {
    require_same_shape(a, b, "add_inplace");
    for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
}

void scale_inplace(Matrix& m, double s) {
    for (double& v : m.data) v *= s;
}

void add_row_vector_inplace(Matrix& m, const Vec& v) {
    if (v.size() != m.cols)
        throw ShapeError("add_row_vector_inplace: vector length " + std::to_string(v.size()) +
                         " vs cols " + std::to_string(m.cols));
    for (std::size_t i = 0; i < m.rows; ++i) {
        double* row = m.row_ptr(i);
        for (std::size_t j = 0; j < m.cols; ++j) row[j] += v[j];
    }
}

Vec column_sums(const Matrix& m) {
    Vec s(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = m.row_ptr(i);
        for (std::size_t j = 0; j < m.cols; ++j) s[j] += row[j];
    }
    return s;
}

double row_dot(const Matrix& a, std::size_t r, const Matrix& b, std::size_t s) {
    const double* x = a.row_ptr(r);
    const double* y = b.row_ptr(s);
    double acc = 0.0;
    for (std::size_t k = 0; k < a.cols; ++k) acc += x[k] * y[k];
    return acc;
}

Vec row_norms(const Matrix& m) {
    Vec out(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = m.row_ptr(i);
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) s += row[j] * row[j];
        out[i] = std::sqrt(s);
    }
    return out;
}

Matrix l2_normalize_rows(const Matrix& m, double tol) {
    Matrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = m.row_ptr(i);
        double s = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) s += row[j] * row[j];
        const double norm = std::sqrt(s);
        if (norm < tol)
            throw DataError("l2_normalize_rows: row " + std::to_string(i) +
                            " has near-zero norm");
        double* orow = out.row_ptr(i);
        for (std::size_t j = 0; j < m.cols; ++j) orow[j] = row[j] / norm;
    }
    return out;
}

Matrix l2_normalize_rows_backward(const Matrix& input, const Matrix& out_grad, double tol) {
    require_same_shape(input, out_grad, "l2_normalize_rows_backward");
    Matrix dx(input.rows, input.cols);
    for (std::size_t i = 0; i < input.rows; ++i) {
        const double* x = input.row_ptr(i);
        const double* g = out_grad.row_ptr(i);
        double s = 0.0;
        for (std::size_t j = 0; j < input.cols; ++j) s += x[j] * x[j];
        const double norm = std::sqrt(s);
        if (norm < tol)
            throw DataError("l2_normalize_rows_backward: row " + std::to_string(i) +
                            " has near-zero norm");
        double gy = 0.0; // g . y with y = x/norm
        for (std::size_t j = 0; j < input.cols; ++j) gy += g[j] * x[j] / norm;
        double* d = dx.row_ptr(i);
        for (std::size_t j = 0; j < input.cols; ++j)
            d[j] = (g[j] - gy * x[j] / norm) / norm;
    }
    return dx;
}

Matrix softmax_rows(const Matrix& m) {
    if (m.cols == 0) throw ShapeError("softmax_rows: zero columns");
    Matrix out(m.rows, m.cols);
    for (std::size_t i = 0; i < m.rows; ++i) {
        const double* row = m.row_ptr(i);
        double mx = row[0];
        for (std::size_t j = 1; j < m.cols; ++j) mx = std::max(mx, row[j]);
        double* orow = out.row_ptr(i);
        double sum = 0.0;
        for (std::size_t j = 0; j < m.cols; ++j) {
            orow[j] = std::exp(row[j] - mx);
            sum += orow[j];
        }
        for (std::size_t j = 0; j < m.cols; ++j) orow[j] /= sum;
    }
    return out;
}

Matrix softmax_rows_backward(const Matrix& p, const Matrix& out_grad) {
    require_same_shape(p, out_grad, "softmax_rows_backward");
    Matrix dz(p.rows, p.cols);
    for (std::size_t i = 0; i < p.rows; ++i) {
        const double* pi = p.row_ptr(i);
        const double* g = out_grad.row_ptr(i);
        double gp = 0.0;
        for (std::size_t j = 0; j < p.cols; ++j) gp += g[j] * pi[j];
        double* d = dz.row_ptr(i);
        for (std::size_t j = 0; j < p.cols; ++j) d[j] = pi[j] * (g[j] - gp);
    }
    return dz;
}

bool rows_unit_norm(const Matrix& m, double tol) {
    Vec norms = row_norms(m);
    for (double n : norms)
        if (std::abs(n - 1.0) > tol) return false;
    return true;
}

void check_finite(const Matrix& m, const std::string& what) {
    for (double v : m.data)
        if (!std::isfinite(v)) throw DataError(what + ": non-finite value");
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx) {
    Matrix out(idx.size(), m.cols);
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] >= m.rows)
            throw ShapeError("gather_rows: index " + std::to_string(idx[i]) +
                             " out of range for " + std::to_string(m.rows) + " rows");
        std::memcpy(out.row_ptr(i), m.row_ptr(idx[i]), m.cols * sizeof(double));
    }
    return out;
}

} // namespace spacebind
