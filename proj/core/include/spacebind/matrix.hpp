#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace spacebind {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Deliberately plain: data lives in a
// single vector, ops are free functions.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    Vec data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    double* row_ptr(std::size_t r) { return data.data() + r * cols; }
    const double* row_ptr(std::size_t r) const { return data.data() + r * cols; }

    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
    std::size_t size() const { return data.size(); }
};

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A * B^T  (common case: similarity of row sets)
Matrix matmul_abt(const Matrix& a, const Matrix& b);
// C = A^T * B  (common case: weight gradients)
Matrix matmul_atb(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);

Matrix add(const Matrix& a, const Matrix& b);
Matrix sub(const Matrix& a, const Matrix& b);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix scale(const Matrix& m, double s);
void add_inplace(Matrix& a, const Matrix& b);
void scale_inplace(Matrix& m, double s);
// adds v to every row of m
void add_row_vector_inplace(Matrix& m, const Vec& v);
// column sums as a vector of length cols
Vec column_sums(const Matrix& m);
// dot product of row r of a with row s of b (equal cols required by caller)
double row_dot(const Matrix& a, std::size_t r, const Matrix& b, std::size_t s);

// Euclidean norm of each row.
Vec row_norms(const Matrix& m);

// Scales every row to unit Euclidean norm. A row with norm below `tol`
// has no direction to keep and is rejected.
Matrix l2_normalize_rows(const Matrix& m, double tol = 1e-12);
// Gradient of l2_normalize_rows: given the original input and the gradient
// of a scalar loss wrt the normalized output, returns the gradient wrt the
// input. For y = x/|x|: dx = (g - (g.y) y) / |x|.
Matrix l2_normalize_rows_backward(const Matrix& input, const Matrix& out_grad,
                                  double tol = 1e-12);

// Row-wise softmax with max subtraction for stability.
Matrix softmax_rows(const Matrix& m);
// Gradient through softmax_rows: p is the softmax output, out_grad the
// gradient wrt p; returns gradient wrt the logits.
Matrix softmax_rows_backward(const Matrix& p, const Matrix& out_grad);

// True if the row is within `tol` of unit norm.
bool rows_unit_norm(const Matrix& m, double tol);

// Throws DataError naming `what` if any entry is NaN or infinite.
void check_finite(const Matrix& m, const std::string& what);

// Gathers the given rows of m into a new matrix, in the order given.
Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& idx);

} // namespace spacebind
