#include "spacebind/net.hpp"

#include <cmath>

#include "spacebind/errors.hpp"

namespace spacebind {

namespace {
constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;
} // namespace

double gelu(double x) {
    // exact form: x * Phi(x)
    return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
}

double gelu_derivative(double x) {
    const double phi_cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
    const double phi_pdf = kInvSqrt2Pi * std::exp(-0.5 * x * x);
    return phi_cdf + x * phi_pdf;
}

double sigmoid(double x) {
    if (x >= 0.0) {
        const double e = std::exp(-x);
        return 1.0 / (1.0 + e);
    }
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Perceptron::Perceptron(std::size_t in, std::size_t hidden, std::size_t out,
                       OutputActivation act)
    : input_dim(in), hidden_dim(hidden), output_dim(out), output_activation(act),
      w1(hidden, in), b1(hidden, 0.0), w2(out, hidden), b2(out, 0.0) {
    if (in == 0 || hidden == 0 || out == 0)
        throw ConfigError("Perceptron: dimensions must be positive");
}

void Perceptron::init(Rng& rng) {
    const double s1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
    const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
    for (double& v : w1.data) v = s1 * rng.normal();
    for (double& v : b1) v = 0.0;
    for (double& v : w2.data) v = s2 * rng.normal();
    for (double& v : b2) v = 0.0;
}

Matrix Perceptron::forward(const Matrix& x) const {
    Cache cache;
    return forward(x, cache);
}

Matrix Perceptron::forward(const Matrix& x, Cache& cache) const {
    if (x.cols != input_dim)
        throw ShapeError("Perceptron::forward: input has " + std::to_string(x.cols) +
                         " columns, expected " + std::to_string(input_dim));
    cache.input = x;
    cache.pre_hidden = matmul_abt(x, w1);
    add_row_vector_inplace(cache.pre_hidden, b1);
    cache.hidden = cache.pre_hidden;
    for (double& v : cache.hidden.data) v = gelu(v);
    Matrix out = matmul_abt(cache.hidden, w2);
    add_row_vector_inplace(out, b2);
    if (output_activation == OutputActivation::Sigmoid)
        for (double& v : out.data) v = sigmoid(v);
    cache.output = out;
    return out;
}

void Perceptron::Gradients::accumulate(const Gradients& o) {
    add_inplace(w1, o.w1);
    for (std::size_t i = 0; i < b1.size(); ++i) b1[i] += o.b1[i];
    add_inplace(w2, o.w2);
    for (std::size_t i = 0; i < b2.size(); ++i) b2[i] += o.b2[i];
    if (input.same_shape(o.input)) add_inplace(input, o.input);
}

void Perceptron::Gradients::scale(double s) {
    scale_inplace(w1, s);
    for (double& v : b1) v *= s;
    scale_inplace(w2, s);
    for (double& v : b2) v *= s;
    scale_inplace(input, s);
}

Perceptron::Gradients Perceptron::zero_gradients() const {
    Gradients g;
    g.w1 = Matrix(hidden_dim, input_dim);
    g.b1 = Vec(hidden_dim, 0.0);
    g.w2 = Matrix(output_dim, hidden_dim);
    g.b2 = Vec(output_dim, 0.0);
    g.input = Matrix();
    return g;
}

Perceptron::Gradients Perceptron::backward_pre_activation(const Cache& cache,
                                                          const Matrix& pre_grad) const {
    if (pre_grad.rows != cache.input.rows || pre_grad.cols != output_dim)
        throw ShapeError("Perceptron::backward: gradient shape mismatch");
    Gradients g;
    // output layer
    g.w2 = matmul_atb(pre_grad, cache.hidden);
    g.b2 = column_sums(pre_grad);
    // into hidden activations
    Matrix dhidden = matmul(pre_grad, w2);
    for (std::size_t i = 0; i < dhidden.size(); ++i)
        dhidden.data[i] *= gelu_derivative(cache.pre_hidden.data[i]);
    // hidden layer
    g.w1 = matmul_atb(dhidden, cache.input);
    g.b1 = column_sums(dhidden);
    g.input = matmul(dhidden, w1);
    return g;
}

Perceptron::Gradients Perceptron::backward(const Cache& cache, const Matrix& out_grad) const {
    if (output_activation == OutputActivation::Identity)
        return backward_pre_activation(cache, out_grad);
    // sigmoid: dL/dpre = dL/dout * out * (1 - out)
    Matrix pre_grad = out_grad;
    for (std::size_t i = 0; i < pre_grad.size(); ++i) {
        const double s = cache.output.data[i];
        pre_grad.data[i] *= s * (1.0 - s);
    }
    return backward_pre_activation(cache, pre_grad);
}

std::size_t Perceptron::parameter_count() const {
    return w1.size() + b1.size() + w2.size() + b2.size();
}

std::vector<std::span<double>> Perceptron::parameter_views() {
    return {std::span<double>(w1.data), std::span<double>(b1), std::span<double>(w2.data),
            std::span<double>(b2)};
}

std::vector<std::span<const double>> Perceptron::parameter_views() const {
    return {std::span<const double>(w1.data), std::span<const double>(b1),
            std::span<const double>(w2.data), std::span<const double>(b2)};
}

std::vector<std::span<const double>> Perceptron::gradient_views(const Gradients& g) {
    return {std::span<const double>(g.w1.data), std::span<const double>(g.b1),
            std::span<const double>(g.w2.data), std::span<const double>(g.b2)};
}

} // namespace spacebind
