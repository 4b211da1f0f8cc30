#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spacebind/matrix.hpp"
#include "spacebind/rng.hpp"

namespace spacebind {

double gelu(double x);
double gelu_derivative(double x);
double sigmoid(double x);

enum class OutputActivation { Identity, Sigmoid };

// Two-layer perceptron: y = act(W2 * gelu(W1 x + b1) + b2), with gradients
// derived by hand. Used both for projectors (identity output) and routers
// (sigmoid output).
struct Perceptron {
    std::size_t input_dim = 0;
    std::size_t hidden_dim = 0;
    std::size_t output_dim = 0;
    OutputActivation output_activation = OutputActivation::Identity;

    Matrix w1; // hidden x input
    Vec b1;    // hidden
    Matrix w2; // output x hidden
    Vec b2;    // output

    Perceptron() = default;
    Perceptron(std::size_t in, std::size_t hidden, std::size_t out,
               OutputActivation act = OutputActivation::Identity);

    // Gaussian init scaled by 1/sqrt(fan_in); biases zero.
    void init(Rng& rng);

    // x: batch x input_dim -> batch x output_dim
    Matrix forward(const Matrix& x) const;

    struct Cache {
        Matrix input;     // batch x input_dim
        Matrix pre_hidden;// batch x hidden_dim, before gelu
        Matrix hidden;    // batch x hidden_dim, after gelu
        Matrix output;    // batch x output_dim, after activation
    };
    Matrix forward(const Matrix& x, Cache& cache) const;

    struct Gradients {
        Matrix w1;
        Vec b1;
        Matrix w2;
        Vec b2;
        Matrix input; // gradient wrt the batch input

        void accumulate(const Gradients& o);
        void scale(double s);
    };
    Gradients zero_gradients() const;

    // out_grad is dLoss/dOutput (after the output activation).
    Gradients backward(const Cache& cache, const Matrix& out_grad) const;
    // out_grad is dLoss/dPreActivation (before the output activation).
    // Lets losses fold the sigmoid derivative in analytically where the
    // post-activation form would divide by sigmoid'(x).
    Gradients backward_pre_activation(const Cache& cache, const Matrix& pre_grad) const;

    std::size_t parameter_count() const;
    // Flat views over (w1, b1, w2, b2), in that fixed order.
    std::vector<std::span<double>> parameter_views();
    std::vector<std::span<const double>> parameter_views() const;
    static std::vector<std::span<const double>> gradient_views(const Gradients& g);
};

} // namespace spacebind
