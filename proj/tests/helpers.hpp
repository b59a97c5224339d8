// Shared test utilities: random tensor builders and a central-difference
// gradient checker.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "progressd/common.hpp"
#include "progressd/tensor.hpp"

namespace progressd::testing {

// Random entries in [-1,-margin] u [margin,1]; the margin keeps finite
// differences away from the kinks of relu and abs.
inline nn::Tensor rand_tensor(nn::Shape shape, Rng& rng, bool requires_grad = true,
                              double margin = 0.05) {
    auto n = static_cast<std::size_t>(nn::numel(shape));
    std::vector<double> data(n);
    for (auto& v : data) {
        double mag = margin + (1.0 - margin) * rng.uniform01();
        v = rng.bernoulli(0.5) ? mag : -mag;
    }
    return nn::Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

// Distinct entries separated by at least `gap`, randomly permuted. Max
// pooling over such a map has a stable argmax under small perturbations.
inline nn::Tensor distinct_tensor(nn::Shape shape, Rng& rng, double gap = 0.01,
                                  bool requires_grad = true) {
    auto n = static_cast<std::size_t>(nn::numel(shape));
    std::vector<double> data(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = static_cast<double>(i) * gap;
    for (std::size_t i = n; i > 1; --i)
        std::swap(data[i - 1], data[rng.uniform_index(i)]);
    double offset = rng.uniform(-0.5, 0.5);
    for (auto& v : data) v += offset;
    return nn::Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

// Reduces a tensor to a scalar with fixed random weights so every output
// coordinate influences the loss with a distinct coefficient.
inline nn::Tensor weighted_sum(const nn::Tensor& t, Rng& rng) {
    std::vector<double> w(static_cast<std::size_t>(t.size()));
    for (auto& v : w) v = rng.uniform(-1.0, 1.0);
    auto weights = nn::Tensor::from_data(t.shape(), std::move(w), false);
    return nn::sum_all(nn::mul(t, weights));
}

// Compares analytic gradients of `forward` (a pure scalar function of the
// listed leaves) against central differences with step h. Returns the worst
// relative error over every coordinate of every leaf.
inline double max_grad_err(const std::function<nn::Tensor()>& forward,
                           std::vector<nn::Tensor> leaves, double h = 1e-5) {
    nn::Tensor loss = forward();
    nn::backward(loss);
    std::vector<std::vector<double>> analytic;
    for (auto& leaf : leaves) {
        check(leaf.has_grad(), "gradient check: leaf received no gradient");
        analytic.push_back(leaf.grad());
        leaf.zero_grad();
    }
    double worst = 0.0;
    nn::NoGradGuard guard;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        auto& value = leaves[li].value_mut();
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double saved = value[i];
            value[i] = saved + h;
            double up = forward().item();
            value[i] = saved - h;
            double down = forward().item();
            value[i] = saved;
            double numeric = (up - down) / (2.0 * h);
            double a = analytic[li][i];
            double err = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1e-3});
            worst = std::max(worst, err);
        }
    }
    return worst;
}

} // namespace progressd::testing
