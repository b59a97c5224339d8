// Adam optimizer over a named parameter list.
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "progressd/common.hpp"
#include "progressd/tensor.hpp"

namespace progressd::nn {

struct NamedParam {
    std::string name;
    Tensor tensor;
};

using ParamList = std::vector<NamedParam>;

// Moment buffers parallel the parameter list the state was built for; a
// mismatched list on a later step is rejected.
struct AdamState {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    std::int64_t step_count = 0;
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    std::vector<std::uint64_t> ids;
};

inline AdamState adam_init(const ParamList& params, double lr = 1e-4,
                           double beta1 = 0.9, double beta2 = 0.999,
                           double eps = 1e-8) {
    check(lr > 0.0, "adam: learning rate must be positive, got ", lr);
    check(beta1 >= 0.0 && beta1 < 1.0, "adam: beta1 must be in [0,1), got ", beta1);
    check(beta2 >= 0.0 && beta2 < 1.0, "adam: beta2 must be in [0,1), got ", beta2);
    AdamState st;
    st.lr = lr;
    st.beta1 = beta1;
    st.beta2 = beta2;
    st.eps = eps;
    for (const auto& p : params) {
        st.m.emplace_back(p.tensor.size(), 0.0);
        st.v.emplace_back(p.tensor.size(), 0.0);
        st.ids.push_back(p.tensor.id());
    }
    return st;
}

// One bias-corrected update. Every parameter must carry a gradient from a
// preceding backward sweep; gradients are zeroed after the step.
inline void adam_step(ParamList& params, AdamState& st) {
    check(params.size() == st.ids.size(),
          "adam_step: parameter list size changed since adam_init");
    st.step_count += 1;
    const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step_count));
    const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step_count));
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& p = params[pi];
        check(p.tensor.id() == st.ids[pi],
              "adam_step: parameter '", p.name, "' is not the tensor this state was built for");
        check(p.tensor.has_grad(), "adam_step: parameter '", p.name,
              "' has no gradient; run backward first");
        auto& value = p.tensor.value_mut();
        auto& grad = p.tensor.grad_mut();
        auto& m = st.m[pi];
        auto& v = st.v[pi];
        for (std::size_t i = 0; i < value.size(); ++i) {
            double g = grad[i];
            check(std::isfinite(g), "adam_step: non-finite gradient in '", p.name, "'");
            m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g;
            v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g * g;
            double mhat = m[i] / bc1;
            double vhat = v[i] / bc2;
            value[i] -= st.lr * mhat / (std::sqrt(vhat) + st.eps);
            check(std::isfinite(value[i]), "adam_step: parameter '", p.name,
                  "' became non-finite");
        }
        p.tensor.zero_grad();
    }
}

} // namespace progressd::nn
