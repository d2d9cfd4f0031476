#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ntpp/tensor.hpp"

namespace testutil {

inline ntpp::Tensor random_tensor(ntpp::Shape shape, std::mt19937_64& rng, bool requires_grad = true,
                                  double scale = 1.0) {
    std::normal_distribution<double> n(0.0, scale);
    std::vector<double> v(ntpp::shape_numel(shape));
    for (auto& x : v) x = n(rng);
    return ntpp::Tensor::from(std::move(shape), std::move(v), requires_grad);
}

// Largest relative error between the analytic gradient of f() with respect to
// every entry of each input and its central finite difference.
inline double max_grad_error(std::vector<ntpp::Tensor> inputs, const std::function<ntpp::Tensor()>& f,
                             double h = 1e-5) {
    for (auto& t : inputs) t.zero_grad();
    ntpp::backward(f());
    double worst = 0.0;
    for (auto& t : inputs) {
        const std::vector<double> analytic(t.grad().begin(), t.grad().end());
        auto data = t.mutable_data();
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double keep = data[i];
            double plus, minus;
            {
                ntpp::NoGradGuard g;
                data[i] = keep + h;
                plus = f().item();
                data[i] = keep - h;
                minus = f().item();
            }
            data[i] = keep;
            const double numeric = (plus - minus) / (2 * h);
            const double err = std::fabs(numeric - analytic[i]) / std::max(1e-6, std::fabs(numeric) + std::fabs(analytic[i]));
            worst = std::max(worst, err);
        }
    }
    return worst;
}

}  // namespace testutil
