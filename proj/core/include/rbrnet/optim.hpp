#pragma once

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "rbrnet/errors.hpp"
#include "rbrnet/model.hpp"

namespace rbrnet {

/// RMSprop accumulator: one squared-gradient average per named parameter.
template <typename T>
struct RmsPropState {
    std::map<std::string, std::vector<T>> sq_avg;
    T rho = static_cast<T>(0.95);
    T eps = static_cast<T>(1e-8);

    static RmsPropState init(const std::vector<NamedTensor<T>>& params, T rho = T(0.95),
                             T eps = T(1e-8)) {
        RmsPropState state;
        state.rho = rho;
        state.eps = eps;
        for (const auto& p : params) {
            if (!p.trainable) continue;
            state.sq_avg.emplace(p.name,
                                 std::vector<T>(static_cast<std::size_t>(p.tensor.numel()), T(0)));
        }
        return state;
    }
};

/// One RMSprop update over every trainable parameter:
///   v <- rho*v + (1-rho)*g^2;  theta <- theta - lr * g / (sqrt(v) + eps).
/// Gradients are read from each tensor's grad buffer. A NaN gradient aborts
/// the step before any parameter or state mutation.
template <typename T>
void rmsprop_step(std::vector<NamedTensor<T>>& params, RmsPropState<T>& state, T lr) {
    if (lr < T(0)) throw ValueError("rmsprop: learning rate must be >= 0");
    for (auto& p : params) {
        if (!p.trainable) continue;
        if (state.sq_avg.find(p.name) == state.sq_avg.end()) {
            throw Error("rmsprop: no optimizer state for parameter '" + p.name + "'");
        }
        if (state.sq_avg[p.name].size() != static_cast<std::size_t>(p.tensor.numel())) {
            throw Error("rmsprop: state size mismatch for parameter '" + p.name + "'");
        }
        for (T g : p.tensor.grad()) {
            if (std::isnan(g)) {
                throw NumericError("rmsprop: NaN gradient in '" + p.name + "', step aborted");
            }
        }
    }
    for (auto& p : params) {
        if (!p.trainable) continue;
        auto& v = state.sq_avg[p.name];
        auto theta = p.tensor.data();
        auto grad = p.tensor.grad();
        for (std::size_t i = 0; i < v.size(); ++i) {
            const T g = grad[i];
            v[i] = state.rho * v[i] + (T(1) - state.rho) * g * g;
            theta[i] -= lr * g / (std::sqrt(v[i]) + state.eps);
        }
    }
}

/// Piecewise-constant decay: lr(epoch) = initial * factor^floor(epoch/period).
struct LrSchedule {
    double initial_lr = 1e-4;
    double drop_factor = 0.4;
    int drop_period_epochs = 10;

    double at(int epoch) const {
        if (epoch < 0) throw ValueError("lr schedule: epoch must be >= 0");
        if (drop_factor <= 0.0 || drop_factor >= 1.0) {
            throw ValueError("lr schedule: drop factor must lie in (0, 1)");
        }
        if (initial_lr <= 0.0 || drop_period_epochs < 1) {
            throw ValueError("lr schedule: bad initial lr or drop period");
        }
        return initial_lr * std::pow(drop_factor, static_cast<double>(epoch / drop_period_epochs));
    }
};

}  // namespace rbrnet
