#pragma once

#include <algorithm>
#include <cmath>
#include <functional>

#include "rbrnet/ops.hpp"
#include "rbrnet/tape.hpp"
#include "rbrnet/tensor.hpp"

namespace rbrnet {

/// Compare the tape gradient of a scalar-valued function against central
/// finite differences. `f` must rebuild its computation from scratch on each
/// call (tape == nullptr means plain evaluation). Returns the maximum
/// per-element relative error |analytic - numeric| / max(1e-12, |analytic| + |numeric|).
/// Meant to run on the double instantiation; the float one needs a larger eps.
template <typename T>
double grad_check(const std::function<Tensor<T>(Tape<T>*, Tensor<T>&)>& f, const Tensor<T>& x,
                  double eps = 1e-5) {
    Tensor<T> xa = x.clone();
    xa.set_requires_grad(true);
    Tape<T> tape;
    Tensor<T> loss = f(&tape, xa);
    if (loss.numel() != 1) {
        throw GraphError("grad_check: function must be scalar-valued");
    }
    tape.backward(loss);

    double worst = 0.0;
    for (std::int64_t i = 0; i < x.numel(); ++i) {
        Tensor<T> xp = x.clone();
        xp.data()[i] += static_cast<T>(eps);
        Tensor<T> xm = x.clone();
        xm.data()[i] -= static_cast<T>(eps);
        const double fp = static_cast<double>(f(nullptr, xp).item());
        const double fm = static_cast<double>(f(nullptr, xm).item());
        const double numeric = (fp - fm) / (2.0 * eps);
        const double analytic = static_cast<double>(xa.grad()[i]);
        const double denom = std::max(1e-12, std::abs(analytic) + std::abs(numeric));
        worst = std::max(worst, std::abs(analytic - numeric) / denom);
    }
    return worst;
}

}  // namespace rbrnet
