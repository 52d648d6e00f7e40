#ifndef PFALAB_GRADCHECK_HPP
#define PFALAB_GRADCHECK_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "pfalab/tensor.hpp"

namespace pfalab {

// fn maps a flat point to a scalar loss graph; the point enters the graph as
// a parameter so reverse mode produces its gradient.
using ScalarFn = std::function<Tensor(const Tensor& point)>;

// Compares the reverse-mode gradient of fn at `point` against central finite
// differences. Returns the max per-coordinate relative error with denominator
// max(|analytic|, |numeric|, 1e-8). Caller keeps the point away from relu
// kinks; subgradients there are not checked.
inline double grad_check(const ScalarFn& fn, const std::vector<double>& point,
                         double step = 1e-4) {
    const std::size_t d = point.size();
    Tensor p = Tensor::param({d}, point);
    Tensor loss = fn(p);
    loss.backward();
    std::vector<double> analytic = p.grad();
    if (analytic.empty()) analytic.assign(d, 0.0);

    double max_rel = 0.0;
    std::vector<double> shifted = point;
    for (std::size_t i = 0; i < d; ++i) {
        shifted[i] = point[i] + step;
        double up = fn(Tensor::constant({d}, shifted)).item();
        shifted[i] = point[i] - step;
        double down = fn(Tensor::constant({d}, shifted)).item();
        shifted[i] = point[i];
        const double numeric = (up - down) / (2.0 * step);
        // coordinates agreeing within the FD noise floor pass absolutely;
        // the relative criterion is meaningless below double cancellation
        if (std::fabs(analytic[i] - numeric) < 1e-7) continue;
        const double denom = std::max({std::fabs(analytic[i]), std::fabs(numeric), 1e-8});
        max_rel = std::max(max_rel, std::fabs(analytic[i] - numeric) / denom);
    }
    return max_rel;
}

}  // namespace pfalab

#endif
