#include "sembprobe/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "sembprobe/error.hpp"

namespace sembprobe::nn {

namespace {

double finite_loss(const std::function<double()>& loss_and_grad) {
    const double loss = loss_and_grad();
    if (!std::isfinite(loss)) {
        throw NumericError("gradient check: loss is not finite");
    }
    return loss;
}

} // namespace

GradCheckResult grad_check(const std::function<double()>& loss_and_grad, const ParamRefs& params,
                           const GradCheckOptions& options) {
    finite_loss(loss_and_grad);
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (const Parameter* p : params) {
        analytic.push_back(p->grad);
    }

    GradCheckResult result;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Parameter& p = *params[pi];
        const std::size_t n = p.size();
        std::size_t stride = 1;
        if (options.max_entries_per_param > 0 && n > options.max_entries_per_param) {
            stride = (n + options.max_entries_per_param - 1) / options.max_entries_per_param;
        }
        for (std::size_t i = 0; i < n; i += stride) {
            const double saved = p.value[i];
            p.value[i] = saved + options.step;
            const double plus = finite_loss(loss_and_grad);
            p.value[i] = saved - options.step;
            const double minus = finite_loss(loss_and_grad);
            p.value[i] = saved;

            const double numeric = (plus - minus) / (2.0 * options.step);
            const double a = analytic[pi][i];
            const double denom = std::max({std::abs(a), std::abs(numeric), options.floor});
            const double err = std::abs(a - numeric) / denom;
            ++result.entries_checked;
            if (err > result.max_relative_error) {
                result.max_relative_error = err;
                result.worst_parameter = p.name;
                result.worst_index = i;
            }
        }
    }

    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        params[pi]->grad = analytic[pi];
    }
    return result;
}

} // namespace sembprobe::nn
