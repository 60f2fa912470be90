#pragma once

#include <cstddef>
#include <functional>
#include <string>

#include "sembprobe/nn.hpp"

namespace sembprobe::nn {

struct GradCheckOptions {
    double step = 1e-5;
    /// Denominator floor: errors are |a - n| / max(|a|, |n|, floor).
    double floor = 1e-3;
    /// Check at most this many entries per parameter (evenly strided); 0 = all.
    std::size_t max_entries_per_param = 0;
};

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t entries_checked = 0;
    std::string worst_parameter;
    std::size_t worst_index = 0;
};

/// Compares analytic gradients against central finite differences.
///
/// loss_and_grad must zero and refill the gradients of params, and return the
/// loss; it is called once for the analytic pass and twice per checked entry.
/// Parameter values and gradients are restored on return. Throws NumericError
/// on a non-finite loss.
GradCheckResult grad_check(const std::function<double()>& loss_and_grad, const ParamRefs& params,
                           const GradCheckOptions& options = {});

} // namespace sembprobe::nn
