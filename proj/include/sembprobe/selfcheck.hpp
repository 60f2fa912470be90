#pragma once

#include <string>
#include <vector>

namespace sembprobe {

struct CheckOutcome {
    std::string name;
    bool passed = false;
    std::string detail;
    double seconds = 0.0;
};

/// Finite-difference checks of linear, softmax-CE, probe MLP, LSTM step and
/// a five-token ED unroll. Threshold 1e-5 relative error.
CheckOutcome check_gradients();
/// Sum over contexts of P(context | center) for 100 centers, vocab 1000.
CheckOutcome check_hs_normalization();
/// Exhaustive structure checks of content and order datasets on 500 sentences.
CheckOutcome check_task_structure();
/// Paired t-test and BLEU hand examples.
CheckOutcome check_statistics();

/// The fast suites above, in order.
std::vector<CheckOutcome> run_selfcheck();

} // namespace sembprobe
