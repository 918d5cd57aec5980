#pragma once

#include <vector>

namespace datta {

// Unweighted mean of per-class F1 scores; classes absent from both the truth
// and the prediction vectors are excluded from the average.
double macro_f1(const std::vector<int> &truth, const std::vector<int> &predicted);

// Trailing-window macro-F1 series; empty for streams shorter than the window.
// Entry i corresponds to the window ending at record (window - 1 + i).
std::vector<double> rolling_f1(const std::vector<int> &truth, const std::vector<int> &predicted,
                               int window = 100);

double accuracy(const std::vector<int> &truth, const std::vector<int> &predicted);

// Least-squares slope of a series against its index, for trend checks.
double series_slope(const std::vector<double> &series);

} // namespace datta
