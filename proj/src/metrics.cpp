#include "datta/metrics.hpp"

#include <map>
#include <stdexcept>

namespace datta {

double macro_f1(const std::vector<int> &truth, const std::vector<int> &predicted) {
    if (truth.size() != predicted.size())
        throw std::invalid_argument("macro_f1: size mismatch");
    if (truth.empty()) return 0.0;
    std::map<int, long long> tp, fp, fn;
    for (size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] == predicted[i]) {
            ++tp[truth[i]];
        } else {
            ++fn[truth[i]];
            ++fp[predicted[i]];
        }
    }
    std::map<int, bool> present;
    for (int c : truth) present[c] = true;
    for (int c : predicted) present[c] = true;
    double sum = 0.0;
    int classes = 0;
    for (const auto &[c, _] : present) {
        const double denom = 2.0 * tp[c] + fp[c] + fn[c];
        sum += denom > 0.0 ? 2.0 * tp[c] / denom : 0.0;
        ++classes;
    }
    return classes > 0 ? sum / classes : 0.0;
}

std::vector<double> rolling_f1(const std::vector<int> &truth, const std::vector<int> &predicted,
                               int window) {
    if (truth.size() != predicted.size())
        throw std::invalid_argument("rolling_f1: size mismatch");
    std::vector<double> out;
    const size_t n = truth.size();
    if (window <= 0 || n < static_cast<size_t>(window)) return out;
    for (size_t end = static_cast<size_t>(window); end <= n; ++end) {
        std::vector<int> t(truth.begin() + (end - window), truth.begin() + end);
        std::vector<int> p(predicted.begin() + (end - window), predicted.begin() + end);
        out.push_back(macro_f1(t, p));
    }
    return out;
}

double accuracy(const std::vector<int> &truth, const std::vector<int> &predicted) {
    if (truth.size() != predicted.size())
        throw std::invalid_argument("accuracy: size mismatch");
    if (truth.empty()) return 0.0;
    long long hit = 0;
    for (size_t i = 0; i < truth.size(); ++i)
        if (truth[i] == predicted[i]) ++hit;
    return static_cast<double>(hit) / static_cast<double>(truth.size());
}

double series_slope(const std::vector<double> &series) {
    const size_t n = series.size();
    if (n < 2) return 0.0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
        const double x = static_cast<double>(i);
        sx += x;
        sy += series[i];
        sxx += x * x;
        sxy += x * series[i];
    }
    const double d = static_cast<double>(n) * sxx - sx * sx;
    return d == 0.0 ? 0.0 : (static_cast<double>(n) * sxy - sx * sy) / d;
}

} // namespace datta
