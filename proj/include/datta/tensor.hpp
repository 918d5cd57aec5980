#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "datta/errors.hpp"

namespace datta {

// Dense row-major float32 tensor. Rank is dynamic; all layout is contiguous.
struct Tensor {
    std::vector<int64_t> shape;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<int64_t> s) : shape(std::move(s)), data(numel_of(shape), 0.0f) {}
    Tensor(std::vector<int64_t> s, float fill) : shape(std::move(s)), data(numel_of(shape), fill) {}
    Tensor(std::vector<int64_t> s, std::vector<float> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<int64_t>(data.size()) != numel_of(shape))
            throw ShapeError("tensor data size does not match shape");
    }

    static int64_t numel_of(const std::vector<int64_t> &s) {
        int64_t n = 1;
        for (int64_t d : s) n *= d;
        return n;
    }

    int64_t numel() const { return static_cast<int64_t>(data.size()); }
    int rank() const { return static_cast<int>(shape.size()); }
    int64_t dim(int i) const { return shape[static_cast<size_t>(i)]; }

    float *ptr() { return data.data(); }
    const float *ptr() const { return data.data(); }

    float &at2(int64_t i, int64_t j) { return data[static_cast<size_t>(i * shape[1] + j)]; }
    float at2(int64_t i, int64_t j) const { return data[static_cast<size_t>(i * shape[1] + j)]; }
    float &at3(int64_t i, int64_t j, int64_t k) {
        return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
    }
    float at3(int64_t i, int64_t j, int64_t k) const {
        return data[static_cast<size_t>((i * shape[1] + j) * shape[2] + k)];
    }

    void fill(float v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const Tensor &o) const { return shape == o.shape; }

    std::string shape_str() const {
        std::string s = "(";
        for (size_t i = 0; i < shape.size(); ++i) {
            s += std::to_string(shape[i]);
            if (i + 1 < shape.size()) s += ",";
        }
        return s + ")";
    }
};

inline bool all_finite(const Tensor &t) {
    for (float v : t.data)
        if (!std::isfinite(v)) return false;
    return true;
}

} // namespace datta
