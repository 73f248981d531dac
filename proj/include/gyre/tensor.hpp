#pragma once
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace gyre {

// Dense row-major tensor of doubles. Shape is dynamic; data is flat.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::initializer_list<int> s) : shape(s) { data.assign(count(), 0.0); }
    explicit Tensor(std::vector<int> s) : shape(std::move(s)) { data.assign(count(), 0.0); }

    int64_t count() const {
        int64_t c = 1;
        for (int d : shape) c *= d;
        return c;
    }

    double* ptr() { return data.data(); }
    const double* ptr() const { return data.data(); }

    double& operator[](int64_t i) { return data[static_cast<size_t>(i)]; }
    double operator[](int64_t i) const { return data[static_cast<size_t>(i)]; }

    void zero() { std::fill(data.begin(), data.end(), 0.0); }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
};

}  // namespace gyre
