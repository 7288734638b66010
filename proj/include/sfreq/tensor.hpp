#pragma once

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace sfreq {

// Dense row-major array of small rank. The last axis is contiguous.
template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s) : shape(std::move(s)), data(checked_size(shape), T{0}) {}
    Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (data.size() != checked_size(shape)) throw std::invalid_argument("tensor: data does not fill shape");
    }

    std::int64_t size() const { return static_cast<std::int64_t>(data.size()); }
    bool empty() const { return data.empty(); }
    int dim(int axis) const { return shape[static_cast<std::size_t>(axis)]; }
    int rank() const { return static_cast<int>(shape.size()); }

    T* begin() { return data.data(); }
    T* end() { return data.data() + data.size(); }
    const T* begin() const { return data.data(); }
    const T* end() const { return data.data() + data.size(); }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    bool same_shape(const Tensor& other) const { return shape == other.shape; }

    static std::size_t checked_size(const std::vector<int>& shape) {
        std::size_t n = 1;
        for (const int d : shape) {
            if (d <= 0) throw std::invalid_argument("tensor: nonpositive dimension");
            n *= static_cast<std::size_t>(d);
        }
        return shape.empty() ? 0 : n;
    }
};

// A trainable tensor together with its accumulated gradient.
template <typename T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    Parameter() = default;
    Parameter(std::string n, std::vector<int> shape)
        : name(std::move(n)), value(shape), grad(std::move(shape)) {}

    void zero_grad() { grad.fill(T{0}); }
};

inline std::string shape_string(const std::vector<int>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ", ";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

}  // namespace sfreq
