// Dense row-major f64 tensor. Deliberately minimal: shape + flat storage,
// 2D (rows x cols) view helpers used by most ops. No views, no strides.
#pragma once

#include <cstdint>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace geoshape {

class TensorError : public std::runtime_error {
public:
    explicit TensorError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Tensor {
    std::vector<long> shape;
    std::vector<double> v;

    Tensor() = default;
    Tensor(std::vector<long> s, std::vector<double> data) : shape(std::move(s)), v(std::move(data)) {
        if (count() != static_cast<long>(v.size()))
            throw TensorError("tensor: data size " + std::to_string(v.size()) +
                              " does not match shape (" + shape_str() + ")");
    }

    static Tensor zeros(std::vector<long> s) {
        long n = 1;
        for (long d : s) n *= d;
        return Tensor(std::move(s), std::vector<double>(static_cast<size_t>(n), 0.0));
    }
    static Tensor full(std::vector<long> s, double x) {
        long n = 1;
        for (long d : s) n *= d;
        return Tensor(std::move(s), std::vector<double>(static_cast<size_t>(n), x));
    }
    static Tensor scalar(double x) { return Tensor({1}, {x}); }
    static Tensor row(std::vector<double> data) {
        long n = static_cast<long>(data.size());
        return Tensor({1, n}, std::move(data));
    }
    static Tensor col(std::vector<double> data) {
        long n = static_cast<long>(data.size());
        return Tensor({n, 1}, std::move(data));
    }

    long count() const {
        long n = 1;
        for (long d : shape) n *= d;
        return n;
    }
    // 2D view: first dim x product of the rest; rank-0/1 tensors are one row.
    long rows() const { return shape.empty() ? 1 : (shape.size() == 1 ? 1 : shape[0]); }
    long cols() const {
        if (shape.empty()) return 1;
        if (shape.size() == 1) return shape[0];
        long c = 1;
        for (size_t i = 1; i < shape.size(); ++i) c *= shape[i];
        return c;
    }

    double& at(long r, long c) { return v[static_cast<size_t>(r * cols() + c)]; }
    double at(long r, long c) const { return v[static_cast<size_t>(r * cols() + c)]; }

    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    bool all_finite() const {
        for (double x : v)
            if (!std::isfinite(x)) return false;
        return true;
    }

    std::string shape_str() const {
        std::string s;
        for (size_t i = 0; i < shape.size(); ++i) {
            if (i) s += "x";
            s += std::to_string(shape[i]);
        }
        return s.empty() ? "scalar" : s;
    }
};

} // namespace geoshape
