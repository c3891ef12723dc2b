// Shared helpers for the test suites: deterministic RNG and central-difference
// gradient checks against the tape.
#pragma once

#include <functional>
#include <random>

#include "geoshape/autodiff.hpp"

namespace gstest {

using geoshape::Tape;
using geoshape::Tensor;
using geoshape::Var;

inline std::mt19937_64 rng(uint64_t seed) { return std::mt19937_64(seed); }

inline Tensor random_tensor(std::vector<long> shape, std::mt19937_64& g, double lo = -1.0, double hi = 1.0) {
    Tensor t = Tensor::zeros(std::move(shape));
    std::uniform_real_distribution<double> d(lo, hi);
    for (auto& x : t.v) x = d(g);
    return t;
}

// Builds a fresh tape around `f`, which maps leaf tensors to a scalar Var.
// Checks d(out)/d(inputs[i]) against central differences.
struct FdReport {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
};

inline FdReport fd_check(const std::vector<Tensor>& inputs,
                         const std::function<Var(Tape&, const std::vector<Var>&)>& f, double eps = 1e-5,
                         double probe_stride = 1) {
    Tape t0;
    std::vector<Var> vars;
    vars.reserve(inputs.size());
    for (const auto& in : inputs) vars.push_back(t0.leaf(in, true));
    Var out = f(t0, vars);
    t0.backward(out);
    std::vector<Tensor> grads;
    for (auto v : vars) grads.push_back(t0.grad(v));

    auto eval = [&](const std::vector<Tensor>& ins) {
        Tape t;
        std::vector<Var> vs;
        for (const auto& in : ins) vs.push_back(t.leaf(in, false));
        return t.val(f(t, vs)).v[0];
    };

    FdReport rep;
    for (size_t i = 0; i < inputs.size(); ++i) {
        for (size_t j = 0; j < inputs[i].v.size(); j += static_cast<size_t>(probe_stride)) {
            std::vector<Tensor> plus = inputs, minus = inputs;
            plus[i].v[j] += eps;
            minus[i].v[j] -= eps;
            double fd = (eval(plus) - eval(minus)) / (2 * eps);
            double an = grads[i].v[j];
            double abs_err = std::fabs(fd - an);
            double rel = abs_err / std::max({std::fabs(fd), std::fabs(an), 1e-8});
            rep.max_abs_err = std::max(rep.max_abs_err, abs_err);
            rep.max_rel_err = std::max(rep.max_rel_err, rel);
        }
    }
    return rep;
}

} // namespace gstest
