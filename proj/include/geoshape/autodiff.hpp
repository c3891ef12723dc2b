// Reverse-mode autodiff over dense f64 tensors.
//
// Define-by-run tape: every op eagerly computes its value and registers a
// backward closure. Node ids are creation-ordered, so reverse id order is a
// valid topological order for the backward sweep. Every op verifies its
// output is finite and throws otherwise. Evaluation is single-threaded and
// deterministic: identical inputs give bitwise-identical values and grads.
#pragma once

#include <algorithm>
#include <cstring>
#include <functional>
#include <limits>
#include <memory>

#include "tensor.hpp"

namespace geoshape {

class NonFiniteError : public std::runtime_error {
public:
    explicit NonFiniteError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

class Tape {
public:
    // ---- construction of leaves -------------------------------------------
    Var leaf(Tensor t, bool needs_grad) {
        return push(std::move(t), needs_grad, nullptr, "leaf");
    }
    Var constant(Tensor t) { return leaf(std::move(t), false); }
    Var constant_scalar(double x) { return constant(Tensor::scalar(x)); }

    const Tensor& val(Var a) const { return nodes_[check(a)].val; }
    bool needs_grad(Var a) const { return nodes_[check(a)].needs_grad; }

    // Gradient of the last backward() output w.r.t. `a`. A leaf that the
    // output does not depend on gets a zero gradient, not an error.
    Tensor grad(Var a) const {
        int id = check(a);
        if (id < static_cast<int>(grads_.size()) && !grads_[id].v.empty()) return grads_[id];
        return Tensor::zeros(nodes_[id].val.shape);
    }

    size_t size() const { return nodes_.size(); }

    // ---- elementwise binary with (r,c)/(1,c)/(r,1)/(1,1) broadcasting ------
    Var add(Var a, Var b) {
        return broadcast_op(a, b, "add",
            [](double x, double y) { return x + y; },
            [](double, double, double g, double& da, double& db) { da = g; db = g; });
    }
    Var sub(Var a, Var b) {
        return broadcast_op(a, b, "sub",
            [](double x, double y) { return x - y; },
            [](double, double, double g, double& da, double& db) { da = g; db = -g; });
    }
    Var mul(Var a, Var b) {
        return broadcast_op(a, b, "mul",
            [](double x, double y) { return x * y; },
            [](double x, double y, double g, double& da, double& db) { da = g * y; db = g * x; });
    }
    Var div(Var a, Var b) {
        return broadcast_op(a, b, "div",
            [](double x, double y) { return x / y; },
            [](double x, double y, double g, double& da, double& db) {
                da = g / y;
                db = -g * x / (y * y);
            });
    }

    Var smul(Var a, double c) {
        const Tensor& x = nodes_[check(a)].val;
        Tensor out = x;
        for (double& e : out.v) e *= c;
        int ia = a.id;
        return push(std::move(out), nodes_[ia].needs_grad,
                    [ia, c](Tape& t, const Tensor& g) {
                        Tensor ga = g;
                        for (double& e : ga.v) e *= c;
                        t.acc(ia, ga);
                    },
                    "smul");
    }
    Var sadd(Var a, double c) {
        const Tensor& x = nodes_[check(a)].val;
        Tensor out = x;
        for (double& e : out.v) e += c;
        int ia = a.id;
        return push(std::move(out), nodes_[ia].needs_grad,
                    [ia](Tape& t, const Tensor& g) { t.acc(ia, g); }, "sadd");
    }
    Var neg(Var a) { return smul(a, -1.0); }

    // ---- elementwise unary --------------------------------------------------
    Var exp_(Var a) {
        return unary_op(a, "exp", [](double x) { return std::exp(x); },
                        [](double, double y, double g) { return g * y; });
    }
    Var sqrt_(Var a) {
        return unary_op(a, "sqrt", [](double x) { return std::sqrt(x); },
                        [](double, double y, double g) { return 0.5 * g / y; });
    }
    Var sin_(Var a) {
        return unary_op(a, "sin", [](double x) { return std::sin(x); },
                        [](double x, double, double g) { return g * std::cos(x); });
    }
    Var cos_(Var a) {
        return unary_op(a, "cos", [](double x) { return std::cos(x); },
                        [](double x, double, double g) { return -g * std::sin(x); });
    }
    Var atan_(Var a) {
        return unary_op(a, "atan", [](double x) { return std::atan(x); },
                        [](double x, double, double g) { return g / (1.0 + x * x); });
    }
    Var relu(Var a) {
        return unary_op(a, "relu", [](double x) { return x > 0.0 ? x : 0.0; },
                        [](double x, double, double g) { return x > 0.0 ? g : 0.0; });
    }
    Var abs_(Var a) {
        return unary_op(a, "abs", [](double x) { return std::fabs(x); },
                        [](double x, double, double g) { return x > 0.0 ? g : (x < 0.0 ? -g : 0.0); });
    }
    Var square(Var a) { return mul(a, a); }

    // atan2(y, x), same-shape inputs, range (-pi, pi].
    Var atan2_(Var y, Var x) {
        const Tensor& ty = nodes_[check(y)].val;
        const Tensor& tx = nodes_[check(x)].val;
        if (!ty.same_shape(tx))
            throw TensorError("atan2: shape mismatch (" + ty.shape_str() + ") vs (" + tx.shape_str() + ")");
        Tensor out = ty;
        for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = std::atan2(ty.v[i], tx.v[i]);
        int iy = y.id, ix = x.id;
        bool ng = nodes_[iy].needs_grad || nodes_[ix].needs_grad;
        return push(std::move(out), ng,
                    [iy, ix](Tape& t, const Tensor& g) {
                        const Tensor& yy = t.nodes_[iy].val;
                        const Tensor& xx = t.nodes_[ix].val;
                        Tensor gy = Tensor::zeros(yy.shape), gx = Tensor::zeros(xx.shape);
                        for (size_t i = 0; i < g.v.size(); ++i) {
                            double d = xx.v[i] * xx.v[i] + yy.v[i] * yy.v[i];
                            gy.v[i] = g.v[i] * xx.v[i] / d;
                            gx.v[i] = -g.v[i] * yy.v[i] / d;
                        }
                        t.acc(iy, gy);
                        t.acc(ix, gx);
                    },
                    "atan2");
    }

    // ---- matmul -------------------------------------------------------------
    Var matmul(Var a, Var b) {
        const Tensor& A = nodes_[check(a)].val;
        const Tensor& B = nodes_[check(b)].val;
        long M = A.rows(), K = A.cols(), K2 = B.rows(), N = B.cols();
        if (K != K2)
            throw TensorError("matmul: inner dims differ (" + A.shape_str() + ") x (" + B.shape_str() + ")");
        Tensor out = Tensor::zeros({M, N});
        mm(A.v.data(), B.v.data(), out.v.data(), M, K, N, false, false);
        int ia = a.id, ib = b.id;
        bool ng = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
        return push(std::move(out), ng,
                    [ia, ib, M, K, N](Tape& t, const Tensor& g) {
                        const Tensor& A_ = t.nodes_[ia].val;
                        const Tensor& B_ = t.nodes_[ib].val;
                        if (t.nodes_[ia].needs_grad) {
                            Tensor ga = Tensor::zeros(A_.shape);
                            mm(g.v.data(), B_.v.data(), ga.v.data(), M, N, K, false, true); // g * B^T
                            t.acc(ia, ga);
                        }
                        if (t.nodes_[ib].needs_grad) {
                            Tensor gb = Tensor::zeros(B_.shape);
                            mm(A_.v.data(), g.v.data(), gb.v.data(), K, M, N, true, false); // A^T * g
                            t.acc(ib, gb);
                        }
                    },
                    "matmul");
    }

    // ---- structural ops ------------------------------------------------------
    // out[i, :] = a[idx[i], :]; backward scatter-adds. `idx` is captured by
    // shared_ptr so large index maps can be reused across calls cheaply.
    Var gather_rows(Var a, std::shared_ptr<const std::vector<long>> idx) {
        const Tensor& A = nodes_[check(a)].val;
        long C = A.cols(), R = A.rows();
        long n = static_cast<long>(idx->size());
        std::vector<long> oshape = A.shape;
        if (oshape.empty() || oshape.size() == 1)
            oshape = {n, C};
        else
            oshape[0] = n;
        Tensor out = Tensor::zeros(oshape);
        for (long i = 0; i < n; ++i) {
            long s = (*idx)[static_cast<size_t>(i)];
            if (s < 0 || s >= R) throw TensorError("gather_rows: index out of range");
            std::memcpy(&out.v[static_cast<size_t>(i * C)], &A.v[static_cast<size_t>(s * C)],
                        static_cast<size_t>(C) * sizeof(double));
        }
        int ia = a.id;
        return push(std::move(out), nodes_[ia].needs_grad,
                    [ia, idx, C](Tape& t, const Tensor& g) {
                        Tensor ga = Tensor::zeros(t.nodes_[ia].val.shape);
                        long n2 = static_cast<long>(idx->size());
                        for (long i = 0; i < n2; ++i) {
                            long s = (*idx)[static_cast<size_t>(i)];
                            for (long c = 0; c < C; ++c)
                                ga.v[static_cast<size_t>(s * C + c)] += g.v[static_cast<size_t>(i * C + c)];
                        }
                        t.acc(ia, ga);
                    },
                    "gather_rows");
    }
    Var gather_rows(Var a, const std::vector<long>& idx) {
        return gather_rows(a, std::make_shared<const std::vector<long>>(idx));
    }

    Var reshape(Var a, std::vector<long> shape) {
        const Tensor& A = nodes_[check(a)].val;
        long n = 1;
        for (long d : shape) n *= d;
        if (n != A.count()) throw TensorError("reshape: element count mismatch");
        Tensor out = A;
        out.shape = std::move(shape);
        int ia = a.id;
        return push(std::move(out), nodes_[ia].needs_grad,
                    [ia](Tape& t, const Tensor& g) {
                        Tensor gr = g;
                        gr.shape = t.nodes_[ia].val.shape;
                        t.acc(ia, gr);
                    },
                    "reshape");
    }

    Var slice_cols(Var a, long b, long e) {
        const Tensor& A = nodes_[check(a)].val;
        long R = A.rows(), C = A.cols();
        if (b < 0 || e > C || b >= e) throw TensorError("slice_cols: bad range");
        Tensor out = Tensor::zeros({R, e - b});
        for (long r = 0; r < R; ++r)
            std::memcpy(&out.v[static_cast<size_t>(r * (e - b))], &A.v[static_cast<size_t>(r * C + b)],
                        static_cast<size_t>(e - b) * sizeof(double));
        int ia = a.id;
        return push(std::move(out), nodes_[ia].needs_grad,
                    [ia, b, e, C](Tape& t, const Tensor& g) {
                        Tensor ga = Tensor::zeros(t.nodes_[ia].val.shape);
                        long R2 = ga.rows();
                        for (long r = 0; r < R2; ++r)
                            for (long c = b; c < e; ++c)
                                ga.v[static_cast<size_t>(r * C + c)] = g.v[static_cast<size_t>(r * (e - b) + (c - b))];
                        t.acc(ia, ga);
                    },
                    "slice_cols");
    }

    Var concat_cols(Var a, Var b) {
        const Tensor& A = nodes_[check(a)].val;
        const Tensor& B = nodes_[check(b)].val;
        long R = A.rows(), Ca = A.cols(), Cb = B.cols();
        if (B.rows() != R) throw TensorError("concat_cols: row mismatch");
        Tensor out = Tensor::zeros({R, Ca + Cb});
        for (long r = 0; r < R; ++r) {
            std::memcpy(&out.v[static_cast<size_t>(r * (Ca + Cb))], &A.v[static_cast<size_t>(r * Ca)],
                        static_cast<size_t>(Ca) * sizeof(double));
            std::memcpy(&out.v[static_cast<size_t>(r * (Ca + Cb) + Ca)], &B.v[static_cast<size_t>(r * Cb)],
                        static_cast<size_t>(Cb) * sizeof(double));
        }
        int ia = a.id, ib = b.id;
        bool ng = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
        return push(std::move(out), ng,
                    [ia, ib, R, Ca, Cb](Tape& t, const Tensor& g) {
                        Tensor ga = Tensor::zeros(t.nodes_[ia].val.shape);
                        Tensor gb = Tensor::zeros(t.nodes_[ib].val.shape);
                        for (long r = 0; r < R; ++r) {
                            for (long c = 0; c < Ca; ++c)
                                ga.v[static_cast<size_t>(r * Ca + c)] = g.v[static_cast<size_t>(r * (Ca + Cb) + c)];
                            for (long c = 0; c < Cb; ++c)
                                gb.v[static_cast<size_t>(r * Cb + c)] = g.v[static_cast<size_t>(r * (Ca + Cb) + Ca + c)];
                        }
                        t.acc(ia, ga);
                        t.acc(ib, gb);
                    },
                    "concat_cols");
    }

    Var concat_rows(Var a, Var b) {
        const Tensor& A = nodes_[check(a)].val;
        const Tensor& B = nodes_[check(b)].val;
        long C = A.cols();
        if (B.cols() != C) throw TensorError("concat_rows: col mismatch");
        long Ra = A.rows(), Rb = B.rows();
        Tensor out = Tensor::zeros({Ra + Rb, C});
        std::memcpy(out.v.data(), A.v.data(), A.v.size() * sizeof(double));
        std::memcpy(out.v.data() + A.v.size(), B.v.data(), B.v.size() * sizeof(double));
        int ia = a.id, ib = b.id;
        bool ng = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
        return push(std::move(out), ng,
                    [ia, ib, Ra, Rb, C](Tape& t, const Tensor& g) {
                        Tensor ga = Tensor::zeros(t.nodes_[ia].val.shape);
                        Tensor gb = Tensor::zeros(t.nodes_[ib].val.shape);
                        std::memcpy(ga.v.data(), g.v.data(), static_cast<size_t>(Ra * C) * sizeof(double));
                        std::memcpy(gb.v.data(), g.v.data() + Ra * C, static_cast<size_t>(Rb * C) * sizeof(double));
                        t.acc(ia, ga);
                        t.acc(ib, gb);
                    },
                    "concat_rows");
    }

    // out[n, k*Cb + c] = a[n, k] * b[n, c]  (row-wise outer product)
    Var rowwise_kron(Var a, Var b) {
        const Tensor& A = nodes_[check(a)].val;
        const Tensor& B = nodes_[check(b)].val;
        long R = A.rows(), K = A.cols(), C = B.cols();
        if (B.rows() != R) throw TensorError("rowwise_kron: row mismatch");
        Tensor out = Tensor::zeros({R, K * C});
        for (long r = 0; r < R; ++r) {
            const double* ar = &A.v[static_cast<size_t>(r * K)];
            const double* br = &B.v[static_cast<size_t>(r * C)];
            double* o = &out.v[static_cast<size_t>(r * K * C)];
            for (long k = 0; k < K; ++k) {
                double av = ar[k];
                for (long c = 0; c < C; ++c) o[k * C + c] = av * br[c];
            }
        }
        int ia = a.id, ib = b.id;
        bool ng = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
        return push(std::move(out), ng,
                    [ia, ib, R, K, C](Tape& t, const Tensor& g) {
                        const Tensor& A_ = t.nodes_[ia].val;
                        const Tensor& B_ = t.nodes_[ib].val;
                        Tensor ga = Tensor::zeros(A_.shape);
                        Tensor gb = Tensor::zeros(B_.shape);
                        for (long r = 0; r < R; ++r) {
                            const double* ar = &A_.v[static_cast<size_t>(r * K)];
                            const double* br = &B_.v[static_cast<size_t>(r * C)];
                            const double* gr = &g.v[static_cast<size_t>(r * K * C)];
                            double* gar = &ga.v[static_cast<size_t>(r * K)];
                            double* gbr = &gb.v[static_cast<size_t>(r * C)];
                            for (long k = 0; k < K; ++k) {
                                double s = 0.0, av = ar[k];
                                for (long c = 0; c < C; ++c) {
                                    s += gr[k * C + c] * br[c];
                                    gbr[c] += gr[k * C + c] * av;
                                }
                                gar[k] = s;
                            }
                        }
                        t.acc(ia, ga);
                        t.acc(ib, gb);
                    },
                    "rowwise_kron");
    }

    // ---- reductions ----------------------------------------------------------
    Var row_sum(Var a) {  // N x C -> N x 1
        const Tensor& A = nodes_[check(a)].val;
        long R = A.rows(), C = A.cols();
        Tensor out = Tensor::zeros({R, 1});
        for (long r = 0; r < R; ++r) {
            double s = 0.0;
            for (long c = 0; c < C; ++c) s += A.v[static_cast<size_t>(r * C + c)];
            out.v[static_cast<size_t>(r)] = s;
        }
        int ia = a.id;
        return push(std::move(out), nodes_[ia].needs_grad,
                    [ia, R, C](Tape& t, const Tensor& g) {
                        Tensor ga = Tensor::zeros(t.nodes_[ia].val.shape);
                        for (long r = 0; r < R; ++r)
                            for (long c = 0; c < C; ++c)
                                ga.v[static_cast<size_t>(r * C + c)] = g.v[static_cast<size_t>(r)];
                        t.acc(ia, ga);
                    },
                    "row_sum");
    }

    Var sum_all(Var a) {
        const Tensor& A = nodes_[check(a)].val;
        double s = 0.0;
        for (double x : A.v) s += x;
        int ia = a.id;
        return push(Tensor::scalar(s), nodes_[ia].needs_grad,
                    [ia](Tape& t, const Tensor& g) {
                        Tensor ga = Tensor::full(t.nodes_[ia].val.shape, g.v[0]);
                        t.acc(ia, ga);
                    },
                    "sum_all");
    }

    // Mean over every element (the all-vertex mean pool).
    Var mean_pool_all(Var a) {
        long n = nodes_[check(a)].val.count();
        return smul(sum_all(a), 1.0 / static_cast<double>(n));
    }

    // (G*gs) x C -> G x C, mean over each consecutive row group.
    Var group_mean(Var a, long gs) {
        const Tensor& A = nodes_[check(a)].val;
        long R = A.rows(), C = A.cols();
        if (gs <= 0 || R % gs != 0) throw TensorError("group_mean: rows not divisible by group size");
        long G = R / gs;
        Tensor out = Tensor::zeros({G, C});
        for (long r = 0; r < R; ++r)
            for (long c = 0; c < C; ++c)
                out.v[static_cast<size_t>((r / gs) * C + c)] += A.v[static_cast<size_t>(r * C + c)];
        for (double& x : out.v) x /= static_cast<double>(gs);
        int ia = a.id;
        return push(std::move(out), nodes_[ia].needs_grad,
                    [ia, gs, C](Tape& t, const Tensor& g) {
                        Tensor ga = Tensor::zeros(t.nodes_[ia].val.shape);
                        long R2 = ga.rows();
                        for (long r = 0; r < R2; ++r)
                            for (long c = 0; c < C; ++c)
                                ga.v[static_cast<size_t>(r * C + c)] =
                                    g.v[static_cast<size_t>((r / gs) * C + c)] / static_cast<double>(gs);
                        t.acc(ia, ga);
                    },
                    "group_mean");
    }

    Var group_max(Var a, long gs) { return group_extreme(a, gs, true); }
    Var group_min(Var a, long gs) { return group_extreme(a, gs, false); }

    // ---- dilated 2D convolution (valid padding, cross-correlation) -----------
    // input (H, W, Ci), kernel (k, k, Ci, Co), output (H-(k-1)d, W-(k-1)d, Co).
    Var dilated_conv2d(Var input, Var kernel, long d) {
        const Tensor& I = nodes_[check(input)].val;
        const Tensor& K = nodes_[check(kernel)].val;
        if (I.shape.size() != 3 || K.shape.size() != 4)
            throw TensorError("dilated_conv2d: input must be HxWxCi, kernel kxkxCixCo");
        long H = I.shape[0], W = I.shape[1], Ci = I.shape[2];
        long k = K.shape[0], Ci2 = K.shape[2], Co = K.shape[3];
        if (K.shape[1] != k || Ci2 != Ci) throw TensorError("dilated_conv2d: kernel shape mismatch");
        if (d < 1) throw TensorError("dilated_conv2d: dilation must be >= 1");
        long Ho = H - (k - 1) * d, Wo = W - (k - 1) * d;
        if (Ho <= 0 || Wo <= 0)
            throw TensorError("dilated_conv2d: output dimension <= 0 (input " + I.shape_str() + ")");
        Tensor out = Tensor::zeros({Ho, Wo, Co});
        for (long oy = 0; oy < Ho; ++oy)
            for (long ox = 0; ox < Wo; ++ox)
                for (long ky = 0; ky < k; ++ky)
                    for (long kx = 0; kx < k; ++kx) {
                        const double* ip = &I.v[static_cast<size_t>(((oy + ky * d) * W + ox + kx * d) * Ci)];
                        const double* kp = &K.v[static_cast<size_t>(((ky * k + kx) * Ci) * Co)];
                        double* op = &out.v[static_cast<size_t>((oy * Wo + ox) * Co)];
                        for (long ci = 0; ci < Ci; ++ci)
                            for (long co = 0; co < Co; ++co) op[co] += ip[ci] * kp[ci * Co + co];
                    }
        int ii = input.id, ik = kernel.id;
        bool ng = nodes_[ii].needs_grad || nodes_[ik].needs_grad;
        return push(std::move(out), ng,
                    [ii, ik, H, W, Ci, k, Co, d, Ho, Wo](Tape& t, const Tensor& g) {
                        const Tensor& I_ = t.nodes_[ii].val;
                        const Tensor& K_ = t.nodes_[ik].val;
                        Tensor gi = Tensor::zeros(I_.shape);
                        Tensor gk = Tensor::zeros(K_.shape);
                        for (long oy = 0; oy < Ho; ++oy)
                            for (long ox = 0; ox < Wo; ++ox)
                                for (long ky = 0; ky < k; ++ky)
                                    for (long kx = 0; kx < k; ++kx) {
                                        size_t ibase = static_cast<size_t>(((oy + ky * d) * W + ox + kx * d) * Ci);
                                        size_t kbase = static_cast<size_t>(((ky * k + kx) * Ci) * Co);
                                        const double* gp = &g.v[static_cast<size_t>((oy * Wo + ox) * Co)];
                                        for (long ci = 0; ci < Ci; ++ci)
                                            for (long co = 0; co < Co; ++co) {
                                                gi.v[ibase + static_cast<size_t>(ci)] +=
                                                    gp[co] * K_.v[kbase + static_cast<size_t>(ci * Co + co)];
                                                gk.v[kbase + static_cast<size_t>(ci * Co + co)] +=
                                                    gp[co] * I_.v[ibase + static_cast<size_t>(ci)];
                                            }
                                    }
                        t.acc(ii, gi);
                        t.acc(ik, gk);
                    },
                    "dilated_conv2d");
    }

    // ---- custom op hook (used by the differentiable remesher) ----------------
    Var custom(Tensor value, bool needs_grad, std::function<void(Tape&, const Tensor&)> back,
               const char* name) {
        return push(std::move(value), needs_grad, std::move(back), name);
    }
    void accumulate(int node_id, const Tensor& g) { acc(node_id, g); }

    // ---- backward -------------------------------------------------------------
    // Seeds d(out)/d(out) = 1 and sweeps the tape in reverse creation order.
    void backward(Var out) {
        int oid = check(out);
        if (nodes_[oid].val.count() != 1)
            throw TensorError("backward: output must be scalar, got (" + nodes_[oid].val.shape_str() + ")");
        grads_.assign(nodes_.size(), Tensor{});
        grads_[oid] = Tensor::full(nodes_[oid].val.shape, 1.0);
        for (int id = oid; id >= 0; --id) {
            if (grads_[id].v.empty() || !nodes_[id].needs_grad) continue;
            if (nodes_[id].back) nodes_[id].back(*this, grads_[id]);
        }
    }

private:
    struct Node {
        Tensor val;
        bool needs_grad = false;
        std::function<void(Tape&, const Tensor&)> back;
    };
    std::vector<Node> nodes_;
    std::vector<Tensor> grads_;

    int check(Var a) const {
        if (!a.valid() || a.id >= static_cast<int>(nodes_.size()))
            throw TensorError("invalid tape variable");
        return a.id;
    }

    Var push(Tensor val, bool needs_grad, std::function<void(Tape&, const Tensor&)> back, const char* op) {
        if (!val.all_finite())
            throw NonFiniteError(std::string("non-finite value produced by op '") + op + "'");
        nodes_.push_back(Node{std::move(val), needs_grad, std::move(back)});
        return Var{static_cast<int>(nodes_.size() - 1)};
    }

    void acc(int id, const Tensor& g) {
        if (!nodes_[id].needs_grad) return;
        if (grads_[id].v.empty()) {
            grads_[id] = g;
        } else {
            for (size_t i = 0; i < g.v.size(); ++i) grads_[id].v[i] += g.v[i];
        }
    }

    template <class F, class B>
    Var broadcast_op(Var a, Var b, const char* name, F fwd, B bwd) {
        const Tensor& A = nodes_[check(a)].val;
        const Tensor& B_ = nodes_[check(b)].val;
        long ra = A.rows(), ca = A.cols(), rb = B_.rows(), cb = B_.cols();
        if (!((ra == rb || ra == 1 || rb == 1) && (ca == cb || ca == 1 || cb == 1)))
            throw TensorError(std::string(name) + ": incompatible shapes (" + A.shape_str() + ") vs (" +
                              B_.shape_str() + ")");
        long R = std::max(ra, rb), C = std::max(ca, cb);
        std::vector<long> oshape = (A.count() >= B_.count()) ? A.shape : B_.shape;
        long ocount = 1;
        for (long d : oshape) ocount *= d;
        Tensor out = Tensor::zeros({R, C});
        if (R * C == ocount) out.shape = oshape;
        for (long r = 0; r < R; ++r)
            for (long c = 0; c < C; ++c)
                out.v[static_cast<size_t>(r * C + c)] =
                    fwd(A.v[static_cast<size_t>((ra == 1 ? 0 : r) * ca + (ca == 1 ? 0 : c))],
                        B_.v[static_cast<size_t>((rb == 1 ? 0 : r) * cb + (cb == 1 ? 0 : c))]);
        int ia = a.id, ib = b.id;
        bool ng = nodes_[ia].needs_grad || nodes_[ib].needs_grad;
        return push(std::move(out), ng,
                    [ia, ib, ra, ca, rb, cb, R, C, bwd](Tape& t, const Tensor& g) {
                        const Tensor& Av = t.nodes_[ia].val;
                        const Tensor& Bv = t.nodes_[ib].val;
                        Tensor ga = Tensor::zeros(Av.shape), gb = Tensor::zeros(Bv.shape);
                        for (long r = 0; r < R; ++r)
                            for (long c = 0; c < C; ++c) {
                                size_t iaidx = static_cast<size_t>((ra == 1 ? 0 : r) * ca + (ca == 1 ? 0 : c));
                                size_t ibidx = static_cast<size_t>((rb == 1 ? 0 : r) * cb + (cb == 1 ? 0 : c));
                                double da = 0.0, db = 0.0;
                                bwd(Av.v[iaidx], Bv.v[ibidx], g.v[static_cast<size_t>(r * C + c)], da, db);
                                ga.v[iaidx] += da;
                                gb.v[ibidx] += db;
                            }
                        t.acc(ia, ga);
                        t.acc(ib, gb);
                    },
                    name);
    }

    template <class F, class B>
    Var unary_op(Var a, const char* name, F fwd, B bwd) {
        const Tensor& A = nodes_[check(a)].val;
        Tensor out = A;
        for (double& x : out.v) x = fwd(x);
        int ia = a.id;
        // Saved output is captured for ops whose derivative reuses it.
        auto saved = std::make_shared<Tensor>(out);
        return push(std::move(out), nodes_[ia].needs_grad,
                    [ia, saved, bwd](Tape& t, const Tensor& g) {
                        const Tensor& x = t.nodes_[ia].val;
                        Tensor ga = Tensor::zeros(x.shape);
                        for (size_t i = 0; i < g.v.size(); ++i) ga.v[i] = bwd(x.v[i], saved->v[i], g.v[i]);
                        t.acc(ia, ga);
                    },
                    name);
    }

    Var group_extreme(Var a, long gs, bool take_max) {
        const Tensor& A = nodes_[check(a)].val;
        long R = A.rows(), C = A.cols();
        if (gs <= 0 || R % gs != 0) throw TensorError("group_extreme: rows not divisible by group size");
        long G = R / gs;
        Tensor out = Tensor::zeros({G, C});
        auto argidx = std::make_shared<std::vector<long>>(static_cast<size_t>(G * C));
        for (long g = 0; g < G; ++g)
            for (long c = 0; c < C; ++c) {
                long best = g * gs;
                double bv = A.v[static_cast<size_t>(best * C + c)];
                for (long r = g * gs + 1; r < (g + 1) * gs; ++r) {
                    double x = A.v[static_cast<size_t>(r * C + c)];
                    if (take_max ? (x > bv) : (x < bv)) {
                        bv = x;
                        best = r;
                    }
                }
                out.v[static_cast<size_t>(g * C + c)] = bv;
                (*argidx)[static_cast<size_t>(g * C + c)] = best;
            }
        int ia = a.id;
        return push(std::move(out), nodes_[ia].needs_grad,
                    [ia, argidx, C, G](Tape& t, const Tensor& g) {
                        Tensor ga = Tensor::zeros(t.nodes_[ia].val.shape);
                        for (long gi = 0; gi < G; ++gi)
                            for (long c = 0; c < C; ++c)
                                ga.v[static_cast<size_t>((*argidx)[static_cast<size_t>(gi * C + c)] * C + c)] +=
                                    g.v[static_cast<size_t>(gi * C + c)];
                        t.acc(ia, ga);
                    },
                    take_max ? "group_max" : "group_min");
    }

    // C (MxN) = op(A) * op(B); ta/tb transpose flags refer to the stored layout.
    static void mm(const double* A, const double* B, double* Cc, long M, long K, long N, bool ta, bool tb) {
        // ikj ordering over the contiguous dimension for cache friendliness.
        for (long i = 0; i < M; ++i)
            for (long kk = 0; kk < K; ++kk) {
                double a = ta ? A[kk * M + i] : A[i * K + kk];
                if (a == 0.0) continue;
                const double* brow = tb ? nullptr : &B[kk * N];
                double* crow = &Cc[i * N];
                if (!tb) {
                    for (long j = 0; j < N; ++j) crow[j] += a * brow[j];
                } else {
                    for (long j = 0; j < N; ++j) crow[j] += a * B[j * K + kk];
                }
            }
    }
};

// ---- ADAM -------------------------------------------------------------------
struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Tensor m, v;
    long t = 0;
    static AdamState init(const Tensor& p) {
        return AdamState{Tensor::zeros(p.shape), Tensor::zeros(p.shape), 0};
    }
};

// Standard bias-corrected ADAM update. Throws on non-finite gradients.
inline void adam_step(Tensor& p, const Tensor& g, AdamState& s, const AdamConfig& h) {
    if (!p.same_shape(g) || !p.same_shape(s.m) || !p.same_shape(s.v))
        throw TensorError("adam_step: shape mismatch");
    if (!g.all_finite()) throw NonFiniteError("adam_step: non-finite gradient");
    s.t += 1;
    double b1t = 1.0 - std::pow(h.beta1, static_cast<double>(s.t));
    double b2t = 1.0 - std::pow(h.beta2, static_cast<double>(s.t));
    for (size_t i = 0; i < p.v.size(); ++i) {
        s.m.v[i] = h.beta1 * s.m.v[i] + (1.0 - h.beta1) * g.v[i];
        s.v.v[i] = h.beta2 * s.v.v[i] + (1.0 - h.beta2) * g.v[i] * g.v[i];
        double mhat = s.m.v[i] / b1t;
        double vhat = s.v.v[i] / b2t;
        p.v[i] -= h.lr * mhat / (std::sqrt(vhat) + h.eps);
    }
}

} // namespace geoshape
