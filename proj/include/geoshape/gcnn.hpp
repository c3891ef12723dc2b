// Geodesic convolutional surrogate.
//
// The convolution aggregates neighbor features with Gaussian weights over
// local geodesic polar coordinates (rho, theta) instead of fixed pixel
// offsets: for kernel k,
//   (D_k f)^i = sum_j f^j exp(-(rho_ij - ar_k)^2 / sr_k)
//                        exp(-(wrap(theta_ij - at_k))^2 / st_k)
//   f * g     = sum_k g_k D_k f
// with j running over a small structured stencil (3 taps along a contour,
// 3x3 on a cube-map face, spaced by the layer dilation). Cube-map faces are
// padded from their neighbors so the stencil never leaves the array, and
// tangent frames at shared edge texels come from a canonical owner face so
// the result does not depend on which face a seam point is computed in.
//
// The regressor is a shared trunk of residual geodesic-conv blocks feeding a
// per-vertex head (pressure), a pooled dense head (drag), and optionally two
// more per-vertex heads (skin friction, edge velocity). Separate variants
// build two disjoint towers instead of a shared trunk.
#pragma once

#include <json.hpp>

#include "autodiff.hpp"
#include "cubemap.hpp"
#include "dataset.hpp"
#include "geom.hpp"

namespace geoshape {

class ModelError : public std::runtime_error {
public:
    explicit ModelError(const std::string& m) : std::runtime_error(m) {}
};

class TrainDiverged : public ModelError {
public:
    std::string last_good_checkpoint;
    TrainDiverged(const std::string& m, std::string ckpt)
        : ModelError(m), last_good_checkpoint(std::move(ckpt)) {}
};

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------
struct ModelConfig {
    std::string arch = "joint-2";        // standard-separate | dilated-separate | joint-2 | joint-4
    std::string shape_kind = "contour";  // contour | cubemap
    long resolution = 64;                // contour points or cube-map R
    long width = 32;
    long K = 32;
    long blocks = 4;
    std::vector<long> dilations = {1, 2, 4, 1};
    bool share_kernels = false;
    bool kernels_trainable = true;
    bool preprocess = true;
    long dense_hidden = 64;
    uint64_t seed = 1;
    double spacing_hint = 0.05;  // typical texel spacing after preprocessing
    // target normalization, filled in by train()
    double z_mean = 0.0, z_std = 1.0;
    double cf_mean = 0.0, cf_std = 1.0;
    double ue_mean = 0.0, ue_std = 1.0;

    bool is_contour() const { return shape_kind == "contour"; }
    bool joint() const { return arch == "joint-2" || arch == "joint-4"; }
    bool has_aux() const { return arch == "joint-4"; }
    long vertex_count() const {
        return is_contour() ? resolution : 6 * resolution * resolution;
    }
    long input_channels() const { return is_contour() ? 2 : 3; }
    long dilation_of_block(long b) const {
        if (arch == "standard-separate") return 1;
        return dilations[static_cast<size_t>(b % static_cast<long>(dilations.size()))];
    }
    void validate() const {
        if (arch != "standard-separate" && arch != "dilated-separate" && arch != "joint-2" &&
            arch != "joint-4")
            throw ModelError("unknown architecture tag '" + arch + "'");
        if (has_aux() && !is_contour())
            throw ModelError("joint-4 aux heads are defined for contour shapes only");
        if (K < 1 || width < 1 || blocks < 0) throw ModelError("bad model dimensions");
    }
};

// ---------------------------------------------------------------------------
// Preprocessing: center each record at its centroid, scale to unit
// bounding-box diagonal. Plain and tape versions share the same definition.
// ---------------------------------------------------------------------------
inline std::shared_ptr<const std::vector<long>> group_expand_index(long B, long V) {
    auto idx = std::make_shared<std::vector<long>>(static_cast<size_t>(B * V));
    for (long i = 0; i < B * V; ++i) (*idx)[static_cast<size_t>(i)] = i / V;
    return idx;
}

inline Var preprocess_positions_var(Tape& tp, Var pos, long B) {
    long rows = tp.val(pos).rows();
    long V = rows / B;
    auto expand = group_expand_index(B, V);
    Var centroid = tp.group_mean(pos, V);                       // B x dim
    Var centered = tp.sub(pos, tp.gather_rows(centroid, expand));
    Var ext = tp.sub(tp.group_max(pos, V), tp.group_min(pos, V));  // B x dim
    Var diag = tp.sqrt_(tp.row_sum(tp.mul(ext, ext)));             // B x 1
    return tp.div(centered, tp.gather_rows(diag, expand));
}

inline Tensor preprocess_positions(const Tensor& pos, long B) {
    Tape tp;
    return tp.val(preprocess_positions_var(tp, tp.leaf(pos, false), B));
}

// ---------------------------------------------------------------------------
// Geometry context: per-dilation taps with (rho, theta) and gather maps.
// ---------------------------------------------------------------------------
struct GeoTap {
    Var rho;     // (B*V x 1)
    Var theta;   // (B*V x 1)
    std::shared_ptr<const std::vector<long>> gather_idx;  // feature gather map
    Var mask;    // (B*V x 1) 0/1; invalid when every neighbor exists
    bool center = false;
};

class GeoConvContext {
public:
    long B = 1, V = 0;
    std::vector<long> dilations;
    std::map<long, std::vector<GeoTap>> taps;

    static GeoConvContext contour(Tape& tp, Var pos, long B, std::vector<long> dils) {
        GeoConvContext ctx;
        ctx.B = B;
        long rows = tp.val(pos).rows();
        ctx.V = rows / B;
        ctx.dilations = dils;
        long N = ctx.V;
        // edge lengths e_i = |P_{i+1} - P_i| with circular indexing per record
        Var nxt = tp.gather_rows(pos, shift_index(B, N, 1));
        Var d = tp.sub(nxt, pos);
        Var elen = tp.sqrt_(tp.row_sum(tp.mul(d, d)));  // (B*N x 1)
        for (long dd : sorted_unique(dils)) {
            std::vector<GeoTap> ts(3);
            // backward tap (-d): rho = sum of the d edges behind i, theta = pi
            Var rho_b = tp.gather_rows(elen, shift_index(B, N, -1));
            for (long k = 2; k <= dd; ++k)
                rho_b = tp.add(rho_b, tp.gather_rows(elen, shift_index(B, N, -k)));
            ts[0].rho = rho_b;
            ts[0].theta = tp.constant(Tensor::full({B * N, 1}, kPi));
            ts[0].gather_idx = shift_index(B, N, -dd);
            // center tap
            ts[1].rho = tp.constant(Tensor::zeros({B * N, 1}));
            ts[1].theta = tp.constant(Tensor::zeros({B * N, 1}));
            ts[1].gather_idx = shift_index(B, N, 0);
            ts[1].center = true;
            // forward tap (+d): rho = sum of the d edges ahead of i, theta = 0
            Var rho_f = elen;
            for (long k = 1; k < dd; ++k) rho_f = tp.add(rho_f, tp.gather_rows(elen, shift_index(B, N, k)));
            ts[2].rho = rho_f;
            ts[2].theta = tp.constant(Tensor::zeros({B * N, 1}));
            ts[2].gather_idx = shift_index(B, N, dd);
            ctx.taps[dd] = std::move(ts);
        }
        return ctx;
    }

    static GeoConvContext cubemap(Tape& tp, Var pos, long B, long R, std::vector<long> dils) {
        GeoConvContext ctx;
        ctx.B = B;
        ctx.V = 6 * R * R;
        ctx.dilations = dils;

        // owner-chart tangent frames: u toward the next column, v from the
        // normal, both computed in the lowest-face-id chart of each texel.
        // At the 8 cube corners those two neighbors coincide on the surface
        // (the 270-degree wrap), so corners use inward neighbors with the
        // sign flipped to keep the axis direction.
        const FrameMaps& maps = frame_maps(R);
        Var p_u = tp.gather_rows(pos, batch_map(maps.u_idx, B, ctx.V));
        Var p_v = tp.gather_rows(pos, batch_map(maps.v_idx, B, ctx.V));
        Var p_0 = tp.gather_rows(pos, batch_map(maps.self_idx, B, ctx.V));
        Var sign_u = tp.constant(batch_signs(maps.u_sign, B));
        Var sign_v = tp.constant(batch_signs(maps.v_sign, B));
        Var u_raw = tp.mul(tp.sub(p_u, p_0), sign_u);
        Var v_raw = tp.mul(tp.sub(p_v, p_0), sign_v);
        Var nrm = cross_rows(tp, u_raw, v_raw);
        Var u_hat = normalize_rows(tp, u_raw);
        Var v_hat = normalize_rows(tp, cross_rows(tp, nrm, u_hat));

        for (long dd : sorted_unique(dils)) {
            std::vector<GeoTap> ts;
            for (long dr = -1; dr <= 1; ++dr)
                for (long dc = -1; dc <= 1; ++dc) {
                    GeoTap t;
                    t.gather_idx = batch_map(tap_map(R, dr * dd, dc * dd), B, ctx.V);
                    // taps whose unfolded position is ambiguous (both indices
                    // beyond the face, i.e. across one of the 8 irregular
                    // corners) do not exist as neighbors and carry no weight
                    {
                        Tensor mask = Tensor::full({B * ctx.V, 1}, 1.0);
                        bool any = false;
                        for (int f = 0; f < 6; ++f)
                            for (long r = 0; r < R; ++r)
                                for (long c = 0; c < R; ++c) {
                                    bool r_out = (r + dr * dd < 0 || r + dr * dd >= R);
                                    bool c_out = (c + dc * dd < 0 || c + dc * dd >= R);
                                    if (r_out && c_out) {
                                        any = true;
                                        long row = texel_row({f, r, c}, R);
                                        for (long b = 0; b < B; ++b)
                                            mask.v[static_cast<size_t>(b * ctx.V + row)] = 0.0;
                                    }
                                }
                        if (any) t.mask = tp.constant(mask);
                    }
                    if (dr == 0 && dc == 0) {
                        t.center = true;
                        t.rho = tp.constant(Tensor::zeros({B * ctx.V, 1}));
                        t.theta = tp.constant(Tensor::zeros({B * ctx.V, 1}));
                    } else {
                        Var pj = tp.gather_rows(pos, t.gather_idx);
                        Var delta = tp.sub(pj, pos);
                        t.rho = tp.sqrt_(tp.row_sum(tp.mul(delta, delta)));
                        Var du = tp.row_sum(tp.mul(delta, u_hat));
                        Var dv = tp.row_sum(tp.mul(delta, v_hat));
                        Var th = tp.atan2_(dv, du);
                        // wrap into [0, 2pi): add 2pi where negative
                        const Tensor& tv = tp.val(th);
                        Tensor bump = Tensor::zeros(tv.shape);
                        for (size_t i = 0; i < tv.v.size(); ++i)
                            bump.v[i] = tv.v[i] < 0 ? kTwoPi : 0.0;
                        t.theta = tp.add(th, tp.constant(bump));
                    }
                    ts.push_back(std::move(t));
                }
            ctx.taps[dd] = std::move(ts);
        }
        return ctx;
    }

    static std::shared_ptr<const std::vector<long>> shift_index(long B, long N, long s) {
        auto idx = std::make_shared<std::vector<long>>(static_cast<size_t>(B * N));
        for (long b = 0; b < B; ++b)
            for (long i = 0; i < N; ++i)
                (*idx)[static_cast<size_t>(b * N + i)] = b * N + ((i + s) % N + N) % N;
        return idx;
    }

private:
    static std::vector<long> sorted_unique(std::vector<long> v) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
        return v;
    }

    struct FrameMaps {
        std::vector<long> self_idx, u_idx, v_idx;
        std::vector<double> u_sign, v_sign;
    };

    // Per-texel rows of the owner texel and its (+col, +row) neighbors in the
    // owner chart. Cached per resolution.
    static const FrameMaps& frame_maps(long R) {
        static std::map<long, FrameMaps> cache;
        auto it = cache.find(R);
        if (it != cache.end()) return it->second;
        FrameMaps fm;
        long V = 6 * R * R;
        fm.self_idx.resize(static_cast<size_t>(V));
        fm.u_idx.resize(static_cast<size_t>(V));
        fm.v_idx.resize(static_cast<size_t>(V));
        fm.u_sign.assign(static_cast<size_t>(V), 1.0);
        fm.v_sign.assign(static_cast<size_t>(V), 1.0);
        for (int f = 0; f < 6; ++f)
            for (long r = 0; r < R; ++r)
                for (long c = 0; c < R; ++c) {
                    long row = texel_row({f, r, c}, R);
                    TexelRef own = cube_owner_texel(f, r, c, R);
                    fm.self_idx[static_cast<size_t>(row)] = texel_row(own, R);
                    bool corner = (own.r == 0 || own.r == R - 1) && (own.c == 0 || own.c == R - 1);
                    if (!corner) {
                        fm.u_idx[static_cast<size_t>(row)] =
                            texel_row(cube_halo_source(own.face, own.r, own.c + 1, R), R);
                        fm.v_idx[static_cast<size_t>(row)] =
                            texel_row(cube_halo_source(own.face, own.r + 1, own.c, R), R);
                    } else {
                        long dc = (own.c == R - 1) ? -1 : 1;
                        long dr = (own.r == R - 1) ? -1 : 1;
                        fm.u_idx[static_cast<size_t>(row)] = texel_row({own.face, own.r, own.c + dc}, R);
                        fm.v_idx[static_cast<size_t>(row)] = texel_row({own.face, own.r + dr, own.c}, R);
                        fm.u_sign[static_cast<size_t>(row)] = static_cast<double>(dc);
                        fm.v_sign[static_cast<size_t>(row)] = static_cast<double>(dr);
                    }
                }
        return cache.emplace(R, std::move(fm)).first->second;
    }

    static Tensor batch_signs(const std::vector<double>& base, long B) {
        long V = static_cast<long>(base.size());
        Tensor t = Tensor::zeros({B * V, 1});
        for (long b = 0; b < B; ++b)
            std::copy(base.begin(), base.end(), t.v.begin() + b * V);
        return t;
    }

    // Stencil gather map for offset (dr, dc), halo resolved across faces,
    // corner halo blocks clamped to the nearest in-face texel.
    static const std::vector<long>& tap_map(long R, long dr, long dc) {
        static std::map<std::tuple<long, long, long>, std::vector<long>> cache;
        auto key = std::make_tuple(R, dr, dc);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        std::vector<long> idx(static_cast<size_t>(6 * R * R));
        for (int f = 0; f < 6; ++f)
            for (long r = 0; r < R; ++r)
                for (long c = 0; c < R; ++c)
                    idx[static_cast<size_t>(texel_row({f, r, c}, R))] =
                        texel_row(cube_halo_source(f, r + dr, c + dc, R), R);
        return cache.emplace(key, std::move(idx)).first->second;
    }

    static std::shared_ptr<const std::vector<long>> batch_map(const std::vector<long>& base, long B,
                                                              long V) {
        auto idx = std::make_shared<std::vector<long>>(static_cast<size_t>(B * V));
        for (long b = 0; b < B; ++b)
            for (long i = 0; i < V; ++i)
                (*idx)[static_cast<size_t>(b * V + i)] = b * V + base[static_cast<size_t>(i)];
        return idx;
    }

    static Var cross_rows(Tape& tp, Var a, Var b) {
        Var ax = tp.slice_cols(a, 0, 1), ay = tp.slice_cols(a, 1, 2), az = tp.slice_cols(a, 2, 3);
        Var bx = tp.slice_cols(b, 0, 1), by = tp.slice_cols(b, 1, 2), bz = tp.slice_cols(b, 2, 3);
        Var cx = tp.sub(tp.mul(ay, bz), tp.mul(az, by));
        Var cy = tp.sub(tp.mul(az, bx), tp.mul(ax, bz));
        Var cz = tp.sub(tp.mul(ax, by), tp.mul(ay, bx));
        return tp.concat_cols(tp.concat_cols(cx, cy), cz);
    }

    static Var normalize_rows(Tape& tp, Var a) {
        Var n = tp.sqrt_(tp.row_sum(tp.mul(a, a)));
        return tp.div(a, n);
    }
};

// ---------------------------------------------------------------------------
// Gaussian kernel weights and the geodesic convolution
// ---------------------------------------------------------------------------
struct KernelVars {
    Var alpha_rho, alpha_theta, sigma_rho, sigma_theta;  // each (1 x K)
};

// (B*V x K) Gaussian weights of one tap against all K kernels.
inline Var geo_kernel_weights(Tape& tp, const GeoTap& tap, const KernelVars& kv) {
    Var drho = tp.sub(tap.rho, kv.alpha_rho);  // broadcast (N x 1) vs (1 x K)
    Var er = tp.exp_(tp.neg(tp.div(tp.mul(drho, drho), kv.sigma_rho)));
    Var dth_raw = tp.sub(tap.theta, kv.alpha_theta);
    // wrap the angular difference to minimal magnitude; the shift is a
    // value-dependent constant so gradients pass through unchanged
    const Tensor& raw = tp.val(dth_raw);
    Tensor shift = Tensor::zeros(raw.shape);
    for (size_t i = 0; i < raw.v.size(); ++i)
        shift.v[i] = -kTwoPi * std::round(raw.v[i] / kTwoPi);
    Var dth = tp.add(dth_raw, tp.constant(shift));
    Var et = tp.exp_(tp.neg(tp.div(tp.mul(dth, dth), kv.sigma_theta)));
    return tp.mul(er, et);
}

// Interpolation operator D_k for a single kernel index (spec-level op;
// the full convolution below evaluates all K at once).
inline Var geo_interp(Tape& tp, const GeoConvContext& ctx, long dilation, Var features,
                      const KernelVars& kv, long k) {
    const auto& taps = ctx.taps.at(dilation);
    Var acc;
    for (const auto& tap : taps) {
        Var w = tp.slice_cols(geo_kernel_weights(tp, tap, kv), k, k + 1);  // (N x 1)
        if (tap.mask.valid()) w = tp.mul(w, tap.mask);
        Var f = tp.gather_rows(features, tap.gather_idx);
        Var term = tp.mul(f, w);
        acc = acc.valid() ? tp.add(acc, term) : term;
    }
    return acc;
}

// Full geodesic convolution: out = sum_k (D_k f) g_k + bias.
// g is (K*Cin x Cout); bias (1 x Cout).
inline Var geo_conv(Tape& tp, const GeoConvContext& ctx, long dilation, Var features,
                    const KernelVars& kv, Var g, Var bias) {
    const auto& taps = ctx.taps.at(dilation);
    Var dstack;  // (B*V x K*Cin)
    for (const auto& tap : taps) {
        Var w = geo_kernel_weights(tp, tap, kv);  // (N x K)
        if (tap.mask.valid()) w = tp.mul(w, tap.mask);
        Var f = tp.gather_rows(features, tap.gather_idx);
        Var contrib = tp.rowwise_kron(w, f);
        dstack = dstack.valid() ? tp.add(dstack, contrib) : contrib;
    }
    return tp.add(tp.matmul(dstack, g), bias);
}

// ---------------------------------------------------------------------------
// Model: named parameter tensors in a fixed, config-derived order.
// ---------------------------------------------------------------------------
struct ParamSpec {
    std::string name;
    std::vector<long> shape;
    enum Kind { ConvWeight, Bias, DenseWeight, AlphaRho, AlphaTheta, SigmaRho, SigmaTheta } kind;
    long fan_in = 0;
};

struct SurrogateModel {
    ModelConfig cfg;
    std::vector<std::pair<std::string, Tensor>> params;

    const Tensor& param(const std::string& name) const {
        for (const auto& [n, t] : params)
            if (n == name) return t;
        throw ModelError("no parameter named " + name);
    }
    long param_index(const std::string& name) const {
        for (size_t i = 0; i < params.size(); ++i)
            if (params[i].first == name) return static_cast<long>(i);
        throw ModelError("no parameter named " + name);
    }
};

namespace gcnndetail {

struct LayerDesc {
    std::string prefix;  // e.g. "trunk.b0.c1"
    long cin, cout, dilation;
};

// Deterministic layer list per tower layout.
inline std::vector<LayerDesc> conv_layers(const ModelConfig& cfg, const std::string& tower) {
    std::vector<LayerDesc> out;
    long W = cfg.width;
    out.push_back({tower + ".in", cfg.input_channels(), W, 1});
    for (long b = 0; b < cfg.blocks; ++b) {
        long d = cfg.dilation_of_block(b);
        out.push_back({tower + ".b" + std::to_string(b) + ".c1", W, W, d});
        out.push_back({tower + ".b" + std::to_string(b) + ".c2", W, W, d});
    }
    return out;
}

inline std::vector<std::string> towers(const ModelConfig& cfg) {
    if (cfg.joint()) return {"trunk"};
    return {"ty", "tz"};
}

inline std::vector<std::pair<std::string, long>> vertex_heads(const ModelConfig& cfg) {
    // head name -> attached tower index (0-based into towers())
    std::vector<std::pair<std::string, long>> out;
    if (cfg.joint()) {
        out.push_back({"y", 0});
        if (cfg.has_aux()) {
            out.push_back({"cf", 0});
            out.push_back({"ue", 0});
        }
    } else {
        out.push_back({"y", 0});
    }
    return out;
}

inline std::vector<ParamSpec> param_specs(const ModelConfig& cfg) {
    std::vector<ParamSpec> specs;
    long K = cfg.K, W = cfg.width;
    auto add_kernel_set = [&](const std::string& prefix) {
        specs.push_back({prefix + ".ar", {1, K}, ParamSpec::AlphaRho, 0});
        specs.push_back({prefix + ".at", {1, K}, ParamSpec::AlphaTheta, 0});
        specs.push_back({prefix + ".sr", {1, K}, ParamSpec::SigmaRho, 0});
        specs.push_back({prefix + ".st", {1, K}, ParamSpec::SigmaTheta, 0});
    };
    auto add_conv = [&](const LayerDesc& l) {
        specs.push_back({l.prefix + ".g", {K * l.cin, l.cout}, ParamSpec::ConvWeight, K * l.cin});
        specs.push_back({l.prefix + ".b", {1, l.cout}, ParamSpec::Bias, 0});
        if (!cfg.share_kernels) add_kernel_set(l.prefix + ".krn");
    };
    if (cfg.share_kernels) add_kernel_set("krn");
    for (const auto& tower : towers(cfg))
        for (const auto& l : conv_layers(cfg, tower)) add_conv(l);
    for (const auto& [head, tower_i] : vertex_heads(cfg)) {
        (void)tower_i;
        add_conv({head + ".c1", W, W, 1});
        add_conv({head + ".c2", W, 1, 1});
    }
    // pooled dense head for Z
    specs.push_back({"z.d1.w", {W, cfg.dense_hidden}, ParamSpec::DenseWeight, W});
    specs.push_back({"z.d1.b", {1, cfg.dense_hidden}, ParamSpec::Bias, 0});
    specs.push_back({"z.d2.w", {cfg.dense_hidden, 1}, ParamSpec::DenseWeight, cfg.dense_hidden});
    specs.push_back({"z.d2.b", {1, 1}, ParamSpec::Bias, 0});
    return specs;
}

// Mean total Gaussian mass per kernel over a canonical flat stencil; used to
// scale conv weight initialization so activations start near unit variance.
inline double kernel_stencil_mass(const Tensor& ar, const Tensor& at, const Tensor& sr,
                                  const Tensor& st, double spacing, bool grid) {
    long K = ar.cols();
    std::vector<std::pair<double, double>> taps;  // (rho, theta)
    if (grid) {
        for (int dr = -1; dr <= 1; ++dr)
            for (int dc = -1; dc <= 1; ++dc) {
                if (dr == 0 && dc == 0) taps.push_back({0.0, 0.0});
                else
                    taps.push_back({spacing * std::sqrt(double(dr * dr + dc * dc)),
                                    wrap_angle_2pi(std::atan2(double(dr), double(dc)))});
            }
    } else {
        taps.push_back({spacing, kPi});
        taps.push_back({0.0, 0.0});
        taps.push_back({spacing, 0.0});
    }
    double total = 0;
    for (long k = 0; k < K; ++k) {
        double mass = 0;
        for (auto [rho, th] : taps) {
            double dr = rho - ar.v[static_cast<size_t>(k)];
            double dt = wrap_angle_diff(th - at.v[static_cast<size_t>(k)]);
            mass += std::exp(-dr * dr / sr.v[static_cast<size_t>(k)]) *
                    std::exp(-dt * dt / st.v[static_cast<size_t>(k)]);
        }
        total += mass;
    }
    return total / static_cast<double>(K);
}

} // namespace gcnndetail

inline SurrogateModel init_model(ModelConfig cfg) {
    cfg.validate();
    SurrogateModel m;
    m.cfg = cfg;
    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    auto normal = [&]() {
        double u1 = std::max(unif(rng), 1e-300), u2 = unif(rng);
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
    };
    double spacing = cfg.spacing_hint;
    // first pass: kernel sets, so conv scaling can see their mass
    auto specs = gcnndetail::param_specs(cfg);
    std::map<std::string, Tensor> built;
    for (const auto& s : specs) {
        Tensor t = Tensor::zeros(s.shape);
        switch (s.kind) {
            case ParamSpec::AlphaRho:
                for (auto& x : t.v) x = 2.0 * spacing * unif(rng);
                break;
            case ParamSpec::AlphaTheta:
                for (auto& x : t.v) x = kTwoPi * unif(rng);
                break;
            case ParamSpec::SigmaRho:
                for (auto& x : t.v) x = spacing * spacing;
                break;
            case ParamSpec::SigmaTheta:
                for (auto& x : t.v) x = (kPi / 4) * (kPi / 4);
                break;
            default:
                break;
        }
        built.emplace(s.name, std::move(t));
    }
    for (const auto& s : specs) {
        Tensor& t = built[s.name];
        if (s.kind == ParamSpec::ConvWeight) {
            // scale by the stencil Gaussian mass of this layer's kernel set
            std::string base = s.name.substr(0, s.name.size() - 2);  // strip ".g"
            std::string krn = cfg.share_kernels ? std::string("krn") : base + ".krn";
            double mass = gcnndetail::kernel_stencil_mass(built[krn + ".ar"], built[krn + ".at"],
                                                          built[krn + ".sr"], built[krn + ".st"],
                                                          spacing, !cfg.is_contour());
            double cin = static_cast<double>(s.fan_in) / static_cast<double>(cfg.K);
            double std_g = std::sqrt(2.0 / (static_cast<double>(cfg.K) * cin)) / std::max(mass, 1e-3);
            for (auto& x : t.v) x = std_g * normal();
        } else if (s.kind == ParamSpec::DenseWeight) {
            double std_g = std::sqrt(2.0 / static_cast<double>(s.fan_in));
            for (auto& x : t.v) x = std_g * normal();
        }
    }
    for (const auto& s : specs) m.params.push_back({s.name, std::move(built[s.name])});
    return m;
}

// ---------------------------------------------------------------------------
// Forward
// ---------------------------------------------------------------------------
struct ForwardResult {
    Var y;                 // (B*V x 1)
    Var z;                 // (B x 1) physical units
    Var z_std;             // (B x 1) standardized
    Var cf, ue;            // (B*V x 1), physical; valid iff has_aux
    bool has_aux = false;
};

inline std::vector<Var> bind_params(Tape& tp, const SurrogateModel& m, bool requires_grad) {
    std::vector<Var> out;
    out.reserve(m.params.size());
    bool kern_grad = requires_grad && m.cfg.kernels_trainable;
    for (const auto& [name, t] : m.params) {
        bool is_kernel = name.ends_with(".ar") || name.ends_with(".at") || name.ends_with(".sr") ||
                         name.ends_with(".st");
        out.push_back(tp.leaf(t, is_kernel ? kern_grad : requires_grad));
    }
    return out;
}

namespace gcnndetail {

struct ParamLookup {
    const SurrogateModel& m;
    const std::vector<Var>& vars;
    Var operator()(const std::string& name) const { return vars[static_cast<size_t>(m.param_index(name))]; }
};

inline KernelVars kernel_vars(const ParamLookup& P, const ModelConfig& cfg, const std::string& layer) {
    std::string base = cfg.share_kernels ? std::string("krn") : layer + ".krn";
    return KernelVars{P(base + ".ar"), P(base + ".at"), P(base + ".sr"), P(base + ".st")};
}

inline Var conv_layer(Tape& tp, const GeoConvContext& ctx, const ParamLookup& P,
                      const ModelConfig& cfg, const LayerDesc& l, Var f) {
    return geo_conv(tp, ctx, l.dilation, f, kernel_vars(P, cfg, l.prefix), P(l.prefix + ".g"),
                    P(l.prefix + ".b"));
}

inline Var run_tower(Tape& tp, const GeoConvContext& ctx, const ParamLookup& P,
                     const ModelConfig& cfg, const std::string& tower, Var f) {
    auto layers = conv_layers(cfg, tower);
    Var h = tp.relu(conv_layer(tp, ctx, P, cfg, layers[0], f));
    for (long b = 0; b < cfg.blocks; ++b) {
        const LayerDesc& c1 = layers[static_cast<size_t>(1 + 2 * b)];
        const LayerDesc& c2 = layers[static_cast<size_t>(2 + 2 * b)];
        Var inner = tp.relu(conv_layer(tp, ctx, P, cfg, c1, h));
        Var out = conv_layer(tp, ctx, P, cfg, c2, inner);
        h = tp.relu(tp.add(h, out));  // residual connection
    }
    return h;
}

inline Var run_vertex_head(Tape& tp, const GeoConvContext& ctx, const ParamLookup& P,
                           const ModelConfig& cfg, const std::string& head, Var f) {
    Var h = tp.relu(conv_layer(tp, ctx, P, cfg, {head + ".c1", cfg.width, cfg.width, 1}, f));
    return conv_layer(tp, ctx, P, cfg, {head + ".c2", cfg.width, 1, 1}, h);
}

} // namespace gcnndetail

// positions: (B*V x dim) tape variable (raw physical coordinates).
inline ForwardResult model_forward(Tape& tp, const SurrogateModel& m, const std::vector<Var>& pvars,
                                   Var positions, long B) {
    const ModelConfig& cfg = m.cfg;
    long rows = tp.val(positions).rows();
    if (rows % B != 0 || rows / B != cfg.vertex_count())
        throw ModelError("model_forward: positions rows " + std::to_string(rows) +
                         " do not match B=" + std::to_string(B) + " x V=" +
                         std::to_string(cfg.vertex_count()));
    gcnndetail::ParamLookup P{m, pvars};
    Var pos = cfg.preprocess ? preprocess_positions_var(tp, positions, B) : positions;
    // taps are built only for dilations the architecture actually uses,
    // plus 1 for the input conv and the heads
    std::vector<long> needed = {1};
    for (long b = 0; b < cfg.blocks; ++b) needed.push_back(cfg.dilation_of_block(b));
    GeoConvContext ctx = cfg.is_contour()
                             ? GeoConvContext::contour(tp, pos, B, needed)
                             : GeoConvContext::cubemap(tp, pos, B, cfg.resolution, needed);

    ForwardResult res;
    Var feat_y, feat_z;
    if (cfg.joint()) {
        Var trunk = gcnndetail::run_tower(tp, ctx, P, cfg, "trunk", pos);
        feat_y = trunk;
        feat_z = trunk;
    } else {
        feat_y = gcnndetail::run_tower(tp, ctx, P, cfg, "ty", pos);
        feat_z = gcnndetail::run_tower(tp, ctx, P, cfg, "tz", pos);
    }
    res.y = gcnndetail::run_vertex_head(tp, ctx, P, cfg, "y", feat_y);
    if (cfg.has_aux()) {
        res.has_aux = true;
        res.cf = gcnndetail::run_vertex_head(tp, ctx, P, cfg, "cf", feat_y);
        res.ue = gcnndetail::run_vertex_head(tp, ctx, P, cfg, "ue", feat_y);
        // de-standardize to physical units
        res.cf = tp.sadd(tp.smul(res.cf, cfg.cf_std), cfg.cf_mean);
        res.ue = tp.sadd(tp.smul(res.ue, cfg.ue_std), cfg.ue_mean);
    }
    Var pooled = tp.group_mean(feat_z, cfg.vertex_count());  // (B x W)
    Var h = tp.relu(tp.add(tp.matmul(pooled, P("z.d1.w")), P("z.d1.b")));
    res.z_std = tp.add(tp.matmul(h, P("z.d2.w")), P("z.d2.b"));
    res.z = tp.sadd(tp.smul(res.z_std, cfg.z_std), cfg.z_mean);
    return res;
}

// Convenience plain-number prediction for one shape.
struct Prediction {
    std::vector<double> y;
    double z = 0;
    std::vector<double> cf, ue;
};

inline Tensor positions_of_record(const SimRecord& r) {
    if (r.is_contour()) {
        const Contour2D& c = r.contour();
        Tensor t = Tensor::zeros({static_cast<long>(c.size()), 2});
        for (size_t i = 0; i < c.size(); ++i) {
            t.v[2 * i] = c.points[i].x;
            t.v[2 * i + 1] = c.points[i].y;
        }
        return t;
    }
    return r.cubemap().positions_tensor();
}

inline Prediction predict(const SurrogateModel& m, const Tensor& positions) {
    Tape tp;
    auto pvars = bind_params(tp, m, false);
    Var pos = tp.leaf(positions, false);
    ForwardResult fr = model_forward(tp, m, pvars, pos, 1);
    Prediction p;
    p.y = tp.val(fr.y).v;
    p.z = tp.val(fr.z).v[0];
    if (fr.has_aux) {
        p.cf = tp.val(fr.cf).v;
        p.ue = tp.val(fr.ue).v;
    }
    return p;
}

// ---------------------------------------------------------------------------
// Loss (physical units, per record) and the Eq.-style accuracy metric
// ---------------------------------------------------------------------------
inline double loss_value(const Prediction& pred, const SimRecord& rec, double lambda,
                         double aux_weight = 1.0) {
    double s = 0;
    for (size_t i = 0; i < rec.Y.size(); ++i) {
        double d = pred.y[i] - rec.Y[i];
        s += d * d;
    }
    double dz = pred.z - rec.Z;
    s += lambda * dz * dz;
    if (!pred.cf.empty() && !rec.cf.empty()) {
        for (size_t i = 0; i < rec.cf.size(); ++i) {
            double d = pred.cf[i] - rec.cf[i];
            s += aux_weight * d * d;
        }
        for (size_t i = 0; i < rec.ue.size(); ++i) {
            double d = pred.ue[i] - rec.ue[i];
            s += aux_weight * d * d;
        }
    }
    return s;
}

struct AccuracyResult {
    double a = 0;
    long used = 0, skipped = 0;
};

// A = 1 - mean_n ||y_n - yhat_n|| / ||y_n||; zero-norm targets are skipped.
inline AccuracyResult accuracy(const std::vector<std::vector<double>>& targets,
                               const std::vector<std::vector<double>>& preds) {
    if (targets.size() != preds.size()) throw ModelError("accuracy: size mismatch");
    AccuracyResult r;
    double s = 0;
    for (size_t n = 0; n < targets.size(); ++n) {
        double ty = 0, dy = 0;
        for (size_t i = 0; i < targets[n].size(); ++i) {
            ty += targets[n][i] * targets[n][i];
            double d = targets[n][i] - preds[n][i];
            dy += d * d;
        }
        if (ty == 0) {
            ++r.skipped;
            continue;
        }
        s += std::sqrt(dy) / std::sqrt(ty);
        ++r.used;
    }
    if (r.used == 0) throw ModelError("accuracy: all targets have zero norm");
    r.a = 1.0 - s / static_cast<double>(r.used);
    return r;
}

inline AccuracyResult accuracy_scalar(const std::vector<double>& z, const std::vector<double>& zhat) {
    std::vector<std::vector<double>> t, p;
    for (size_t i = 0; i < z.size(); ++i) {
        t.push_back({z[i]});
        p.push_back({zhat[i]});
    }
    return accuracy(t, p);
}

// ---------------------------------------------------------------------------
// Checkpoint format: magic GCNN1, u32 schema, JSON config blob, named tensors.
// ---------------------------------------------------------------------------
constexpr uint32_t kCheckpointSchema = 1;

inline nlohmann::json model_config_json(const ModelConfig& c) {
    return nlohmann::json{{"arch", c.arch},
                          {"shape_kind", c.shape_kind},
                          {"resolution", c.resolution},
                          {"width", c.width},
                          {"K", c.K},
                          {"blocks", c.blocks},
                          {"dilations", c.dilations},
                          {"share_kernels", c.share_kernels},
                          {"kernels_trainable", c.kernels_trainable},
                          {"preprocess", c.preprocess},
                          {"dense_hidden", c.dense_hidden},
                          {"seed", c.seed},
                          {"spacing_hint", c.spacing_hint},
                          {"z_mean", c.z_mean},
                          {"z_std", c.z_std},
                          {"cf_mean", c.cf_mean},
                          {"cf_std", c.cf_std},
                          {"ue_mean", c.ue_mean},
                          {"ue_std", c.ue_std}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.arch = j.at("arch").get<std::string>();
    c.shape_kind = j.at("shape_kind").get<std::string>();
    c.resolution = j.at("resolution").get<long>();
    c.width = j.at("width").get<long>();
    c.K = j.at("K").get<long>();
    c.blocks = j.at("blocks").get<long>();
    c.dilations = j.at("dilations").get<std::vector<long>>();
    c.share_kernels = j.at("share_kernels").get<bool>();
    c.kernels_trainable = j.at("kernels_trainable").get<bool>();
    c.preprocess = j.at("preprocess").get<bool>();
    c.dense_hidden = j.at("dense_hidden").get<long>();
    c.seed = j.at("seed").get<uint64_t>();
    c.spacing_hint = j.at("spacing_hint").get<double>();
    c.z_mean = j.at("z_mean").get<double>();
    c.z_std = j.at("z_std").get<double>();
    c.cf_mean = j.at("cf_mean").get<double>();
    c.cf_std = j.at("cf_std").get<double>();
    c.ue_mean = j.at("ue_mean").get<double>();
    c.ue_std = j.at("ue_std").get<double>();
    return c;
}

inline void save_model(const SurrogateModel& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ModelError("save_model: cannot open " + path);
    f.write("GCNN1", 5);
    uint32_t schema = kCheckpointSchema;
    f.write(reinterpret_cast<const char*>(&schema), 4);
    std::string cfg = model_config_json(m.cfg).dump();
    uint32_t clen = static_cast<uint32_t>(cfg.size());
    f.write(reinterpret_cast<const char*>(&clen), 4);
    f.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
    uint32_t np = static_cast<uint32_t>(m.params.size());
    f.write(reinterpret_cast<const char*>(&np), 4);
    for (const auto& [name, t] : m.params) {
        uint32_t nlen = static_cast<uint32_t>(name.size());
        f.write(reinterpret_cast<const char*>(&nlen), 4);
        f.write(name.data(), static_cast<std::streamsize>(name.size()));
        uint32_t rank = static_cast<uint32_t>(t.shape.size());
        f.write(reinterpret_cast<const char*>(&rank), 4);
        for (long d : t.shape) {
            int64_t d64 = d;
            f.write(reinterpret_cast<const char*>(&d64), 8);
        }
        f.write(reinterpret_cast<const char*>(t.v.data()),
                static_cast<std::streamsize>(t.v.size() * sizeof(double)));
    }
}

inline SurrogateModel load_model(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ModelError("load_model: cannot open " + path);
    char magic[5];
    f.read(magic, 5);
    if (f.gcount() != 5 || std::string(magic, 5) != "GCNN1")
        throw ModelError("load_model: bad magic in " + path);
    uint32_t schema = 0;
    f.read(reinterpret_cast<char*>(&schema), 4);
    if (schema != kCheckpointSchema)
        throw ModelError("load_model: schema " + std::to_string(schema) + " unsupported (expected " +
                         std::to_string(kCheckpointSchema) + ")");
    uint32_t clen = 0;
    f.read(reinterpret_cast<char*>(&clen), 4);
    std::string cfg(clen, '\0');
    f.read(cfg.data(), clen);
    SurrogateModel m;
    m.cfg = model_config_from_json(nlohmann::json::parse(cfg));
    uint32_t np = 0;
    f.read(reinterpret_cast<char*>(&np), 4);
    for (uint32_t i = 0; i < np; ++i) {
        uint32_t nlen = 0;
        f.read(reinterpret_cast<char*>(&nlen), 4);
        std::string name(nlen, '\0');
        f.read(name.data(), nlen);
        uint32_t rank = 0;
        f.read(reinterpret_cast<char*>(&rank), 4);
        std::vector<long> shape(rank);
        for (uint32_t d = 0; d < rank; ++d) {
            int64_t d64 = 0;
            f.read(reinterpret_cast<char*>(&d64), 8);
            shape[d] = static_cast<long>(d64);
        }
        Tensor t = Tensor::zeros(shape);
        f.read(reinterpret_cast<char*>(t.v.data()),
               static_cast<std::streamsize>(t.v.size() * sizeof(double)));
        if (!f) throw ModelError("load_model: truncated file " + path);
        m.params.push_back({std::move(name), std::move(t)});
    }
    return m;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------
struct TrainConfig {
    long epochs = 60;
    long batch = 32;
    double lr = 1e-3;
    double lr_decay = 1.0;       // per-epoch multiplicative decay
    double lambda = 1.0;         // weight on the standardized Z term
    double aux_weight = 1.0;
    uint64_t seed = 1;
    double val_frac = 0.2;
    bool shuffle = true;
    std::string ckpt_path;       // where the best-validation model is kept
};

struct EpochLog {
    long epoch = 0;
    double train_loss = 0, val_loss = 0;
    double a_cp = 0, a_cd = 0;
};

struct TrainResult {
    SurrogateModel model;        // best-validation weights
    SurrogateModel final_model;  // weights after the last epoch
    std::vector<EpochLog> log;
    std::vector<long> train_idx, val_idx;
};

namespace gcnndetail {

struct PackedData {
    std::vector<Tensor> pos;          // per record, preprocessed (V x dim)
    std::vector<Tensor> y;            // (V x 1)
    std::vector<double> z_std;        // standardized
    std::vector<double> z_raw;
    std::vector<Tensor> cf, ue;       // standardized aux
};

inline double mean_of(const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}
inline double std_of(const std::vector<double>& v, double mean) {
    double s = 0;
    for (double x : v) s += (x - mean) * (x - mean);
    double var = v.empty() ? 0.0 : s / static_cast<double>(v.size());
    return std::max(std::sqrt(var), 1e-12);
}

} // namespace gcnndetail

// Batched training loss for records [idx] of packed data; builds the graph on
// the given tape and returns the scalar loss Var (mean over the batch).
inline Var batch_loss(Tape& tp, const SurrogateModel& m, const std::vector<Var>& pvars,
                      const gcnndetail::PackedData& data, const std::vector<long>& idx,
                      double lambda, double aux_weight) {
    long B = static_cast<long>(idx.size());
    long V = m.cfg.vertex_count();
    long dim = m.cfg.input_channels();
    Tensor pos = Tensor::zeros({B * V, dim});
    Tensor ty = Tensor::zeros({B * V, 1});
    Tensor tz = Tensor::zeros({B, 1});
    Tensor tcf, tue;
    bool aux = m.cfg.has_aux();
    if (aux) {
        tcf = Tensor::zeros({B * V, 1});
        tue = Tensor::zeros({B * V, 1});
    }
    for (long b = 0; b < B; ++b) {
        const long r = idx[static_cast<size_t>(b)];
        std::copy(data.pos[static_cast<size_t>(r)].v.begin(), data.pos[static_cast<size_t>(r)].v.end(),
                  pos.v.begin() + b * V * dim);
        std::copy(data.y[static_cast<size_t>(r)].v.begin(), data.y[static_cast<size_t>(r)].v.end(),
                  ty.v.begin() + b * V);
        tz.v[static_cast<size_t>(b)] = data.z_std[static_cast<size_t>(r)];
        if (aux) {
            std::copy(data.cf[static_cast<size_t>(r)].v.begin(), data.cf[static_cast<size_t>(r)].v.end(),
                      tcf.v.begin() + b * V);
            std::copy(data.ue[static_cast<size_t>(r)].v.begin(), data.ue[static_cast<size_t>(r)].v.end(),
                      tue.v.begin() + b * V);
        }
    }
    Var vpos = tp.leaf(pos, false);
    ForwardResult fr = model_forward(tp, m, pvars, vpos, B);
    // ||y - yhat||^2 summed per record, then averaged over the batch
    Var dy = tp.sub(fr.y, tp.constant(ty));
    Var sy = tp.smul(tp.sum_all(tp.mul(dy, dy)), 1.0 / static_cast<double>(B));
    Var dz = tp.sub(fr.z_std, tp.constant(tz));
    Var sz = tp.smul(tp.sum_all(tp.mul(dz, dz)), lambda / static_cast<double>(B));
    Var total = tp.add(sy, sz);
    if (aux) {
        // aux heads compare in standardized units
        Var cf_std = tp.smul(tp.sadd(fr.cf, -m.cfg.cf_mean), 1.0 / m.cfg.cf_std);
        Var ue_std = tp.smul(tp.sadd(fr.ue, -m.cfg.ue_mean), 1.0 / m.cfg.ue_std);
        Var dcf = tp.sub(cf_std, tp.constant(tcf));
        Var due = tp.sub(ue_std, tp.constant(tue));
        Var sa = tp.add(tp.sum_all(tp.mul(dcf, dcf)), tp.sum_all(tp.mul(due, due)));
        total = tp.add(total, tp.smul(sa, aux_weight / static_cast<double>(B)));
    }
    return total;
}

inline TrainResult train(const std::vector<SimRecord>& dataset, ModelConfig mcfg, TrainConfig tcfg) {
    if (dataset.empty()) throw ModelError("train: empty dataset");
    for (const auto& r : dataset)
        if (r.vertex_count() != dataset[0].vertex_count() || r.is_contour() != dataset[0].is_contour())
            throw ModelError("train: records must share one shape family and resolution");
    mcfg.shape_kind = dataset[0].is_contour() ? "contour" : "cubemap";
    mcfg.resolution = dataset[0].is_contour() ? static_cast<long>(dataset[0].contour().size())
                                              : dataset[0].cubemap().R;
    if (mcfg.has_aux() && dataset[0].cf.empty())
        throw ModelError("train: joint-4 needs records with aux channels");

    // split by seed; with no validation fraction the order is left as-is
    long n = static_cast<long>(dataset.size());
    std::vector<long> order(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;
    long nval = static_cast<long>(std::floor(tcfg.val_frac * static_cast<double>(n)));
    if (n > 1 && nval == 0 && tcfg.val_frac > 0) nval = 1;
    if (nval > 0) {
        std::mt19937_64 rng(tcfg.seed);
        std::shuffle(order.begin(), order.end(), rng);
    }
    std::vector<long> val_idx(order.begin(), order.begin() + nval);
    std::vector<long> train_idx(order.begin() + nval, order.end());
    if (train_idx.empty()) {
        train_idx = val_idx;  // degenerate single-record training
    }

    // pack + normalize from the training split
    gcnndetail::PackedData data;
    long V = dataset[0].vertex_count();
    for (const auto& r : dataset) {
        Tensor pos = positions_of_record(r);
        data.pos.push_back(mcfg.preprocess ? preprocess_positions(pos, 1) : pos);
        data.y.push_back(Tensor({V, 1}, r.Y));
        data.z_raw.push_back(r.Z);
    }
    std::vector<double> ztrain;
    for (long i : train_idx) ztrain.push_back(data.z_raw[static_cast<size_t>(i)]);
    mcfg.z_mean = gcnndetail::mean_of(ztrain);
    mcfg.z_std = gcnndetail::std_of(ztrain, mcfg.z_mean);
    for (double z : data.z_raw) data.z_std.push_back((z - mcfg.z_mean) / mcfg.z_std);
    if (mcfg.has_aux()) {
        std::vector<double> allcf, allue;
        for (long i : train_idx) {
            const auto& r = dataset[static_cast<size_t>(i)];
            allcf.insert(allcf.end(), r.cf.begin(), r.cf.end());
            allue.insert(allue.end(), r.ue.begin(), r.ue.end());
        }
        mcfg.cf_mean = gcnndetail::mean_of(allcf);
        mcfg.cf_std = gcnndetail::std_of(allcf, mcfg.cf_mean);
        mcfg.ue_mean = gcnndetail::mean_of(allue);
        mcfg.ue_std = gcnndetail::std_of(allue, mcfg.ue_mean);
        for (const auto& r : dataset) {
            Tensor c = Tensor({V, 1}, r.cf), u = Tensor({V, 1}, r.ue);
            for (auto& x : c.v) x = (x - mcfg.cf_mean) / mcfg.cf_std;
            for (auto& x : u.v) x = (x - mcfg.ue_mean) / mcfg.ue_std;
            data.cf.push_back(std::move(c));
            data.ue.push_back(std::move(u));
        }
    }

    // spacing hint from the first training record
    {
        const Tensor& p0 = data.pos[static_cast<size_t>(train_idx[0])];
        if (mcfg.is_contour()) {
            double per = 0;
            for (long i = 0; i < V; ++i) {
                long j = (i + 1) % V;
                double dx = p0.v[static_cast<size_t>(2 * j)] - p0.v[static_cast<size_t>(2 * i)];
                double dy = p0.v[static_cast<size_t>(2 * j + 1)] - p0.v[static_cast<size_t>(2 * i + 1)];
                per += std::sqrt(dx * dx + dy * dy);
            }
            mcfg.spacing_hint = per / static_cast<double>(V);
        } else {
            // mean in-face neighbor distance on the first shape
            long R = mcfg.resolution;
            double s = 0;
            long cnt = 0;
            for (long r = 0; r < R; ++r)
                for (long c = 0; c + 1 < R; ++c) {
                    long a = texel_row({0, r, c}, R), b = texel_row({0, r, c + 1}, R);
                    double dx = p0.v[static_cast<size_t>(3 * b)] - p0.v[static_cast<size_t>(3 * a)];
                    double dy = p0.v[static_cast<size_t>(3 * b + 1)] - p0.v[static_cast<size_t>(3 * a + 1)];
                    double dz = p0.v[static_cast<size_t>(3 * b + 2)] - p0.v[static_cast<size_t>(3 * a + 2)];
                    s += std::sqrt(dx * dx + dy * dy + dz * dz);
                    ++cnt;
                }
            mcfg.spacing_hint = s / static_cast<double>(cnt);
        }
    }

    SurrogateModel model = init_model(mcfg);
    std::vector<AdamState> states;
    for (auto& [name, t] : model.params) states.push_back(AdamState::init(t));

    auto eval_split = [&](const std::vector<long>& idx) {
        // loss plus Eq.-style accuracies on a record subset, batched
        double loss = 0;
        std::vector<std::vector<double>> yt, yp;
        std::vector<double> zt, zp;
        long dim = model.cfg.input_channels();
        for (size_t ofs = 0; ofs < idx.size(); ofs += static_cast<size_t>(tcfg.batch)) {
            std::vector<long> bidx(idx.begin() + static_cast<long>(ofs),
                                   idx.begin() + static_cast<long>(std::min(
                                                     idx.size(), ofs + static_cast<size_t>(tcfg.batch))));
            long B = static_cast<long>(bidx.size());
            Tensor pos = Tensor::zeros({B * V, dim});
            for (long b = 0; b < B; ++b)
                std::copy(data.pos[static_cast<size_t>(bidx[static_cast<size_t>(b)])].v.begin(),
                          data.pos[static_cast<size_t>(bidx[static_cast<size_t>(b)])].v.end(),
                          pos.v.begin() + b * V * dim);
            Tape tp;
            auto pv = bind_params(tp, model, false);
            ForwardResult fr = model_forward(tp, model, pv, tp.leaf(pos, false), B);
            const Tensor& y = tp.val(fr.y);
            for (long b = 0; b < B; ++b) {
                long i = bidx[static_cast<size_t>(b)];
                double l = 0;
                std::vector<double> yrow(static_cast<size_t>(V));
                for (long k = 0; k < V; ++k) {
                    double yv = y.v[static_cast<size_t>(b * V + k)];
                    yrow[static_cast<size_t>(k)] = yv;
                    double d = yv - data.y[static_cast<size_t>(i)].v[static_cast<size_t>(k)];
                    l += d * d;
                }
                double dz = tp.val(fr.z_std).v[static_cast<size_t>(b)] - data.z_std[static_cast<size_t>(i)];
                l += tcfg.lambda * dz * dz;
                if (model.cfg.has_aux()) {
                    const Tensor& cf = tp.val(fr.cf);
                    const Tensor& ue = tp.val(fr.ue);
                    for (long k = 0; k < V; ++k) {
                        double dc = (cf.v[static_cast<size_t>(b * V + k)] - model.cfg.cf_mean) /
                                        model.cfg.cf_std -
                                    data.cf[static_cast<size_t>(i)].v[static_cast<size_t>(k)];
                        double du = (ue.v[static_cast<size_t>(b * V + k)] - model.cfg.ue_mean) /
                                        model.cfg.ue_std -
                                    data.ue[static_cast<size_t>(i)].v[static_cast<size_t>(k)];
                        l += tcfg.aux_weight * (dc * dc + du * du);
                    }
                }
                loss += l;
                yt.push_back(data.y[static_cast<size_t>(i)].v);
                yp.push_back(std::move(yrow));
                zt.push_back(data.z_raw[static_cast<size_t>(i)]);
                zp.push_back(tp.val(fr.z).v[static_cast<size_t>(b)]);
            }
        }
        loss /= static_cast<double>(idx.size());
        EpochLog e;
        e.val_loss = loss;
        e.a_cp = accuracy(yt, yp).a;
        e.a_cd = accuracy_scalar(zt, zp).a;
        return e;
    };

    TrainResult result;
    double best_val = 1e300;
    AdamConfig adam;
    adam.lr = tcfg.lr;
    std::mt19937_64 shuffle_rng(mix_seed(tcfg.seed, 17));
    std::vector<long> epoch_order = train_idx;
    const std::vector<long>& eval_idx = val_idx.empty() ? train_idx : val_idx;

    for (long epoch = 0; epoch < tcfg.epochs; ++epoch) {
        if (tcfg.shuffle) std::shuffle(epoch_order.begin(), epoch_order.end(), shuffle_rng);
        double train_loss = 0;
        long batches = 0;
        for (size_t ofs = 0; ofs < epoch_order.size(); ofs += static_cast<size_t>(tcfg.batch)) {
            std::vector<long> bidx(epoch_order.begin() + static_cast<long>(ofs),
                                   epoch_order.begin() +
                                       std::min(epoch_order.size(), ofs + static_cast<size_t>(tcfg.batch)));
            Tape tp;
            auto pv = bind_params(tp, model, true);
            Var loss = batch_loss(tp, model, pv, data, bidx, tcfg.lambda, tcfg.aux_weight);
            double lv = tp.val(loss).v[0];
            if (!std::isfinite(lv))
                throw TrainDiverged("train: loss became non-finite at epoch " + std::to_string(epoch),
                                    tcfg.ckpt_path);
            tp.backward(loss);
            for (size_t p = 0; p < model.params.size(); ++p) {
                if (!tp.needs_grad(pv[p])) continue;
                adam_step(model.params[p].second, tp.grad(pv[p]), states[p], adam);
            }
            // sigma floor
            for (auto& [name, t] : model.params)
                if (name.ends_with(".sr") || name.ends_with(".st"))
                    for (auto& x : t.v) x = std::max(x, 1e-6);
            train_loss += lv;
            ++batches;
        }
        adam.lr *= tcfg.lr_decay;
        EpochLog e = eval_split(eval_idx);
        e.epoch = epoch;
        e.train_loss = train_loss / std::max(1L, batches);
        result.log.push_back(e);
        if (e.val_loss < best_val) {
            best_val = e.val_loss;
            result.model = model;
            if (!tcfg.ckpt_path.empty()) save_model(model, tcfg.ckpt_path);
        }
    }
    if (result.model.params.empty()) result.model = model;
    result.final_model = model;
    result.train_idx = train_idx;
    result.val_idx = val_idx;
    return result;
}

} // namespace geoshape
