// Shape parameterizations: NACA 4-digit foils (3 parameters), their
// 18-parameter quadratic-coefficient extension with independent upper/lower
// camber lines, and the 21-parameter trigonometric-polynomial deformation of
// 3D vertex sets. Every family is built twice over the same code path: once
// with plain numbers and once through the tape, so the optimizer
// differentiates exactly the geometry the oracles see.
#pragma once

#include "autodiff.hpp"
#include "cubemap.hpp"
#include "geom.hpp"

namespace geoshape {

class ShapeError : public std::runtime_error {
public:
    explicit ShapeError(const std::string& m) : std::runtime_error(m) {}
};

struct Naca3Params {
    double t = 0.12, m = 0.0, p = 0.4;
    void validate() const {
        if (!(t > 0 && t < 0.5)) throw ShapeError("Naca3Params: t must be in (0, 0.5)");
        if (!(m >= 0 && m < 0.3)) throw ShapeError("Naca3Params: m must be in [0, 0.3)");
        if (!(p > 0.05 && p < 0.95)) throw ShapeError("Naca3Params: p must be in (0.05, 0.95)");
    }
    std::vector<double> as_vector() const { return {t, m, p}; }
};

// Layout: [t0,t1,t2, m0,m1,m2, p0,p1,p2] upper then the same lower.
struct Foil18Params {
    std::array<double, 18> c{};
    static Foil18Params from_naca3(const Naca3Params& n) {
        Foil18Params f;
        for (int s = 0; s < 2; ++s) {
            f.c[static_cast<size_t>(9 * s + 0)] = n.t;
            f.c[static_cast<size_t>(9 * s + 3)] = n.m;
            f.c[static_cast<size_t>(9 * s + 6)] = n.p;
        }
        return f;
    }
    std::vector<double> as_vector() const { return std::vector<double>(c.begin(), c.end()); }
};

// Layout: [Cx0..Cx6, Cy0..Cy6, Cz0..Cz6]; identity is all zero except
// Cx1 = Cy1 = Cz1 = 1.
struct Deform21Params {
    std::array<double, 21> c{};
    static Deform21Params identity() {
        Deform21Params d;
        d.c[1] = d.c[8] = d.c[15] = 1.0;
        return d;
    }
    std::vector<double> as_vector() const { return std::vector<double>(c.begin(), c.end()); }
};

namespace shapedetail {

// Thickness distribution without the t factor: y_t = 5 t poly(x). The
// classical polynomial leaves a 0.0021 half-gap at x = 1; the x^12 term
// removes exactly that residual so the trailing edge closes, while changing
// the profile by less than 1e-9 at x = 0.3 (far less than the usual
// closed-TE trick of moving the x^4 coefficient to -0.1036).
inline double thickness_poly(double x) {
    double sx = std::sqrt(x);
    double x4 = x * x * x * x;
    return 5.0 * (0.2969 * sx - 0.1260 * x - 0.3516 * x * x + 0.2843 * x * x * x - 0.1015 * x4 -
                  0.0021 * x4 * x4 * x4);
}

inline std::vector<double> cosine_stations(long m_stations) {
    std::vector<double> x(static_cast<size_t>(m_stations + 1));
    for (long k = 0; k <= m_stations; ++k)
        x[static_cast<size_t>(k)] = 0.5 * (1.0 - std::cos(kPi * static_cast<double>(k) /
                                                          static_cast<double>(m_stations)));
    x[0] = 0.0;
    x[static_cast<size_t>(m_stations)] = 1.0;
    return x;
}

// One surface of a generalized NACA foil where t, m, p at each station come
// from tape expressions. `upper` selects the sign of the thickness offset.
// Inputs tv/mv/pv are (S x 1) station-wise values; returns (S x 2) points.
inline Var naca_surface(Tape& tp, const std::vector<double>& x, Var tv, Var mv, Var pv, bool upper) {
    long S = static_cast<long>(x.size());
    Tensor xs = Tensor::col(x);
    // constant pieces
    std::vector<double> poly(static_cast<size_t>(S));
    for (long k = 0; k < S; ++k) poly[static_cast<size_t>(k)] = thickness_poly(x[static_cast<size_t>(k)]);
    Var xc = tp.constant(xs);
    Var yt = tp.mul(tv, tp.constant(Tensor::col(poly)));

    // camber branch mask from current p values (constant w.r.t. the tape)
    const Tensor& pval = tp.val(pv);
    Tensor mask_fore = Tensor::zeros({S, 1});
    for (long k = 0; k < S; ++k)
        mask_fore.v[static_cast<size_t>(k)] = (x[static_cast<size_t>(k)] <= pval.v[static_cast<size_t>(k)]) ? 1.0 : 0.0;
    Var mf = tp.constant(mask_fore);
    Var ma = tp.sadd(tp.smul(mf, -1.0), 1.0);

    // fore: m/p^2 (2 p x - x^2), slope 2m/p^2 (p - x)
    Var p2 = tp.mul(pv, pv);
    Var q = tp.div(mv, p2);
    Var x2 = tp.constant([&] {
        Tensor t2 = xs;
        for (auto& e : t2.v) e = e * e;
        return t2;
    }());
    Var two_px = tp.smul(tp.mul(pv, xc), 2.0);
    Var yc_fore = tp.mul(q, tp.sub(two_px, x2));
    Var dy_fore = tp.smul(tp.mul(q, tp.sub(pv, xc)), 2.0);

    // aft: m/(1-p)^2 ((1-2p) + 2 p x - x^2), slope 2m/(1-p)^2 (p - x)
    Var onemp = tp.sadd(tp.smul(pv, -1.0), 1.0);
    Var q2 = tp.div(mv, tp.mul(onemp, onemp));
    Var one_m_2p = tp.sadd(tp.smul(pv, -2.0), 1.0);
    Var yc_aft = tp.mul(q2, tp.add(one_m_2p, tp.sub(two_px, x2)));
    Var dy_aft = tp.smul(tp.mul(q2, tp.sub(pv, xc)), 2.0);

    Var yc = tp.add(tp.mul(mf, yc_fore), tp.mul(ma, yc_aft));
    Var dy = tp.add(tp.mul(mf, dy_fore), tp.mul(ma, dy_aft));

    Var th = tp.atan_(dy);
    Var sth = tp.sin_(th), cth = tp.cos_(th);
    double sgn = upper ? 1.0 : -1.0;
    Var px = tp.sub(xc, tp.smul(tp.mul(yt, sth), sgn));
    Var py = tp.add(yc, tp.smul(tp.mul(yt, cth), sgn));
    return tp.concat_cols(px, py);
}

inline std::vector<long> foil_assembly_index(long m_stations) {
    // nodes: TE (upper station M), upper M-1..1, LE (station 0), lower 1..M-1;
    // rows 0..M are the upper surface, rows M+1..2M+1 the lower.
    std::vector<long> idx;
    for (long k = m_stations; k >= 0; --k) idx.push_back(k);
    for (long k = 1; k <= m_stations - 1; ++k) idx.push_back(m_stations + 1 + k);
    return idx;
}

} // namespace shapedetail

// Differentiable NACA foil: params is a (3 x 1) tape variable (t, m, p);
// returns the (N x 2) closed CCW contour, node 0 at the trailing edge.
inline Var naca_shape_var(Tape& tp, Var params, long n) {
    if (n < 32 || n % 2 != 0) throw ShapeError("naca_shape: N must be even and >= 32");
    long M = n / 2;
    std::vector<double> x = shapedetail::cosine_stations(M);
    long S = M + 1;
    std::vector<long> rep(static_cast<size_t>(S), 0);
    Var tv = tp.gather_rows(tp.slice_cols(tp.reshape(params, {1, 3}), 0, 1), rep);
    Var mv = tp.gather_rows(tp.slice_cols(tp.reshape(params, {1, 3}), 1, 2), rep);
    Var pv = tp.gather_rows(tp.slice_cols(tp.reshape(params, {1, 3}), 2, 3), rep);
    Var up = shapedetail::naca_surface(tp, x, tv, mv, pv, true);
    Var lo = shapedetail::naca_surface(tp, x, tv, mv, pv, false);
    Var both = tp.concat_rows(up, lo);
    return tp.gather_rows(both, shapedetail::foil_assembly_index(M));
}

inline Contour2D naca_shape(const Naca3Params& prm, long n) {
    prm.validate();
    Tape tp;
    Var pv = tp.leaf(Tensor::col({prm.t, prm.m, prm.p}), false);
    const Tensor& pts = tp.val(naca_shape_var(tp, pv, n));
    std::vector<Vec2> v(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i)
        v[static_cast<size_t>(i)] = {pts.v[static_cast<size_t>(2 * i)], pts.v[static_cast<size_t>(2 * i + 1)]};
    return Contour2D(std::move(v));
}

// Differentiable 18-parameter foil; params is (18 x 1). Station-wise
// t(x), m(x), p(x) are quadratics per surface.
inline Var foil18_shape_var(Tape& tp, Var params, long n) {
    if (n < 32 || n % 2 != 0) throw ShapeError("foil18_shape: N must be even and >= 32");
    long M = n / 2;
    std::vector<double> x = shapedetail::cosine_stations(M);
    long S = M + 1;
    // station basis (S x 3): [1, x, x^2]
    Tensor basis = Tensor::zeros({S, 3});
    for (long k = 0; k < S; ++k) {
        double xv = x[static_cast<size_t>(k)];
        basis.v[static_cast<size_t>(3 * k)] = 1.0;
        basis.v[static_cast<size_t>(3 * k + 1)] = xv;
        basis.v[static_cast<size_t>(3 * k + 2)] = xv * xv;
    }
    Var B = tp.constant(basis);
    Var flat = tp.reshape(params, {1, 18});
    auto quad = [&](long ofs) {
        return tp.matmul(B, tp.reshape(tp.slice_cols(flat, ofs, ofs + 3), {3, 1}));
    };
    Var up = shapedetail::naca_surface(tp, x, quad(0), quad(3), quad(6), true);
    Var lo = shapedetail::naca_surface(tp, x, quad(9), quad(12), quad(15), false);
    Var both = tp.concat_rows(up, lo);
    return tp.gather_rows(both, shapedetail::foil_assembly_index(M));
}

inline Contour2D foil18_shape(const Foil18Params& prm, long n) {
    // validity: positive thickness inside (0,1), p(x) within range where camber
    // is active, and a simple resulting contour
    long M = n / 2;
    std::vector<double> x = shapedetail::cosine_stations(std::max(M, 64L));
    for (int s = 0; s < 2; ++s) {
        const double* c = &prm.c[static_cast<size_t>(9 * s)];
        for (double xv : x) {
            if (xv <= 0.0 || xv >= 1.0) continue;
            double t = c[0] + c[1] * xv + c[2] * xv * xv;
            double m = c[3] + c[4] * xv + c[5] * xv * xv;
            double p = c[6] + c[7] * xv + c[8] * xv * xv;
            if (t <= 0) throw ShapeError("foil18_shape: nonpositive thickness at x=" + std::to_string(xv));
            if (m != 0 && (p <= 0.05 || p >= 0.95))
                throw ShapeError("foil18_shape: camber location out of range at x=" + std::to_string(xv));
        }
    }
    Tape tp;
    Var pv = tp.leaf(Tensor({18, 1}, prm.as_vector()), false);
    const Tensor& pts = tp.val(foil18_shape_var(tp, pv, n));
    std::vector<Vec2> v(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i)
        v[static_cast<size_t>(i)] = {pts.v[static_cast<size_t>(2 * i)], pts.v[static_cast<size_t>(2 * i + 1)]};
    Contour2D out(std::move(v));
    if (out.self_intersects()) throw ShapeError("foil18_shape: contour self-intersects");
    return out;
}

// ---------------------------------------------------------------------------
// 21-parameter deformation: linear in the parameters for a fixed vertex set,
// so it reduces to three per-axis basis matmuls.
// ---------------------------------------------------------------------------
struct DeformExtents {
    double lx = 2, ly = 2, lz = 2;
    static DeformExtents of(const Tensor& x0) {
        DeformExtents e;
        long n = x0.rows();
        double lo[3] = {1e300, 1e300, 1e300}, hi[3] = {-1e300, -1e300, -1e300};
        for (long i = 0; i < n; ++i)
            for (int a = 0; a < 3; ++a) {
                double v = x0.v[static_cast<size_t>(3 * i + a)];
                lo[a] = std::min(lo[a], v);
                hi[a] = std::max(hi[a], v);
            }
        e.lx = hi[0] - lo[0];
        e.ly = hi[1] - lo[1];
        e.lz = hi[2] - lo[2];
        if (e.lx <= 0 || e.ly <= 0 || e.lz <= 0) throw ShapeError("deform_21: degenerate extents");
        return e;
    }
};

// Per-axis basis matrices (V x 7) for the deformation family.
inline std::array<Tensor, 3> deform21_basis(const Tensor& x0, const DeformExtents& ext) {
    long n = x0.rows();
    std::array<Tensor, 3> phi = {Tensor::zeros({n, 7}), Tensor::zeros({n, 7}), Tensor::zeros({n, 7})};
    for (long i = 0; i < n; ++i) {
        double x = x0.v[static_cast<size_t>(3 * i)], y = x0.v[static_cast<size_t>(3 * i + 1)],
               z = x0.v[static_cast<size_t>(3 * i + 2)];
        double* px = &phi[0].v[static_cast<size_t>(7 * i)];
        px[0] = 1;
        px[1] = x;
        px[2] = x * x;
        px[3] = x * std::cos(y / ext.ly * kTwoPi);
        px[4] = x * std::cos(z / ext.lz * kTwoPi);
        px[5] = x * std::sin(y / ext.ly * kTwoPi);
        px[6] = x * std::sin(z / ext.lz * kTwoPi);
        double* py = &phi[1].v[static_cast<size_t>(7 * i)];
        py[0] = 1;
        py[1] = y;
        py[2] = y * y;
        py[3] = y * std::cos(x / ext.lx * kPi);
        py[4] = y * std::cos(x / ext.lx * kTwoPi);
        py[5] = y * std::sin(x / ext.lx * kPi);
        py[6] = y * std::sin(x / ext.lx * kTwoPi);
        double* pz = &phi[2].v[static_cast<size_t>(7 * i)];
        pz[0] = 1;
        pz[1] = z;
        pz[2] = z * z;
        pz[3] = z * std::cos(x / ext.lx * kPi);
        pz[4] = z * std::cos(x / ext.lx * kTwoPi);
        pz[5] = z * std::sin(x / ext.lx * kPi);
        pz[6] = z * std::sin(x / ext.lx * kTwoPi);
    }
    return phi;
}

// Differentiable deformation: params is (21 x 1), x0 a fixed (V x 3) vertex
// set; returns (V x 3) deformed vertices.
inline Var deform_21_var(Tape& tp, Var params, const Tensor& x0, const DeformExtents& ext) {
    auto phi = deform21_basis(x0, ext);
    Var flat = tp.reshape(params, {1, 21});
    auto axis = [&](int a) {
        Var ca = tp.reshape(tp.slice_cols(flat, 7 * a, 7 * a + 7), {7, 1});
        return tp.matmul(tp.constant(phi[static_cast<size_t>(a)]), ca);
    };
    return tp.concat_cols(tp.concat_cols(axis(0), axis(1)), axis(2));
}

inline Tensor deform_21(const Deform21Params& prm, const Tensor& x0, const DeformExtents& ext) {
    Tape tp;
    Var pv = tp.leaf(Tensor({21, 1}, prm.as_vector()), false);
    return tp.val(deform_21_var(tp, pv, x0, ext));
}

inline CubeMap deform_21(const Deform21Params& prm, const CubeMap& x0) {
    Tensor pos = x0.positions_tensor();
    Tensor out = deform_21(prm, pos, DeformExtents::of(pos));
    return CubeMap::from_positions_tensor(out, x0.R);
}

} // namespace geoshape
