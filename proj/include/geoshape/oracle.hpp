// Desk-scale flow oracles and the randomized shape generators that build
// training corpora.
//
// 2D: constant-strength source panels plus a single global vortex strength
// (Hess-Smith), flow tangency collocated at panel midpoints, Kutta closure of
// equal tangential speeds on the two trailing-edge panels. Per-panel
// C_p = 1 - u_e^2 with u_e the tangential speed. Drag combines the numerical
// pressure-drag residual with a Blasius flat-plate friction term
// c_f = 0.664/sqrt(Re_x) grown from the stagnation point, which also supplies
// the (c_f, u_e) auxiliary channels.
//
// 3D: Newtonian facet model, C_p = 2 max(0, n.v)^2 on windward facets,
// referenced to the windward projected area. Sphere drag integrates to 1,
// a normal plate to 2; both serve as analytic checks.
#pragma once

#include <functional>
#include <optional>
#include <random>
#include <variant>

#include "cubemap.hpp"
#include "geom.hpp"
#include "shapes.hpp"

namespace geoshape {

class OracleError : public std::runtime_error {
public:
    explicit OracleError(const std::string& m) : std::runtime_error(m) {}
};
class SolverSingular : public OracleError {
public:
    explicit SolverSingular(const std::string& m) : OracleError(m) {}
};

struct FlowConditions {
    double alpha = 0.0;          // angle of attack, radians (2D)
    Vec3 v_hat{1, 0, 0};         // flow direction (3D)
    double reynolds = 1e6;

    void validate() const {
        if (std::fabs(v_hat.norm() - 1.0) > 1e-9) throw OracleError("FlowConditions: |v_hat| must be 1");
        if (!(reynolds > 0)) throw OracleError("FlowConditions: reynolds must be positive");
    }
};

struct ShapeParams {
    std::string family;           // naca3 | foil18 | deform21 | none
    std::vector<double> values;
};

struct SimRecord {
    std::variant<Contour2D, CubeMap> shape;
    std::vector<double> Y;        // per-vertex pressure coefficients
    double Z = 0.0;               // drag coefficient
    std::vector<double> cf;       // aux: skin friction (2D)
    std::vector<double> ue;       // aux: edge velocity (2D)
    double lift = 0.0;            // C_L (2D only)
    uint64_t seed = 0;
    ShapeParams params;
    FlowConditions flow;

    bool is_contour() const { return std::holds_alternative<Contour2D>(shape); }
    const Contour2D& contour() const { return std::get<Contour2D>(shape); }
    const CubeMap& cubemap() const { return std::get<CubeMap>(shape); }
    long vertex_count() const {
        return is_contour() ? static_cast<long>(contour().size()) : cubemap().texel_count();
    }
};

// ---------------------------------------------------------------------------
// Lift integration: C_L = -sum_i Y_i (n_i . j_alpha) ds_i, with n ds = perp of
// the edge vector and j_alpha the unit direction perpendicular to the flow.
// Shared by the oracle and (through the tape twin in shapeopt) the fitness.
// ---------------------------------------------------------------------------
inline double integrate_lift(const std::vector<double>& y, const Contour2D& c, double alpha) {
    size_t n = c.size();
    if (y.size() != n) throw OracleError("integrate_lift: field size mismatch");
    double ja_x = -std::sin(alpha), ja_y = std::cos(alpha);
    double s = 0;
    for (size_t i = 0; i < n; ++i) {
        Vec2 e = c.points[(i + 1) % n] - c.points[i];
        // outward normal times panel length for a CCW contour
        double nx = e.y, ny = -e.x;
        s -= y[i] * (nx * ja_x + ny * ja_y);
    }
    return s;
}

namespace oracledetail {

// Dense LU solve with partial pivoting; throws SolverSingular on a vanishing
// pivot and verifies the residual.
inline std::vector<double> lu_solve(std::vector<double> a, std::vector<double> b, long n) {
    std::vector<double> a0 = a, b0 = b;
    std::vector<long> piv(static_cast<size_t>(n));
    for (long k = 0; k < n; ++k) {
        long best = k;
        double bv = std::fabs(a[static_cast<size_t>(k * n + k)]);
        for (long i = k + 1; i < n; ++i) {
            double x = std::fabs(a[static_cast<size_t>(i * n + k)]);
            if (x > bv) {
                bv = x;
                best = i;
            }
        }
        if (bv < 1e-300) throw SolverSingular("panel solve: singular influence matrix");
        piv[static_cast<size_t>(k)] = best;
        if (best != k) {
            for (long j = 0; j < n; ++j)
                std::swap(a[static_cast<size_t>(k * n + j)], a[static_cast<size_t>(best * n + j)]);
            std::swap(b[static_cast<size_t>(k)], b[static_cast<size_t>(best)]);
        }
        double inv = 1.0 / a[static_cast<size_t>(k * n + k)];
        for (long i = k + 1; i < n; ++i) {
            double f = a[static_cast<size_t>(i * n + k)] * inv;
            if (f == 0.0) continue;
            a[static_cast<size_t>(i * n + k)] = 0;
            for (long j = k + 1; j < n; ++j)
                a[static_cast<size_t>(i * n + j)] -= f * a[static_cast<size_t>(k * n + j)];
            b[static_cast<size_t>(i)] -= f * b[static_cast<size_t>(k)];
        }
    }
    std::vector<double> x(static_cast<size_t>(n));
    for (long i = n - 1; i >= 0; --i) {
        double s = b[static_cast<size_t>(i)];
        for (long j = i + 1; j < n; ++j) s -= a[static_cast<size_t>(i * n + j)] * x[static_cast<size_t>(j)];
        x[static_cast<size_t>(i)] = s / a[static_cast<size_t>(i * n + i)];
    }
    // residual check against the original system
    double rmax = 0, bnorm = 1e-30;
    for (long i = 0; i < n; ++i) {
        double s = -b0[static_cast<size_t>(i)];
        bnorm = std::max(bnorm, std::fabs(b0[static_cast<size_t>(i)]));
        for (long j = 0; j < n; ++j) s += a0[static_cast<size_t>(i * n + j)] * x[static_cast<size_t>(j)];
        rmax = std::max(rmax, std::fabs(s));
    }
    if (rmax / std::max(bnorm, 1.0) > 1e-10)
        throw SolverSingular("panel solve: residual too large (" + std::to_string(rmax) + ")");
    return x;
}

// Velocity at p induced by unit-strength source and vortex sheets on the
// panel a->b (tangent t, normal n, length s).
struct PanelInfluence {
    Vec2 source, vortex;
};

inline PanelInfluence panel_influence(Vec2 p, Vec2 a, Vec2 t, Vec2 nrm, double s, bool self) {
    Vec2 rel = p - a;
    double xl = rel.dot(t), yl = rel.dot(nrm);
    double lnr = 0.0, beta;
    if (self) {
        beta = kPi;  // collocation approached from the outward side
    } else {
        double r1sq = xl * xl + yl * yl;
        double dx2 = xl - s;
        double r2sq = dx2 * dx2 + yl * yl;
        lnr = 0.5 * std::log(r1sq / r2sq);
        beta = wrap_angle_diff(std::atan2(yl, dx2) - std::atan2(yl, xl));
    }
    // note: (t, nrm) is a left-handed pair (nrm is t rotated by -90), so the
    // counter-clockwise vortex kernel appears with flipped components here
    double us = lnr / kTwoPi, vs = beta / kTwoPi;
    double uv = beta / kTwoPi, vv = -lnr / kTwoPi;
    return {Vec2{us * t.x + vs * nrm.x, us * t.y + vs * nrm.y},
            Vec2{uv * t.x + vv * nrm.x, uv * t.y + vv * nrm.y}};
}

// Trailing edge = sharpest exterior turn; ties resolved by position so the
// result is independent of index relabeling.
inline size_t trailing_edge_index(const Contour2D& c) {
    size_t n = c.size(), best = 0;
    double best_turn = -1e300;
    for (size_t i = 0; i < n; ++i) {
        Vec2 din = c.points[i] - c.points[(i + n - 1) % n];
        Vec2 dout = c.points[(i + 1) % n] - c.points[i];
        double cosang = din.dot(dout) / (din.norm() * dout.norm());
        double turn = std::acos(std::clamp(cosang, -1.0, 1.0));
        const Vec2& p = c.points[i];
        const Vec2& q = c.points[best];
        if (turn > best_turn + 1e-12 ||
            (std::fabs(turn - best_turn) <= 1e-12 && (p.x > q.x || (p.x == q.x && p.y > q.y)))) {
            best_turn = turn;
            best = i;
        }
    }
    return best;
}

} // namespace oracledetail

inline SimRecord panel_solve_2d(const Contour2D& c, const FlowConditions& fc) {
    fc.validate();
    if (c.self_intersects()) throw OracleError("panel_solve_2d: contour self-intersects");
    long n = static_cast<long>(c.size());
    std::vector<Vec2> tan(static_cast<size_t>(n)), nrm(static_cast<size_t>(n)), mid(static_cast<size_t>(n));
    std::vector<double> len(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) {
        Vec2 a = c.points[static_cast<size_t>(i)], b = c.points[static_cast<size_t>((i + 1) % n)];
        Vec2 e = b - a;
        len[static_cast<size_t>(i)] = e.norm();
        tan[static_cast<size_t>(i)] = e * (1.0 / len[static_cast<size_t>(i)]);
        nrm[static_cast<size_t>(i)] = {tan[static_cast<size_t>(i)].y, -tan[static_cast<size_t>(i)].x};
        mid[static_cast<size_t>(i)] = a + e * 0.5;
    }
    Vec2 uinf{std::cos(fc.alpha), std::sin(fc.alpha)};
    long te = static_cast<long>(oracledetail::trailing_edge_index(c));

    // unknowns: n source strengths + global vortex strength
    long m = n + 1;
    std::vector<double> A(static_cast<size_t>(m * m), 0.0), rhs(static_cast<size_t>(m), 0.0);
    // tangential influence rows for the Kutta panels (te-1 -> te edge pair)
    long kup = te;                 // panel starting at the TE node
    long klo = (te + n - 1) % n;   // panel ending at the TE node
    for (long i = 0; i < n; ++i) {
        for (long j = 0; j < n; ++j) {
            auto inf = oracledetail::panel_influence(mid[static_cast<size_t>(i)],
                                                     c.points[static_cast<size_t>(j)],
                                                     tan[static_cast<size_t>(j)], nrm[static_cast<size_t>(j)],
                                                     len[static_cast<size_t>(j)], i == j);
            A[static_cast<size_t>(i * m + j)] = inf.source.dot(nrm[static_cast<size_t>(i)]);
            A[static_cast<size_t>(i * m + n)] += inf.vortex.dot(nrm[static_cast<size_t>(i)]);
            if (i == kup || i == klo) {
                A[static_cast<size_t>(n * m + j)] += inf.source.dot(tan[static_cast<size_t>(i)]);
                A[static_cast<size_t>(n * m + n)] += inf.vortex.dot(tan[static_cast<size_t>(i)]);
            }
        }
        rhs[static_cast<size_t>(i)] = -uinf.dot(nrm[static_cast<size_t>(i)]);
    }
    rhs[static_cast<size_t>(n)] = -uinf.dot(tan[static_cast<size_t>(kup)] + tan[static_cast<size_t>(klo)]);

    std::vector<double> sol = oracledetail::lu_solve(A, rhs, m);
    double gamma = sol[static_cast<size_t>(n)];

    std::vector<double> vt(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) {
        Vec2 v = uinf;
        for (long j = 0; j < n; ++j) {
            auto inf = oracledetail::panel_influence(mid[static_cast<size_t>(i)],
                                                     c.points[static_cast<size_t>(j)],
                                                     tan[static_cast<size_t>(j)], nrm[static_cast<size_t>(j)],
                                                     len[static_cast<size_t>(j)], i == j);
            v = v + inf.source * sol[static_cast<size_t>(j)] + inf.vortex * gamma;
        }
        vt[static_cast<size_t>(i)] = v.dot(tan[static_cast<size_t>(i)]);
    }

    SimRecord rec;
    rec.flow = fc;
    rec.Y.resize(static_cast<size_t>(n));
    rec.ue.resize(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) {
        rec.Y[static_cast<size_t>(i)] = 1.0 - vt[static_cast<size_t>(i)] * vt[static_cast<size_t>(i)];
        rec.ue[static_cast<size_t>(i)] = std::fabs(vt[static_cast<size_t>(i)]);
    }

    // pressure drag residual along the flow direction
    double cdp = 0.0;
    for (long i = 0; i < n; ++i)
        cdp -= rec.Y[static_cast<size_t>(i)] *
               (nrm[static_cast<size_t>(i)].dot(uinf)) * len[static_cast<size_t>(i)];
    // Blasius friction from the stagnation point outward
    long stag = 0;
    for (long i = 1; i < n; ++i)
        if (rec.ue[static_cast<size_t>(i)] < rec.ue[static_cast<size_t>(stag)]) stag = i;
    std::vector<double> arc_f(static_cast<size_t>(n), 0.0), arc_b(static_cast<size_t>(n), 0.0);
    {
        double s = 0;
        for (long k = 1; k < n; ++k) {
            long prev = (stag + k - 1) % n;
            s += 0.5 * (len[static_cast<size_t>(prev)] + len[static_cast<size_t>((stag + k) % n)]);
            arc_f[static_cast<size_t>((stag + k) % n)] = s;
        }
        s = 0;
        for (long k = 1; k < n; ++k) {
            long prev = (stag - k + 1 + 2 * n) % n;
            s += 0.5 * (len[static_cast<size_t>(prev)] + len[static_cast<size_t>((stag - k + 2 * n) % n)]);
            arc_b[static_cast<size_t>((stag - k + 2 * n) % n)] = s;
        }
    }
    rec.cf.resize(static_cast<size_t>(n));
    double cdf = 0.0;
    for (long i = 0; i < n; ++i) {
        double s_run = (i == stag) ? 0.0
                                   : std::min(arc_f[static_cast<size_t>(i)], arc_b[static_cast<size_t>(i)]);
        double re_x = std::max(fc.reynolds * rec.ue[static_cast<size_t>(i)] * s_run, 1.0);
        rec.cf[static_cast<size_t>(i)] = 0.664 / std::sqrt(re_x);
        cdf += rec.cf[static_cast<size_t>(i)] * len[static_cast<size_t>(i)];
    }
    rec.Z = std::fabs(cdp) + cdf;
    rec.lift = integrate_lift(rec.Y, c, fc.alpha);
    rec.shape = c;
    return rec;
}

// ---------------------------------------------------------------------------
// Newtonian 3D drag
// ---------------------------------------------------------------------------
inline SimRecord newtonian_drag_3d(const TriMesh& mesh, const FlowConditions& fc,
                                   const CubeMap* source_cm = nullptr) {
    fc.validate();
    if (mesh.faces.empty()) throw OracleError("newtonian_drag_3d: empty mesh");
    double total_area = mesh.total_area();
    if (total_area <= 0) throw OracleError("newtonian_drag_3d: degenerate mesh");

    double a_ref = 0.0, force = 0.0;
    std::vector<double> vert_w(mesh.vertices.size(), 0.0), vert_cp(mesh.vertices.size(), 0.0);
    for (const auto& f : mesh.faces) {
        Vec3 a = mesh.vertices[static_cast<size_t>(f[0])];
        Vec3 b = mesh.vertices[static_cast<size_t>(f[1])];
        Vec3 cc = mesh.vertices[static_cast<size_t>(f[2])];
        Vec3 nn = (b - a).cross(cc - a);
        double area2 = nn.norm();
        if (area2 <= 0) continue;
        double area = 0.5 * area2;
        double ndotv = nn.dot(fc.v_hat) / area2;
        double cp = ndotv > 0 ? 2.0 * ndotv * ndotv : 0.0;
        if (ndotv > 0) a_ref += ndotv * area;
        force += cp * ndotv * area;
        for (long vi : f) {
            vert_w[static_cast<size_t>(vi)] += area;
            vert_cp[static_cast<size_t>(vi)] += cp * area;
        }
    }
    SimRecord rec;
    rec.flow = fc;
    if (a_ref <= 1e-12 * total_area) {
        rec.Z = 0.0;  // no windward facet: zero pressure force by construction
    } else {
        rec.Z = force / a_ref;
    }
    std::vector<double> per_vertex(mesh.vertices.size());
    for (size_t i = 0; i < mesh.vertices.size(); ++i)
        per_vertex[i] = vert_w[i] > 0 ? vert_cp[i] / vert_w[i] : 0.0;

    if (source_cm) {
        // re-expand merged vertices onto the 6 R^2 texel layout
        long R = source_cm->R;
        rec.Y.resize(static_cast<size_t>(source_cm->texel_count()));
        std::map<long, long> canon_to_vid;
        long vid = 0;
        for (int fc2 = 0; fc2 < 6; ++fc2)
            for (long r = 0; r < R; ++r)
                for (long c = 0; c < R; ++c) {
                    TexelRef own = cube_owner_texel(fc2, r, c, R);
                    long orow = texel_row(own, R);
                    if (own.face == fc2 && own.r == r && own.c == c) canon_to_vid[orow] = vid++;
                }
        for (int fc2 = 0; fc2 < 6; ++fc2)
            for (long r = 0; r < R; ++r)
                for (long c = 0; c < R; ++c) {
                    TexelRef own = cube_owner_texel(fc2, r, c, R);
                    rec.Y[static_cast<size_t>(texel_row({fc2, r, c}, R))] =
                        per_vertex[static_cast<size_t>(canon_to_vid[texel_row(own, R)])];
                }
        rec.shape = *source_cm;
    } else {
        rec.Y = per_vertex;
    }
    return rec;
}

inline SimRecord newtonian_drag_3d(const CubeMap& cm, const FlowConditions& fc) {
    TriMesh m = cubemap_to_trimesh(cm);
    return newtonian_drag_3d(m, fc, &cm);
}

// ---------------------------------------------------------------------------
// Randomized shape generators (pure functions of seed and config)
// ---------------------------------------------------------------------------
struct NacaBox {
    double t_lo = 0.05, t_hi = 0.25;
    double m_lo = 0.0, m_hi = 0.1;
    double p_lo = 0.2, p_hi = 0.7;
};

struct NoiseConfig {
    double amplitude = 0.15;  // total multiplicative thickness modulation
    int harmonics = 3;
};

inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::pair<Contour2D, ShapeParams> random_airfoil(uint64_t seed, long n, const NacaBox& box,
                                                        const NoiseConfig& noise) {
    for (int attempt = 0; attempt < 16; ++attempt) {
        std::mt19937_64 g(mix_seed(seed, static_cast<uint64_t>(attempt)));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Naca3Params prm;
        prm.t = box.t_lo + (box.t_hi - box.t_lo) * u(g);
        prm.m = box.m_lo + (box.m_hi - box.m_lo) * u(g);
        prm.p = box.p_lo + (box.p_hi - box.p_lo) * u(g);
        std::vector<double> amp(static_cast<size_t>(noise.harmonics)),
            phase(static_cast<size_t>(noise.harmonics));
        double amp_budget = noise.amplitude;
        for (int h = 0; h < noise.harmonics; ++h) {
            amp[static_cast<size_t>(h)] =
                amp_budget * (2 * u(g) - 1) / static_cast<double>((h + 1) * noise.harmonics);
            phase[static_cast<size_t>(h)] = kTwoPi * u(g);
        }
        Contour2D base = naca_shape(prm, n);
        if (noise.amplitude == 0.0) return {base, ShapeParams{"naca3", prm.as_vector()}};

        // multiplicative thickness noise about the camber line
        std::vector<Vec2> pts = base.points;
        long half = n / 2;
        for (long k = 1; k < half; ++k) {
            // nodes k (upper) and n-k (lower) share station x
            Vec2& upv = pts[static_cast<size_t>(k)];
            Vec2& lov = pts[static_cast<size_t>(n - k)];
            Vec2 mid = (upv + lov) * 0.5;
            double x = mid.x;
            double tau = 1.0;
            for (int h = 0; h < noise.harmonics; ++h)
                tau += amp[static_cast<size_t>(h)] *
                       std::cos(kTwoPi * static_cast<double>(h + 1) * x + phase[static_cast<size_t>(h)]);
            upv = mid + (upv - mid) * tau;
            lov = mid + (lov - mid) * tau;
        }
        bool ok = true;
        for (long k = 1; k < half && ok; ++k) {
            Vec2 d = pts[static_cast<size_t>(k)] - pts[static_cast<size_t>(n - k)];
            if (d.norm() <= 1e-7) ok = false;  // pinched thickness
        }
        if (!ok || Contour2D::polyline_self_intersects(pts)) continue;
        return {Contour2D(pts), ShapeParams{"naca3", prm.as_vector()}};
    }
    throw OracleError("random_airfoil: could not produce a simple contour after retries");
}

// Random 18-parameter foil around the NACA box (quadratic coefficient spreads
// small enough to keep shapes valid; retries with sub-seeds otherwise).
inline std::pair<Contour2D, ShapeParams> random_foil18(uint64_t seed, long n, const NacaBox& box,
                                                       double spread = 0.3) {
    for (int attempt = 0; attempt < 32; ++attempt) {
        std::mt19937_64 g(mix_seed(seed ^ 0xf018ULL, static_cast<uint64_t>(attempt)));
        std::uniform_real_distribution<double> u(0.0, 1.0);
        Naca3Params base;
        base.t = box.t_lo + (box.t_hi - box.t_lo) * u(g);
        base.m = box.m_lo + (box.m_hi - box.m_lo) * u(g);
        base.p = box.p_lo + (box.p_hi - box.p_lo) * u(g);
        Foil18Params prm = Foil18Params::from_naca3(base);
        auto jitter = [&](double scale) { return spread * scale * (2 * u(g) - 1); };
        for (int s = 0; s < 2; ++s) {
            size_t o = static_cast<size_t>(9 * s);
            prm.c[o + 0] = std::max(0.04, prm.c[o + 0] + jitter(0.05));
            prm.c[o + 1] = jitter(0.08);
            prm.c[o + 2] = jitter(0.08);
            prm.c[o + 3] = std::max(0.0, prm.c[o + 3] + jitter(0.03));
            prm.c[o + 4] = jitter(0.04);
            prm.c[o + 5] = jitter(0.04);
            prm.c[o + 6] = std::clamp(prm.c[o + 6] + jitter(0.1), 0.25, 0.65);
            prm.c[o + 7] = jitter(0.1);
            prm.c[o + 8] = jitter(0.1);
        }
        try {
            Contour2D cont = foil18_shape(prm, n);
            return {cont, ShapeParams{"foil18", prm.as_vector()}};
        } catch (const ShapeError&) {
            continue;
        }
    }
    throw OracleError("random_foil18: could not produce a valid foil after retries");
}

// Random 21-parameter deformation of the unit sphere, canonicalized by
// centroid-ray remeshing (which doubles as the star-shape check).
inline std::pair<CubeMap, ShapeParams> random_shape_3d(uint64_t seed, double amplitude, long R) {
    if (!(amplitude > 0 && amplitude <= 1)) throw OracleError("random_shape_3d: amplitude in (0,1]");
    CubeMap sphere = unit_sphere_cubemap(R);
    for (int attempt = 0; attempt < 5; ++attempt) {
        std::mt19937_64 g(mix_seed(seed ^ 0x3dULL, static_cast<uint64_t>(attempt)));
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        Deform21Params prm = Deform21Params::identity();
        for (int axis = 0; axis < 3; ++axis) {
            size_t o = static_cast<size_t>(7 * axis);
            prm.c[o + 0] = 0.10 * amplitude * u(g);   // translation
            prm.c[o + 1] = 1.0 + 0.45 * amplitude * u(g);
            prm.c[o + 2] = 0.18 * amplitude * u(g);   // quadratic taper
            for (size_t k = 3; k < 7; ++k) prm.c[o + k] = 0.12 * amplitude * u(g);
        }
        CubeMap deformed = deform_21(prm, sphere);
        try {
            TriMesh m = cubemap_to_trimesh(deformed);
            CubeMap canon = remesh_to_cubemap(m, R, m.centroid());
            return {canon, ShapeParams{"deform21", prm.as_vector()}};
        } catch (const StarShapeViolation&) {
            continue;
        }
    }
    throw OracleError("random_shape_3d: no star-shaped draw after redraws");
}

} // namespace geoshape
