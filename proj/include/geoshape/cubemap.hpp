// Cube-map remeshing: a sphere-homotopic surface becomes six R x R structured
// grids of 3D positions, one per cube face, with texels shared along cube
// edges (inclusive grids: corner texels appear on three faces, edge texels on
// two). Remeshing casts rays from a center point through the canonical cube
// directions and stores the surface intersections; it rejects inputs that are
// not star-shaped with respect to that center.
//
// Face f in {0..5} covers axis k = f/2 with sign +/- (f%2): the face plane is
// n + a*s + b*t for a,b in [-1,1], s = e_{k+1 mod 3}, t = e_{k+2 mod 3}.
// Texel (r,c) sits at a = (2c-(R-1))/(R-1), b likewise from r, so shared
// texels evaluate bitwise-identically from every adjacent face.
//
// Halo indices outside a face fold geometrically onto the neighbor face
// (possibly twice for wide halos). Corner halo blocks, where the unfolding is
// ambiguous (the 8 irregular vertices), replicate the nearest in-face texel.
#pragma once

#include <array>
#include <map>

#include "autodiff.hpp"
#include "geom.hpp"

namespace geoshape {

class StarShapeViolation : public std::runtime_error {
public:
    std::vector<long> offending_rays;
    StarShapeViolation(const std::string& msg, std::vector<long> rays)
        : std::runtime_error(msg), offending_rays(std::move(rays)) {}
};

struct TexelRef {
    int face = 0;
    long r = 0, c = 0;
};

inline long texel_row(const TexelRef& t, long R) { return t.face * R * R + t.r * R + t.c; }

namespace cubedetail {

inline void face_axes(int face, int& axis, double& sgn, int& s_axis, int& t_axis) {
    axis = face / 2;
    sgn = (face % 2 == 0) ? 1.0 : -1.0;
    s_axis = (axis + 1) % 3;
    t_axis = (axis + 2) % 3;
}

inline double grid_coord(long i, long R) {
    return (2.0 * static_cast<double>(i) - static_cast<double>(R - 1)) / static_cast<double>(R - 1);
}

// Point on the (possibly extended) face plane for integer grid coords.
inline std::array<double, 3> face_plane_point(int face, long r, long c, long R) {
    int axis, s_axis, t_axis;
    double sgn;
    face_axes(face, axis, sgn, s_axis, t_axis);
    std::array<double, 3> q{0, 0, 0};
    q[static_cast<size_t>(axis)] = sgn;
    q[static_cast<size_t>(s_axis)] = grid_coord(c, R);
    q[static_cast<size_t>(t_axis)] = grid_coord(r, R);
    return q;
}

// Resolve a point on the cube surface (|q_j| <= 1 for all j, at least one
// exactly +-1) to the lowest-id face containing it, with its grid indices.
inline TexelRef owner_of_surface_point(const std::array<double, 3>& q, long R) {
    const double tol = 1e-9;
    for (int f = 0; f < 6; ++f) {
        int axis, s_axis, t_axis;
        double sgn;
        face_axes(f, axis, sgn, s_axis, t_axis);
        if (std::fabs(q[static_cast<size_t>(axis)] - sgn) > tol) continue;
        double a = q[static_cast<size_t>(s_axis)], b = q[static_cast<size_t>(t_axis)];
        if (std::fabs(a) > 1 + tol || std::fabs(b) > 1 + tol) continue;
        double cf = (a + 1.0) * static_cast<double>(R - 1) / 2.0;
        double rf = (b + 1.0) * static_cast<double>(R - 1) / 2.0;
        long c = std::lround(cf), r = std::lround(rf);
        if (std::fabs(cf - static_cast<double>(c)) > 1e-6 || std::fabs(rf - static_cast<double>(r)) > 1e-6)
            throw GeomError("cube fold: point not on the texel grid");
        return TexelRef{f, r, c};
    }
    throw GeomError("cube fold: point not on cube surface");
}

} // namespace cubedetail

// Source texel feeding (face, r, c) where r and/or c may be out of [0, R):
// identity in range, geometric fold across one edge (or two for wide halos),
// nearest in-face texel for the ambiguous corner blocks.
inline TexelRef cube_halo_source(int face, long r, long c, long R) {
    bool r_out = (r < 0 || r >= R), c_out = (c < 0 || c >= R);
    if (!r_out && !c_out) return TexelRef{face, r, c};
    if (r_out && c_out)
        return TexelRef{face, std::clamp(r, 0L, R - 1), std::clamp(c, 0L, R - 1)};

    std::array<double, 3> q = cubedetail::face_plane_point(face, r, c, R);
    int normal_axis = face / 2;
    for (int iter = 0; iter < 3; ++iter) {
        int j = -1;
        for (int ax = 0; ax < 3; ++ax)
            if (ax != normal_axis && std::fabs(q[static_cast<size_t>(ax)]) > 1.0 + 1e-12) j = ax;
        if (j < 0) break;
        double over = std::fabs(q[static_cast<size_t>(j)]) - 1.0;
        double sn = q[static_cast<size_t>(normal_axis)] > 0 ? 1.0 : -1.0;
        double sj = q[static_cast<size_t>(j)] > 0 ? 1.0 : -1.0;
        q[static_cast<size_t>(normal_axis)] = sn * (1.0 - over);
        q[static_cast<size_t>(j)] = sj;
        normal_axis = j;
    }
    return cubedetail::owner_of_surface_point(q, R);
}

// Canonical owner (lowest face id) of an in-range texel; identity for
// interior texels, cross-face for shared edge/corner texels.
inline TexelRef cube_owner_texel(int face, long r, long c, long R) {
    std::array<double, 3> q = cubedetail::face_plane_point(face, r, c, R);
    return cubedetail::owner_of_surface_point(q, R);
}

// Canonical (unit) ray direction through texel (face, r, c).
inline Vec3 cube_direction(int face, long r, long c, long R) {
    std::array<double, 3> q = cubedetail::face_plane_point(face, r, c, R);
    return Vec3{q[0], q[1], q[2]}.normalized();
}

// ---------------------------------------------------------------------------
// CubeMap
// ---------------------------------------------------------------------------
struct CubeMap {
    long R = 0;
    std::array<std::vector<Vec3>, 6> faces;  // R*R each, row-major

    static CubeMap empty(long R_) {
        CubeMap cm;
        cm.R = R_;
        for (auto& f : cm.faces) f.assign(static_cast<size_t>(R_ * R_), Vec3{});
        return cm;
    }

    Vec3& at(int f, long r, long c) { return faces[static_cast<size_t>(f)][static_cast<size_t>(r * R + c)]; }
    const Vec3& at(int f, long r, long c) const {
        return faces[static_cast<size_t>(f)][static_cast<size_t>(r * R + c)];
    }
    long texel_count() const { return 6 * R * R; }

    // Positions flattened in row order (face, r, c) as an N x 3 tensor.
    Tensor positions_tensor() const {
        Tensor t = Tensor::zeros({texel_count(), 3});
        long i = 0;
        for (int f = 0; f < 6; ++f)
            for (long r = 0; r < R; ++r)
                for (long c = 0; c < R; ++c) {
                    const Vec3& p = at(f, r, c);
                    t.v[static_cast<size_t>(i * 3 + 0)] = p.x;
                    t.v[static_cast<size_t>(i * 3 + 1)] = p.y;
                    t.v[static_cast<size_t>(i * 3 + 2)] = p.z;
                    ++i;
                }
        return t;
    }
    static CubeMap from_positions_tensor(const Tensor& t, long R_) {
        CubeMap cm = empty(R_);
        long i = 0;
        for (int f = 0; f < 6; ++f)
            for (long r = 0; r < R_; ++r)
                for (long c = 0; c < R_; ++c) {
                    cm.at(f, r, c) = Vec3{t.v[static_cast<size_t>(i * 3)], t.v[static_cast<size_t>(i * 3 + 1)],
                                          t.v[static_cast<size_t>(i * 3 + 2)]};
                    ++i;
                }
        return cm;
    }

    // Max disagreement between shared-edge texels across adjacent faces.
    double stitching_error() const {
        double worst = 0;
        for (int f = 0; f < 6; ++f)
            for (long r = 0; r < R; ++r)
                for (long c = 0; c < R; ++c) {
                    if (r != 0 && r != R - 1 && c != 0 && c != R - 1) continue;
                    TexelRef o = cube_owner_texel(f, r, c, R);
                    worst = std::max(worst, (at(f, r, c) - at(o.face, o.r, o.c)).norm());
                }
        return worst;
    }

    Vec3 centroid() const {
        Vec3 s{0, 0, 0};
        for (const auto& face : faces)
            for (const auto& p : face) s = s + p;
        return s * (1.0 / static_cast<double>(texel_count()));
    }
};

inline CubeMap unit_sphere_cubemap(long R) {
    CubeMap cm = CubeMap::empty(R);
    for (int f = 0; f < 6; ++f)
        for (long r = 0; r < R; ++r)
            for (long c = 0; c < R; ++c) cm.at(f, r, c) = cube_direction(f, r, c, R);
    return cm;
}

// ---------------------------------------------------------------------------
// Feature fields over a cube map and halo unfolding
// ---------------------------------------------------------------------------
struct CubeField {
    long R = 0, C = 0;                        // resolution, channels
    std::array<std::vector<double>, 6> faces;  // R*R*C each

    static CubeField constant(long R_, long C_, double x) {
        CubeField f;
        f.R = R_;
        f.C = C_;
        for (auto& a : f.faces) a.assign(static_cast<size_t>(R_ * R_ * C_), x);
        return f;
    }
    double* at(int f, long r, long c) {
        return &faces[static_cast<size_t>(f)][static_cast<size_t>((r * R + c) * C)];
    }
    const double* at(int f, long r, long c) const {
        return &faces[static_cast<size_t>(f)][static_cast<size_t>((r * R + c) * C)];
    }
    static CubeField positions_of(const CubeMap& cm) {
        CubeField f;
        f.R = cm.R;
        f.C = 3;
        for (int k = 0; k < 6; ++k) {
            f.faces[static_cast<size_t>(k)].resize(static_cast<size_t>(cm.R * cm.R * 3));
            for (long i = 0; i < cm.R * cm.R; ++i) {
                const Vec3& p = cm.faces[static_cast<size_t>(k)][static_cast<size_t>(i)];
                f.faces[static_cast<size_t>(k)][static_cast<size_t>(i * 3 + 0)] = p.x;
                f.faces[static_cast<size_t>(k)][static_cast<size_t>(i * 3 + 1)] = p.y;
                f.faces[static_cast<size_t>(k)][static_cast<size_t>(i * 3 + 2)] = p.z;
            }
        }
        return f;
    }
};

struct PaddedFaceGrid {
    int face = 0;
    long R = 0, C = 0, h = 0;              // interior resolution, channels, halo width
    std::vector<double> values;             // (R+2h)^2 * C, row-major
    std::vector<TexelRef> provenance;       // (R+2h)^2 source texels

    long P() const { return R + 2 * h; }
    const double* at(long pr, long pc) const {
        return &values[static_cast<size_t>((pr * P() + pc) * C)];
    }
};

inline PaddedFaceGrid unfold_with_halo(const CubeField& field, int face, long h) {
    if (h > field.R) throw GeomError("unfold_with_halo: halo wider than face");
    PaddedFaceGrid g;
    g.face = face;
    g.R = field.R;
    g.C = field.C;
    g.h = h;
    long P = g.P();
    g.values.resize(static_cast<size_t>(P * P * field.C));
    g.provenance.resize(static_cast<size_t>(P * P));
    for (long pr = 0; pr < P; ++pr)
        for (long pc = 0; pc < P; ++pc) {
            TexelRef src = cube_halo_source(face, pr - h, pc - h, field.R);
            g.provenance[static_cast<size_t>(pr * P + pc)] = src;
            const double* s = field.at(src.face, src.r, src.c);
            std::copy(s, s + field.C, &g.values[static_cast<size_t>((pr * P + pc) * field.C)]);
        }
    return g;
}

// ---------------------------------------------------------------------------
// Triangulation: shared texels merged to single vertices (6R^2 - 12R + 8).
// ---------------------------------------------------------------------------
inline TriMesh cubemap_to_trimesh(const CubeMap& cm) {
    long R = cm.R;
    std::vector<long> vid(static_cast<size_t>(cm.texel_count()), -1);
    TriMesh m;
    for (int f = 0; f < 6; ++f)
        for (long r = 0; r < R; ++r)
            for (long c = 0; c < R; ++c) {
                TexelRef own = cube_owner_texel(f, r, c, R);
                long row = texel_row(TexelRef{f, r, c}, R);
                long orow = texel_row(own, R);
                if (own.face == f && own.r == r && own.c == c) {
                    vid[static_cast<size_t>(row)] = static_cast<long>(m.vertices.size());
                    m.vertices.push_back(cm.at(f, r, c));
                } else {
                    vid[static_cast<size_t>(row)] = -2 - orow;  // resolved in a second pass
                }
            }
    for (long i = 0; i < cm.texel_count(); ++i)
        if (vid[static_cast<size_t>(i)] < -1)
            vid[static_cast<size_t>(i)] = vid[static_cast<size_t>(-(vid[static_cast<size_t>(i)] + 2))];

    for (int f = 0; f < 6; ++f) {
        bool flip = (f % 2 == 1);  // keep outward orientation on negative faces
        for (long r = 0; r + 1 < R; ++r)
            for (long c = 0; c + 1 < R; ++c) {
                long v00 = vid[static_cast<size_t>(texel_row({f, r, c}, R))];
                long v01 = vid[static_cast<size_t>(texel_row({f, r, c + 1}, R))];
                long v10 = vid[static_cast<size_t>(texel_row({f, r + 1, c}, R))];
                long v11 = vid[static_cast<size_t>(texel_row({f, r + 1, c + 1}, R))];
                if (!flip) {
                    m.faces.push_back({v00, v01, v11});
                    m.faces.push_back({v00, v11, v10});
                } else {
                    m.faces.push_back({v00, v11, v01});
                    m.faces.push_back({v00, v10, v11});
                }
            }
    }
    return m;
}

// ---------------------------------------------------------------------------
// BVH raycasting
// ---------------------------------------------------------------------------
struct RayHit {
    double t = 0;
    long tri = -1;
    double u = 0, v = 0;
};

class TriBVH {
public:
    TriBVH(const std::vector<Vec3>& verts, const std::vector<std::array<long, 3>>& faces)
        : verts_(verts), faces_(faces) {
        order_.resize(faces.size());
        for (size_t i = 0; i < faces.size(); ++i) order_[i] = static_cast<long>(i);
        nodes_.reserve(2 * faces.size() / kLeaf + 2);
        if (!faces.empty()) build(0, static_cast<long>(faces.size()));
    }

    // All ray/surface crossings with t > t_min, unsorted.
    void crossings(Vec3 o, Vec3 d, double t_min, std::vector<RayHit>& out) const {
        out.clear();
        if (nodes_.empty()) return;
        std::vector<long> stack{0};
        while (!stack.empty()) {
            long ni = stack.back();
            stack.pop_back();
            const Node& n = nodes_[static_cast<size_t>(ni)];
            if (!slab_hit(n, o, d)) continue;
            if (n.count > 0) {
                for (long i = n.start; i < n.start + n.count; ++i) {
                    RayHit h;
                    if (intersect(order_[static_cast<size_t>(i)], o, d, h) && h.t > t_min) out.push_back(h);
                }
            } else {
                stack.push_back(n.left);
                stack.push_back(n.right);
            }
        }
    }

private:
    static constexpr long kLeaf = 8;
    struct Node {
        Vec3 lo, hi;
        long left = -1, right = -1, start = 0, count = 0;
    };
    const std::vector<Vec3>& verts_;
    const std::vector<std::array<long, 3>>& faces_;
    std::vector<long> order_;
    std::vector<Node> nodes_;

    Vec3 centroid_of(long f) const {
        const auto& t = faces_[static_cast<size_t>(f)];
        return (verts_[static_cast<size_t>(t[0])] + verts_[static_cast<size_t>(t[1])] +
                verts_[static_cast<size_t>(t[2])]) *
               (1.0 / 3.0);
    }

    long build(long begin, long end) {
        Node n;
        n.lo = {1e300, 1e300, 1e300};
        n.hi = {-1e300, -1e300, -1e300};
        for (long i = begin; i < end; ++i) {
            const auto& t = faces_[static_cast<size_t>(order_[static_cast<size_t>(i)])];
            for (long vi : t) {
                const Vec3& p = verts_[static_cast<size_t>(vi)];
                n.lo = {std::min(n.lo.x, p.x), std::min(n.lo.y, p.y), std::min(n.lo.z, p.z)};
                n.hi = {std::max(n.hi.x, p.x), std::max(n.hi.y, p.y), std::max(n.hi.z, p.z)};
            }
        }
        long my = static_cast<long>(nodes_.size());
        nodes_.push_back(n);
        if (end - begin <= kLeaf) {
            nodes_[static_cast<size_t>(my)].start = begin;
            nodes_[static_cast<size_t>(my)].count = end - begin;
            return my;
        }
        Vec3 ext = n.hi - n.lo;
        int ax = (ext.x >= ext.y && ext.x >= ext.z) ? 0 : (ext.y >= ext.z ? 1 : 2);
        long mid = (begin + end) / 2;
        std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                         [&](long a, long b) {
                             Vec3 ca = centroid_of(a), cb = centroid_of(b);
                             double xa = ax == 0 ? ca.x : (ax == 1 ? ca.y : ca.z);
                             double xb = ax == 0 ? cb.x : (ax == 1 ? cb.y : cb.z);
                             if (xa != xb) return xa < xb;
                             return a < b;
                         });
        long l = build(begin, mid);
        long r = build(mid, end);
        nodes_[static_cast<size_t>(my)].left = l;
        nodes_[static_cast<size_t>(my)].right = r;
        return my;
    }

    static bool slab_hit(const Node& n, Vec3 o, Vec3 d) {
        double t0 = 0.0, t1 = 1e300;
        const double od[3] = {o.x, o.y, o.z};
        const double dd[3] = {d.x, d.y, d.z};
        const double lo[3] = {n.lo.x, n.lo.y, n.lo.z};
        const double hi[3] = {n.hi.x, n.hi.y, n.hi.z};
        for (int a = 0; a < 3; ++a) {
            if (std::fabs(dd[a]) < 1e-300) {
                if (od[a] < lo[a] || od[a] > hi[a]) return false;
                continue;
            }
            double inv = 1.0 / dd[a];
            double ta = (lo[a] - od[a]) * inv, tb = (hi[a] - od[a]) * inv;
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
            if (t0 > t1) return false;
        }
        return true;
    }

    bool intersect(long tri, Vec3 o, Vec3 d, RayHit& h) const {
        const auto& f = faces_[static_cast<size_t>(tri)];
        Vec3 v0 = verts_[static_cast<size_t>(f[0])];
        Vec3 e1 = verts_[static_cast<size_t>(f[1])] - v0;
        Vec3 e2 = verts_[static_cast<size_t>(f[2])] - v0;
        Vec3 pv = d.cross(e2);
        double det = e1.dot(pv);
        if (std::fabs(det) < 1e-300) return false;
        double inv = 1.0 / det;
        Vec3 tv = o - v0;
        double u = tv.dot(pv) * inv;
        const double eb = 1e-9;
        if (u < -eb || u > 1 + eb) return false;
        Vec3 qv = tv.cross(e1);
        double v = d.dot(qv) * inv;
        if (v < -eb || u + v > 1 + eb) return false;
        double t = e2.dot(qv) * inv;
        h = RayHit{t, tri, u, v};
        return true;
    }
};

namespace cubedetail {

// One crossing per ray or a StarShapeViolation. Coincident hits on shared
// edges/vertices are clustered by t; the most interior hit represents the
// cluster (stable backward formulas away from triangle borders).
inline RayHit single_crossing(const TriBVH& bvh, Vec3 origin, Vec3 dir, double scale, long ray_id,
                              std::vector<long>& bad_rays) {
    std::vector<RayHit> hits;
    bvh.crossings(origin, dir, 1e-12 * scale, hits);
    if (hits.empty()) {
        bad_rays.push_back(ray_id);
        return RayHit{};
    }
    std::sort(hits.begin(), hits.end(), [](const RayHit& a, const RayHit& b) {
        if (a.t != b.t) return a.t < b.t;
        return a.tri < b.tri;
    });
    long clusters = 1;
    size_t cluster_end = 1;
    for (size_t i = 1; i < hits.size(); ++i) {
        if (hits[i].t - hits[i - 1].t > 1e-7 * scale) {
            ++clusters;
        } else if (clusters == 1) {
            cluster_end = i + 1;
        }
    }
    if (clusters != 1) {
        bad_rays.push_back(ray_id);
        return RayHit{};
    }
    RayHit best = hits[0];
    double best_int = -1e300;
    for (size_t i = 0; i < cluster_end; ++i) {
        double interior = std::min({hits[i].u, hits[i].v, 1.0 - hits[i].u - hits[i].v});
        if (interior > best_int + 1e-15) {
            best_int = interior;
            best = hits[i];
        }
    }
    return best;
}

} // namespace cubedetail

// ---------------------------------------------------------------------------
// remesh_to_cubemap
// ---------------------------------------------------------------------------
inline CubeMap remesh_to_cubemap(const TriMesh& mesh, long R, Vec3 center) {
    if (R < 2) throw GeomError("remesh_to_cubemap: R must be >= 2");
    mesh.validate_basic();
    TriBVH bvh(mesh.vertices, mesh.faces);
    Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    for (const auto& p : mesh.vertices) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    double scale = (hi - lo).norm();

    CubeMap cm = CubeMap::empty(R);
    std::vector<long> bad;
    for (int f = 0; f < 6; ++f)
        for (long r = 0; r < R; ++r)
            for (long c = 0; c < R; ++c) {
                Vec3 d = cube_direction(f, r, c, R);
                long row = texel_row({f, r, c}, R);
                RayHit h = cubedetail::single_crossing(bvh, center, d, scale, row, bad);
                if (!bad.empty() && bad.back() == row) continue;
                cm.at(f, r, c) = center + d * h.t;
            }
    if (!bad.empty())
        throw StarShapeViolation("remesh_to_cubemap: " + std::to_string(bad.size()) +
                                     " rays with 0 or >=2 crossings (mesh not star-shaped w.r.t. center)",
                                 bad);
    return cm;
}

// Differentiable remesh: texel positions (6R^2 x 3) as a tape op over the
// source vertex tensor (V x 3) and the ray center (1 x 3). The intersected
// triangle per texel is treated as fixed; within a triangle the intersection
// point is an analytic function of (v0, v1, v2, center) and its adjoint is
// exact. Throws StarShapeViolation like the plain remesher.
inline Var raycast_remesh_op(Tape& tape, Var verts, const std::vector<std::array<long, 3>>& faces,
                             Var center, long R) {
    const Tensor& V = tape.val(verts);
    const Tensor& C0 = tape.val(center);
    if (V.cols() != 3 || C0.count() != 3) throw TensorError("raycast_remesh_op: bad input shapes");
    long nv = V.rows();
    std::vector<Vec3> vs(static_cast<size_t>(nv));
    for (long i = 0; i < nv; ++i)
        vs[static_cast<size_t>(i)] = {V.v[static_cast<size_t>(3 * i)], V.v[static_cast<size_t>(3 * i + 1)],
                                      V.v[static_cast<size_t>(3 * i + 2)]};
    Vec3 ctr{C0.v[0], C0.v[1], C0.v[2]};

    TriBVH bvh(vs, faces);
    Vec3 lo{1e300, 1e300, 1e300}, hi{-1e300, -1e300, -1e300};
    for (const auto& p : vs) {
        lo = {std::min(lo.x, p.x), std::min(lo.y, p.y), std::min(lo.z, p.z)};
        hi = {std::max(hi.x, p.x), std::max(hi.y, p.y), std::max(hi.z, p.z)};
    }
    double scale = (hi - lo).norm();

    long T = 6 * R * R;
    Tensor out = Tensor::zeros({T, 3});
    auto tri_of = std::make_shared<std::vector<long>>(static_cast<size_t>(T));
    auto dirs = std::make_shared<std::vector<Vec3>>(static_cast<size_t>(T));
    std::vector<long> bad;
    for (int f = 0; f < 6; ++f)
        for (long r = 0; r < R; ++r)
            for (long c = 0; c < R; ++c) {
                long row = texel_row({f, r, c}, R);
                Vec3 d = cube_direction(f, r, c, R);
                (*dirs)[static_cast<size_t>(row)] = d;
                RayHit h = cubedetail::single_crossing(bvh, ctr, d, scale, row, bad);
                if (!bad.empty() && bad.back() == row) continue;
                (*tri_of)[static_cast<size_t>(row)] = h.tri;
                Vec3 p = ctr + d * h.t;
                out.v[static_cast<size_t>(3 * row)] = p.x;
                out.v[static_cast<size_t>(3 * row + 1)] = p.y;
                out.v[static_cast<size_t>(3 * row + 2)] = p.z;
            }
    if (!bad.empty())
        throw StarShapeViolation("raycast_remesh_op: rays with 0 or >=2 crossings", bad);

    int vid = verts.id, cid = center.id;
    bool ng = tape.needs_grad(verts) || tape.needs_grad(center);
    auto faces_copy = std::make_shared<std::vector<std::array<long, 3>>>(faces);
    auto out_copy = std::make_shared<Tensor>(out);
    return tape.custom(
        std::move(out), ng,
        [vid, cid, tri_of, dirs, faces_copy, out_copy, T](Tape& t, const Tensor& g) {
            const Tensor& Vv = t.val(Var{vid});
            const Tensor& Cv = t.val(Var{cid});
            Vec3 ctr2{Cv.v[0], Cv.v[1], Cv.v[2]};
            Tensor gv = Tensor::zeros(Vv.shape);
            Tensor gc = Tensor::zeros(Cv.shape);
            auto vtx = [&](long i) {
                return Vec3{Vv.v[static_cast<size_t>(3 * i)], Vv.v[static_cast<size_t>(3 * i + 1)],
                            Vv.v[static_cast<size_t>(3 * i + 2)]};
            };
            auto addv = [&](Tensor& dst, long i, Vec3 x) {
                dst.v[static_cast<size_t>(3 * i)] += x.x;
                dst.v[static_cast<size_t>(3 * i + 1)] += x.y;
                dst.v[static_cast<size_t>(3 * i + 2)] += x.z;
            };
            for (long row = 0; row < T; ++row) {
                Vec3 gp{g.v[static_cast<size_t>(3 * row)], g.v[static_cast<size_t>(3 * row + 1)],
                        g.v[static_cast<size_t>(3 * row + 2)]};
                if (gp.x == 0 && gp.y == 0 && gp.z == 0) continue;
                const auto& tri = (*faces_copy)[static_cast<size_t>((*tri_of)[static_cast<size_t>(row)])];
                Vec3 v0 = vtx(tri[0]), v1 = vtx(tri[1]), v2 = vtx(tri[2]);
                Vec3 d = (*dirs)[static_cast<size_t>(row)];
                Vec3 p{out_copy->v[static_cast<size_t>(3 * row)], out_copy->v[static_cast<size_t>(3 * row + 1)],
                       out_copy->v[static_cast<size_t>(3 * row + 2)]};
                Vec3 e1 = v1 - v0, e2 = v2 - v0;
                Vec3 n = e1.cross(e2);
                double rden = d.dot(n);
                Vec3 w = v0 - p;
                double gt = gp.dot(d);
                // p = c + t d with t = ((v0 - c) . n) / (d . n)
                Vec3 dt_v1 = e2.cross(w) * (1.0 / rden);
                Vec3 dt_v2 = w.cross(e1) * (1.0 / rden);
                Vec3 dt_v0 = (n - e2.cross(w) - w.cross(e1)) * (1.0 / rden);
                Vec3 dt_c = n * (-1.0 / rden);
                addv(gv, tri[0], dt_v0 * gt);
                addv(gv, tri[1], dt_v1 * gt);
                addv(gv, tri[2], dt_v2 * gt);
                addv(gc, 0, gp + dt_c * gt);
            }
            t.accumulate(vid, gv);
            t.accumulate(cid, gc);
        },
        "raycast_remesh");
}

// ---------------------------------------------------------------------------
// Binary cube-map format: magic GCMAP1, u32 LE resolution, 6 faces in order
// +x,-x,+y,-y,+z,-z, row-major, 3 little-endian f64 per texel.
// ---------------------------------------------------------------------------
inline void save_gcmap(const CubeMap& cm, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw GeomError("save_gcmap: cannot open " + path);
    f.write("GCMAP1", 6);
    uint32_t r32 = static_cast<uint32_t>(cm.R);
    f.write(reinterpret_cast<const char*>(&r32), 4);
    for (const auto& face : cm.faces)
        f.write(reinterpret_cast<const char*>(face.data()),
                static_cast<std::streamsize>(face.size() * sizeof(Vec3)));
}

inline CubeMap load_gcmap(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw GeomError("load_gcmap: cannot open " + path);
    char magic[6];
    f.read(magic, 6);
    if (f.gcount() != 6 || std::string(magic, 6) != "GCMAP1")
        throw GeomError("load_gcmap: bad magic in " + path);
    uint32_t r32 = 0;
    f.read(reinterpret_cast<char*>(&r32), 4);
    CubeMap cm = CubeMap::empty(static_cast<long>(r32));
    for (auto& face : cm.faces) {
        f.read(reinterpret_cast<char*>(face.data()),
               static_cast<std::streamsize>(face.size() * sizeof(Vec3)));
        if (!f) throw GeomError("load_gcmap: truncated file " + path);
    }
    return cm;
}

} // namespace geoshape
