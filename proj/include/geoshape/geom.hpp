// Core geometric types: closed 2D contours, triangle meshes and the local
// geodesic polar coordinates (rho, theta) used by the interpolation kernels.
//
// rho/theta are computed in the locally unfolded patch: rho is the Euclidean
// distance between the 3D positions (exact on flat regions, second-order
// accurate at stencil scale elsewhere); theta is the angle of the offset in
// the tangent plane relative to a frame whose u-axis points to the next
// grid-column neighbor. On a 1D contour theta degenerates to {0, pi}.
#pragma once

#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "tensor.hpp"

namespace geoshape {

class GeomError : public std::runtime_error {
public:
    explicit GeomError(const std::string& m) : std::runtime_error(m) {}
};

struct Vec2 {
    double x = 0, y = 0;
    Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    double dot(Vec2 o) const { return x * o.x + y * o.y; }
    double cross(Vec2 o) const { return x * o.y - y * o.x; }
    double norm() const { return std::sqrt(x * x + y * y); }
};

struct Vec3 {
    double x = 0, y = 0, z = 0;
    Vec3 operator+(Vec3 o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(Vec3 o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(Vec3 o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(Vec3 o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(x * x + y * y + z * z); }
    Vec3 normalized() const {
        double n = norm();
        return {x / n, y / n, z / n};
    }
};

constexpr double kPi = 3.14159265358979323846;
constexpr double kTwoPi = 2.0 * kPi;

inline double wrap_angle_2pi(double a) {  // into [0, 2pi)
    a = std::fmod(a, kTwoPi);
    if (a < 0) a += kTwoPi;
    if (a == kTwoPi) a = 0.0;
    return a;
}

// Minimal-magnitude angular difference, result in (-pi, pi].
inline double wrap_angle_diff(double a) {
    a = std::fmod(a, kTwoPi);
    if (a > kPi) a -= kTwoPi;
    if (a <= -kPi) a += kTwoPi;
    return a;
}

struct GeodesicCoord {
    double rho = 0.0;    // >= 0
    double theta = 0.0;  // in [0, 2pi)
};

// ---------------------------------------------------------------------------
// Contour2D: simple closed polyline, normalized to counter-clockwise order.
// ---------------------------------------------------------------------------
struct Contour2D {
    std::vector<Vec2> points;
    bool closed = true;

    Contour2D() = default;
    explicit Contour2D(std::vector<Vec2> pts) : points(std::move(pts)) {
        if (points.size() < 8) throw GeomError("Contour2D: need at least 8 points");
        size_t n = points.size();
        for (size_t i = 0; i < n; ++i) {
            Vec2 d = points[(i + 1) % n] - points[i];
            if (d.norm() <= 1e-9) throw GeomError("Contour2D: consecutive points coincide");
        }
        if (signed_area_of(points) < 0) std::reverse(points.begin(), points.end());
    }

    size_t size() const { return points.size(); }

    static double signed_area_of(const std::vector<Vec2>& p) {
        double a = 0;
        size_t n = p.size();
        for (size_t i = 0; i < n; ++i) a += p[i].cross(p[(i + 1) % n]);
        return 0.5 * a;
    }
    double signed_area() const { return signed_area_of(points); }

    double perimeter() const {
        double s = 0;
        size_t n = points.size();
        for (size_t i = 0; i < n; ++i) s += (points[(i + 1) % n] - points[i]).norm();
        return s;
    }

    bool self_intersects() const { return polyline_self_intersects(points); }

    static bool polyline_self_intersects(const std::vector<Vec2>& p) {
        size_t n = p.size();
        auto seg_intersect = [](Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
            Vec2 r = b - a, s = d - c;
            double rxs = r.cross(s);
            Vec2 cma = c - a;
            if (std::fabs(rxs) < 1e-15) return false;  // parallel: treated as non-crossing
            double t = cma.cross(s) / rxs;
            double u = cma.cross(r) / rxs;
            const double e = 1e-12;
            return t > e && t < 1 - e && u > e && u < 1 - e;
        };
        for (size_t i = 0; i < n; ++i)
            for (size_t j = i + 1; j < n; ++j) {
                if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
                if (seg_intersect(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n])) return true;
            }
        return false;
    }
};

// Resample a simple closed polyline to exactly n points at uniform arc-length
// spacing, starting from the first input vertex.
inline Contour2D resample_contour(const std::vector<Vec2>& pts, long n) {
    if (n < 8) throw GeomError("resample_contour: N must be >= 8");
    if (pts.size() < 3) throw GeomError("resample_contour: need at least 3 input points");
    if (Contour2D::polyline_self_intersects(pts)) throw GeomError("resample_contour: input self-intersects");

    std::vector<Vec2> p = pts;
    if (Contour2D::signed_area_of(p) < 0) {
        // keep p[0] first so resampling a CW polygon is still anchored there
        std::reverse(p.begin() + 1, p.end());
    }
    size_t m = p.size();
    std::vector<double> cum(m + 1, 0.0);
    for (size_t i = 0; i < m; ++i) cum[i + 1] = cum[i] + (p[(i + 1) % m] - p[i]).norm();
    double total = cum[m];
    if (total <= 0) throw GeomError("resample_contour: degenerate input");

    std::vector<Vec2> out(static_cast<size_t>(n));
    size_t seg = 0;
    for (long k = 0; k < n; ++k) {
        double s = total * static_cast<double>(k) / static_cast<double>(n);
        while (seg + 1 < m && cum[seg + 1] <= s) ++seg;
        double t = (s - cum[seg]) / (cum[seg + 1] - cum[seg]);
        Vec2 a = p[seg], b = p[(seg + 1) % m];
        out[static_cast<size_t>(k)] = a + (b - a) * t;
    }
    return Contour2D(std::move(out));
}

// ---------------------------------------------------------------------------
// TriMesh
// ---------------------------------------------------------------------------
struct TriMesh {
    std::vector<Vec3> vertices;
    std::vector<std::array<long, 3>> faces;

    void validate_basic() const {
        for (const auto& f : faces) {
            for (long vi : f)
                if (vi < 0 || vi >= static_cast<long>(vertices.size()))
                    throw GeomError("TriMesh: face index out of range");
            Vec3 a = vertices[static_cast<size_t>(f[0])];
            Vec3 b = vertices[static_cast<size_t>(f[1])];
            Vec3 c = vertices[static_cast<size_t>(f[2])];
            if ((b - a).cross(c - a).norm() * 0.5 <= 1e-12) throw GeomError("TriMesh: degenerate face");
        }
    }

    long euler_characteristic() const {
        std::map<std::pair<long, long>, int> edges;
        for (const auto& f : faces)
            for (int e = 0; e < 3; ++e) {
                long a = f[static_cast<size_t>(e)], b = f[static_cast<size_t>((e + 1) % 3)];
                edges[{std::min(a, b), std::max(a, b)}]++;
            }
        return static_cast<long>(vertices.size()) - static_cast<long>(edges.size()) +
               static_cast<long>(faces.size());
    }

    bool watertight() const {
        std::map<std::pair<long, long>, int> edges;
        for (const auto& f : faces)
            for (int e = 0; e < 3; ++e) {
                long a = f[static_cast<size_t>(e)], b = f[static_cast<size_t>((e + 1) % 3)];
                edges[{std::min(a, b), std::max(a, b)}]++;
            }
        for (const auto& [k, c] : edges)
            if (c != 2) return false;
        return true;
    }

    double total_area() const {
        double s = 0;
        for (const auto& f : faces) {
            Vec3 a = vertices[static_cast<size_t>(f[0])];
            Vec3 b = vertices[static_cast<size_t>(f[1])];
            Vec3 c = vertices[static_cast<size_t>(f[2])];
            s += 0.5 * (b - a).cross(c - a).norm();
        }
        return s;
    }

    Vec3 centroid() const {
        Vec3 c{0, 0, 0};
        for (const auto& v : vertices) c = c + v;
        return c * (1.0 / static_cast<double>(vertices.size()));
    }
};

// ---------------------------------------------------------------------------
// Geodesic polar coordinates
// ---------------------------------------------------------------------------

// View over an H x W grid of 3D positions stored row-major.
struct PositionsGrid {
    const Vec3* data = nullptr;
    long h = 0, w = 0;
    const Vec3& at(long r, long c) const { return data[r * w + c]; }
};

// Tangent frame at grid vertex (r, c): u-axis toward the (r, c+1) neighbor,
// normal from u x v_raw with v_raw toward (r+1, c). Caller must guarantee the
// +1 neighbors exist (pass a padded grid for boundary vertices).
struct TangentFrame {
    Vec3 u, v;
};

inline TangentFrame grid_tangent_frame(const PositionsGrid& g, long r, long c) {
    if (r + 1 >= g.h || c + 1 >= g.w) throw GeomError("grid_tangent_frame: +1 neighbors out of range");
    Vec3 u_raw = g.at(r, c + 1) - g.at(r, c);
    Vec3 v_raw = g.at(r + 1, c) - g.at(r, c);
    Vec3 n = u_raw.cross(v_raw);
    Vec3 u = u_raw.normalized();
    Vec3 v = n.cross(u).normalized();
    return {u, v};
}

// rho/theta of grid vertex j = (rj, cj) relative to i = (ri, ci).
inline GeodesicCoord grid_geodesic_polar(const PositionsGrid& g, long ri, long ci, long rj, long cj) {
    if (ri == rj && ci == cj) return {0.0, 0.0};
    Vec3 d = g.at(rj, cj) - g.at(ri, ci);
    TangentFrame f = grid_tangent_frame(g, ri, ci);
    double rho = d.norm();
    double theta = wrap_angle_2pi(std::atan2(d.dot(f.v), d.dot(f.u)));
    return {rho, theta};
}

// rho/theta along a closed contour: rho is the arc length of the index walk
// from i to j (caller chooses direction via the sign of j - i, |j-i| small
// relative to n), theta is 0 forward and pi backward.
inline GeodesicCoord contour_geodesic_polar(const Contour2D& c, long i, long j_offset) {
    long n = static_cast<long>(c.size());
    if (j_offset == 0) return {0.0, 0.0};
    long step = j_offset > 0 ? 1 : -1;
    double rho = 0.0;
    long cur = i;
    for (long k = 0; k != j_offset; k += step) {
        long nxt = ((cur + step) % n + n) % n;
        rho += (c.points[static_cast<size_t>(nxt)] - c.points[static_cast<size_t>(cur)]).norm();
        cur = nxt;
    }
    return {rho, j_offset > 0 ? 0.0 : kPi};
}

// ---------------------------------------------------------------------------
// File formats: OBJ (triangles only) and contour CSV with header `x,y`.
// ---------------------------------------------------------------------------
inline void save_obj(const TriMesh& m, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw GeomError("save_obj: cannot open " + path);
    char buf[128];
    for (const auto& v : m.vertices) {
        std::snprintf(buf, sizeof buf, "v %.17g %.17g %.17g\n", v.x, v.y, v.z);
        f << buf;
    }
    for (const auto& t : m.faces) {
        std::snprintf(buf, sizeof buf, "f %ld %ld %ld\n", t[0] + 1, t[1] + 1, t[2] + 1);
        f << buf;
    }
}

inline TriMesh load_obj(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw GeomError("load_obj: cannot open " + path);
    TriMesh m;
    std::string line;
    while (std::getline(f, line)) {
        std::istringstream ss(line);
        std::string tag;
        ss >> tag;
        if (tag == "v") {
            Vec3 v;
            ss >> v.x >> v.y >> v.z;
            m.vertices.push_back(v);
        } else if (tag == "f") {
            std::array<long, 3> t{};
            for (int i = 0; i < 3; ++i) {
                std::string tok;
                ss >> tok;
                t[static_cast<size_t>(i)] = std::stol(tok.substr(0, tok.find('/'))) - 1;
            }
            std::string extra;
            if (ss >> extra) throw GeomError("load_obj: non-triangular face in " + path);
            m.faces.push_back(t);
        }
    }
    m.validate_basic();
    return m;
}

inline void save_contour_csv(const Contour2D& c, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw GeomError("save_contour_csv: cannot open " + path);
    f << "x,y\n";
    char buf[80];
    for (const auto& p : c.points) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", p.x, p.y);
        f << buf;
    }
}

inline Contour2D load_contour_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw GeomError("load_contour_csv: cannot open " + path);
    std::string line;
    if (!std::getline(f, line) || line.rfind("x,y", 0) != 0)
        throw GeomError("load_contour_csv: missing x,y header in " + path);
    std::vector<Vec2> pts;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        size_t comma = line.find(',');
        if (comma == std::string::npos) throw GeomError("load_contour_csv: bad row");
        pts.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
    }
    return Contour2D(std::move(pts));
}

} // namespace geoshape
