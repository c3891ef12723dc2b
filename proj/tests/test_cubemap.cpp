#include <catch2/catch_amalgamated.hpp>

#include <set>

#include "geoshape/cubemap.hpp"
#include "test_util.hpp"

using namespace geoshape;

// Cube map with texels on the analytic surface r(dir): star-shaped by
// construction for positive r.
template <class RadiusFn>
static CubeMap radial_cubemap(long R, RadiusFn radius) {
    CubeMap cm = CubeMap::empty(R);
    for (int f = 0; f < 6; ++f)
        for (long r = 0; r < R; ++r)
            for (long c = 0; c < R; ++c) {
                Vec3 d = cube_direction(f, r, c, R);
                cm.at(f, r, c) = d * radius(d);
            }
    return cm;
}

TEST_CASE("fold table: halo slots resolve to the geometrically matched texel") {
    // Independent characterization of a single fold: the halo slot at depth j
    // beyond the edge of face f keeps its along-edge coordinate and walks
    // 2j/(R-1) down the neighbor face from the shared edge.
    long R = 4;
    for (int f = 0; f < 6; ++f) {
        int axis, s_axis, t_axis;
        double sgn;
        cubedetail::face_axes(f, axis, sgn, s_axis, t_axis);
        for (long j = 1; j <= 2; ++j)
            for (long k = 0; k < R; ++k) {
                struct Case {
                    long r, c;
                    int over_axis;    // axis that exceeds +-1
                    double over_sign;
                    double along;     // preserved coordinate value
                    int along_axis;
                };
                double step = 2.0 / static_cast<double>(R - 1);
                std::vector<Case> cases = {
                    {k, R - 1 + j, s_axis, +1.0, cubedetail::grid_coord(k, R), t_axis},
                    {k, -j, s_axis, -1.0, cubedetail::grid_coord(k, R), t_axis},
                    {R - 1 + j, k, t_axis, +1.0, cubedetail::grid_coord(k, R), s_axis},
                    {-j, k, t_axis, -1.0, cubedetail::grid_coord(k, R), s_axis},
                };
                for (const auto& cs : cases) {
                    TexelRef got = cube_halo_source(f, cs.r, cs.c, R);
                    std::array<double, 3> q = cubedetail::face_plane_point(got.face, got.r, got.c, R);
                    double delta = step * static_cast<double>(j);
                    // expected: over_axis coordinate lands on +-1 (the neighbor
                    // face), the normal coordinate retreats by delta, the
                    // along-edge coordinate is unchanged.
                    CHECK(q[static_cast<size_t>(cs.over_axis)] == Catch::Approx(cs.over_sign).margin(1e-9));
                    CHECK(q[static_cast<size_t>(axis)] == Catch::Approx(sgn * (1.0 - delta)).margin(1e-9));
                    CHECK(q[static_cast<size_t>(cs.along_axis)] == Catch::Approx(cs.along).margin(1e-9));
                }
            }
    }
}

TEST_CASE("a single nonzero texel appears exactly once in the adjacent face's halo") {
    long R = 4, h = 1;
    // +y face (id 2) texel one row inward from its edge shared with +x (id 0)
    CubeField field = CubeField::constant(R, 1, 0.0);
    TexelRef marked{2, R - 2, 1};
    field.at(marked.face, marked.r, marked.c)[0] = 1.0;

    PaddedFaceGrid g = unfold_with_halo(field, 0, h);
    long P = g.P();
    std::vector<std::pair<long, long>> hits;
    for (long pr = 0; pr < P; ++pr)
        for (long pc = 0; pc < P; ++pc)
            if (g.at(pr, pc)[0] != 0.0) hits.push_back({pr, pc});
    REQUIRE(hits.size() == 1);
    TexelRef src = g.provenance[static_cast<size_t>(hits[0].first * P + hits[0].second)];
    CHECK(src.face == marked.face);
    CHECK(src.r == marked.r);
    CHECK(src.c == marked.c);
    // the slot is in the halo, not the interior
    bool in_halo = hits[0].first < h || hits[0].first >= P - h || hits[0].second < h ||
                   hits[0].second >= P - h;
    CHECK(in_halo);
}

TEST_CASE("unfold_with_halo: constant fields stay constant, positions are exact") {
    long R = 8;
    CubeField cf = CubeField::constant(R, 2, 3.5);
    for (int f = 0; f < 6; ++f) {
        PaddedFaceGrid g = unfold_with_halo(cf, f, 3);
        for (double x : g.values) CHECK(x == 3.5);
    }

    CubeMap sphere = unit_sphere_cubemap(R);
    CubeField pos = CubeField::positions_of(sphere);
    for (int f = 0; f < 6; ++f) {
        PaddedFaceGrid g = unfold_with_halo(pos, f, 2);
        long P = g.P();
        for (long pr = 0; pr < P; ++pr)
            for (long pc = 0; pc < P; ++pc) {
                bool corner_block = (pr < g.h || pr >= P - g.h) && (pc < g.h || pc >= P - g.h);
                if (corner_block) continue;  // replicated, not a true neighbor
                TexelRef src = g.provenance[static_cast<size_t>(pr * P + pc)];
                const Vec3& truth = sphere.at(src.face, src.r, src.c);
                const double* got = g.at(pr, pc);
                CHECK(got[0] == truth.x);
                CHECK(got[1] == truth.y);
                CHECK(got[2] == truth.z);
                // interior must be the face's own texels
                if (pr >= g.h && pr < P - g.h && pc >= g.h && pc < P - g.h) CHECK(src.face == f);
            }
    }
}

TEST_CASE("exactly 8 texels are shared by three faces") {
    for (long R : {2L, 4L, 9L}) {
        std::map<long, int> owners;  // canonical row -> number of faces containing it
        for (int f = 0; f < 6; ++f)
            for (long r = 0; r < R; ++r)
                for (long c = 0; c < R; ++c) {
                    TexelRef o = cube_owner_texel(f, r, c, R);
                    owners[texel_row(o, R)]++;
                }
        long triples = 0, doubles = 0, singles = 0;
        for (auto& [row, n] : owners) {
            if (n == 3) ++triples;
            else if (n == 2) ++doubles;
            else ++singles;
        }
        CHECK(triples == 8);
        CHECK(doubles == 12 * (R - 2));
        CHECK(static_cast<long>(owners.size()) == 6 * R * R - 12 * R + 8);
    }
}

TEST_CASE("remesh of an aligned sphere mesh puts every texel at radius 1") {
    long R = 16;
    long Rs = (R - 1) * 4 + 1;  // source grid contains all target directions
    TriMesh src = cubemap_to_trimesh(unit_sphere_cubemap(Rs));
    CubeMap cm = remesh_to_cubemap(src, R, {0, 0, 0});
    for (int f = 0; f < 6; ++f)
        for (long r = 0; r < R; ++r)
            for (long c = 0; c < R; ++c)
                CHECK(cm.at(f, r, c).norm() == Catch::Approx(1.0).margin(1e-6));
    CHECK(cm.stitching_error() <= 1e-9);
}

TEST_CASE("remesh of a generic icosphere-free sphere mesh is close to radius 1") {
    // unaligned source: target rays pass through triangle interiors, so the
    // chordal error of the source mesh bounds the radius error
    long Rs = 41, R = 16;  // (Rs-1)=40 not divisible by (R-1)=15
    TriMesh src = cubemap_to_trimesh(unit_sphere_cubemap(Rs));
    CubeMap cm = remesh_to_cubemap(src, R, {0, 0, 0});
    double spacing = 2.0 / static_cast<double>(Rs - 1);
    double sagitta = spacing * spacing / 4.0;  // loose chord bound on the unit sphere
    for (int f = 0; f < 6; ++f)
        for (long r = 0; r < R; ++r)
            for (long c = 0; c < R; ++c) {
                CHECK(cm.at(f, r, c).norm() <= 1.0 + 1e-12);
                CHECK(cm.at(f, r, c).norm() >= 1.0 - sagitta);
            }
}

TEST_CASE("remesh fixed point: cube surface maps to itself") {
    long Rs = 17, R = 9;  // (Rs-1) divisible by (R-1)
    CubeMap cube_src = radial_cubemap(Rs, [](Vec3 d) {
        double m = std::max({std::fabs(d.x), std::fabs(d.y), std::fabs(d.z)});
        return 1.0 / m;  // pushes the unit direction onto the cube surface
    });
    TriMesh src = cubemap_to_trimesh(cube_src);
    CubeMap cm = remesh_to_cubemap(src, R, {0, 0, 0});
    CHECK((cm.at(0, R / 2, R / 2) - Vec3{1, 0, 0}).norm() < 1e-9);
    CHECK((cm.at(3, R / 2, R / 2) - Vec3{0, -1, 0}).norm() < 1e-9);
}

TEST_CASE("remesh of the (2,1,1) ellipsoid matches analytic ray intersections") {
    long R = 32;
    long Rs = (R - 1) * 2 + 1;
    auto ell_radius = [](Vec3 d) {
        return 1.0 / std::sqrt(d.x * d.x / 4.0 + d.y * d.y + d.z * d.z);
    };
    TriMesh src = cubemap_to_trimesh(radial_cubemap(Rs, ell_radius));
    CubeMap cm = remesh_to_cubemap(src, R, {0, 0, 0});
    for (int f = 0; f < 6; ++f)
        for (long r = 0; r < R; ++r)
            for (long c = 0; c < R; ++c) {
                Vec3 p = cm.at(f, r, c);
                double implicit = p.x * p.x / 4.0 + p.y * p.y + p.z * p.z;
                CHECK(implicit == Catch::Approx(1.0).margin(1e-6));
                // independent oracle: quadratic ray-ellipsoid solve
                Vec3 d = cube_direction(f, r, c, R);
                Vec3 expect = d * ell_radius(d);
                CHECK((p - expect).norm() < 1e-6);
            }
}

TEST_CASE("remesh rejects non-star-shaped configurations") {
    TriMesh sphere = cubemap_to_trimesh(unit_sphere_cubemap(9));
    CHECK_THROWS_AS(remesh_to_cubemap(sphere, 8, Vec3{3, 0, 0}), StarShapeViolation);
    try {
        remesh_to_cubemap(sphere, 8, Vec3{3, 0, 0});
    } catch (const StarShapeViolation& e) {
        CHECK(!e.offending_rays.empty());
    }
}

TEST_CASE("cubemap_to_trimesh counts, Euler characteristic and orientation") {
    for (long R : {2L, 3L, 4L, 8L}) {
        CubeMap cm = unit_sphere_cubemap(R);
        TriMesh m = cubemap_to_trimesh(cm);
        CHECK(static_cast<long>(m.vertices.size()) == 6 * R * R - 12 * R + 8);
        CHECK(static_cast<long>(m.faces.size()) == 12 * (R - 1) * (R - 1));
        CHECK(m.euler_characteristic() == 2);
        CHECK(m.watertight());
        // outward orientation: positive enclosed volume
        double vol = 0;
        for (const auto& f : m.faces) {
            Vec3 a = m.vertices[static_cast<size_t>(f[0])];
            Vec3 b = m.vertices[static_cast<size_t>(f[1])];
            Vec3 c = m.vertices[static_cast<size_t>(f[2])];
            vol += a.dot(b.cross(c)) / 6.0;
        }
        CHECK(vol > 0);
    }
    CubeMap r2 = unit_sphere_cubemap(2);
    TriMesh m2 = cubemap_to_trimesh(r2);
    CHECK(m2.vertices.size() == 8);
    CHECK(m2.faces.size() == 12);
}

TEST_CASE("R=16 sphere cube map triangulates to nearly the sphere area") {
    TriMesh m = cubemap_to_trimesh(unit_sphere_cubemap(16));
    CHECK(std::fabs(m.total_area() - 4 * kPi) / (4 * kPi) < 0.02);
}

TEST_CASE("round trip: remesh(cubemap_to_trimesh(cm)) reproduces the texels") {
    long R = 12;
    CubeMap cm = radial_cubemap(R, [](Vec3 d) {
        return 1.0 + 0.18 * std::sin(3 * d.x) * std::cos(2 * d.y) + 0.1 * d.z * d.z;
    });
    TriMesh m = cubemap_to_trimesh(cm);
    CubeMap back = remesh_to_cubemap(m, R, {0, 0, 0});
    double worst = 0;
    for (int f = 0; f < 6; ++f)
        for (long r = 0; r < R; ++r)
            for (long c = 0; c < R; ++c)
                worst = std::max(worst, (back.at(f, r, c) - cm.at(f, r, c)).norm());
    CHECK(worst < 1e-6);
}

TEST_CASE("GCMAP1 file round-trip is bitwise exact and validates magic") {
    CubeMap cm = radial_cubemap(6, [](Vec3 d) { return 1.0 + 0.1 * d.x; });
    save_gcmap(cm, "/tmp/gs_test.gcmap");
    CubeMap cm2 = load_gcmap("/tmp/gs_test.gcmap");
    REQUIRE(cm2.R == cm.R);
    for (int f = 0; f < 6; ++f)
        for (long i = 0; i < cm.R * cm.R; ++i) {
            CHECK(cm.faces[static_cast<size_t>(f)][static_cast<size_t>(i)].x ==
                  cm2.faces[static_cast<size_t>(f)][static_cast<size_t>(i)].x);
            CHECK(cm.faces[static_cast<size_t>(f)][static_cast<size_t>(i)].y ==
                  cm2.faces[static_cast<size_t>(f)][static_cast<size_t>(i)].y);
            CHECK(cm.faces[static_cast<size_t>(f)][static_cast<size_t>(i)].z ==
                  cm2.faces[static_cast<size_t>(f)][static_cast<size_t>(i)].z);
        }
    std::ofstream bad("/tmp/gs_bad.gcmap", std::ios::binary);
    bad << "NOTMAGIC";
    bad.close();
    CHECK_THROWS_AS(load_gcmap("/tmp/gs_bad.gcmap"), GeomError);
}

TEST_CASE("differentiable remesh equals the plain remesher and passes FD checks") {
    long Rs = 9, R = 4;  // (Rs-1)=8 not divisible by (R-1)=3: generic hits
    CubeMap src_cm = radial_cubemap(Rs, [](Vec3 d) {
        return 1.0 + 0.15 * std::sin(2.1 * d.x + 0.3) * std::cos(1.7 * d.y) + 0.07 * d.z;
    });
    TriMesh src = cubemap_to_trimesh(src_cm);

    Tensor verts = Tensor::zeros({static_cast<long>(src.vertices.size()), 3});
    for (size_t i = 0; i < src.vertices.size(); ++i) {
        verts.v[3 * i] = src.vertices[i].x;
        verts.v[3 * i + 1] = src.vertices[i].y;
        verts.v[3 * i + 2] = src.vertices[i].z;
    }
    Tensor center({1, 3}, {0.01, -0.02, 0.015});

    {
        Tape t;
        Var v = t.leaf(verts, false), c = t.leaf(center, false);
        Tensor out = t.val(raycast_remesh_op(t, v, src.faces, c, R));
        CubeMap plain = remesh_to_cubemap(src, R, {0.01, -0.02, 0.015});
        Tensor ref = plain.positions_tensor();
        for (size_t i = 0; i < out.v.size(); ++i) CHECK(out.v[i] == ref.v[i]);
    }

    auto g = gstest::rng(41);
    Tensor probe = gstest::random_tensor({3, 1}, g);
    auto rep = gstest::fd_check(
        {verts, center},
        [&](Tape& t, const std::vector<Var>& v) {
            Var out = raycast_remesh_op(t, v[0], src.faces, v[1], R);
            return t.sum_all(t.matmul(out, t.leaf(probe, false)));
        },
        1e-6, 53);
    CHECK(rep.max_rel_err < 1e-4);
}
