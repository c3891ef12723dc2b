#include <catch2/catch_amalgamated.hpp>

#include "geoshape/dataset.hpp"
#include "geoshape/oracle.hpp"
#include "test_util.hpp"

using namespace geoshape;

TEST_CASE("panel influence integrals match numeric quadrature of point kernels") {
    // independent oracle: integrate the point-source / point-vortex fields
    // along the panel with fine midpoint quadrature
    Vec2 a{0.2, -0.1};
    Vec2 b{0.9, 0.4};
    Vec2 e = b - a;
    double s = e.norm();
    Vec2 t = e * (1.0 / s);
    Vec2 nc{t.y, -t.x};
    for (Vec2 p : {Vec2{0.5, 0.8}, Vec2{-0.4, 0.2}, Vec2{1.4, -0.6}, Vec2{0.6, 0.12}}) {
        auto inf = oracledetail::panel_influence(p, a, t, nc, s, false);
        const int nq = 200000;
        Vec2 num_src{0, 0}, num_vtx{0, 0};
        for (int k = 0; k < nq; ++k) {
            double sq = s * (k + 0.5) / nq;
            Vec2 q = a + t * sq;
            Vec2 d = p - q;
            double r2 = d.dot(d);
            num_src = num_src + d * (s / nq / (kTwoPi * r2));
            num_vtx = num_vtx + Vec2{-d.y, d.x} * (s / nq / (kTwoPi * r2));
        }
        CHECK(inf.source.x == Catch::Approx(num_src.x).margin(1e-6));
        CHECK(inf.source.y == Catch::Approx(num_src.y).margin(1e-6));
        CHECK(inf.vortex.x == Catch::Approx(num_vtx.x).margin(1e-6));
        CHECK(inf.vortex.y == Catch::Approx(num_vtx.y).margin(1e-6));
    }
}

TEST_CASE("symmetric foil at zero incidence produces zero lift") {
    Contour2D c = naca_shape(Naca3Params{0.12, 0.0, 0.4}, 128);
    FlowConditions fc;
    fc.alpha = 0.0;
    SimRecord rec = panel_solve_2d(c, fc);
    CHECK(std::fabs(rec.lift) <= 1e-6);
}

TEST_CASE("thin symmetric foil lift slope is close to 2*pi") {
    Contour2D c = naca_shape(Naca3Params{0.06, 0.0, 0.4}, 200);
    FlowConditions fc;
    fc.alpha = 2.0 * kPi / 180.0;
    SimRecord rec = panel_solve_2d(c, fc);
    double theory = kTwoPi * fc.alpha;  // 0.21932...
    CHECK(std::fabs(rec.lift - theory) / theory < 0.10);
}

TEST_CASE("stagnation pressure reaches the Bernoulli value") {
    for (double alpha : {0.0, 3.0 * kPi / 180.0}) {
        Contour2D c = naca_shape(Naca3Params{0.15, 0.02, 0.45}, 200);
        FlowConditions fc;
        fc.alpha = alpha;
        SimRecord rec = panel_solve_2d(c, fc);
        double cp_max = *std::max_element(rec.Y.begin(), rec.Y.end());
        CHECK(cp_max == Catch::Approx(1.0).margin(0.02));
        CHECK(cp_max <= 1.0 + 1e-9);
    }
}

TEST_CASE("stored lift is the integral of the stored pressure field") {
    Contour2D c = naca_shape(Naca3Params{0.1, 0.04, 0.4}, 96);
    FlowConditions fc;
    fc.alpha = 0.05;
    SimRecord rec = panel_solve_2d(c, fc);
    CHECK(std::fabs(rec.lift - integrate_lift(rec.Y, rec.contour(), fc.alpha)) < 1e-9);
    CHECK(rec.Y.size() == rec.contour().size());
    for (double y : rec.Y) CHECK(std::isfinite(y));
    CHECK(rec.Z > 0);
}

TEST_CASE("panel results are invariant to cyclic node relabeling") {
    Contour2D c = naca_shape(Naca3Params{0.12, 0.03, 0.35}, 96);
    FlowConditions fc;
    fc.alpha = 0.04;
    SimRecord base = panel_solve_2d(c, fc);
    for (size_t shift : {7UL, 41UL}) {
        std::vector<Vec2> rot(c.points.size());
        for (size_t i = 0; i < c.points.size(); ++i) rot[i] = c.points[(i + shift) % c.points.size()];
        SimRecord moved = panel_solve_2d(Contour2D(rot), fc);
        CHECK(std::fabs(moved.lift - base.lift) < 1e-9);
        CHECK(std::fabs(moved.Z - base.Z) < 1e-9);
        for (size_t i = 0; i < c.points.size(); ++i)
            CHECK(std::fabs(moved.Y[i] - base.Y[(i + shift) % c.points.size()]) < 1e-9);
    }
}

TEST_CASE("uniform pressure integrates to zero lift on a closed contour") {
    Contour2D c = naca_shape(Naca3Params{0.12, 0.02, 0.4}, 64);
    std::vector<double> uniform(c.size(), 0.7);
    CHECK(std::fabs(integrate_lift(uniform, c, 0.3)) < 1e-12);
}

// --- Newtonian 3D ---------------------------------------------------------

static TriMesh plate_mesh() {
    // unit square with face normals +x
    TriMesh m;
    m.vertices = {{0, 0, 0}, {0, 1, 0}, {0, 1, 1}, {0, 0, 1}};
    m.faces = {{0, 1, 2}, {0, 2, 3}};
    return m;
}

TEST_CASE("newtonian plate facing the reference direction has C_p = 2, C_D = 2") {
    TriMesh m = plate_mesh();
    FlowConditions fc;
    fc.v_hat = {1, 0, 0};
    SimRecord rec = newtonian_drag_3d(m, fc);
    CHECK(rec.Z == Catch::Approx(2.0).margin(1e-12));
    for (double y : rec.Y) CHECK(y == Catch::Approx(2.0).margin(1e-12));
}

TEST_CASE("newtonian plate edge-on to the flow carries no load") {
    TriMesh m = plate_mesh();
    FlowConditions fc;
    fc.v_hat = {0, 0, 1};  // orthogonal to the +x face normal
    SimRecord rec = newtonian_drag_3d(m, fc);
    CHECK(rec.Z == 0.0);
    for (double y : rec.Y) CHECK(y == 0.0);
}

TEST_CASE("newtonian sphere drag approaches 1 at fine resolution") {
    CubeMap cm = unit_sphere_cubemap(64);
    FlowConditions fc;
    fc.v_hat = {1, 0, 0};
    SimRecord rec = newtonian_drag_3d(cm, fc);
    CHECK(rec.Z == Catch::Approx(1.0).margin(0.02));
    CHECK(rec.Y.size() == static_cast<size_t>(cm.texel_count()));
}

TEST_CASE("newtonian drag is invariant to joint rotation and uniform scaling") {
    CubeMap cm = unit_sphere_cubemap(16);
    Deform21Params stretch = Deform21Params::identity();
    stretch.c[1] = 1.4;
    stretch.c[16] = 0.12;  // mild z taper
    CubeMap body = deform_21(stretch, cm);
    TriMesh m = cubemap_to_trimesh(body);
    FlowConditions fc;
    fc.v_hat = Vec3{0.6, 0.64, 0.48}.normalized();
    double z0 = newtonian_drag_3d(m, fc).Z;

    double ang = 0.7;
    auto rotz = [&](Vec3 p) {
        return Vec3{p.x * std::cos(ang) - p.y * std::sin(ang), p.x * std::sin(ang) + p.y * std::cos(ang),
                    p.z};
    };
    TriMesh mr = m;
    for (auto& v : mr.vertices) v = rotz(v);
    FlowConditions fcr;
    fcr.v_hat = rotz(fc.v_hat).normalized();
    CHECK(std::fabs(newtonian_drag_3d(mr, fcr).Z - z0) < 1e-10);

    TriMesh ms = m;
    for (auto& v : ms.vertices) v = v * 3.7;
    CHECK(std::fabs(newtonian_drag_3d(ms, fc).Z - z0) < 1e-10);
}

TEST_CASE("prolate ellipsoid aligned with the flow has lower drag than the sphere") {
    CubeMap cm = unit_sphere_cubemap(32);
    FlowConditions fc;
    fc.v_hat = {1, 0, 0};
    double sphere_cd = newtonian_drag_3d(cm, fc).Z;
    Deform21Params prolate = Deform21Params::identity();
    prolate.c[1] = 2.0;  // elongate along the flow
    double prolate_cd = newtonian_drag_3d(deform_21(prolate, cm), fc).Z;
    CHECK(prolate_cd < sphere_cd);
}

// --- generators -------------------------------------------------------------

TEST_CASE("random_airfoil with zero noise reproduces the exact NACA shape") {
    NacaBox box;
    NoiseConfig noise;
    noise.amplitude = 0.0;
    auto [cont, params] = random_airfoil(77, 64, box, noise);
    REQUIRE(params.family == "naca3");
    Naca3Params prm{params.values[0], params.values[1], params.values[2]};
    Contour2D direct = naca_shape(prm, 64);
    for (size_t i = 0; i < cont.size(); ++i) CHECK((cont.points[i] - direct.points[i]).norm() == 0.0);
}

TEST_CASE("generators are bitwise deterministic in their seeds") {
    NacaBox box;
    NoiseConfig noise;
    auto a = random_airfoil(1234, 64, box, noise);
    auto b = random_airfoil(1234, 64, box, noise);
    REQUIRE(a.first.size() == b.first.size());
    for (size_t i = 0; i < a.first.size(); ++i)
        CHECK((a.first.points[i] - b.first.points[i]).norm() == 0.0);

    auto c = random_shape_3d(99, 0.3, 8);
    auto d = random_shape_3d(99, 0.3, 8);
    for (int f = 0; f < 6; ++f)
        for (long i = 0; i < 64; ++i)
            CHECK((c.first.faces[static_cast<size_t>(f)][static_cast<size_t>(i)] -
                   d.first.faces[static_cast<size_t>(f)][static_cast<size_t>(i)])
                      .norm() == 0.0);
    for (size_t k = 0; k < 21; ++k) CHECK(c.second.values[k] == d.second.values[k]);
}

TEST_CASE("1000 airfoil draws stay simple with positive thickness") {
    NacaBox box;
    NoiseConfig noise;
    long n = 64;
    for (uint64_t seed = 0; seed < 1000; ++seed) {
        auto [cont, params] = random_airfoil(seed, n, box, noise);
        CHECK(!cont.self_intersects());
        for (long k = 1; k < n / 2; ++k) {
            Vec2 up = cont.points[static_cast<size_t>(k)];
            Vec2 lo = cont.points[static_cast<size_t>(n - k)];
            CHECK((up - lo).norm() > 0);
        }
    }
}

TEST_CASE("200 random 3D draws at amplitude 0.3 all canonicalize star-shaped") {
    for (uint64_t seed = 0; seed < 200; ++seed) {
        auto [cm, params] = random_shape_3d(seed, 0.3, 8);
        CHECK(cm.stitching_error() <= 1e-9);
        CHECK(params.values.size() == 21);
    }
}

TEST_CASE("amplitude -> 0 limit of random_shape_3d approaches the unit sphere") {
    auto [cm, params] = random_shape_3d(5, 1e-6, 8);
    for (int f = 0; f < 6; ++f)
        for (long i = 0; i < 64; ++i)
            CHECK(cm.faces[static_cast<size_t>(f)][static_cast<size_t>(i)].norm() ==
                  Catch::Approx(1.0).margin(1e-4));
}

// --- dataset round trip -------------------------------------------------------

TEST_CASE("dataset JSONL round-trips records with inline and sidecar shapes") {
    std::vector<SimRecord> recs;
    FlowConditions fc2d;
    fc2d.alpha = 0.05;
    recs.push_back(panel_solve_2d(naca_shape(Naca3Params{0.1, 0.02, 0.4}, 64), fc2d));
    recs.back().seed = 42;
    recs.back().params = {"naca3", {0.1, 0.02, 0.4}};
    FlowConditions fc3d;
    recs.push_back(newtonian_drag_3d(unit_sphere_cubemap(8), fc3d));
    recs.back().seed = 43;
    recs.back().params = {"deform21", Deform21Params::identity().as_vector()};

    std::filesystem::remove_all("/tmp/gs_dataset");
    save_dataset(recs, "/tmp/gs_dataset/data.jsonl");
    auto loaded = load_dataset("/tmp/gs_dataset/data.jsonl");
    REQUIRE(loaded.size() == 2);
    CHECK(loaded[0].is_contour());
    CHECK(loaded[0].Z == recs[0].Z);
    CHECK(loaded[0].lift == recs[0].lift);
    CHECK(loaded[0].Y == recs[0].Y);
    CHECK(loaded[0].cf == recs[0].cf);
    CHECK(loaded[0].seed == 42);
    for (size_t i = 0; i < loaded[0].contour().size(); ++i)
        CHECK((loaded[0].contour().points[i] - recs[0].contour().points[i]).norm() == 0.0);
    CHECK(!loaded[1].is_contour());
    CHECK(loaded[1].cubemap().R == 8);
    for (long i = 0; i < 64; ++i)
        CHECK((loaded[1].cubemap().faces[2][static_cast<size_t>(i)] -
               recs[1].cubemap().faces[2][static_cast<size_t>(i)])
                  .norm() == 0.0);
    // cube maps always go to a sidecar
    CHECK(std::filesystem::exists("/tmp/gs_dataset/shapes/rec_000001.gcmap"));
}

TEST_CASE("dataset loader rejects unknown schema versions") {
    std::filesystem::create_directories("/tmp/gs_dataset2");
    std::ofstream f("/tmp/gs_dataset2/bad.jsonl");
    f << R"({"schema_version": 999, "kind": "contour"})" << "\n";
    f.close();
    CHECK_THROWS_AS(load_dataset("/tmp/gs_dataset2/bad.jsonl"), DatasetError);
}
