// Naive per-vertex evaluation of the geodesic interpolation/convolution,
// written as direct loops over the geometry helpers. This is the independent
// oracle the structured (gather/kron/matmul) implementation is checked
// against; it shares no code with GeoConvContext or geo_conv.
#pragma once

#include <vector>

#include "geoshape/cubemap.hpp"
#include "geoshape/geom.hpp"

namespace naive {

using geoshape::Contour2D;
using geoshape::CubeField;
using geoshape::CubeMap;
using geoshape::PaddedFaceGrid;
using geoshape::PositionsGrid;
using geoshape::TexelRef;
using geoshape::Vec3;

struct Kernels {
    std::vector<double> ar, at, sr, st;  // K entries each
    long K() const { return static_cast<long>(ar.size()); }
};

inline double gauss_weight(const Kernels& k, long ki, double rho, double theta) {
    double dr = rho - k.ar[static_cast<size_t>(ki)];
    double dt = geoshape::wrap_angle_diff(theta - k.at[static_cast<size_t>(ki)]);
    return std::exp(-dr * dr / k.sr[static_cast<size_t>(ki)]) *
           std::exp(-dt * dt / k.st[static_cast<size_t>(ki)]);
}

// ---- contour ---------------------------------------------------------------
// (D_k f)^i over the 3-tap stencil {-d, 0, +d}; f is (N x C) row-major.
inline std::vector<double> contour_interp(const Contour2D& c, const std::vector<double>& f, long C,
                                          long d, const Kernels& k, long ki) {
    long n = static_cast<long>(c.size());
    std::vector<double> out(static_cast<size_t>(n * C), 0.0);
    for (long i = 0; i < n; ++i)
        for (long tap : {-d, 0L, d}) {
            geoshape::GeodesicCoord gc = geoshape::contour_geodesic_polar(c, i, tap);
            double w = gauss_weight(k, ki, gc.rho, gc.theta);
            long j = ((i + tap) % n + n) % n;
            for (long ch = 0; ch < C; ++ch)
                out[static_cast<size_t>(i * C + ch)] += f[static_cast<size_t>(j * C + ch)] * w;
        }
    return out;
}

// ---- cube map ----------------------------------------------------------------
// Naive interpolation over one whole cube map: for every texel, gather the
// 3x3 stencil (spaced by d) from the halo-padded grids, with the tangent
// frame taken in the lowest-face-id owner chart.
inline std::vector<double> cubemap_interp(const CubeMap& cm, const CubeField& f, long d,
                                          const Kernels& k, long ki) {
    long R = cm.R, C = f.C;
    long h = d + 1;  // stencil reach + frame neighbor
    CubeField posf = CubeField::positions_of(cm);
    std::array<PaddedFaceGrid, 6> ppos, pfeat;
    for (int face = 0; face < 6; ++face) {
        ppos[static_cast<size_t>(face)] = geoshape::unfold_with_halo(posf, face, h);
        pfeat[static_cast<size_t>(face)] = geoshape::unfold_with_halo(f, face, h);
    }
    auto pos_grid = [&](int face) {
        const PaddedFaceGrid& g = ppos[static_cast<size_t>(face)];
        static thread_local std::vector<Vec3> buf;
        buf.assign(static_cast<size_t>(g.P() * g.P()), Vec3{});
        for (long i = 0; i < g.P() * g.P(); ++i)
            buf[static_cast<size_t>(i)] = {g.values[static_cast<size_t>(3 * i)],
                                           g.values[static_cast<size_t>(3 * i + 1)],
                                           g.values[static_cast<size_t>(3 * i + 2)]};
        return buf;
    };

    std::vector<double> out(static_cast<size_t>(6 * R * R * C), 0.0);
    for (int face = 0; face < 6; ++face) {
        std::vector<Vec3> pg = pos_grid(face);
        PositionsGrid grid{pg.data(), R + 2 * h, R + 2 * h};
        for (long r = 0; r < R; ++r)
            for (long c = 0; c < R; ++c) {
                // tangent frame in the owner chart; cube corners (where the
                // +row/+col neighbors coincide on the surface) use inward
                // neighbors with the sign flipped
                TexelRef own = geoshape::cube_owner_texel(face, r, c, R);
                bool corner = (own.r == 0 || own.r == R - 1) && (own.c == 0 || own.c == R - 1);
                geoshape::TangentFrame frame;
                std::vector<Vec3> og;
                const PositionsGrid* fgrid = &grid;
                PositionsGrid ogrid{};
                if (!(own.face == face && own.r == r && own.c == c)) {
                    og = pos_grid(own.face);
                    ogrid = PositionsGrid{og.data(), R + 2 * h, R + 2 * h};
                    fgrid = &ogrid;
                }
                if (!corner) {
                    frame = geoshape::grid_tangent_frame(*fgrid, own.r + h, own.c + h);
                } else {
                    double sc = (own.c == R - 1) ? -1.0 : 1.0;
                    double sr = (own.r == R - 1) ? -1.0 : 1.0;
                    Vec3 p0 = fgrid->at(own.r + h, own.c + h);
                    Vec3 u_raw = (fgrid->at(own.r + h, own.c + h + static_cast<long>(sc)) - p0) * sc;
                    Vec3 v_raw = (fgrid->at(own.r + h + static_cast<long>(sr), own.c + h) - p0) * sr;
                    Vec3 nn = u_raw.cross(v_raw);
                    frame.u = u_raw.normalized();
                    frame.v = nn.cross(frame.u).normalized();
                }
                Vec3 pi = cm.at(face, r, c);
                for (long dr = -d; dr <= d; dr += d)
                    for (long dc = -d; dc <= d; dc += d) {
                        // neighbors across an irregular corner do not exist
                        bool r_out = (r + dr < 0 || r + dr >= R);
                        bool c_out = (c + dc < 0 || c + dc >= R);
                        if (r_out && c_out) continue;
                        double rho, theta;
                        if (dr == 0 && dc == 0) {
                            rho = 0.0;
                            theta = 0.0;
                        } else {
                            long pr = r + h + dr, pc = c + h + dc;
                            Vec3 pj{ppos[static_cast<size_t>(face)].at(pr, pc)[0],
                                    ppos[static_cast<size_t>(face)].at(pr, pc)[1],
                                    ppos[static_cast<size_t>(face)].at(pr, pc)[2]};
                            Vec3 delta = pj - pi;
                            rho = delta.norm();
                            theta = geoshape::wrap_angle_2pi(
                                std::atan2(delta.dot(frame.v), delta.dot(frame.u)));
                        }
                        double w = gauss_weight(k, ki, rho, theta);
                        const double* fj = pfeat[static_cast<size_t>(face)].at(r + h + dr, c + h + dc);
                        long row = geoshape::texel_row({face, r, c}, R);
                        for (long ch = 0; ch < C; ++ch)
                            out[static_cast<size_t>(row * C + ch)] += fj[ch] * w;
                    }
            }
    }
    return out;
}

// Full naive convolution: out = sum_k (D_k f) g_k + bias; g is K x Cin x Cout
// flattened as (k * Cin + ci) * Cout + co.
inline std::vector<double> conv_from_interp(const std::vector<std::vector<double>>& dk, long n, long cin,
                                            long cout, const std::vector<double>& g,
                                            const std::vector<double>& bias) {
    long K = static_cast<long>(dk.size());
    std::vector<double> out(static_cast<size_t>(n * cout), 0.0);
    for (long i = 0; i < n; ++i)
        for (long co = 0; co < cout; ++co) {
            double s = bias[static_cast<size_t>(co)];
            for (long k = 0; k < K; ++k)
                for (long ci = 0; ci < cin; ++ci)
                    s += dk[static_cast<size_t>(k)][static_cast<size_t>(i * cin + ci)] *
                         g[static_cast<size_t>((k * cin + ci) * cout + co)];
            out[static_cast<size_t>(i * cout + co)] = s;
        }
    return out;
}

} // namespace naive
