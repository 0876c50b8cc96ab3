#pragma once

// Slow reference implementations shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "smat/autograd.hpp"
#include "smat/geometry.hpp"
#include "smat/point_cloud.hpp"
#include "smat/random.hpp"
#include "smat/tensor.hpp"

namespace smat::oracle {

inline Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    const int n = q.rows(), m = k.rows(), d = q.cols(), dv = v.cols();
    Tensor out = Tensor::matrix(n, dv);
    for (int i = 0; i < n; ++i) {
        std::vector<double> s(static_cast<std::size_t>(m));
        double mx = -HUGE_VAL;
        for (int j = 0; j < m; ++j) {
            double dot = 0;
            for (int c = 0; c < d; ++c) dot += q.at(i, c) * k.at(j, c);
            s[static_cast<std::size_t>(j)] = dot / std::sqrt(static_cast<double>(d));
            mx = std::max(mx, s[static_cast<std::size_t>(j)]);
        }
        double z = 0;
        for (double& e : s) z += (e = std::exp(e - mx));
        for (int j = 0; j < m; ++j)
            for (int c = 0; c < dv; ++c) out.at(i, c) += s[static_cast<std::size_t>(j)] / z * v.at(j, c);
    }
    return out;
}

/// x * w + b with loops.
inline Tensor affine(const Tensor& x, const Tensor& w, const Tensor& b) {
    Tensor out = Tensor::matrix(x.rows(), w.cols());
    for (int r = 0; r < x.rows(); ++r)
        for (int o = 0; o < w.cols(); ++o) {
            double acc = b[static_cast<std::size_t>(o)];
            for (int i = 0; i < x.cols(); ++i) acc += x.at(r, i) * w.at(i, o);
            out.at(r, o) = acc;
        }
    return out;
}

inline Tensor columns(const Tensor& t, int start, int count) {
    Tensor out = Tensor::matrix(t.rows(), count);
    for (int r = 0; r < t.rows(); ++r)
        for (int c = 0; c < count; ++c) out.at(r, c) = t.at(r, start + c);
    return out;
}

inline Tensor mha(const ag::ParameterSet& ps, const std::string& name, const Tensor& q_in, const Tensor& k_in,
                  const Tensor& v_in, int heads) {
    auto proj = [&](const std::string& p, const Tensor& x) {
        return affine(x, ps.value(name + "." + p + ".w"), ps.value(name + "." + p + ".b"));
    };
    const Tensor q = proj("wq", q_in), k = proj("wk", k_in), v = proj("wv", v_in);
    const int dh = q.cols() / heads;
    Tensor cat = Tensor::matrix(q.rows(), q.cols());
    for (int h = 0; h < heads; ++h) {
        const Tensor o = attention(columns(q, h * dh, dh), columns(k, h * dh, dh), columns(v, h * dh, dh));
        for (int r = 0; r < o.rows(); ++r)
            for (int c = 0; c < dh; ++c) cat.at(r, h * dh + c) = o.at(r, c);
    }
    return proj("wo", cat);
}

inline Tensor ffn(const ag::ParameterSet& ps, const std::string& name, const Tensor& x) {
    Tensor h = affine(x, ps.value(name + ".fc1.w"), ps.value(name + ".fc1.b"));
    for (double& v : h.values()) v = std::max(0.0, v);
    return affine(h, ps.value(name + ".fc2.w"), ps.value(name + ".fc2.b"));
}

/// Monte-Carlo IoU: uniform samples in the joint axis-aligned bounding box.
inline double monte_carlo_iou(const Box3D& a, const Box3D& b, int samples, Rng& rng) {
    double x0 = HUGE_VAL, y0 = HUGE_VAL, x1 = -HUGE_VAL, y1 = -HUGE_VAL;
    for (const Box3D* box : {&a, &b})
        for (const Vec2& c : bev_corners(*box)) {
            x0 = std::min(x0, c.x);
            x1 = std::max(x1, c.x);
            y0 = std::min(y0, c.y);
            y1 = std::max(y1, c.y);
        }
    const double z0 = std::min(a.center().z - a.size().h / 2, b.center().z - b.size().h / 2);
    const double z1 = std::max(a.center().z + a.size().h / 2, b.center().z + b.size().h / 2);
    long long both = 0, either = 0;
    for (int i = 0; i < samples; ++i) {
        const Vec3 p{rng.uniform(x0, x1), rng.uniform(y0, y1), rng.uniform(z0, z1)};
        const bool ia = a.contains(p), ib = b.contains(p);
        both += ia && ib;
        either += ia || ib;
    }
    return either == 0 ? 0.0 : static_cast<double>(both) / static_cast<double>(either);
}

inline double success_loop(const std::vector<double>& ious) {
    long long hits = 0;
    for (int j = 0; j <= 20; ++j)
        for (std::size_t i = 0; i < ious.size(); ++i)
            if (ious[i] > j / 20.0) ++hits;
    return 100.0 * static_cast<double>(hits) / (21.0 * static_cast<double>(ious.size()));
}

inline double precision_loop(const std::vector<double>& dists) {
    long long hits = 0;
    for (int j = 0; j <= 20; ++j)
        for (std::size_t i = 0; i < dists.size(); ++i)
            if (dists[i] < 2.0 * (j / 20.0)) ++hits;
    return 100.0 * static_cast<double>(hits) / (21.0 * static_cast<double>(dists.size()));
}

/// Minimum total cost over all injective maps from the smaller side,
/// summed in row order.
inline double brute_force_assignment(const Tensor& cost) {
    const int n = cost.rows(), m = cost.cols();
    const bool rows_small = n <= m;
    const int small = rows_small ? n : m, large = rows_small ? m : n;
    if (small == 0) return 0.0;
    std::vector<int> perm(static_cast<std::size_t>(large));
    std::iota(perm.begin(), perm.end(), 0);
    double best = HUGE_VAL;
    std::vector<int> row_to_col(static_cast<std::size_t>(n));
    do {
        std::fill(row_to_col.begin(), row_to_col.end(), -1);
        for (int i = 0; i < small; ++i) {
            const int other = perm[static_cast<std::size_t>(i)];
            if (rows_small)
                row_to_col[static_cast<std::size_t>(i)] = other;
            else
                row_to_col[static_cast<std::size_t>(other)] = i;
        }
        double c = 0;
        for (int r = 0; r < n; ++r)
            if (row_to_col[static_cast<std::size_t>(r)] >= 0) c += cost.at(r, row_to_col[static_cast<std::size_t>(r)]);
        best = std::min(best, c);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return best;
}

/// Cells whose footprint [x0 + ix*cell, x0 + (ix+1)*cell) holds a point of the box.
inline int occupied_cells(const PointCloud& pc, const Box3D& box, double x0, double y0, double cell, int h, int w,
                          double tolerance) {
    int count = 0;
    for (int iy = 0; iy < h; ++iy)
        for (int ix = 0; ix < w; ++ix) {
            const double cx0 = x0 + ix * cell, cy0 = y0 + iy * cell;
            for (const Point& p : pc.points)
                if (p.x >= cx0 && p.x < cx0 + cell && p.y >= cy0 && p.y < cy0 + cell &&
                    box.contains(p.position(), tolerance)) {
                    ++count;
                    break;
                }
        }
    return count;
}

} // namespace smat::oracle
