#include "smat/pillars.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace smat::pillars {

namespace {

int whole_cells(double extent, double step, const char* axis) {
    if (!(extent > 0.0) || !(step > 0.0))
        throw std::invalid_argument(std::string("PillarConfig: non-positive extent or step on ") + axis);
    const double ratio = extent / step;
    const double rounded = std::round(ratio);
    if (std::fabs(ratio - rounded) > 1e-6 * std::max(1.0, rounded))
        throw std::invalid_argument(std::string("PillarConfig: extent is not a whole number of cells on ") + axis);
    return static_cast<int>(rounded);
}

// Picks `keep` of `n` indices uniformly (partial Fisher-Yates), returned sorted.
std::vector<int> choose_sorted(int n, int keep, Rng& rng) {
    std::vector<int> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < keep; ++i) {
        const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n - i)));
        std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    idx.resize(static_cast<std::size_t>(keep));
    std::sort(idx.begin(), idx.end());
    return idx;
}

} // namespace

int PillarConfig::grid_h() const { return whole_cells(area.size_y(), dy, "y"); }
int PillarConfig::grid_w() const { return whole_cells(area.size_x(), dx, "x"); }

void PillarConfig::validate() const {
    grid_h();
    grid_w();
    if (whole_cells(area.size_z(), dz, "z") != 1)
        throw std::invalid_argument("PillarConfig: dz must span the full z extent");
    if (max_points_per_pillar < 1 || max_pillars < 1)
        throw std::invalid_argument("PillarConfig: caps must be positive");
}

PillarConfig car_search_preset() { return PillarConfig{}; }

int PillarTensor::point_count() const {
    return static_cast<int>(std::count(mask.begin(), mask.end(), std::uint8_t{1}));
}

int PillarTensor::points_in(int pillar) const {
    const auto begin = mask.begin() + static_cast<std::ptrdiff_t>(pillar) * max_points;
    return static_cast<int>(std::count(begin, begin + max_points, std::uint8_t{1}));
}

PointCloud crop_points(const PointCloud& pc, const Area3& area) {
    PointCloud out;
    for (const Point& p : pc.points)
        if (area.contains(p.x, p.y, p.z)) out.points.push_back(p);
    return out;
}

PillarTensor pillarize(const PointCloud& pc, const PillarConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    const int gh = cfg.grid_h(), gw = cfg.grid_w();
    const int m = cfg.max_points_per_pillar;

    std::vector<std::vector<int>> buckets(static_cast<std::size_t>(gh) * gw);
    for (std::size_t i = 0; i < pc.points.size(); ++i) {
        const Point& p = pc.points[i];
        if (!cfg.area.contains(p.x, p.y, p.z)) continue;
        const int ix = std::clamp(static_cast<int>(std::floor((p.x - cfg.area.x_min) / cfg.dx)), 0, gw - 1);
        const int iy = std::clamp(static_cast<int>(std::floor((p.y - cfg.area.y_min) / cfg.dy)), 0, gh - 1);
        buckets[static_cast<std::size_t>(iy) * gw + ix].push_back(static_cast<int>(i));
    }
    std::vector<int> occupied;
    for (std::size_t c = 0; c < buckets.size(); ++c)
        if (!buckets[c].empty()) occupied.push_back(static_cast<int>(c));

    Rng rng(seed);
    if (static_cast<int>(occupied.size()) > cfg.max_pillars) {
        std::vector<int> keep = choose_sorted(static_cast<int>(occupied.size()), cfg.max_pillars, rng);
        std::vector<int> kept;
        kept.reserve(keep.size());
        for (int k : keep) kept.push_back(occupied[static_cast<std::size_t>(k)]);
        occupied.swap(kept);
    }

    PillarTensor pt;
    pt.num_pillars = static_cast<int>(occupied.size());
    pt.max_points = m;
    pt.grid_h = gh;
    pt.grid_w = gw;
    pt.features = Tensor({pt.num_pillars, m, kDecoratedDims}, 0.0);
    pt.mask.assign(static_cast<std::size_t>(pt.num_pillars) * m, 0);
    pt.coords.reserve(occupied.size());

    const double zc = 0.5 * (cfg.area.z_min + cfg.area.z_max);
    for (int p = 0; p < pt.num_pillars; ++p) {
        const int cell = occupied[static_cast<std::size_t>(p)];
        const int iy = cell / gw, ix = cell % gw;
        pt.coords.push_back({iy, ix});
        std::vector<int> members = buckets[static_cast<std::size_t>(cell)];
        if (static_cast<int>(members.size()) > m) {
            std::vector<int> keep = choose_sorted(static_cast<int>(members.size()), m, rng);
            std::vector<int> kept;
            for (int k : keep) kept.push_back(members[static_cast<std::size_t>(k)]);
            members.swap(kept);
        }
        double mx = 0.0, my = 0.0, mz = 0.0;
        for (int i : members) {
            const Point& q = pc.points[static_cast<std::size_t>(i)];
            mx += q.x;
            my += q.y;
            mz += q.z;
        }
        const double n = static_cast<double>(members.size());
        mx /= n;
        my /= n;
        mz /= n;
        const double xc = cfg.area.x_min + (ix + 0.5) * cfg.dx;
        const double yc = cfg.area.y_min + (iy + 0.5) * cfg.dy;
        for (std::size_t j = 0; j < members.size(); ++j) {
            const Point& q = pc.points[static_cast<std::size_t>(members[j])];
            double* f = pt.features.data() + (static_cast<std::size_t>(p) * m + j) * kDecoratedDims;
            f[0] = q.x;
            f[1] = q.y;
            f[2] = q.z;
            f[3] = q.intensity;
            f[4] = q.x - mx;
            f[5] = q.y - my;
            f[6] = q.z - mz;
            f[7] = q.x - xc;
            f[8] = q.y - yc;
            f[9] = q.z - zc;
            pt.mask[static_cast<std::size_t>(p) * m + j] = 1;
        }
    }
    return pt;
}

void init_pillar_net(nn::ParameterSet& ps, const std::string& name, int channels, Rng& rng) {
    nn::init_linear(ps, name + ".point", kDecoratedDims, channels, rng);
}

nn::FeatureMap pillar_feature_net(nn::Graph& g, nn::ParameterSet& ps, const std::string& name,
                                  const PillarTensor& pt, const PillarConfig& cfg) {
    const int n = pt.point_count();
    Tensor rows = Tensor::matrix(n, kDecoratedDims);
    std::vector<int> cell;
    cell.reserve(static_cast<std::size_t>(n));
    int r = 0;
    for (int p = 0; p < pt.num_pillars; ++p)
        for (int j = 0; j < pt.max_points; ++j) {
            if (!pt.mask[static_cast<std::size_t>(p) * pt.max_points + j]) continue;
            const double* f = pt.features.data() + (static_cast<std::size_t>(p) * pt.max_points + j) * kDecoratedDims;
            std::copy(f, f + kDecoratedDims, rows.data() + static_cast<std::size_t>(r) * kDecoratedDims);
            cell.push_back(pt.coords[static_cast<std::size_t>(p)][0] * pt.grid_w + pt.coords[static_cast<std::size_t>(p)][1]);
            ++r;
        }
    nn::Var x = nn::linear(g, ps, name + ".point", g.constant(std::move(rows)));
    nn::FeatureMap out;
    out.tokens = ag::scatter_max(ag::relu(x), cell, pt.grid_h * pt.grid_w);
    out.height = pt.grid_h;
    out.width = pt.grid_w;
    out.stride = 1;
    out.frame = cfg.frame();
    return out;
}

} // namespace smat::pillars
