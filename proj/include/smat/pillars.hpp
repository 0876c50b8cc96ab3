#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "smat/layers.hpp"
#include "smat/point_cloud.hpp"

namespace smat::pillars {

/// Pillar grid over an area. The z extent is one cell, so every cell is a
/// full-height pillar.
struct PillarConfig {
    Area3 area{-3.2, -3.2, -3.0, 3.2, 3.2, 1.0};
    double dx = 0.1, dy = 0.1, dz = 4.0;
    int max_points_per_pillar = 32;
    int max_pillars = 4096;

    /// Grid rows (y cells).
    int grid_h() const;
    /// Grid columns (x cells).
    int grid_w() const;
    /// Throws std::invalid_argument when extents are not whole multiples of
    /// the pillar size or dz does not span the area height.
    void validate() const;
    nn::GridFrame frame() const { return {area.x_min, area.y_min, dx}; }
};

/// Car search-area preset: [-3.2, -3.2, -3, 3.2, 3.2, 1] m, 0.1 x 0.1 x 4 m pillars.
PillarConfig car_search_preset();

/// Decorated point features: x, y, z, intensity, offsets from the pillar
/// mean, offsets from the pillar cell center.
inline constexpr int kDecoratedDims = 10;

struct PillarTensor {
    int num_pillars = 0;
    int max_points = 0;
    int grid_h = 0;
    int grid_w = 0;
    /// (P, M, 10); rows past a pillar's point count are zero.
    Tensor features;
    /// (iy, ix) per pillar.
    std::vector<std::array<int, 2>> coords;
    /// P * M flags, true for real points.
    std::vector<std::uint8_t> mask;

    int point_count() const;
    int points_in(int pillar) const;
};

/// Points whose (x, y, z) lie inside the half-open area, order preserved.
PointCloud crop_points(const PointCloud& pc, const Area3& area);

/// Bins points into pillars. Overflow (points per pillar, pillar count) is
/// dropped by a seeded random choice. Points outside the area are ignored.
PillarTensor pillarize(const PointCloud& pc, const PillarConfig& cfg, std::uint64_t seed);

void init_pillar_net(nn::ParameterSet& ps, const std::string& name, int channels, Rng& rng);

/// Shared per-point affine map + ReLU, max over each pillar's points,
/// scattered onto the dense grid. Empty cells are zero.
nn::FeatureMap pillar_feature_net(nn::Graph& g, nn::ParameterSet& ps, const std::string& name,
                                  const PillarTensor& pt, const PillarConfig& cfg);

} // namespace smat::pillars
