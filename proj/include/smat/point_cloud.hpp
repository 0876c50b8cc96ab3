#pragma once

#include <cstddef>
#include <vector>

#include "smat/geometry.hpp"

namespace smat {

struct Point {
    double x = 0.0, y = 0.0, z = 0.0;
    double intensity = 0.0;

    Vec3 position() const { return {x, y, z}; }
};

/// One frame (or crop) of lidar returns. Empty clouds are legal.
struct PointCloud {
    std::vector<Point> points;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

/// Axis-aligned region, half-open on every axis: [min, max).
struct Area3 {
    double x_min = 0.0, y_min = 0.0, z_min = 0.0;
    double x_max = 0.0, y_max = 0.0, z_max = 0.0;

    bool contains(double x, double y, double z) const {
        return x >= x_min && x < x_max && y >= y_min && y < y_max && z >= z_min && z < z_max;
    }
    double size_x() const { return x_max - x_min; }
    double size_y() const { return y_max - y_min; }
    double size_z() const { return z_max - z_min; }
};

} // namespace smat
