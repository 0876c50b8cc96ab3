#pragma once

#include <string>
#include <vector>

#include "smat/geometry.hpp"
#include "smat/point_cloud.hpp"

namespace smat {

struct Frame {
    PointCloud cloud;
    Box3D gt;
};

/// Ordered frames of one tracked object.
struct Sequence {
    std::string id;
    std::string category = "Car";
    std::vector<Frame> frames;

    int size() const { return static_cast<int>(frames.size()); }
};

} // namespace smat
