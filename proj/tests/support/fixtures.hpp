#pragma once

#include "smat/model.hpp"
#include "smat/synthdata.hpp"

namespace smat::testing {

/// Smallest model the pipeline accepts: 32x32 search and template grids.
inline model::ModelConfig tiny_model() {
    model::ModelConfig c;
    c.search.area = {-1.6, -1.6, -3.0, 1.6, 1.6, 1.0};
    c.bev_channels = 4;
    c.backbone = backbone::desk_small(4);
    c.mae.width = 16;
    c.mae.heads = 2;
    c.mae.ffn_hidden = 16;
    c.dec.width = 16;
    c.dec.heads = 2;
    c.dec.ffn_hidden = 16;
    c.dec.k = 8;
    return c;
}

/// Short synthetic sequence whose target stays near the crop center.
inline Sequence tiny_sequence(std::uint64_t seed, int frames = 3, int points = 64) {
    synth::ScenarioConfig s;
    s.seed = seed;
    s.n_frames = frames;
    s.points_on_target = points;
    s.clutter_points = 40;
    s.clutter_area = {-1.6, -1.6, -1.0, 1.6, 1.6, 1.0};
    s.speed = 0.1;
    return synth::generate_sequence(s);
}

} // namespace smat::testing
