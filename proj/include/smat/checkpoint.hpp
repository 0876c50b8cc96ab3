#pragma once

#include <cstdint>
#include <string>

#include "smat/autograd.hpp"
#include "smat/training.hpp"

namespace smat::checkpoint {

/// Parameters, optimizer moments, step counter and the resolved config.
struct Checkpoint {
    std::string config_text;
    std::uint64_t config_hash = 0;
    std::uint64_t model_hash = 0;
    long long step = 0;
    ag::ParameterSet params;
    ag::ParameterSet adam_m;
    ag::ParameterSet adam_v;
};

/// Throws io::DataError on I/O failure or a malformed file.
void save(const std::string& path, const Checkpoint& ckpt);
Checkpoint load(const std::string& path);

} // namespace smat::checkpoint
