#pragma once

#include "cascade/core.hpp"
#include "cascade/strategies.hpp"
#include "cascade/meanfield.hpp"
#include "cascade/graph.hpp"
#include "cascade/montecarlo.hpp"
#include "cascade/search.hpp"
#include "cascade/config.hpp"

namespace cascade {
inline constexpr const char* kVersion = "0.1.0";
}
