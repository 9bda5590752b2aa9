#pragma once

// Single include point for the vendored JSON library; ordered maps keep
// manifest keys in insertion order so reruns diff cleanly.

#include <json.hpp>

namespace xerm {
using ordered_json = nlohmann::ordered_json;
}
