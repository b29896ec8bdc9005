#pragma once

namespace kqsd {

inline constexpr const char* engine_version = "0.1.0";

}
