#pragma once

namespace ridecomfort {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace ridecomfort
