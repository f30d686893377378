#pragma once

namespace zoomin {

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace zoomin
