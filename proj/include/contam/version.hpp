#pragma once

#include <string_view>

#ifndef CONTAM_VERSION
#define CONTAM_VERSION "0.1.0"
#endif

namespace contam {

inline constexpr std::string_view kToolVersion = CONTAM_VERSION;

}  // namespace contam
