#pragma once

#include <string_view>

namespace chaingen::embedded {

/// Text of a bundled data file by stem ("s1_situational_awareness",
/// "generation_quality", ...); empty when unknown.
std::string_view text(std::string_view name);

}  // namespace chaingen::embedded
