#pragma once

#include "renorm/presets.hpp"

namespace sample {

using renorm::presets::monomial;
using renorm::presets::rotation;
using renorm::presets::zero;

inline renorm::IsotopyGenerator generator2() { return renorm::presets::sample(2); }
inline renorm::IsotopyGenerator generator3() { return renorm::presets::sample(3); }

}  // namespace sample
