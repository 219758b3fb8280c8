#pragma once

// Boost 1.74's pchip calls isnan unqualified; make it visible before the include.
#include <cmath>
using std::isnan;

#include <boost/math/interpolators/pchip.hpp>
