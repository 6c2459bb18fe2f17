#include "adkit/types.hpp"

#include <algorithm>

namespace adkit {

double AnomalyMap::max_value() const {
    double m = 0.0;
    for (double x : v) m = std::max(m, x);
    return m;
}

bool BinaryMask::any() const {
    return std::any_of(v.begin(), v.end(), [](uint8_t x) { return x != 0; });
}

}  // namespace adkit
