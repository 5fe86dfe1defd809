#include "han/rng.hpp"

#include <cmath>

namespace han {

double Rng::normal(double mean, double stddev) {
    if (have_cached_normal_) {
        have_cached_normal_ = false;
        return mean + stddev * cached_normal_;
    }
    // Box-Muller; u1 shifted away from zero so log() is safe
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    double radius = std::sqrt(-2.0 * std::log(u1));
    double angle = 2.0 * M_PI * u2;
    cached_normal_ = radius * std::sin(angle);
    have_cached_normal_ = true;
    return mean + stddev * radius * std::cos(angle);
}

}  // namespace han
