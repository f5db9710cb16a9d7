#include "htol/rng.hpp"

#include <cmath>

namespace htol::rng {

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Stream::Stream(std::uint64_t master, std::uint64_t path, std::uint64_t step, std::uint64_t component) {
    std::uint64_t h = mix64(master + 0x9e3779b97f4a7c15ULL);
    h = mix64(h ^ (path * 0xd1b54a32d192ed03ULL + 0x632be59bd9b4e019ULL));
    h = mix64(h ^ (step * 0xaef17502108ef2d9ULL + 0x8cb92ba72f3d8dd7ULL));
    h = mix64(h ^ (component * 0xf1357aea2e62a9c5ULL + 0x2545f4914f6cdd1dULL));
    state_ = h;
}

Stream::Stream(std::uint64_t seed) : state_(mix64(seed ^ 0x5851f42d4c957f2dULL)) {}

std::uint64_t Stream::next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix64(state_);
}

double Stream::uniform() {
    // 53 random bits, shifted by half an ulp so 0 is never returned
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double Stream::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
}

double Stream::exponential() { return -std::log(uniform()); }

}  // namespace htol::rng
