#pragma once

#include <cstdint>

namespace htol::rng {

std::uint64_t mix64(std::uint64_t z);

// Counter-based stream. The state is derived from (master, path, step, component)
// so a draw never depends on how work was scheduled.
class Stream {
public:
    Stream(std::uint64_t master, std::uint64_t path, std::uint64_t step, std::uint64_t component);
    explicit Stream(std::uint64_t seed);

    std::uint64_t next_u64();
    // Uniform on the open interval (0,1).
    double uniform();
    double normal();
    double exponential();

private:
    std::uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Component ids used throughout; Lévy components are offset by their index.
inline constexpr std::uint64_t kBrownian = 0;
inline constexpr std::uint64_t kLevyBase = 16;

}  // namespace htol::rng
