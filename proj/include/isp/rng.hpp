#pragma once

#include <cstdint>
#include <random>

namespace isp {

/// Seeded stream of i.i.d. uniform draws on [-1, 1].
///
/// Uses the standardized mt19937_64 sequence with an explicit bit-to-double
/// mapping, so identical seeds give identical draws on every platform.
class UniformPm1 {
public:
    explicit UniformPm1(std::uint64_t seed) : gen_(seed) {}

    double next() {
        // 53 random bits -> [0,1) -> [-1,1)
        const std::uint64_t bits = gen_() >> 11;
        return 2.0 * (static_cast<double>(bits) * (1.0 / 9007199254740992.0)) - 1.0;
    }

private:
    std::mt19937_64 gen_;
};

} // namespace isp
