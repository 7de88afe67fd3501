#include "sama/rng.hpp"

#include <cmath>

namespace sama {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

Rng Rng::substream(std::uint64_t seed, std::uint64_t stream_id) {
    return Rng(mix64(mix64(seed) ^ stream_id));
}

double Rng::uniform() {
    // 53 random bits -> double in [0, 1).
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

std::int64_t Rng::uniform_int(std::int64_t n) {
    // Rejection sampling keeps the distribution exactly uniform.
    const std::uint64_t un = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    std::uint64_t v;
    do {
        v = gen_();
    } while (v >= limit);
    return static_cast<std::int64_t>(v % un);
}

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    double u1, u2;
    do {
        u1 = uniform();
    } while (u1 <= 0.0);
    u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

}  // namespace sama
