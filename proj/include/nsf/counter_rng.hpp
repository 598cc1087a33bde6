#pragma once
// Counter-based normal variates. Every draw is a pure function of
// (seed, stream tag, step, mode, path), so ensembles reproduce bit for bit no
// matter how paths are scheduled across threads.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace nsf {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
inline std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr, std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int r = 0; r < 10; ++r) {
        const std::uint64_t p0 = std::uint64_t(M0) * ctr[0];
        const std::uint64_t p1 = std::uint64_t(M1) * ctr[2];
        ctr = {std::uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], std::uint32_t(p1), std::uint32_t(p0 >> 32) ^ ctr[3] ^ key[1],
               std::uint32_t(p0)};
        key[0] += W0;
        key[1] += W1;
    }
    return ctr;
}

enum class Stream : std::uint64_t {
    wiener = 0x57494E4552ULL,
    initial_law = 0x494E4954ULL,
    test = 0x54455354ULL,
};

/// One standard normal for the key (seed, stream, step, mode, path).
inline double counter_normal(std::uint64_t seed, Stream stream, std::uint64_t step, std::uint32_t mode,
                             std::uint32_t path) {
    const std::uint64_t k = splitmix64(seed ^ static_cast<std::uint64_t>(stream));
    const auto r = philox4x32_10({std::uint32_t(step), std::uint32_t(step >> 32), mode, path},
                                 {std::uint32_t(k), std::uint32_t(k >> 32)});
    // two 53-bit uniforms in (0, 1]
    const std::uint64_t a = (std::uint64_t(r[0]) << 21) ^ (r[1] >> 11);
    const std::uint64_t b = (std::uint64_t(r[2]) << 21) ^ (r[3] >> 11);
    const double u1 = (double(a) + 1.0) * 0x1.0p-53;
    const double u2 = double(b) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace nsf
