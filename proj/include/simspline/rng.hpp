#pragma once
// Counter-based seed splitting: every consumer of randomness derives its own
// substream from (master seed, a few stream ids).  Substreams are independent
// of scheduling, so parallel runs reproduce the serial results bit-for-bit.
#include <cstdint>
#include <cmath>
#include <initializer_list>

namespace simspline {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// xoshiro256** seeded via splitmix64 of the mixed stream key.
class Rng {
public:
    explicit Rng(std::uint64_t seed) { reseed(seed); }
    Rng(std::uint64_t master, std::initializer_list<std::uint64_t> ids) {
        std::uint64_t h = master;
        for (std::uint64_t id : ids) h = splitmix64(h ^ splitmix64(id + 0x100));
        reseed(h);
    }
    Rng substream(std::uint64_t id) const {
        Rng r(0);
        std::uint64_t h = splitmix64(key_ ^ splitmix64(id + 0x100));
        r.reseed(h);
        return r;
    }

    std::uint64_t next() {
        std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform on [0,1)
    double uniform() { return (next() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal, polar method (no cached spare: keeps streams simple)
    double normal() {
        for (;;) {
            double u = 2.0 * uniform() - 1.0;
            double v = 2.0 * uniform() - 1.0;
            double s = u * u + v * v;
            if (s > 0.0 && s < 1.0)
                return u * std::sqrt(-2.0 * std::log(s) / s);
        }
    }

private:
    void reseed(std::uint64_t seed) {
        key_ = seed;
        std::uint64_t x = seed;
        for (int i = 0; i < 4; ++i) s_[i] = x = splitmix64(x);
    }
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }
    std::uint64_t s_[4];
    std::uint64_t key_;
};

} // namespace simspline
