#pragma once

#include <array>
#include <cstdint>

namespace ifm::rng {

// Philox4x32-10 counter-based generator (Salmon et al., SC 2011). A draw is a
// pure function of (key, counter), so substreams keyed by (seed, object,
// purpose) are independent and parallel evaluation is bit-for-bit identical
// to sequential evaluation.
struct Philox4x32 {
    static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
    static constexpr std::uint32_t kWeylB = 0xBB67AE85u;
    static constexpr std::uint32_t kMultA = 0xD2511F53u;
    static constexpr std::uint32_t kMultB = 0xCD9E8D57u;

    static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> counter,
                                              std::array<std::uint32_t, 2> key) {
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t prod0 = static_cast<std::uint64_t>(kMultA) * counter[0];
            const std::uint64_t prod1 = static_cast<std::uint64_t>(kMultB) * counter[2];
            const auto hi0 = static_cast<std::uint32_t>(prod0 >> 32);
            const auto lo0 = static_cast<std::uint32_t>(prod0);
            const auto hi1 = static_cast<std::uint32_t>(prod1 >> 32);
            const auto lo1 = static_cast<std::uint32_t>(prod1);
            counter = {hi1 ^ counter[1] ^ key[0], lo1, hi0 ^ counter[3] ^ key[1], lo0};
            key[0] += kWeylA;
            key[1] += kWeylB;
        }
        return counter;
    }
};

// One object's private draw sequence within a seeded run.
class Substream {
  public:
    // purpose separates independent uses of the same object's stream
    // (composition draw vs test draws).
    Substream(std::uint64_t seed, std::uint64_t stream_id, std::uint32_t purpose)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_lo_(static_cast<std::uint32_t>(stream_id)),
          stream_hi_(static_cast<std::uint32_t>(stream_id >> 32)),
          purpose_(purpose) {}

    // Uniform double in [0,1) with 53 random bits; consumes one counter slot.
    double next_uniform() {
        auto words = Philox4x32::block({index_++, stream_lo_, stream_hi_, purpose_}, key_);
        std::uint64_t bits =
            (static_cast<std::uint64_t>(words[0]) << 32) | static_cast<std::uint64_t>(words[1]);
        return static_cast<double>(bits >> 11) * 0x1.0p-53;
    }

    std::uint32_t draws_consumed() const { return index_; }

  private:
    std::array<std::uint32_t, 2> key_;
    std::uint32_t stream_lo_;
    std::uint32_t stream_hi_;
    std::uint32_t purpose_;
    std::uint32_t index_ = 0;
};

}  // namespace ifm::rng
