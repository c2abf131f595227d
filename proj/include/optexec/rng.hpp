#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace optexec {

// Counter-based generator (Philox 4x32-10, Salmon et al. 2011).
// A (seed, stream) pair identifies an independent random stream; draws are a
// pure function of (seed, stream, counter), so parallel and serial runs that
// assign the same stream ids produce identical numbers.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream)
      : key_{static_cast<std::uint32_t>(seed),
             static_cast<std::uint32_t>(seed >> 32)},
        block_{0},
        buf_pos_(4) {
    ctr_ = {0u, 0u, static_cast<std::uint32_t>(stream),
            static_cast<std::uint32_t>(stream >> 32)};
  }

  // Uniform on (0,1), 53-bit resolution, never exactly 0 or 1.
  double uniform() {
    const std::uint64_t bits = next64();
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; values come in deterministic pairs.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

 private:
  std::uint64_t next64() {
    if (buf_pos_ >= 4) {
      block_ = philox(ctr_, key_);
      // 128-bit counter increment
      if (++ctr_[0] == 0 && ++ctr_[1] == 0 && ++ctr_[2] == 0) ++ctr_[3];
      buf_pos_ = 0;
    }
    const std::uint64_t lo = block_[buf_pos_];
    const std::uint64_t hi = block_[buf_pos_ + 1];
    buf_pos_ += 2;
    return (hi << 32) | lo;
  }

  static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& lo,
                      std::uint32_t& hi) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    lo = static_cast<std::uint32_t>(p);
    hi = static_cast<std::uint32_t>(p >> 32);
  }

  static std::array<std::uint32_t, 4> philox(std::array<std::uint32_t, 4> c,
                                             std::array<std::uint32_t, 2> k) {
    constexpr std::uint32_t kWeylA = 0x9E3779B9u;
    constexpr std::uint32_t kWeylB = 0xBB67AE85u;
    constexpr std::uint32_t kMulA = 0xD2511F53u;
    constexpr std::uint32_t kMulB = 0xCD9E8D57u;
    for (int round = 0; round < 10; ++round) {
      std::uint32_t lo0, hi0, lo1, hi1;
      mulhilo(kMulA, c[0], lo0, hi0);
      mulhilo(kMulB, c[2], lo1, hi1);
      c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
      k[0] += kWeylA;
      k[1] += kWeylB;
    }
    return c;
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> ctr_;
  std::array<std::uint32_t, 4> block_;
  int buf_pos_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace optexec
