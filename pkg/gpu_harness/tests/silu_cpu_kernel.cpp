// CPU-mode test kernel: out = silu(x) * g over half-precision buffers.
// Mirrors the device fixtures' entry convention so the harness flow can be
// exercised with a plain C++ toolchain.

#include <cmath>
#include <cstdint>

namespace {

// minimal half <-> float conversion (round-to-nearest-even on the way back)
float half_to_float(uint16_t h) {
  uint32_t sign = (h & 0x8000u) << 16;
  uint32_t exp = (h >> 10) & 0x1f;
  uint32_t mant = h & 0x3ffu;
  uint32_t bits;
  if (exp == 0) {
    if (mant == 0) {
      bits = sign;
    } else {
      exp = 127 - 15 + 1;
      while ((mant & 0x400u) == 0) {
        mant <<= 1;
        --exp;
      }
      mant &= 0x3ffu;
      bits = sign | (exp << 23) | (mant << 13);
    }
  } else if (exp == 0x1f) {
    bits = sign | 0x7f800000u | (mant << 13);
  } else {
    bits = sign | ((exp - 15 + 127) << 23) | (mant << 13);
  }
  float out;
  __builtin_memcpy(&out, &bits, 4);
  return out;
}

uint16_t float_to_half(float f) {
  uint32_t bits;
  __builtin_memcpy(&bits, &f, 4);
  uint32_t sign = (bits >> 16) & 0x8000u;
  int32_t exp = static_cast<int32_t>((bits >> 23) & 0xffu) - 127 + 15;
  uint32_t mant = bits & 0x7fffffu;
  if (exp >= 0x1f) return static_cast<uint16_t>(sign | 0x7c00u);
  if (exp <= 0) {
    if (exp < -10) return static_cast<uint16_t>(sign);
    mant |= 0x800000u;
    uint32_t shift = static_cast<uint32_t>(14 - exp);
    uint32_t half_mant = mant >> shift;
    uint32_t rem = mant & ((1u << shift) - 1);
    uint32_t halfway = 1u << (shift - 1);
    if (rem > halfway || (rem == halfway && (half_mant & 1u))) ++half_mant;
    return static_cast<uint16_t>(sign | half_mant);
  }
  uint32_t half_mant = mant >> 13;
  uint32_t rem = mant & 0x1fffu;
  if (rem > 0x1000u || (rem == 0x1000u && (half_mant & 1u))) {
    ++half_mant;
    if (half_mant == 0x400u) {
      half_mant = 0;
      ++exp;
      if (exp >= 0x1f) return static_cast<uint16_t>(sign | 0x7c00u);
    }
  }
  return static_cast<uint16_t>(sign | (static_cast<uint32_t>(exp) << 10) | half_mant);
}

}  // namespace

extern "C" void kernel_entry(void* const* tensors, const double* scalars,
                             const long long* dims, int n_tensors,
                             int n_scalars, int n_dims, const int* grid,
                             const int* block, void* stream) {
  (void)scalars;
  (void)n_scalars;
  (void)n_tensors;
  (void)n_dims;
  (void)grid;
  (void)block;
  (void)stream;
  long long n = dims[0] * dims[1];
  const uint16_t* x = static_cast<const uint16_t*>(tensors[0]);
  const uint16_t* g = static_cast<const uint16_t*>(tensors[1]);
  uint16_t* out = static_cast<uint16_t*>(tensors[2]);
  for (long long i = 0; i < n; ++i) {
    float xv = half_to_float(x[i]);
    float gv = half_to_float(g[i]);
    float silu = xv / (1.0f + std::exp(-xv));
    out[i] = float_to_half(silu * gv);
  }
}
