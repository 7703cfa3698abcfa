#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace fltlab {

enum class FormatName { f32, f16, bf16 };

/// Geometry of a simulated binary floating-point format. The sign is always a
/// single bit at position total_bits - 1; bit 0 is the mantissa LSB.
struct FloatFormat {
  FormatName name;
  int exponent_bits;
  int mantissa_bits;
  int exponent_bias;
  int total_bits;

  constexpr int exponent_lsb() const { return mantissa_bits; }
  constexpr int exponent_msb() const { return mantissa_bits + exponent_bits - 1; }
  constexpr int sign_bit() const { return total_bits - 1; }
  constexpr std::uint32_t exponent_mask() const {
    return ((std::uint32_t{1} << exponent_bits) - 1u) << mantissa_bits;
  }
  constexpr std::uint32_t mantissa_mask() const { return (std::uint32_t{1} << mantissa_bits) - 1u; }
  constexpr bool operator==(const FloatFormat& o) const { return name == o.name; }
};

inline constexpr FloatFormat kFloat32{FormatName::f32, 8, 23, 127, 32};
inline constexpr FloatFormat kFloat16{FormatName::f16, 5, 10, 15, 16};
inline constexpr FloatFormat kBFloat16{FormatName::bf16, 8, 7, 127, 16};

const FloatFormat& format_of(FormatName name);
/// Accepts "f32", "f16", "bf16" (also "float32", "float16", "bfloat16").
const FloatFormat& parse_format(std::string_view text);
std::string_view to_string(FormatName name);

enum class BitField { Mantissa, Exponent, Sign };
BitField field_of(const FloatFormat& fmt, int bit);

/// A single stuck-at bit.
struct BitFault {
  int bit_position;
  int stuck_value;  // 0 or 1
};

struct Encoded {
  std::uint32_t bits;
  bool overflow;  // finite input rounded past the largest finite value
};

/// Round-to-nearest-even encoding, subnormals included. bf16 goes through
/// f32 first and is then rounded to 7 mantissa bits and truncated.
Encoded encode(double value, const FloatFormat& fmt);

/// Exact value of an encoding. NaN patterns decode to a quiet NaN.
double decode(std::uint32_t bits, const FloatFormat& fmt);

/// decode(encode(value)) without the bit detour where a faster path exists.
double round_to_format(double value, const FloatFormat& fmt);

/// Forces one bit of the encoding of `value`: OR with the one-hot mask for
/// stuck-at-1, AND with its complement for stuck-at-0.
double apply_fault(double value, const FloatFormat& fmt, BitFault fault);

/// Scaling bound c for a stuck-at-0 exponent fault: every value in [-c, c]
/// has zeros at exponent bits [fault_bit, msb]. Power of two for positions
/// above the exponent LSB, largest subnormal at the LSB itself.
/// Throws std::domain_error outside the exponent field.
double scale_constant(const FloatFormat& fmt, int fault_bit);

/// True iff the encoding of `value` has zeros at every exponent bit from
/// fault_bit up to the exponent MSB.
bool in_safe_range(double value, const FloatFormat& fmt, int fault_bit);

}  // namespace fltlab
