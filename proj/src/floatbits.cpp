#include "fltlab/floatbits.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace fltlab {

namespace {

constexpr int min_exponent(const FloatFormat& fmt) { return 1 - fmt.exponent_bias; }

constexpr int max_exponent(const FloatFormat& fmt) {
  return (1 << fmt.exponent_bits) - 2 - fmt.exponent_bias;
}

double max_finite(const FloatFormat& fmt) {
  return std::ldexp(2.0 - std::ldexp(1.0, -fmt.mantissa_bits), max_exponent(fmt));
}

// Round a positive finite magnitude to the format's grid. Returns +inf on overflow.
double round_magnitude(double a, const FloatFormat& fmt) {
  if (a == 0.0) return 0.0;
  const int e = std::max(std::ilogb(a), min_exponent(fmt));
  const int quantum = e - fmt.mantissa_bits;
  const double r = std::ldexp(std::nearbyint(std::ldexp(a, -quantum)), quantum);
  return r > max_finite(fmt) ? std::numeric_limits<double>::infinity() : r;
}

Encoded encode_generic(double value, const FloatFormat& fmt) {
  const std::uint32_t sign = std::signbit(value) ? (std::uint32_t{1} << fmt.sign_bit()) : 0u;
  if (std::isnan(value)) {
    return {sign | fmt.exponent_mask() | (std::uint32_t{1} << (fmt.mantissa_bits - 1)), false};
  }
  if (std::isinf(value)) return {sign | fmt.exponent_mask(), false};

  const double r = round_magnitude(std::fabs(value), fmt);
  if (std::isinf(r)) return {sign | fmt.exponent_mask(), true};
  if (r == 0.0) return {sign, false};

  const int emin = min_exponent(fmt);
  if (r < std::ldexp(1.0, emin)) {
    auto mant = static_cast<std::uint32_t>(std::ldexp(r, fmt.mantissa_bits - emin));
    return {sign | mant, false};
  }
  const int e = std::ilogb(r);
  auto mant = static_cast<std::uint32_t>(std::ldexp(r, fmt.mantissa_bits - e)) & fmt.mantissa_mask();
  auto biased = static_cast<std::uint32_t>(e + fmt.exponent_bias);
  return {sign | (biased << fmt.mantissa_bits) | mant, false};
}

std::uint32_t bf16_from_f32_bits(std::uint32_t u) {
  if ((u & 0x7F800000u) == 0x7F800000u && (u & 0x007FFFFFu) != 0) {
    return (u >> 16) | 0x0040u;  // keep NaN quiet after truncation
  }
  u += 0x7FFFu + ((u >> 16) & 1u);
  return u >> 16;
}

}  // namespace

const FloatFormat& format_of(FormatName name) {
  switch (name) {
    case FormatName::f32: return kFloat32;
    case FormatName::f16: return kFloat16;
    case FormatName::bf16: return kBFloat16;
  }
  throw std::invalid_argument("unknown float format");
}

const FloatFormat& parse_format(std::string_view text) {
  if (text == "f32" || text == "float32") return kFloat32;
  if (text == "f16" || text == "float16") return kFloat16;
  if (text == "bf16" || text == "bfloat16") return kBFloat16;
  throw std::invalid_argument("unknown float format '" + std::string(text) + "' (expected f32, f16 or bf16)");
}

std::string_view to_string(FormatName name) {
  switch (name) {
    case FormatName::f32: return "f32";
    case FormatName::f16: return "f16";
    case FormatName::bf16: return "bf16";
  }
  return "?";
}

BitField field_of(const FloatFormat& fmt, int bit) {
  if (bit < 0 || bit >= fmt.total_bits) {
    throw std::domain_error("bit position " + std::to_string(bit) + " outside " +
                            std::string(to_string(fmt.name)));
  }
  if (bit == fmt.sign_bit()) return BitField::Sign;
  if (bit >= fmt.exponent_lsb()) return BitField::Exponent;
  return BitField::Mantissa;
}

Encoded encode(double value, const FloatFormat& fmt) {
  switch (fmt.name) {
    case FormatName::f32: {
      const float f = static_cast<float>(value);
      return {std::bit_cast<std::uint32_t>(f), std::isfinite(value) && std::isinf(f)};
    }
    case FormatName::bf16: {
      const float f = static_cast<float>(value);
      const std::uint32_t bits = bf16_from_f32_bits(std::bit_cast<std::uint32_t>(f));
      const bool inf = (bits & 0x7FFFu) == 0x7F80u;
      return {bits, std::isfinite(value) && inf};
    }
    case FormatName::f16:
      return encode_generic(value, fmt);
  }
  return encode_generic(value, fmt);
}

double decode(std::uint32_t bits, const FloatFormat& fmt) {
  if (fmt.name == FormatName::f32) return std::bit_cast<float>(bits);
  if (fmt.name == FormatName::bf16) return std::bit_cast<float>(bits << 16);

  const bool negative = (bits >> fmt.sign_bit()) & 1u;
  const std::uint32_t biased = (bits & fmt.exponent_mask()) >> fmt.mantissa_bits;
  const std::uint32_t mant = bits & fmt.mantissa_mask();
  double magnitude;
  if (biased == (fmt.exponent_mask() >> fmt.mantissa_bits)) {
    magnitude = mant == 0 ? std::numeric_limits<double>::infinity()
                          : std::numeric_limits<double>::quiet_NaN();
  } else if (biased == 0) {
    magnitude = std::ldexp(static_cast<double>(mant), min_exponent(fmt) - fmt.mantissa_bits);
  } else {
    const double significand = static_cast<double>(mant | (std::uint32_t{1} << fmt.mantissa_bits));
    magnitude = std::ldexp(significand, static_cast<int>(biased) - fmt.exponent_bias - fmt.mantissa_bits);
  }
  return negative ? -magnitude : magnitude;
}

double round_to_format(double value, const FloatFormat& fmt) {
  switch (fmt.name) {
    case FormatName::f32:
      return static_cast<float>(value);
    case FormatName::bf16:
      return std::bit_cast<float>(bf16_from_f32_bits(std::bit_cast<std::uint32_t>(static_cast<float>(value))) << 16);
    case FormatName::f16:
      if (!std::isfinite(value)) return value;
      return std::copysign(round_magnitude(std::fabs(value), fmt), value);
  }
  return value;
}

double apply_fault(double value, const FloatFormat& fmt, BitFault fault) {
  if (fault.bit_position < 0 || fault.bit_position >= fmt.total_bits) {
    throw std::domain_error("fault bit " + std::to_string(fault.bit_position) + " outside " +
                            std::string(to_string(fmt.name)));
  }
  const std::uint32_t mask = std::uint32_t{1} << fault.bit_position;
  std::uint32_t bits = encode(value, fmt).bits;
  bits = fault.stuck_value ? (bits | mask) : (bits & ~mask);
  return decode(bits, fmt);
}

double scale_constant(const FloatFormat& fmt, int fault_bit) {
  const int lsb = fmt.exponent_lsb();
  if (fault_bit < lsb || fault_bit > fmt.exponent_msb()) {
    throw std::domain_error("scale_constant: bit " + std::to_string(fault_bit) +
                            " is not an exponent bit of " + std::string(to_string(fmt.name)));
  }
  if (fault_bit == lsb) {
    // Largest subnormal: 2^(1-bias) * sum_{i=1..m} 2^-i.
    return std::ldexp(1.0 - std::ldexp(1.0, -fmt.mantissa_bits), min_exponent(fmt));
  }
  // E = sum_{i=lsb}^{fault_bit-1} 2^(i-lsb): biased exponent with only the bits below the fault set.
  const int biased = (1 << (fault_bit - lsb)) - 1;
  return std::ldexp(1.0, biased - fmt.exponent_bias);
}

bool in_safe_range(double value, const FloatFormat& fmt, int fault_bit) {
  if (fault_bit < fmt.exponent_lsb() || fault_bit > fmt.exponent_msb()) {
    throw std::domain_error("in_safe_range: bit " + std::to_string(fault_bit) + " is not an exponent bit");
  }
  const std::uint32_t upto_msb = (std::uint32_t{1} << (fmt.exponent_msb() + 1)) - 1u;
  const std::uint32_t below = (std::uint32_t{1} << fault_bit) - 1u;
  return (encode(value, fmt).bits & (upto_msb & ~below)) == 0;
}

}  // namespace fltlab
