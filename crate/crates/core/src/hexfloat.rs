//! Lossless hexadecimal float text (`0x1.8p+1`), compatible with C99 `%a`
//! and Python's `float.hex()`.

use crate::error::{Error, Result};

const FRAC_BITS: u32 = 52;
const FRAC_MASK: u64 = (1 << FRAC_BITS) - 1;

pub fn format_f64(x: f64) -> String {
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_field = ((bits >> FRAC_BITS) & 0x7ff) as i32;
    let frac = bits & FRAC_MASK;
    if exp_field == 0x7ff {
        return if frac == 0 { format!("{sign}inf") } else { "nan".into() };
    }
    if exp_field == 0 && frac == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if exp_field == 0 {
        (0, -1022)
    } else {
        (1, exp_field - 1023)
    };
    let digits = format!("{frac:013x}");
    let digits = digits.trim_end_matches('0');
    if digits.is_empty() {
        format!("{sign}0x{lead}p{exp:+}")
    } else {
        format!("{sign}0x{lead}.{digits}p{exp:+}")
    }
}

/// Parses a hex float. Values that would need rounding are rejected, so a
/// successful parse is always exact.
pub fn parse_f64(s: &str) -> Result<f64> {
    let bad = |why: &str| Error::InvalidRecords(format!("bad hex float `{s}`: {why}"));
    let (neg, body) = match s.as_bytes().first() {
        Some(b'-') => (true, &s[1..]),
        Some(b'+') => (false, &s[1..]),
        _ => (false, s),
    };
    let body = body
        .strip_prefix("0x")
        .or_else(|| body.strip_prefix("0X"))
        .ok_or_else(|| bad("missing 0x prefix"))?;
    let (mant, exp) = body
        .split_once(['p', 'P'])
        .ok_or_else(|| bad("missing exponent"))?;
    let exp: i64 = exp.parse().map_err(|_| bad("bad exponent"))?;
    let (int_part, frac_part) = mant.split_once('.').unwrap_or((mant, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad("empty mantissa"));
    }

    // Accumulate all hex digits into a u128 mantissa.
    let mut m: u128 = 0;
    let mut frac_digits: i64 = 0;
    for (i, c) in int_part.chars().chain(frac_part.chars()).enumerate() {
        let d = c.to_digit(16).ok_or_else(|| bad("bad digit"))?;
        if m >> 120 != 0 {
            return Err(bad("too many digits"));
        }
        m = (m << 4) | u128::from(d);
        if i >= int_part.len() {
            frac_digits += 1;
        }
    }
    let sign_bit = if neg { 1u64 << 63 } else { 0 };
    if m == 0 {
        return Ok(f64::from_bits(sign_bit));
    }
    // value = m * 2^scale
    let scale = exp - 4 * frac_digits;
    let top = 127 - i64::from(m.leading_zeros());
    let e = top + scale; // unbiased exponent of the leading bit
    if e > 1023 {
        return Err(bad("overflow"));
    }
    let bits = if e >= -1022 {
        // normal: shift so the leading bit sits at position 52
        let shift = top - i64::from(FRAC_BITS);
        let m52 = shift_exact(m, shift).ok_or_else(|| bad("not exactly representable"))?;
        (((e + 1023) as u64) << FRAC_BITS) | (m52 as u64 & FRAC_MASK)
    } else {
        // subnormal: value = f * 2^-1074
        let shift = -(scale + 1074);
        let f = shift_exact(m, shift).ok_or_else(|| bad("not exactly representable"))?;
        f as u64
    };
    Ok(f64::from_bits(sign_bit | bits))
}

/// `m >> shift` (or `<<` for negative shift), failing if bits are lost.
fn shift_exact(m: u128, shift: i64) -> Option<u128> {
    if shift >= 0 {
        if shift >= 128 {
            return None;
        }
        let s = shift as u32;
        if m & ((1u128 << s) - 1) != 0 {
            return None;
        }
        Some(m >> s)
    } else {
        let s = u32::try_from(-shift).ok()?;
        if s >= 128 || m.leading_zeros() < s {
            return None;
        }
        Some(m << s)
    }
}
