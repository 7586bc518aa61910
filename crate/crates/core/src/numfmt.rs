//! Exact text encoding of `f64`.
//!
//! Decimal output uses 17 significant digits, which round-trips every finite
//! double. Hexadecimal output uses the C99 `%a` layout (`0x1.8p+1`).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumberFormat {
    #[default]
    Decimal,
    Hex,
}

pub fn format_f64(x: f64, fmt: NumberFormat) -> String {
    match fmt {
        NumberFormat::Decimal => format!("{x:.16e}"),
        NumberFormat::Hex => format_hex(x),
    }
}

pub fn format_hex(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp_bits = ((bits >> 52) & 0x7ff) as i64;
    let mantissa = bits & 0x000f_ffff_ffff_ffff;
    if exp_bits == 0 && mantissa == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, exp) = if exp_bits == 0 {
        (0, -1022)
    } else {
        (1, exp_bits - 1023)
    };
    let mut frac = format!("{mantissa:013x}");
    while frac.ends_with('0') {
        frac.pop();
    }
    if frac.is_empty() {
        format!("{sign}0x{lead}p{exp:+}")
    } else {
        format!("{sign}0x{lead}.{frac}p{exp:+}")
    }
}

/// Parses either decimal or hexadecimal float text.
pub fn parse_f64(s: &str) -> Option<f64> {
    let t = s.trim();
    let (neg, body) = match t.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, t.strip_prefix('+').unwrap_or(t)),
    };
    let Some(hex) = body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) else {
        return t.parse().ok();
    };
    let (mant, exp) = hex.split_once(['p', 'P'])?;
    let exp: i32 = exp.parse().ok()?;
    let (int_part, frac_part) = mant.split_once('.').unwrap_or((mant, ""));
    if int_part.len() != 1 || frac_part.len() > 13 {
        return None;
    }
    let lead = u64::from_str_radix(int_part, 16).ok()?;
    if lead > 1 {
        return None;
    }
    let frac = if frac_part.is_empty() {
        0
    } else {
        u64::from_str_radix(frac_part, 16).ok()? << (4 * (13 - frac_part.len()))
    };
    let bits = if lead == 0 {
        if frac == 0 {
            0
        } else if exp == -1022 {
            frac
        } else {
            return None;
        }
    } else {
        let biased = exp + 1023;
        if !(1..=2046).contains(&biased) {
            return None;
        }
        ((biased as u64) << 52) | frac
    };
    let v = f64::from_bits(bits);
    Some(if neg { -v } else { v })
}
