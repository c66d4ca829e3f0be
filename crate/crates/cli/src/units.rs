//! Engineering-suffix parsing and printing. Everything past this module is SI.

/// SI base unit a flag is expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Hertz,
    Henry,
    Farad,
    Ohm,
    Volt,
    Second,
    Watt,
    Joule,
}

impl Unit {
    fn symbols(self) -> &'static [&'static str] {
        match self {
            Unit::Hertz => &["Hz", "hz", "HZ"],
            Unit::Henry => &["H"],
            Unit::Farad => &["F"],
            Unit::Ohm => &["Ω", "ohm", "Ohm", "ohms"],
            Unit::Volt => &["V"],
            Unit::Second => &["s"],
            Unit::Watt => &["W"],
            Unit::Joule => &["J"],
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Unit::Ohm => "Ω",
            other => other.symbols()[0],
        }
    }
}

/// Decimal exponent of a prefix.
fn prefix_exponent(p: &str) -> Option<i32> {
    Some(match p {
        "" => 0,
        "p" => -12,
        "n" => -9,
        "u" | "µ" | "μ" => -6,
        "m" => -3,
        "k" | "K" => 3,
        "M" => 6,
        "G" => 9,
        _ => return None,
    })
}

/// `v * 10^exp`, dividing for negative exponents so that `10u` is exactly `1e-5`.
fn scale(v: f64, exp: i32) -> f64 {
    if exp >= 0 {
        v * 10f64.powi(exp)
    } else {
        v / 10f64.powi(-exp)
    }
}

/// Parses `"10uH"`, `"4.7 nF"`, `"1MHz"`, `"100k"` or a plain float such as
/// `"1e-5"` into SI units.
pub fn parse(text: &str, unit: Unit) -> Result<f64, String> {
    let s = text.trim();
    if s.is_empty() {
        return Err("empty value".into());
    }
    if let Ok(v) = s.parse::<f64>() {
        return finite(v, text);
    }
    let body = unit
        .symbols()
        .iter()
        .find_map(|sym| s.strip_suffix(sym))
        .unwrap_or(s)
        .trim_end();
    let split = body
        .char_indices()
        .rev()
        .take_while(|(_, c)| c.is_alphabetic())
        .last()
        .map_or(body.len(), |(i, _)| i);
    let (number, prefix) = body.split_at(split);
    let exp = prefix_exponent(prefix)
        .ok_or_else(|| format!("unrecognized unit in {text:?} (expected {})", unit.symbol()))?;
    let v: f64 = number
        .trim()
        .parse()
        .map_err(|_| format!("not a number: {text:?}"))?;
    finite(scale(v, exp), text)
}

fn finite(v: f64, text: &str) -> Result<f64, String> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("not a finite number: {text:?}"))
    }
}

/// Formats an SI value with an engineering prefix, e.g. `999.335 kHz`.
pub fn format(value: f64, unit: Unit) -> String {
    const PREFIXES: [(f64, &str); 8] = [
        (1e9, "G"),
        (1e6, "M"),
        (1e3, "k"),
        (1.0, ""),
        (1e-3, "m"),
        (1e-6, "µ"),
        (1e-9, "n"),
        (1e-12, "p"),
    ];
    if value == 0.0 || !value.is_finite() {
        return format!("{value} {}", unit.symbol());
    }
    let (scale, prefix) = PREFIXES
        .iter()
        .copied()
        .find(|(scale, _)| value.abs() >= *scale * (1.0 - 5e-7))
        .unwrap_or(PREFIXES[PREFIXES.len() - 1]);
    let mut digits = format!("{:.6}", value / scale);
    if digits.contains('.') {
        digits = digits
            .trim_end_matches('0')
            .trim_end_matches('.')
            .to_string();
    }
    format!("{digits} {prefix}{}", unit.symbol())
}

pub fn hertz(s: &str) -> Result<f64, String> {
    parse(s, Unit::Hertz)
}

pub fn henry(s: &str) -> Result<f64, String> {
    parse(s, Unit::Henry)
}

pub fn ohm(s: &str) -> Result<f64, String> {
    parse(s, Unit::Ohm)
}

pub fn second(s: &str) -> Result<f64, String> {
    parse(s, Unit::Second)
}

pub fn watt(s: &str) -> Result<f64, String> {
    parse(s, Unit::Watt)
}

/// `lo:hi` frequency range.
pub fn band(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected LO:HI, got {s:?}"))?;
    Ok((hertz(lo)?, hertz(hi)?))
}

/// `start:stop:step` frequency grid.
pub fn grid(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [a, b, c] => Ok((hertz(a)?, hertz(b)?, hertz(c)?)),
        _ => Err(format!("expected START:STOP:STEP, got {s:?}")),
    }
}

/// `f0:Q` pair.
pub fn resonator(s: &str) -> Result<(f64, f64), String> {
    let (f0, q) = s
        .split_once(':')
        .ok_or_else(|| format!("expected F0:Q, got {s:?}"))?;
    let q: f64 = q
        .trim()
        .parse()
        .map_err(|_| format!("Q is not a number: {q:?}"))?;
    Ok((hertz(f0)?, q))
}
