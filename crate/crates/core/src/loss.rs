//! Frequency-dependent loss data.
//!
//! A [`LossTable`] holds either Q-vs-frequency or series-resistance-vs-
//! frequency samples and interpolates them piecewise-linearly in
//! `(ln f, value)`. Queries outside the sampled span clamp to the nearest
//! endpoint and report that they did.
//!
//! File format: UTF-8 text, `#` comment lines, a header
//! `frequency_hz,q` or `frequency_hz,rs_ohm`, then `float,float` rows.
//! Commas or whitespace separate columns; LF and CRLF are both accepted.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_positive, Error, Result};
use crate::resonance::{loss_q, QualityFactor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Value column is a dimensionless Q measured at the table's reference
    /// inductance.
    Q,
    /// Value column is series resistance in ohms.
    SeriesResistance,
}

impl LossKind {
    pub fn column_name(self) -> &'static str {
        match self {
            LossKind::Q => "q",
            LossKind::SeriesResistance => "rs_ohm",
        }
    }

    fn from_column(name: &str) -> Option<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "q" => Some(LossKind::Q),
            "rs_ohm" => Some(LossKind::SeriesResistance),
            _ => None,
        }
    }
}

/// Result of a table lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lookup {
    pub value: f64,
    /// The query lay outside the table span and was clamped to an endpoint.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossTable {
    entries: Vec<(f64, f64)>,
    log_freq: Vec<f64>,
    kind: LossKind,
    reference_inductance: Option<f64>,
}

impl LossTable {
    /// Builds a table from `(frequency, value)` rows.
    ///
    /// Q tables need `reference_inductance` to convert to series resistance.
    pub fn new(
        entries: Vec<(f64, f64)>,
        kind: LossKind,
        reference_inductance: Option<f64>,
    ) -> Result<Self> {
        if entries.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "loss table needs at least 2 rows, got {}",
                entries.len()
            )));
        }
        for (i, &(f, v)) in entries.iter().enumerate() {
            if !(f.is_finite() && f > 0.0 && v.is_finite() && v > 0.0) {
                return Err(Error::Invalid(format!(
                    "row {i}: frequency and value must be positive, got ({f}, {v})"
                )));
            }
            if i > 0 && f <= entries[i - 1].0 {
                return Err(Error::Invalid(format!(
                    "row {i}: frequency {f} not above previous {}",
                    entries[i - 1].0
                )));
            }
        }
        match (kind, reference_inductance) {
            (LossKind::Q, None) => {
                return Err(Error::Invalid(
                    "Q loss table requires a reference inductance".into(),
                ))
            }
            (_, Some(l)) => ensure_positive("reference inductance", l)?,
            _ => {}
        }
        let log_freq = entries.iter().map(|&(f, _)| f.ln()).collect();
        Ok(Self {
            entries,
            log_freq,
            kind,
            reference_inductance,
        })
    }

    /// Parses the delimited text format. The header decides the kind.
    pub fn read<R: BufRead>(reader: R, reference_inductance: Option<f64>) -> Result<Self> {
        let mut kind = None;
        let mut header_line = 0;
        let mut rows = Vec::new();

        for (idx, line) in reader.lines().enumerate() {
            let lineno = idx + 1;
            let line = line.map_err(|e| Error::Parse {
                line: lineno,
                message: e.to_string(),
            })?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let fields = split_fields(text);
            if fields.len() != 2 {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("expected 2 columns, found {}", fields.len()),
                });
            }

            let Some(kind) = kind else {
                if !fields[0].eq_ignore_ascii_case("frequency_hz") {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!(
                            "header must start with frequency_hz, found {:?}",
                            fields[0]
                        ),
                    });
                }
                kind = Some(
                    LossKind::from_column(fields[1]).ok_or_else(|| Error::Parse {
                        line: lineno,
                        message: format!(
                            "unknown value column {:?}; expected q or rs_ohm",
                            fields[1]
                        ),
                    })?,
                );
                header_line = lineno;
                continue;
            };

            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    line: lineno,
                    message: format!("not a number: {s:?}"),
                })
            };
            let f = parse(fields[0])?;
            let v = parse(fields[1])?;
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("frequency must be positive, got {f}"),
                });
            }
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("{} must be positive, got {v}", kind.column_name()),
                });
            }
            if let Some(&(prev, _)) = rows.last() {
                if f <= prev {
                    return Err(Error::Parse {
                        line: lineno,
                        message: format!("frequency {f} is not above previous row {prev}"),
                    });
                }
            }
            rows.push((f, v));
        }

        let kind =
            kind.ok_or_else(|| Error::InsufficientData("loss table has no header".into()))?;
        if rows.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "loss table (header at line {header_line}) needs at least 2 rows, got {}",
                rows.len()
            )));
        }
        Self::new(rows, kind, reference_inductance)
    }

    pub fn load(path: impl AsRef<Path>, reference_inductance: Option<f64>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path)
            .map_err(|e| Error::Invalid(format!("cannot open {}: {e}", path.display())))?;
        Self::read(BufReader::new(file), reference_inductance)
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn reference_inductance(&self) -> Option<f64> {
        self.reference_inductance
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn span(&self) -> (f64, f64) {
        (self.entries[0].0, self.entries[self.entries.len() - 1].0)
    }

    pub fn contains(&self, f: f64) -> bool {
        let (lo, hi) = self.span();
        (lo..=hi).contains(&f)
    }

    /// Interpolated value column (Q or ohms) at `f`.
    pub fn value_at(&self, f: f64) -> Lookup {
        let n = self.entries.len();
        if f <= self.entries[0].0 {
            return Lookup {
                value: self.entries[0].1,
                clamped: f < self.entries[0].0,
            };
        }
        if f >= self.entries[n - 1].0 {
            return Lookup {
                value: self.entries[n - 1].1,
                clamped: f > self.entries[n - 1].0,
            };
        }
        // first node strictly above f; 1 <= upper <= n - 1 here
        let upper = self.entries.partition_point(|&(x, _)| x <= f);
        let (f0, v0) = self.entries[upper - 1];
        if f == f0 {
            return Lookup {
                value: v0,
                clamped: false,
            };
        }
        let (_, v1) = self.entries[upper];
        let t =
            (f.ln() - self.log_freq[upper - 1]) / (self.log_freq[upper] - self.log_freq[upper - 1]);
        Lookup {
            value: v0 + t * (v1 - v0),
            clamped: false,
        }
    }

    /// Series resistance at `f`.
    ///
    /// Q tables convert through the reference inductance, so the returned
    /// resistance does not depend on the inductance a resonator is later
    /// built with.
    pub fn rs_lookup(&self, f: f64) -> Lookup {
        let raw = self.value_at(f);
        match self.kind {
            LossKind::SeriesResistance => raw,
            LossKind::Q => {
                let l_ref = self
                    .reference_inductance
                    .expect("validated at construction");
                Lookup {
                    value: loss_q(f, l_ref, raw.value),
                    clamped: raw.clamped,
                }
            }
        }
    }

    pub fn rs_at(&self, f: f64) -> f64 {
        self.rs_lookup(f).value
    }

    /// Effective Q `2π f L / (R_s(f) + e_s)` for a resonator with inductance `inductance`.
    pub fn q_at(&self, f: f64, inductance: f64, margin_es: f64) -> Result<QualityFactor> {
        ensure_positive("frequency", f)?;
        ensure_positive("inductance", inductance)?;
        if !(margin_es.is_finite() && margin_es >= 0.0) {
            return Err(domain(format!(
                "loss margin {margin_es} Ω must be non-negative"
            )));
        }
        QualityFactor::new(self.q_value(f, inductance, margin_es), f)
    }

    /// Unvalidated effective Q.
    pub(crate) fn q_value(&self, f: f64, inductance: f64, margin_es: f64) -> f64 {
        self.q_lookup(f, inductance, margin_es).value
    }

    pub(crate) fn q_lookup(&self, f: f64, inductance: f64, margin_es: f64) -> Lookup {
        match (self.kind, self.reference_inductance) {
            // keeps table nodes exact
            (LossKind::Q, Some(l_ref)) if margin_es == 0.0 => {
                let raw = self.value_at(f);
                Lookup {
                    value: raw.value * (inductance / l_ref),
                    clamped: raw.clamped,
                }
            }
            _ => {
                let rs = self.rs_lookup(f);
                Lookup {
                    value: loss_q(f, inductance, rs.value + margin_es),
                    clamped: rs.clamped,
                }
            }
        }
    }
}

fn split_fields(text: &str) -> Vec<&str> {
    if text.contains(',') {
        text.split(',').map(str::trim).collect()
    } else {
        text.split_whitespace().collect()
    }
}

/// Dominant series-loss contributions of an LC tank.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    inductor_loss: f64,
    capacitor_esr: f64,
    interconnect: f64,
}

impl LossComponents {
    pub fn new(inductor_loss: f64, capacitor_esr: f64, interconnect: f64) -> Result<Self> {
        let parts = [inductor_loss, capacitor_esr, interconnect];
        if parts.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(domain(format!(
                "loss components must be non-negative, got {parts:?}"
            )));
        }
        if parts.iter().all(|&p| p == 0.0) {
            return Err(domain("at least one loss component must be positive"));
        }
        Ok(Self {
            inductor_loss,
            capacitor_esr,
            interconnect,
        })
    }

    pub fn inductor_loss(&self) -> f64 {
        self.inductor_loss
    }

    pub fn capacitor_esr(&self) -> f64 {
        self.capacitor_esr
    }

    pub fn interconnect(&self) -> f64 {
        self.interconnect
    }
}

/// `R_L + ESR_C + R_pcb`.
pub fn composite_rs(parts: &LossComponents) -> f64 {
    parts.inductor_loss + parts.capacitor_esr + parts.interconnect
}
