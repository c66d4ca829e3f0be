//! Closed-form resonator math: resonant frequency, Q-factor, half-power
//! bandwidth, stored energy, coupling and the normalized bandpass response.
//!
//! Everything here works in base SI units (Hz, H, F, Ω, V, J).

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_positive, Error, Result};

/// Lowest Q for which the half-power band of the canonical response is a
/// positive interval.
pub const MIN_Q: f64 = 0.5;

/// Half-power (−3 dB) magnitude level.
pub const HALF_POWER: f64 = FRAC_1_SQRT_2;

/// An inductor-capacitor pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonatorSpec {
    inductance: f64,
    capacitance: f64,
    label: String,
}

impl ResonatorSpec {
    pub fn new(inductance: f64, capacitance: f64, label: impl Into<String>) -> Result<Self> {
        ensure_positive("inductance", inductance)?;
        ensure_positive("capacitance", capacitance)?;
        let spec = Self {
            inductance,
            capacitance,
            label: label.into(),
        };
        let f0 = spec.resonant_frequency();
        if !(f0.is_finite() && f0 > 0.0) {
            return Err(domain(format!(
                "L = {inductance} H, C = {capacitance} F gives no finite resonance"
            )));
        }
        Ok(spec)
    }

    /// Resonator tuned to `target_f0` with the given inductance.
    pub fn tuned(target_f0: f64, inductance: f64, label: impl Into<String>) -> Result<Self> {
        let c = capacitance_for(target_f0, inductance)?;
        Self::new(inductance, c, label)
    }

    pub fn inductance(&self) -> f64 {
        self.inductance
    }

    pub fn capacitance(&self) -> f64 {
        self.capacitance
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn resonant_frequency(&self) -> f64 {
        lc_frequency(self.inductance, self.capacitance)
    }
}

#[inline]
fn lc_frequency(l: f64, c: f64) -> f64 {
    1.0 / (2.0 * PI * (l * c).sqrt())
}

/// A Q-factor together with the frequency it was evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityFactor {
    value: f64,
    at_frequency: f64,
}

impl QualityFactor {
    /// Fails unless `value > 0.5` and `at_frequency > 0`.
    pub fn new(value: f64, at_frequency: f64) -> Result<Self> {
        ensure_positive("frequency", at_frequency)?;
        if !(value.is_finite() && value > MIN_Q) {
            return Err(domain(format!(
                "Q = {value} at {at_frequency} Hz is not above {MIN_Q}; half-power band undefined"
            )));
        }
        Ok(Self {
            value,
            at_frequency,
        })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn at_frequency(&self) -> f64 {
        self.at_frequency
    }

    /// `f0 / Q` at the frequency this Q belongs to.
    pub fn bandwidth(&self) -> f64 {
        self.at_frequency / self.value
    }
}

/// Transmitter/receiver coil pair with a coupling coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingLink {
    coupling_coefficient: f64,
    transmitter_inductance: f64,
    receiver_inductance: f64,
}

impl CouplingLink {
    pub fn new(k: f64, transmitter_inductance: f64, receiver_inductance: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&k) {
            return Err(domain(format!("coupling coefficient {k} outside [0, 1]")));
        }
        ensure_positive("transmitter inductance", transmitter_inductance)?;
        ensure_positive("receiver inductance", receiver_inductance)?;
        Ok(Self {
            coupling_coefficient: k,
            transmitter_inductance,
            receiver_inductance,
        })
    }

    pub fn coupling_coefficient(&self) -> f64 {
        self.coupling_coefficient
    }

    pub fn transmitter_inductance(&self) -> f64 {
        self.transmitter_inductance
    }

    pub fn receiver_inductance(&self) -> f64 {
        self.receiver_inductance
    }
}

/// Charge state of a capacitor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyState {
    capacitance: f64,
    voltage: f64,
    energy: f64,
}

impl EnergyState {
    pub fn new(capacitance: f64, voltage: f64) -> Result<Self> {
        let energy = stored_energy(capacitance, voltage)?;
        Ok(Self {
            capacitance,
            voltage,
            energy,
        })
    }

    /// State holding `energy` joules; voltage is the non-negative root.
    pub fn from_energy(capacitance: f64, energy: f64) -> Result<Self> {
        ensure_positive("capacitance", capacitance)?;
        if !(energy.is_finite() && energy >= 0.0) {
            return Err(domain(format!("energy {energy} J must be non-negative")));
        }
        let voltage = (2.0 * energy / capacitance).sqrt();
        Ok(Self {
            capacitance,
            voltage,
            energy: stored_energy(capacitance, voltage)?,
        })
    }

    pub fn capacitance(&self) -> f64 {
        self.capacitance
    }

    pub fn voltage(&self) -> f64 {
        self.voltage
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }
}

/// Sampled normalized magnitude response of one resonator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseCurve {
    center_frequency: f64,
    q: f64,
    samples: Vec<(f64, f64)>,
}

impl ResponseCurve {
    /// Samples the canonical response of `(f0, q)` on `grid`.
    pub fn sample(f0: f64, q: f64, grid: &[f64]) -> Result<Self> {
        let samples = grid
            .iter()
            .map(|&f| normalized_response(f, f0, q).map(|m| (f, m)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            center_frequency: f0,
            q,
            samples,
        })
    }

    pub fn center_frequency(&self) -> f64 {
        self.center_frequency
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn samples(&self) -> &[(f64, f64)] {
        &self.samples
    }

    pub fn measured_bandwidth(&self, threshold: f64) -> Result<f64> {
        measured_bandwidth(&self.samples, threshold)
    }
}

/// `1 / (2π √(LC))`.
pub fn resonant_frequency(spec: &ResonatorSpec) -> f64 {
    spec.resonant_frequency()
}

/// Capacitance that resonates with `inductance` at `target_f0`.
pub fn capacitance_for(target_f0: f64, inductance: f64) -> Result<f64> {
    ensure_positive("target frequency", target_f0)?;
    ensure_positive("inductance", inductance)?;
    let w = 2.0 * PI * target_f0;
    Ok(1.0 / (w * w * inductance))
}

/// Half-power bandwidth `f0 / Q`.
pub fn half_power_bandwidth(f0: f64, q: QualityFactor) -> Result<f64> {
    ensure_positive("f0", f0)?;
    Ok(f0 / q.value())
}

/// Series-loss Q, `2π f0 L / R_s`.
pub fn series_q(f0: f64, inductance: f64, rs: f64) -> Result<QualityFactor> {
    ensure_positive("f0", f0)?;
    ensure_positive("inductance", inductance)?;
    if rs == 0.0 {
        return Err(domain("zero series resistance gives unbounded Q"));
    }
    ensure_positive("series resistance", rs)?;
    QualityFactor::new(loss_q(f0, inductance, rs), f0)
}

/// Q de-rated by an additive worst-case series resistance `margin_es`.
pub fn effective_q(f: f64, inductance: f64, rs_at_f: f64, margin_es: f64) -> Result<QualityFactor> {
    if !(margin_es.is_finite() && margin_es >= 0.0) {
        return Err(domain(format!(
            "loss margin {margin_es} Ω must be non-negative"
        )));
    }
    ensure_positive("series resistance", rs_at_f)?;
    series_q(f, inductance, rs_at_f + margin_es)
}

#[inline]
pub(crate) fn loss_q(f: f64, inductance: f64, rs: f64) -> f64 {
    2.0 * PI * f * inductance / rs
}

/// Canonical second-order bandpass magnitude normalized to 1 at `f0`:
/// `1 / √(1 + Q²(f/f0 − f0/f)²)`.
pub fn normalized_response(f: f64, f0: f64, q: f64) -> Result<f64> {
    ensure_positive("frequency", f)?;
    ensure_positive("f0", f0)?;
    ensure_positive("Q", q)?;
    Ok(response_magnitude(f, f0, q))
}

#[inline]
pub(crate) fn response_magnitude(f: f64, f0: f64, q: f64) -> f64 {
    let detune = f / f0 - f0 / f;
    1.0 / (1.0 + q * q * detune * detune).sqrt()
}

/// Exact half-power crossings `f0 (√(1 + 1/(4Q²)) ∓ 1/(2Q))` of the
/// canonical response.
pub fn half_power_edges(f0: f64, q: QualityFactor) -> (f64, f64) {
    let half = 0.5 / q.value();
    let mid = (1.0 + half * half).sqrt();
    (f0 * (mid - half), f0 * (mid + half))
}

/// Crossings of `threshold` by the canonical response. `threshold` in (0, 1).
pub fn threshold_edges(f0: f64, q: f64, threshold: f64) -> Result<(f64, f64)> {
    ensure_positive("f0", f0)?;
    ensure_positive("Q", q)?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(domain(format!("threshold {threshold} outside (0, 1)")));
    }
    // |f/f0 - f0/f| = d  =>  f/f0 = d/2 ± sqrt(1 + d²/4)
    let d = (1.0 / (threshold * threshold) - 1.0).sqrt() / q;
    let half = 0.5 * d;
    let mid = (1.0 + half * half).sqrt();
    Ok((f0 * (mid - half), f0 * (mid + half)))
}

/// `E = ½ C V²`.
pub fn stored_energy(capacitance: f64, voltage: f64) -> Result<f64> {
    ensure_positive("capacitance", capacitance)?;
    if !voltage.is_finite() {
        return Err(domain(format!("voltage {voltage} is not finite")));
    }
    Ok(0.5 * capacitance * voltage * voltage)
}

/// `M = k √(L_T L_R)`.
pub fn mutual_inductance(link: &CouplingLink) -> f64 {
    link.coupling_coefficient * (link.transmitter_inductance * link.receiver_inductance).sqrt()
}

/// Width of the band where the sampled magnitude is at or above `threshold`.
///
/// The band is the one around the peak sample; each edge is the linear
/// interpolation between the two samples bracketing the threshold.
pub fn measured_bandwidth(samples: &[(f64, f64)], threshold: f64) -> Result<f64> {
    let (lo, hi) = measured_band_edges(samples, threshold)?;
    Ok(hi - lo)
}

/// Interpolated lower and upper threshold crossings around the peak sample.
pub fn measured_band_edges(samples: &[(f64, f64)], threshold: f64) -> Result<(f64, f64)> {
    if samples.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need at least 3 samples, got {}",
            samples.len()
        )));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(domain(format!("threshold {threshold} outside (0, 1)")));
    }
    if samples
        .windows(2)
        .any(|w| w[1].0.partial_cmp(&w[0].0) != Some(std::cmp::Ordering::Greater))
    {
        return Err(Error::Invalid(
            "sample frequencies must be strictly increasing".into(),
        ));
    }

    let (peak_idx, peak) =
        samples
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &(_, m))| {
                if m > best.1 {
                    (i, m)
                } else {
                    best
                }
            });
    if peak < threshold {
        return Err(Error::NoBand { peak, threshold });
    }

    let below = samples[..peak_idx]
        .iter()
        .rposition(|&(_, m)| m < threshold)
        .ok_or(Error::BandExceedsGrid { side: "lower" })?;
    let above = samples[peak_idx + 1..]
        .iter()
        .position(|&(_, m)| m < threshold)
        .map(|i| i + peak_idx + 1)
        .ok_or(Error::BandExceedsGrid { side: "upper" })?;

    let lo = crossing(samples[below], samples[below + 1], threshold);
    let hi = crossing(samples[above - 1], samples[above], threshold);
    Ok((lo, hi))
}

#[inline]
pub(crate) fn crossing(a: (f64, f64), b: (f64, f64), level: f64) -> f64 {
    a.0 + (level - a.1) / (b.1 - a.1) * (b.0 - a.0)
}
