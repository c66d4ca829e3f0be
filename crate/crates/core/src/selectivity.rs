//! Trigger bands, cross-triggering analysis and the charge/trigger cycle.
//!
//! A device is triggered by a single-tone excitation when the normalized
//! response of its trigger resonator reaches the device threshold (by
//! default the half-power level).

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_positive, Error, Result};
use crate::resonance::{
    crossing, response_magnitude, stored_energy, QualityFactor, ResonatorSpec, HALF_POWER,
};

/// A resonator together with its loaded Q.
#[derive(Debug, Clone, PartialEq)]
pub struct Tank {
    spec: ResonatorSpec,
    q: QualityFactor,
}

impl Tank {
    pub fn new(spec: ResonatorSpec, q: f64) -> Result<Self> {
        let q = QualityFactor::new(q, spec.resonant_frequency())?;
        Ok(Self { spec, q })
    }

    pub fn spec(&self) -> &ResonatorSpec {
        &self.spec
    }

    pub fn q(&self) -> QualityFactor {
        self.q
    }

    pub fn f0(&self) -> f64 {
        self.q.at_frequency()
    }

    pub fn response(&self, f: f64) -> f64 {
        response_magnitude(f, self.f0(), self.q.value())
    }
}

/// A wirelessly addressed actuator: one charging tank feeding a clamped
/// charge bank, and one trigger tank that discharges it.
#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    label: String,
    charger: Tank,
    trigger: Tank,
    charge_bank: f64,
    clamp_voltage: f64,
    trigger_threshold: f64,
}

impl Device {
    pub fn new(
        label: impl Into<String>,
        charger: Tank,
        trigger: Tank,
        charge_bank: f64,
        clamp_voltage: f64,
        trigger_threshold: f64,
    ) -> Result<Self> {
        let label = label.into();
        if charger.f0() == trigger.f0() {
            return Err(domain(format!(
                "{label}: charger and trigger both resonate at {} Hz",
                charger.f0()
            )));
        }
        if !(trigger_threshold > 0.0 && trigger_threshold < 1.0) {
            return Err(domain(format!(
                "{label}: trigger threshold {trigger_threshold} outside (0, 1)"
            )));
        }
        ensure_positive("charge bank capacitance", charge_bank)?;
        ensure_positive("clamp voltage", clamp_voltage)?;
        Ok(Self {
            label,
            charger,
            trigger,
            charge_bank,
            clamp_voltage,
            trigger_threshold,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn charger(&self) -> &Tank {
        &self.charger
    }

    pub fn trigger(&self) -> &Tank {
        &self.trigger
    }

    pub fn charge_bank(&self) -> f64 {
        self.charge_bank
    }

    pub fn clamp_voltage(&self) -> f64 {
        self.clamp_voltage
    }

    pub fn trigger_threshold(&self) -> f64 {
        self.trigger_threshold
    }

    pub fn with_threshold(mut self, threshold: f64) -> Result<Self> {
        if !(threshold > 0.0 && threshold < 1.0) {
            return Err(domain(format!(
                "trigger threshold {threshold} outside (0, 1)"
            )));
        }
        self.trigger_threshold = threshold;
        Ok(self)
    }

    pub fn triggers_at(&self, excitation: f64) -> bool {
        self.trigger.response(excitation) >= self.trigger_threshold
    }

    pub fn charges_at(&self, excitation: f64) -> bool {
        self.charger.response(excitation) >= HALF_POWER
    }

    /// Energy held by the bank at the clamp voltage.
    pub fn clamp_energy(&self) -> f64 {
        0.5 * self.charge_bank * self.clamp_voltage * self.clamp_voltage
    }
}

// On-disk device set shape.

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TankRecord {
    pub l_h: f64,
    pub c_farad: f64,
    pub q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceRecord {
    pub label: String,
    pub charger: TankRecord,
    pub trigger: TankRecord,
    pub bank_c_farad: f64,
    pub clamp_v: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    HALF_POWER
}

impl DeviceRecord {
    pub fn into_device(self) -> Result<Device> {
        let tank = |r: TankRecord, role: &str| -> Result<Tank> {
            let spec = ResonatorSpec::new(r.l_h, r.c_farad, format!("{} {role}", self.label))?;
            Tank::new(spec, r.q)
        };
        let charger = tank(self.charger.clone(), "charger")?;
        let trigger = tank(self.trigger.clone(), "trigger")?;
        Device::new(
            self.label,
            charger,
            trigger,
            self.bank_c_farad,
            self.clamp_v,
            self.threshold,
        )
    }
}

impl From<&Device> for DeviceRecord {
    fn from(d: &Device) -> Self {
        let rec = |t: &Tank| TankRecord {
            l_h: t.spec.inductance(),
            c_farad: t.spec.capacitance(),
            q: t.q.value(),
        };
        Self {
            label: d.label.clone(),
            charger: rec(&d.charger),
            trigger: rec(&d.trigger),
            bank_c_farad: d.charge_bank,
            clamp_v: d.clamp_voltage,
            threshold: d.trigger_threshold,
        }
    }
}

/// Reads a JSON device set.
pub fn read_devices<R: Read>(reader: R) -> Result<Vec<Device>> {
    let records: Vec<DeviceRecord> = serde_json::from_reader(reader).map_err(|e| Error::Parse {
        line: e.line(),
        message: e.to_string(),
    })?;
    if records.is_empty() {
        return Err(Error::InsufficientData("device set is empty".into()));
    }
    records.into_iter().map(DeviceRecord::into_device).collect()
}

pub fn devices_to_json(devices: &[Device]) -> String {
    let records: Vec<DeviceRecord> = devices.iter().map(DeviceRecord::from).collect();
    serde_json::to_string_pretty(&records).expect("devices serialize")
}

/// Excitation interval that triggers one device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriggerBand {
    pub device_label: String,
    pub lo: f64,
    pub hi: f64,
    /// Grid frequencies that triggered the device.
    pub tested_grid: Vec<f64>,
}

impl TriggerBand {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, f: f64) -> bool {
        (self.lo..=self.hi).contains(&f)
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::InsufficientData(
            "frequency grid needs at least 2 points".into(),
        ));
    }
    if grid.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
        return Err(domain("grid frequencies must be positive"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Invalid("grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Evenly spaced grid `start, start + step, ...` up to and including `stop`
/// (within a hundredth of a step).
pub fn linear_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
    ensure_positive("grid start", start)?;
    ensure_positive("grid step", step)?;
    if !(stop.is_finite() && stop >= start) {
        return Err(domain(format!("grid stop {stop} is below start {start}")));
    }
    let n = ((stop - start) / step + 0.01).floor() as usize;
    Ok((0..=n).map(|k| start + step * k as f64).collect())
}

/// Default sweep around every trigger resonance: five bandwidths either
/// side, snapped outward to multiples of `step`.
pub fn default_trigger_grid(devices: &[Device], step: f64) -> Result<Vec<f64>> {
    ensure_positive("grid step", step)?;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for d in devices {
        let bw = d.trigger.q.bandwidth();
        lo = lo.min(d.trigger.f0() - 5.0 * bw);
        hi = hi.max(d.trigger.f0() + 5.0 * bw);
    }
    if !lo.is_finite() {
        return Err(Error::InsufficientData("no devices".into()));
    }
    let start = ((lo / step).floor() * step).max(step);
    let stop = (hi / step).ceil() * step;
    linear_grid(start, stop, step)
}

/// The contiguous band of grid frequencies that trigger `device`, with edges
/// refined by linear interpolation of the response between grid points.
pub fn trigger_band(device: &Device, grid: &[f64]) -> Result<TriggerBand> {
    check_grid(grid)?;
    let th = device.trigger_threshold;
    let mags: Vec<f64> = grid.iter().map(|&f| device.trigger.response(f)).collect();

    let mut runs: Vec<(usize, usize)> = Vec::new();
    for (i, &m) in mags.iter().enumerate() {
        if m >= th {
            match runs.last_mut() {
                Some(run) if run.1 + 1 == i => run.1 = i,
                _ => runs.push((i, i)),
            }
        }
    }
    let (first, last) = match runs.as_slice() {
        [] => {
            let peak = mags.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            return Err(Error::NoBand {
                peak,
                threshold: th,
            });
        }
        [run] => *run,
        many => return Err(Error::MultiBand { count: many.len() }),
    };
    if first == 0 {
        return Err(Error::BandExceedsGrid { side: "lower" });
    }
    if last + 1 == grid.len() {
        return Err(Error::BandExceedsGrid { side: "upper" });
    }

    let lo = crossing(
        (grid[first - 1], mags[first - 1]),
        (grid[first], mags[first]),
        th,
    );
    let hi = crossing(
        (grid[last], mags[last]),
        (grid[last + 1], mags[last + 1]),
        th,
    );
    Ok(TriggerBand {
        device_label: device.label.clone(),
        lo,
        hi,
        tested_grid: grid[first..=last].to_vec(),
    })
}

/// Positive-width intersection of two trigger bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Overlap {
    pub first: String,
    pub second: String,
    pub lo: f64,
    pub hi: f64,
    pub width: f64,
}

impl Overlap {
    pub fn pair_label(&self) -> String {
        format!("{}/{}", self.first, self.second)
    }
}

/// Every pairwise intersection of positive width, pairs in input order.
pub fn overlaps(bands: &[TriggerBand]) -> Vec<Overlap> {
    let mut out = Vec::new();
    for (i, a) in bands.iter().enumerate() {
        for b in &bands[i + 1..] {
            let lo = a.lo.max(b.lo);
            let hi = a.hi.min(b.hi);
            if hi > lo {
                out.push(Overlap {
                    first: a.device_label.clone(),
                    second: b.device_label.clone(),
                    lo,
                    hi,
                    width: hi - lo,
                });
            }
        }
    }
    out
}

/// Labels of the devices an excitation at `excitation` Hz triggers, in input order.
pub fn triggered_set(devices: &[Device], excitation: f64) -> Vec<String> {
    devices
        .iter()
        .filter(|d| d.triggers_at(excitation))
        .map(|d| d.label.clone())
        .collect()
}

/// Largest number of devices triggered together at any grid frequency, and
/// the first frequency where it occurs.
pub fn max_simultaneous(devices: &[Device], grid: &[f64]) -> (usize, Option<f64>) {
    grid.iter()
        .map(|&f| (devices.iter().filter(|d| d.triggers_at(f)).count(), f))
        .fold(
            (0, None),
            |best, (n, f)| if n > best.0 { (n, Some(f)) } else { best },
        )
}

pub fn bands_csv(bands: &[TriggerBand]) -> String {
    let mut out = String::from("label,lo_hz,hi_hz\n");
    for b in bands {
        out.push_str(&format!(
            "{},{},{}\n",
            csv_field(&b.device_label),
            b.lo,
            b.hi
        ));
    }
    out
}

pub fn overlaps_csv(overlaps: &[Overlap]) -> String {
    let mut out = String::from("pair,lo_hz,hi_hz,width_hz\n");
    for o in overlaps {
        out.push_str(&format!(
            "{},{},{},{}\n",
            csv_field(&o.pair_label()),
            o.lo,
            o.hi,
            o.width
        ));
    }
    out
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

// Charge/trigger cycle.

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CycleState {
    Idle,
    Charging,
    Triggered,
}

impl CycleState {
    pub fn name(self) -> &'static str {
        match self {
            CycleState::Idle => "Idle",
            CycleState::Charging => "Charging",
            CycleState::Triggered => "Triggered",
        }
    }
}

/// One entry of an excitation schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub duration: f64,
    pub excitation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleEvent {
    pub time: f64,
    pub state: CycleState,
    pub bank_voltage: f64,
    pub bank_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleTrace {
    pub device_label: String,
    pub events: Vec<CycleEvent>,
}

impl CycleTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,state,v_volt,e_joule\n");
        for e in &self.events {
            out.push_str(&format!(
                "{},{},{},{}\n",
                e.time,
                e.state.name(),
                e.bank_voltage,
                e.bank_energy
            ));
        }
        out
    }

    pub fn final_event(&self) -> Option<&CycleEvent> {
        self.events.last()
    }
}

/// What an excitation does to `device`. Triggering takes precedence over charging.
pub fn classify(device: &Device, excitation: f64) -> CycleState {
    if device.triggers_at(excitation) {
        CycleState::Triggered
    } else if device.charges_at(excitation) {
        CycleState::Charging
    } else {
        CycleState::Idle
    }
}

/// Simulates the charge bank of `device` under a sequence of single-tone
/// excitations.
///
/// Charging adds `charge_power` watts until the clamp voltage is reached;
/// triggering dumps the bank to zero at once; idle holds the energy. Events
/// are emitted at every segment boundary (once for the old state, once for
/// the new), at the instant the clamp is reached, and every `sample_step`
/// seconds in between.
pub fn run_cycle(
    device: &Device,
    schedule: &[Segment],
    charge_power: f64,
    sample_step: f64,
) -> Result<CycleTrace> {
    if schedule.is_empty() {
        return Err(Error::EmptySchedule);
    }
    ensure_positive("charge power", charge_power)?;
    ensure_positive("sample step", sample_step)?;
    for s in schedule {
        ensure_positive("segment duration", s.duration)?;
        ensure_positive("excitation frequency", s.excitation)?;
    }

    let c = device.charge_bank;
    let e_max = device.clamp_energy();
    let event = |time: f64, state: CycleState, energy: f64| -> Result<CycleEvent> {
        let (bank_voltage, bank_energy) = if energy >= e_max {
            (
                device.clamp_voltage,
                stored_energy(c, device.clamp_voltage)?,
            )
        } else {
            ((2.0 * energy / c).sqrt().min(device.clamp_voltage), energy)
        };
        Ok(CycleEvent {
            time,
            state,
            bank_voltage,
            bank_energy,
        })
    };

    let mut events = Vec::new();
    let mut t = 0.0;
    let mut energy = 0.0_f64;
    for seg in schedule {
        let state = classify(device, seg.excitation);
        if state == CycleState::Triggered {
            energy = 0.0;
        }
        let e_start = energy;
        let energy_at = |dt: f64| match state {
            CycleState::Charging => (e_start + charge_power * dt).min(e_max),
            _ => e_start,
        };
        events.push(event(t, state, e_start)?);

        let clamp_dt = (state == CycleState::Charging && e_start < e_max)
            .then(|| (e_max - e_start) / charge_power)
            .filter(|&dt| dt < seg.duration);
        let mut clamp_pending = clamp_dt;
        let mut k = 1usize;
        loop {
            let dt = sample_step * k as f64;
            if dt >= seg.duration {
                break;
            }
            if let Some(tc) = clamp_pending.filter(|&tc| tc <= dt) {
                if tc < dt {
                    events.push(event(t + tc, state, e_max)?);
                }
                clamp_pending = None;
            }
            events.push(event(t + dt, state, energy_at(dt))?);
            k += 1;
        }
        if let Some(tc) = clamp_pending {
            events.push(event(t + tc, state, e_max)?);
        }
        energy = energy_at(seg.duration);
        t += seg.duration;
        events.push(event(t, state, energy)?);
    }

    Ok(CycleTrace {
        device_label: device.label.clone(),
        events,
    })
}
