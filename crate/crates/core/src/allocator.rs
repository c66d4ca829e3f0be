//! Greedy packing of resonators into a frequency band.
//!
//! Starting at `f_min`, each next center is the smallest frequency whose
//! half-power interval clears the previous one by the guard band:
//!
//! ```text
//! f[i+1] - f[i] = Δf(f[i])/2 + Δf(f[i+1])/2 + e_f,   Δf(f) = f / Q_eff(f)
//! ```
//!
//! Because `Δf` depends on the unknown center the spacing equation is solved
//! numerically, by a geometric bracketing scan followed by bisection.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_positive, Error, Result};
use crate::loss::LossTable;
use crate::resonance::{capacitance_for, loss_q, MIN_Q};

/// Source of the frequency-dependent Q used for bandwidths.
#[derive(Debug, Clone)]
pub enum LossModel {
    Table(Arc<LossTable>),
    /// The same unloaded Q at every frequency. A loss margin still de-rates
    /// it through the equivalent series resistance `2π f L / Q`.
    ConstantQ(f64),
}

impl LossModel {
    /// Effective Q at `f` and whether the loss lookup was clamped.
    fn q_eff(&self, f: f64, inductance: f64, margin_es: f64) -> (f64, bool) {
        match self {
            LossModel::Table(t) => {
                let q = t.q_lookup(f, inductance, margin_es);
                (q.value, q.clamped)
            }
            LossModel::ConstantQ(q) => {
                if margin_es == 0.0 {
                    (*q, false)
                } else {
                    let rs = loss_q(f, inductance, *q);
                    (loss_q(f, inductance, rs + margin_es), false)
                }
            }
        }
    }

    fn describe(&self) -> String {
        match self {
            LossModel::Table(t) => {
                format!("table:{}:{}rows", t.kind().column_name(), t.entries().len())
            }
            LossModel::ConstantQ(q) => format!("constant_q:{q}"),
        }
    }
}

/// Numerical tolerances used by the allocator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Bisection stops once the bracket is narrower than this, in Hz.
    pub solver_abs_hz: f64,
    /// A center counts as in band when `center <= f_max * (1 + band_edge_rtol)`.
    pub band_edge_rtol: f64,
    /// Geometric step of the bracketing scan (1.01 = 1 %).
    pub scan_ratio: f64,
    /// Upper search limit for a next center, as a multiple of `f_max`.
    pub cap_factor: f64,
    /// Allocation aborts beyond this many resonators.
    pub max_entries: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            solver_abs_hz: 1e-6,
            band_edge_rtol: BAND_EDGE_RTOL,
            scan_ratio: 1.01,
            cap_factor: 10.0,
            max_entries: 1_000_000,
        }
    }
}

pub const BAND_EDGE_RTOL: f64 = 1e-9;

/// Band limits, spacing margins, shared inductance and loss source.
#[derive(Debug, Clone)]
pub struct BandPlan {
    pub f_min: f64,
    pub f_max: f64,
    pub guard_band: f64,
    pub loss_margin: f64,
    pub inductance: f64,
    pub loss: LossModel,
    pub tolerances: Tolerances,
}

impl BandPlan {
    pub fn new(f_min: f64, f_max: f64, inductance: f64, loss: LossModel) -> Self {
        Self {
            f_min,
            f_max,
            guard_band: 0.0,
            loss_margin: 0.0,
            inductance,
            loss,
            tolerances: Tolerances::default(),
        }
    }

    pub fn with_guard_band(mut self, guard_band: f64) -> Self {
        self.guard_band = guard_band;
        self
    }

    pub fn with_loss_margin(mut self, loss_margin: f64) -> Self {
        self.loss_margin = loss_margin;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("f_min", self.f_min)?;
        ensure_positive("f_max", self.f_max)?;
        if self.f_min >= self.f_max {
            return Err(domain(format!(
                "band [{}, {}] Hz is empty",
                self.f_min, self.f_max
            )));
        }
        if !(self.guard_band.is_finite() && self.guard_band >= 0.0) {
            return Err(domain(format!(
                "guard band {} Hz must be non-negative",
                self.guard_band
            )));
        }
        if !(self.loss_margin.is_finite() && self.loss_margin >= 0.0) {
            return Err(domain(format!(
                "loss margin {} Ω must be non-negative",
                self.loss_margin
            )));
        }
        ensure_positive("inductance", self.inductance)?;
        if let LossModel::ConstantQ(q) = self.loss {
            ensure_positive("constant Q", q)?;
        }
        Ok(())
    }

    /// Half-power bandwidth `f / Q_eff(f)`.
    pub fn bandwidth_at(&self, f: f64) -> f64 {
        f / self.q_at(f)
    }

    pub fn q_at(&self, f: f64) -> f64 {
        self.loss.q_eff(f, self.inductance, self.loss_margin).0
    }

    fn in_band(&self, f: f64) -> bool {
        f <= self.f_max * (1.0 + self.tolerances.band_edge_rtol)
    }
}

/// Smallest center above `f_i` that satisfies the spacing rule at equality.
pub fn next_center(f_i: f64, plan: &BandPlan) -> Result<f64> {
    plan.validate()?;
    ensure_positive("f_i", f_i)?;
    if f_i < plan.f_min {
        return Err(domain(format!(
            "f_i = {f_i} Hz is below f_min = {} Hz",
            plan.f_min
        )));
    }
    solve_next(f_i, plan)
}

fn solve_next(f_i: f64, plan: &BandPlan) -> Result<f64> {
    let tol = &plan.tolerances;
    let cap = tol.cap_factor * plan.f_max;
    let fixed = f_i + 0.5 * plan.bandwidth_at(f_i) + plan.guard_band;
    let gap = |f: f64| (f - fixed) - 0.5 * plan.bandwidth_at(f);

    // g(f_i) < 0 always; scan upward for the first sign change.
    let mut lo = f_i;
    let mut hi;
    loop {
        if lo >= cap {
            return Err(Error::Saturation { from: f_i, cap });
        }
        hi = (lo * tol.scan_ratio).min(cap);
        if gap(hi) >= 0.0 {
            break;
        }
        lo = hi;
    }

    for _ in 0..200 {
        if hi - lo <= tol.solver_abs_hz {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if gap(mid) >= 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// One allocated resonator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationEntry {
    /// 1-based position in the plan.
    #[serde(rename = "i")]
    pub index: usize,
    #[serde(rename = "f0_hz")]
    pub center: f64,
    #[serde(rename = "c_farad")]
    pub capacitance: f64,
    #[serde(rename = "bw_hz")]
    pub bandwidth: f64,
    #[serde(rename = "lo_hz")]
    pub band_lo: f64,
    #[serde(rename = "hi_hz")]
    pub band_hi: f64,
}

impl AllocationEntry {
    /// Q implied by center and bandwidth.
    pub fn q(&self) -> f64 {
        self.center / self.bandwidth
    }
}

/// Band parameters an allocation was computed for.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandSummary {
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    pub guard_hz: f64,
    pub margin_ohm: f64,
    pub inductance_h: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanMeta {
    pub loss_model: String,
    pub tolerances: Tolerances,
    /// Centers whose loss lookup fell outside the table span and was clamped.
    pub clamped_lookups: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub band: BandSummary,
    pub entries: Vec<AllocationEntry>,
    pub count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<PlanMeta>,
}

impl AllocationPlan {
    pub fn centers(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.center)
    }

    /// Smallest gap between consecutive half-power intervals, or `None` for
    /// fewer than two entries.
    pub fn min_gap(&self) -> Option<f64> {
        self.entries
            .windows(2)
            .map(|w| w[1].band_lo - w[0].band_hi)
            .min_by(f64::total_cmp)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            message: e.to_string(),
        })
    }
}

/// Packs resonators from `f_min` upward until the next center would pass `f_max`.
pub fn allocate(plan: &BandPlan) -> Result<AllocationPlan> {
    plan.validate()?;
    let q_first = plan.q_at(plan.f_min);
    if !(q_first.is_finite() && q_first > MIN_Q) {
        return Err(domain(format!(
            "Q = {q_first} at f_min = {} Hz is not above {MIN_Q}",
            plan.f_min
        )));
    }

    let mut centers = vec![plan.f_min];
    loop {
        let last = *centers.last().expect("seeded");
        let next = match solve_next(last, plan) {
            Ok(f) => f,
            // no solution below the cap means nothing more fits in band
            Err(Error::Saturation { .. }) => break,
            Err(e) => return Err(e),
        };
        if !plan.in_band(next) {
            break;
        }
        if centers.len() >= plan.tolerances.max_entries {
            return Err(Error::Invalid(format!(
                "allocation exceeds {} resonators",
                plan.tolerances.max_entries
            )));
        }
        centers.push(next);
    }

    let mut clamped_lookups = 0;
    let mut entries = Vec::with_capacity(centers.len());
    for (k, &center) in centers.iter().enumerate() {
        let (q, clamped) = plan.loss.q_eff(center, plan.inductance, plan.loss_margin);
        if !(q.is_finite() && q > MIN_Q) {
            return Err(domain(format!(
                "Q = {q} at {center} Hz is not above {MIN_Q}"
            )));
        }
        clamped_lookups += usize::from(clamped);
        let bandwidth = center / q;
        entries.push(AllocationEntry {
            index: k + 1,
            center,
            capacitance: capacitance_for(center, plan.inductance)?,
            bandwidth,
            band_lo: center - 0.5 * bandwidth,
            band_hi: center + 0.5 * bandwidth,
        });
    }

    Ok(AllocationPlan {
        band: BandSummary {
            f_min_hz: plan.f_min,
            f_max_hz: plan.f_max,
            guard_hz: plan.guard_band,
            margin_ohm: plan.loss_margin,
            inductance_h: plan.inductance,
        },
        count: entries.len(),
        entries,
        meta: Some(PlanMeta {
            loss_model: plan.loss.describe(),
            tolerances: plan.tolerances,
            clamped_lookups,
        }),
    })
}

/// Closed-form count for constant Q and no guard band:
/// `1 + floor(ln(f_max/f_min) / ln((2Q+1)/(2Q-1)))`.
///
/// The log ratio is widened by the same relative band-edge tolerance the
/// allocator applies to `f_max`.
pub fn constant_q_count(f_min: f64, f_max: f64, q: f64) -> Result<usize> {
    ensure_positive("f_min", f_min)?;
    ensure_positive("f_max", f_max)?;
    if !(q.is_finite() && q > MIN_Q) {
        return Err(domain(format!("Q = {q} is not above {MIN_Q}")));
    }
    if f_min >= f_max {
        return Err(domain(format!("band [{f_min}, {f_max}] Hz is empty")));
    }
    let step = (2.0 / (2.0 * q - 1.0)).ln_1p();
    let span = (f_max / f_min).ln() + BAND_EDGE_RTOL;
    Ok(1 + (span / step).floor() as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Inductance,
    GuardBand,
    LossMargin,
    FMax,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::Inductance => "inductance",
            SweepParam::GuardBand => "guard_band",
            SweepParam::LossMargin => "loss_margin",
            SweepParam::FMax => "f_max",
        }
    }

    fn apply(self, base: &BandPlan, value: f64) -> BandPlan {
        let mut plan = base.clone();
        match self {
            SweepParam::Inductance => plan.inductance = value,
            SweepParam::GuardBand => plan.guard_band = value,
            SweepParam::LossMargin => plan.loss_margin = value,
            SweepParam::FMax => plan.f_max = value,
        }
        plan
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: Result<AllocationPlan>,
}

impl SweepRow {
    pub fn count(&self) -> Option<usize> {
        self.outcome.as_ref().ok().map(|p| p.count)
    }
}

/// Runs [`allocate`] once per value; rows keep input order. A failed row
/// carries its error and does not stop the sweep.
pub fn sweep(base: &BandPlan, param: SweepParam, values: &[f64]) -> Result<Vec<SweepRow>> {
    if values.is_empty() {
        return Err(Error::InsufficientData(
            "sweep needs at least one value".into(),
        ));
    }
    Ok(values
        .par_iter()
        .map(|&value| SweepRow {
            value,
            outcome: allocate(&param.apply(base, value)),
        })
        .collect())
}

/// Delimited text `param_value,count`; an `error` column is added when any
/// row failed.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let any_failed = rows.iter().any(|r| r.outcome.is_err());
    let mut out = String::from(if any_failed {
        "param_value,count,error\n"
    } else {
        "param_value,count\n"
    });
    for row in rows {
        match &row.outcome {
            Ok(plan) if any_failed => out.push_str(&format!("{},{},\n", row.value, plan.count)),
            Ok(plan) => out.push_str(&format!("{},{}\n", row.value, plan.count)),
            Err(e) => {
                let msg = e.to_string().replace([',', '\n'], ";");
                out.push_str(&format!("{},,{}\n", row.value, msg));
            }
        }
    }
    out
}
