//! Planning and analysis of frequency-selective LC resonator networks.
//!
//! * [`resonance`]: closed-form LC math and the normalized bandpass response.
//! * [`loss`]: tabulated frequency-dependent losses and loss composition.
//! * [`allocator`]: greedy guard-banded packing of resonators into a band.
//! * [`selectivity`]: trigger bands, cross-triggering and the charge/trigger cycle.

pub mod allocator;
pub mod error;
pub mod loss;
pub mod resonance;
pub mod selectivity;

pub use allocator::{
    allocate, constant_q_count, next_center, sweep, AllocationEntry, AllocationPlan, BandPlan,
    LossModel, SweepParam, SweepRow, Tolerances,
};
pub use error::{Error, Result};
pub use loss::{composite_rs, LossComponents, LossKind, LossTable};
pub use resonance::{
    capacitance_for, effective_q, half_power_bandwidth, measured_bandwidth, mutual_inductance,
    normalized_response, resonant_frequency, series_q, stored_energy, CouplingLink, EnergyState,
    QualityFactor, ResonatorSpec, ResponseCurve, HALF_POWER,
};
pub use selectivity::{
    overlaps, run_cycle, trigger_band, triggered_set, CycleState, CycleTrace, Device, Segment,
    Tank, TriggerBand,
};
