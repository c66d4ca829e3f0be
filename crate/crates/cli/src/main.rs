//! `lcnet`: command-line front end for resonator allocation and selectivity
//! analysis.
//!
//! Exit codes: 0 success, 1 computation or input error, 2 usage error.

mod units;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, bail, Context, Result};
use clap::error::ErrorKind;
use clap::{ArgGroup, CommandFactory, Parser, Subcommand, ValueEnum};
use lcnet::allocator::{
    allocate, sweep, sweep_csv, AllocationPlan, BandPlan, LossModel, SweepParam,
};
use lcnet::loss::LossTable;
use lcnet::resonance::normalized_response;
use lcnet::selectivity::{
    bands_csv, default_trigger_grid, linear_grid, max_simultaneous, overlaps, overlaps_csv,
    read_devices, run_cycle, trigger_band, Device, Segment,
};
use units::Unit;

#[derive(Parser)]
#[command(
    name = "lcnet",
    version,
    about = "Plan and analyze frequency-selective LC resonator networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Param {
    Inductance,
    Guard,
    Margin,
    Fmax,
}

impl Param {
    fn sweep_param(self) -> SweepParam {
        match self {
            Param::Inductance => SweepParam::Inductance,
            Param::Guard => SweepParam::GuardBand,
            Param::Margin => SweepParam::LossMargin,
            Param::Fmax => SweepParam::FMax,
        }
    }

    fn parse_value(self, s: &str) -> Result<f64, String> {
        match self {
            Param::Inductance => units::henry(s),
            Param::Guard | Param::Fmax => units::hertz(s),
            Param::Margin => units::ohm(s),
        }
    }
}

/// Band, inductance and loss source shared by `allocate` and `sweep`.
#[derive(clap::Args)]
#[command(group(ArgGroup::new("loss").required(true).args(["loss_table", "const_q"])))]
struct PlanArgs {
    /// Allocation band LO:HI, e.g. 100kHz:1MHz
    #[arg(long, value_parser = units::band)]
    band: (f64, f64),

    /// Resonator inductance shared by every tank
    #[arg(long, default_value = "10uH", value_parser = units::henry)]
    inductance: f64,

    /// Loss table file (frequency_hz,q or frequency_hz,rs_ohm)
    #[arg(long)]
    loss_table: Option<PathBuf>,

    /// Inductance a Q table was measured at [default: --inductance]
    #[arg(long, value_parser = units::henry, requires = "loss_table")]
    table_inductance: Option<f64>,

    /// Constant unloaded Q at every frequency
    #[arg(long)]
    const_q: Option<f64>,

    /// Guard band e_f between adjacent half-power intervals
    #[arg(long, default_value = "0", value_parser = units::hertz)]
    guard: f64,

    /// Extra series resistance e_s added to every tank
    #[arg(long, default_value = "0", value_parser = units::ohm)]
    margin: f64,
}

impl PlanArgs {
    fn band_plan(&self) -> Result<BandPlan> {
        let loss = match (&self.loss_table, self.const_q) {
            (Some(path), _) => {
                let ref_l = self.table_inductance.unwrap_or(self.inductance);
                let table = LossTable::load(path, Some(ref_l))
                    .with_context(|| format!("loss table {}", path.display()))?;
                LossModel::Table(Arc::new(table))
            }
            (None, Some(q)) => LossModel::ConstantQ(q),
            (None, None) => unreachable!("clap enforces a loss source"),
        };
        let plan = BandPlan::new(self.band.0, self.band.1, self.inductance, loss)
            .with_guard_band(self.guard)
            .with_loss_margin(self.margin);
        plan.validate()?;
        Ok(plan)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Pack the maximum number of resonators into a band
    Allocate {
        #[command(flatten)]
        plan: PlanArgs,

        /// Where to write the allocation plan
        #[arg(long)]
        out: Option<PathBuf>,

        #[arg(long, value_enum, default_value = "json")]
        format: Format,
    },

    /// Resonator count as one plan parameter varies
    Sweep {
        #[command(flatten)]
        plan: PlanArgs,

        #[arg(long, value_enum)]
        param: Param,

        /// Comma-separated values, with units, e.g. 10uH,4.7uH,1uH
        #[arg(long, required = true, num_args = 1.., value_delimiter = ',')]
        values: Vec<String>,

        /// Output CSV path [default: standard output]
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Sample normalized response curves on a grid
    #[command(group(ArgGroup::new("source").required(true).args(["plan", "resonator", "devices"])))]
    Response {
        /// Allocation plan JSON written by `allocate`
        #[arg(long)]
        plan: Option<PathBuf>,

        /// Explicit resonator F0:Q, repeatable
        #[arg(long, value_parser = units::resonator)]
        resonator: Vec<(f64, f64)>,

        /// Device set JSON; charger tanks first, then trigger tanks
        #[arg(long)]
        devices: Option<PathBuf>,

        /// Frequency grid START:STOP:STEP
        #[arg(long, value_parser = units::grid)]
        grid: (f64, f64, f64),

        /// Output CSV path [default: standard output]
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Trigger bands, pairwise overlaps and a selectivity verdict
    Triggers {
        /// Device set JSON
        #[arg(long)]
        devices: PathBuf,

        /// Frequency grid START:STOP:STEP [default: five bandwidths around every trigger tank]
        #[arg(long, value_parser = units::grid)]
        grid: Option<(f64, f64, f64)>,

        /// Step of the default grid
        #[arg(long, default_value = "1kHz", value_parser = units::hertz, conflicts_with = "grid")]
        step: f64,

        /// Trigger threshold on the normalized response, overriding the device file
        #[arg(long)]
        threshold: Option<f64>,

        #[arg(long)]
        bands_out: Option<PathBuf>,

        #[arg(long)]
        overlaps_out: Option<PathBuf>,

        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },

    /// Simulate a device's charge bank under an excitation schedule
    Cycle {
        /// Device set JSON
        #[arg(long)]
        devices: PathBuf,

        /// Device label [default: the only device in the file]
        #[arg(long)]
        device: Option<String>,

        /// Segments DURATION@TARGET, comma-separated. TARGET is `charger`,
        /// `trigger` or a frequency, e.g. 1s@charger,1s@trigger
        #[arg(long)]
        schedule: String,

        /// Power delivered to the bank while charging
        #[arg(long, value_parser = units::watt)]
        power: f64,

        /// Sampling interval of the trace
        #[arg(long, default_value = "10ms", value_parser = units::second)]
        step: f64,

        /// Output path [default: standard output]
        #[arg(long)]
        out: Option<PathBuf>,

        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Allocate { plan, out, format } => cmd_allocate(&plan, out.as_deref(), format),
        Command::Sweep {
            plan,
            param,
            values,
            out,
        } => cmd_sweep(&plan, param, &values, out.as_deref()),
        Command::Response {
            plan,
            resonator,
            devices,
            grid,
            out,
        } => cmd_response(
            plan.as_deref(),
            resonator,
            devices.as_deref(),
            grid,
            out.as_deref(),
        ),
        Command::Triggers {
            devices,
            grid,
            step,
            threshold,
            bands_out,
            overlaps_out,
            format,
        } => cmd_triggers(
            &devices,
            grid,
            step,
            threshold,
            bands_out.as_deref(),
            overlaps_out.as_deref(),
            format,
        ),
        Command::Cycle {
            devices,
            device,
            schedule,
            power,
            step,
            out,
            format,
        } => cmd_cycle(
            &devices,
            device.as_deref(),
            &schedule,
            power,
            step,
            out.as_deref(),
            format,
        ),
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn plan_csv(plan: &AllocationPlan) -> String {
    let mut out = String::from("i,f0_hz,c_farad,bw_hz,lo_hz,hi_hz\n");
    for e in &plan.entries {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            e.index, e.center, e.capacitance, e.bandwidth, e.band_lo, e.band_hi
        );
    }
    out
}

fn cmd_allocate(args: &PlanArgs, out: Option<&Path>, format: Format) -> Result<ExitCode> {
    let plan = allocate(&args.band_plan()?)?;
    let hz = |v| units::format(v, Unit::Hertz);
    println!("N = {}", plan.count);
    println!(
        "band {} to {}, L = {}, guard {}, margin {}",
        hz(plan.band.f_min_hz),
        hz(plan.band.f_max_hz),
        units::format(plan.band.inductance_h, Unit::Henry),
        hz(plan.band.guard_hz),
        units::format(plan.band.margin_ohm, Unit::Ohm)
    );
    if let (Some(first), Some(last)) = (plan.entries.first(), plan.entries.last()) {
        println!(
            "centers {} to {}, bandwidths {} to {}, capacitors {} to {}",
            hz(first.center),
            hz(last.center),
            hz(first.bandwidth),
            hz(last.bandwidth),
            units::format(first.capacitance, Unit::Farad),
            units::format(last.capacitance, Unit::Farad)
        );
    }
    if let Some(meta) = &plan.meta {
        println!("loss model {}", meta.loss_model);
        if meta.clamped_lookups > 0 {
            eprintln!(
                "warning: {} loss lookups fell outside the table and were clamped",
                meta.clamped_lookups
            );
        }
    }
    if let Some(path) = out {
        let text = match format {
            Format::Json => {
                let mut s = plan.to_json();
                s.push('\n');
                s
            }
            Format::Csv => plan_csv(&plan),
        };
        write_output(Some(path), &text)?;
        println!("plan written to {}", path.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(
    args: &PlanArgs,
    param: Param,
    values: &[String],
    out: Option<&Path>,
) -> Result<ExitCode> {
    let values = match values
        .iter()
        .map(|v| param.parse_value(v))
        .collect::<Result<Vec<f64>, _>>()
    {
        Ok(v) => v,
        // a malformed or empty value list is a usage error, like any bad flag
        Err(e) => {
            let mut cmd = Cli::command();
            let sub = cmd.find_subcommand_mut("sweep").expect("sweep subcommand");
            sub.error(ErrorKind::InvalidValue, format!("invalid --values: {e}"))
                .exit()
        }
    };
    let base = args.band_plan()?;
    let rows = sweep(&base, param.sweep_param(), &values)?;
    write_output(out, &sweep_csv(&rows))?;
    let failed = rows.iter().filter(|r| r.outcome.is_err()).count();
    if failed > 0 {
        eprintln!("warning: {failed} of {} sweep rows failed", rows.len());
    }
    Ok(if failed == rows.len() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn load_devices(path: &Path) -> Result<Vec<Device>> {
    let file = fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    read_devices(file).with_context(|| format!("device set {}", path.display()))
}

fn cmd_response(
    plan: Option<&Path>,
    explicit: Vec<(f64, f64)>,
    devices: Option<&Path>,
    (start, stop, step): (f64, f64, f64),
    out: Option<&Path>,
) -> Result<ExitCode> {
    let resonators: Vec<(f64, f64)> = if let Some(path) = plan {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let plan =
            AllocationPlan::from_json(&text).with_context(|| format!("plan {}", path.display()))?;
        plan.entries.iter().map(|e| (e.center, e.q())).collect()
    } else if let Some(path) = devices {
        let devices = load_devices(path)?;
        let chargers = devices.iter().map(|d| d.charger());
        let triggers = devices.iter().map(|d| d.trigger());
        chargers
            .chain(triggers)
            .map(|t| (t.f0(), t.q().value()))
            .collect()
    } else {
        explicit
    };
    if resonators.is_empty() {
        bail!("no resonators to sample");
    }
    let grid = linear_grid(start, stop, step)?;
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    if !resonators.iter().any(|&(f0, _)| (lo..=hi).contains(&f0)) {
        eprintln!("warning: grid {lo} to {hi} Hz covers no resonance; nothing written");
        return write_output(out, "").map(|_| ExitCode::SUCCESS);
    }

    let mut text = String::from("resonator_index,frequency_hz,magnitude\n");
    for (i, &(f0, q)) in resonators.iter().enumerate() {
        for &f in &grid {
            let m = normalized_response(f, f0, q)
                .with_context(|| format!("resonator {} ({f0} Hz, Q = {q})", i + 1))?;
            let _ = writeln!(text, "{},{f},{m}", i + 1);
        }
    }
    write_output(out, &text)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_triggers(
    path: &Path,
    grid: Option<(f64, f64, f64)>,
    step: f64,
    threshold: Option<f64>,
    bands_out: Option<&Path>,
    overlaps_out: Option<&Path>,
    format: Format,
) -> Result<ExitCode> {
    let mut devices = load_devices(path)?;
    if let Some(th) = threshold {
        devices = devices
            .into_iter()
            .map(|d| d.with_threshold(th))
            .collect::<lcnet::Result<_>>()?;
    }
    let grid = match grid {
        Some((start, stop, step)) => linear_grid(start, stop, step)?,
        None => default_trigger_grid(&devices, step)?,
    };
    let bands = devices
        .iter()
        .map(|d| trigger_band(d, &grid).with_context(|| format!("device {:?}", d.label())))
        .collect::<Result<Vec<_>>>()?;
    let pairs = overlaps(&bands);

    let hz = |v| units::format(v, Unit::Hertz);
    for b in &bands {
        println!(
            "{}: {} to {} (width {})",
            b.device_label,
            hz(b.lo),
            hz(b.hi),
            hz(b.width())
        );
    }
    if pairs.is_empty() {
        println!("no overlaps");
    }
    for o in &pairs {
        println!(
            "overlap {}: {} to {} (width {})",
            o.pair_label(),
            hz(o.lo),
            hz(o.hi),
            hz(o.width)
        );
    }
    let (max, at) = max_simultaneous(&devices, &grid);
    match at {
        Some(f) => println!("max simultaneous = {max} (first at {})", hz(f)),
        None => println!("max simultaneous = {max}"),
    }

    if let Some(p) = bands_out {
        let text = match format {
            Format::Csv => bands_csv(&bands),
            Format::Json => serde_json::to_string_pretty(&bands)? + "\n",
        };
        write_output(Some(p), &text)?;
    }
    if let Some(p) = overlaps_out {
        let text = match format {
            Format::Csv => overlaps_csv(&pairs),
            Format::Json => serde_json::to_string_pretty(&pairs)? + "\n",
        };
        write_output(Some(p), &text)?;
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_schedule(text: &str, device: &Device) -> Result<Vec<Segment>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|seg| {
            let (duration, target) = seg
                .split_once('@')
                .ok_or_else(|| anyhow!("schedule segment {seg:?} is not DURATION@TARGET"))?;
            let duration =
                units::second(duration).map_err(|e| anyhow!("schedule segment {seg:?}: {e}"))?;
            let excitation = match target.trim() {
                "charger" => device.charger().f0(),
                "trigger" => device.trigger().f0(),
                f => units::hertz(f).map_err(|e| anyhow!("schedule segment {seg:?}: {e}"))?,
            };
            Ok(Segment {
                duration,
                excitation,
            })
        })
        .collect()
}

fn cmd_cycle(
    path: &Path,
    label: Option<&str>,
    schedule: &str,
    power: f64,
    step: f64,
    out: Option<&Path>,
    format: Format,
) -> Result<ExitCode> {
    let devices = load_devices(path)?;
    let device = match label {
        Some(l) => devices
            .iter()
            .find(|d| d.label() == l)
            .ok_or_else(|| anyhow!("no device labelled {l:?} in {}", path.display()))?,
        None if devices.len() == 1 => &devices[0],
        None => bail!(
            "{} holds {} devices; pick one with --device",
            path.display(),
            devices.len()
        ),
    };
    let segments = parse_schedule(schedule, device)?;
    let trace = run_cycle(device, &segments, power, step)?;
    let text = match format {
        Format::Csv => trace.to_csv(),
        Format::Json => serde_json::to_string_pretty(&trace)? + "\n",
    };
    write_output(out, &text)?;
    if let Some(last) = trace.final_event() {
        let summary = format!(
            "{}: {} events, final state {} at {}, bank {} / {}",
            trace.device_label,
            trace.events.len(),
            last.state.name(),
            units::format(last.time, Unit::Second),
            units::format(last.bank_voltage, Unit::Volt),
            units::format(last.bank_energy, Unit::Joule)
        );
        // keep standard output clean when it carries the trace
        if out.is_some() {
            println!("{summary}");
        } else {
            eprintln!("{summary}");
        }
    }
    Ok(ExitCode::SUCCESS)
}
