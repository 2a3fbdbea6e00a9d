//! Command-line front-end.
//!
//! Exit codes: 0 success, 1 usage, 2 parse, 3 convergence or failed sweep
//! run, 4 design domain, 5 file I/O.

mod config;
mod report;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use thiserror::Error;

pub use config::{FileConfig, DEFAULT_PRECISION, OUT_DIR_ENV, RUN_KEYS};
pub use report::{Delta, Report, HAZARD_MARGIN};

use crate::design::{
    fit_square_law, off_time, solve_rc_for_off_time, vgs_window_guarded, DesignError, DeviceSafetySpec, FreeParam,
    OffTimeParams, DEFAULT_GUARD_FRACTION,
};
use crate::devices::MosfetModel;
use crate::netlist::units::parse_number;
use crate::netlist::{elaborate, parse, NetlistError};
use crate::seltb::{run_scenario, Preset, SelBenchParams, SelError, PARAM_KEYS};
use crate::solver::{operating_point_waveforms, transient, SolverConfig, SolverError, Waveforms};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_DOMAIN: i32 = 4;
pub const EXIT_IO: i32 = 5;

const DEFAULT_FIRE_AT: f64 = 1e-3;
const DEFAULT_SEL_TSTOP: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Convergence(String),
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Parse(_) => EXIT_PARSE,
            CliError::Convergence(_) => EXIT_CONVERGENCE,
            CliError::Domain(_) => EXIT_DOMAIN,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl From<NetlistError> for CliError {
    fn from(e: NetlistError) -> Self {
        CliError::Parse(e.to_string())
    }
}

impl From<SolverError> for CliError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::InvalidConfig(m) => CliError::Usage(m),
            other => CliError::Convergence(other.to_string()),
        }
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        CliError::Domain(e.to_string())
    }
}

impl From<SelError> for CliError {
    fn from(e: SelError) -> Self {
        match e {
            SelError::Netlist(n) => n.into(),
            SelError::Solver(s) => s.into(),
            SelError::Design(d) => d.into(),
            SelError::UnknownParam(_) | SelError::UnknownPreset(_) => CliError::Usage(e.to_string()),
            SelError::InvalidParams(_) => CliError::Domain(e.to_string()),
            SelError::SignalMissing(_) => CliError::Convergence(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn number(s: &str) -> Result<f64, String> {
    parse_number(s).ok_or_else(|| format!("bad number `{s}`"))
}

fn key_value(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected key=value, got `{s}`"))?;
    Ok((k.trim().to_ascii_lowercase(), number(v.trim())?))
}

fn fit_point(s: &str) -> Result<(f64, f64), String> {
    let (v, i) = s
        .split_once(':')
        .ok_or_else(|| format!("expected vgs:current, got `{s}`"))?;
    Ok((number(v)?, number(i)?))
}

#[derive(Debug, Parser)]
#[command(
    name = "latchsim",
    version,
    about = "Latchup current-limiter and power-cycle circuit simulator"
)]
struct Cli {
    /// Flat key = value configuration file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory (default: config out_dir, then $LATCHSIM_OUT_DIR, then .).
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Significant digits in CSV and reports.
    #[arg(long, global = true)]
    precision: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a netlist and write its waveforms as CSV.
    Simulate {
        netlist: PathBuf,
        /// Stop time; 0 writes the operating point only. Defaults to the netlist's .tran.
        #[arg(long, value_parser = number)]
        tstop: Option<f64>,
        /// Largest allowed timestep.
        #[arg(long, value_parser = number)]
        tstep_max: Option<f64>,
        /// Override a .param value.
        #[arg(long = "param", value_name = "NAME=VALUE", value_parser = key_value)]
        params: Vec<(String, f64)>,
        /// CSV path (default: <out-dir>/<netlist stem>.csv).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a latchup bench scenario and report it against the closed forms.
    Sel(ScenarioArgs),
    /// Run one scenario per value of a bench parameter.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Bench parameter to vary.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Closed-form design calculators.
    #[command(subcommand)]
    Design(DesignCommand),
}

#[derive(Debug, Args)]
struct ScenarioArgs {
    /// vgs5, vgs4, vgs3, vgs2p5 or unprotected.
    #[arg(long)]
    preset: Option<String>,
    /// Latchup trigger time; repeat for several.
    #[arg(long = "fire-at", value_parser = number)]
    fire_at: Vec<f64>,
    #[arg(long, value_parser = number)]
    tstop: Option<f64>,
    #[arg(long, value_parser = number)]
    tstep_max: Option<f64>,
    /// Bench parameter override.
    #[arg(long = "set", value_name = "KEY=VALUE", value_parser = key_value)]
    set: Vec<(String, f64)>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Transconductance parameter K (A/V²).
    #[arg(long, value_parser = number)]
    k: Option<f64>,
    /// Threshold at 25 °C (V).
    #[arg(long, value_parser = number)]
    vt0: Option<f64>,
    /// Threshold temperature coefficient (V/°C).
    #[arg(long, value_parser = number, allow_hyphen_values = true)]
    vt_tempco: Option<f64>,
}

impl ModelArgs {
    fn model(&self) -> MosfetModel {
        let mut m = MosfetModel::fitted_2n7000();
        if let Some(k) = self.k {
            m.k_gain = k;
        }
        if let Some(v) = self.vt0 {
            m.vt0 = v;
        }
        if let Some(v) = self.vt_tempco {
            m.vt_tempco = v;
        }
        m
    }
}

#[derive(Debug, Args)]
struct OffTimeArgs {
    #[arg(long, value_parser = number)]
    r1: Option<f64>,
    #[arg(long, value_parser = number)]
    c1: Option<f64>,
    /// Peak C1 voltage.
    #[arg(long, value_parser = number)]
    vo: Option<f64>,
    /// Q3 threshold.
    #[arg(long, value_parser = number)]
    vtq3: Option<f64>,
    #[arg(long, value_parser = number)]
    r2: Option<f64>,
    #[arg(long, value_parser = number)]
    c2: Option<f64>,
    #[arg(long, value_parser = number)]
    vdd: Option<f64>,
    #[arg(long, value_parser = number)]
    vref2: Option<f64>,
}

impl OffTimeArgs {
    fn params(&self) -> OffTimeParams {
        let d = OffTimeParams::reference();
        OffTimeParams {
            r1: self.r1.unwrap_or(d.r1),
            c1: self.c1.unwrap_or(d.c1),
            v_o: self.vo.unwrap_or(d.v_o),
            vt_q3: self.vtq3.unwrap_or(d.vt_q3),
            r2: self.r2.unwrap_or(d.r2),
            c2: self.c2.unwrap_or(d.c2),
            vdd: self.vdd.unwrap_or(d.vdd),
            vref2: self.vref2.unwrap_or(d.vref2),
        }
    }
}

#[derive(Debug, Subcommand)]
enum DesignCommand {
    /// Safe gate-drive window over a temperature range.
    Window {
        #[command(flatten)]
        model: ModelArgs,
        /// Maximum normal operating current.
        #[arg(long, value_parser = number)]
        i_op: f64,
        /// Absolute maximum current.
        #[arg(long, value_parser = number)]
        i_max: f64,
        #[arg(long, value_parser = number, allow_hyphen_values = true, default_value = "25")]
        t_min: f64,
        #[arg(long, value_parser = number, allow_hyphen_values = true, default_value = "25")]
        t_max: f64,
        /// Guard band as a fraction of the window width.
        #[arg(long, value_parser = number)]
        guard: Option<f64>,
    },
    /// Power-cycle off-time from the timer values.
    Offtime(OffTimeArgs),
    /// Solve one R or C for a target off-time.
    SizeRc {
        #[arg(long, value_parser = number)]
        target: f64,
        /// r1, c1, r2 or c2.
        #[arg(long)]
        free: String,
        #[command(flatten)]
        fixed: OffTimeArgs,
    },
    /// Fit K and V_T to measured limit currents.
    Fit {
        /// Measured point as vgs:current, e.g. 5:450m; repeat.
        #[arg(long = "point", value_parser = fit_point)]
        points: Vec<(f64, f64)>,
    },
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

struct Context {
    file: FileConfig,
    out_dir: PathBuf,
    precision: usize,
}

impl Context {
    fn output(&self, name: &str) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.out_dir).map_err(|e| io_err(&self.out_dir, e))?;
        Ok(self.out_dir.join(name))
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32, CliError> {
    let file = match &cli.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let ctx = Context {
        out_dir: config::resolve_out_dir(cli.out_dir.as_deref(), &file),
        precision: config::resolve_precision(cli.precision, &file)?,
        file,
    };
    match cli.command {
        Command::Simulate {
            netlist,
            tstop,
            tstep_max,
            params,
            out: path,
        } => cmd_simulate(&ctx, &netlist, tstop, tstep_max, &params, path, out),
        Command::Sel(args) => cmd_sel(&ctx, &args, out),
        Command::Sweep {
            scenario,
            param,
            values,
        } => cmd_sweep(&ctx, &scenario, &param, &values, out),
        Command::Design(d) => cmd_design(&ctx, d, out),
    }
}

fn write_waves(path: &Path, waves: &Waveforms, digits: usize) -> Result<(), CliError> {
    let f = File::create(path).map_err(|e| io_err(path, e))?;
    waves
        .write_csv_digits(BufWriter::new(f), digits)
        .map_err(|e| io_err(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| io_err(path, e))
}

fn say(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Io(format!("stdout: {e}")))
}

fn cmd_simulate(
    ctx: &Context,
    netlist: &Path,
    tstop: Option<f64>,
    tstep_max: Option<f64>,
    params: &[(String, f64)],
    path: Option<PathBuf>,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let text = fs::read_to_string(netlist).map_err(|e| io_err(netlist, e))?;
    let desc = parse(&text).map_err(|e| CliError::Parse(format!("{}: {e}", netlist.display())))?;
    let overrides: BTreeMap<String, f64> = params.iter().cloned().collect();
    let circuit = elaborate(&desc, &overrides).map_err(|e| CliError::Parse(format!("{}: {e}", netlist.display())))?;

    let mut solver = ctx.file.solver()?;
    let tstop = match tstop.or(ctx.file.number("tstop")?) {
        Some(t) => t,
        None => circuit
            .tran
            .map(|t| t.tstop)
            .ok_or_else(|| CliError::Usage("no --tstop given and the netlist has no .tran".into()))?,
    };
    if let Some(h) = tstep_max.or(circuit.tran.and_then(|t| t.tmax)) {
        solver.h_max = Some(h);
    }
    if !(tstop >= 0.0 && tstop.is_finite()) {
        return Err(CliError::Usage(format!("--tstop must be non-negative, got {tstop}")));
    }
    let waves = if tstop == 0.0 {
        operating_point_waveforms(&circuit, &solver)?
    } else {
        transient(&circuit, tstop, &solver, &[])?
    };
    let path = match path {
        Some(p) => p,
        None => {
            let stem = netlist.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
            ctx.output(&format!("{stem}.csv"))?
        }
    };
    write_waves(&path, &waves, ctx.precision)?;
    say(
        out,
        &format!(
            "wrote {} ({} rows, {} signals)\n",
            path.display(),
            waves.len(),
            waves.signal_names().len()
        ),
    )?;
    Ok(0)
}

/// Fully resolved inputs of one bench run.
struct Scenario {
    preset: Preset,
    params: SelBenchParams,
    tstop: f64,
    solver: SolverConfig,
}

fn resolve_scenario(ctx: &Context, args: &ScenarioArgs) -> Result<Scenario, CliError> {
    let preset_name = args.preset.as_deref().or(ctx.file.get("preset")).unwrap_or("vgs5");
    let preset = Preset::parse(preset_name)?;
    let mut params = preset.params();
    for (k, v) in ctx.file.bench_values()? {
        params.set(&k, v)?;
    }
    for (k, v) in &args.set {
        params.set(k, *v)?;
    }
    let fires = if !args.fire_at.is_empty() {
        args.fire_at.clone()
    } else {
        vec![ctx.file.number("fire_at")?.unwrap_or(DEFAULT_FIRE_AT)]
    };
    for t in fires {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(CliError::Usage(format!("--fire-at must be non-negative, got {t}")));
        }
        params.inject_sel(t);
    }
    let tstop = match args.tstop {
        Some(t) => t,
        None => ctx.file.number("tstop")?.unwrap_or(DEFAULT_SEL_TSTOP),
    };
    if !(tstop > 0.0 && tstop.is_finite()) {
        return Err(CliError::Usage(format!("--tstop must be positive, got {tstop}")));
    }
    let mut solver = ctx.file.solver()?;
    if let Some(h) = args.tstep_max {
        solver.h_max = Some(h);
    }
    Ok(Scenario {
        preset,
        params,
        tstop,
        solver,
    })
}

/// Runs one scenario and writes `<stem>.csv` and `<stem>.report`.
fn run_and_write(ctx: &Context, s: &Scenario, stem: &str) -> Result<Report, CliError> {
    let r = run_scenario(&s.params, s.preset.protected(), s.tstop, &s.solver)?;
    let report = Report::new(s.preset.name(), &s.params, r.measurements);
    write_waves(&ctx.output(&format!("{stem}.csv"))?, &r.waves, ctx.precision)?;
    write_text(&ctx.output(&format!("{stem}.report"))?, &report.render(ctx.precision))?;
    Ok(report)
}

fn cmd_sel(ctx: &Context, args: &ScenarioArgs, out: &mut dyn Write) -> Result<i32, CliError> {
    let s = resolve_scenario(ctx, args)?;
    let report = run_and_write(ctx, &s, s.preset.name())?;
    say(out, &report.render(ctx.precision))?;
    Ok(0)
}

fn cmd_sweep(
    ctx: &Context,
    args: &ScenarioArgs,
    param: &str,
    values: &str,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    let param = param.to_ascii_lowercase();
    if !PARAM_KEYS.contains(&param.as_str()) {
        return Err(CliError::Usage(format!("unknown bench parameter `{param}`")));
    }
    let values: Vec<f64> = values
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| number(v).map_err(CliError::Usage))
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(CliError::Usage("--values lists no values".into()));
    }
    let base = resolve_scenario(ctx, args)?;
    let stem = |k: usize| format!("{}_{param}_{k}", base.preset.name());

    let results: Vec<Result<Report, CliError>> = values
        .par_iter()
        .enumerate()
        .map(|(k, &v)| {
            let mut params = base.params.clone();
            params.set(&param, v)?;
            let s = Scenario {
                params,
                solver: base.solver.clone(),
                ..base
            };
            run_and_write(ctx, &s, &stem(k))
        })
        .collect();

    let p = ctx.precision - 1;
    let cell = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.p$e}"));
    let path = ctx.output(&format!("{}_sweep_{param}.csv", base.preset.name()))?;
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut table = String::from("value,i_limited,t_off,t_detect,status\n");
    let header = ["value", "i_limited", "t_off", "t_detect", "status"];
    let csv_err = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
    w.write_record(header).map_err(csv_err)?;
    let mut failed = 0;
    for (v, r) in values.iter().zip(&results) {
        let row = match r {
            Ok(rep) => {
                let m = &rep.measurements;
                [
                    cell(Some(*v)),
                    cell(m.i_limited),
                    cell(m.t_off),
                    cell(m.t_detect),
                    "ok".to_string(),
                ]
            }
            Err(e) => {
                failed += 1;
                [
                    cell(Some(*v)),
                    String::new(),
                    String::new(),
                    String::new(),
                    format!("error: {e}"),
                ]
            }
        };
        table.push_str(&row.join(","));
        table.push('\n');
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_err(&path, e))?;
    say(out, &table)?;
    say(out, &format!("wrote {}\n", path.display()))?;
    Ok(if failed > 0 { EXIT_CONVERGENCE } else { 0 })
}

fn kv(s: &mut String, k: &str, v: String) {
    s.push_str(k);
    s.push('=');
    s.push_str(&v);
    s.push('\n');
}

fn ms(v: f64, decimals: usize) -> String {
    format!("{:.decimals$}ms", v * 1e3)
}

fn cmd_design(ctx: &Context, cmd: DesignCommand, out: &mut dyn Write) -> Result<i32, CliError> {
    let p = ctx.precision - 1;
    let num = |v: f64| format!("{v:.p$e}");
    let mut s = String::new();
    match cmd {
        DesignCommand::Window {
            model,
            i_op,
            i_max,
            t_min,
            t_max,
            guard,
        } => {
            let spec = DeviceSafetySpec {
                i_op,
                i_max,
                t_min,
                t_max,
            };
            let w = vgs_window_guarded(&model.model(), &spec, guard.unwrap_or(DEFAULT_GUARD_FRACTION))?;
            kv(&mut s, "lo", num(w.lo));
            kv(&mut s, "hi", num(w.hi));
            kv(&mut s, "feasible", w.feasible.to_string());
            kv(&mut s, "vt_max", num(w.vt_max));
            kv(&mut s, "vt_min", num(w.vt_min));
            if let Some((a, b)) = w.guarded {
                kv(&mut s, "guarded_lo", num(a));
                kv(&mut s, "guarded_hi", num(b));
            }
            if !w.feasible {
                kv(&mut s, "shortfall", num(w.shortfall));
                kv(&mut s, "i_max_needed", num(w.i_max_needed));
                kv(
                    &mut s,
                    "vt_spread_allowed",
                    w.vt_spread_allowed.map_or_else(|| "none".to_string(), num),
                );
                kv(
                    &mut s,
                    "diagnostic",
                    format!(
                        "no gate drive satisfies both bounds; raise i_max to {} A or narrow the threshold spread from {} V to below {} V",
                        num(w.i_max_needed),
                        num(w.vt_max - w.vt_min),
                        w.vt_spread_allowed.map_or_else(|| "0".to_string(), num)
                    ),
                );
            }
        }
        DesignCommand::Offtime(args) => {
            let b = off_time(&args.params())?;
            s.push_str(&format!(
                "total={} t1={} t2={}\n",
                ms(b.total, 3),
                ms(b.t1, 2),
                ms(b.t2, 2)
            ));
            kv(&mut s, "total_s", num(b.total));
            kv(&mut s, "t1_s", num(b.t1));
            kv(&mut s, "t2_s", num(b.t2));
        }
        DesignCommand::SizeRc { target, free, fixed } => {
            let which = FreeParam::parse(&free)
                .ok_or_else(|| CliError::Usage(format!("--free must be r1, c1, r2 or c2, got `{free}`")))?;
            let fixed = fixed.params();
            let v = solve_rc_for_off_time(target, &fixed, which)?;
            kv(&mut s, &free.to_ascii_lowercase(), num(v));
            let mut check = fixed;
            match which {
                FreeParam::R1 => check.r1 = v,
                FreeParam::C1 => check.c1 = v,
                FreeParam::R2 => check.r2 = v,
                FreeParam::C2 => check.c2 = v,
            }
            kv(&mut s, "total_s", num(off_time(&check)?.total));
        }
        DesignCommand::Fit { points } => {
            let fit = fit_square_law(&points)?;
            kv(&mut s, "k", num(fit.k_gain));
            kv(&mut s, "vt0", num(fit.vt0));
            kv(&mut s, "rms_residual", num(fit.rms_residual));
            for ((vgs, i), r) in points.iter().zip(&fit.residuals) {
                kv(
                    &mut s,
                    "point",
                    format!(
                        "vgs={} measured={} predicted={} residual={}",
                        num(*vgs),
                        num(*i),
                        num(fit.predict(*vgs)),
                        num(*r)
                    ),
                );
            }
        }
    }
    say(out, &s)?;
    Ok(0)
}
