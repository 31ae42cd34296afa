//! Batch front-end behind the `pendular` binary.
//!
//! Every run reads one TOML configuration, writes CSV files whose comment
//! header echoes that configuration, and drops simple SVG plots next to them.
//! Exit codes: 0 ok, 2 configuration, 3 numeric, 4 optimizer not converged.

use std::ffi::OsString;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{populations, Direction, Propagator, Pulse, StateVector};
use crate::error::{Error, Result};
use crate::mtoct::{self, Gate, OptimizationResult, OptimizerConfig, Reduction};
use crate::pair::{self, GridRange, Molecule, PairGeometry, PairSystem};
use crate::pendular::{self, RotorSpec};
use crate::plot::{self, Series};
use crate::units;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 4;

const LOCK_FILE: &str = ".pendular.lock";
const PLOT_POINTS: usize = 4000;

#[derive(Debug, Parser)]
#[command(
    name = "pendular",
    version,
    about = "Pendular-state molecular qubits: levels, pair couplings and optimal-control gates"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output directory, overriding the configuration.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Random seed, overriding the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// Fixed-order reductions for bit-reproducible results.
    #[arg(long, global = true)]
    pub strict_reduction: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Qubit levels and cosine elements of both sites.
    Levels,
    /// Pair Hamiltonian spectrum, frequency shift and default pulse length.
    PairInfo,
    /// Frequency-shift ratio over a grid of reduced fields.
    RatioMap,
    /// Optimize a gate pulse.
    Optimize {
        /// Gate name, overriding the configuration.
        #[arg(long)]
        gate: Option<String>,
    },
    /// Propagate an initial state under a stored pulse.
    Propagate {
        /// Pulse CSV (t_ns, E_kV_cm), overriding the configuration.
        #[arg(long)]
        pulse: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoleculeConfig {
    pub name: String,
    pub b_cm: f64,
    pub mu_debye: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldsConfig {
    pub epsilon1_kv_cm: f64,
    pub epsilon2_kv_cm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig {
    pub r12_nm: f64,
    pub alpha_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RangeConfig {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl From<RangeConfig> for GridRange {
    fn from(r: RangeConfig) -> Self {
        GridRange::new(r.start, r.stop, r.step)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatioMapConfig {
    pub x: RangeConfig,
    pub x_prime_minus_x: RangeConfig,
}

impl Default for RatioMapConfig {
    fn default() -> Self {
        RatioMapConfig {
            x: RangeConfig {
                start: 0.0,
                stop: 6.0,
                step: 0.25,
            },
            x_prime_minus_x: RangeConfig {
                start: 0.0,
                stop: 3.0,
                step: 0.25,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagateConfig {
    pub pulse: Option<PathBuf>,
    /// Amplitudes as (re, im) pairs on the qubit basis |00⟩, |01⟩, |10⟩,
    /// |11⟩, or on the full pair basis.
    pub initial_state: Option<Vec<[f64; 2]>>,
    /// Store every `stride`-th grid point.
    pub stride: usize,
}

impl Default for PropagateConfig {
    fn default() -> Self {
        PropagateConfig {
            pulse: None,
            initial_state: None,
            stride: 40,
        }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_levels() -> usize {
    2
}

fn default_tolerance() -> f64 {
    pendular::DEFAULT_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub gate: Option<Gate>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// Pendular levels kept per site; more than 2 models leakage.
    #[serde(default = "default_levels")]
    pub n_levels: usize,
    /// Basis-truncation tolerance of the pendular solver.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    pub molecule: MoleculeConfig,
    pub fields: FieldsConfig,
    pub geometry: GeometryConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub ratio_map: RatioMapConfig,
    #[serde(default)]
    pub propagate: PropagateConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.optimizer.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.rotor(self.fields.epsilon1_kv_cm)?;
        self.rotor(self.fields.epsilon2_kv_cm)?;
        self.geometry()?;
        self.optimizer.validate()?;
        if self.n_levels < 2 {
            return Err(Error::Config(format!(
                "n_levels must be at least 2, got {}",
                self.n_levels
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::Config("tolerance must be positive".into()));
        }
        if self.propagate.stride < 1 {
            return Err(Error::Config("propagate.stride must be at least 1".into()));
        }
        Ok(())
    }

    fn rotor(&self, epsilon: f64) -> Result<RotorSpec> {
        RotorSpec::new(self.molecule.b_cm, self.molecule.mu_debye, epsilon)
    }

    fn geometry(&self) -> Result<PairGeometry> {
        PairGeometry::new(self.geometry.r12_nm, self.geometry.alpha_deg)
    }

    pub fn molecule(&self) -> Molecule {
        Molecule {
            name: self.molecule.name.clone(),
            b_cm: self.molecule.b_cm,
            mu_debye: self.molecule.mu_debye,
        }
    }

    pub fn pair(&self) -> Result<PairSystem> {
        pair::pair_from_specs(
            &self.rotor(self.fields.epsilon1_kv_cm)?,
            &self.rotor(self.fields.epsilon2_kv_cm)?,
            self.geometry()?,
            &self.molecule.name,
            self.n_levels,
            self.tolerance,
        )
    }

    /// The configuration as TOML, for output headers.
    pub fn echo(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("<unserializable config: {e}>"))
    }
}

/// Removes its lock file when dropped.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(mut f) => {
                let _ = writeln!(f, "{}", std::process::id());
                Ok(OutputLock { path })
            }
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => Err(Error::Config(format!(
                "output directory {} is in use by another run (remove {} if stale)",
                dir.display(),
                path.display()
            ))),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

struct Output<'a> {
    dir: PathBuf,
    header: String,
    _lock: OutputLock,
    written: Vec<PathBuf>,
    cfg: &'a RunConfig,
}

impl Output<'_> {
    fn csv(
        &mut self,
        name: &str,
        columns: &[String],
        rows: impl IntoIterator<Item = Vec<f64>>,
    ) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = BufWriter::new(File::create(&path)?);
        w.write_all(self.header.as_bytes())?;
        let mut c = csv::Writer::from_writer(w);
        c.write_record(columns).map_err(io::Error::from)?;
        for row in rows {
            c.write_record(row.iter().map(|&v| number(v)))
                .map_err(io::Error::from)?;
        }
        c.flush()?;
        self.written.push(path);
        Ok(())
    }

    fn text(&mut self, name: &str, body: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, format!("{}{body}", self.header))?;
        self.written.push(path);
        Ok(())
    }

    /// Plot files are best-effort.
    fn plot(&mut self, name: &str, svg: String) {
        let path = self.dir.join(name);
        match fs::write(&path, svg) {
            Ok(()) => self.written.push(path),
            Err(e) => eprintln!("warning: could not write plot {}: {e}", path.display()),
        }
    }
}

fn number(v: f64) -> String {
    if v == 0.0 || (1e-4..1e9).contains(&v.abs()) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn header(cfg: &RunConfig, command: &str) -> String {
    let mut h = format!("# pendular {VERSION}\n# command: {command}\n");
    for line in cfg.echo().lines() {
        h.push_str("# ");
        h.push_str(line);
        h.push('\n');
    }
    h
}

/// Parses arguments and runs one command; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Runs a parsed command. `Ok` carries the exit code (0, or 4 for an
/// unconverged optimization whose files were still written).
pub fn execute(cli: &Cli) -> Result<i32> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Config("--config PATH is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(out) = &cli.out {
        cfg.output = out.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.optimizer.seed = seed;
    }
    if cli.strict_reduction {
        cfg.optimizer.reduction = Reduction::Strict;
    }
    if let Command::Optimize { gate: Some(g) } = &cli.command {
        cfg.gate = Some(g.parse()?);
    }
    if let Command::Propagate { pulse: Some(p) } = &cli.command {
        cfg.propagate.pulse = Some(p.clone());
    }
    let name = match cli.command {
        Command::Levels => "levels",
        Command::PairInfo => "pair-info",
        Command::RatioMap => "ratio-map",
        Command::Optimize { .. } => "optimize",
        Command::Propagate { .. } => "propagate",
    };
    let mut out = Output {
        dir: cfg.output.clone(),
        header: header(&cfg, name),
        _lock: OutputLock::acquire(&cfg.output)?,
        written: Vec::new(),
        cfg: &cfg,
    };
    let code = match cli.command {
        Command::Levels => cmd_levels(&mut out),
        Command::PairInfo => cmd_pair_info(&mut out),
        Command::RatioMap => cmd_ratio_map(&mut out),
        Command::Optimize { .. } => cmd_optimize(&mut out),
        Command::Propagate { .. } => cmd_propagate(&mut out),
    }?;
    for p in &out.written {
        println!("wrote {}", p.display());
    }
    Ok(code)
}

fn cmd_levels(out: &mut Output<'_>) -> Result<i32> {
    let cfg = out.cfg;
    let mut rows = Vec::new();
    for (site, eps) in [
        (1.0, cfg.fields.epsilon1_kv_cm),
        (2.0, cfg.fields.epsilon2_kv_cm),
    ] {
        let q = pendular::site_qubit(&cfg.rotor(eps)?, cfg.tolerance)?;
        rows.push(vec![
            site,
            eps,
            q.x,
            q.jmax_used as f64,
            q.w0_over_b,
            q.w1_over_b,
            q.c0,
            q.c1,
            q.cx,
        ]);
    }
    let columns = [
        "site",
        "epsilon_kV_cm",
        "x",
        "jmax",
        "w0_over_b",
        "w1_over_b",
        "c0",
        "c1",
        "cx",
    ];
    out.csv("levels.csv", &strings(&columns), rows)?;
    Ok(EXIT_OK)
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn basis_label(pair: &PairSystem, index: usize) -> String {
    let (_, n2) = pair.n_levels();
    format!("{}{}", index / n2, index % n2)
}

#[derive(Serialize)]
struct PairInfo {
    molecule: String,
    omega_alpha_over_b: f64,
    omega_alpha_mhz: f64,
    delta_omega_approx_mhz: f64,
    delta_omega_exact_mhz: Option<f64>,
    default_duration_ns: Option<f64>,
    site1_gap_mhz: f64,
    site2_gap_mhz: f64,
}

fn cmd_pair_info(out: &mut Output<'_>) -> Result<i32> {
    let pair = out.cfg.pair()?;
    let dw = pair.delta_omega_approx();
    let info = PairInfo {
        molecule: pair.molecule.name.clone(),
        omega_alpha_over_b: pair.omega_alpha_over_b,
        omega_alpha_mhz: units::to_megahertz(pair.omega_alpha()),
        delta_omega_approx_mhz: units::to_megahertz(dw),
        delta_omega_exact_mhz: pair.delta_omega_exact().ok().map(units::to_megahertz),
        default_duration_ns: mtoct::default_duration(dw).ok().map(units::to_nanoseconds),
        site1_gap_mhz: units::to_megahertz(pair.site1.gap_over_b() * pair.b()),
        site2_gap_mhz: units::to_megahertz(pair.site2.gap_over_b() * pair.b()),
    };
    let body = toml::to_string(&info).map_err(|e| Error::Numeric(e.to_string()))?;
    print!("{body}");
    out.text("pair_info.toml", &body)?;

    let h = pair.h_over_b.clone();
    let eig = nalgebra::SymmetricEigen::new(h);
    let mut levels: Vec<(f64, usize, f64)> = (0..pair.dim())
        .map(|k| {
            let v = eig.eigenvectors.column(k);
            let (idx, w) = v
                .iter()
                .map(|c| c * c)
                .enumerate()
                .fold((0, -1.0), |b, (i, w)| if w > b.1 { (i, w) } else { b });
            (eig.eigenvalues[k], idx, w)
        })
        .collect();
    levels.sort_by(|a, b| a.0.total_cmp(&b.0));
    let labels: Vec<String> = levels.iter().map(|l| basis_label(&pair, l.1)).collect();
    let rows = levels.iter().map(|&(e, idx, w)| vec![idx as f64, e, w]);
    out.csv(
        "pair_levels.csv",
        &strings(&["dominant_basis_index", "energy_over_b", "weight"]),
        rows,
    )?;
    println!("levels (ascending): {}", labels.join(", "));
    Ok(EXIT_OK)
}

fn cmd_ratio_map(out: &mut Output<'_>) -> Result<i32> {
    let rm = &out.cfg.ratio_map;
    let points = pair::ratio_map(rm.x.into(), rm.x_prime_minus_x.into(), out.cfg.tolerance)?;
    let rows = points.iter().map(|p| vec![p.x, p.x_prime_minus_x, p.ratio]);
    out.csv(
        "ratio_map.csv",
        &strings(&["x", "x_prime_minus_x", "ratio"]),
        rows,
    )?;
    let cells: Vec<(f64, f64, f64)> = points
        .iter()
        .map(|p| (p.x, p.x_prime_minus_x, p.ratio))
        .collect();
    out.plot(
        "ratio_map.svg",
        plot::heat_map("Δω / Ω_α", "x", "x' − x", &cells),
    );
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct Summary<'a> {
    gate: &'a str,
    fidelity: f64,
    avg_probability: f64,
    max_phase_fidelity: f64,
    objective: f64,
    initial_fidelity: f64,
    best_iteration: usize,
    iterations: usize,
    converged: bool,
    duration_ns: f64,
    dt_ps: f64,
    max_field_kv_cm: f64,
    overlaps: Vec<[f64; 2]>,
    warnings: &'a [String],
}

fn cmd_optimize(out: &mut Output<'_>) -> Result<i32> {
    let cfg = out.cfg;
    let gate = cfg
        .gate
        .ok_or_else(|| Error::Config("no gate given (set `gate` or pass --gate)".into()))?;
    let pair = cfg.pair()?;
    let spec = mtoct::gate_targets(gate);
    let result = mtoct::optimize_with(&pair, &spec, &cfg.optimizer, |row| {
        if row.iter % 10 == 0 {
            eprintln!(
                "iter {:4}  F = {:.6}  P = {:.6}  J = {:.6}  max|E| = {:.4} kV/cm",
                row.iter, row.fidelity, row.avg_prob, row.objective, row.max_field_kv_cm
            );
        }
    })?;
    write_optimization(out, &result)?;
    let r = &result;
    println!(
        "{}: F = {:.6}, P = {:.6}, best iteration {} of {}, converged = {}",
        gate, r.fidelity, r.avg_probability, r.best_iter, r.iterations_used, r.converged
    );
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    Ok(if r.converged {
        EXIT_OK
    } else {
        EXIT_NOT_CONVERGED
    })
}

fn write_optimization(out: &mut Output<'_>, r: &OptimizationResult) -> Result<()> {
    let g = r.gate.name();
    let pulse = &r.pulse;
    let rows = (0..=pulse.steps())
        .map(|n| vec![units::to_nanoseconds(pulse.time_ps(n)), pulse.samples()[n]]);
    out.csv(
        &format!("pulse_{g}.csv"),
        &strings(&["t_ns", "E_kV_cm"]),
        rows,
    )?;
    let rows = r.trace.iter().map(|t| {
        vec![
            t.iter as f64,
            t.fidelity,
            t.avg_prob,
            t.objective,
            t.max_field_kv_cm,
        ]
    });
    out.csv(
        &format!("trace_{g}.csv"),
        &strings(&[
            "iter",
            "fidelity",
            "avg_prob",
            "objective",
            "max_field_kV_cm",
        ]),
        rows,
    )?;
    let summary = Summary {
        gate: g,
        fidelity: r.fidelity,
        avg_probability: r.avg_probability,
        max_phase_fidelity: r.max_phase_fidelity,
        objective: r.objective_value,
        initial_fidelity: r.initial_fidelity,
        best_iteration: r.best_iter,
        iterations: r.iterations_used,
        converged: r.converged,
        duration_ns: units::to_nanoseconds(pulse.duration_ps()),
        dt_ps: pulse.dt_ps(),
        max_field_kv_cm: pulse.max_abs(),
        overlaps: r.per_target_overlaps.iter().map(|c| [c.re, c.im]).collect(),
        warnings: &r.warnings,
    };
    let body = toml::to_string(&summary).map_err(|e| Error::Numeric(e.to_string()))?;
    out.text(&format!("summary_{g}.toml"), &body)?;
    let points: Vec<(f64, f64)> = (0..=pulse.steps())
        .map(|n| (units::to_nanoseconds(pulse.time_ps(n)), pulse.samples()[n]))
        .collect();
    let series = [Series {
        name: "E",
        points: plot::decimate(&points, PLOT_POINTS),
    }];
    out.plot(
        &format!("pulse_{g}.svg"),
        plot::line_plot(&format!("{g} pulse"), "t (ns)", "E (kV/cm)", &series),
    );
    Ok(())
}

/// Reads a `t_ns,E_kV_cm` pulse file and checks its grid against `dt_ps`.
pub fn read_pulse(path: &Path, dt_ps: f64) -> Result<Pulse> {
    let file = File::open(path)
        .map_err(|e| Error::Config(format!("cannot open pulse file {}: {e}", path.display())))?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(file);
    let bad = |m: String| Error::Config(format!("{}: {m}", path.display()));
    let mut times = Vec::new();
    let mut samples = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let field = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| bad(format!("row {}: expected two numbers", i + 1)))
        };
        times.push(units::nanoseconds(field(0)?));
        samples.push(field(1)?);
    }
    if times.len() < 2 {
        return Err(bad("pulse needs at least two rows".into()));
    }
    for (n, t) in times.iter().enumerate() {
        if (t - n as f64 * dt_ps).abs() > 1e-6 * dt_ps.max(1.0) {
            return Err(bad(format!(
                "time grid does not match dt = {dt_ps} ps at row {}",
                n + 1
            )));
        }
    }
    Pulse::new(dt_ps, samples).map_err(|e| match e {
        Error::Contract(m) => bad(m),
        other => other,
    })
}

fn initial_state(cfg: &RunConfig, pair: &PairSystem) -> Result<StateVector> {
    let amps = cfg
        .propagate
        .initial_state
        .as_ref()
        .ok_or_else(|| Error::Config("propagate.initial_state is not set".into()))?;
    let v = StateVector(
        amps.iter()
            .map(|&[re, im]| Complex64::new(re, im))
            .collect(),
    );
    let (n1, n2) = pair.n_levels();
    let v = if v.dim() == 4 && pair.dim() != 4 {
        v.embed_qubits(n1, n2)?
    } else {
        v
    };
    if v.dim() != pair.dim() {
        return Err(Error::Config(format!(
            "initial_state has {} amplitudes, pair has {}",
            v.dim(),
            pair.dim()
        )));
    }
    if (v.norm() - 1.0).abs() > 1e-8 {
        return Err(Error::Config(format!(
            "initial_state is not normalized (norm {})",
            v.norm()
        )));
    }
    Ok(v)
}

fn cmd_propagate(out: &mut Output<'_>) -> Result<i32> {
    let cfg = out.cfg;
    let path = cfg.propagate.pulse.as_ref().ok_or_else(|| {
        Error::Config("no pulse file given (set propagate.pulse or pass --pulse)".into())
    })?;
    let pulse = read_pulse(path, cfg.optimizer.dt_ps)?;
    let pair = cfg.pair()?;
    let psi0 = initial_state(cfg, &pair)?;
    let prop = Propagator::for_pair(&pair);
    let traj = prop.propagate(&pulse, &psi0, Direction::Forward, cfg.propagate.stride)?;
    let rows = populations(&traj);
    let labels: Vec<String> = (0..pair.dim()).map(|i| basis_label(&pair, i)).collect();
    let mut columns = vec!["t_ns".to_string()];
    columns.extend(labels.iter().map(|l| format!("p{l}")));
    out.csv(
        "populations.csv",
        &columns,
        rows.iter().map(|r| {
            std::iter::once(r.t_ns)
                .chain(r.populations.iter().copied())
                .collect()
        }),
    )?;
    if let Some(last) = rows.last() {
        let finals: Vec<String> = labels
            .iter()
            .zip(&last.populations)
            .map(|(l, p)| format!("p{l} = {p:.4}"))
            .collect();
        println!("final populations: {}", finals.join(", "));
    }
    let series: Vec<Series<'_>> = labels
        .iter()
        .enumerate()
        .map(|(i, l)| Series {
            name: l,
            points: rows.iter().map(|r| (r.t_ns, r.populations[i])).collect(),
        })
        .collect();
    out.plot(
        "populations.svg",
        plot::line_plot("populations", "t (ns)", "population", &series),
    );
    Ok(EXIT_OK)
}
