//! Command-line front end.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::config::Settings;
use crate::error::{Error, Result};
use crate::linalg::{is_hurwitz, Vector};
use crate::quantitative::{bounds_report, BoundsReport, BoundsRequest, Hypotheses};
use crate::reachability::{malfunction_time_oracle, nominal_time_oracle, reach_tube, ReachTime, ReachTube};
use crate::resilience::{check_resilience, compute_z_set, split_system, ResilienceVerdict};
use crate::scenario::{Scenario, ScenarioFile, ScenarioLibrary};

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_HYPOTHESIS: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "resilience-kit", version, about = "Resilience analysis of linear systems under loss of actuator authority")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,

    /// Write to this file (atomically) instead of stdout.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    /// Worker threads for parallel sections.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Singular-value threshold for numerical rank.
    #[arg(long, global = true, value_name = "FLOAT")]
    pub tol_rank: Option<f64>,
    /// Real parts within this of zero count as zero.
    #[arg(long, global = true, value_name = "FLOAT")]
    pub tol_spectrum: Option<f64>,
    /// Imaginary parts below this count as real.
    #[arg(long, global = true, value_name = "FLOAT")]
    pub tol_imag: Option<f64>,
    /// Slack allowed in containment and feasibility tests.
    #[arg(long, global = true, value_name = "FLOAT")]
    pub tol_containment: Option<f64>,
    /// Distance below which generators or vertices are merged.
    #[arg(long, global = true, value_name = "FLOAT")]
    pub tol_dedup: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Svg,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resilient stabilizability and resilience verdicts for one split.
    Check(SystemArgs),
    /// Inner approximation of the reachable tube under the split.
    Reach(ReachArgs),
    /// Lyapunov-pair bounds on reach times and quantitative resilience.
    Bounds(BoundsArgs),
    /// List built-in scenarios, or print one as a system file.
    Scenarios(ScenariosArgs),
}

#[derive(Debug, Args)]
pub struct SystemArgs {
    /// Built-in scenario name.
    #[arg(long, conflicts_with = "system", required_unless_present = "system")]
    pub scenario: Option<String>,

    /// System description file (JSON).
    #[arg(long)]
    pub system: Option<PathBuf>,

    /// Lost actuators, by label or 1-based index. Defaults to the
    /// scenario's first named split.
    #[arg(long, value_delimiter = ',')]
    pub lost: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ReachArgs {
    #[command(flatten)]
    pub sys: SystemArgs,

    /// Initial state; defaults to the scenario's.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,

    /// Horizon in seconds.
    #[arg(long)]
    pub horizon: f64,

    #[arg(long, default_value_t = 5)]
    pub steps: usize,

    /// Two states to project onto, by label or 1-based index.
    #[arg(long, value_delimiter = ',')]
    pub dims: Option<Vec<String>>,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[command(flatten)]
    pub sys: SystemArgs,

    /// Initial state; defaults to the scenario's.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,

    /// Target state for the oracles; defaults to the scenario's.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub target: Option<Vec<f64>>,

    /// Number of random Lyapunov pairs.
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,

    /// Seed for the pair sampler.
    #[arg(long, env = "RESILIENCE_KIT_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Skip the ellipsoid-fit pairs.
    #[arg(long)]
    pub no_ellipsoid: bool,

    /// Skip the `P = I` pair.
    #[arg(long)]
    pub no_identity: bool,

    /// Also run the grid reach-time oracles.
    #[arg(long)]
    pub oracle: bool,

    /// Oracle time step in seconds.
    #[arg(long, default_value_t = 0.5)]
    pub dt: f64,

    /// Oracle search horizon in seconds.
    #[arg(long, default_value_t = 600.0)]
    pub horizon: f64,
}

#[derive(Debug, Args)]
pub struct ScenariosArgs {
    /// Print this scenario as a system file.
    #[arg(long)]
    pub show: Option<String>,
}

/// Parses `args`, runs the command and returns the process exit code.
/// Diagnostics go to `stderr`.
pub fn run<I, T>(args: I, stdout: &mut dyn std::io::Write, stderr: &mut dyn std::io::Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = write!(stderr, "{}", e.render());
            return code;
        }
    };
    match execute(&cli) {
        Ok(text) => match &cli.common.output {
            Some(path) => match write_atomic(path, &text) {
                Ok(()) => EXIT_OK,
                Err(e) => {
                    let _ = writeln!(stderr, "error: {e}");
                    EXIT_NUMERICAL
                }
            },
            None => {
                let _ = stdout.write_all(text.as_bytes());
                EXIT_OK
            }
        },
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Dimension(_)
        | Error::Argument(_)
        | Error::UnknownScenario { .. }
        | Error::Json(_)
        | Error::Io(_) => EXIT_USAGE,
        Error::Numerical { .. } | Error::Capacity(_) => EXIT_NUMERICAL,
        Error::Precondition(_) | Error::Rank { .. } => EXIT_HYPOTHESIS,
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

fn settings(common: &CommonArgs) -> Result<Settings> {
    let mut s = Settings::default();
    for (flag, value, slot) in [
        ("--tol-rank", common.tol_rank, &mut s.tol.rank),
        ("--tol-spectrum", common.tol_spectrum, &mut s.tol.spectrum),
        ("--tol-imag", common.tol_imag, &mut s.tol.imag),
        ("--tol-containment", common.tol_containment, &mut s.tol.containment),
        ("--tol-dedup", common.tol_dedup, &mut s.tol.dedup),
    ] {
        if let Some(v) = value {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Argument(format!("{flag} must be positive, got {v}")));
            }
            *slot = v;
        }
    }
    Ok(s)
}

fn timestamp() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn load(args: &SystemArgs) -> Result<Scenario> {
    match (&args.scenario, &args.system) {
        (Some(name), None) => ScenarioLibrary::default().get(name),
        (None, Some(path)) => Scenario::from_json(&std::fs::read_to_string(path)?),
        _ => Err(Error::Argument("give exactly one of --scenario or --system".into())),
    }
}

struct Selection {
    scenario: Scenario,
    lost: Vec<usize>,
}

impl Selection {
    fn lost_labels(&self) -> Vec<String> {
        let labels = self.scenario.system.actuator_labels();
        self.lost.iter().map(|&i| labels[i].clone()).collect()
    }
}

fn select(args: &SystemArgs) -> Result<Selection> {
    let scenario = load(args)?;
    let tokens = if args.lost.is_empty() {
        match scenario.default_splits.first() {
            Some(s) => s.lost.clone(),
            None => return Err(Error::Argument("--lost is required for this system".into())),
        }
    } else {
        args.lost.clone()
    };
    let mut lost = scenario.resolve_lost(&tokens)?;
    lost.sort_unstable();
    lost.dedup();
    Ok(Selection { scenario, lost })
}

fn vector_or(v: &Option<Vec<f64>>, default: &Vector, n: usize, what: &str) -> Result<Vector> {
    let x = match v {
        Some(v) => Vector::from_column_slice(v),
        None => default.clone(),
    };
    if x.len() != n {
        return Err(Error::Dimension(format!("{what} has {} entries, the system has {n} states", x.len())));
    }
    if x.iter().any(|c| !c.is_finite()) {
        return Err(Error::Argument(format!("{what} has non-finite entries")));
    }
    Ok(x)
}

fn require_json(common: &CommonArgs, cmd: &str) -> Result<()> {
    if common.format != Format::Json {
        return Err(Error::Argument(format!("`{cmd}` only writes JSON")));
    }
    Ok(())
}

fn to_json<T: Serialize>(doc: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(doc)?;
    s.push('\n');
    Ok(s)
}

fn execute(cli: &Cli) -> Result<String> {
    let s = settings(&cli.common)?;
    if let Some(t) = cli.common.threads {
        if t == 0 {
            return Err(Error::Argument("--threads must be at least 1".into()));
        }
        // A second initialization in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    match &cli.command {
        Command::Check(args) => {
            require_json(&cli.common, "check")?;
            to_json(&cmd_check(args, &s)?)
        }
        Command::Reach(args) => {
            let doc = cmd_reach(args, &s)?;
            match cli.common.format {
                Format::Json => to_json(&doc),
                Format::Csv => Ok(tube_csv(&doc.polygons)),
                Format::Svg => Ok(tube_svg(&doc.polygons, &doc.dims)),
            }
        }
        Command::Bounds(args) => {
            require_json(&cli.common, "bounds")?;
            to_json(&cmd_bounds(args, &s)?)
        }
        Command::Scenarios(args) => {
            require_json(&cli.common, "scenarios")?;
            let lib = ScenarioLibrary::default();
            match &args.show {
                Some(name) => to_json(&ScenarioFile::from(&lib.get(name)?)),
                None => {
                    let list: Vec<ScenarioSummary> = lib
                        .names()
                        .into_iter()
                        .map(|name| {
                            let sc = lib.get(&name).expect("listed name");
                            ScenarioSummary {
                                states: sc.system.n(),
                                actuators: sc.system.num_actuators(),
                                notes: sc.notes,
                                name,
                            }
                        })
                        .collect();
                    to_json(&list)
                }
            }
        }
    }
}

#[derive(Serialize)]
struct ScenarioSummary {
    name: String,
    states: usize,
    actuators: usize,
    notes: String,
}

#[derive(Serialize)]
pub struct CheckDocument {
    pub command: &'static str,
    pub system: String,
    pub lost: Vec<String>,
    pub verdict: ResilienceVerdict,
    pub timestamp: u64,
}

pub fn cmd_check(args: &SystemArgs, s: &Settings) -> Result<CheckDocument> {
    let sel = select(args)?;
    let split = split_system(&sel.scenario.system, &sel.lost)?;
    let verdict = check_resilience(&sel.scenario.system, &split, s)?;
    Ok(CheckDocument {
        command: "check",
        system: sel.scenario.name.clone(),
        lost: sel.lost_labels(),
        verdict,
        timestamp: timestamp(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct StepPolygon {
    pub step: usize,
    pub time: f64,
    pub vertices: Vec<[f64; 2]>,
}

#[derive(Serialize)]
pub struct ReachDocument {
    pub command: &'static str,
    pub system: String,
    pub lost: Vec<String>,
    /// 0-based state indices of the projection.
    pub dims: [usize; 2],
    pub dim_labels: [String; 2],
    pub z_exact: bool,
    pub tube: ReachTube,
    pub polygons: Vec<StepPolygon>,
    pub timestamp: u64,
}

pub fn cmd_reach(args: &ReachArgs, s: &Settings) -> Result<ReachDocument> {
    let sel = select(&args.sys)?;
    let sys = &sel.scenario.system;
    let n = sys.n();
    let x0 = vector_or(&args.x0, &sel.scenario.default_x0, n, "--x0")?;
    let dims = match &args.dims {
        Some(tokens) if tokens.len() == 2 => [sys.state_index(&tokens[0])?, sys.state_index(&tokens[1])?],
        Some(_) => return Err(Error::Argument("--dims takes exactly two states".into())),
        None if n >= 2 => [0, 1],
        None => return Err(Error::Argument("projection needs at least two states".into())),
    };
    if dims[0] == dims[1] {
        return Err(Error::Argument("--dims must name two different states".into()));
    }
    let split = split_system(sys, &sel.lost)?;
    let zset = compute_z_set(&split, s)?;
    if zset.is_empty() {
        return Err(Error::Precondition(
            "Z is empty: the lost actuators' range is not contained in the remaining control range, so no tube exists"
                .into(),
        ));
    }
    let tube = reach_tube(sys.a(), &zset, &x0, args.horizon, args.steps, s)?;
    let mut polygons = Vec::with_capacity(tube.steps);
    for step in 1..=tube.steps {
        polygons.push(StepPolygon {
            step,
            time: tube.times[step],
            vertices: tube.sets[step].project(&dims)?.polygon()?,
        });
    }
    let labels = sys.state_labels();
    Ok(ReachDocument {
        command: "reach",
        system: sel.scenario.name.clone(),
        lost: sel.lost_labels(),
        dims,
        dim_labels: [labels[dims[0]].clone(), labels[dims[1]].clone()],
        z_exact: zset.exact,
        tube,
        polygons,
        timestamp: timestamp(),
    })
}

pub fn tube_csv(polygons: &[StepPolygon]) -> String {
    let mut out = String::from("step,time,vertex_index,x,y\n");
    for p in polygons {
        for (k, v) in p.vertices.iter().enumerate() {
            let _ = writeln!(out, "{},{},{},{},{}", p.step, p.time, k, v[0], v[1]);
        }
    }
    out
}

pub fn tube_svg(polygons: &[StepPolygon], dims: &[usize; 2]) -> String {
    let (w, h, pad) = (640.0, 480.0, 40.0);
    let pts = polygons.iter().flat_map(|p| p.vertices.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for v in pts {
        x0 = x0.min(v[0]);
        x1 = x1.max(v[0]);
        y0 = y0.min(v[1]);
        y1 = y1.max(v[1]);
    }
    let sx = if x1 > x0 { (w - 2.0 * pad) / (x1 - x0) } else { 1.0 };
    let sy = if y1 > y0 { (h - 2.0 * pad) / (y1 - y0) } else { 1.0 };
    let mut out = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    );
    let _ = writeln!(
        out,
        "<text x=\"{pad}\" y=\"20\" font-family=\"sans-serif\" font-size=\"12\">x{} vs x{}</text>",
        dims[0] + 1,
        dims[1] + 1
    );
    let count = polygons.len().max(1);
    for (i, p) in polygons.iter().enumerate() {
        let hue = 240.0 * (1.0 - i as f64 / count as f64);
        let coords: Vec<String> = p
            .vertices
            .iter()
            .map(|v| {
                let x = pad + (v[0] - x0) * sx;
                let y = h - pad - (v[1] - y0) * sy;
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let _ = writeln!(
            out,
            "<polygon points=\"{}\" fill=\"none\" stroke=\"hsl({hue:.0},70%,45%)\" stroke-width=\"1.5\"><title>step {} t={}</title></polygon>",
            coords.join(" "),
            p.step,
            p.time
        );
    }
    out.push_str("</svg>\n");
    out
}

#[derive(Serialize)]
pub struct OracleTimes {
    pub dt: f64,
    pub nominal: ReachTime,
    pub malfunction: ReachTime,
}

#[derive(Serialize)]
pub struct BoundsDocument {
    pub command: &'static str,
    pub system: String,
    pub lost: Vec<String>,
    pub samples: usize,
    pub seed: u64,
    pub resiliently_stabilizable: bool,
    pub report: BoundsReport,
    pub oracle: Option<OracleTimes>,
    pub timestamp: u64,
}

pub fn cmd_bounds(args: &BoundsArgs, s: &Settings) -> Result<BoundsDocument> {
    let sel = select(&args.sys)?;
    let sys = &sel.scenario.system;
    let n = sys.n();
    let x0 = vector_or(&args.x0, &sel.scenario.default_x0, n, "--x0")?;
    let target = vector_or(&args.target, &sel.scenario.default_target, n, "--target")?;
    if !is_hurwitz(sys.a(), s.tol.spectrum)? {
        return Err(Error::Precondition(
            "the reach-time bounds need a Hurwitz state matrix".into(),
        ));
    }
    let split = split_system(sys, &sel.lost)?;
    let zset = compute_z_set(&split, s)?;
    let verdict = crate::resilience::verdict_from_zset(sys, &split, &zset, s)?;
    let req = BoundsRequest {
        system: sys,
        z: zset.inner.as_ref(),
        hypotheses: Hypotheses {
            resiliently_stabilizable: verdict.resiliently_stabilizable,
        },
        x0: &x0,
        samples: args.samples,
        seed: args.seed,
        ellipsoid_fit: !args.no_ellipsoid,
        identity: !args.no_identity,
    };
    let report = bounds_report(&req, s)?;
    let oracle = if args.oracle {
        Some(OracleTimes {
            dt: args.dt,
            nominal: nominal_time_oracle(sys, &x0, &target, args.dt, args.horizon, s)?,
            malfunction: malfunction_time_oracle(sys, &split, &x0, &target, args.dt, args.horizon, s)?,
        })
    } else {
        None
    };
    Ok(BoundsDocument {
        command: "bounds",
        system: sel.scenario.name.clone(),
        lost: sel.lost_labels(),
        samples: args.samples,
        seed: args.seed,
        resiliently_stabilizable: verdict.resiliently_stabilizable,
        report,
        oracle,
        timestamp: timestamp(),
    })
}
