//! Command-line front end: calibrate, eval, sample, validate, tabulate.
//!
//! Exit codes: 0 when everything requested succeeded, 1 when a validation
//! check, a calibration key or a density point failed, 2 on bad input.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::densities::{
    beta1_pdf, beta2_pdf, bgb1_pdf, bgb2_pdf, matgamma_pdf, BetaParams, DensityValue, GammaParams, Mode, TriParams,
};
use crate::error::{Error, Result};
use crate::invariant::table::{DEFAULT_CALIBRATION_SEED, DEFAULT_PAIR_DEGREE, DEFAULT_TRIPLE_DEGREE};
use crate::invariant::{shared_invariant_table, InvariantTable};
use crate::matrixkit::{from_rows, Mat};
use crate::sampling::{sample_batch, RngHandle, SampleDist, SampleParams};
use crate::validation::{run_suite, ValidationConfig};
use crate::zonal::build_zonal_table;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "dncbeta", version, about = "Doubly noncentral matrix and bimatrix beta distributions")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Dist {
    Matgamma,
    Beta1,
    Beta2,
    Bgb1,
    Bgb2,
}

impl Dist {
    fn matrices(self) -> usize {
        match self {
            Dist::Bgb1 | Dist::Bgb2 => 2,
            _ => 1,
        }
    }

    fn sample_dist(self) -> SampleDist {
        match self {
            Dist::Matgamma => SampleDist::Matgamma,
            Dist::Beta1 => SampleDist::Beta1,
            Dist::Beta2 => SampleDist::Beta2,
            Dist::Bgb1 => SampleDist::Bgb1,
            Dist::Bgb2 => SampleDist::Bgb2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Sym,
    Nonsym,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Sym => Mode::Sym,
            ModeArg::Nonsym => Mode::Nonsym,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Calibrate the invariant tables and write them with a residual report.
    Calibrate {
        #[arg(long, default_value_t = DEFAULT_PAIR_DEGREE)]
        max_pair_degree: usize,
        #[arg(long, default_value_t = DEFAULT_TRIPLE_DEGREE)]
        max_triple_degree: usize,
        #[arg(long, default_value_t = DEFAULT_CALIBRATION_SEED)]
        seed: u64,
        #[arg(long, default_value = "tables")]
        out_dir: PathBuf,
    },
    /// Evaluate a density at the points of a JSON file; one JSON line per point.
    Eval {
        #[arg(long, value_enum)]
        dist: Dist,
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        truncation: Option<usize>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        /// Directory holding invariants.json; calibrated in-process when absent.
        #[arg(long)]
        tables: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw from the gamma-based constructions.
    Sample {
        #[arg(long, value_enum)]
        dist: Dist,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        stream: u64,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run validation checks and emit a JSON report array.
    Validate {
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        haar_draws: Option<usize>,
        #[arg(long)]
        sampler_draws: Option<usize>,
        #[arg(long)]
        importance_draws: Option<usize>,
        #[arg(long)]
        splitting_draws: Option<usize>,
        /// Include per-check wall-clock seconds (makes reports irreproducible).
        #[arg(long)]
        timings: bool,
        #[arg(long)]
        tables: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Evaluate a density on a grid of scalar multiples of the identity; CSV.
    Tabulate {
        #[arg(long, value_enum)]
        dist: Dist,
        /// name=lo:hi:step; repeat once per matrix argument.
        #[arg(long, required = true)]
        grid: Vec<String>,
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        truncation: Option<usize>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long)]
        tables: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parameter file. Missing noncentralities are zero; missing shapes take
/// the defaults a = 2, b = 3, c = 1.5 and m defaults to 1.
#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamFile {
    pub m: Option<usize>,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub c: Option<f64>,
    #[serde(rename = "Omega1")]
    pub omega1: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Omega2")]
    pub omega2: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Omega3")]
    pub omega3: Option<Vec<Vec<f64>>>,
    /// Matrix gamma scale; identity when absent.
    #[serde(rename = "Theta")]
    pub theta: Option<Vec<Vec<f64>>>,
    pub mode: Option<Mode>,
    pub truncation: Option<usize>,
}

/// Validated parameters.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub m: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub omegas: [Mat; 3],
    pub theta: Mat,
    pub mode: Mode,
    pub truncation: Option<usize>,
}

impl ParamFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", path.display())))
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let m = self.m.unwrap_or(1);
        if m == 0 {
            return Err(Error::Input("m must be at least 1".into()));
        }
        let mat = |v: &Option<Vec<Vec<f64>>>, name: &str, default: Mat| -> Result<Mat> {
            match v {
                None => Ok(default),
                Some(rows) => {
                    let x = from_rows(rows)?;
                    if x.nrows() != m || x.ncols() != m {
                        return Err(Error::Input(format!("{name} must be {m}x{m}")));
                    }
                    Ok(x)
                }
            }
        };
        let z = Mat::zeros(m, m);
        Ok(Resolved {
            m,
            a: self.a.unwrap_or(2.0),
            b: self.b.unwrap_or(3.0),
            c: self.c.unwrap_or(1.5),
            omegas: [
                mat(&self.omega1, "Omega1", z.clone())?,
                mat(&self.omega2, "Omega2", z.clone())?,
                mat(&self.omega3, "Omega3", z)?,
            ],
            theta: mat(&self.theta, "Theta", Mat::identity(m, m))?,
            mode: self.mode.unwrap_or(Mode::Nonsym),
            truncation: self.truncation,
        })
    }
}

impl Resolved {
    fn beta(&self) -> BetaParams {
        BetaParams { a: self.a, b: self.b, omega1: self.omegas[0].clone(), omega2: self.omegas[1].clone() }
    }

    fn tri(&self) -> TriParams {
        TriParams {
            a: self.a,
            b: self.b,
            c: self.c,
            omega1: self.omegas[0].clone(),
            omega2: self.omegas[1].clone(),
            omega3: self.omegas[2].clone(),
        }
    }

    fn gamma(&self) -> GammaParams {
        GammaParams { a: self.a, theta: self.theta.clone(), omega: self.omegas[0].clone() }
    }

    fn density(&self, dist: Dist, x: &[Mat], table: &InvariantTable) -> Result<DensityValue> {
        let (mode, d) = (self.mode, self.truncation);
        match dist {
            Dist::Matgamma => matgamma_pdf(&x[0], &self.gamma(), d),
            Dist::Beta1 => beta1_pdf(&x[0], &self.beta(), mode, d, table),
            Dist::Beta2 => beta2_pdf(&x[0], &self.beta(), mode, d, table),
            Dist::Bgb1 => bgb1_pdf(&x[0], &x[1], &self.tri(), mode, d, table),
            Dist::Bgb2 => bgb2_pdf(&x[0], &x[1], &self.tri(), mode, d, table),
        }
    }
}

fn load_table(dir: Option<&Path>) -> Result<std::sync::Arc<InvariantTable>> {
    match dir {
        Some(d) => Ok(std::sync::Arc::new(InvariantTable::load(&d.join("invariants.json"))?)),
        None => Ok(shared_invariant_table()),
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, text)?,
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())?;
            so.flush()?;
        }
    }
    Ok(())
}

fn parse_matrix(v: &Value, m: usize) -> Result<Mat> {
    if let Some(x) = v.as_f64() {
        if m != 1 {
            return Err(Error::Input(format!("scalar point given for m = {m}")));
        }
        return Ok(Mat::from_element(1, 1, x));
    }
    let rows: Vec<Vec<f64>> = serde_json::from_value(v.clone()).map_err(|e| Error::Input(format!("bad matrix: {e}")))?;
    let x = from_rows(&rows)?;
    if x.nrows() != m || x.ncols() != m {
        return Err(Error::DimensionMismatch(format!("point matrix must be {m}x{m}")));
    }
    Ok(x)
}

/// One point: a matrix (or scalar at m = 1), or a pair of them for the
/// bimatrix families.
fn parse_point(v: &Value, dist: Dist, m: usize) -> Result<Vec<Mat>> {
    if dist.matrices() == 1 {
        return Ok(vec![parse_matrix(v, m)?]);
    }
    match v.as_array() {
        Some(pair) if pair.len() == 2 => Ok(vec![parse_matrix(&pair[0], m)?, parse_matrix(&pair[1], m)?]),
        _ => Err(Error::Input("bimatrix points are [X1, X2] pairs".into())),
    }
}

fn density_record(index: usize, r: Result<DensityValue>) -> Value {
    match r {
        Ok(v) => {
            let mut o = serde_json::to_value(&v).expect("density value serialises");
            o.as_object_mut().expect("object").insert("index".into(), json!(index));
            o
        }
        Err(e) => json!({ "index": index, "error": { "code": e.code(), "message": e.to_string() } }),
    }
}

fn resolve_params(path: Option<&Path>, mode: Option<ModeArg>, truncation: Option<usize>) -> Result<Resolved> {
    let file = match path {
        Some(p) => ParamFile::load(p)?,
        None => ParamFile::default(),
    };
    let mut r = file.resolve()?;
    if let Some(md) = mode {
        r.mode = md.into();
    }
    if truncation.is_some() {
        r.truncation = truncation;
    }
    Ok(r)
}

fn cmd_calibrate(max_pair: usize, max_triple: usize, seed: u64, out_dir: &Path) -> Result<i32> {
    fs::create_dir_all(out_dir)?;
    let (table, report) = InvariantTable::calibrate(max_pair, max_triple, seed)?;
    table.save(&out_dir.join("invariants.json"))?;
    let zonal = build_zonal_table(max_pair.max(max_triple).max(8));
    fs::write(out_dir.join("zonal.json"), serde_json::to_string_pretty(&zonal)? + "\n")?;
    fs::write(out_dir.join("calibration_report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    eprintln!("calibrated {} entries, {} failures", table.entries.len(), report.failures.len());
    Ok(if report.failures.is_empty() { EXIT_OK } else { EXIT_FAILED })
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    dist: Dist,
    params: &Path,
    points: &Path,
    truncation: Option<usize>,
    mode: Option<ModeArg>,
    tables: Option<&Path>,
    out: Option<&Path>,
) -> Result<i32> {
    let p = resolve_params(Some(params), mode, truncation)?;
    let text = fs::read_to_string(points)?;
    let pts: Vec<Value> = serde_json::from_str(&text).map_err(|e| Error::Input(format!("{}: {e}", points.display())))?;
    let table = load_table(tables)?;
    let mut lines = String::new();
    let mut failed = false;
    for (i, v) in pts.iter().enumerate() {
        let r = parse_point(v, dist, p.m).and_then(|x| p.density(dist, &x, &table));
        failed |= r.is_err();
        writeln!(lines, "{}", density_record(i, r)).expect("write to string");
    }
    emit(out, &lines)?;
    Ok(if failed { EXIT_FAILED } else { EXIT_OK })
}

#[allow(clippy::too_many_arguments)]
fn cmd_sample(
    dist: Dist,
    n: usize,
    seed: u64,
    stream: u64,
    params: Option<&Path>,
    format: Format,
    out: Option<&Path>,
) -> Result<i32> {
    let p = resolve_params(params, None, None)?;
    let sd = dist.sample_dist();
    let (shapes, omegas) = match dist {
        Dist::Matgamma => (vec![p.a], vec![p.omegas[0].clone()]),
        Dist::Beta1 | Dist::Beta2 => (vec![p.a, p.b], p.omegas[..2].to_vec()),
        Dist::Bgb1 | Dist::Bgb2 => (vec![p.a, p.b, p.c], p.omegas.to_vec()),
    };
    let sp = SampleParams { m: p.m, shapes, omegas };
    let batch = sample_batch(sd, &sp, n, RngHandle::new(seed, stream))?;
    let text = match format {
        Format::Csv => batch.to_csv(),
        Format::Json => serde_json::to_string(&batch)? + "\n",
    };
    emit(out, &text)?;
    Ok(EXIT_OK)
}

struct GridAxis {
    name: String,
    values: Vec<f64>,
}

fn parse_grid(spec: &str) -> Result<GridAxis> {
    let bad = || Error::Input(format!("grid {spec:?} is not name=lo:hi:step"));
    let (name, range) = spec.split_once('=').ok_or_else(bad)?;
    let parts: Vec<f64> = range.split(':').map(|s| s.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
    let [lo, hi, step] = parts[..] else { return Err(bad()) };
    if !(step > 0.0 && hi >= lo) {
        return Err(bad());
    }
    let count = ((hi - lo) / step + 1e-9).floor() as usize + 1;
    Ok(GridAxis { name: name.trim().to_string(), values: (0..count).map(|i| lo + i as f64 * step).collect() })
}

fn csv_field(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else {
        String::new()
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_tabulate(
    dist: Dist,
    grid: &[String],
    params: Option<&Path>,
    truncation: Option<usize>,
    mode: Option<ModeArg>,
    tables: Option<&Path>,
    out: Option<&Path>,
) -> Result<i32> {
    let p = resolve_params(params, mode, truncation)?;
    let axes: Vec<GridAxis> = grid.iter().map(|g| parse_grid(g)).collect::<Result<_>>()?;
    if axes.len() != dist.matrices() {
        return Err(Error::Input(format!("{dist:?} needs {} grid axes", dist.matrices())));
    }
    let table = load_table(tables)?;
    let names: Vec<&str> = axes.iter().map(|a| a.name.as_str()).collect();
    let mut text = format!("{},value,log_value,truncation,shells_used,last_shell_magnitude,clamped,error\n", names.join(","));
    let mut failed = false;
    let ident = Mat::identity(p.m, p.m);
    let mut idx = vec![0usize; axes.len()];
    loop {
        let coords: Vec<f64> = idx.iter().zip(&axes).map(|(&i, a)| a.values[i]).collect();
        let x: Vec<Mat> = coords.iter().map(|&c| &ident * c).collect();
        let coord_text: Vec<String> = coords.iter().map(|c| format!("{c}")).collect();
        match p.density(dist, &x, &table) {
            Ok(v) => writeln!(
                text,
                "{},{},{},{},{},{},{},",
                coord_text.join(","),
                csv_field(v.value),
                csv_field(v.log_value),
                v.truncation,
                v.shells_used,
                csv_field(v.last_shell_magnitude),
                v.clamped
            ),
            Err(e) => {
                failed = true;
                writeln!(text, "{},,,,,,,{}", coord_text.join(","), e.code())
            }
        }
        .expect("write to string");
        // Odometer over the axes, last axis fastest.
        let mut k = axes.len();
        loop {
            if k == 0 {
                emit(out, &text)?;
                return Ok(if failed { EXIT_FAILED } else { EXIT_OK });
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < axes[k].values.len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_validate(
    suite: &str,
    seed: u64,
    draws: [Option<usize>; 4],
    timings: bool,
    tables: Option<&Path>,
    out: Option<&Path>,
) -> Result<i32> {
    let mut cfg = ValidationConfig::new(seed);
    let [h, s, i, sp] = draws;
    cfg.haar_draws = h.unwrap_or(cfg.haar_draws);
    cfg.sampler_draws = s.unwrap_or(cfg.sampler_draws);
    cfg.importance_draws = i.unwrap_or(cfg.importance_draws);
    cfg.splitting_draws = sp.unwrap_or(cfg.splitting_draws);
    cfg.timings = timings;
    let table = load_table(tables)?;
    let reports = run_suite(suite, &cfg, &table)?;
    let failed = reports.iter().filter(|r| !r.pass).count();
    for r in &reports {
        eprintln!("{} {}", if r.pass { "PASS" } else { "FAIL" }, r.name);
    }
    emit(out, &(serde_json::to_string_pretty(&reports)? + "\n"))?;
    Ok(if failed == 0 { EXIT_OK } else { EXIT_FAILED })
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Calibrate { max_pair_degree, max_triple_degree, seed, out_dir } => {
            cmd_calibrate(max_pair_degree, max_triple_degree, seed, &out_dir)
        }
        Command::Eval { dist, params, points, truncation, mode, tables, out } => {
            cmd_eval(dist, &params, &points, truncation, mode, tables.as_deref(), out.as_deref())
        }
        Command::Sample { dist, n, seed, stream, params, format, out } => {
            cmd_sample(dist, n, seed, stream, params.as_deref(), format, out.as_deref())
        }
        Command::Validate { suite, seed, haar_draws, sampler_draws, importance_draws, splitting_draws, timings, tables, out } => {
            cmd_validate(
                &suite,
                seed,
                [haar_draws, sampler_draws, importance_draws, splitting_draws],
                timings,
                tables.as_deref(),
                out.as_deref(),
            )
        }
        Command::Tabulate { dist, grid, params, truncation, mode, tables, out } => {
            cmd_tabulate(dist, &grid, params.as_deref(), truncation, mode, tables.as_deref(), out.as_deref())
        }
    }
}

/// Parses arguments, runs the subcommand and returns the exit code. Errors
/// are printed to stderr as a JSON object with a machine-readable code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{}", json!({ "error": { "code": e.code(), "message": e.to_string() } }));
            EXIT_INPUT
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_arithmetic() {
        let g = parse_grid("u=0.05:0.95:0.05").unwrap();
        assert_eq!(g.values.len(), 19);
        assert_eq!(g.name, "u");
        assert!(parse_grid("u=1:0:0.1").is_err());
        assert!(parse_grid("u:0:1").is_err());
    }

    #[test]
    fn params_defaults_and_validation() {
        let p: ParamFile = serde_json::from_str(r#"{"m": 2, "a": 1.5, "Omega1": [[0.1, 0], [0, 0.2]], "mode": "sym"}"#).unwrap();
        let r = p.resolve().unwrap();
        assert_eq!(r.mode, Mode::Sym);
        assert_eq!(r.omegas[1], Mat::zeros(2, 2));
        let bad: ParamFile = serde_json::from_str(r#"{"m": 2, "Omega1": [[0.1]]}"#).unwrap();
        assert!(bad.resolve().is_err());
        assert!(serde_json::from_str::<ParamFile>(r#"{"omega": 1}"#).is_err());
    }

    #[test]
    fn points() {
        let v: Value = serde_json::from_str("[0.5, 0.5]").unwrap();
        assert_eq!(parse_point(&v, Dist::Bgb1, 1).unwrap().len(), 2);
        assert!(parse_point(&v, Dist::Beta1, 1).is_err());
        let v: Value = serde_json::from_str("[[0.5, 0.1], [0.1, 0.4]]").unwrap();
        assert_eq!(parse_point(&v, Dist::Beta1, 2).unwrap()[0][(0, 1)], 0.1);
    }
}
