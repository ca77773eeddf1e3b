//! Command-line front end: data synthesis, fit/predict workflows, and the
//! three study sweeps (bound validity, RMS accuracy, conditioning), all
//! emitted as CSV with the resolved configuration echoed into every artifact.
//!
//! Exit codes: 0 success, 1 runtime/convergence failure, 2 usage/config
//! error, 3 bound violation in a study command.

use clap::{Args, Parser, Subcommand};
use efgp::bounds::Rule;
use efgp::error::{EfgpError, Result};
use efgp::grid::FourierGrid;
use efgp::kernels::KernelSpec;
use efgp::solver::{Dataset, EFGPModel, FitOptions};
use efgp::studies::{self, TestFunction};
use serde_json::{json, Value};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const ABOUT: &str = "Equispaced Fourier Gaussian process regression toolkit.

Synthetic test functions (for `synth`):
  sin6   sin(6*pi*(x_1 + ... + x_d))
  bump   prod_a (1 - cos(2*pi*x_a)) / 2
  const  1

Set EFGP_THREADS to cap the study worker pool.";

#[derive(Parser)]
#[command(name = "efgp", version, about = ABOUT)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Resolve grid parameters (h, m) and the error budget for a kernel
    Params(ParamsArgs),
    /// Generate a synthetic dataset CSV (seeded)
    Synth(SynthArgs),
    /// Fit a model to a data CSV (columns x1..xd,y) and save it
    Fit(FitArgs),
    /// Predict at targets CSV (columns x1..xd) from a saved model
    Predict(PredictArgs),
    /// Randomized sweep checking measured sup error against the bounds
    BoundStudy(BoundStudyArgs),
    /// RMS error vs the heuristic estimate over an m sweep
    RmsStudy(RmsStudyArgs),
    /// Condition numbers of the exact / approximate / weight-space systems
    CondStudy(CondStudyArgs),
}

#[derive(Args)]
struct ParamsArgs {
    /// Kernel family: se | matern
    #[arg(long)]
    kernel: Option<String>,
    /// Lengthscale
    #[arg(long)]
    l: Option<f64>,
    /// Matérn smoothness
    #[arg(long)]
    nu: Option<f64>,
    /// Dimension (1-3)
    #[arg(long)]
    d: Option<usize>,
    /// Target uniform error
    #[arg(long)]
    eps: Option<f64>,
    /// Parameter rule: rigorous | heuristic
    #[arg(long)]
    rule: Option<String>,
    /// JSON config file mirroring the flag names (flags override)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Optional JSON report path
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Number of points
    #[arg(long)]
    n: Option<usize>,
    /// Dimension (1-3)
    #[arg(long)]
    d: Option<usize>,
    /// Test function: sin6 | bump | const
    #[arg(long)]
    function: Option<String>,
    /// Noise standard deviation
    #[arg(long)]
    sigma: Option<f64>,
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output CSV path
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Training data CSV with columns x1..xd,y
    #[arg(long)]
    data: Option<PathBuf>,
    /// Kernel family: se | matern
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    l: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    /// Noise standard deviation
    #[arg(long)]
    sigma: Option<f64>,
    /// Target kernel error (used unless --h and --m are given)
    #[arg(long)]
    eps: Option<f64>,
    /// Parameter rule: rigorous | heuristic
    #[arg(long)]
    rule: Option<String>,
    /// Explicit frequency spacing (with --m, overrides --eps)
    #[arg(long)]
    h: Option<f64>,
    /// Explicit modes per half-axis (with --h, overrides --eps)
    #[arg(long)]
    m: Option<usize>,
    /// CG relative residual tolerance
    #[arg(long)]
    cg_tol: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model JSON path (coefficients go to the same path with a .beta extension)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Model JSON written by `fit`
    #[arg(long)]
    model: Option<PathBuf>,
    /// Targets CSV with columns x1..xd
    #[arg(long)]
    targets: Option<PathBuf>,
    /// Also emit posterior variances
    #[arg(long)]
    var: bool,
    /// CG tolerance for variance solves
    #[arg(long)]
    cg_tol: Option<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Predictions CSV path
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundStudyArgs {
    /// Kernel family to sweep: se | matern
    #[arg(long)]
    kernel: Option<String>,
    /// Number of randomized configurations
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Pin the dimension (3 requires --heavy)
    #[arg(long)]
    d: Option<usize>,
    /// Allow reduced-density d=3 sweeps
    #[arg(long)]
    heavy: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional SVG line chart path
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct RmsStudyArgs {
    /// Dimension (3 requires --heavy)
    #[arg(long)]
    d: Option<usize>,
    /// Matérn smoothness values (comma separated)
    #[arg(long, value_delimiter = ',')]
    nu: Option<Vec<f64>>,
    /// Lengthscales (comma separated)
    #[arg(long, value_delimiter = ',')]
    l: Option<Vec<f64>>,
    /// Aliasing target used to pick h
    #[arg(long)]
    eps: Option<f64>,
    /// Cap on m per sweep point
    #[arg(long)]
    m_cap: Option<usize>,
    #[arg(long)]
    heavy: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Args)]
struct CondStudyArgs {
    /// Kernel family: se | matern
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    l: Option<f64>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    d: Option<usize>,
    /// Dataset sizes (comma separated)
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Noise levels (comma separated)
    #[arg(long, value_delimiter = ',')]
    sigma: Option<Vec<f64>>,
    /// Kernel accuracy for the grid
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    cg_tol: Option<f64>,
    /// Skip the dense N x N eigensolve (kappa_exact column becomes NaN)
    #[arg(long)]
    no_exact: bool,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    svg: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                EfgpError::Argument(_)
                | EfgpError::Parse(_)
                | EfgpError::Hypothesis(_)
                | EfgpError::Domain(_) => 2,
                _ => 1,
            }
        }
    };
    ExitCode::from(code)
}

fn run(cli: Cli) -> Result<u8> {
    match cli.cmd {
        Cmd::Params(a) => cmd_params(a),
        Cmd::Synth(a) => cmd_synth(a),
        Cmd::Fit(a) => cmd_fit(a),
        Cmd::Predict(a) => cmd_predict(a),
        Cmd::BoundStudy(a) => cmd_bound_study(a),
        Cmd::RmsStudy(a) => cmd_rms_study(a),
        Cmd::CondStudy(a) => cmd_cond_study(a),
    }
}

// ---------------------------------------------------------------------------
// Config-file merging

/// Flat JSON object mirroring the flag names; flag values take precedence.
struct FileCfg(serde_json::Map<String, Value>);

impl FileCfg {
    fn load(path: &Option<PathBuf>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileCfg(serde_json::Map::new()));
        };
        let text = std::fs::read_to_string(path)?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| EfgpError::Parse(format!("{}: {e}", path.display())))?;
        match v {
            Value::Object(map) => Ok(FileCfg(map)),
            _ => Err(EfgpError::Parse(format!(
                "{}: config must be a JSON object",
                path.display()
            ))),
        }
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v.as_f64().map(Some).ok_or_else(|| bad_cfg(key, "a number")),
        }
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(|u| Some(u as usize))
                .ok_or_else(|| bad_cfg(key, "a non-negative integer")),
        }
    }

    fn u64(&self, key: &str) -> Result<Option<u64>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| bad_cfg(key, "a non-negative integer")),
        }
    }

    fn string(&self, key: &str) -> Result<Option<String>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(|s| Some(s.to_string()))
                .ok_or_else(|| bad_cfg(key, "a string")),
        }
    }

    fn path(&self, key: &str) -> Result<Option<PathBuf>> {
        Ok(self.string(key)?.map(PathBuf::from))
    }

    fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| bad_cfg(key, "an array of numbers")))
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(bad_cfg(key, "an array of numbers")),
        }
    }

    fn usize_list(&self, key: &str) -> Result<Option<Vec<usize>>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(Value::Array(a)) => a
                .iter()
                .map(|v| {
                    v.as_u64()
                        .map(|u| u as usize)
                        .ok_or_else(|| bad_cfg(key, "an array of integers"))
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(_) => Err(bad_cfg(key, "an array of integers")),
        }
    }
}

fn bad_cfg(key: &str, want: &str) -> EfgpError {
    EfgpError::Parse(format!("config key '{key}' must be {want}"))
}

fn need<T>(name: &str, v: Option<T>) -> Result<T> {
    v.ok_or_else(|| EfgpError::Argument(format!("missing --{name} (flag or config key)")))
}

fn parse_rule(s: &str) -> Result<Rule> {
    match s {
        "rigorous" => Ok(Rule::Rigorous),
        "heuristic" => Ok(Rule::Heuristic),
        other => Err(EfgpError::Argument(format!(
            "unknown rule '{other}' (expected rigorous | heuristic)"
        ))),
    }
}

fn resolve_kernel(family: &str, l: f64, nu: Option<f64>) -> Result<KernelSpec> {
    match family {
        "se" => KernelSpec::se(l),
        "matern" => KernelSpec::matern(l, need("nu", nu)?),
        other => Err(EfgpError::Argument(format!(
            "unknown kernel family '{other}' (expected se | matern)"
        ))),
    }
}

// ---------------------------------------------------------------------------
// CSV / artifact helpers

/// Write a CSV artifact: one `# config:` provenance comment, a header row,
/// then data rows. Plain `Display` float formatting keeps reruns bytewise
/// identical.
fn write_csv(
    path: &Path,
    config: &Value,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<()> {
    let mut buf = String::new();
    buf.push_str(&format!("# config: {config}\n"));
    buf.push_str(&header.join(","));
    buf.push('\n');
    for row in rows {
        buf.push_str(&row.join(","));
        buf.push('\n');
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(buf.as_bytes())?;
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

/// Read a point CSV with columns x1..xd[,y]. Comment lines starting with '#'
/// are skipped. Returns (d, points, targets or None).
fn read_points_csv(path: &Path, expect_y: bool) -> Result<(usize, Vec<f64>, Option<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| EfgpError::Parse(format!("{}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| EfgpError::Parse(format!("{}: {e}", path.display())))?
        .clone();
    let ncols = headers.len();
    let d = if expect_y {
        if ncols < 2 || headers.get(ncols - 1) != Some("y") {
            return Err(EfgpError::Parse(format!(
                "{}: expected columns x1..xd,y, got header '{}'",
                path.display(),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        ncols - 1
    } else {
        ncols
    };
    for (i, name) in headers.iter().take(d).enumerate() {
        if name != format!("x{}", i + 1) {
            return Err(EfgpError::Parse(format!(
                "{}: expected coordinate column x{}, got '{name}'",
                path.display(),
                i + 1
            )));
        }
    }
    let mut points = Vec::new();
    let mut targets = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = idx + 2; // 1-based, after the header
        let rec = rec.map_err(|e| EfgpError::Parse(format!("{}: {e}", path.display())))?;
        if rec.len() != ncols {
            return Err(EfgpError::Parse(format!(
                "{}: line {line}: expected {ncols} fields, got {}",
                path.display(),
                rec.len()
            )));
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                EfgpError::Parse(format!(
                    "{}: line {line}: field '{field}' is not a number",
                    path.display()
                ))
            })?;
            if expect_y && j == d {
                targets.push(v);
            } else {
                points.push(v);
            }
        }
    }
    Ok((d, points, if expect_y { Some(targets) } else { None }))
}

// ---------------------------------------------------------------------------
// SVG chart

/// Minimal log-log line chart: one polyline per named series.
fn write_svg(
    path: &Path,
    title: &str,
    xlabel: &str,
    ylabel: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> Result<()> {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const PAD: f64 = 60.0;
    const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let pts: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|(_, p)| p.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite() && *x > 0.0 && *y > 0.0)
        .map(|&(x, y)| (x.log10(), y.log10()))
        .collect();
    if pts.is_empty() {
        return Err(EfgpError::Argument(
            "no positive finite data points to chart".into(),
        ));
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let pad_range = |a: &mut f64, b: &mut f64| {
        if *b - *a < 1e-12 {
            *a -= 0.5;
            *b += 0.5;
        }
    };
    pad_range(&mut x0, &mut x1);
    pad_range(&mut y0, &mut y1);
    let sx = |x: f64| PAD + (x.log10() - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y.log10() - y0) / (y1 - y0) * (H - 2.0 * PAD);
    let mut s = String::new();
    s.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    ));
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"16\">{title}</text>\n",
        W / 2.0
    ));
    s.push_str(&format!(
        "<rect x=\"{PAD}\" y=\"{PAD}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" \
         stroke=\"black\"/>\n",
        W - 2.0 * PAD,
        H - 2.0 * PAD
    ));
    s.push_str(&format!(
        "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"12\">log10 {xlabel}</text>\n",
        W / 2.0,
        H - 20.0
    ));
    s.push_str(&format!(
        "<text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"12\" transform=\"rotate(-90 16 {:.1})\">log10 {ylabel}</text>\n",
        H / 2.0,
        H / 2.0
    ));
    for (i, (name, data)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path_pts: Vec<String> = data
            .iter()
            .filter(|(x, y)| x.is_finite() && y.is_finite() && *x > 0.0 && *y > 0.0)
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        if path_pts.is_empty() {
            continue;
        }
        s.push_str(&format!(
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            path_pts.join(" ")
        ));
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" \
             fill=\"{color}\">{name}</text>\n",
            W - PAD + 4.0,
            PAD + 14.0 * (i as f64 + 1.0)
        ));
    }
    s.push_str("</svg>\n");
    std::fs::write(path, s)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Commands

fn cmd_params(a: ParamsArgs) -> Result<u8> {
    let cfg = FileCfg::load(&a.config)?;
    let family = need("kernel", a.kernel.or(cfg.string("kernel")?))?;
    let l = need("l", a.l.or(cfg.f64("l")?))?;
    let nu = a.nu.or(cfg.f64("nu")?);
    let d = a.d.or(cfg.usize("d")?).unwrap_or(1);
    let eps = need("eps", a.eps.or(cfg.f64("eps")?))?;
    let rule = parse_rule(&a.rule.or(cfg.string("rule")?).unwrap_or_else(|| "rigorous".into()))?;
    let kernel = resolve_kernel(&family, l, nu)?;
    let report = studies::params_report(kernel, d, eps, rule)?;

    let resolved = json!({
        "command": "params", "kernel": family, "l": l, "nu": nu, "d": d,
        "eps": eps, "rule": rule,
    });
    println!("h = {}", report.h);
    println!("m = {}", report.m);
    println!("total modes M = {}", report.total_modes);
    if let Some(b) = report.total_bound {
        println!(
            "error budget: aliasing {} + truncation {} = {}",
            report.aliasing_bound.unwrap(),
            report.truncation_bound.unwrap(),
            b
        );
    } else {
        println!("error budget: none (heuristic rule carries no guarantee)");
    }
    if let Some(w) = &report.warning {
        eprintln!("warning: {w}");
    }
    if let Some(out) = a.out.or(cfg.path("out")?) {
        let doc = json!({ "config": resolved, "report": report });
        std::fs::write(&out, format!("{:#}\n", doc))?;
    }
    Ok(0)
}

fn cmd_synth(a: SynthArgs) -> Result<u8> {
    let cfg = FileCfg::load(&a.config)?;
    let n = need("n", a.n.or(cfg.usize("n")?))?;
    let d = a.d.or(cfg.usize("d")?).unwrap_or(1);
    let func: TestFunction = need("function", a.function.or(cfg.string("function")?))?.parse()?;
    let sigma = need("sigma", a.sigma.or(cfg.f64("sigma")?))?;
    let seed = a.seed.or(cfg.u64("seed")?).unwrap_or(0);
    let out = need("out", a.out.or(cfg.path("out")?))?;

    let ds = studies::synth_dataset(n, d, func, sigma, seed)?;
    let resolved = json!({
        "command": "synth", "n": n, "d": d, "function": func.name(),
        "sigma": sigma, "seed": seed,
    });
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    header.push("y".into());
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = (0..n)
        .map(|i| {
            let mut row: Vec<String> =
                ds.points()[i * d..(i + 1) * d].iter().map(|&v| fmt(v)).collect();
            row.push(fmt(ds.targets()[i]));
            row
        })
        .collect();
    write_csv(&out, &resolved, &header_refs, &rows)?;
    Ok(0)
}

fn cmd_fit(a: FitArgs) -> Result<u8> {
    let cfg = FileCfg::load(&a.config)?;
    let data = need("data", a.data.or(cfg.path("data")?))?;
    let family = need("kernel", a.kernel.or(cfg.string("kernel")?))?;
    let l = need("l", a.l.or(cfg.f64("l")?))?;
    let nu = a.nu.or(cfg.f64("nu")?);
    let sigma = need("sigma", a.sigma.or(cfg.f64("sigma")?))?;
    let eps = a.eps.or(cfg.f64("eps")?);
    let rule_s = a.rule.or(cfg.string("rule")?);
    let h = a.h.or(cfg.f64("h")?);
    let m = a.m.or(cfg.usize("m")?);
    let cg_tol = a.cg_tol.or(cfg.f64("cg-tol")?).unwrap_or(1e-8);
    let out = need("out", a.out.or(cfg.path("out")?))?;

    let kernel = resolve_kernel(&family, l, nu)?;
    let (d, points, targets) = read_points_csv(&data, true)?;
    let targets = targets.unwrap();
    let dataset = Dataset::new(points, targets, d, sigma)?;

    let (h, m, rule) = match (h, m) {
        (Some(h), Some(m)) => (h, m, None),
        (None, None) => {
            let eps = need("eps", eps)?;
            let rule = parse_rule(&rule_s.unwrap_or_else(|| "rigorous".into()))?;
            let rep = studies::params_report(kernel, d, eps, rule)?;
            if let Some(w) = &rep.warning {
                eprintln!("warning: {w}");
            }
            (rep.h, rep.m, Some(rule))
        }
        _ => {
            return Err(EfgpError::Argument(
                "--h and --m must be given together (or neither, with --eps)".into(),
            ))
        }
    };
    let grid = FourierGrid::build(kernel, h, m, d)?;
    let opts = FitOptions {
        cg_tol,
        max_iters: None,
    };
    let model = EFGPModel::fit(&dataset, grid, &opts)?;
    let diag = model.diagnostics().clone();

    let resolved = json!({
        "command": "fit", "data": data.display().to_string(), "kernel": family,
        "l": l, "nu": nu, "sigma": sigma, "eps": eps, "rule": rule,
        "h": h, "m": m, "cg-tol": cg_tol, "d": d, "n": dataset.len(),
    });
    let beta_path = out.with_extension("beta");
    model.save(&out, &beta_path)?;
    // splice the resolved config into the saved model JSON for provenance
    let text = std::fs::read_to_string(&out)?;
    let mut v: Value =
        serde_json::from_str(&text).map_err(|e| EfgpError::Parse(e.to_string()))?;
    v["config"] = resolved;
    std::fs::write(&out, format!("{:#}\n", v))?;

    println!(
        "fit: N = {}, M = {}, {} CG iterations, final residual {}",
        dataset.len(),
        (2 * m + 1).pow(d as u32),
        diag.iterations,
        diag.residual_history.last().copied().unwrap_or(0.0)
    );
    if !diag.converged {
        eprintln!("error: CG did not reach tolerance {cg_tol}");
        return Ok(1);
    }
    Ok(0)
}

fn cmd_predict(a: PredictArgs) -> Result<u8> {
    let cfg = FileCfg::load(&a.config)?;
    let model_path = need("model", a.model.or(cfg.path("model")?))?;
    let targets_path = need("targets", a.targets.or(cfg.path("targets")?))?;
    let with_var = a.var || cfg.0.get("var").and_then(|v| v.as_bool()).unwrap_or(false);
    let cg_tol = a.cg_tol.or(cfg.f64("cg-tol")?).unwrap_or(1e-8);
    let out = need("out", a.out.or(cfg.path("out")?))?;

    let beta_path = model_path.with_extension("beta");
    let mut model = EFGPModel::load(&model_path, &beta_path)?;
    let d = model.grid().dim();
    let (dt, points, _) = read_points_csv(&targets_path, false)?;
    if dt != d {
        return Err(EfgpError::Argument(format!(
            "targets have {dt} coordinate columns but the model is {d}-dimensional"
        )));
    }
    let mean = model.predict_mean(&points)?;
    let var = if with_var {
        Some(model.predict_var(&points, cg_tol)?)
    } else {
        None
    };

    let resolved = json!({
        "command": "predict", "model": model_path.display().to_string(),
        "targets": targets_path.display().to_string(), "var": with_var,
        "cg-tol": cg_tol,
    });
    let mut header: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
    header.push("mean".into());
    if with_var {
        header.push("var".into());
    }
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = (0..mean.len())
        .map(|i| {
            let mut row: Vec<String> =
                points[i * d..(i + 1) * d].iter().map(|&v| fmt(v)).collect();
            row.push(fmt(mean[i]));
            if let Some(var) = &var {
                row.push(fmt(var[i]));
            }
            row
        })
        .collect();
    write_csv(&out, &resolved, &header_refs, &rows)?;
    Ok(0)
}

fn check_heavy(d: usize, heavy: bool) -> Result<()> {
    if d == 3 && !heavy {
        return Err(EfgpError::Argument(
            "d = 3 studies run at reduced density and must be enabled with --heavy".into(),
        ));
    }
    if d == 0 || d > 3 {
        return Err(EfgpError::Argument(format!(
            "dimension must be 1, 2, or 3, got {d}"
        )));
    }
    Ok(())
}

fn cmd_bound_study(a: BoundStudyArgs) -> Result<u8> {
    let cfg = FileCfg::load(&a.config)?;
    let family = a.kernel.or(cfg.string("kernel")?).unwrap_or_else(|| "se".into());
    let count = a.count.or(cfg.usize("count")?).unwrap_or(50);
    let seed = a.seed.or(cfg.u64("seed")?).unwrap_or(0);
    let d_pin = a.d.or(cfg.usize("d")?);
    let out = need("out", a.out.or(cfg.path("out")?))?;
    if let Some(d) = d_pin {
        check_heavy(d, a.heavy)?;
    }

    let rows = studies::bound_study(&family, count, seed, d_pin)?;
    let resolved = json!({
        "command": "bound-study", "kernel": family, "count": count,
        "seed": seed, "d": d_pin,
    });
    let header = [
        "family", "nu", "l", "d", "h", "m", "alias_bound", "trunc_bound", "total_bound",
        "measured_sup", "pass",
    ];
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.family.clone(),
                r.nu.map(fmt).unwrap_or_default(),
                fmt(r.lengthscale),
                r.d.to_string(),
                fmt(r.h),
                r.m.to_string(),
                fmt(r.aliasing_bound),
                fmt(r.truncation_bound),
                fmt(r.total_bound),
                fmt(r.measured_sup),
                r.pass.to_string(),
            ]
        })
        .collect();
    write_csv(&out, &resolved, &header, &csv_rows)?;
    if let Some(svg) = a.svg.or(cfg.path("svg")?) {
        let series = vec![
            (
                "measured sup".to_string(),
                rows.iter()
                    .enumerate()
                    .map(|(i, r)| ((i + 1) as f64, r.measured_sup))
                    .collect(),
            ),
            (
                "bound".to_string(),
                rows.iter()
                    .enumerate()
                    .map(|(i, r)| ((i + 1) as f64, r.total_bound))
                    .collect(),
            ),
        ];
        write_svg(&svg, "bound validity sweep", "config index", "error", &series)?;
    }
    let violations = rows.iter().filter(|r| !r.pass).count();
    if violations > 0 {
        eprintln!("error: {violations} of {count} configurations violate the bound");
        return Ok(3);
    }
    println!("{count} configurations, zero bound violations");
    Ok(0)
}

fn cmd_rms_study(a: RmsStudyArgs) -> Result<u8> {
    let cfg = FileCfg::load(&a.config)?;
    let d = a.d.or(cfg.usize("d")?).unwrap_or(1);
    let heavy = a.heavy;
    check_heavy(d, heavy)?;
    let nus = a.nu.or(cfg.f64_list("nu")?).unwrap_or_else(|| vec![0.5, 1.5, 2.5]);
    let ls = a.l.or(cfg.f64_list("l")?).unwrap_or_else(|| vec![0.1, 0.25]);
    let eps = a.eps.or(cfg.f64("eps")?).unwrap_or(1e-8);
    let default_cap = match d {
        1 => 2_000_000,
        2 => 400,
        _ => 24,
    };
    let m_cap = a.m_cap.or(cfg.usize("m-cap")?).unwrap_or(default_cap);
    let out = need("out", a.out.or(cfg.path("out")?))?;

    let rows = studies::rms_study(d, &nus, &ls, eps, m_cap)?;
    let resolved = json!({
        "command": "rms-study", "d": d, "nu": nus, "l": ls, "eps": eps,
        "m-cap": m_cap,
    });
    let header = [
        "d", "nu", "l", "h", "m", "measured_rms", "heuristic_rms", "log10_ratio",
        "quadrature_converged",
    ];
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.d.to_string(),
                fmt(r.nu),
                fmt(r.lengthscale),
                fmt(r.h),
                r.m.to_string(),
                fmt(r.measured_rms),
                fmt(r.heuristic_rms),
                fmt(r.log10_ratio),
                r.quadrature_converged.to_string(),
            ]
        })
        .collect();
    write_csv(&out, &resolved, &header, &csv_rows)?;
    if let Some(svg) = a.svg.or(cfg.path("svg")?) {
        let mut series = Vec::new();
        for &nu in &nus {
            for &l in &ls {
                let pts: Vec<(f64, f64)> = rows
                    .iter()
                    .filter(|r| r.nu == nu && r.lengthscale == l)
                    .map(|r| (r.m as f64, r.measured_rms))
                    .collect();
                series.push((format!("nu={nu} l={l}"), pts));
            }
        }
        write_svg(&svg, "rms error vs m", "m", "rms error", &series)?;
    }
    println!("{} sweep points written", rows.len());
    Ok(0)
}

fn cmd_cond_study(a: CondStudyArgs) -> Result<u8> {
    let cfg = FileCfg::load(&a.config)?;
    let family = a.kernel.or(cfg.string("kernel")?).unwrap_or_else(|| "se".into());
    let l = a.l.or(cfg.f64("l")?).unwrap_or(0.1);
    let nu = a.nu.or(cfg.f64("nu")?);
    let d = a.d.or(cfg.usize("d")?).unwrap_or(1);
    let n_list = a
        .n
        .or(cfg.usize_list("n")?)
        .unwrap_or_else(|| vec![10, 100, 1000, 10_000]);
    let sigma_list = a.sigma.or(cfg.f64_list("sigma")?).unwrap_or_else(|| vec![0.3]);
    let eps = a.eps.or(cfg.f64("eps")?).unwrap_or(1e-15);
    let seed = a.seed.or(cfg.u64("seed")?).unwrap_or(0);
    let cg_tol = a.cg_tol.or(cfg.f64("cg-tol")?).unwrap_or(1e-8);
    let with_exact = !a.no_exact;
    let out = need("out", a.out.or(cfg.path("out")?))?;
    if d == 3 {
        return Err(EfgpError::Argument(
            "the conditioning study uses a dense mode-space eigensolve and supports d = 1, 2 only"
                .into(),
        ));
    }

    let kernel = resolve_kernel(&family, l, nu)?;
    let rows = studies::cond_study(
        kernel, d, &n_list, &sigma_list, eps, seed, cg_tol, with_exact,
    )?;
    let resolved = json!({
        "command": "cond-study", "kernel": family, "l": l, "nu": nu, "d": d,
        "n": n_list, "sigma": sigma_list, "eps": eps, "seed": seed,
        "cg-tol": cg_tol, "no-exact": !with_exact,
    });
    let header = [
        "seed", "n", "sigma", "modes", "kappa_exact", "kappa_fs", "kappa_ws", "bound_exact",
        "bound_ws", "bound_ws_applies", "ratio_ws", "solution_operator_norm", "cg_iterations",
        "cg_estimate", "cg_contraction", "cg_rate_bound",
    ];
    let csv_rows: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.seed.to_string(),
                r.n.to_string(),
                fmt(r.sigma),
                r.modes.to_string(),
                fmt(r.kappa_exact),
                fmt(r.kappa_fs),
                fmt(r.kappa_ws),
                fmt(r.bound_exact),
                fmt(r.bound_ws),
                r.bound_ws_applies.to_string(),
                fmt(r.ratio_ws),
                fmt(r.solution_operator_norm),
                r.cg_iterations.to_string(),
                r.cg_estimate.to_string(),
                fmt(r.cg_contraction),
                fmt(r.cg_rate_bound),
            ]
        })
        .collect();
    write_csv(&out, &resolved, &header, &csv_rows)?;
    if let Some(svg) = a.svg.or(cfg.path("svg")?) {
        let mut series = Vec::new();
        for &s in &sigma_list {
            let kw: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.sigma == s)
                .map(|r| (r.n as f64, r.kappa_ws))
                .collect();
            let bd: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.sigma == s)
                .map(|r| (r.n as f64, r.bound_exact))
                .collect();
            series.push((format!("kappa_ws sigma={s}"), kw));
            series.push((format!("bound sigma={s}"), bd));
        }
        write_svg(&svg, "conditioning vs N", "N", "condition number", &series)?;
    }

    // theory checks: every row must sit under its bounds
    let mut violations = 0usize;
    for r in &rows {
        let tol = 1.0 + 1e-9;
        if r.kappa_exact.is_finite() && r.kappa_exact > r.bound_exact * tol {
            violations += 1;
        }
        if r.kappa_ws > r.bound_exact * tol {
            violations += 1;
        }
        if r.bound_ws_applies && (r.kappa_ws > r.bound_ws * tol || r.kappa_fs > r.bound_ws * tol) {
            violations += 1;
        }
        if r.solution_operator_norm >= 1.0 {
            violations += 1;
        }
    }
    if violations > 0 {
        eprintln!("error: {violations} condition-number bound violations");
        return Ok(3);
    }
    println!("{} instances, zero bound violations", rows.len());
    Ok(0)
}
