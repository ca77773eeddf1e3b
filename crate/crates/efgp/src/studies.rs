//! Repeatable experiment drivers: synthetic data, randomized bound-validity
//! sweeps, the RMS error study, the conditioning study, and randomized
//! Poisson-identity instances. Every driver is seeded and returns plain
//! serializable rows so the CLI can dump them as CSV and the test suite can
//! assert on them directly.

use crate::bounds::{self, Rule};
use crate::error::{EfgpError, Result};
use crate::grid::FourierGrid;
use crate::kernels::KernelSpec;
use crate::oracle;
use crate::solver::{cg_iteration_estimate, Dataset, EFGPModel, FitOptions};
use rand::distributions::Distribution;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use std::str::FromStr;

// ---------------------------------------------------------------------------
// Worker pool

/// Number of worker threads: EFGP_THREADS if set, else the machine's
/// available parallelism.
pub fn worker_count() -> usize {
    if let Ok(v) = std::env::var("EFGP_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            return n.max(1);
        }
    }
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

/// Map a fallible job over items on the worker pool; results come back in
/// input order regardless of completion order.
pub fn parallel_map<T, R, F>(items: Vec<T>, f: F) -> Result<Vec<R>>
where
    T: Send,
    R: Send,
    F: Fn(T) -> Result<R> + Sync,
{
    let workers = worker_count().min(items.len().max(1));
    if workers <= 1 {
        return items.into_iter().map(f).collect();
    }
    let n = items.len();
    let slots: Vec<std::sync::Mutex<Option<Result<R>>>> =
        (0..n).map(|_| std::sync::Mutex::new(None)).collect();
    let next = std::sync::atomic::AtomicUsize::new(0);
    let items: Vec<std::sync::Mutex<Option<T>>> =
        items.into_iter().map(|t| std::sync::Mutex::new(Some(t))).collect();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let item = items[i].lock().unwrap().take().unwrap();
                *slots[i].lock().unwrap() = Some(f(item));
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().unwrap().unwrap())
        .collect()
}

// ---------------------------------------------------------------------------
// Synthetic data

/// Named test functions for synthetic regression targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestFunction {
    /// sin(6 pi (x_1 + ... + x_d))
    Sin6,
    /// prod_a (1 - cos(2 pi x_a)) / 2
    Bump,
    /// constant 1
    Const,
}

impl TestFunction {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Sin6 => {
                (6.0 * std::f64::consts::PI * x.iter().sum::<f64>()).sin()
            }
            TestFunction::Bump => x
                .iter()
                .map(|&v| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * v).cos()))
                .product(),
            TestFunction::Const => 1.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TestFunction::Sin6 => "sin6",
            TestFunction::Bump => "bump",
            TestFunction::Const => "const",
        }
    }
}

impl FromStr for TestFunction {
    type Err = EfgpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sin6" => Ok(TestFunction::Sin6),
            "bump" => Ok(TestFunction::Bump),
            "const" => Ok(TestFunction::Const),
            other => Err(EfgpError::Argument(format!(
                "unknown test function '{other}' (expected sin6 | bump | const)"
            ))),
        }
    }
}

/// Seeded iid-uniform points in [0, 1]^d, row-major.
pub fn synth_points(n: usize, d: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    (0..n * d).map(|_| rng.gen::<f64>()).collect()
}

/// Seeded dataset y_i = f(x_i) + N(0, sigma^2). Points and noise come from
/// one stream, so a (seed, n, d) triple pins the whole dataset.
pub fn synth_dataset(
    n: usize,
    d: usize,
    func: TestFunction,
    sigma: f64,
    seed: u64,
) -> Result<Dataset> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let points: Vec<f64> = (0..n * d).map(|_| rng.gen::<f64>()).collect();
    let normal = statrs::distribution::Normal::new(0.0, sigma)
        .map_err(|e| EfgpError::Argument(format!("bad noise level: {e}")))?;
    let targets: Vec<f64> = (0..n)
        .map(|i| func.eval(&points[i * d..(i + 1) * d]) + normal.sample(&mut rng))
        .collect();
    Dataset::new(points, targets, d, sigma)
}

// ---------------------------------------------------------------------------
// Bound-validity study

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundStudyRow {
    pub family: String,
    pub nu: Option<f64>,
    pub lengthscale: f64,
    pub d: usize,
    pub h: f64,
    pub m: usize,
    pub aliasing_bound: f64,
    pub truncation_bound: f64,
    pub total_bound: f64,
    pub measured_sup: f64,
    pub pass: bool,
}

fn scan_points(d: usize) -> usize {
    match d {
        1 => 10_000,
        2 => 256,
        _ => 32,
    }
}

/// Evaluate one (kernel, h, m) configuration against its uniform bound.
pub fn bound_study_row(kernel: KernelSpec, h: f64, m: usize, d: usize) -> Result<BoundStudyRow> {
    let b = bounds::budget(&kernel, h, m, d)?;
    let grid = FourierGrid::build(kernel, h, m, d)?;
    let measured = grid.sup_error_scan(scan_points(d))?;
    Ok(BoundStudyRow {
        family: kernel.family_name().to_string(),
        nu: kernel.nu(),
        lengthscale: kernel.lengthscale(),
        d,
        h,
        m,
        aliasing_bound: b.aliasing,
        truncation_bound: b.truncation,
        total_bound: b.total,
        measured_sup: measured,
        pass: measured <= b.total,
    })
}

/// Draw an admissible random SE configuration whose total bound sits above
/// the f64 measurement floor and below 1.
fn draw_se_config(
    rng: &mut ChaCha20Rng,
    d_pin: Option<usize>,
) -> Result<(KernelSpec, f64, usize, usize)> {
    for _ in 0..10_000 {
        let d = d_pin.unwrap_or(if rng.gen::<bool>() { 1 } else { 2 });
        let m_hi = if d == 3 { 20 } else { 200 };
        let l = rng.gen_range(0.05..1.0);
        let h = rng.gen_range(0.15..0.95);
        let m = rng.gen_range(4..=m_hi);
        let kernel = KernelSpec::se(l)?;
        if let Ok(b) = bounds::budget(&kernel, h, m, d) {
            if b.total >= 1e-12 && b.total <= 1.0 {
                return Ok((kernel, h, m, d));
            }
        }
    }
    Err(EfgpError::Argument(
        "could not draw an admissible se configuration".into(),
    ))
}

fn draw_matern_config(
    rng: &mut ChaCha20Rng,
    d_pin: Option<usize>,
) -> Result<(KernelSpec, f64, usize, usize)> {
    const NUS: [f64; 4] = [0.5, 1.0, 1.5, 2.5];
    for _ in 0..100_000 {
        let d = d_pin.unwrap_or(if rng.gen::<bool>() { 1 } else { 2 });
        let m_hi = if d == 3 { 20 } else { 200 };
        let nu = NUS[rng.gen_range(0..NUS.len())];
        let lmax = (nu / (2.0 * d as f64)).sqrt() / std::f64::consts::LN_2;
        let l = rng.gen_range(0.05..lmax.min(1.0));
        let hmax = 1.0 / (1.0 + (8.0 * nu).sqrt() * l);
        let h = rng.gen_range(0.15 * hmax..hmax);
        let m = rng.gen_range(4..=m_hi);
        let kernel = KernelSpec::matern(l, nu)?;
        if let Ok(b) = bounds::budget(&kernel, h, m, d) {
            if b.total >= 1e-12 && b.total <= 1.0 {
                return Ok((kernel, h, m, d));
            }
        }
    }
    Err(EfgpError::Argument(
        "could not draw an admissible matern configuration".into(),
    ))
}

/// Randomized bound-validity sweep for one kernel family. With
/// `d_pin = None`, configurations alternate between d = 1 and d = 2.
pub fn bound_study(
    family: &str,
    count: usize,
    seed: u64,
    d_pin: Option<usize>,
) -> Result<Vec<BoundStudyRow>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut configs = Vec::with_capacity(count);
    for _ in 0..count {
        configs.push(match family {
            "se" => draw_se_config(&mut rng, d_pin)?,
            "matern" => draw_matern_config(&mut rng, d_pin)?,
            other => {
                return Err(EfgpError::Argument(format!(
                    "unknown kernel family '{other}' (expected se | matern)"
                )))
            }
        });
    }
    parallel_map(configs, |(kernel, h, m, d)| bound_study_row(kernel, h, m, d))
}

// ---------------------------------------------------------------------------
// RMS error study

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RmsStudyRow {
    pub d: usize,
    pub nu: f64,
    pub lengthscale: f64,
    pub h: f64,
    pub m: usize,
    pub measured_rms: f64,
    pub heuristic_rms: f64,
    pub log10_ratio: f64,
    pub quadrature_converged: bool,
}

fn rms_rule(d: usize) -> (usize, u32) {
    match d {
        1 => (16, 18),
        2 => (10, 8),
        _ => (6, 4),
    }
}

/// One point of the RMS study: Matérn kernel on the heuristic grid spacing,
/// measured weighted-L2 error vs the heuristic prediction.
pub fn rms_study_row(nu: f64, l: f64, d: usize, h: f64, m: usize) -> Result<RmsStudyRow> {
    let kernel = KernelSpec::matern(l, nu)?;
    let grid = FourierGrid::build(kernel, h, m, d)?;
    let (order, levels) = rms_rule(d);
    let meas = grid.rms_error_measure(order, levels)?;
    let heur = bounds::rms_heuristic(nu, l, h, m, d)?;
    let ratio = if meas.value > 0.0 && heur > 0.0 {
        (meas.value / heur).log10()
    } else {
        f64::NAN
    };
    Ok(RmsStudyRow {
        d,
        nu,
        lengthscale: l,
        h,
        m,
        measured_rms: meas.value,
        heuristic_rms: heur,
        log10_ratio: ratio,
        quadrature_converged: meas.converged,
    })
}

/// Sweep m over (a bit more than) a decade for each (nu, l) pair, at the
/// heuristic h for `eps_alias`. `m_cap` keeps d = 2 grids affordable.
pub fn rms_study(
    d: usize,
    nus: &[f64],
    ls: &[f64],
    eps_alias: f64,
    m_cap: usize,
) -> Result<Vec<RmsStudyRow>> {
    const FRACTIONS: [f64; 8] = [0.1, 0.16, 0.25, 0.4, 0.63, 1.0, 1.6, 2.5];
    let mut jobs = Vec::new();
    for &nu in nus {
        for &l in ls {
            let h = bounds::heuristic_h(nu, l, eps_alias)?.h;
            let m_sat = bounds::heuristic_m(nu, l, h, eps_alias, d)?.m;
            let mut seen = std::collections::BTreeSet::new();
            for f in FRACTIONS {
                let m = ((m_sat as f64 * f).round() as usize).clamp(2, m_cap);
                if seen.insert(m) {
                    jobs.push((nu, l, h, m));
                }
            }
        }
    }
    parallel_map(jobs, |(nu, l, h, m)| rms_study_row(nu, l, d, h, m))
}

// ---------------------------------------------------------------------------
// Conditioning study

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CondStudyRow {
    pub seed: u64,
    pub n: usize,
    pub sigma: f64,
    pub modes: usize,
    /// Dense full-decomposition kappa(K + sigma^2 I); skipped (NaN) when the
    /// driver was asked not to pay for the N x N eigensolve.
    pub kappa_exact: f64,
    pub kappa_fs: f64,
    pub kappa_ws: f64,
    /// N / sigma^2 + 1.
    pub bound_exact: f64,
    /// Perturbation bound on kappa_fs/kappa_ws from the measured kernel gap.
    /// Only guaranteed when the mode count is below N (the proof needs the
    /// approximate kernel matrix to be rank deficient).
    pub bound_ws: f64,
    pub bound_ws_applies: bool,
    pub ratio_ws: f64,
    pub solution_operator_norm: f64,
    pub cg_iterations: usize,
    pub cg_estimate: usize,
    /// Geometric-mean per-iteration residual contraction.
    pub cg_contraction: f64,
    pub cg_rate_bound: f64,
}

/// One conditioning instance: seeded uniform points, an eps-converged grid,
/// dense spectra, and a CG fit for the iteration statistics.
pub fn cond_study_row(
    kernel: KernelSpec,
    d: usize,
    n: usize,
    sigma: f64,
    eps: f64,
    seed: u64,
    cg_tol: f64,
    with_exact: bool,
) -> Result<CondStudyRow> {
    let params = match kernel {
        KernelSpec::Se { lengthscale } => bounds::se_params(lengthscale, d, eps)?,
        KernelSpec::Matern { lengthscale, nu } => bounds::matern_params(nu, lengthscale, d, eps)?,
    };
    let grid = FourierGrid::build(kernel, params.h, params.m, d)?;
    let ds = synth_dataset(n, d, TestFunction::Sin6, sigma, seed)?;
    let s2 = sigma * sigma;

    let eig_ws = oracle::ws_system_eigenvalues(&grid, &ds)?;
    let lam_lo = eig_ws.first().copied().unwrap_or(s2).max(0.0);
    let lam_hi = eig_ws.last().copied().unwrap_or(s2);
    let kappa_ws = lam_hi / lam_lo;
    let phi_max = (lam_hi - s2).max(0.0);
    let mut phis: Vec<f64> = eig_ws.iter().map(|&l| (l - s2).max(0.0)).collect();
    phis.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let positive = phis.iter().filter(|&&l| l > phi_max * 1e-12).count();
    // Ktilde shares the nonzero spectrum; when its rank reaches N it has no
    // sigma^2 floor and the smallest of the N retained eigenvalues governs.
    let lam_min_fs = if positive < n { s2 } else { s2 + phis[n - 1] };
    let kappa_fs = if n == 0 { 1.0 } else { lam_hi / lam_min_fs };
    let solution_operator_norm = phi_max / (phi_max + s2);

    let kappa_exact = if with_exact && n > 0 {
        let k = oracle::dense_covariance(grid.kernel(), ds.points(), d)?;
        if n <= 2000 {
            let eig = crate::lapack::symmetric_eigenvalues(k, n)?;
            (eig.last().unwrap_or(&0.0).max(0.0) + s2)
                / (eig.first().unwrap_or(&0.0).max(0.0) + s2)
        } else {
            // The full decomposition is O(n^3); at this size only the
            // spectral edges matter, and Lanczos pins both (the lower edge
            // sits in the near-null cluster, far below sigma^2).
            let (lo, hi) = oracle::extreme_eigenvalues_dense(&k, n, 120)?;
            (hi.max(0.0) + s2) / (lo.max(0.0) + s2)
        }
    } else if with_exact {
        1.0
    } else {
        f64::NAN
    };

    // Measured kernel gap for the perturbation bound: dense Frobenius when
    // affordable, else N times the scanned sup error.
    let err_n = if n <= 2000 && with_exact {
        let k = oracle::dense_covariance(grid.kernel(), ds.points(), d)?;
        let kt = oracle::dense_covariance_approx(&grid, ds.points())?;
        k.iter()
            .zip(&kt)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    } else {
        n as f64 * grid.sup_error_scan(scan_points(d))?
    };
    let bound_exact = oracle::ws_condition_bound(n, sigma)?;
    let bound_ws = if with_exact && kappa_exact.is_finite() {
        oracle::ws_bound(kappa_exact, err_n, sigma)?
    } else {
        oracle::ws_bound(bound_exact, err_n, sigma)?
    };

    let opts = FitOptions {
        cg_tol,
        max_iters: None,
    };
    let model = EFGPModel::fit(&ds, grid, &opts)?;
    let hist = &model.diagnostics().residual_history;
    let cg_iterations = hist.len();
    let cg_contraction = if let Some(&last) = hist.last() {
        if cg_iterations > 0 && last > 0.0 {
            last.powf(1.0 / cg_iterations as f64)
        } else {
            0.0
        }
    } else {
        0.0
    };
    let sk = kappa_ws.sqrt();
    let cg_rate_bound = (sk - 1.0) / (sk + 1.0);
    let cg_estimate = cg_iteration_estimate(kappa_ws.max(1.0), cg_tol)?;

    Ok(CondStudyRow {
        seed,
        n,
        sigma,
        modes: eig_ws.len(),
        kappa_exact,
        kappa_fs,
        kappa_ws,
        bound_exact,
        bound_ws,
        bound_ws_applies: eig_ws.len() < n,
        ratio_ws: kappa_ws / bound_exact,
        solution_operator_norm,
        cg_iterations,
        cg_estimate,
        cg_contraction,
        cg_rate_bound,
    })
}

/// Sweep N x sigma; each instance gets its own derived seed.
#[allow(clippy::too_many_arguments)]
pub fn cond_study(
    kernel: KernelSpec,
    d: usize,
    n_list: &[usize],
    sigma_list: &[f64],
    eps: f64,
    seed: u64,
    cg_tol: f64,
    with_exact: bool,
) -> Result<Vec<CondStudyRow>> {
    let mut jobs = Vec::new();
    for (i, &n) in n_list.iter().enumerate() {
        for (j, &s) in sigma_list.iter().enumerate() {
            jobs.push((n, s, seed.wrapping_add((i * sigma_list.len() + j) as u64)));
        }
    }
    parallel_map(jobs, |(n, s, inst_seed)| {
        cond_study_row(kernel, d, n, s, eps, inst_seed, cg_tol, with_exact)
    })
}

// ---------------------------------------------------------------------------
// Poisson-identity instances

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoissonStudyRow {
    pub family: String,
    pub nu: Option<f64>,
    pub lengthscale: f64,
    pub d: usize,
    pub h: f64,
    pub m: usize,
    pub z: Vec<f64>,
    pub radius: usize,
    pub residual: f64,
    pub certified_tail: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Run one identity check, growing the brute-force radius until the
/// certified tails sit below half the tolerance.
pub fn poisson_instance(
    kernel: KernelSpec,
    h: f64,
    m: usize,
    z: &[f64],
    tol: f64,
) -> Result<PoissonStudyRow> {
    let d = z.len();
    let grid = FourierGrid::build(kernel, h, m, d)?;
    let mut radius = (2 * m).max(8);
    loop {
        let tails = grid.aliasing_tail_bound(radius)? + grid.truncation_tail_bound(radius)?;
        if tails <= 0.5 * tol {
            break;
        }
        radius *= 2;
        let cost = (2 * radius + 1).pow(d as u32);
        if cost > 60_000_000 {
            return Err(EfgpError::Resource(format!(
                "identity check needs brute-force radius {radius} in d = {d} \
                 ({cost} lattice points) to certify tails below {tol:.1e}"
            )));
        }
    }
    let check = grid.poisson_identity_check(z, radius)?;
    Ok(PoissonStudyRow {
        family: kernel.family_name().to_string(),
        nu: kernel.nu(),
        lengthscale: kernel.lengthscale(),
        d,
        h,
        m,
        z: z.to_vec(),
        radius,
        residual: check.residual,
        certified_tail: check.certified_tail,
        tolerance: tol,
        pass: check.residual <= tol && check.certified_tail <= 0.5 * tol,
    })
}

/// Randomized identity sweep. Matérn smoothness is drawn from nu >= 1 (and
/// nu >= 2 in d = 2), where the power-law lattice tails can be certified at
/// a feasible brute-force radius.
pub fn poisson_study(count: usize, seed: u64) -> Result<Vec<PoissonStudyRow>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut jobs = Vec::with_capacity(count);
    for i in 0..count {
        let matern = i % 2 == 1;
        let d = if rng.gen::<bool>() { 1 } else { 2 };
        let (kernel, h, tol) = if matern {
            let nus_1d = [1.0, 1.5, 2.0, 2.5];
            let nus_2d = [2.0, 2.5];
            let nu = if d == 1 {
                nus_1d[rng.gen_range(0..nus_1d.len())]
            } else {
                nus_2d[rng.gen_range(0..nus_2d.len())]
            };
            let lmax = (nu / (2.0 * d as f64)).sqrt() / std::f64::consts::LN_2;
            let l = rng.gen_range(0.1..lmax.min(0.6));
            let hmax = 1.0 / (1.0 + (8.0 * nu).sqrt() * l);
            let h = rng.gen_range(0.5 * hmax..hmax);
            (KernelSpec::matern(l, nu)?, h, 1e-8)
        } else {
            let l = rng.gen_range(0.1..0.8);
            let h = rng.gen_range(0.3..0.8);
            (KernelSpec::se(l)?, h, 1e-10)
        };
        let m = rng.gen_range(4..=24usize);
        let z: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        jobs.push((kernel, h, m, z, tol));
    }
    parallel_map(jobs, |(kernel, h, m, z, tol)| {
        poisson_instance(kernel, h, m, &z, tol)
    })
}

// ---------------------------------------------------------------------------
// Parameter-rule printout support

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsReport {
    pub family: String,
    pub nu: Option<f64>,
    pub lengthscale: f64,
    pub d: usize,
    pub target_eps: f64,
    pub rule: Rule,
    pub h: f64,
    pub m: usize,
    pub total_modes: usize,
    pub aliasing_bound: Option<f64>,
    pub truncation_bound: Option<f64>,
    pub total_bound: Option<f64>,
    pub warning: Option<String>,
}

/// Resolve (h, m) for a kernel under the requested rule.
pub fn params_report(kernel: KernelSpec, d: usize, eps: f64, rule: Rule) -> Result<ParamsReport> {
    let p = match (kernel, rule) {
        (KernelSpec::Se { lengthscale }, Rule::Rigorous) => bounds::se_params(lengthscale, d, eps)?,
        (KernelSpec::Se { .. }, Rule::Heuristic) => {
            return Err(EfgpError::Argument(
                "the heuristic rule is calibrated for the matern family only".into(),
            ))
        }
        (KernelSpec::Matern { lengthscale, nu }, Rule::Rigorous) => {
            bounds::matern_params(nu, lengthscale, d, eps)?
        }
        (KernelSpec::Matern { lengthscale, nu }, Rule::Heuristic) => {
            let h = bounds::heuristic_h(nu, lengthscale, eps)?;
            let mut p = bounds::heuristic_m(nu, lengthscale, h.h, eps, d)?;
            p.warning = p.warning.or(h.warning);
            p
        }
    };
    let total_modes = (2 * p.m + 1).pow(d as u32);
    Ok(ParamsReport {
        family: kernel.family_name().to_string(),
        nu: kernel.nu(),
        lengthscale: kernel.lengthscale(),
        d,
        target_eps: eps,
        rule,
        h: p.h,
        m: p.m,
        total_modes,
        aliasing_bound: p.budget.map(|b| b.aliasing),
        truncation_bound: p.budget.map(|b| b.truncation),
        total_bound: p.budget.map(|b| b.total),
        warning: p.warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synth_is_seed_deterministic() {
        let a = synth_dataset(50, 2, TestFunction::Sin6, 0.3, 7).unwrap();
        let b = synth_dataset(50, 2, TestFunction::Sin6, 0.3, 7).unwrap();
        assert_eq!(a.points(), b.points());
        assert_eq!(a.targets(), b.targets());
        let c = synth_dataset(50, 2, TestFunction::Sin6, 0.3, 8).unwrap();
        assert_ne!(a.points(), c.points());
    }

    #[test]
    fn synth_points_clt() {
        // sample mean of 1e5 uniform draws per coordinate within 0.5 +- 0.01
        let pts = synth_points(100_000, 2, 123);
        for a in 0..2 {
            let mean: f64 =
                pts.iter().skip(a).step_by(2).sum::<f64>() / 100_000.0;
            assert!((mean - 0.5).abs() < 0.01, "axis {a}: {mean}");
        }
    }

    #[test]
    fn test_functions_evaluate() {
        assert_eq!(TestFunction::Const.eval(&[0.3, 0.7]), 1.0);
        assert!((TestFunction::Bump.eval(&[0.5]) - 1.0).abs() < 1e-15);
        assert!(TestFunction::Bump.eval(&[0.0]).abs() < 1e-15);
        assert!(TestFunction::Sin6.eval(&[1.0 / 12.0]).abs() > 0.99);
        assert!("nope".parse::<TestFunction>().is_err());
    }

    #[test]
    fn bound_study_small_sweep_passes() {
        let rows = bound_study("se", 6, 42, None).unwrap();
        assert_eq!(rows.len(), 6);
        for r in &rows {
            assert!(r.pass, "violation: {r:?}");
            assert!(r.total_bound <= 1.0 && r.total_bound >= 1e-12);
        }
        let rows = bound_study("matern", 4, 43, None).unwrap();
        for r in &rows {
            assert!(r.pass, "violation: {r:?}");
        }
    }

    #[test]
    fn poisson_small_sweep_passes() {
        let rows = poisson_study(6, 11).unwrap();
        for r in &rows {
            assert!(r.pass, "identity failure: {r:?}");
        }
    }

    #[test]
    fn rms_row_tracks_heuristic_in_truncation_regime() {
        // mid-sweep point: truncation dominated, ratio within half a digit
        let h = bounds::heuristic_h(1.5, 0.1, 1e-8).unwrap().h;
        let m_sat = bounds::heuristic_m(1.5, 0.1, h, 1e-8, 1).unwrap().m;
        let row = rms_study_row(1.5, 0.1, 1, h, m_sat / 4).unwrap();
        assert!(row.quadrature_converged);
        assert!(
            row.log10_ratio.abs() <= 0.5,
            "ratio off: {}",
            row.log10_ratio
        );
    }

    #[test]
    fn cond_row_consistency() {
        let k = KernelSpec::se(0.1).unwrap();
        let row = cond_study_row(k, 1, 200, 0.3, 1e-15, 5, 1e-8, true).unwrap();
        assert!(row.kappa_exact <= row.bound_exact * (1.0 + 1e-9));
        assert!(row.kappa_ws <= row.bound_exact * (1.0 + 1e-9));
        assert!(row.solution_operator_norm < 1.0);
        assert!(row.bound_ws_applies);
        assert!(row.kappa_ws <= row.bound_ws * (1.0 + 1e-9));
        assert!(row.kappa_fs <= row.bound_ws * (1.0 + 1e-9));
        assert!((row.kappa_fs.log10() - row.kappa_exact.log10()).abs() < 0.05);
        assert!(row.cg_iterations <= row.cg_estimate);
    }

    #[test]
    fn params_report_both_rules() {
        let k = KernelSpec::matern(0.1, 0.5).unwrap();
        let rig = params_report(k, 1, 1e-3, Rule::Rigorous).unwrap();
        let heu = params_report(k, 1, 1e-3, Rule::Heuristic).unwrap();
        assert_eq!(rig.m, 5286);
        assert!(heu.m < rig.m / 10, "heuristic m {} vs rigorous {}", heu.m, rig.m);
        assert!(rig.total_bound.unwrap() <= 1e-3);
    }

    #[test]
    fn worker_pool_respects_order() {
        let out = parallel_map((0..100).collect::<Vec<_>>(), |i| Ok(i * 2)).unwrap();
        assert_eq!(out, (0..100).map(|i| i * 2).collect::<Vec<_>>());
    }
}
