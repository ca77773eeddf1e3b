//! Weight-space GP regression in the equispaced Fourier basis.
//!
//! Fitting solves (Phi* Phi + sigma^2 I) beta = Phi* y by conjugate
//! gradients, where Phi has entries phi_j(x_i) = sqrt(w_j) e^{2 pi i h <j, x_i>}.
//! Phi* Phi is applied as D^{1/2} T D^{1/2} with D = diag(w) and T the
//! pure-phase Toeplitz operator, so each iteration costs a pair of FFTs.

use crate::error::{EfgpError, Result};
use crate::grid::FourierGrid;
use crate::transforms::{nudft_type1, nudft_type2, ToeplitzOperator};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

/// Scattered observations on the unit cube with a fixed noise level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dataset {
    d: usize,
    points: Vec<f64>,
    targets: Vec<f64>,
    sigma: f64,
}

pub(crate) fn check_unit_cube(points: &[f64], d: usize) -> Result<usize> {
    if d == 0 || d > 3 {
        return Err(EfgpError::Argument(format!(
            "dimension must be 1, 2, or 3, got {d}"
        )));
    }
    if points.len() % d != 0 {
        return Err(EfgpError::Argument(format!(
            "flat point buffer of length {} is not a multiple of d = {d}",
            points.len()
        )));
    }
    for (i, &v) in points.iter().enumerate() {
        if !v.is_finite() {
            return Err(EfgpError::Domain(format!(
                "point {} has a non-finite coordinate",
                i / d
            )));
        }
        if !(0.0..=1.0).contains(&v) {
            return Err(EfgpError::Domain(format!(
                "point {} coordinate {v} lies outside [0, 1]; rescale the data to the unit cube first",
                i / d
            )));
        }
    }
    Ok(points.len() / d)
}

impl Dataset {
    /// `points` is row-major N x d. An empty dataset is allowed (it yields
    /// the prior). Points must already be scaled into [0, 1]^d.
    pub fn new(points: Vec<f64>, targets: Vec<f64>, d: usize, sigma: f64) -> Result<Self> {
        let n = check_unit_cube(&points, d)?;
        if targets.len() != n {
            return Err(EfgpError::Argument(format!(
                "{} targets for {n} points",
                targets.len()
            )));
        }
        if targets.iter().any(|v| !v.is_finite()) {
            return Err(EfgpError::Domain("non-finite target value".into()));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(EfgpError::Domain(format!(
                "noise level sigma must be positive and finite, got {sigma}"
            )));
        }
        Ok(Dataset {
            d,
            points,
            targets,
            sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }
}

/// Conjugate-gradient controls.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FitOptions {
    /// Relative residual tolerance.
    pub cg_tol: f64,
    /// Iteration cap; `None` picks 10 ceil(sqrt(N)/sigma), clamped to
    /// [32, 100_000].
    pub max_iters: Option<usize>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            cg_tol: 1e-8,
            max_iters: None,
        }
    }
}

/// What the CG run did.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Relative residual after each iteration.
    pub residual_history: Vec<f64>,
    pub beta_norm: f64,
    pub rhs_norm: f64,
}

/// A fitted model: grid, noise level, weight-space coefficients, and the
/// training points (kept so posterior variance can rebuild the Gram
/// operator after a load).
#[derive(Debug, Serialize, Deserialize)]
pub struct EFGPModel {
    grid: FourierGrid,
    sigma: f64,
    train_points: Vec<f64>,
    diagnostics: FitDiagnostics,
    #[serde(skip)]
    beta: Vec<Complex64>,
    #[serde(skip)]
    gram: Option<ToeplitzOperator>,
}

/// Solve a Hermitian positive-definite system by conjugate gradients with a
/// zero initial guess. Returns the solution, the relative residual after
/// each iteration, and whether the tolerance was met.
pub fn cg_solve<F>(
    apply: F,
    b: &[Complex64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<Complex64>, Vec<f64>, bool)>
where
    F: Fn(&[Complex64]) -> Result<Vec<Complex64>>,
{
    let bnorm = b.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    let mut x = vec![Complex64::new(0.0, 0.0); b.len()];
    if bnorm == 0.0 {
        return Ok((x, Vec::new(), true));
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut rs: f64 = r.iter().map(|c| c.norm_sqr()).sum();
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..max_iter {
        let ap = apply(&p)?;
        let pap: Complex64 = p.iter().zip(&ap).map(|(a, b)| a.conj() * b).sum();
        if !(pap.re > 0.0) {
            return Err(EfgpError::Linalg(format!(
                "operator lost positive definiteness in CG (p*Ap = {pap})"
            )));
        }
        let alpha = rs / pap.re;
        for ((xi, pi), (ri, api)) in x.iter_mut().zip(&p).zip(r.iter_mut().zip(&ap)) {
            *xi += alpha * pi;
            *ri -= alpha * api;
        }
        let rs_new: f64 = r.iter().map(|c| c.norm_sqr()).sum();
        let rel = rs_new.sqrt() / bnorm;
        history.push(rel);
        if rel <= tol {
            converged = true;
            break;
        }
        let beta = rs_new / rs;
        rs = rs_new;
        for (pi, &ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
    }
    Ok((x, history, converged))
}

/// Classical CG iteration count estimate to reach `tol` at condition
/// number `kappa`: ceil( ln(2/tol) / ln((sqrt(kappa)+1)/(sqrt(kappa)-1)) ).
pub fn cg_iteration_estimate(kappa: f64, tol: f64) -> Result<usize> {
    if !(kappa >= 1.0) || !kappa.is_finite() {
        return Err(EfgpError::Argument(format!(
            "condition number must be >= 1, got {kappa}"
        )));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return Err(EfgpError::Argument(format!(
            "tolerance must lie in (0, 1), got {tol}"
        )));
    }
    if kappa == 1.0 {
        return Ok(1);
    }
    let s = kappa.sqrt();
    let rate = ((s + 1.0) / (s - 1.0)).ln();
    Ok(((2.0 / tol).ln() / rate).ceil() as usize)
}

impl EFGPModel {
    /// Fit by CG on the weight-space normal equations.
    pub fn fit(dataset: &Dataset, grid: FourierGrid, opts: &FitOptions) -> Result<Self> {
        if dataset.dim() != grid.dim() {
            return Err(EfgpError::Argument(format!(
                "dataset dimension {} does not match grid dimension {}",
                dataset.dim(),
                grid.dim()
            )));
        }
        if !(opts.cg_tol > 0.0 && opts.cg_tol < 1.0) {
            return Err(EfgpError::Argument(format!(
                "cg tolerance must lie in (0, 1), got {}",
                opts.cg_tol
            )));
        }
        let n = dataset.len();
        let sigma = dataset.sigma();
        let gram = ToeplitzOperator::build(dataset.points(), grid.dim(), grid.h(), grid.m())?;
        let sqrt_w: Vec<f64> = grid.weights().iter().map(|&w| w.sqrt()).collect();
        let yc: Vec<Complex64> = dataset
            .targets()
            .iter()
            .map(|&y| Complex64::new(y, 0.0))
            .collect();
        let mut rhs = nudft_type1(dataset.points(), grid.dim(), grid.h(), grid.m(), &yc)?;
        for (r, &s) in rhs.iter_mut().zip(&sqrt_w) {
            *r *= s;
        }
        let sig2 = sigma * sigma;
        let apply = |v: &[Complex64]| -> Result<Vec<Complex64>> {
            let scaled: Vec<Complex64> = v.iter().zip(&sqrt_w).map(|(c, &s)| c * s).collect();
            let mut tv = gram.apply(&scaled)?;
            for ((t, &s), &vi) in tv.iter_mut().zip(&sqrt_w).zip(v) {
                *t = *t * s + sig2 * vi;
            }
            Ok(tv)
        };
        let max_iter = opts.max_iters.unwrap_or_else(|| {
            ((10.0 * (n as f64).sqrt() / sigma).ceil() as usize).clamp(32, 100_000)
        });
        let (beta, history, converged) = cg_solve(apply, &rhs, opts.cg_tol, max_iter)?;
        let diagnostics = FitDiagnostics {
            iterations: history.len(),
            converged,
            beta_norm: beta.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt(),
            rhs_norm: rhs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt(),
            residual_history: history,
        };
        Ok(EFGPModel {
            grid,
            sigma,
            train_points: dataset.points().to_vec(),
            diagnostics,
            beta: beta.to_vec(),
            gram: Some(gram),
        })
    }

    pub fn grid(&self) -> &FourierGrid {
        &self.grid
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn beta(&self) -> &[Complex64] {
        &self.beta
    }

    pub fn diagnostics(&self) -> &FitDiagnostics {
        &self.diagnostics
    }

    fn gram_operator(&mut self) -> Result<&ToeplitzOperator> {
        if self.gram.is_none() {
            self.gram = Some(ToeplitzOperator::build(
                &self.train_points,
                self.grid.dim(),
                self.grid.h(),
                self.grid.m(),
            )?);
        }
        Ok(self.gram.as_ref().unwrap())
    }

    /// Posterior mean at the given targets (row-major N x d, in [0, 1]^d).
    pub fn predict_mean(&self, points: &[f64]) -> Result<Vec<f64>> {
        check_unit_cube(points, self.grid.dim())?;
        let coeffs: Vec<Complex64> = self
            .beta
            .iter()
            .zip(self.grid.weights())
            .map(|(b, &w)| b * w.sqrt())
            .collect();
        let vals = nudft_type2(points, self.grid.dim(), self.grid.h(), self.grid.m(), &coeffs)?;
        Ok(vals.iter().map(|c| c.re).collect())
    }

    /// Posterior variance at the given targets, via the push-through
    /// identity `s^2(x) = sigma^2 phi(x)* (Phi* Phi + sigma^2 I)^{-1} phi(x)`.
    /// Each target costs one CG solve.
    pub fn predict_var(&mut self, points: &[f64], cg_tol: f64) -> Result<Vec<f64>> {
        let npts = check_unit_cube(points, self.grid.dim())?;
        let d = self.grid.dim();
        let sig2 = self.sigma * self.sigma;
        let sqrt_w: Vec<f64> = self.grid.weights().iter().map(|&w| w.sqrt()).collect();
        let n_train = self.train_points.len() / d.max(1);
        let max_iter = ((10.0 * (n_train.max(1) as f64).sqrt() / self.sigma).ceil() as usize)
            .clamp(32, 100_000);
        self.gram_operator()?;
        let gram = self.gram.as_ref().unwrap();
        let apply = |v: &[Complex64]| -> Result<Vec<Complex64>> {
            let scaled: Vec<Complex64> = v.iter().zip(&sqrt_w).map(|(c, &s)| c * s).collect();
            let mut tv = gram.apply(&scaled)?;
            for ((t, &s), &vi) in tv.iter_mut().zip(&sqrt_w).zip(v) {
                *t = *t * s + sig2 * vi;
            }
            Ok(tv)
        };
        let mut out = Vec::with_capacity(npts);
        for i in 0..npts {
            // cross-covariance with the training set is Phi conj(phi(x)),
            // so the push-through quadratic form acts on the conjugate.
            let phi: Vec<Complex64> = self
                .grid
                .feature_vector(&points[i * d..(i + 1) * d])?
                .iter()
                .map(|c| c.conj())
                .collect();
            let (u, _, converged) = cg_solve(&apply, &phi, cg_tol, max_iter)?;
            if !converged {
                return Err(EfgpError::Linalg(format!(
                    "variance solve failed to reach tolerance {cg_tol} at target {i}"
                )));
            }
            let quad: f64 = phi.iter().zip(&u).map(|(p, ui)| (p.conj() * ui).re).sum();
            out.push((sig2 * quad).max(0.0));
        }
        Ok(out)
    }

    /// Write the model as a JSON sidecar plus a binary coefficient dump.
    pub fn save(&self, json_path: &Path, beta_path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| EfgpError::Parse(format!("model serialization failed: {e}")))?;
        std::fs::write(json_path, json)?;
        write_beta(beta_path, self.grid.dim(), self.grid.m(), &self.beta)
    }

    /// Read a model back; the coefficient dump must match the grid shape.
    pub fn load(json_path: &Path, beta_path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(json_path)?;
        let mut model: EFGPModel = serde_json::from_str(&text)
            .map_err(|e| EfgpError::Parse(format!("model deserialization failed: {e}")))?;
        let (d, m, beta) = read_beta(beta_path)?;
        if d != model.grid.dim() || m != model.grid.m() {
            return Err(EfgpError::Parse(format!(
                "coefficient dump is for d = {d}, m = {m}; model grid has d = {}, m = {}",
                model.grid.dim(),
                model.grid.m()
            )));
        }
        model.beta = beta;
        Ok(model)
    }
}

const BETA_MAGIC: &[u8; 8] = b"EFGPBETA";

/// Binary coefficient dump: 16-byte header (magic, d: u16, m: u32,
/// flags: u16, little-endian) followed by (2m+1)^d (re, im) f64 pairs.
pub fn write_beta(path: &Path, d: usize, m: usize, beta: &[Complex64]) -> Result<()> {
    let expected = (2 * m + 1).pow(d as u32);
    if beta.len() != expected {
        return Err(EfgpError::Argument(format!(
            "{} coefficients for a (2*{m}+1)^{d} lattice",
            beta.len()
        )));
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(BETA_MAGIC)?;
    f.write_all(&(d as u16).to_le_bytes())?;
    f.write_all(&(m as u32).to_le_bytes())?;
    f.write_all(&0u16.to_le_bytes())?;
    for c in beta {
        f.write_all(&c.re.to_le_bytes())?;
        f.write_all(&c.im.to_le_bytes())?;
    }
    f.flush()?;
    Ok(())
}

pub fn read_beta(path: &Path) -> Result<(usize, usize, Vec<Complex64>)> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut header = [0u8; 16];
    f.read_exact(&mut header)?;
    if &header[0..8] != BETA_MAGIC {
        return Err(EfgpError::Parse(
            "coefficient dump has the wrong magic header".into(),
        ));
    }
    let d = u16::from_le_bytes([header[8], header[9]]) as usize;
    let m = u32::from_le_bytes([header[10], header[11], header[12], header[13]]) as usize;
    let flags = u16::from_le_bytes([header[14], header[15]]);
    if flags != 0 {
        return Err(EfgpError::Parse(format!(
            "coefficient dump uses unknown flags {flags:#06x}"
        )));
    }
    if d == 0 || d > 3 {
        return Err(EfgpError::Parse(format!("coefficient dump claims d = {d}")));
    }
    let total = (2 * m + 1)
        .checked_pow(d as u32)
        .ok_or_else(|| EfgpError::Parse(format!("coefficient dump claims m = {m}")))?;
    let mut beta = Vec::with_capacity(total);
    let mut buf = [0u8; 16];
    for _ in 0..total {
        f.read_exact(&mut buf)?;
        beta.push(Complex64::new(
            f64::from_le_bytes(buf[0..8].try_into().unwrap()),
            f64::from_le_bytes(buf[8..16].try_into().unwrap()),
        ));
    }
    Ok((d, m, beta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::KernelSpec;
    use crate::lapack::spd_solve;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn toy_dataset(seed: u64, n: usize, d: usize, sigma: f64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<f64> = (0..n * d).map(|_| rng.gen::<f64>()).collect();
        let targets: Vec<f64> = (0..n)
            .map(|i| {
                let x = points[i * d];
                (6.0 * x).sin() + 0.1 * rng.gen::<f64>()
            })
            .collect();
        Dataset::new(points, targets, d, sigma).unwrap()
    }

    /// Dense function-space reference: posterior with the *approximate*
    /// kernel ktilde, which the weight-space solution matches exactly.
    fn dense_reference(
        ds: &Dataset,
        grid: &FourierGrid,
        targets: &[f64],
    ) -> (Vec<f64>, Vec<f64>) {
        let n = ds.len();
        let d = ds.dim();
        let mut ktil = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let z: Vec<f64> = (0..d)
                    .map(|a| ds.points()[i * d + a] - ds.points()[j * d + a])
                    .collect();
                ktil[i * n + j] = grid.kernel_approx(&z).unwrap();
            }
        }
        let mut a = ktil.clone();
        let s2 = ds.sigma() * ds.sigma();
        for i in 0..n {
            a[i * n + i] += s2;
        }
        let alpha = spd_solve(a, ds.targets().to_vec(), n, 1).unwrap();
        let nt = targets.len() / d;
        let k0 = grid.weight_sum();
        let mut means = Vec::with_capacity(nt);
        let mut vars = Vec::with_capacity(nt);
        for t in 0..nt {
            let kx: Vec<f64> = (0..n)
                .map(|i| {
                    let z: Vec<f64> = (0..d)
                        .map(|a| targets[t * d + a] - ds.points()[i * d + a])
                        .collect();
                    grid.kernel_approx(&z).unwrap()
                })
                .collect();
            means.push(kx.iter().zip(&alpha).map(|(a, b)| a * b).sum());
            let mut a2 = ktil.clone();
            for i in 0..n {
                a2[i * n + i] += s2;
            }
            let u = spd_solve(a2, kx.clone(), n, 1).unwrap();
            vars.push(k0 - kx.iter().zip(&u).map(|(a, b)| a * b).sum::<f64>());
        }
        (means, vars)
    }

    #[test]
    fn fit_matches_dense_function_space_posterior() {
        let ds = toy_dataset(42, 25, 1, 0.3);
        let grid = FourierGrid::build(KernelSpec::se(0.2).unwrap(), 0.35, 12, 1).unwrap();
        let opts = FitOptions {
            cg_tol: 1e-12,
            max_iters: Some(10_000),
        };
        let mut model = EFGPModel::fit(&ds, grid.clone(), &opts).unwrap();
        assert!(model.diagnostics().converged);
        let targets = vec![0.05, 0.33, 0.71, 0.98];
        let mean = model.predict_mean(&targets).unwrap();
        let var = model.predict_var(&targets, 1e-12).unwrap();
        let (mref, vref) = dense_reference(&ds, &grid, &targets);
        for (a, b) in mean.iter().zip(&mref) {
            assert!((a - b).abs() < 1e-8, "mean {a} vs {b}");
        }
        for (a, b) in var.iter().zip(&vref) {
            assert!((a - b).abs() < 1e-8, "var {a} vs {b}");
        }
    }

    #[test]
    fn fit_matches_dense_2d_matern() {
        let ds = toy_dataset(7, 20, 2, 0.25);
        let grid = FourierGrid::build(KernelSpec::matern(0.3, 1.5).unwrap(), 0.3, 6, 2).unwrap();
        let opts = FitOptions {
            cg_tol: 1e-12,
            max_iters: Some(10_000),
        };
        let mut model = EFGPModel::fit(&ds, grid.clone(), &opts).unwrap();
        let targets = vec![0.2, 0.8, 0.5, 0.5];
        let mean = model.predict_mean(&targets).unwrap();
        let var = model.predict_var(&targets, 1e-12).unwrap();
        let (mref, vref) = dense_reference(&ds, &grid, &targets);
        for (a, b) in mean.iter().zip(&mref) {
            assert!((a - b).abs() < 1e-8, "mean {a} vs {b}");
        }
        for (a, b) in var.iter().zip(&vref) {
            assert!((a - b).abs() < 1e-8, "var {a} vs {b}");
        }
    }

    #[test]
    fn empty_dataset_gives_prior() {
        let ds = Dataset::new(Vec::new(), Vec::new(), 1, 0.5).unwrap();
        let grid = FourierGrid::build(KernelSpec::se(0.2).unwrap(), 0.4, 10, 1).unwrap();
        let mut model = EFGPModel::fit(&ds, grid, &FitOptions::default()).unwrap();
        let mean = model.predict_mean(&[0.3]).unwrap();
        assert_eq!(mean[0], 0.0);
        let var = model.predict_var(&[0.3], 1e-10).unwrap();
        // prior variance is ktilde(0)
        let k0 = model.grid().weight_sum();
        assert!((var[0] - k0).abs() < 1e-10, "{} vs {k0}", var[0]);
    }

    #[test]
    fn fit_is_bitwise_deterministic() {
        let ds = toy_dataset(3, 40, 1, 0.2);
        let grid = FourierGrid::build(KernelSpec::se(0.15).unwrap(), 0.4, 20, 1).unwrap();
        let a = EFGPModel::fit(&ds, grid.clone(), &FitOptions::default()).unwrap();
        let b = EFGPModel::fit(&ds, grid, &FitOptions::default()).unwrap();
        assert_eq!(a.beta().len(), b.beta().len());
        for (x, y) in a.beta().iter().zip(b.beta()) {
            assert_eq!(x.re.to_bits(), y.re.to_bits());
            assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
    }

    #[test]
    fn dataset_rejects_out_of_cube_points() {
        let err = Dataset::new(vec![0.5, 1.2], vec![0.0, 0.0], 1, 0.1).unwrap_err();
        match err {
            EfgpError::Domain(msg) => assert!(msg.contains("rescale"), "{msg}"),
            other => panic!("expected domain error, got {other:?}"),
        }
    }

    #[test]
    fn beta_file_round_trip() {
        let dir = std::env::temp_dir().join("efgp-beta-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("beta.bin");
        let beta: Vec<Complex64> = (0..9)
            .map(|i| Complex64::new(i as f64, -(i as f64) / 3.0))
            .collect();
        write_beta(&path, 1, 4, &beta).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(bytes.len(), 16 + 9 * 16);
        assert_eq!(&bytes[0..8], b"EFGPBETA");
        let (d, m, back) = read_beta(&path).unwrap();
        assert_eq!((d, m), (1, 4));
        assert_eq!(back, beta);
    }

    #[test]
    fn model_save_load_round_trip() {
        let ds = toy_dataset(21, 15, 1, 0.3);
        let grid = FourierGrid::build(KernelSpec::se(0.2).unwrap(), 0.4, 8, 1).unwrap();
        let model = EFGPModel::fit(&ds, grid, &FitOptions::default()).unwrap();
        let dir = std::env::temp_dir().join("efgp-model-test");
        std::fs::create_dir_all(&dir).unwrap();
        let jp = dir.join("model.json");
        let bp = dir.join("model.beta");
        model.save(&jp, &bp).unwrap();
        let mut back = EFGPModel::load(&jp, &bp).unwrap();
        let targets = vec![0.1, 0.6];
        assert_eq!(
            model.predict_mean(&targets).unwrap(),
            back.predict_mean(&targets).unwrap()
        );
        // variance works after load (gram operator is rebuilt lazily)
        let v = back.predict_var(&targets, 1e-8).unwrap();
        assert!(v.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn cg_solves_small_hermitian_system() {
        // A = [[4, 1-i], [1+i, 3]], hermitian positive definite.
        let a = [
            [Complex64::new(4.0, 0.0), Complex64::new(1.0, -1.0)],
            [Complex64::new(1.0, 1.0), Complex64::new(3.0, 0.0)],
        ];
        let b = vec![Complex64::new(1.0, 0.0), Complex64::new(0.0, 2.0)];
        let apply = |v: &[Complex64]| -> Result<Vec<Complex64>> {
            Ok((0..2)
                .map(|i| a[i][0] * v[0] + a[i][1] * v[1])
                .collect())
        };
        let (x, _, converged) = cg_solve(apply, &b, 1e-14, 50).unwrap();
        assert!(converged);
        let r0 = a[0][0] * x[0] + a[0][1] * x[1] - b[0];
        let r1 = a[1][0] * x[0] + a[1][1] * x[1] - b[1];
        assert!(r0.norm() < 1e-12 && r1.norm() < 1e-12);
    }

    #[test]
    fn cg_iteration_estimate_frozen() {
        assert_eq!(cg_iteration_estimate(1.0, 1e-6).unwrap(), 1);
        assert_eq!(cg_iteration_estimate(100.0, 1e-6).unwrap(), 73);
        assert!(matches!(
            cg_iteration_estimate(0.5, 1e-6),
            Err(EfgpError::Argument(_))
        ));
    }
}
