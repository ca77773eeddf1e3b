//! Dense reference computations: exact GP posteriors, condition numbers of
//! the exact/approximate/weight-space systems, and covariance error checks.
//! Everything here is O(N^2) memory or worse and capped accordingly; it
//! exists to validate the fast path, not to be fast.

use crate::error::{EfgpError, Result};
use crate::grid::FourierGrid;
use crate::kernels::KernelSpec;
use crate::lapack::{spd_solve, symmetric_eigenvalues};
use crate::solver::{check_unit_cube, Dataset};
use crate::transforms::nudft_type1;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Largest N for which dense N x N work is attempted.
pub const DENSE_CAP: usize = 10_000;

fn check_dense(n: usize) -> Result<()> {
    if n > DENSE_CAP {
        return Err(EfgpError::Resource(format!(
            "dense reference computation requested for N = {n}, above the cap of {DENSE_CAP}"
        )));
    }
    Ok(())
}

/// Exact covariance matrix `K_ij = k(x_i - x_j)`, row-major.
pub fn dense_covariance(kernel: &KernelSpec, points: &[f64], d: usize) -> Result<Vec<f64>> {
    let n = check_unit_cube(points, d)?;
    check_dense(n)?;
    kernel.validate()?;
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = kernel.eval_radial(0.0);
        for j in 0..i {
            let r2: f64 = (0..d)
                .map(|a| {
                    let t = points[i * d + a] - points[j * d + a];
                    t * t
                })
                .sum();
            let v = kernel.eval_radial(r2.sqrt());
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    Ok(k)
}

/// Approximate covariance matrix `Ktilde_ij = ktilde(x_i - x_j)`, row-major.
pub fn dense_covariance_approx(grid: &FourierGrid, points: &[f64]) -> Result<Vec<f64>> {
    let d = grid.dim();
    let n = check_unit_cube(points, d)?;
    check_dense(n)?;
    let mut k = vec![0.0; n * n];
    let k0 = grid.weight_sum();
    let mut z = vec![0.0; d];
    for i in 0..n {
        k[i * n + i] = k0;
        for j in 0..i {
            for (a, za) in z.iter_mut().enumerate() {
                *za = points[i * d + a] - points[j * d + a];
            }
            let v = grid.kernel_approx(&z)?;
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    Ok(k)
}

/// Exact GP posterior by a dense Cholesky solve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExactPosterior {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

pub fn exact_posterior(
    kernel: &KernelSpec,
    dataset: &Dataset,
    targets: &[f64],
) -> Result<ExactPosterior> {
    let d = dataset.dim();
    let nt = check_unit_cube(targets, d)?;
    let n = dataset.len();
    check_dense(n)?;
    if n == 0 {
        return Ok(ExactPosterior {
            mean: vec![0.0; nt],
            var: vec![kernel.eval_radial(0.0); nt],
        });
    }
    let mut a = dense_covariance(kernel, dataset.points(), d)?;
    let s2 = dataset.sigma() * dataset.sigma();
    for i in 0..n {
        a[i * n + i] += s2;
    }
    // One factorization, nt + 1 right-hand sides: y then each k_x column.
    let mut rhs = vec![0.0; n * (nt + 1)];
    rhs[..n].copy_from_slice(dataset.targets());
    let mut kx_all = vec![0.0; n * nt];
    for t in 0..nt {
        for i in 0..n {
            let r2: f64 = (0..d)
                .map(|a| {
                    let v = targets[t * d + a] - dataset.points()[i * d + a];
                    v * v
                })
                .sum();
            let v = kernel.eval_radial(r2.sqrt());
            kx_all[t * n + i] = v;
            rhs[(t + 1) * n + i] = v;
        }
    }
    let sol = spd_solve(a, rhs, n, nt + 1)?;
    let alpha = &sol[..n];
    let k0 = kernel.eval_radial(0.0);
    let mut mean = Vec::with_capacity(nt);
    let mut var = Vec::with_capacity(nt);
    for t in 0..nt {
        let kx = &kx_all[t * n..(t + 1) * n];
        mean.push(kx.iter().zip(alpha).map(|(a, b)| a * b).sum());
        let u = &sol[(t + 1) * n..(t + 2) * n];
        var.push((k0 - kx.iter().zip(u).map(|(a, b)| a * b).sum::<f64>()).max(0.0));
    }
    Ok(ExactPosterior { mean, var })
}

/// Eigenvalues of a Hermitian matrix via the real symmetric embedding
/// [[X, -Y], [Y, X]] of A = X + iY, whose spectrum is that of A doubled.
pub fn hermitian_eigenvalues(a: &[Complex64], n: usize) -> Result<Vec<f64>> {
    if a.len() != n * n {
        return Err(EfgpError::Argument(format!(
            "matrix buffer holds {} entries, expected {n}x{n}",
            a.len()
        )));
    }
    let nn = 2 * n;
    let mut b = vec![0.0; nn * nn];
    for i in 0..n {
        for j in 0..n {
            let v = a[i * n + j];
            b[i * nn + j] = v.re;
            b[(i + n) * nn + (j + n)] = v.re;
            b[i * nn + (j + n)] = -v.im;
            b[(i + n) * nn + j] = v.im;
        }
    }
    let w = symmetric_eigenvalues(b, nn)?;
    // ascending with every eigenvalue doubled: keep one of each pair
    Ok(w.into_iter().step_by(2).collect())
}

/// Extreme eigenvalues of a dense symmetric matrix via Lanczos with full
/// reorthogonalization and a deterministic start vector. Returns (min, max).
/// Extreme eigenvalues converge to roundoff long before `iters` approaches
/// n, which keeps the cost at O(iters n^2) instead of the O(n^3) full
/// decomposition.
pub fn extreme_eigenvalues_dense(a: &[f64], n: usize, iters: usize) -> Result<(f64, f64)> {
    if a.len() != n * n {
        return Err(EfgpError::Argument(format!(
            "matrix buffer holds {} entries, expected {n}x{n}",
            a.len()
        )));
    }
    if n == 0 || iters == 0 {
        return Err(EfgpError::Argument(
            "lanczos needs n >= 1 and iters >= 1".into(),
        ));
    }
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(a, b)| a * b).sum::<f64>();
    let k = iters.min(n);
    let mut v: Vec<f64> = (0..n).map(|i| ((i + 1) as f64).sin() + 0.5).collect();
    let nrm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= nrm);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(k);
    let mut alpha = Vec::with_capacity(k);
    let mut beta: Vec<f64> = Vec::with_capacity(k);
    for j in 0..k {
        let mut w = vec![0.0; n];
        for i in 0..n {
            w[i] = dot(&a[i * n..(i + 1) * n], &v);
        }
        alpha.push(dot(&w, &v));
        basis.push(std::mem::take(&mut v));
        // full reorthogonalization, two passes
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bj = dot(&w, &w).sqrt();
        if j + 1 == k || bj < 1e-300 {
            break;
        }
        beta.push(bj);
        w.iter_mut().for_each(|x| *x /= bj);
        v = w;
    }
    let kk = alpha.len();
    let mut t = vec![0.0; kk * kk];
    for i in 0..kk {
        t[i * kk + i] = alpha[i];
        if i + 1 < kk {
            t[i * kk + i + 1] = beta[i];
            t[(i + 1) * kk + i] = beta[i];
        }
    }
    let w = symmetric_eigenvalues(t, kk)?;
    Ok((w[0], w[kk - 1]))
}

fn condition_from_spectrum(eigs: &[f64]) -> Result<f64> {
    let lo = eigs.first().copied().unwrap_or(f64::NAN);
    let hi = eigs.last().copied().unwrap_or(f64::NAN);
    if !(lo > 0.0) || !hi.is_finite() {
        return Err(EfgpError::Linalg(format!(
            "spectrum is not positive (min = {lo}, max = {hi})"
        )));
    }
    Ok(hi / lo)
}

/// A priori bound on the weight-space condition number: N / sigma^2 + 1.
pub fn ws_condition_bound(n: usize, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(EfgpError::Argument(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    Ok(n as f64 / (sigma * sigma) + 1.0)
}

/// Perturbation bound on the approximate systems' condition numbers:
/// (1 + eN/sigma^2) kappa_exact + eN/sigma^2, where `err_n` is the spectral
/// (or Frobenius) norm of Ktilde - K.
pub fn ws_bound(kappa_exact: f64, err_n: f64, sigma: f64) -> Result<f64> {
    if !(kappa_exact >= 1.0) || !(err_n >= 0.0) || !(sigma > 0.0) {
        return Err(EfgpError::Argument(format!(
            "ws bound needs kappa >= 1, err >= 0, sigma > 0; got {kappa_exact}, {err_n}, {sigma}"
        )));
    }
    let t = err_n / (sigma * sigma);
    Ok((1.0 + t) * kappa_exact + t)
}

/// Measured condition numbers of the three regularized systems.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionReport {
    pub n: usize,
    pub modes: usize,
    /// kappa of K + sigma^2 I (exact kernel).
    pub kappa_exact: f64,
    /// kappa of Ktilde + sigma^2 I (approximate kernel, function space).
    pub kappa_fs: f64,
    /// kappa of Phi* Phi + sigma^2 I (weight space).
    pub kappa_ws: f64,
    /// The a priori cap N / sigma^2 + 1 on kappa_ws.
    pub ws_bound: f64,
    /// max_i lambda_i / (lambda_i + sigma^2) over the Ktilde spectrum;
    /// the norm of the solution operator Ktilde (Ktilde + sigma^2 I)^{-1}.
    pub solution_operator_norm: f64,
}

pub fn condition_report(grid: &FourierGrid, dataset: &Dataset) -> Result<ConditionReport> {
    let n = dataset.len();
    check_dense(n)?;
    let sigma = dataset.sigma();
    let s2 = sigma * sigma;

    let k_exact = dense_covariance(grid.kernel(), dataset.points(), grid.dim())?;
    let eig_k = symmetric_eigenvalues(k_exact, n)?;
    let kappa_exact = condition_from_spectrum(
        &eig_k.iter().map(|&l| l.max(0.0) + s2).collect::<Vec<_>>(),
    )?;

    // Weight-space spectrum, then function space for free: the nonzero
    // eigenvalues of Phi Phi* coincide with those of Phi* Phi, so the
    // spectrum of Ktilde + sigma^2 I is {lambda_i + sigma^2} over the
    // nonzero lambda plus a sigma^2 floor whenever the rank falls short
    // of N.
    let eig_ws = ws_system_eigenvalues(grid, dataset)?;
    let kappa_ws = condition_from_spectrum(
        &eig_ws.iter().map(|&l| l.max(0.0)).collect::<Vec<_>>(),
    )?;
    let phi_eigs: Vec<f64> = eig_ws.iter().map(|&l| (l - s2).max(0.0)).collect();
    let lam_max = phi_eigs.iter().copied().fold(0.0f64, f64::max);
    let rank_tol = lam_max * 1e-12;
    let positive: Vec<f64> = phi_eigs.iter().copied().filter(|&l| l > rank_tol).collect();
    let lam_min = if positive.len() < n {
        0.0
    } else {
        positive.iter().copied().fold(f64::INFINITY, f64::min)
    };
    let kappa_fs = if n == 0 {
        1.0
    } else {
        (lam_max + s2) / (lam_min + s2)
    };
    let solution_operator_norm = lam_max / (lam_max + s2);

    Ok(ConditionReport {
        n,
        modes: grid.num_modes(),
        kappa_exact,
        kappa_fs,
        kappa_ws,
        ws_bound: ws_condition_bound(n, sigma)?,
        solution_operator_norm,
    })
}

/// Spectrum of the weight-space system D^{1/2} T D^{1/2} + sigma^2 I,
/// ascending, by a dense Hermitian eigensolve on the M x M matrix.
pub fn ws_system_eigenvalues(grid: &FourierGrid, dataset: &Dataset) -> Result<Vec<f64>> {
    let m = grid.m();
    let d = grid.dim();
    let total = grid.num_modes();
    if total > 4096 {
        return Err(EfgpError::Resource(format!(
            "dense weight-space eigensolve requested for M = {total} modes, above the cap of 4096"
        )));
    }
    let ones = vec![Complex64::new(1.0, 0.0); dataset.len()];
    let symbol = nudft_type1(dataset.points(), d, grid.h(), 2 * m, &ones)?;
    let span = 4 * m + 1;
    let n_side = 2 * m + 1;
    let sqrt_w: Vec<f64> = grid.weights().iter().map(|&w| w.sqrt()).collect();
    let s2 = dataset.sigma() * dataset.sigma();
    let mut a = vec![Complex64::new(0.0, 0.0); total * total];
    for jl in 0..total {
        for kl in 0..total {
            let (mut jr, mut kr) = (jl, kl);
            let mut pos = 0usize;
            let mut idxs = [0usize; 3];
            for ax in (0..d).rev() {
                let jj = (jr % n_side) as i64;
                let kk = (kr % n_side) as i64;
                jr /= n_side;
                kr /= n_side;
                idxs[ax] = (jj - kk + 2 * m as i64) as usize;
            }
            for &ix in idxs.iter().take(d) {
                pos = pos * span + ix;
            }
            let mut v = sqrt_w[jl] * sqrt_w[kl] * symbol[pos];
            if jl == kl {
                v += s2;
            }
            a[jl * total + kl] = v;
        }
    }
    hermitian_eigenvalues(&a, total)
}

/// How far the approximate covariance sits from the exact one, and the
/// conditioning consequences.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CovarianceErrorReport {
    pub n: usize,
    /// max_ij |Ktilde_ij - K_ij|.
    pub sup_entry_error: f64,
    /// Frobenius norm of Ktilde - K.
    pub frobenius_error: f64,
    /// Certified uniform kernel error, when the caller has one.
    pub certified_eps: Option<f64>,
    /// Frobenius norm <= N eps (certified eps, else the measured sup).
    pub frobenius_within_n_eps: bool,
    /// max_i |lambda_i(Ktilde) - lambda_i(K)| over sorted spectra.
    pub max_eigenvalue_gap: f64,
    /// Eigenvalue perturbations are capped by the spectral (here Frobenius)
    /// norm of the difference.
    pub eigen_gap_within_frobenius: bool,
    pub kappa_exact: f64,
    pub kappa_fs: f64,
    /// (1 + eps N / sigma^2) kappa_exact + eps N / sigma^2 with
    /// eps = sup entry error.
    pub kappa_fs_bound: f64,
    pub kappa_fs_within_bound: bool,
    /// || mu - mutilde || / || y || for the in-sample posterior mean vectors.
    pub mean_rel_error: f64,
    /// Its cap N eps / sigma^2.
    pub mean_error_bound: f64,
    pub mean_within_bound: bool,
}

pub fn covariance_error_report(
    grid: &FourierGrid,
    dataset: &Dataset,
    certified_eps: Option<f64>,
) -> Result<CovarianceErrorReport> {
    let n = dataset.len();
    check_dense(n)?;
    let s2 = dataset.sigma() * dataset.sigma();
    let k = dense_covariance(grid.kernel(), dataset.points(), grid.dim())?;
    let kt = dense_covariance_approx(grid, dataset.points())?;
    let mut sup = 0.0f64;
    let mut fro2 = 0.0f64;
    for (a, b) in k.iter().zip(&kt) {
        let e = (a - b).abs();
        sup = sup.max(e);
        fro2 += e * e;
    }
    let fro = fro2.sqrt();
    let eps = certified_eps.unwrap_or(sup);

    // In-sample posterior mean vectors mu = K alpha and mutilde = Ktilde
    // alphatilde; their relative gap is capped by N eps / sigma^2.
    let mut mean_rel_error = 0.0;
    if n > 0 {
        let mut a_exact = k.clone();
        let mut a_approx = kt.clone();
        for i in 0..n {
            a_exact[i * n + i] += s2;
            a_approx[i * n + i] += s2;
        }
        let alpha = spd_solve(a_exact, dataset.targets().to_vec(), n, 1)?;
        let alpha_t = spd_solve(a_approx, dataset.targets().to_vec(), n, 1)?;
        let mut diff2 = 0.0;
        for i in 0..n {
            let mu: f64 = (0..n).map(|j| k[i * n + j] * alpha[j]).sum();
            let mut_t: f64 = (0..n).map(|j| kt[i * n + j] * alpha_t[j]).sum();
            diff2 += (mu - mut_t) * (mu - mut_t);
        }
        let ynorm = dataset
            .targets()
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt();
        mean_rel_error = if ynorm > 0.0 { diff2.sqrt() / ynorm } else { 0.0 };
    }
    let mean_error_bound = n as f64 * eps / s2;

    let eig_k = symmetric_eigenvalues(k, n)?;
    let eig_kt = symmetric_eigenvalues(kt, n)?;
    let max_gap = eig_k
        .iter()
        .zip(&eig_kt)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);
    let kappa_exact = condition_from_spectrum(
        &eig_k.iter().map(|&l| l.max(0.0) + s2).collect::<Vec<_>>(),
    )?;
    let kappa_fs = condition_from_spectrum(
        &eig_kt.iter().map(|&l| l.max(0.0) + s2).collect::<Vec<_>>(),
    )?;
    let kappa_fs_bound = ws_bound(kappa_exact, sup * n as f64, dataset.sigma())?;
    Ok(CovarianceErrorReport {
        n,
        sup_entry_error: sup,
        frobenius_error: fro,
        certified_eps,
        frobenius_within_n_eps: fro <= n as f64 * eps,
        max_eigenvalue_gap: max_gap,
        // tiny slack for the eigensolver's own backward error
        eigen_gap_within_frobenius: max_gap <= fro + 1e-10 * (1.0 + eig_k.last().unwrap_or(&1.0)),
        kappa_exact,
        kappa_fs,
        kappa_fs_bound,
        kappa_fs_within_bound: kappa_fs <= kappa_fs_bound * (1.0 + 1e-10),
        mean_rel_error,
        mean_error_bound,
        mean_within_bound: mean_rel_error <= mean_error_bound,
    })
}
