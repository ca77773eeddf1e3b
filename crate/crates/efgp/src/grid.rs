//! Equispaced Fourier discretization of a kernel: the mode lattice
//! `J_m = {-m..m}^d` with spacing `h`, quadrature weights
//! `w_j = h^d khat(h j)`, and the induced kernel approximation
//! `ktilde(z) = sum_j w_j e^{2 pi i h <j, z>}`.
//!
//! Also carries the diagnostic lattice sums (aliasing, truncation) with
//! certified tail bounds, used to check the Poisson-summation identity
//! `ktilde(z) - k(z) = aliasing(z) - truncation(z)` to within the tails.

use crate::bounds;
use crate::error::{EfgpError, Result};
use crate::kernels::KernelSpec;
use num_complex::Complex64;
use serde::ser::SerializeStruct;
use serde::{Deserialize, Serialize};

use std::f64::consts::PI;

/// Default ceiling on the total mode count M = (2m+1)^d.
pub const DEFAULT_MAX_MODES: usize = 1 << 24;

/// Iterator over the integer box `{lo..=hi}^d`, last coordinate fastest
/// (row-major order). Coordinates beyond `d` stay 0.
pub(crate) struct BoxIter {
    d: usize,
    lo: i64,
    hi: i64,
    cur: [i64; 3],
    done: bool,
}

impl BoxIter {
    pub(crate) fn new(d: usize, lo: i64, hi: i64) -> Self {
        BoxIter {
            d,
            lo,
            hi,
            cur: [lo, lo, lo],
            done: lo > hi || d == 0 || d > 3,
        }
    }
}

impl Iterator for BoxIter {
    type Item = [i64; 3];

    fn next(&mut self) -> Option<[i64; 3]> {
        if self.done {
            return None;
        }
        let mut out = [0i64; 3];
        out[..self.d].copy_from_slice(&self.cur[..self.d]);
        for axis in (0..self.d).rev() {
            if self.cur[axis] < self.hi {
                self.cur[axis] += 1;
                return Some(out);
            }
            self.cur[axis] = self.lo;
        }
        self.done = true;
        Some(out)
    }
}

fn sq_norm(j: &[i64; 3], d: usize) -> f64 {
    (0..d).map(|a| (j[a] * j[a]) as f64).sum()
}

/// A built Fourier mode grid with precomputed weights.
#[derive(Debug, Clone)]
pub struct FourierGrid {
    h: f64,
    m: usize,
    d: usize,
    kernel: KernelSpec,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
struct GridRepr {
    h: f64,
    m: usize,
    d: usize,
    kernel: KernelSpec,
}

impl Serialize for FourierGrid {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        // Weights are a deterministic function of (h, m, d, kernel); they are
        // recomputed on load rather than stored.
        let mut st = s.serialize_struct("FourierGrid", 4)?;
        st.serialize_field("h", &self.h)?;
        st.serialize_field("m", &self.m)?;
        st.serialize_field("d", &self.d)?;
        st.serialize_field("kernel", &self.kernel)?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for FourierGrid {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let r = GridRepr::deserialize(de)?;
        FourierGrid::build(r.kernel, r.h, r.m, r.d).map_err(serde::de::Error::custom)
    }
}

impl FourierGrid {
    /// Build the grid and its weights, enforcing the mode-count ceiling.
    pub fn build(kernel: KernelSpec, h: f64, m: usize, d: usize) -> Result<Self> {
        Self::build_with_cap(kernel, h, m, d, DEFAULT_MAX_MODES)
    }

    pub fn build_with_cap(
        kernel: KernelSpec,
        h: f64,
        m: usize,
        d: usize,
        max_modes: usize,
    ) -> Result<Self> {
        kernel.validate()?;
        if d == 0 || d > 3 {
            return Err(EfgpError::Argument(format!(
                "dimension must be 1, 2, or 3, got {d}"
            )));
        }
        if !(h > 0.0 && h < 1.0) {
            return Err(EfgpError::Argument(format!(
                "frequency spacing h must lie in (0, 1), got {h}"
            )));
        }
        if m == 0 {
            return Err(EfgpError::Argument("mode count m must be >= 1".into()));
        }
        let n = 2 * m + 1;
        let total = n.checked_pow(d as u32).ok_or_else(|| {
            EfgpError::Resource(format!("mode count (2*{m}+1)^{d} overflows"))
        })?;
        if total > max_modes {
            return Err(EfgpError::Resource(format!(
                "grid would hold M = {total} modes, above the cap of {max_modes}"
            )));
        }
        let hd = h.powi(d as i32);
        let mut weights = Vec::with_capacity(total);
        for j in BoxIter::new(d, -(m as i64), m as i64) {
            let rho = h * sq_norm(&j, d).sqrt();
            weights.push(hd * kernel.spectral_radial(rho, d));
        }
        Ok(FourierGrid {
            h,
            m,
            d,
            kernel,
            weights,
        })
    }

    /// Build from a parameter rule's output.
    pub fn from_params(kernel: KernelSpec, params: &bounds::GridParams, d: usize) -> Result<Self> {
        Self::build(kernel, params.h, params.m, d)
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    /// Weights `w_j` in row-major order over `j in {-m..m}^d`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Total mode count M = (2m+1)^d.
    pub fn num_modes(&self) -> usize {
        self.weights.len()
    }

    /// `ktilde(0) = sum_j w_j`, the approximate kernel's value at 0.
    pub fn weight_sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    fn check_point(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.d {
            return Err(EfgpError::Argument(format!(
                "point has dimension {}, grid has dimension {}",
                z.len(),
                self.d
            )));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(EfgpError::Domain("non-finite coordinate".into()));
        }
        Ok(())
    }

    /// Per-axis tables of `e^{2 pi i h j x_a}` for `j = -m..m`.
    fn phase_tables(&self, x: &[f64]) -> Vec<Vec<Complex64>> {
        (0..self.d)
            .map(|a| {
                let theta = 2.0 * PI * self.h * x[a];
                phase_row(theta, self.m)
            })
            .collect()
    }

    /// Feature vector `phi_j(x) = sqrt(w_j) e^{2 pi i h <j, x>}`, row-major.
    pub fn feature_vector(&self, x: &[f64]) -> Result<Vec<Complex64>> {
        self.check_point(x)?;
        let tables = self.phase_tables(x);
        let n = 2 * self.m + 1;
        let mut out = Vec::with_capacity(self.weights.len());
        for (lin, &w) in self.weights.iter().enumerate() {
            let mut ph = Complex64::new(w.sqrt(), 0.0);
            let mut rest = lin;
            for a in (0..self.d).rev() {
                ph *= tables[a][rest % n];
                rest /= n;
            }
            out.push(ph);
        }
        Ok(out)
    }

    /// `ktilde(z) = sum_j w_j e^{2 pi i h <j, z>}` (real by symmetry of `w`).
    pub fn kernel_approx(&self, z: &[f64]) -> Result<f64> {
        self.check_point(z)?;
        let tables = self.phase_tables(z);
        let n = 2 * self.m + 1;
        let mut acc = 0.0;
        for (lin, &w) in self.weights.iter().enumerate() {
            let mut ph = Complex64::new(1.0, 0.0);
            let mut rest = lin;
            for a in (0..self.d).rev() {
                ph *= tables[a][rest % n];
                rest /= n;
            }
            acc += w * ph.re;
        }
        Ok(acc)
    }

    /// Evaluate `ktilde` on the tensor product of the given per-axis nodes,
    /// returning values in row-major order (axis 0 slowest). This contracts
    /// one mode axis at a time, so a Q^d target grid costs
    /// O(d n Q max(n,Q)^{d-1}) instead of O((nQ)^d) pointwise work.
    pub fn eval_on_axes(&self, axes: &[Vec<f64>]) -> Result<Vec<f64>> {
        if axes.len() != self.d {
            return Err(EfgpError::Argument(format!(
                "expected {} axes, got {}",
                self.d,
                axes.len()
            )));
        }
        for ax in axes {
            if ax.iter().any(|v| !v.is_finite()) {
                return Err(EfgpError::Domain("non-finite axis node".into()));
            }
        }
        let n = 2 * self.m + 1;
        let mut data: Vec<Complex64> = self
            .weights
            .iter()
            .map(|&w| Complex64::new(w, 0.0))
            .collect();
        // Repeatedly contract the leading mode axis against the phase
        // factors of one target axis, appending the target axis last; after
        // d rounds the layout is row-major over the target axes.
        for ax in axes {
            let rest = data.len() / n;
            let q = ax.len();
            let mut out = vec![Complex64::new(0.0, 0.0); rest * q];
            for (qi, &z) in ax.iter().enumerate() {
                let theta = 2.0 * PI * self.h * z;
                let row = phase_row(theta, self.m);
                for (ji, &ph) in row.iter().enumerate() {
                    let src = &data[ji * rest..(ji + 1) * rest];
                    for (r, &v) in src.iter().enumerate() {
                        out[r * q + qi] += ph * v;
                    }
                }
            }
            data = out;
        }
        Ok(data.iter().map(|c| c.re).collect())
    }

    /// Max of `|ktilde(z) - k(z)|` over a uniform scan grid on `[-1, 1]^d`
    /// with `n_per_axis` points per axis.
    pub fn sup_error_scan(&self, n_per_axis: usize) -> Result<f64> {
        if n_per_axis < 2 {
            return Err(EfgpError::Argument("scan needs at least 2 points per axis".into()));
        }
        let axis: Vec<f64> = (0..n_per_axis)
            .map(|i| -1.0 + 2.0 * i as f64 / (n_per_axis - 1) as f64)
            .collect();
        let axes = vec![axis.clone(); self.d];
        let approx = self.eval_on_axes(&axes)?;
        let mut worst = 0.0f64;
        let mut idx = vec![0usize; self.d];
        for &ap in &approx {
            let r2: f64 = idx.iter().map(|&i| axis[i] * axis[i]).sum();
            let exact = self.kernel.eval_radial(r2.sqrt());
            worst = worst.max((ap - exact).abs());
            for a in (0..self.d).rev() {
                idx[a] += 1;
                if idx[a] < n_per_axis {
                    break;
                }
                idx[a] = 0;
            }
        }
        Ok(worst)
    }

    /// Weighted L2 error `sqrt( int_{[-1,1]^d} v(z) (ktilde - k)^2 dz )` with
    /// `v(z) = prod_a (1 - |z_a|)`, by tensor Gauss-Legendre quadrature on
    /// dyadically refined panels. The result is flagged as unconverged when
    /// a refined rule disagrees by more than 1%.
    pub fn rms_error_measure(&self, order: usize, levels: u32) -> Result<RmsMeasurement> {
        let coarse = self.rms_quadrature(order, levels)?;
        let fine = self.rms_quadrature(order + 6, levels + 2)?;
        let denom = fine.max(1e-300);
        let rel = (coarse - fine).abs() / denom;
        Ok(RmsMeasurement {
            value: fine,
            coarse,
            converged: rel <= 0.01,
        })
    }

    fn rms_quadrature(&self, order: usize, levels: u32) -> Result<f64> {
        let (nodes, wq) = crate::quad::dyadic_axis_rule(order, levels);
        let axes = vec![nodes.clone(); self.d];
        let approx = self.eval_on_axes(&axes)?;
        let q = nodes.len();
        let mut acc = 0.0f64;
        let mut idx = vec![0usize; self.d];
        for &ap in &approx {
            let mut wz = 1.0;
            let mut r2 = 0.0;
            for &i in idx.iter().take(self.d) {
                wz *= wq[i] * (1.0 - nodes[i].abs());
                r2 += nodes[i] * nodes[i];
            }
            let diff = ap - self.kernel.eval_radial(r2.sqrt());
            acc += wz * diff * diff;
            for a in (0..self.d).rev() {
                idx[a] += 1;
                if idx[a] < q {
                    break;
                }
                idx[a] = 0;
            }
        }
        Ok(acc.max(0.0).sqrt())
    }

    /// Partial truncation sum `h^d sum_{j notin J_m, |j|_inf <= radius}
    /// khat(h j) e^{2 pi i h <j, z>}`.
    pub fn truncation_sum(&self, z: &[f64], radius: usize) -> Result<Complex64> {
        self.check_point(z)?;
        if radius <= self.m {
            return Err(EfgpError::Argument(format!(
                "truncation radius {radius} must exceed m = {}",
                self.m
            )));
        }
        let hd = self.h.powi(self.d as i32);
        let m = self.m as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in BoxIter::new(self.d, -(radius as i64), radius as i64) {
            if (0..self.d).all(|a| j[a].abs() <= m) {
                continue;
            }
            let rho = self.h * sq_norm(&j, self.d).sqrt();
            let w = hd * self.kernel.spectral_radial(rho, self.d);
            let theta: f64 = (0..self.d)
                .map(|a| 2.0 * PI * self.h * j[a] as f64 * z[a])
                .sum();
            acc += w * Complex64::from_polar(1.0, theta);
        }
        Ok(acc)
    }

    /// Certified bound on the truncation sum omitted beyond `radius`:
    /// `h^d sum_{|j|_inf > radius} khat(h j)`.
    pub fn truncation_tail_bound(&self, radius: usize) -> Result<f64> {
        if radius <= self.m {
            return Err(EfgpError::Argument(format!(
                "truncation radius {radius} must exceed m = {}",
                self.m
            )));
        }
        let d = self.d;
        let df = d as f64;
        let hd = self.h.powi(d as i32);
        match self.kernel {
            KernelSpec::Se { .. } => {
                // Shells decay super-exponentially; the numeric shell sum
                // hits the f64 floor within a handful of terms.
                let mut tail = 0.0;
                let mut s = radius + 1;
                loop {
                    let count = 2.0 * df * (2.0 * s as f64 + 1.0).powi(d as i32 - 1);
                    let term =
                        count * hd * self.kernel.spectral_radial(self.h * s as f64, d);
                    tail += term;
                    if term <= tail * 1e-18 || term == 0.0 || s > radius + 10_000 {
                        break;
                    }
                    s += 1;
                }
                // One extra shell term dominates the geometric remainder.
                Ok(tail + hd * self.kernel.spectral_radial(self.h * (radius as f64 + 1.0), d))
            }
            KernelSpec::Matern { lengthscale, nu } => {
                // khat(h j) <= chat l^d (2 pi l h |j|)^{-2nu-d} and every
                // omitted shell s has at most 2d (2s+1)^{d-1} <= 2d 3^{d-1} s^{d-1}
                // points with |j| >= s, so the tail is a pure power sum
                // bounded by term-plus-integral.
                let l = lengthscale;
                let ln_chat = df * std::f64::consts::LN_2
                    + 0.5 * df * PI.ln()
                    + nu * (2.0 * nu).ln()
                    + statrs::function::gamma::ln_gamma(nu + df / 2.0)
                    - statrs::function::gamma::ln_gamma(nu);
                let c = (ln_chat + df * l.ln()).exp()
                    * hd
                    * (2.0 * PI * l * self.h).powf(-2.0 * nu - df)
                    * 2.0
                    * df
                    * 3f64.powi(d as i32 - 1);
                let s0 = radius as f64 + 1.0;
                // sum_{s >= s0} s^{-2nu-1} <= s0^{-2nu-1} + s0^{-2nu}/(2nu)
                Ok(c * (s0.powf(-2.0 * nu - 1.0) + s0.powf(-2.0 * nu) / (2.0 * nu)))
            }
        }
    }

    /// Partial aliasing sum `sum_{0 < |n|_inf <= radius} k(z + n/h)`.
    pub fn aliasing_sum(&self, z: &[f64], radius: usize) -> Result<f64> {
        self.check_point(z)?;
        if radius == 0 {
            return Err(EfgpError::Argument("aliasing radius must be >= 1".into()));
        }
        let mut acc = 0.0;
        for n in BoxIter::new(self.d, -(radius as i64), radius as i64) {
            if (0..self.d).all(|a| n[a] == 0) {
                continue;
            }
            let r2: f64 = (0..self.d)
                .map(|a| {
                    let t = z[a] + n[a] as f64 / self.h;
                    t * t
                })
                .sum();
            acc += self.kernel.eval_radial(r2.sqrt());
        }
        Ok(acc)
    }

    /// Certified bound on the aliasing sum omitted beyond `radius`, valid
    /// for any `z in [-1, 1]^d`: every omitted image sits at distance at
    /// least `s/h - sqrt(d)` for some shell `s > radius`.
    pub fn aliasing_tail_bound(&self, radius: usize) -> Result<f64> {
        if radius == 0 {
            return Err(EfgpError::Argument("aliasing radius must be >= 1".into()));
        }
        let df = self.d as f64;
        let mut tail = 0.0;
        let mut prev = f64::INFINITY;
        let mut s = radius + 1;
        loop {
            let dist = (s as f64 / self.h - df.sqrt()).max(0.0);
            let count = 2.0 * df * (2.0 * s as f64 + 1.0).powi(self.d as i32 - 1);
            let term = count * self.kernel.eval_radial(dist);
            tail += term;
            let ratio = if prev > 0.0 { term / prev } else { 0.0 };
            if (term <= tail * 1e-18 && s > radius + 3) || term == 0.0 {
                // Geometric remainder estimate from the observed decay rate.
                if ratio < 1.0 {
                    tail += term * ratio / (1.0 - ratio);
                }
                break;
            }
            if s > radius + 100_000 {
                return Err(EfgpError::Resource(
                    "aliasing tail failed to decay within 1e5 shells".into(),
                ));
            }
            prev = term;
            s += 1;
        }
        Ok(tail)
    }

    /// Check the Poisson-summation identity
    /// `k(z) + aliasing(z) = ktilde(z) + truncation(z)` by brute-force
    /// lattice sums out to `radius`, with certified tails for the remainder.
    pub fn poisson_identity_check(&self, z: &[f64], radius: usize) -> Result<PoissonCheck> {
        let lhs = self.kernel.eval(z)? + self.aliasing_sum(z, radius)?;
        let trunc = self.truncation_sum(z, radius)?;
        let rhs = self.kernel_approx(z)? + trunc.re;
        let certified_tail =
            self.aliasing_tail_bound(radius)? + self.truncation_tail_bound(radius)?;
        Ok(PoissonCheck {
            lhs,
            rhs,
            residual: (lhs - rhs).abs(),
            imag_leak: trunc.im.abs(),
            certified_tail,
        })
    }
}

/// Unit phases `e^{i j theta}` for `j = -m..m`, by rotation with periodic
/// exact renormalization to keep drift below ~1e-13 even for huge m.
pub(crate) fn phase_row(theta: f64, m: usize) -> Vec<Complex64> {
    let n = 2 * m + 1;
    let rot = Complex64::from_polar(1.0, theta);
    let mut row = Vec::with_capacity(n);
    let mut ph = Complex64::new(0.0, 0.0);
    for j in 0..n {
        if j % 512 == 0 {
            ph = Complex64::from_polar(1.0, (j as f64 - m as f64) * theta);
        }
        row.push(ph);
        ph *= rot;
    }
    row
}

/// Two-sided weighted L2 error measurement.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RmsMeasurement {
    /// Value from the finer rule.
    pub value: f64,
    /// Value from the requested rule.
    pub coarse: f64,
    /// False when the two rules disagree by more than 1%.
    pub converged: bool,
}

/// Result of a Poisson-summation identity check.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PoissonCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
    /// Magnitude of the imaginary part of the truncation sum (analytically 0).
    pub imag_leak: f64,
    /// Certified bound on the neglected lattice tails.
    pub certified_tail: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn se_grid_1d() -> FourierGrid {
        FourierGrid::build(KernelSpec::se(0.1).unwrap(), 0.5, 40, 1).unwrap()
    }

    #[test]
    fn box_iter_orders_row_major() {
        let all: Vec<_> = BoxIter::new(2, -1, 1).collect();
        assert_eq!(all.len(), 9);
        assert_eq!(all[0], [-1, -1, 0]);
        assert_eq!(all[1], [-1, 0, 0]);
        assert_eq!(all[4], [0, 0, 0]);
        assert_eq!(all[8], [1, 1, 0]);
    }

    #[test]
    fn weights_match_spectral_density() {
        let g = se_grid_1d();
        assert_eq!(g.num_modes(), 81);
        let k = g.kernel();
        // j = 0 and j = 3 entries against direct evaluation.
        assert!((g.weights()[40] - 0.5 * k.spectral(&[0.0]).unwrap()).abs() < 1e-18);
        let w3 = 0.5 * k.spectral(&[0.5 * 3.0]).unwrap();
        assert!((g.weights()[43] - w3).abs() < 1e-18);
    }

    #[test]
    fn mode_cap_enforced() {
        let k = KernelSpec::se(0.1).unwrap();
        let err = FourierGrid::build_with_cap(k, 0.5, 100, 2, 10_000).unwrap_err();
        match err {
            EfgpError::Resource(msg) => assert!(msg.contains("40401"), "{msg}"),
            other => panic!("expected resource error, got {other:?}"),
        }
    }

    #[test]
    fn kernel_approx_matches_grid_at_converged_params() {
        // Parameters from the rigorous rule keep |ktilde - k| below eps.
        let p = crate::bounds::se_params(0.25, 1, 1e-8).unwrap();
        let g = FourierGrid::build(KernelSpec::se(0.25).unwrap(), p.h, p.m, 1).unwrap();
        for &z in &[0.0, 0.17, -0.62, 0.99] {
            let diff = (g.kernel_approx(&[z]).unwrap() - g.kernel().eval(&[z]).unwrap()).abs();
            assert!(diff <= 1e-8, "z = {z}: diff {diff}");
        }
    }

    #[test]
    fn feature_vector_reproduces_kernel_approx() {
        // <phi(x), phi(y)> = ktilde(x - y).
        let g = FourierGrid::build(KernelSpec::matern(0.2, 1.5).unwrap(), 0.3, 12, 2).unwrap();
        let x = [0.3, 0.7];
        let y = [0.55, 0.2];
        let fx = g.feature_vector(&x).unwrap();
        let fy = g.feature_vector(&y).unwrap();
        let inner: Complex64 = fx.iter().zip(&fy).map(|(a, b)| a * b.conj()).sum();
        let kt = g.kernel_approx(&[x[0] - y[0], x[1] - y[1]]).unwrap();
        assert!((inner.re - kt).abs() < 1e-12, "{} vs {kt}", inner.re);
        assert!(inner.im.abs() < 1e-12);
    }

    #[test]
    fn eval_on_axes_matches_pointwise() {
        let g = FourierGrid::build(KernelSpec::se(0.3).unwrap(), 0.4, 9, 2).unwrap();
        let ax0 = vec![-0.9, -0.1, 0.44];
        let ax1 = vec![0.05, 0.83];
        let vals = g.eval_on_axes(&[ax0.clone(), ax1.clone()]).unwrap();
        assert_eq!(vals.len(), 6);
        for (i, &z0) in ax0.iter().enumerate() {
            for (j, &z1) in ax1.iter().enumerate() {
                let direct = g.kernel_approx(&[z0, z1]).unwrap();
                assert!(
                    (vals[i * 2 + j] - direct).abs() < 1e-12,
                    "({z0}, {z1}): {} vs {direct}",
                    vals[i * 2 + j]
                );
            }
        }
    }

    #[test]
    fn phase_row_stays_on_unit_circle() {
        let row = phase_row(2.1337, 5000);
        for (j, ph) in row.iter().enumerate() {
            assert!((ph.norm() - 1.0).abs() < 1e-12, "j = {j}");
        }
        let direct = Complex64::from_polar(1.0, (9999.0 - 5000.0) * 2.1337);
        assert!((row[9999] - direct).norm() < 1e-11);
    }

    #[test]
    fn truncation_sum_rejects_small_radius() {
        let g = se_grid_1d();
        assert!(matches!(
            g.truncation_sum(&[0.1], 40),
            Err(EfgpError::Argument(_))
        ));
    }

    #[test]
    fn poisson_identity_holds_se_1d() {
        let g = se_grid_1d();
        for &z in &[0.0, 0.31, -0.97] {
            let c = g.poisson_identity_check(&[z], 200).unwrap();
            assert!(
                c.residual <= c.certified_tail + 1e-12,
                "z = {z}: residual {} tail {}",
                c.residual,
                c.certified_tail
            );
            assert!(c.imag_leak < 1e-14);
        }
    }

    #[test]
    fn poisson_identity_holds_matern_2d() {
        let g = FourierGrid::build(KernelSpec::matern(0.2, 1.5).unwrap(), 0.3, 10, 2).unwrap();
        let c = g.poisson_identity_check(&[0.4, -0.2], 400).unwrap();
        assert!(
            c.residual <= c.certified_tail + 1e-12,
            "residual {} tail {}",
            c.residual,
            c.certified_tail
        );
    }

    #[test]
    fn aliasing_tail_bound_dominates_extra_shells() {
        let g = FourierGrid::build(KernelSpec::matern(0.15, 0.5).unwrap(), 0.4, 20, 1).unwrap();
        // Everything beyond radius 3 must be below the certified tail at 3.
        let far = g.aliasing_sum(&[0.9], 50).unwrap() - g.aliasing_sum(&[0.9], 3).unwrap();
        let tail = g.aliasing_tail_bound(3).unwrap();
        assert!(far <= tail, "far {far} tail {tail}");
    }

    #[test]
    fn truncation_tail_bound_dominates_extra_shells() {
        let g = FourierGrid::build(KernelSpec::matern(0.15, 1.0).unwrap(), 0.4, 5, 1).unwrap();
        let near = g.truncation_sum(&[0.0], 50).unwrap().re;
        let far = g.truncation_sum(&[0.0], 5000).unwrap().re;
        let tail = g.truncation_tail_bound(50).unwrap();
        assert!((far - near).abs() <= tail, "diff {} tail {tail}", far - near);
    }

    #[test]
    fn rms_measure_converges_on_resolved_grid() {
        let p = crate::bounds::se_params(0.3, 1, 1e-6).unwrap();
        let g = FourierGrid::build(KernelSpec::se(0.3).unwrap(), p.h, p.m, 1).unwrap();
        let r = g.rms_error_measure(12, 8).unwrap();
        assert!(r.converged, "coarse {} fine {}", r.coarse, r.value);
        assert!(r.value <= 1e-6);
    }

    #[test]
    fn serde_round_trip_recomputes_weights() {
        let g = FourierGrid::build(KernelSpec::matern(0.2, 1.5).unwrap(), 0.3, 7, 2).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert!(!s.contains("weights"));
        let back: FourierGrid = serde_json::from_str(&s).unwrap();
        assert_eq!(back.m(), 7);
        assert_eq!(back.dim(), 2);
        assert_eq!(back.weights(), g.weights());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn approx_is_real_and_symmetric(
            z in -1.0f64..1.0,
            l in 0.1f64..0.5,
            m in 3usize..24,
        ) {
            let g = FourierGrid::build(KernelSpec::se(l).unwrap(), 0.5, m, 1).unwrap();
            let plus = g.kernel_approx(&[z]).unwrap();
            let minus = g.kernel_approx(&[-z]).unwrap();
            let scale = g.weight_sum().abs().max(1.0);
            prop_assert!((plus - minus).abs() <= 1e-13 * scale);
        }

        #[test]
        fn weights_positive(
            l in 0.05f64..0.4,
            nu in 0.5f64..3.0,
            m in 1usize..12,
        ) {
            let g = FourierGrid::build(KernelSpec::matern(l, nu).unwrap(), 0.3, m, 2).unwrap();
            prop_assert!(g.weights().iter().all(|&w| w > 0.0 && w.is_finite()));
        }
    }
}
