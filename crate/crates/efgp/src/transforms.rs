//! Nonuniform discrete Fourier transforms between scattered points and the
//! mode lattice `{-m..m}^d`, and the fast Toeplitz application of the Gram
//! operator via FFT circulant embedding.
//!
//! Conventions, matching the feature map `phi_j(x) = sqrt(w_j) e^{2 pi i h <j,x>}`:
//!   type 1 (adjoint):  f_j = sum_i c_i e^{-2 pi i h <j, x_i>}
//!   type 2 (forward):  g_i = sum_j f_j e^{+2 pi i h <j, x_i>}
//! Both are exact direct sums; they define the semantics everything else is
//! tested against.

use crate::error::{EfgpError, Result};
use crate::grid::phase_row;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

fn check_points(points: &[f64], d: usize) -> Result<usize> {
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
    if points.iter().any(|v| !v.is_finite()) {
        return Err(EfgpError::Domain("non-finite point coordinate".into()));
    }
    Ok(points.len() / d)
}

/// Tensor-product phase vector `e^{i s 2 pi h <j, x>}` over `j in {-m..m}^d`,
/// row-major, written into `out` (resized as needed). `sign` is +1 or -1.
fn phase_tensor(x: &[f64], h: f64, m: usize, sign: f64, out: &mut Vec<Complex64>) {
    let n = 2 * m + 1;
    out.clear();
    out.push(Complex64::new(1.0, 0.0));
    let mut tmp: Vec<Complex64> = Vec::new();
    for &xa in x {
        let row = phase_row(sign * 2.0 * std::f64::consts::PI * h * xa, m);
        tmp.clear();
        tmp.reserve(out.len() * n);
        for &acc in out.iter() {
            for &ph in &row {
                tmp.push(acc * ph);
            }
        }
        std::mem::swap(out, &mut tmp);
    }
}

/// Type-1 NUDFT: scattered values to mode coefficients (adjoint map).
pub fn nudft_type1(
    points: &[f64],
    d: usize,
    h: f64,
    m: usize,
    values: &[Complex64],
) -> Result<Vec<Complex64>> {
    let npts = check_points(points, d)?;
    if values.len() != npts {
        return Err(EfgpError::Argument(format!(
            "{} values for {npts} points",
            values.len()
        )));
    }
    let total = (2 * m + 1).pow(d as u32);
    let mut acc = vec![Complex64::new(0.0, 0.0); total];
    let mut phases = Vec::with_capacity(total);
    for (i, &c) in values.iter().enumerate() {
        phase_tensor(&points[i * d..(i + 1) * d], h, m, -1.0, &mut phases);
        for (a, &p) in acc.iter_mut().zip(&phases) {
            *a += c * p;
        }
    }
    Ok(acc)
}

/// Type-2 NUDFT: mode coefficients to scattered values (forward map).
pub fn nudft_type2(
    points: &[f64],
    d: usize,
    h: f64,
    m: usize,
    coeffs: &[Complex64],
) -> Result<Vec<Complex64>> {
    let npts = check_points(points, d)?;
    let total = (2 * m + 1).pow(d as u32);
    if coeffs.len() != total {
        return Err(EfgpError::Argument(format!(
            "{} coefficients for a {total}-mode lattice",
            coeffs.len()
        )));
    }
    let mut out = Vec::with_capacity(npts);
    let mut phases = Vec::with_capacity(total);
    for i in 0..npts {
        phase_tensor(&points[i * d..(i + 1) * d], h, m, 1.0, &mut phases);
        out.push(coeffs.iter().zip(&phases).map(|(&c, &p)| c * p).sum());
    }
    Ok(out)
}

/// Smallest integer >= n whose prime factors are all in {2, 3, 5}.
pub(crate) fn next_smooth(n: usize) -> usize {
    let mut k = n.max(1);
    'outer: loop {
        let mut r = k;
        for p in [2usize, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return k;
        }
        k += 1;
        if k == 0 {
            break 'outer;
        }
    }
    unreachable!()
}

/// The Gram-phase Toeplitz operator `(T v)_j = sum_k t_{j-k} v_k` on the mode
/// lattice, where `t_r = sum_i e^{-2 pi i h <r, x_i>}`. Application is by
/// circulant embedding: each axis is zero-padded to a 5-smooth length
/// >= 4m+1 and the convolution is done with FFTs, so one apply costs
/// O(L^d log L) instead of O(M^2).
pub struct ToeplitzOperator {
    d: usize,
    n: usize,
    pad: usize,
    symbol_fft: Vec<Complex64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for ToeplitzOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ToeplitzOperator")
            .field("d", &self.d)
            .field("n", &self.n)
            .field("pad", &self.pad)
            .finish()
    }
}

impl ToeplitzOperator {
    /// Build from scattered points; `t_0` equals the point count.
    pub fn build(points: &[f64], d: usize, h: f64, m: usize) -> Result<Self> {
        check_points(points, d)?;
        let ones = vec![Complex64::new(1.0, 0.0); points.len() / d];
        let symbol = nudft_type1(points, d, h, 2 * m, &ones)?;
        Self::from_symbol(&symbol, d, m)
    }

    /// Build from a precomputed symbol on `{-2m..2m}^d` (row-major).
    pub fn from_symbol(symbol: &[Complex64], d: usize, m: usize) -> Result<Self> {
        if d == 0 || d > 3 {
            return Err(EfgpError::Argument(format!(
                "dimension must be 1, 2, or 3, got {d}"
            )));
        }
        let span = 4 * m + 1;
        if symbol.len() != span.pow(d as u32) {
            return Err(EfgpError::Argument(format!(
                "symbol has {} entries, expected (4m+1)^d = {}",
                symbol.len(),
                span.pow(d as u32)
            )));
        }
        let n = 2 * m + 1;
        let pad = next_smooth(span);
        let total_pad = pad.pow(d as u32);
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(pad);
        let inv = planner.plan_fft_inverse(pad);
        // Scatter t_r to circulant position (r mod pad) per axis; pad >= 4m+1
        // keeps negative and positive lags from colliding.
        let mut buf = vec![Complex64::new(0.0, 0.0); total_pad];
        let half = 2 * m as i64;
        for (lin, &t) in symbol.iter().enumerate() {
            let mut rest = lin;
            let mut idxs = [0usize; 3];
            for a in (0..d).rev() {
                let r = (rest % span) as i64 - half;
                rest /= span;
                idxs[a] = (((r % pad as i64) + pad as i64) % pad as i64) as usize;
            }
            let mut pos = 0usize;
            for &idx in idxs.iter().take(d) {
                pos = pos * pad + idx;
            }
            buf[pos] += t;
        }
        fft_nd(&mut buf, pad, d, &fwd);
        Ok(ToeplitzOperator {
            d,
            n,
            pad,
            symbol_fft: buf,
            fwd,
            inv,
        })
    }

    pub fn mode_count(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    /// Apply `T` to a vector on the mode lattice (row-major, length (2m+1)^d).
    pub fn apply(&self, v: &[Complex64]) -> Result<Vec<Complex64>> {
        if v.len() != self.mode_count() {
            return Err(EfgpError::Argument(format!(
                "vector has {} entries, operator expects {}",
                v.len(),
                self.mode_count()
            )));
        }
        let total_pad = self.pad.pow(self.d as u32);
        let mut buf = vec![Complex64::new(0.0, 0.0); total_pad];
        scatter(v, self.n, self.d, &mut buf, self.pad);
        fft_nd(&mut buf, self.pad, self.d, &self.fwd);
        for (b, &s) in buf.iter_mut().zip(&self.symbol_fft) {
            *b *= s;
        }
        fft_nd(&mut buf, self.pad, self.d, &self.inv);
        let scale = 1.0 / total_pad as f64;
        let mut out = vec![Complex64::new(0.0, 0.0); v.len()];
        gather(&buf, self.pad, self.d, &mut out, self.n);
        for o in out.iter_mut() {
            *o *= scale;
        }
        Ok(out)
    }
}

/// In-place d-dimensional FFT of a row-major cube with side `len`.
fn fft_nd(buf: &mut [Complex64], len: usize, d: usize, fft: &Arc<dyn Fft<f64>>) {
    let total = buf.len();
    debug_assert_eq!(total, len.pow(d as u32));
    let mut scratch = vec![Complex64::new(0.0, 0.0); len];
    for axis in 0..d {
        let stride = len.pow((d - 1 - axis) as u32);
        let block = stride * len;
        for base in (0..total).step_by(block) {
            for off in 0..stride {
                if stride == 1 {
                    fft.process(&mut buf[base..base + len]);
                } else {
                    for (q, s) in scratch.iter_mut().enumerate() {
                        *s = buf[base + off + q * stride];
                    }
                    fft.process(&mut scratch);
                    for (q, &s) in scratch.iter().enumerate() {
                        buf[base + off + q * stride] = s;
                    }
                }
            }
        }
    }
}

fn scatter(src: &[Complex64], n: usize, d: usize, dst: &mut [Complex64], pad: usize) {
    copy_cube(src, n, dst, pad, d);
}

fn gather(src: &[Complex64], pad: usize, d: usize, dst: &mut [Complex64], n: usize) {
    match d {
        1 => dst[..n].copy_from_slice(&src[..n]),
        2 => {
            for i in 0..n {
                dst[i * n..(i + 1) * n].copy_from_slice(&src[i * pad..i * pad + n]);
            }
        }
        3 => {
            for i in 0..n {
                for j in 0..n {
                    let s = (i * pad + j) * pad;
                    let t = (i * n + j) * n;
                    dst[t..t + n].copy_from_slice(&src[s..s + n]);
                }
            }
        }
        _ => unreachable!(),
    }
}

fn copy_cube(src: &[Complex64], n: usize, dst: &mut [Complex64], pad: usize, d: usize) {
    match d {
        1 => dst[..n].copy_from_slice(&src[..n]),
        2 => {
            for i in 0..n {
                dst[i * pad..i * pad + n].copy_from_slice(&src[i * n..(i + 1) * n]);
            }
        }
        3 => {
            for i in 0..n {
                for j in 0..n {
                    let s = (i * n + j) * n;
                    let t = (i * pad + j) * pad;
                    dst[t..t + n].copy_from_slice(&src[s..s + n]);
                }
            }
        }
        _ => unreachable!(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_setup(seed: u64, npts: usize, d: usize) -> (Vec<f64>, Vec<Complex64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let points: Vec<f64> = (0..npts * d).map(|_| rng.gen::<f64>()).collect();
        let values: Vec<Complex64> = (0..npts)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        (points, values)
    }

    /// Compensated-summation reference for type 1 (independent of the
    /// rotation-recurrence fast path).
    fn type1_reference(
        points: &[f64],
        d: usize,
        h: f64,
        m: usize,
        values: &[Complex64],
    ) -> Vec<Complex64> {
        let n = 2 * m + 1;
        let total = n.pow(d as u32);
        let mut out = vec![Complex64::new(0.0, 0.0); total];
        for lin in 0..total {
            let mut rest = lin;
            let mut j = [0i64; 3];
            for a in (0..d).rev() {
                j[a] = (rest % n) as i64 - m as i64;
                rest /= n;
            }
            let (mut sr, mut cr) = (0.0f64, 0.0f64);
            let (mut si, mut ci) = (0.0f64, 0.0f64);
            for (i, &v) in values.iter().enumerate() {
                let theta: f64 = (0..d)
                    .map(|a| -2.0 * std::f64::consts::PI * h * j[a] as f64 * points[i * d + a])
                    .sum();
                let e = Complex64::from_polar(1.0, theta) * v;
                // Kahan accumulation, separately per component.
                let yr = e.re - cr;
                let tr = sr + yr;
                cr = (tr - sr) - yr;
                sr = tr;
                let yi = e.im - ci;
                let ti = si + yi;
                ci = (ti - si) - yi;
                si = ti;
            }
            out[lin] = Complex64::new(sr, si);
        }
        out
    }

    #[test]
    fn type1_matches_reference() {
        for (d, m) in [(1usize, 9usize), (2, 4), (3, 2)] {
            let (pts, vals) = random_setup(7 + d as u64, 35, d);
            let fast = nudft_type1(&pts, d, 0.37, m, &vals).unwrap();
            let slow = type1_reference(&pts, d, 0.37, m, &vals);
            let scale = vals.len() as f64;
            for (f, s) in fast.iter().zip(&slow) {
                assert!((f - s).norm() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn type1_type2_are_adjoint() {
        // <type2(c), y>_points = <c, type1(conj-free y)>_modes.
        let d = 2;
        let m = 5;
        let (pts, y) = random_setup(11, 40, d);
        let total = (2 * m + 1usize).pow(d as u32);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let c: Vec<Complex64> = (0..total)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        let t2 = nudft_type2(&pts, d, 0.29, m, &c).unwrap();
        let t1 = nudft_type1(&pts, d, 0.29, m, &y).unwrap();
        let lhs: Complex64 = t2.iter().zip(&y).map(|(a, b)| a * b.conj()).sum();
        let rhs: Complex64 = c.iter().zip(&t1).map(|(a, b)| a * b.conj()).sum();
        assert!((lhs - rhs).norm() < 1e-10, "{lhs} vs {rhs}");
    }

    #[test]
    fn next_smooth_values() {
        assert_eq!(next_smooth(1), 1);
        assert_eq!(next_smooth(17), 18);
        assert_eq!(next_smooth(41), 45);
        assert_eq!(next_smooth(121), 125);
        assert_eq!(next_smooth(128), 128);
    }

    #[test]
    fn toeplitz_symbol_center_is_point_count() {
        let (pts, _) = random_setup(3, 27, 1);
        let ones = vec![Complex64::new(1.0, 0.0); 27];
        let symbol = nudft_type1(&pts, 1, 0.4, 2 * 6, &ones).unwrap();
        let center = symbol[2 * 6]; // lag 0 of {-12..12}
        assert!((center.re - 27.0).abs() < 1e-10);
        assert!(center.im.abs() < 1e-10);
        // conjugate symmetry t_{-r} = conj(t_r)
        for r in 0..=12 {
            let a = symbol[12 + r];
            let b = symbol[12 - r];
            assert!((a - b.conj()).norm() < 1e-10);
        }
    }

    #[test]
    fn toeplitz_apply_matches_dense() {
        for (d, m, npts) in [(1usize, 7usize, 30usize), (2, 3, 25)] {
            let h = 0.31;
            let (pts, _) = random_setup(40 + d as u64, npts, d);
            let op = ToeplitzOperator::build(&pts, d, h, m).unwrap();
            let n = 2 * m + 1;
            let total = n.pow(d as u32);
            let ones = vec![Complex64::new(1.0, 0.0); npts];
            let symbol = nudft_type1(&pts, d, h, 2 * m, &ones).unwrap();
            let span = 4 * m + 1;
            // dense T from the symbol
            let lag = |jl: usize, kl: usize| -> Complex64 {
                let mut pos = 0usize;
                let (mut jr, mut kr) = (jl, kl);
                let mut idxs = [0usize; 3];
                for a in (0..d).rev() {
                    let jj = (jr % n) as i64;
                    let kk = (kr % n) as i64;
                    jr /= n;
                    kr /= n;
                    idxs[a] = (jj - kk + 2 * m as i64) as usize;
                }
                for &ix in idxs.iter().take(d) {
                    pos = pos * span + ix;
                }
                symbol[pos]
            };
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            let v: Vec<Complex64> = (0..total)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            let fast = op.apply(&v).unwrap();
            for j in 0..total {
                let dense: Complex64 = (0..total).map(|k| lag(j, k) * v[k]).sum();
                assert!(
                    (fast[j] - dense).norm() < 1e-9 * npts as f64,
                    "d={d} j={j}: {} vs {dense}",
                    fast[j]
                );
            }
        }
    }

    #[test]
    fn toeplitz_matches_gram_matrix() {
        // T must equal Phi0* Phi0 where Phi0 drops the sqrt(w) scaling.
        let d = 1;
        let m = 4;
        let h = 0.45;
        let (pts, _) = random_setup(5, 12, d);
        let op = ToeplitzOperator::build(&pts, d, h, m).unwrap();
        let n = 2 * m + 1;
        // columns of Phi0: e^{2 pi i h j x_i}
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<Complex64> = (0..n)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect();
        // direct Phi0* (Phi0 v)
        let phi0 = |i: usize, j: usize| {
            Complex64::from_polar(
                1.0,
                2.0 * std::f64::consts::PI * h * (j as f64 - m as f64) * pts[i],
            )
        };
        let mut pv = vec![Complex64::new(0.0, 0.0); 12];
        for (i, p) in pv.iter_mut().enumerate() {
            *p = (0..n).map(|j| phi0(i, j) * v[j]).sum();
        }
        let mut direct = vec![Complex64::new(0.0, 0.0); n];
        for (j, dj) in direct.iter_mut().enumerate() {
            *dj = (0..12).map(|i| phi0(i, j).conj() * pv[i]).sum();
        }
        let fast = op.apply(&v).unwrap();
        for (f, s) in fast.iter().zip(&direct) {
            assert!((f - s).norm() < 1e-10);
        }
    }
}
