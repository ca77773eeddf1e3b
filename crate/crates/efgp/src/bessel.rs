//! Modified Bessel function of the second kind `K_nu` for real order
//! `nu >= 1/2`, with a scaled variant `e^z K_nu(z)` that stays finite for
//! large arguments.
//!
//! Half-integer orders use the closed forms (upward recurrence from
//! `K_{1/2}`); other orders use Temme's series for `z <= 2` and the Steed
//! continued fraction for `z > 2`.

use crate::error::{EfgpError, Result};

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 2000;

/// `K_nu(z)`. Underflows to 0 for very large `z`; that is not an error.
pub fn bessel_k(nu: f64, z: f64) -> Result<f64> {
    Ok(bessel_k_scaled(nu, z)? * (-z).exp())
}

/// `e^z K_nu(z)`.
pub fn bessel_k_scaled(nu: f64, z: f64) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(EfgpError::Domain(format!(
            "bessel_k requires z > 0, got {z}"
        )));
    }
    if !(nu >= 0.5) || !nu.is_finite() {
        return Err(EfgpError::Domain(format!(
            "bessel_k requires nu >= 1/2, got {nu}"
        )));
    }
    let half = nu - 0.5;
    if (half - half.round()).abs() < 1e-12 {
        Ok(half_integer_scaled(half.round() as u32, z))
    } else {
        Ok(general_scaled(nu, z))
    }
}

/// `e^z K_{n+1/2}(z)` by upward recurrence from the closed form
/// `K_{1/2}(z) = sqrt(pi/2z) e^{-z}`.
fn half_integer_scaled(n: u32, z: f64) -> f64 {
    let base = (std::f64::consts::FRAC_PI_2 / z).sqrt();
    let mut km = base; // e^z K_{-1/2}
    let mut k = base; // e^z K_{1/2}
    let mut order = 0.5;
    for _ in 0..n {
        let next = km + (2.0 * order / z) * k;
        km = k;
        k = next;
        order += 1.0;
    }
    k
}

/// Two-regime evaluation for non-half-integer order: Temme series for
/// `z <= 2`, Steed continued fraction CF2 for `z > 2`, then upward
/// recurrence in the order. Exposed for validation against the closed
/// forms.
pub(crate) fn general_scaled(nu: f64, z: f64) -> f64 {
    let nl = (nu + 0.5).floor() as usize;
    let mu = nu - nl as f64;
    let (mut kmu, mut kmu1) = if z <= 2.0 {
        let (a, b) = temme_series(mu, z);
        (a * z.exp(), b * z.exp())
    } else {
        steed_cf2_scaled(mu, z)
    };
    for i in 0..nl {
        let next = kmu + (2.0 * (mu + 1.0 + i as f64) / z) * kmu1;
        kmu = kmu1;
        kmu1 = next;
    }
    kmu
}

/// Temme's series for `(K_mu(z), K_{mu+1}(z))`, `|mu| <= 1/2`, `z <= 2`.
fn temme_series(mu: f64, z: f64) -> (f64, f64) {
    let mu2 = mu * mu;
    let pimu = std::f64::consts::PI * mu;
    let fact = if pimu.abs() < 1e-15 {
        1.0
    } else {
        pimu / pimu.sin()
    };
    let d = -(z / 2.0).ln();
    let e = mu * d;
    let fact2 = if e.abs() < 1e-15 { 1.0 } else { e.sinh() / e };
    let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
    let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
    let mut sum = ff;
    let e = e.exp();
    let mut p = 0.5 * e / gampl;
    let mut q = 0.5 / (e * gammi);
    let mut c = 1.0;
    let d2 = 0.25 * z * z;
    let mut sum1 = p;
    for i in 1..=MAX_ITER {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu2);
        c *= d2 / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        sum1 += c * (p - fi * ff);
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    (sum, sum1 * 2.0 / z)
}

/// Reciprocal-gamma combinations used by Temme's series:
/// `gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / 2mu`,
/// `gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2`,
/// plus `1/Gamma(1+mu)` and `1/Gamma(1-mu)` themselves.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    if mu.abs() < 0.05 {
        // Series 1/Gamma(1+x) = sum a_k x^k; even/odd split avoids the
        // cancellation in gam1 as mu -> 0.
        const A: [f64; 13] = [
            1.0,
            0.57721_56649_01532_8606,
            -0.65587_80715_20253_881,
            -0.04200_26350_34095_2355,
            0.16653_86113_82291_4895,
            -0.04219_77345_55544_3367,
            -0.00962_19715_27876_9735,
            0.00721_89432_46663_0995,
            -0.00116_51675_91859_0651,
            -0.00021_52416_74114_9509,
            0.00012_80502_82388_1162,
            -0.00002_01348_54780_7882,
            -0.00000_12504_93482_1426,
        ];
        // 1/Gamma(1+mu) = E(mu^2) + mu*O(mu^2)
        let m2 = mu * mu;
        let e = horner_even(&A, m2);
        let o = horner_odd(&A, m2);
        let gampl = e + mu * o;
        let gammi = e - mu * o;
        (-o, e, gampl, gammi)
    } else {
        let gampl = 1.0 / statrs::function::gamma::gamma(1.0 + mu);
        let gammi = 1.0 / statrs::function::gamma::gamma(1.0 - mu);
        ((gammi - gampl) / (2.0 * mu), (gammi + gampl) / 2.0, gampl, gammi)
    }
}

fn horner_even(a: &[f64], m2: f64) -> f64 {
    let mut acc = 0.0;
    for k in (0..a.len()).rev().filter(|k| k % 2 == 0) {
        acc = acc * m2 + a[k];
    }
    acc
}

fn horner_odd(a: &[f64], m2: f64) -> f64 {
    let mut acc = 0.0;
    for k in (0..a.len()).rev().filter(|k| k % 2 == 1) {
        acc = acc * m2 + a[k];
    }
    acc
}

/// Steed CF2 for `(e^z K_mu(z), e^z K_{mu+1}(z))`, `|mu| <= 1/2`, `z > 2`.
fn steed_cf2_scaled(mu: f64, z: f64) -> (f64, f64) {
    let mu2 = mu * mu;
    let mut b = 2.0 * (1.0 + z);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu2;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..=MAX_ITER {
        a -= 2.0 * (i as f64 - 1.0);
        c = -a * c / i as f64;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() <= EPS {
            break;
        }
    }
    let h = a1 * h;
    let kmu = (std::f64::consts::FRAC_PI_2 / z).sqrt() / s;
    let kmu1 = kmu * (mu + z + 0.5 - h) / z;
    (kmu, kmu1)
}

/// `f_nu(z) = z^nu K_nu(z)`, computed in log space so that large `z`
/// (where `K_nu` underflows) still yields the correct tiny value.
pub fn f_nu(nu: f64, z: f64) -> Result<f64> {
    let scaled = bessel_k_scaled(nu, z)?;
    Ok((nu * z.ln() - z).exp() * scaled)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Independent reference: K_nu(z) = int_0^infty e^{-z cosh t} cosh(nu t) dt,
    /// by trapezoid rule (superalgebraic accuracy for this even integrand).
    fn bessel_k_integral(nu: f64, z: f64) -> f64 {
        let dt: f64 = 1e-3;
        let mut sum = 0.5; // t = 0 term: e^{-z} cosh(0), scaled by e^z below
        let mut t = dt;
        loop {
            let expo = z - z * t.cosh();
            if expo < -745.0 {
                break;
            }
            sum += expo.exp() * (nu * t).cosh();
            t += dt;
        }
        sum * dt * (-z).exp()
    }

    #[test]
    fn half_integer_closed_forms() {
        // K_{1/2}(2) = sqrt(pi/4) e^{-2}
        assert_relative_eq!(
            bessel_k(0.5, 2.0).unwrap(),
            0.11993777196806145,
            max_relative = 1e-14
        );
        // K_{3/2}(1) = sqrt(pi/2) e^{-1} (1 + 1/1)
        assert_relative_eq!(
            bessel_k(1.5, 1.0).unwrap(),
            0.9221370088957891,
            max_relative = 1e-14
        );
    }

    #[test]
    fn general_path_matches_half_integer_closed_forms() {
        for &nu in &[0.5, 1.5, 2.5] {
            for &z in &[1e-6, 1e-3, 0.5, 1.0, 2.0, 5.0, 50.0, 300.0, 700.0] {
                let closed = bessel_k_scaled(nu, z).unwrap();
                let general = general_scaled(nu, z);
                assert_relative_eq!(general, closed, max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn agrees_with_integral_reference() {
        for &nu in &[0.5, 0.75, 1.0, 1.3, 2.0, 3.7, 5.5, 10.0] {
            for &z in &[0.01, 0.3, 1.0, 2.0, 3.0, 10.0, 80.0] {
                let reference = bessel_k_integral(nu, z);
                let computed = bessel_k(nu, z).unwrap();
                assert_relative_eq!(computed, reference, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn monotone_increasing_in_order() {
        assert!(bessel_k(0.5, 2.0).unwrap() < bessel_k(1.5, 2.0).unwrap());
        assert!(bessel_k(1.0, 5.0).unwrap() < bessel_k(2.0, 5.0).unwrap());
    }

    #[test]
    fn f_nu_values_and_decay() {
        // f_{1/2}(1) = K_{1/2}(1)
        assert_relative_eq!(
            f_nu(0.5, 1.0).unwrap(),
            0.46106850444789456,
            max_relative = 1e-13
        );
        // f_{1/2}(z) e^z = sqrt(pi/2) for all z
        let c = (std::f64::consts::PI / 2.0).sqrt();
        for &z in &[0.5, 2.0, 10.0] {
            assert_relative_eq!(f_nu(0.5, z).unwrap() * z.exp(), c, max_relative = 1e-13);
        }
        // Eq-style exponential envelope at z = 8 nu, nu = 1
        let nu = 1.0;
        let z = 8.0 * nu;
        let lhs = f_nu(nu, z).unwrap();
        let rhs = f_nu(nu, 4.0 * nu).unwrap() * (2.0 * nu).exp() * (-z / 2.0).exp();
        assert!(lhs <= rhs);
    }

    #[test]
    fn f_nu_monotone_decreasing() {
        for &nu in &[0.5, 1.0, 1.7, 2.5] {
            let mut prev = f64::INFINITY;
            let mut z = 1e-3;
            while z < 100.0 {
                let v = f_nu(nu, z).unwrap();
                assert!(v < prev, "f_nu not decreasing at nu={nu}, z={z}");
                prev = v;
                z *= 1.5;
            }
        }
    }

    #[test]
    fn exponential_decay_envelope() {
        // f_nu(z) <= f_nu(4 nu) e^{2 nu} e^{-z/2} on z in [4 nu, 30 nu]
        for &nu in &[0.5, 1.0, 1.5, 2.5] {
            let envelope = f_nu(nu, 4.0 * nu).unwrap() * (2.0 * nu).exp();
            for i in 0..50 {
                let z = 4.0 * nu + (30.0 * nu - 4.0 * nu) * (i as f64) / 49.0;
                assert!(f_nu(nu, z).unwrap() <= envelope * (-z / 2.0).exp() * (1.0 + 1e-14));
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(bessel_k(0.5, 0.0).is_err());
        assert!(bessel_k(0.5, -1.0).is_err());
        assert!(bessel_k(0.3, 1.0).is_err());
    }

    #[test]
    fn underflow_to_zero_is_not_an_error() {
        assert_eq!(bessel_k(0.5, 5000.0).unwrap(), 0.0);
        assert!(bessel_k_scaled(0.5, 5000.0).unwrap() > 0.0);
    }
}
