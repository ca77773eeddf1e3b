//! Gauss-Legendre quadrature with dyadic panel refinement toward the origin.
//!
//! Used for weighted L2 error measurements where the integrand is smooth on
//! each panel but the relevant scale shrinks toward z = 0.

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on P_n.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..(n + 1) / 2 {
        // Chebyshev-like initial guess for the i-th root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_deriv(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// P_n(x) and P_n'(x) via the three-term recurrence.
fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Composite rule on [-1, 1] symmetric about 0, with `levels` dyadic panels
/// per side ([2^-L, 2^-(L-1)], ..., [1/2, 1]) plus the innermost
/// [0, 2^-L] panel, each carrying an `order`-point Gauss-Legendre rule.
pub fn dyadic_axis_rule(order: usize, levels: u32) -> (Vec<f64>, Vec<f64>) {
    let (gx, gw) = gauss_legendre(order);
    let mut cuts = vec![0.0];
    for l in (0..=levels).rev() {
        cuts.push(0.5f64.powi(l as i32));
    }
    let mut nodes = Vec::new();
    let mut weights = Vec::new();
    let mut push_panel = |a: f64, b: f64| {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push(mid + half * x);
            weights.push(half * w);
        }
    };
    for pair in cuts.windows(2) {
        push_panel(-pair[1], -pair[0]);
    }
    for pair in cuts.windows(2) {
        push_panel(pair[0], pair[1]);
    }
    (nodes, weights)
}
