//! Brute-force cross-checks: plain quadrature, direct recursion and
//! derivative-free minimisation.
//!
//! Nothing here calls the closed forms in [`crate::gaussian`] or
//! [`crate::chain`]; the functions take raw numbers and integrate or iterate
//! the defining expressions directly, so they can serve as independent
//! oracles for them.

use std::f64::consts::TAU;

/// Adaptive Simpson quadrature of `f` on `[a, b]`. The interval is first cut
/// into 1024 panels so narrow peaks on wide windows are not stepped over.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    const PANELS: usize = 1024;
    let h = (b - a) / PANELS as f64;
    let mut sum = Neumaier::default();
    for i in 0..PANELS {
        let lo = a + h * i as f64;
        let hi = if i + 1 == PANELS { b } else { lo + h };
        let mid = 0.5 * (lo + hi);
        let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        sum.add(simpson_step(&f, lo, hi, flo, fmid, fhi, whole, tol / PANELS as f64, 40));
    }
    sum.total()
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
}

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut sum = Neumaier::default();
    sum.add(f(a));
    sum.add(f(b));
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum.add(w * f(a + h * i as f64));
    }
    sum.total() * h / 3.0
}

fn normal_pdf(x: f64, mean: f64, std: f64) -> f64 {
    let z = (x - mean) / std;
    (-0.5 * z * z).exp() / (std * TAU.sqrt())
}

/// Standard deviation of the second-measurement density, obtained by
/// numerically convolving the first-measurement density `𝒢(y, sigma_first)`
/// with the one-step kernel `𝒢(x − ρ y, sigma_step)` and taking moments.
pub fn convolved_second_std(sigma_first: f64, sigma_step: f64, rho: f64) -> f64 {
    const INNER: usize = 600;
    const OUTER: usize = 600;
    let inner_half = 12.0 * sigma_first;
    let density = |x: f64| {
        simpson(
            |y| normal_pdf(y, 0.0, sigma_first) * normal_pdf(x, rho * y, sigma_step),
            -inner_half,
            inner_half,
            INNER,
        )
    };
    // any bound on the width will do for the outer window
    let outer_half = 12.0 * (rho.abs() * sigma_first + sigma_step);
    let mut mass = Neumaier::default();
    let mut second = Neumaier::default();
    let n = OUTER + OUTER % 2;
    let h = 2.0 * outer_half / n as f64;
    for i in 0..=n {
        let x = -outer_half + h * i as f64;
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let d = density(x);
        mass.add(w * d);
        second.add(w * d * x * x);
    }
    (second.total() / mass.total()).sqrt()
}

/// Variances of the densities before measurements `1..=n`, generated by the
/// defining recursion `σ₁² = σ_first²`, `σᵢ₊₁² = σ_step² + ρ² σᵢ²`.
pub fn recursive_variances(sigma_first: f64, sigma_step: f64, rho: f64, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n);
    let mut v = sigma_first * sigma_first;
    for _ in 0..n {
        out.push(v);
        v = sigma_step * sigma_step + rho * rho * v;
    }
    out
}

/// Mean of the first `n` recursively generated variances, compensated sum.
pub fn average_variance(sigma_first: f64, sigma_step: f64, rho: f64, n: usize) -> f64 {
    let mut sum = Neumaier::default();
    for v in recursive_variances(sigma_first, sigma_step, rho, n) {
        sum.add(v);
    }
    sum.total() / n as f64
}

/// Golden-section search for a minimum of a unimodal `f` on `[a, b]`.
pub fn golden_section_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}
