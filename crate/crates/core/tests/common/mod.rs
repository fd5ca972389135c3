//! Test-only oracles. Nothing here calls into the library's numerics, so a
//! bug there cannot cancel out against the same bug here.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

/// Trapezoid rule on `[a, b]`. Spectrally accurate for smooth periodic
/// integrands taken over a full period, or over half a period of an even one.
pub fn trapezoid<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = 0.5 * (f(a) + f(b));
    for i in 1..n {
        s += f(a + i as f64 * h);
    }
    s * h
}

/// Adaptive Simpson with Richardson correction.
pub fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// `K(k)` by the trapezoid rule on the even, π-periodic integrand.
pub fn k_quad(k: f64) -> f64 {
    trapezoid(|t| 1.0 / (1.0 - k * k * t.sin().powi(2)).sqrt(), 0.0, FRAC_PI_2, 4000)
}

pub fn e_quad(k: f64) -> f64 {
    trapezoid(|t| (1.0 - k * k * t.sin().powi(2)).sqrt(), 0.0, FRAC_PI_2, 4000)
}

/// Incomplete integral of the first kind `F(φ, k)`.
pub fn f_incomplete(phi: f64, k: f64) -> f64 {
    simpson(&|t: f64| 1.0 / (1.0 - k * k * t.sin().powi(2)).sqrt(), 0.0, phi, 1e-15)
}

/// Modulus from the nome by theta series: `k = (θ₂/θ₃)²`.
pub fn modulus_from_nome(q: f64) -> f64 {
    let mut th2 = 0.0;
    let mut th3 = 1.0;
    for n in 0..200 {
        let nf = n as f64;
        th2 += 2.0 * q.powf((nf + 0.5) * (nf + 0.5));
        if n > 0 {
            th3 += 2.0 * q.powf(nf * nf);
        }
    }
    (th2 / th3).powi(2)
}

/// Nome by inverting the theta series with bisection.
pub fn nome_theta(k: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 0.9f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if modulus_from_nome(mid) < k {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn v(q: f64) -> f64 {
    q * q / 2.0 - q * q * q / 3.0
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m == a || m == b {
            break;
        }
        if (f(m) > 0.0) == (fa > 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// The three roots of `V(q) = ξ`, `0 < ξ < 1/6`, by bracketing on the
/// monotone pieces of `V`.
pub fn cubic_roots(xi: f64) -> (f64, f64, f64) {
    let g = |q: f64| v(q) - xi;
    (bisect(g, -0.5, 0.0), bisect(g, 0.0, 1.0), bisect(g, 1.0, 1.5))
}

/// `J(ξ) = (1/π) ∫ √(2(ξ − V)) dq` with `q = q₋ + Δ(1 − cos φ)/2`, which
/// turns the integrand into a smooth function of `φ`.
pub fn action_quad(xi: f64) -> f64 {
    let (a, b, c) = if xi >= 1.0 / 6.0 { (-0.5, 1.0, 1.0) } else { cubic_roots(xi) };
    let half = 0.5 * (b - a);
    let f = |phi: f64| {
        let q = a + half * (1.0 - phi.cos());
        half * half * phi.sin().powi(2) * ((2.0 / 3.0) * (c - q)).sqrt()
    };
    simpson(&f, 0.0, PI, 1e-14) / PI
}

/// `T(ξ) = ∮ dq/√(2(ξ − V))`, same substitution.
pub fn period_quad(xi: f64) -> f64 {
    let (a, b, c) = cubic_roots(xi);
    let half = 0.5 * (b - a);
    let f = |phi: f64| {
        let q = a + half * (1.0 - phi.cos());
        1.0 / ((2.0 / 3.0) * (c - q)).sqrt()
    };
    2.0 * simpson(&f, 0.0, PI, 1e-13)
}

/// `C(ϑ, ξ)` assembled term by term from the oracles above.
pub fn conservation_oracle(theta: f64, xi: f64, forcing: f64, omega: f64) -> f64 {
    let z = (1.0 - 12.0 * xi).acos() / 3.0;
    let k2 = z.sin() / (2.0 * PI / 3.0 - z).sin();
    let k = k2.sqrt();
    let big_k = k_quad(k);
    let q = nome_theta(k);
    let coeff = PI * PI * 3f64.sqrt() * z.sin() / (k2 * big_k * big_k) * q / (1.0 - q * q);
    xi - forcing * coeff * theta.cos() - omega * action_quad(xi)
}

/// Linear response from rest of `q̈ + q = F sin(Ωt)`.
pub fn linear_response(t: f64, forcing: f64, omega: f64) -> f64 {
    forcing / (1.0 - omega * omega) * ((omega * t).sin() - omega * t.sin())
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
