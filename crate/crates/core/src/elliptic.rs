//! Complete elliptic integrals, Jacobi elliptic functions and the nome.
//!
//! Everything here uses the modulus convention (`k`, not `m = k²`). The
//! integrals come from the arithmetic-geometric mean; the Jacobi functions
//! from the descending Landen (AGM) recurrence for the amplitude.
//!
//! Functions that are evaluated close to `k = 1` by the slow-flow code also
//! have `*_from_complement` variants taking `k' = √(1 − k²)` directly, which
//! avoids the cancellation in `1 − k²`.

use std::f64::consts::PI;

use crate::error::{domain, Result};

/// Largest modulus for which [`complete_k`] returns a value.
pub const K_MODULUS_LIMIT: f64 = 1.0 - 1e-12;

const AGM_MAX_ITER: usize = 40;

/// Values of the three Jacobi elliptic functions at one argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticEval {
    pub u: f64,
    pub k: f64,
    pub sn: f64,
    pub cn: f64,
    pub dn: f64,
}

/// Arithmetic-geometric mean of two non-negative numbers.
pub fn agm(mut a: f64, mut b: f64) -> f64 {
    for _ in 0..AGM_MAX_ITER {
        if (a - b).abs() <= 1e-16 * a {
            break;
        }
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
    }
    0.5 * (a + b)
}

fn complement(k: f64) -> f64 {
    ((1.0 - k) * (1.0 + k)).sqrt()
}

fn check_modulus(op: &'static str, k: f64) -> Result<()> {
    if !k.is_finite() || !(0.0..=1.0).contains(&k) {
        return Err(domain(op, format!("modulus {k} outside [0, 1]")));
    }
    Ok(())
}

/// Complete elliptic integral of the first kind, `K(k) = π / (2·AGM(1, k'))`.
///
/// Rejects `k > 1 − 1e-12`, where `K` is dominated by its logarithmic
/// divergence.
pub fn complete_k(k: f64) -> Result<f64> {
    check_modulus("complete_K", k)?;
    if k > K_MODULUS_LIMIT {
        return Err(domain(
            "complete_K",
            format!("modulus {k} too close to 1, K diverges"),
        ));
    }
    Ok(complete_k_unchecked(complement(k)))
}

/// `K` expressed through the complementary modulus `k'`.
pub fn complete_k_from_complement(kp: f64) -> Result<f64> {
    check_modulus("complete_K", kp)?;
    if kp < 1e-12 {
        return Err(domain(
            "complete_K",
            format!("complementary modulus {kp} too small, K diverges"),
        ));
    }
    Ok(complete_k_unchecked(kp))
}

#[inline]
fn complete_k_unchecked(kp: f64) -> f64 {
    PI / (2.0 * agm(1.0, kp))
}

/// Complete elliptic integral of the second kind.
///
/// Uses the Gauss–Legendre AGM series
/// `E = K·(1 − Σ 2^(n−1) c_n²)` with `c_0 = k`.
pub fn complete_e(k: f64) -> Result<f64> {
    check_modulus("complete_E", k)?;
    Ok(complete_e_parts(k, complement(k)))
}

/// `E` expressed through the complementary modulus `k'`.
pub fn complete_e_from_complement(kp: f64) -> Result<f64> {
    check_modulus("complete_E", kp)?;
    Ok(complete_e_parts(complement(kp), kp))
}

fn complete_e_parts(k: f64, kp: f64) -> f64 {
    if kp == 0.0 {
        return 1.0;
    }
    let mut a = 1.0;
    let mut b = kp;
    let mut weight = 0.5;
    let mut sum = weight * k * k;
    for _ in 0..AGM_MAX_ITER {
        let c = 0.5 * (a - b);
        weight *= 2.0;
        sum += weight * c * c;
        if c.abs() <= 1e-17 * a {
            break;
        }
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
    }
    let agm_value = 0.5 * (a + b);
    PI / (2.0 * agm_value) * (1.0 - sum)
}

/// Both complete integrals at once, from `k'` (shares one AGM run).
pub(crate) fn complete_ke_from_complement(kp: f64) -> (f64, f64) {
    let k = complement(kp);
    let mut a = 1.0;
    let mut b = kp;
    let mut weight = 0.5;
    let mut sum = weight * k * k;
    for _ in 0..AGM_MAX_ITER {
        let c = 0.5 * (a - b);
        weight *= 2.0;
        sum += weight * c * c;
        if c.abs() <= 1e-17 * a {
            break;
        }
        let next = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = next;
    }
    let kk = PI / (a + b);
    (kk, kk * (1.0 - sum))
}

/// Jacobi elliptic functions `sn`, `cn`, `dn` of `u` with modulus `k`.
///
/// The argument is first reduced modulo `4K`; the amplitude is then
/// obtained by the descending Landen recurrence
/// `φ_{n−1} = (φ_n + asin(c_n/a_n · sin φ_n)) / 2`.
pub fn jacobi(u: f64, k: f64) -> Result<EllipticEval> {
    if !u.is_finite() {
        return Err(domain("jacobi", format!("argument {u} is not finite")));
    }
    check_modulus("jacobi", k)?;
    Ok(jacobi_with_complement(u, k, complement(k)))
}

/// Same as [`jacobi`] with the complementary modulus supplied by the caller.
pub(crate) fn jacobi_with_complement(u: f64, k: f64, kp: f64) -> EllipticEval {
    if k == 0.0 {
        return EllipticEval {
            u,
            k,
            sn: u.sin(),
            cn: u.cos(),
            dn: 1.0,
        };
    }
    if kp == 0.0 {
        let sech = 1.0 / u.cosh();
        return EllipticEval {
            u,
            k,
            sn: u.tanh(),
            cn: sech,
            dn: sech,
        };
    }

    let reduced = if kp >= 1e-12 {
        let quarter = complete_k_unchecked(kp);
        let period = 4.0 * quarter;
        let r = u.rem_euclid(period);
        // map into (-2K, 2K] so the amplitude recurrence sees small arguments
        if r > 2.0 * quarter {
            r - period
        } else {
            r
        }
    } else {
        u
    };

    let mut a = [0.0f64; AGM_MAX_ITER + 1];
    let mut c = [0.0f64; AGM_MAX_ITER + 1];
    a[0] = 1.0;
    let mut b = kp;
    c[0] = k;
    let mut n = 0;
    while n < AGM_MAX_ITER && c[n].abs() > 1e-16 * a[n] {
        let an = a[n];
        a[n + 1] = 0.5 * (an + b);
        c[n + 1] = 0.5 * (an - b);
        b = (an * b).sqrt();
        n += 1;
    }

    let mut phi = (2f64).powi(n as i32) * a[n] * reduced;
    for j in (1..=n).rev() {
        let s = (c[j] / a[j] * phi.sin()).clamp(-1.0, 1.0);
        phi = 0.5 * (phi + s.asin());
    }
    let sn = phi.sin();
    let cn = phi.cos();
    // 1 − k²sn² = k'² + k²cn², free of cancellation near sn = ±1
    let dn = (kp * kp + k * k * cn * cn).sqrt();
    EllipticEval { u, k, sn, cn, dn }
}

/// Elliptic nome `Q = exp(−π K(k') / K(k))`.
///
/// The endpoints return their limits (`0` at `k = 0`, `1` at `k = 1`).
pub fn nome(k: f64) -> Result<f64> {
    check_modulus("nome", k)?;
    if k == 0.0 {
        return Ok(0.0);
    }
    if k == 1.0 {
        return Ok(1.0);
    }
    Ok(nome_from_pair(k, complement(k)))
}

pub(crate) fn nome_from_pair(k: f64, kp: f64) -> f64 {
    (-nome_exponent(k, kp)).exp()
}

/// `πK(k')/K(k) = π·AGM(1, k')/AGM(1, k)`, i.e. `−ln Q`.
pub(crate) fn nome_exponent(k: f64, kp: f64) -> f64 {
    PI * agm(1.0, kp) / agm(1.0, k)
}
