//! Cubic-well geometry, action-angle quantities and the 1:1 slow flow.
//!
//! The potential is `V(q) = q²/2 − q³/3`: a well at `q = 0` with the barrier
//! at `q = 1`, height `1/6`. For an energy `ξ ∈ (0, 1/6)` the cubic
//! `V(q) = ξ` has three real roots `q_min < q_max < c`; the bounded orbit
//! lives on `[q_min, q_max]` and is parameterised by `sn²`.
//!
//! The slow flow is the conserved quantity
//!
//! ```text
//! C(ϑ, ξ) = ξ − F·A(ξ)·cos ϑ − Ω·J(ξ),
//! A(ξ) = π²√3·sin z / (k²K²) · Q/(1 − Q²)
//! ```
//!
//! on the `(ϑ, ξ)` cylinder, with `z = arccos(1 − 12ξ)/3`, modulus
//! `k² = sin z / sin(2π/3 − z)` and nome `Q`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_6, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::elliptic::{self, complete_ke_from_complement, jacobi_with_complement, nome_exponent};
use crate::error::{domain, Result};

/// Barrier height of the cubic well, `V(1)`.
pub const BARRIER: f64 = 1.0 / 6.0;

/// Slow phase shift between the conservation law's `ϑ` and the angle of the
/// unforced orbit at `t = 0`: `θ(0) = ϑ + ψ + π/2`.
///
/// The averaged forcing term of `q·sin(Ωt + ψ)` is proportional to
/// `sin(θ − Ωt − ψ)`; writing it as `cos ϑ` rotates the phase by a quarter
/// turn.
pub const SLOW_PHASE_SHIFT: f64 = FRAC_PI_2;

/// Angle offset to pass to [`to_phase_plane`] when building initial
/// conditions for a simulation with forcing phase `psi`.
pub fn initial_angle_offset(psi: f64) -> f64 {
    psi + SLOW_PHASE_SHIFT
}

const PREFACTOR_J: f64 = 0.136_818_493_078_110_14; // 2√2 / (3^{1/4}·5π)

/// Forcing and truncation parameters of the escape problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Forcing amplitude `F ≥ 0`.
    pub forcing: f64,
    /// Forcing angular frequency `Ω > 0`.
    pub omega: f64,
    /// Forcing phase `ψ ∈ [0, 2π)`.
    pub psi: f64,
    /// Escape threshold in energy, `0 < ξ_max ≤ 1/6`.
    pub xi_max: f64,
}

impl SystemParams {
    pub fn new(forcing: f64, omega: f64, psi: f64, xi_max: f64) -> Result<Self> {
        let p = Self {
            forcing,
            omega,
            psi,
            xi_max,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.forcing.is_finite() || self.forcing < 0.0 {
            return Err(domain("SystemParams", format!("forcing {} must be ≥ 0", self.forcing)));
        }
        if !self.omega.is_finite() || self.omega <= 0.0 {
            return Err(domain("SystemParams", format!("omega {} must be > 0", self.omega)));
        }
        if !self.psi.is_finite() || !(0.0..TAU).contains(&self.psi) {
            return Err(domain("SystemParams", format!("psi {} outside [0, 2π)", self.psi)));
        }
        if !self.xi_max.is_finite() || self.xi_max <= 0.0 || self.xi_max > BARRIER {
            return Err(domain(
                "SystemParams",
                format!("xi_max {} outside (0, 1/6]", self.xi_max),
            ));
        }
        Ok(())
    }

    pub fn with_forcing(mut self, forcing: f64) -> Self {
        self.forcing = forcing;
        self
    }

    pub fn with_psi(mut self, psi: f64) -> Self {
        self.psi = psi;
        self
    }

    pub fn with_xi_max(mut self, xi_max: f64) -> Self {
        self.xi_max = xi_max;
        self
    }
}

/// Turning points and elliptic modulus of the unforced orbit at energy `ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellGeometry {
    pub xi: f64,
    pub z: f64,
    pub k: f64,
    /// Complementary modulus `k' = √(1 − k²)`, computed without cancellation.
    pub kp: f64,
    pub q_min: f64,
    pub q_max: f64,
    pub c: f64,
}

/// A point `(ϑ, ξ)` of the resonance-manifold cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CylinderPoint {
    pub theta: f64,
    pub xi: f64,
}

impl CylinderPoint {
    pub fn new(theta: f64, xi: f64) -> Self {
        Self { theta, xi }
    }
}

/// A point `(q, p)` of the physical phase plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub q: f64,
    pub p: f64,
}

impl PhasePoint {
    pub fn new(q: f64, p: f64) -> Self {
        Self { q, p }
    }
}

pub fn potential(q: f64) -> f64 {
    q * q * (0.5 - q / 3.0)
}

pub fn total_energy(pt: PhasePoint) -> f64 {
    0.5 * pt.p * pt.p + potential(pt.q)
}

fn check_open_energy(op: &'static str, xi: f64) -> Result<()> {
    if !xi.is_finite() || xi <= 0.0 || xi >= BARRIER {
        return Err(domain(op, format!("energy {xi} outside (0, 1/6)")));
    }
    Ok(())
}

/// Roots of `V(q) = ξ` and the modulus of the orbit.
pub fn well_geometry(xi: f64) -> Result<WellGeometry> {
    check_open_energy("well_geometry", xi)?;
    Ok(geometry_unchecked(xi))
}

fn geometry_unchecked(xi: f64) -> WellGeometry {
    let z = (1.0 - 12.0 * xi).acos() / 3.0;
    let s1 = z.sin();
    let s2 = (2.0 * FRAC_PI_3 - z).sin();
    let s3 = (FRAC_PI_3 - z).sin();
    // sin(2π/3 − z) − sin z = sin(π/3 − z)
    let k = (s1 / s2).sqrt();
    let kp = (s3 / s2).sqrt();
    WellGeometry {
        xi,
        z,
        k,
        kp,
        q_min: 0.5 - (z + FRAC_PI_6).sin(),
        q_max: 0.5 - (FRAC_PI_6 - z).sin(),
        c: z.cos() + 0.5,
    }
}

/// Everything the slow flow needs at one energy level.
#[derive(Debug, Clone, Copy)]
pub struct EnergyTerms {
    pub geometry: WellGeometry,
    pub big_k: f64,
    pub big_e: f64,
    pub nome: f64,
    /// Averaged action `J(ξ)`.
    pub action: f64,
    /// `J′(ξ) = T(ξ)/2π`.
    pub action_prime: f64,
    /// Coefficient `A(ξ)` of `F cos ϑ` in `C`.
    pub forcing_coeff: f64,
    /// `A′(ξ)`.
    pub forcing_coeff_prime: f64,
}

impl EnergyTerms {
    pub fn at(xi: f64) -> Result<Self> {
        check_open_energy("energy_terms", xi)?;
        Ok(Self::unchecked(xi))
    }

    fn unchecked(xi: f64) -> Self {
        let g = geometry_unchecked(xi);
        let z = g.z;
        let s2 = (2.0 * FRAC_PI_3 - z).sin();
        let s3 = (FRAC_PI_3 - z).sin();
        let (big_k, big_e) = complete_ke_from_complement(g.kp);
        let m = g.k * g.k;
        let mp = g.kp * g.kp;

        let action = PREFACTOR_J
            * s2.sqrt()
            * (1.5 * big_e - 3f64.sqrt() * s3 * z.cos() * big_k);
        let period = 2.0 * 6f64.sqrt() * big_k / (g.c - g.q_min).sqrt();
        let action_prime = period / TAU;

        // Q = exp(−x) with x = πK'/K; 1 − Q² evaluated as −expm1(−2x).
        let x = nome_exponent(g.k, g.kp);
        let nome = (-x).exp();
        let one_minus_q2 = -(-2.0 * x).exp_m1();
        let gq = nome / one_minus_q2;
        let c0 = PI * PI * 3f64.sqrt();
        // sin z / k² = sin(2π/3 − z)
        let forcing_coeff = c0 * s2 / (big_k * big_k) * gq;

        // derivative through z: dz/dξ = 4 / sin 3z, dm/dz = (√3/2)/s2²
        let dz_dxi = 4.0 / (3.0 * z).sin();
        let dm_dz = 0.5 * 3f64.sqrt() / (s2 * s2);
        let dk_dm = (big_e - mp * big_k) / (2.0 * m * mp);
        let dq_dm = PI * PI * nome / (4.0 * m * mp * big_k * big_k);
        let dg_dq = (1.0 + nome * nome) / (one_minus_q2 * one_minus_q2);
        let ds2_dz = -(2.0 * FRAC_PI_3 - z).cos();
        let da_dz = c0
            * (ds2_dz * gq / (big_k * big_k) - 2.0 * s2 * gq / big_k.powi(3) * dk_dm * dm_dz
                + s2 / (big_k * big_k) * dg_dq * dq_dm * dm_dz);
        let forcing_coeff_prime = da_dz * dz_dxi;

        Self {
            geometry: g,
            big_k,
            big_e,
            nome,
            action,
            action_prime,
            forcing_coeff,
            forcing_coeff_prime,
        }
    }

    /// `C(ϑ, ξ)` at this energy.
    #[inline]
    pub fn conservation(&self, theta: f64, params: &SystemParams) -> f64 {
        self.geometry.xi
            - params.forcing * self.forcing_coeff * theta.cos()
            - params.omega * self.action
    }

    /// `∂C/∂ξ` at this energy.
    #[inline]
    pub fn conservation_dxi(&self, theta: f64, params: &SystemParams) -> f64 {
        1.0 - params.forcing * self.forcing_coeff_prime * theta.cos()
            - params.omega * self.action_prime
    }
}

/// Averaged action `J(ξ) = (1/2π)∮p dq` on `[0, 1/6]`.
///
/// At the separatrix the `K`-term vanishes (its coefficient goes to zero
/// faster than `K` diverges) and `J(1/6) = 3/(5π)`.
pub fn action(xi: f64) -> Result<f64> {
    if !xi.is_finite() || !(0.0..=BARRIER).contains(&xi) {
        return Err(domain("action", format!("energy {xi} outside [0, 1/6]")));
    }
    if xi == 0.0 {
        return Ok(0.0);
    }
    if xi == BARRIER {
        return Ok(3.0 / (5.0 * PI));
    }
    Ok(EnergyTerms::unchecked(xi).action)
}

/// Period of the unforced orbit, `T = 2√6·K(k)/√(c − q_min)`.
pub fn period(xi: f64) -> Result<f64> {
    check_open_energy("period", xi)?;
    if xi > BARRIER - 1e-12 {
        return Err(domain("period", format!("energy {xi} too close to the separatrix")));
    }
    let g = geometry_unchecked(xi);
    let big_k = elliptic::complete_k_from_complement(g.kp)?;
    Ok(2.0 * 6f64.sqrt() * big_k / (g.c - g.q_min).sqrt())
}

/// `A(ξ)`, the coefficient of `F cos ϑ` in the conservation law.
pub fn forcing_coefficient(xi: f64) -> Result<f64> {
    Ok(EnergyTerms::at(xi)?.forcing_coeff)
}

/// The conserved slow-flow quantity `C(ϑ, ξ)`.
pub fn conservation(pt: CylinderPoint, params: &SystemParams) -> Result<f64> {
    if !pt.theta.is_finite() {
        return Err(domain("conservation", "non-finite slow phase"));
    }
    Ok(EnergyTerms::at(pt.xi)?.conservation(pt.theta, params))
}

/// `∂C/∂ξ`, closed form.
pub fn conservation_dxi(pt: CylinderPoint, params: &SystemParams) -> Result<f64> {
    Ok(EnergyTerms::at(pt.xi)?.conservation_dxi(pt.theta, params))
}

/// `∂C/∂ϑ = F·A(ξ)·sin ϑ`.
pub fn conservation_dtheta(pt: CylinderPoint, params: &SystemParams) -> Result<f64> {
    Ok(params.forcing * forcing_coefficient(pt.xi)? * pt.theta.sin())
}

/// Map `(ϑ, ξ)` to `(q, p)` along the unforced orbit of energy `ξ`.
///
/// The orbit angle used is `ϑ + angle_offset`; angle `0` is the left
/// turning point `q_min`, angle `π` the right one `q_max`.
pub fn to_phase_plane(pt: CylinderPoint, angle_offset: f64) -> Result<PhasePoint> {
    check_open_energy("to_phase_plane", pt.xi)?;
    if !pt.theta.is_finite() || !angle_offset.is_finite() {
        return Err(domain("to_phase_plane", "non-finite angle"));
    }
    let g = geometry_unchecked(pt.xi);
    let big_k = PI / (2.0 * elliptic::agm(1.0, g.kp));
    Ok(phase_point(&g, big_k, pt.theta + angle_offset))
}

#[inline]
pub(crate) fn phase_point(g: &WellGeometry, big_k: f64, angle: f64) -> PhasePoint {
    let e = jacobi_with_complement(angle * big_k / PI, g.k, g.kp);
    let width = g.q_max - g.q_min;
    PhasePoint {
        q: g.q_min + width * e.sn * e.sn,
        p: (2.0f64 / 3.0).sqrt() * (g.c - g.q_min).sqrt() * width * e.sn * e.cn * e.dn,
    }
}

/// Determinant of the Jacobian of `(ϑ, ξ) ↦ (q, p)`.
///
/// `(θ, J)` are canonical, so the determinant is `dJ/dξ = T/2π` and does
/// not depend on `ϑ`.
pub fn jacobian_det(pt: CylinderPoint) -> Result<f64> {
    if !pt.theta.is_finite() {
        return Err(domain("jacobian_det", "non-finite slow phase"));
    }
    Ok(period(pt.xi)? / TAU)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn potential_values() {
        assert_eq!(potential(0.0), 0.0);
        assert!((potential(1.0) - BARRIER).abs() < 1e-16);
        // left turning point of the separatrix orbit
        assert!((potential(-0.5) - BARRIER).abs() < 1e-16);
    }

    #[test]
    fn energy_values() {
        assert_eq!(total_energy(PhasePoint::new(0.0, 0.0)), 0.0);
        assert!((total_energy(PhasePoint::new(1.0, 0.0)) - BARRIER).abs() < 1e-16);
        let p = (1.0f64 / 3.0).sqrt();
        assert!((total_energy(PhasePoint::new(0.0, p)) - BARRIER).abs() < 1e-16);
    }

    #[test]
    fn geometry_limits() {
        let g = well_geometry(1e-12).unwrap();
        assert!(g.q_min.abs() < 1e-5 && g.q_max.abs() < 1e-5);
        assert!((g.c - 1.5).abs() < 1e-5);
        assert!(g.k < 1e-2);
        let g = well_geometry(BARRIER - 1e-14).unwrap();
        assert!((g.q_min + 0.5).abs() < 1e-6);
        assert!((g.q_max - 1.0).abs() < 1e-6 && (g.c - 1.0).abs() < 1e-6);
        assert!((g.z - FRAC_PI_3).abs() < 1e-6);
        assert!(g.k > 0.999);
        assert!(well_geometry(0.0).is_err());
        assert!(well_geometry(BARRIER).is_err());
    }

    #[test]
    fn turning_points_are_level_set() {
        for &xi in &[1e-4, 0.02, 0.1, 0.15, 0.166] {
            let g = well_geometry(xi).unwrap();
            for q in [g.q_min, g.q_max, g.c] {
                assert!((potential(q) - xi).abs() < 1e-12, "xi={xi} q={q}");
            }
            assert!(g.q_min < g.q_max && g.q_max <= g.c);
            assert!((g.k * g.k + g.kp * g.kp - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn action_endpoints() {
        assert_eq!(action(0.0).unwrap(), 0.0);
        assert!((action(BARRIER).unwrap() - 3.0 / (5.0 * PI)).abs() < 1e-15);
        assert!(action(-1e-3).is_err());
        assert!(action(0.2).is_err());
        // the closed form approaches the limit continuously
        assert!((action(BARRIER - 1e-12).unwrap() - 3.0 / (5.0 * PI)).abs() < 1e-9);
    }

    #[test]
    fn prefactor_constant() {
        let direct = 2.0 * 2f64.sqrt() / (3f64.powf(0.25) * 5.0 * PI);
        assert!((PREFACTOR_J - direct).abs() < 1e-17);
    }

    #[test]
    fn period_harmonic_limit() {
        assert!((period(1e-10).unwrap() - TAU).abs() < 1e-7);
        assert!(period(BARRIER - 1e-13).is_err());
    }

    #[test]
    fn conservation_without_forcing_is_flat() {
        let params = SystemParams::new(0.0, 0.89, 0.0, 0.1657).unwrap();
        for &th in &[0.0, 1.0, 2.5, 4.0] {
            let c = conservation(CylinderPoint::new(th, 0.1), &params).unwrap();
            assert!((c - (0.1 - 0.89 * action(0.1).unwrap())).abs() < 1e-16);
        }
    }

    #[test]
    fn conservation_is_even() {
        let params = SystemParams::new(0.013, 0.89, 0.0, 0.1657).unwrap();
        for &th in &[0.3, 1.7, 3.0] {
            let a = conservation(CylinderPoint::new(th, 0.07), &params).unwrap();
            let b = conservation(CylinderPoint::new(-th, 0.07), &params).unwrap();
            assert!((a - b).abs() < 1e-16);
        }
    }

    #[test]
    fn turning_points_of_the_map() {
        let xi = 0.12;
        let g = well_geometry(xi).unwrap();
        let a = to_phase_plane(CylinderPoint::new(0.0, xi), 0.0).unwrap();
        assert!((a.q - g.q_min).abs() < 1e-14 && a.p.abs() < 1e-14);
        let b = to_phase_plane(CylinderPoint::new(PI, xi), 0.0).unwrap();
        assert!((b.q - g.q_max).abs() < 1e-12 && b.p.abs() < 1e-12);
    }

    #[test]
    fn jacobian_is_theta_independent() {
        let a = jacobian_det(CylinderPoint::new(0.2, 0.08)).unwrap();
        let b = jacobian_det(CylinderPoint::new(5.1, 0.08)).unwrap();
        assert_eq!(a, b);
        assert!((jacobian_det(CylinderPoint::new(0.0, 1e-10)).unwrap() - 1.0).abs() < 1e-7);
    }

    #[test]
    fn params_validation() {
        assert!(SystemParams::new(0.01, 0.89, 0.0, 0.2).is_err());
        assert!(SystemParams::new(-0.01, 0.89, 0.0, 0.1).is_err());
        assert!(SystemParams::new(0.01, 0.0, 0.0, 0.1).is_err());
        assert!(SystemParams::new(0.01, 0.89, TAU, 0.1).is_err());
        assert!(SystemParams::new(0.01, 0.89, 0.0, BARRIER).is_ok());
    }
}
