//! Heisenberg group `H^1 = C × R`, the boundary Cayley transform onto the
//! three-sphere and the fundamental-solution kernels on both sides.
//!
//! The geometric layer works with `n = 1`: a group point carries a single
//! complex coordinate and a sphere point lives in `C^2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::InequalityParams;
use crate::{Error, Result};

/// Homogeneous dimension of `H^1`.
pub const Q: f64 = 4.0;

/// Round-trip tolerance for the Cayley transform and its inverse.
pub const CAYLEY_ROUND_TRIP_TOL: f64 = 1e-10;

/// Separation below which the kernels refuse to evaluate.
pub const DIAGONAL_GUARD: f64 = 1e-14;

/// Distance from the south pole `(0, -1)` below which the inverse Cayley
/// transform reports a pole hit.
pub const POLE_GUARD: f64 = 1e-12;

/// Tolerance on `| |ζ|² - 1 |` for a sphere point.
pub const UNIT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupPoint {
    pub z: Complex64,
    pub t: f64,
}

impl GroupPoint {
    pub const IDENTITY: GroupPoint = GroupPoint { z: Complex64::new(0.0, 0.0), t: 0.0 };

    pub fn new(z: Complex64, t: f64) -> Self {
        GroupPoint { z, t }
    }

    pub fn inverse(&self) -> Self {
        GroupPoint { z: -self.z, t: -self.t }
    }
}

/// Point of `S^3 ⊂ C^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpherePoint(pub [Complex64; 2]);

impl SpherePoint {
    pub const NORTH: SpherePoint = SpherePoint([Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]);
    pub const SOUTH: SpherePoint = SpherePoint([Complex64::new(0.0, 0.0), Complex64::new(-1.0, 0.0)]);

    pub fn new(z1: Complex64, z2: Complex64) -> Result<Self> {
        let r2 = z1.norm_sqr() + z2.norm_sqr();
        if !r2.is_finite() || (r2 - 1.0).abs() > UNIT_TOL {
            return Err(Error::DomainViolation(format!("|ζ|² = {r2} is not 1")));
        }
        Ok(SpherePoint([z1, z2]))
    }

    /// Projects a nonzero vector onto the sphere.
    pub fn normalized(z1: Complex64, z2: Complex64) -> Result<Self> {
        let r = (z1.norm_sqr() + z2.norm_sqr()).sqrt();
        if !(r.is_finite() && r > 0.0) {
            return Err(Error::DomainViolation("cannot normalize the zero vector".into()));
        }
        Ok(SpherePoint([z1 / r, z2 / r]))
    }

    /// Hopf coordinates: `ζ = (cos θ e^{iφ₁}, sin θ e^{iφ₂})`.
    pub fn from_hopf(theta: f64, phi1: f64, phi2: f64) -> Self {
        SpherePoint([
            Complex64::from_polar(theta.cos(), phi1),
            Complex64::from_polar(theta.sin(), phi2),
        ])
    }

    pub fn z1(&self) -> Complex64 {
        self.0[0]
    }

    pub fn z2(&self) -> Complex64 {
        self.0[1]
    }

    /// Hermitian pairing `ζ · η̄`.
    pub fn dot_conj(&self, other: &SpherePoint) -> Complex64 {
        self.0[0] * other.0[0].conj() + self.0[1] * other.0[1].conj()
    }

    pub fn distance(&self, other: &SpherePoint) -> f64 {
        ((self.0[0] - other.0[0]).norm_sqr() + (self.0[1] - other.0[1]).norm_sqr()).sqrt()
    }
}

/// `(z, t)(z', t') = (z + z', t + t' + 2 Im(z z̄'))`.
pub fn group_multiply(u: GroupPoint, v: GroupPoint) -> GroupPoint {
    GroupPoint {
        z: u.z + v.z,
        t: u.t + v.t + 2.0 * (u.z * v.z.conj()).im,
    }
}

/// `δ(z, t) = (δz, δ²t)`.
pub fn dilate(u: GroupPoint, delta: f64) -> Result<GroupPoint> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidParameter(format!("dilation factor {delta} must be positive")));
    }
    Ok(GroupPoint { z: u.z * delta, t: u.t * delta * delta })
}

/// `|u| = (|z|⁴ + t²)^{1/4}`.
pub fn homogeneous_norm(u: GroupPoint) -> f64 {
    let r2 = u.z.norm_sqr();
    (r2 * r2 + u.t * u.t).sqrt().sqrt()
}

/// `|v^{-1} u|`.
pub fn homogeneous_distance(u: GroupPoint, v: GroupPoint) -> f64 {
    homogeneous_norm(group_multiply(v.inverse(), u))
}

fn cayley_denominator(u: GroupPoint) -> Complex64 {
    Complex64::new(1.0 + u.z.norm_sqr(), -u.t)
}

/// `ζ = (2z/(1+|z|²-it), (1-|z|²+it)/(1+|z|²-it))`.
pub fn cayley(u: GroupPoint) -> SpherePoint {
    let d = cayley_denominator(u);
    let r2 = u.z.norm_sqr();
    SpherePoint([2.0 * u.z / d, Complex64::new(1.0 - r2, u.t) / d])
}

pub fn cayley_inverse(zeta: SpherePoint) -> Result<GroupPoint> {
    let w = Complex64::new(1.0, 0.0) + zeta.z2();
    if w.norm() <= POLE_GUARD {
        return Err(Error::PoleSingularity { position: None });
    }
    let d = 2.0 / w;
    Ok(GroupPoint { z: zeta.z1() / w, t: -d.im })
}

/// `|J_C|(u) = 2^{Q-1}((1+|z|²)² + t²)^{-Q/2}`.
pub fn cayley_jacobian(u: GroupPoint) -> f64 {
    let d2 = cayley_denominator(u).norm_sqr();
    2f64.powf(Q - 1.0) * d2.powf(-Q / 2.0)
}

/// The same Jacobian written on the sphere: `½|1 + ζ₂|^Q`.
pub fn cayley_jacobian_sphere(zeta: SpherePoint) -> f64 {
    0.5 * (Complex64::new(1.0, 0.0) + zeta.z2()).norm().powf(Q)
}

fn require_n1(params: &InequalityParams) -> Result<()> {
    if params.n() != 1 {
        return Err(Error::InvalidParameter(format!(
            "geometric kernels are implemented for n = 1 (got n = {})",
            params.n()
        )));
    }
    Ok(())
}

/// Constant in front of `|u|^{s-Q}` in `L_s^{-1}`.
pub fn kernel_group_constant(params: &InequalityParams) -> f64 {
    let n = f64::from(params.n());
    let qd = params.homogeneous_dim();
    let s = params.s();
    ((n - 1.0 - s / 2.0) * std::f64::consts::LN_2 + 2.0 * libm::lgamma((qd - s) / 4.0)
        - (n + 1.0) * PI.ln()
        - libm::lgamma(s / 2.0))
    .exp()
}

/// Constant in front of `|1 - ζ·η̄|^{(s-Q)/2}` in `A_s^{-1}`.
pub fn kernel_sphere_constant(params: &InequalityParams) -> f64 {
    let n = f64::from(params.n());
    let qd = params.homogeneous_dim();
    let s = params.s();
    ((-1.0 - s / qd) * std::f64::consts::LN_2 + 2.0 * libm::lgamma((qd - s) / 4.0)
        - (n + 1.0) * PI.ln()
        - libm::lgamma(s / 2.0))
    .exp()
}

/// Fundamental solution of `L_s` evaluated at `v^{-1}u`.
pub fn kernel_group(params: &InequalityParams, u: GroupPoint, v: GroupPoint) -> Result<f64> {
    require_n1(params)?;
    let r = homogeneous_distance(u, v);
    if r < DIAGONAL_GUARD {
        return Err(Error::SingularDiagonal { separation: r });
    }
    Ok(kernel_group_constant(params) * r.powf(params.s() - params.homogeneous_dim()))
}

/// Kernel of `A_s^{-1}` on the sphere.
pub fn kernel_sphere(params: &InequalityParams, zeta: SpherePoint, eta: SpherePoint) -> Result<f64> {
    require_n1(params)?;
    let sep = (Complex64::new(1.0, 0.0) - zeta.dot_conj(&eta)).norm();
    if sep < DIAGONAL_GUARD {
        return Err(Error::SingularDiagonal { separation: sep });
    }
    Ok(kernel_sphere_constant(params) * sep.powf((params.s() - params.homogeneous_dim()) / 2.0))
}

/// `|1 - C(u)·C(v)‾|^{1/2} / (|v^{-1}u| (|J_C(u)||J_C(v)|)^{1/(2Q)})`.
///
/// Constant in `u, v`; its measured value is `2^{-1/4}`.
pub fn cayley_distance_factor(u: GroupPoint, v: GroupPoint) -> Result<f64> {
    let r = homogeneous_distance(u, v);
    if r < DIAGONAL_GUARD {
        return Err(Error::SingularDiagonal { separation: r });
    }
    let zu = cayley(u);
    let zv = cayley(v);
    let chord = (Complex64::new(1.0, 0.0) - zu.dot_conj(&zv)).norm().sqrt();
    let jac = (cayley_jacobian(u) * cayley_jacobian(v)).powf(1.0 / (2.0 * Q));
    Ok(chord / (r * jac))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn group_law_examples() {
        let u = GroupPoint::new(c(1.0, 0.0), 0.0);
        let v = GroupPoint::new(c(0.0, 1.0), 0.0);
        let w = group_multiply(u, v);
        assert_eq!(w.z, c(1.0, 1.0));
        assert_eq!(w.t, -2.0);
        let p = GroupPoint::new(c(0.3, -1.2), 0.7);
        assert_eq!(group_multiply(GroupPoint::IDENTITY, p), p);
        let e = group_multiply(p, p.inverse());
        assert!(e.z.norm() < 1e-15 && e.t.abs() < 1e-15);
    }

    #[test]
    fn dilation_and_norm() {
        let u = GroupPoint::new(c(1.0, 0.0), 1.0);
        let d = dilate(u, 2.0).unwrap();
        assert_eq!(d, GroupPoint::new(c(2.0, 0.0), 4.0));
        assert_eq!(dilate(u, 1.0).unwrap(), u);
        assert!(dilate(u, 0.0).is_err());
        assert!((homogeneous_norm(GroupPoint::new(c(1.0, 0.0), 0.0)) - 1.0).abs() < 1e-15);
        assert!((homogeneous_norm(GroupPoint::new(c(0.0, 0.0), 4.0)) - 2.0).abs() < 1e-15);
        assert!((homogeneous_norm(u) - 2f64.powf(0.25)).abs() < 1e-15);
        assert!((homogeneous_norm(d) - 2.0 * homogeneous_norm(u)).abs() < 1e-14);
    }

    #[test]
    fn cayley_examples() {
        let north = cayley(GroupPoint::IDENTITY);
        assert!(north.distance(&SpherePoint::NORTH) < 1e-15);
        let u = GroupPoint::new(c(0.4, 0.3), -0.8);
        let far = cayley(dilate(u, 1e6).unwrap());
        assert!(far.distance(&SpherePoint::SOUTH) < 1e-5);
        let back = cayley_inverse(SpherePoint::NORTH).unwrap();
        assert!(back.z.norm() < 1e-15 && back.t.abs() < 1e-15);
        assert!(matches!(
            cayley_inverse(SpherePoint::SOUTH),
            Err(Error::PoleSingularity { .. })
        ));
    }

    #[test]
    fn jacobian_at_origin() {
        assert!((cayley_jacobian(GroupPoint::IDENTITY) - 8.0).abs() < 1e-14);
        assert!((cayley_jacobian_sphere(SpherePoint::NORTH) - 8.0).abs() < 1e-14);
    }

    #[test]
    fn kernel_constants() {
        let p = InequalityParams::new(1, 2.0).unwrap();
        // Agrees with the L^{-1} constant 2^{n-2}Γ²(n/2)/π^{n+1} at n = 1.
        let expected = 0.5 * PI / (PI * PI);
        assert!((kernel_group_constant(&p) - expected).abs() < 1e-15);
        let u = GroupPoint::new(c(1.0, 0.0), 0.0);
        let k = kernel_group(&p, u, GroupPoint::IDENTITY).unwrap();
        assert!((k - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!(matches!(
            kernel_group(&p, u, u),
            Err(Error::SingularDiagonal { .. })
        ));
        // D^{-1} constant Γ²(n/2)/(2π^{n+1}) times 2^{-2/Q}.
        let d_inv = PI / (2.0 * PI * PI) * 2f64.powf(-0.5);
        assert!((kernel_sphere_constant(&p) - d_inv).abs() < 1e-15);
    }

    #[test]
    fn kernel_sphere_antipodal_and_symmetric() {
        let p = InequalityParams::new(1, 2.0).unwrap();
        let z = SpherePoint::from_hopf(0.3, 0.2, -1.0);
        let w = SpherePoint([-z.z1(), -z.z2()]);
        let k = kernel_sphere(&p, z, w).unwrap();
        assert!((k - kernel_sphere_constant(&p) * 0.5).abs() < 1e-15);
        let e = SpherePoint::from_hopf(1.1, 2.0, 0.4);
        assert_eq!(kernel_sphere(&p, z, e).unwrap(), kernel_sphere(&p, e, z).unwrap());
        assert!(kernel_sphere(&p, z, z).is_err());
    }

    #[test]
    fn distance_factor_at_a_pair() {
        let u = GroupPoint::new(c(0.3, 0.1), 0.5);
        let v = GroupPoint::new(c(-1.0, 0.4), -0.2);
        let f = cayley_distance_factor(u, v).unwrap();
        assert!((f - 2f64.powf(-0.25)).abs() < 1e-13);
        assert!(cayley_distance_factor(u, u).is_err());
    }

    #[test]
    fn sphere_point_validation() {
        assert!(SpherePoint::new(c(1.0, 0.0), c(0.1, 0.0)).is_err());
        assert!(SpherePoint::new(c(0.6, 0.0), c(0.0, 0.8)).is_ok());
        assert!(SpherePoint::normalized(c(0.0, 0.0), c(0.0, 0.0)).is_err());
    }
}
