//! Closed-form scalar quantities: sharp constants, intertwining-operator
//! eigenvalues, exponents and the constants appearing in the stability and
//! dual-remainder estimates.
//!
//! Every gamma ratio goes through differences of `lgamma`, so eigenvalues
//! stay finite for bidegrees far beyond where `Γ` itself overflows.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Distance from the endpoints of `(0, Q)` below which `s` is rejected.
/// The endpoint operators have their own entry points.
pub const S_GUARD: f64 = 1e-6;

/// Exponent bookkeeping for one inequality: complex dimension `n`,
/// homogeneous dimension `Q = 2n + 2`, order `s` and the dual Lebesgue
/// exponents `q = 2Q/(Q - s)`, `p = 2Q/(Q + s)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct InequalityParams {
    n: u32,
    s: f64,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    n: u32,
    s: f64,
}

impl TryFrom<RawParams> for InequalityParams {
    type Error = Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        InequalityParams::new(raw.n, raw.s)
    }
}

impl From<InequalityParams> for RawParams {
    fn from(p: InequalityParams) -> Self {
        RawParams { n: p.n, s: p.s }
    }
}

impl InequalityParams {
    pub fn new(n: u32, s: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("complex dimension n must be >= 1".into()));
        }
        let q_dim = f64::from(2 * n + 2);
        if !s.is_finite() || s < S_GUARD || s > q_dim - S_GUARD {
            return Err(Error::InvalidParameter(format!(
                "order s = {s} outside ({S_GUARD}, Q - {S_GUARD}) with Q = {q_dim}"
            )));
        }
        Ok(InequalityParams { n, s })
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// Homogeneous dimension `Q = 2n + 2`.
    pub fn homogeneous_dim(&self) -> f64 {
        f64::from(2 * self.n + 2)
    }

    /// Sobolev exponent `q = 2Q/(Q - s)`.
    pub fn q(&self) -> f64 {
        let qd = self.homogeneous_dim();
        2.0 * qd / (qd - self.s)
    }

    /// Dual exponent `p = 2Q/(Q + s) = q'`.
    pub fn p(&self) -> f64 {
        let qd = self.homogeneous_dim();
        2.0 * qd / (qd + self.s)
    }

    /// `λ = Q - s`, the HLS kernel order.
    pub fn lambda(&self) -> f64 {
        self.homogeneous_dim() - self.s
    }
}

/// Bidegree `(j, k)` of the bispherical harmonic space `H_{j,k}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ModeIndex {
    pub j: u32,
    pub k: u32,
}

impl ModeIndex {
    pub const fn new(j: u32, k: u32) -> Self {
        ModeIndex { j, k }
    }

    pub fn degree(&self) -> u32 {
        self.j + self.k
    }

    pub fn conjugate(&self) -> Self {
        ModeIndex { j: self.k, k: self.j }
    }

    /// CR-pluriharmonic modes: `(j, 0)` and `(0, k)`.
    pub fn is_pluriharmonic(&self) -> bool {
        self.j == 0 || self.k == 0
    }
}

fn lgamma(x: f64) -> f64 {
    libm::lgamma(x)
}

/// `Γ(a) / Γ(b)` for positive arguments.
pub fn gamma_ratio(a: f64, b: f64) -> f64 {
    (lgamma(a) - lgamma(b)).exp()
}

/// Sharp constant `C = (4π^{Q/2}/n!)^{s/Q} Γ²((Q+s)/4) / Γ²((Q-s)/4)`.
pub fn sharp_constant(params: &InequalityParams) -> f64 {
    let qd = params.homogeneous_dim();
    let s = params.s();
    let log_base = (4.0f64).ln() + 0.5 * qd * PI.ln() - lgamma(f64::from(params.n()) + 1.0);
    let log_gamma = 2.0 * (lgamma((qd + s) / 4.0) - lgamma((qd - s) / 4.0));
    (s / qd * log_base + log_gamma).exp()
}

/// Eigenvalue of the intertwining operator `A_s` on `H_{j,k}`.
pub fn eigenvalue(params: &InequalityParams, mode: ModeIndex) -> f64 {
    let qd = params.homogeneous_dim();
    let s = params.s();
    let prefactor = (s / qd) * std::f64::consts::LN_2;
    (prefactor + log_modified_eigenvalue(params, mode)).exp()
}

/// Eigenvalue without the `2^{s/Q}` prefactor; the normalization used when
/// `A_s` is differentiated at the endpoint `s = Q`.
pub fn modified_eigenvalue(params: &InequalityParams, mode: ModeIndex) -> f64 {
    log_modified_eigenvalue(params, mode).exp()
}

fn log_modified_eigenvalue(params: &InequalityParams, mode: ModeIndex) -> f64 {
    let qd = params.homogeneous_dim();
    let s = params.s();
    let up = (qd + s) / 4.0;
    let down = (qd - s) / 4.0;
    let (j, k) = (f64::from(mode.j), f64::from(mode.k));
    lgamma(j + up) + lgamma(k + up) - lgamma(j + down) - lgamma(k + down)
}

/// Ratio `Γ²((Q+s)/4) / Γ²((Q-s)/4)`: the sharp constant in the mean-integral
/// normalization paired with [`modified_eigenvalue`].
pub fn modified_sharp_constant(params: &InequalityParams) -> f64 {
    let qd = params.homogeneous_dim();
    let s = params.s();
    (2.0 * (lgamma((qd + s) / 4.0) - lgamma((qd - s) / 4.0))).exp()
}

/// Eigenvalue `Γ(j+n+1)/Γ(j) = j(j+1)...(j+n)` of the endpoint operator
/// `A'_Q` on `H_{j,0}` and `H_{0,j}`.
pub fn eigenvalue_limit(n: u32, j: u32) -> Result<f64> {
    if j == 0 {
        return Err(Error::InvalidParameter("A'_Q eigenvalues are indexed by j >= 1".into()));
    }
    let j = f64::from(j);
    Ok((lgamma(j + f64::from(n) + 1.0) - lgamma(j)).exp())
}

/// Surface measure `|S^{2n+1}| = 2π^{n+1}/n!`.
pub fn sphere_measure(n: u32) -> f64 {
    let n = f64::from(n);
    (std::f64::consts::LN_2 + (n + 1.0) * PI.ln() - lgamma(n + 1.0)).exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremConstants {
    /// Local FS stability constant `2s/(Q+4+s)`.
    pub fs_local: f64,
    /// Local limit of the dual remainder ratio, `(Q+4+s)/(Q+4-s) · C`.
    pub dual_ratio: f64,
    /// Lower bound `n + 2` of the BO / Log-HLS local ratio.
    pub bo_ratio: f64,
    /// `1 - λ_{1,0}/λ_{2,0}`.
    pub spectral_gap: f64,
}

pub fn theorem_constants(params: &InequalityParams) -> TheoremConstants {
    let qd = params.homogeneous_dim();
    let s = params.s();
    let c = sharp_constant(params);
    let lam10 = eigenvalue(params, ModeIndex::new(1, 0));
    let lam20 = eigenvalue(params, ModeIndex::new(2, 0));
    TheoremConstants {
        fs_local: 2.0 * s / (qd + 4.0 + s),
        dual_ratio: (qd + 4.0 + s) / (qd + 4.0 - s) * c,
        bo_ratio: f64::from(params.n()) + 2.0,
        spectral_gap: 1.0 - lam10 / lam20,
    }
}

/// Dual-ratio constant `(Q+2+2 sign m + s)/(Q+2+2 sign m - s)` for an
/// Iwasawa-type group with center of dimension `m`.
///
/// Accepts `m ∈ {0, 1, 3, 7}` and the partial range `0 < s < Q - 4⌊m/2⌋`.
pub fn iwasawa_dual_ratio(q_dim: u32, s: f64, m: u32) -> Result<f64> {
    if ![0, 1, 3, 7].contains(&m) {
        return Err(Error::InvalidParameter(format!("center dimension m = {m} is not 0, 1, 3 or 7")));
    }
    let upper = f64::from(q_dim) - 4.0 * f64::from(m / 2);
    if !(s > 0.0 && s < upper) {
        return Err(Error::InvalidParameter(format!(
            "s = {s} outside the admissible range (0, {upper}) for m = {m}"
        )));
    }
    let shift = f64::from(q_dim) + 2.0 + if m > 0 { 2.0 } else { 0.0 };
    Ok((shift + s) / (shift - s))
}

/// `dim H_{j,k}`; only `n = 1` is supported, where it equals `j + k + 1`.
pub fn subspace_dimension(n: u32, mode: ModeIndex) -> Result<usize> {
    if n != 1 {
        return Err(Error::InvalidParameter(format!(
            "subspace dimensions are only tabulated for n = 1 (got n = {n})"
        )));
    }
    Ok((mode.j + mode.k + 1) as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(n: u32, s: f64) -> InequalityParams {
        InequalityParams::new(n, s).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn exponent_bookkeeping() {
        for s in [0.5, 1.0, 2.0, 3.5] {
            let p = params(1, s);
            assert!(p.q() > 2.0);
            assert!(p.p() > 1.0 && p.p() < 2.0);
            assert!((1.0 / p.p() + 1.0 / p.q() - 1.0).abs() < 1e-14);
            assert!((p.q() - 2.0 - 2.0 * s / (4.0 - s)).abs() < 1e-13);
            let r = p.q() - 2.0;
            assert!((p.p() * (r + p.q()) / p.q() - 2.0).abs() < 1e-13);
        }
    }

    #[test]
    fn rejects_orders_at_the_endpoints() {
        assert!(InequalityParams::new(1, 0.0).is_err());
        assert!(InequalityParams::new(1, 5e-7).is_err());
        assert!(InequalityParams::new(1, 4.0 - 5e-7).is_err());
        assert!(InequalityParams::new(1, 4.5).is_err());
        assert!(InequalityParams::new(0, 1.0).is_err());
        assert!(InequalityParams::new(1, f64::NAN).is_err());
    }

    #[test]
    fn sharp_constant_at_s2_is_half_pi() {
        assert!(rel(sharp_constant(&params(1, 2.0)), PI / 2.0) < 1e-14);
    }

    #[test]
    fn sharp_constant_tends_to_one_as_s_vanishes() {
        assert!((sharp_constant(&params(1, S_GUARD)) - 1.0).abs() < 1e-5);
    }

    #[test]
    fn eigenvalues_at_s2() {
        let p = params(1, 2.0);
        let r2 = std::f64::consts::SQRT_2;
        assert!(rel(eigenvalue(&p, ModeIndex::new(0, 0)), r2 / 4.0) < 1e-14);
        assert!(rel(eigenvalue(&p, ModeIndex::new(1, 0)), 3.0 * r2 / 4.0) < 1e-14);
        assert!(rel(eigenvalue(&p, ModeIndex::new(1, 1)), 9.0 * r2 / 4.0) < 1e-14);
    }

    #[test]
    fn eigenvalues_stay_finite_for_large_bidegree() {
        let p = params(1, 3.0);
        let v = eigenvalue(&p, ModeIndex::new(200, 180));
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn endpoint_eigenvalues() {
        assert!(rel(eigenvalue_limit(1, 1).unwrap(), 2.0) < 1e-14);
        assert!(rel(eigenvalue_limit(1, 2).unwrap(), 6.0) < 1e-14);
        assert!(rel(eigenvalue_limit(2, 2).unwrap(), 24.0) < 1e-14);
        assert!(eigenvalue_limit(1, 0).is_err());
    }

    #[test]
    fn modified_eigenvalue_drops_the_prefactor() {
        let p = params(1, 2.0);
        assert!(rel(modified_eigenvalue(&p, ModeIndex::new(0, 0)), 0.25) < 1e-14);
        let p = params(1, 1.3);
        for mode in [ModeIndex::new(0, 0), ModeIndex::new(3, 1), ModeIndex::new(2, 5)] {
            let lhs = modified_eigenvalue(&p, mode) * 2f64.powf(1.3 / 4.0);
            assert!(rel(lhs, eigenvalue(&p, mode)) < 1e-14);
        }
    }

    #[test]
    fn endpoint_operator_is_the_derivative_limit() {
        let p = params(1, 3.999);
        let approx = 4.0 * modified_eigenvalue(&p, ModeIndex::new(2, 0)) / p.lambda();
        assert!(rel(approx, 6.0) < 0.01);
    }

    #[test]
    fn sphere_measures() {
        assert!(rel(sphere_measure(1), 2.0 * PI * PI) < 1e-14);
        assert!(rel(sphere_measure(2), PI.powi(3)) < 1e-14);
    }

    #[test]
    fn theorem_constants_at_s2() {
        let t = theorem_constants(&params(1, 2.0));
        assert!((t.fs_local - 0.4).abs() < 1e-15);
        assert!(rel(t.dual_ratio, 5.0 * PI / 6.0) < 1e-14);
        assert!((t.spectral_gap - 0.4).abs() < 1e-13);
        assert_eq!(t.bo_ratio, 3.0);
    }

    #[test]
    fn iwasawa_constants() {
        assert!(rel(iwasawa_dual_ratio(4, 2.0, 1).unwrap(), 10.0 / 6.0) < 1e-15);
        assert!(rel(iwasawa_dual_ratio(10, 1.0, 3).unwrap(), 15.0 / 13.0) < 1e-15);
        // Euclidean case: Q = n.
        let n = 5;
        let s = 1.5;
        let expected = (f64::from(n) + 2.0 + s) / (f64::from(n) + 2.0 - s);
        assert!(rel(iwasawa_dual_ratio(n, s, 0).unwrap(), expected) < 1e-15);
        // 0 < s < Q - 4⌊m/2⌋
        assert!(iwasawa_dual_ratio(10, 6.5, 3).is_err());
        assert!(iwasawa_dual_ratio(10, 5.5, 3).is_ok());
        assert!(iwasawa_dual_ratio(22, 10.0, 7).is_err());
        assert!(iwasawa_dual_ratio(4, 1.0, 2).is_err());
    }

    #[test]
    fn subspace_dimensions() {
        assert_eq!(subspace_dimension(1, ModeIndex::new(0, 0)).unwrap(), 1);
        assert_eq!(subspace_dimension(1, ModeIndex::new(2, 0)).unwrap(), 3);
        assert_eq!(subspace_dimension(1, ModeIndex::new(1, 1)).unwrap(), 3);
        assert!(subspace_dimension(2, ModeIndex::new(1, 1)).is_err());
    }

    #[test]
    fn params_round_trip_through_json() {
        let p = params(1, 2.5);
        let text = serde_json::to_string(&p).unwrap();
        let back: InequalityParams = serde_json::from_str(&text).unwrap();
        assert_eq!(p, back);
        assert!(serde_json::from_str::<InequalityParams>(r#"{"n":1,"s":4.0}"#).is_err());
    }
}
