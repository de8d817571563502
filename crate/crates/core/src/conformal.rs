//! Conformal transformations of `S^3`, their actions on functions and the
//! closed-form extremizers.
//!
//! A map is a word of generators applied left to right. Group generators act
//! through the Cayley transform, `τ = C ∘ σ ∘ C^{-1}`; rotations act on the
//! sphere directly.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::constants::InequalityParams;
use crate::grid::GridFunction;
use crate::harmonics::{SpectralFunction, SphereSpace};
use crate::heisenberg::{
    cayley, cayley_inverse, cayley_jacobian, dilate, group_multiply, GroupPoint, SpherePoint, Q,
};
use crate::{Error, Result};

/// Unitarity tolerance for rotation generators.
pub const UNITARY_TOL: f64 = 1e-12;

/// Guard keeping extremizer centres inside the open ball.
pub const XI_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Generator {
    /// `ζ ↦ Uζ` for a unitary `U` given row by row.
    Rotation { u: [[Complex64; 2]; 2] },
    /// Left translation `v ↦ u v` on the group.
    Translation { u: GroupPoint },
    /// `v ↦ δv` on the group.
    Dilation { delta: f64 },
}

impl Generator {
    fn validate(&self) -> Result<()> {
        match self {
            Generator::Rotation { u } => {
                for r in 0..2 {
                    for c in 0..2 {
                        let dot = u[r][0] * u[c][0].conj() + u[r][1] * u[c][1].conj();
                        let target = if r == c { 1.0 } else { 0.0 };
                        if (dot - target).norm() > UNITARY_TOL {
                            return Err(Error::InvalidParameter("rotation matrix is not unitary".into()));
                        }
                    }
                }
                Ok(())
            }
            Generator::Translation { u } => {
                if u.z.is_finite() && u.t.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter("translation must be finite".into()))
                }
            }
            Generator::Dilation { delta } => {
                if *delta > 0.0 && delta.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("dilation factor {delta} must be positive")))
                }
            }
        }
    }

    fn inverse(&self) -> Generator {
        match *self {
            Generator::Rotation { u } => Generator::Rotation {
                u: [[u[0][0].conj(), u[1][0].conj()], [u[0][1].conj(), u[1][1].conj()]],
            },
            Generator::Translation { u } => Generator::Translation { u: u.inverse() },
            Generator::Dilation { delta } => Generator::Dilation { delta: 1.0 / delta },
        }
    }

    /// Image of `ζ` and the Jacobian factor of this generator at `ζ`.
    fn apply(&self, zeta: SpherePoint, position: usize) -> Result<(SpherePoint, f64)> {
        match *self {
            Generator::Rotation { u } => {
                let z = &zeta.0;
                let w = [u[0][0] * z[0] + u[0][1] * z[1], u[1][0] * z[0] + u[1][1] * z[1]];
                Ok((SpherePoint::normalized(w[0], w[1])?, 1.0))
            }
            Generator::Translation { u } => {
                let v = cayley_inverse(zeta).map_err(|_| Error::PoleSingularity { position: Some(position) })?;
                let moved = group_multiply(u, v);
                Ok((cayley(moved), cayley_jacobian(moved) / cayley_jacobian(v)))
            }
            Generator::Dilation { delta } => {
                let v = cayley_inverse(zeta).map_err(|_| Error::PoleSingularity { position: Some(position) })?;
                let moved = dilate(v, delta)?;
                Ok((cayley(moved), delta.powf(Q) * cayley_jacobian(moved) / cayley_jacobian(v)))
            }
        }
    }
}

/// Composition word of generators, applied in order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConformalMap {
    word: Vec<Generator>,
}

/// Parameter ranges for random words.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WordRanges {
    pub delta_min: f64,
    pub delta_max: f64,
    /// Bound on the homogeneous norm of translations.
    pub translation_max: f64,
}

impl Default for WordRanges {
    fn default() -> Self {
        WordRanges { delta_min: 0.25, delta_max: 4.0, translation_max: 2.0 }
    }
}

impl WordRanges {
    /// Ranges whose transformed band-limited functions stay resolved at
    /// band 12 to the audit tolerance.
    pub fn audit() -> Self {
        WordRanges { delta_min: 0.8, delta_max: 1.25, translation_max: 0.25 }
    }
}

impl ConformalMap {
    pub fn identity() -> Self {
        ConformalMap { word: Vec::new() }
    }

    pub fn new(word: Vec<Generator>) -> Result<Self> {
        word.iter().try_for_each(Generator::validate)?;
        Ok(ConformalMap { word })
    }

    pub fn word(&self) -> &[Generator] {
        &self.word
    }

    /// `other ∘ self`: apply `self` first.
    pub fn then(&self, other: &ConformalMap) -> ConformalMap {
        let mut word = self.word.clone();
        word.extend_from_slice(&other.word);
        ConformalMap { word }
    }

    pub fn inverse(&self) -> ConformalMap {
        ConformalMap { word: self.word.iter().rev().map(Generator::inverse).collect() }
    }

    /// Image point and `|J_τ|` at `ζ`.
    pub fn apply_with_jacobian(&self, zeta: SpherePoint) -> Result<(SpherePoint, f64)> {
        let mut point = zeta;
        let mut jac = 1.0;
        for (pos, g) in self.word.iter().enumerate() {
            let (next, j) = g.apply(point, pos)?;
            point = next;
            jac *= j;
        }
        Ok((point, jac))
    }

    pub fn apply(&self, zeta: SpherePoint) -> Result<SpherePoint> {
        self.apply_with_jacobian(zeta).map(|r| r.0)
    }

    pub fn jacobian(&self, zeta: SpherePoint) -> Result<f64> {
        self.apply_with_jacobian(zeta).map(|r| r.1)
    }

    /// Random word of `len` generators drawn uniformly over the generator
    /// types and the given ranges.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, len: usize, ranges: &WordRanges) -> Self {
        let word = (0..len)
            .map(|_| match rng.random_range(0..3) {
                0 => Generator::Rotation { u: random_unitary(rng) },
                1 => {
                    let target = ranges.translation_max * rng.random::<f64>();
                    let z = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
                    let t: f64 = rng.sample(StandardNormal);
                    let u = GroupPoint::new(z, t);
                    let norm = crate::heisenberg::homogeneous_norm(u).max(1e-300);
                    let u = dilate(u, target / norm).unwrap_or(GroupPoint::IDENTITY);
                    Generator::Translation { u }
                }
                _ => {
                    let log = Uniform::new_inclusive(ranges.delta_min.ln(), ranges.delta_max.ln())
                        .map(|d| d.sample(rng))
                        .unwrap_or(0.0);
                    Generator::Dilation { delta: log.exp() }
                }
            })
            .collect();
        ConformalMap { word }
    }

    /// Mapped grid nodes and Jacobians.
    pub fn pushforward(&self, space: &SphereSpace) -> Result<(Vec<SpherePoint>, Vec<f64>)> {
        let mut points = Vec::with_capacity(space.grid().len());
        let mut jacs = Vec::with_capacity(space.grid().len());
        for p in space.grid().nodes() {
            let (q, j) = self.apply_with_jacobian(p)?;
            points.push(q);
            jacs.push(j);
        }
        Ok((points, jacs))
    }
}

fn random_unitary<R: Rng + ?Sized>(rng: &mut R) -> [[Complex64; 2]; 2] {
    let mut draw = || Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    let (a, b) = (draw(), draw());
    let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
    let (a, b) = (a / r, b / r);
    let phase = Complex64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU);
    [[a * phase, -b.conj() * phase], [b, a.conj()]]
}

/// `f(τζ) |J_τ(ζ)|^{exponent}` on the grid.
fn act_power(space: &SphereSpace, tau: &ConformalMap, f: &SpectralFunction, exponent: f64) -> Result<GridFunction> {
    let (points, jacs) = tau.pushforward(space)?;
    let vals = space.evaluate(f, &points)?;
    let values = vals.iter().zip(&jacs).map(|(v, j)| v * j.powf(exponent)).collect();
    let g = GridFunction::new(space.grid().clone(), values)?;
    Ok(if f.is_real() { g.real_part() } else { g })
}

/// Sobolev-side action `f ↦ f∘τ |J_τ|^{1/q}`.
pub fn act_q(space: &SphereSpace, tau: &ConformalMap, f: &SpectralFunction, params: &InequalityParams) -> Result<GridFunction> {
    act_power(space, tau, f, 1.0 / params.q())
}

/// HLS-side action `f ↦ f∘τ |J_τ|^{1/p}`.
pub fn act_p(space: &SphereSpace, tau: &ConformalMap, f: &SpectralFunction, params: &InequalityParams) -> Result<GridFunction> {
    act_power(space, tau, f, 1.0 / params.p())
}

/// Logarithmic action `f ↦ f∘τ + log|J_τ|`.
pub fn act_log(space: &SphereSpace, tau: &ConformalMap, f: &SpectralFunction) -> Result<GridFunction> {
    let (points, jacs) = tau.pushforward(space)?;
    let vals = space.evaluate(f, &points)?;
    let values = vals.iter().zip(&jacs).map(|(v, j)| Complex64::new(v.re + j.ln(), 0.0)).collect();
    GridFunction::new(space.grid().clone(), values).map(|g| g.real_part())
}

/// `(c, ξ)` chart of the extremizer manifolds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExtremizerPoint {
    pub c: f64,
    pub xi: [Complex64; 2],
}

impl ExtremizerPoint {
    pub fn new(c: f64, xi: [Complex64; 2]) -> Result<Self> {
        if c == 0.0 || !c.is_finite() {
            return Err(Error::InvalidParameter("extremizer scale c must be nonzero".into()));
        }
        let r = (xi[0].norm_sqr() + xi[1].norm_sqr()).sqrt();
        if !(r <= 1.0 - XI_GUARD) {
            return Err(Error::InvalidParameter(format!("|ξ| = {r} is not below 1 - {XI_GUARD:e}")));
        }
        Ok(ExtremizerPoint { c, xi })
    }

    pub fn xi_norm(&self) -> f64 {
        (self.xi[0].norm_sqr() + self.xi[1].norm_sqr()).sqrt()
    }

    /// `|1 - ξ·ζ̄|`.
    pub fn distance_factor(&self, zeta: &SpherePoint) -> f64 {
        (Complex64::new(1.0, 0.0) - self.xi[0] * zeta.z1().conj() - self.xi[1] * zeta.z2().conj()).norm()
    }
}

/// `c |1 - ξ·ζ̄|^{-exponent}` on the grid.
pub fn extremizer_with_exponent(space: &SphereSpace, point: &ExtremizerPoint, exponent: f64) -> GridFunction {
    GridFunction::from_real_fn(space.grid(), |z| point.c * point.distance_factor(z).powf(-exponent))
}

/// Member of `M_*`: `c |1 - ξ·ζ̄|^{-(Q-s)/2}`.
pub fn extremizer_fs(space: &SphereSpace, point: &ExtremizerPoint, params: &InequalityParams) -> GridFunction {
    extremizer_with_exponent(space, point, params.lambda() / 2.0)
}

/// Member of `M_{-*}`: `c |1 - ξ·ζ̄|^{-(Q+s)/2}`.
pub fn extremizer_hls(space: &SphereSpace, point: &ExtremizerPoint, params: &InequalityParams) -> GridFunction {
    extremizer_with_exponent(space, point, (params.homogeneous_dim() + params.s()) / 2.0)
}

/// BO extremizer `log c + Q log|1 - ξ·ζ̄|^{-1}`; needs `c > 0`.
pub fn extremizer_bo(space: &SphereSpace, point: &ExtremizerPoint) -> Result<GridFunction> {
    if point.c <= 0.0 {
        return Err(Error::DomainViolation("BO extremizers need c > 0".into()));
    }
    let lc = point.c.ln();
    Ok(GridFunction::from_real_fn(space.grid(), |z| lc - Q * point.distance_factor(z).ln()))
}

/// Largest relative violation of
/// `|1 - τζ·conj(τη)| = |1 - ζ·η̄| (|J_τ(ζ)| |J_τ(η)|)^{1/Q}` over the pairs.
pub fn kernel_covariance_defect(tau: &ConformalMap, pairs: &[(SpherePoint, SpherePoint)]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (z, e) in pairs {
        let (tz, jz) = tau.apply_with_jacobian(*z)?;
        let (te, je) = tau.apply_with_jacobian(*e)?;
        let lhs = (Complex64::new(1.0, 0.0) - tz.dot_conj(&te)).norm().sqrt();
        let rhs = (Complex64::new(1.0, 0.0) - z.dot_conj(e)).norm().sqrt() * (jz * je).powf(1.0 / (2.0 * Q));
        worst = worst.max((lhs - rhs).abs() / rhs.max(1e-300));
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_point<R: Rng>(rng: &mut R) -> SpherePoint {
        let mut d = || Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        SpherePoint::normalized(d(), d()).unwrap()
    }

    #[test]
    fn identity_and_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_point(&mut rng);
        let (q, j) = ConformalMap::identity().apply_with_jacobian(p).unwrap();
        assert_eq!(q, p);
        assert_eq!(j, 1.0);
        let rot = ConformalMap::new(vec![Generator::Rotation { u: random_unitary(&mut rng) }]).unwrap();
        assert_eq!(rot.jacobian(p).unwrap(), 1.0);
        let bad = [[Complex64::new(2.0, 0.0), Complex64::new(0.0, 0.0)], [Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)]];
        assert!(ConformalMap::new(vec![Generator::Rotation { u: bad }]).is_err());
    }

    #[test]
    fn dilation_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = ConformalMap::new(vec![Generator::Dilation { delta: 3.0 }, Generator::Dilation { delta: 1.0 / 3.0 }]).unwrap();
        for _ in 0..20 {
            let p = random_point(&mut rng);
            assert!(m.apply(p).unwrap().distance(&p) < 1e-10);
        }
    }

    #[test]
    fn word_inverse_and_cocycle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let t1 = ConformalMap::random(&mut rng, 4, &WordRanges::default());
            let t2 = ConformalMap::random(&mut rng, 3, &WordRanges::default());
            let p = random_point(&mut rng);
            let back = t1.then(&t1.inverse()).apply(p).unwrap();
            assert!(back.distance(&p) < 1e-9);
            let (q, j1) = t1.apply_with_jacobian(p).unwrap();
            let j2 = t2.jacobian(q).unwrap();
            let j12 = t1.then(&t2).jacobian(p).unwrap();
            assert!((j12 - j1 * j2).abs() < 1e-8 * j12);
        }
    }

    #[test]
    fn pole_hit_reports_position() {
        let rot = ConformalMap::new(vec![
            Generator::Dilation { delta: 2.0 },
            Generator::Translation { u: GroupPoint::IDENTITY },
        ])
        .unwrap();
        match rot.apply(SpherePoint::SOUTH) {
            Err(Error::PoleSingularity { position }) => assert_eq!(position, Some(0)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn extremizers_at_centre() {
        let space = SphereSpace::new(3).unwrap();
        let p = InequalityParams::new(1, 2.0).unwrap();
        let zero = [Complex64::new(0.0, 0.0); 2];
        let pt = ExtremizerPoint::new(2.5, zero).unwrap();
        let f = extremizer_fs(&space, &pt, &p);
        assert!(f.values().iter().all(|v| (v.re - 2.5).abs() < 1e-15));
        let h = extremizer_hls(&space, &pt, &p);
        assert!(h.values().iter().all(|v| (v.re - 2.5).abs() < 1e-15));
        let b = extremizer_bo(&space, &pt).unwrap();
        assert!(b.values().iter().all(|v| (v.re - 2.5f64.ln()).abs() < 1e-15));
        assert!(ExtremizerPoint::new(1.0, [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]).is_err());
        assert!(ExtremizerPoint::new(0.0, zero).is_err());
    }

    #[test]
    fn word_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let m = ConformalMap::random(&mut rng, 4, &WordRanges::default());
        let text = serde_json::to_string(&m).unwrap();
        let back: ConformalMap = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
    }
}
