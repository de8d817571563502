//! Deficit functionals of the sharp inequalities on `S³` and the identities
//! relating them.
//!
//! Inputs are [`SphereFunction`]s: nonlinear terms are taken from the grid
//! samples, quadratic forms from the coefficients of the same function.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::constants::{modified_eigenvalue, modified_sharp_constant, sharp_constant, InequalityParams};
use crate::grid::{GridFunction, POSITIVITY_FLOOR};
use crate::harmonics::{
    a_prime_inverse_form, a_s, bo_form, negative_norm_sq, sobolev_norm_sq, SpectralFunction, SphereFunction,
    SphereSpace,
};
use crate::heisenberg::Q;
use crate::{Error, Result};

const S3: f64 = 2.0 * PI * PI;

/// Fraction of nodes allowed to hit the positivity floor in `f^{q/p}`.
pub const MAX_FLOORED_FRACTION: f64 = 1e-3;

/// Remainders below this are treated as zero when forming ratios.
pub const DEGENERATE_DENOMINATOR: f64 = 1e-12;

/// `|∮f|` allowed by the mean-zero and normalization checks.
pub const MEAN_TOL: f64 = 1e-10;

fn require_real(f: &SphereFunction, what: &str) -> Result<()> {
    if !f.is_real() {
        return Err(Error::PreconditionViolation(format!("{what} needs a real-valued function")));
    }
    Ok(())
}

/// `‖f‖_*² - C |f|_q²`.
pub fn fs_deficit(f: &SphereFunction, params: &InequalityParams) -> Result<f64> {
    require_real(f, "fs_deficit")?;
    let lq = f.grid.lp_norm(params.q())?;
    Ok(sobolev_norm_sq(&f.spectral, params) - sharp_constant(params) * lq * lq)
}

/// HLS deficit in absolute and scale-free form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HlsDeficit {
    /// `C^{-1} |f|_p² - ‖f‖_{-*}²`
    pub absolute: f64,
    /// `C^{-1} - ‖f‖_{-*}² / |f|_p²`
    pub normalized: f64,
}

pub fn hls_deficit(f: &SphereFunction, params: &InequalityParams) -> Result<HlsDeficit> {
    require_real(f, "hls_deficit")?;
    let lp = f.grid.lp_norm(params.p())?;
    if lp == 0.0 {
        return Err(Error::ZeroFunction);
    }
    let c_inv = 1.0 / sharp_constant(params);
    let neg = negative_norm_sq(&f.spectral, params);
    Ok(HlsDeficit { absolute: c_inv * lp * lp - neg, normalized: c_inv - neg / (lp * lp) })
}

/// The two sides of the dual remainder inequality for a nonnegative `f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualRemainderPair {
    /// `|f|_q^{2(q-2)} (‖f‖_*² - C|f|_q²)`
    pub i1: f64,
    /// `|g|_p² - C‖g‖_{-*}²` with `g = f^{q/p}`
    pub i2: f64,
    /// `i1 / i2`, absent when `i2` is degenerate.
    pub ratio: Option<f64>,
    /// `‖ |f|_q^{q-2} A^{1/2} f - C A^{-1/2} g ‖₂²`
    pub residual_sq: f64,
    /// Largest of the terms cancelling in `i1 - C i2`.
    pub scale: f64,
}

impl DualRemainderPair {
    pub fn ratio(&self) -> Result<f64> {
        self.ratio.ok_or(Error::DegenerateDenominator { value: self.i2 })
    }

    /// `i1 - C i2` for the sharp constant `c`.
    pub fn gap(&self, c: f64) -> f64 {
        self.i1 - c * self.i2
    }
}

/// Nodewise `f^e` with the positivity floor.
fn floored_power(f: &GridFunction, exponent: f64) -> Result<GridFunction> {
    let vals = f.real_values();
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -POSITIVITY_FLOOR {
        return Err(Error::NegativeFunction { min });
    }
    let floored = vals.iter().filter(|&&v| v < POSITIVITY_FLOOR).count();
    if floored as f64 > MAX_FLOORED_FRACTION * vals.len() as f64 {
        return Err(Error::PreconditionViolation(format!(
            "{floored} of {} nodes below the positivity floor",
            vals.len()
        )));
    }
    let powered = vals.iter().map(|&v| v.max(POSITIVITY_FLOOR).powf(exponent)).collect();
    GridFunction::from_real(f.grid().clone(), powered)
}

pub fn dual_remainder_pair(space: &SphereSpace, f: &SphereFunction, params: &InequalityParams) -> Result<DualRemainderPair> {
    require_real(f, "dual_remainder_pair")?;
    let (q, p) = (params.q(), params.p());
    let c = sharp_constant(params);
    let r = q - 2.0;

    let g = floored_power(&f.grid, q / p)?;
    let g_hat = space.analyze(&g)?;
    let lq = f.grid.lp_norm(q)?;
    let lp_g = g.lp_norm(p)?;

    let star = sobolev_norm_sq(&f.spectral, params);
    let g_neg = negative_norm_sq(&g_hat, params);
    let weight = lq.powf(2.0 * r);
    let i1 = weight * (star - c * lq * lq);
    let i2 = lp_g * lp_g - c * g_neg;

    let lam = a_s(params);
    let a = lq.powf(r);
    let h = f.spectral.apply_multiplier(|m| a * lam(m).sqrt())?.sub(&g_hat.apply_multiplier(|m| c / lam(m).sqrt())?)?;
    let residual_sq = h.norm_sq();

    let scale = (weight * star).max(c * lp_g * lp_g).max(c * c * g_neg);
    let ratio = (i2 > DEGENERATE_DENOMINATOR).then(|| i1 / i2);
    Ok(DualRemainderPair { i1, i2, ratio, residual_sq, scale })
}

/// Both sides of the completion-of-squares identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SquareIdentity {
    pub residual_sq: f64,
    /// `i1 - C i2`
    pub difference: f64,
    pub scale: f64,
}

impl SquareIdentity {
    /// `|residual_sq - (i1 - C i2)|` relative to the cancelling terms.
    pub fn relative_gap(&self) -> f64 {
        (self.residual_sq - self.difference).abs() / self.scale.max(f64::MIN_POSITIVE)
    }
}

pub fn square_identity(space: &SphereSpace, f: &SphereFunction, params: &InequalityParams) -> Result<SquareIdentity> {
    let pair = dual_remainder_pair(space, f, params)?;
    Ok(SquareIdentity {
        residual_sq: pair.residual_sq,
        difference: pair.gap(sharp_constant(params)),
        scale: pair.scale,
    })
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// `(1/(2(n+1)!)) ∮ f A' f - log ∮ e^{f - ∮f}` for `n = 1`.
pub fn bo_deficit(f: &SphereFunction) -> Result<f64> {
    require_real(f, "bo_deficit")?;
    let quad = bo_form(&f.spectral)?;
    let mean = f.grid.mean_integral().re;
    let e = f.grid.add_constant(-mean).exp().mean_integral().re;
    Ok(quad / (2.0 * factorial(2)) - e.ln())
}

/// Right-hand side of the global BO estimate:
/// `∮e^f f / ∮e^f - ((n+1)!/(2(∮e^f)²)) ∮(e^f - ∮e^f) A'^{-1} P (e^f - ∮e^f) - log ∮e^f`.
pub fn bo_dual_rhs(space: &SphereSpace, f: &SphereFunction) -> Result<f64> {
    require_real(f, "bo_dual_rhs")?;
    bo_form(&f.spectral)?;
    let e = f.grid.exp();
    let m = e.mean_integral().re;
    let first = e.multiply(&f.grid)?.mean_integral().re / m;
    let e_hat = space.analyze(&e)?;
    let second = factorial(2) / (2.0 * m * m) * a_prime_inverse_form(&e_hat);
    Ok(first - second - m.ln())
}

fn require_density(f: &SphereFunction) -> Result<()> {
    require_real(f, "log-HLS")?;
    let min = f.grid.min_real();
    if !(min > 0.0) {
        return Err(Error::DomainViolation(format!("log-HLS needs f > 0 (min {min:e})")));
    }
    let mean = f.grid.mean_integral().re;
    if (mean - 1.0).abs() > MEAN_TOL {
        return Err(Error::NotNormalized { mean });
    }
    Ok(())
}

/// `∮ f log f - ((n+1)!/2) ∮ (f-1) A'^{-1} P (f-1)`.
pub fn loghls_deficit(f: &SphereFunction) -> Result<f64> {
    require_density(f)?;
    let entropy = f.grid.multiply(&f.grid.log()?)?.mean_integral().re;
    let quad = a_prime_inverse_form(&f.spectral);
    Ok(entropy - factorial(2) / 2.0 * quad)
}

/// `(n+1) ∮∮ log(1/|1 - ζ·η̄|) f(ζ) f(η)` by double quadrature over
/// off-diagonal node pairs.
///
/// Since the kernel has zero mean in each variable the integral equals
/// `-((n+1)/2) ∮∮ log(1/|1 - ζ·η̄|) (f(ζ) - f(η))²`, whose integrand
/// vanishes on the diagonal; that form is summed.
pub fn loghls_double_integral(f: &SphereFunction) -> Result<f64> {
    require_density(f)?;
    let grid = f.grid.grid();
    let n = grid.len();
    let coords: Vec<[f64; 4]> = grid.nodes().map(|z| [z.0[0].re, z.0[0].im, z.0[1].re, z.0[1].im]).collect();
    let w = grid.weights();
    let vals = f.grid.real_values();
    let mut total = 0.0;
    for i in 0..n {
        let a = coords[i];
        let mut row = 0.0;
        for j in (i + 1)..n {
            let b = coords[j];
            // 1 - ζ·η̄
            let re = 1.0 - (a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]);
            let im = -(a[1] * b[0] - a[0] * b[1] + a[3] * b[2] - a[2] * b[3]);
            let d2 = re * re + im * im;
            if d2 <= 1e-28 {
                continue;
            }
            let df = vals[i] - vals[j];
            row += w[j] * d2.ln() * df * df;
        }
        total += w[i] * row;
    }
    // (n+1)/2 · 2 (pairs i<j) · (1/2 from log|·|²) / |S|²
    Ok(2.0 * 0.5 * total / (S3 * S3))
}

/// Truncation constants of the Christ-type bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChristConstants {
    pub c0: f64,
    pub c1: f64,
    pub eta0: f64,
    pub gamma: f64,
}

impl Default for ChristConstants {
    fn default() -> Self {
        ChristConstants { c0: 1.0, c1: 1.0, eta0: 0.1, gamma: 1.5 }
    }
}

fn christ_phi_unchecked(space: &SphereSpace, f: &GridFunction, params: &InequalityParams) -> Result<f64> {
    let spec = space.analyze(f)?;
    let lambda00 = a_s(params)(crate::constants::ModeIndex::new(0, 0));
    let l2 = f.lp_norm(2.0)?;
    Ok(0.5 * lambda00 / S3 * negative_norm_sq(&spec, params) - 0.5 * (params.p() - 1.0) / S3 * l2 * l2)
}

fn require_mean_zero(f: &SphereFunction) -> Result<()> {
    require_real(f, "christ functional")?;
    let mean = f.grid.mean_integral().re;
    if mean.abs() > MEAN_TOL * f.grid.max_abs().max(1.0) {
        return Err(Error::PreconditionViolation(format!("christ functional needs ∮f = 0 (got {mean:e})")));
    }
    Ok(())
}

/// Second-variation functional with `T = A_s^{-1/2}`, `F = 1`, exponent 2:
/// `½ |T1|₂^{-2} ∫(Tf)² - ((p-1)/2) |1|_p^{-p} ∫f²`.
pub fn christ_phi(space: &SphereSpace, f: &SphereFunction, params: &InequalityParams) -> Result<f64> {
    require_mean_zero(f)?;
    christ_phi_unchecked(space, &f.grid, params)
}

/// Pieces of the truncated bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChristBound {
    pub value: f64,
    pub phi_f1: f64,
    pub f1_p: f64,
    pub f2_p: f64,
}

/// `1 + φ(f₁) + c₁ η |f₁|_p² |1|_p^{-2} - c₀ η^{2-p} |f₂|_p^p |1|_p^{-p}` with
/// `f₁ = f·1_{|f| ≤ η}`. Needs `|f|_p / |1|_p < η^γ`.
pub fn christ_bound(
    space: &SphereSpace,
    f: &SphereFunction,
    eta: f64,
    constants: &ChristConstants,
    params: &InequalityParams,
) -> Result<ChristBound> {
    require_mean_zero(f)?;
    if !(eta > 0.0) {
        return Err(Error::InvalidParameter(format!("truncation level must be positive (got {eta})")));
    }
    let p = params.p();
    let one_p = S3.powf(1.0 / p);
    let delta = f.grid.lp_norm(p)? / one_p;
    if delta > 0.0 && delta >= eta.powf(constants.gamma) {
        return Err(Error::PreconditionViolation(format!(
            "|f|_p/|1|_p = {delta:e} is not below η^γ = {:e}",
            eta.powf(constants.gamma)
        )));
    }
    let vals = f.grid.real_values();
    let f1: Vec<f64> = vals.iter().map(|&v| if v.abs() <= eta { v } else { 0.0 }).collect();
    let f2: Vec<f64> = vals.iter().zip(&f1).map(|(v, w)| v - w).collect();
    let f1 = GridFunction::from_real(f.grid.grid().clone(), f1)?;
    let f2 = GridFunction::from_real(f.grid.grid().clone(), f2)?;
    let phi_f1 = christ_phi_unchecked(space, &f1, params)?;
    let f1_p = f1.lp_norm(p)?;
    let f2_p = f2.lp_norm(p)?;
    let value = 1.0 + phi_f1 + constants.c1 * eta * (f1_p / one_p).powi(2)
        - constants.c0 * eta.powf(2.0 - p) * (f2_p / one_p).powf(p);
    Ok(ChristBound { value, phi_f1, f1_p, f2_p })
}

/// FS functional in mean-integral normalization with the modified
/// eigenvalues: `∮ g A g - C' (∮|g|^q)^{2/q}`.
pub fn modified_fs_functional(g: &SphereFunction, params: &InequalityParams) -> Result<f64> {
    require_real(g, "modified FS functional")?;
    let quad = crate::harmonics::modes(g.spectral.band_limit())
        .map(|m| modified_eigenvalue(params, m) * g.spectral.block_energy(m))
        .sum::<f64>()
        / S3;
    let q = params.q();
    let mean_q = g.grid.abs_power(q).mean_integral().re;
    Ok(quad - modified_sharp_constant(params) * mean_q.powf(2.0 / q))
}

/// `Q (4/n!)² I(1 + λf/(2Q)) / λ³` at `s = Q - λ`; tends to the BO
/// deficit of `f` as `λ → 0`.
pub fn bo_bridge_quotient(f: &SphereFunction, lambda: f64) -> Result<f64> {
    let params = InequalityParams::new(1, Q - lambda)?;
    let a = lambda / (2.0 * Q);
    let band = f.spectral.band_limit();
    let spectral = SpectralFunction::constant(band, 1.0).add(&f.spectral.scale(a))?;
    let grid = f.grid.scale(a).add_constant(1.0);
    let g = SphereFunction { grid, spectral };
    Ok(Q * 16.0 * modified_fs_functional(&g, &params)? / lambda.powi(3))
}

/// Serialized summary of functional values for one input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeficitReport {
    pub input: String,
    pub band_limit: usize,
    pub grid_resolution: (usize, usize),
    pub params: Option<InequalityParams>,
    pub values: BTreeMap<String, f64>,
    pub extrapolation: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
}

impl DeficitReport {
    pub fn new(input: impl Into<String>, space: &SphereSpace, params: Option<InequalityParams>) -> Self {
        DeficitReport {
            input: input.into(),
            band_limit: space.band_limit(),
            grid_resolution: space.grid().resolution(),
            params,
            values: BTreeMap::new(),
            extrapolation: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    /// Deficits defined for `f` under `params`; inapplicable ones are skipped
    /// with a warning.
    pub fn evaluate(space: &SphereSpace, input: &str, f: &SphereFunction, params: &InequalityParams) -> Self {
        let mut report = DeficitReport::new(input, space, Some(*params));
        if let Some(w) = f.tail_warning() {
            report.warnings.push(w);
        }
        let mut record = |name: &str, v: Result<f64>| match v {
            Ok(x) => {
                report.values.insert(name.to_string(), x);
            }
            Err(e) => report.warnings.push(format!("{name}: {e}")),
        };
        record("fs_deficit", fs_deficit(f, params));
        match hls_deficit(f, params) {
            Ok(h) => {
                record("hls_deficit", Ok(h.absolute));
                record("hls_deficit_normalized", Ok(h.normalized));
            }
            Err(e) => record("hls_deficit", Err(e)),
        }
        if f.grid.min_real() >= 0.0 {
            match dual_remainder_pair(space, f, params) {
                Ok(pair) => {
                    record("i1", Ok(pair.i1));
                    record("i2", Ok(pair.i2));
                    record("residual_sq", Ok(pair.residual_sq));
                    record("dual_ratio", pair.ratio());
                }
                Err(e) => record("dual_remainder_pair", Err(e)),
            }
        }
        report.tolerances.insert("tail_fraction".into(), crate::harmonics::DEFAULT_TAIL_FRACTION);
        report.tolerances.insert("degenerate_denominator".into(), DEGENERATE_DENOMINATOR);
        report
    }
}
