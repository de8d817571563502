//! Distances from a function to the extremizer manifolds `M_*` (Sobolev
//! metric) and `M_{-*}` (Lebesgue metric).
//!
//! Both searches run over `ξ = v / √(1 + |v|²)`, `v ∈ ℝ⁴`, with the scale
//! `c` eliminated per `ξ`: in closed form for the Sobolev metric and by a
//! monotone root solve for the `L^p` metric.

use std::fs::File;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::conformal::{extremizer_fs, extremizer_hls, ExtremizerPoint, XI_GUARD};
use crate::constants::InequalityParams;
use crate::harmonics::{a_s, sobolev_norm_sq, SphereFunction, SphereSpace};
use crate::heisenberg::SpherePoint;
use crate::optimize::{monotone_root_newton, nelder_mead, newton_polish, Derivatives};
use crate::{Error, Result};

/// Gradient tolerance of the normalized Sobolev objective `d²/‖f‖_*²`.
pub const FS_GRADIENT_TOL: f64 = 1e-9;

/// Gradient tolerance of the normalized Lebesgue objective `d_p²/|f|_p²`.
pub const HLS_GRADIENT_TOL: f64 = 1e-6;

/// Finite-difference steps in `v` for the gradient and Hessian.
const FS_STEPS: (f64, f64) = (1e-5, 1e-4);

/// Step for differencing the exact `L^p` gradient.
const HLS_HESSIAN_STEP: f64 = 1e-5;

/// Radii `|ξ|` of the moment-aligned starting points.
pub const SEED_RADII: [f64; 4] = [0.15, 0.35, 0.55, 0.75];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceOptions {
    pub starts: usize,
    /// Simplex evaluation budget per start.
    pub max_evals: usize,
    pub newton_iterations: usize,
    /// Overrides the metric's default gradient tolerance.
    pub gradient_tol: Option<f64>,
    /// Keep the per-iteration objective trace.
    pub trace: bool,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        DistanceOptions { starts: 5, max_evals: 400, newton_iterations: 12, gradient_tol: None, trace: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub start: usize,
    pub iteration: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub distance: f64,
    pub argmin: ExtremizerPoint,
    pub starts_tried: usize,
    pub converged: bool,
    pub residual_gradient_norm: f64,
    /// The infimum is approached only as `c → 0`.
    pub zero_limit: bool,
    #[serde(skip)]
    pub trace: Vec<TraceRow>,
}

impl DistanceResult {
    /// Writes `start,iteration,value` rows.
    pub fn write_trace_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        for row in &self.trace {
            w.serialize(row)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

fn xi_of(v: &[f64]) -> [Complex64; 2] {
    let r2: f64 = v.iter().map(|x| x * x).sum();
    let mut scale = 1.0 / (1.0 + r2).sqrt();
    let norm = r2.sqrt() * scale;
    if norm > 1.0 - XI_GUARD {
        scale *= (1.0 - XI_GUARD) / norm;
    }
    [Complex64::new(v[0] * scale, v[1] * scale), Complex64::new(v[2] * scale, v[3] * scale)]
}

fn v_of(xi: [Complex64; 2]) -> Vec<f64> {
    let r2 = xi[0].norm_sqr() + xi[1].norm_sqr();
    let s = 1.0 / (1.0 - r2).sqrt();
    vec![xi[0].re * s, xi[0].im * s, xi[1].re * s, xi[1].im * s]
}

/// `v = 0` followed by points along the first moment `∫ ζ |f|²`.
fn seeds(f: &SphereFunction, starts: usize) -> Vec<Vec<f64>> {
    let grid = f.grid.grid();
    let mut m = [Complex64::new(0.0, 0.0); 2];
    for (i, z) in grid.nodes().enumerate() {
        let w = grid.weight(i) * f.grid.values()[i].norm_sqr();
        m[0] += z.0[0] * w;
        m[1] += z.0[1] * w;
    }
    let len = (m[0].norm_sqr() + m[1].norm_sqr()).sqrt();
    let total = f.grid.abs_power(2.0).integrate_real();
    let dir = if len > 1e-12 * total.max(f64::MIN_POSITIVE) {
        [m[0] / len, m[1] / len]
    } else {
        [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
    };
    let mut out = vec![vec![0.0; 4]];
    for &r in SEED_RADII.iter() {
        out.push(v_of([dir[0] * r, dir[1] * r]));
    }
    out.truncate(starts.max(1));
    out
}

struct StartResult {
    v: Vec<f64>,
    value: f64,
    gradient: f64,
}

/// Multi-start search of a normalized objective; ties broken by `|ξ|`.
fn search<G: FnMut(&[f64]) -> Vec<f64>>(
    f: &SphereFunction,
    opts: &DistanceOptions,
    gtol: f64,
    mut objective: impl FnMut(&[f64]) -> f64,
    mut derivs: impl FnMut() -> Derivatives<G>,
    trace: &mut Vec<TraceRow>,
) -> Result<(StartResult, usize)> {
    let starts = seeds(f, opts.starts);
    let mut results = Vec::with_capacity(starts.len());
    for (k, v0) in starts.iter().enumerate() {
        let m = nelder_mead(&mut objective, v0, 0.1, opts.max_evals, 1e-10);
        if opts.trace {
            trace.extend(m.trace.iter().enumerate().map(|(i, &value)| TraceRow { start: k, iteration: i, value }));
        }
        let (v, value, gradient) = newton_polish(&mut objective, derivs(), &m.x, opts.newton_iterations, gtol);
        results.push(StartResult { v, value, gradient });
    }
    if !results.iter().any(|r| r.gradient <= gtol) {
        let best = results.iter().map(|r| r.gradient).fold(f64::INFINITY, f64::min);
        return Err(Error::NonConvergence { gradient_norm: best });
    }
    let n = results.len();
    let radius = |r: &StartResult| {
        let xi = xi_of(&r.v);
        xi[0].norm_sqr() + xi[1].norm_sqr()
    };
    results.sort_by(|a, b| {
        let tie = 1e-12 * (1.0 + a.value.abs().max(b.value.abs()));
        if (a.value - b.value).abs() <= tie {
            radius(a).total_cmp(&radius(b))
        } else {
            a.value.total_cmp(&b.value)
        }
    });
    Ok((results.swap_remove(0), n))
}

/// `d(f, M_*) = inf ‖f - c g_ξ‖_*`, computed on the band-limited
/// coefficients of `f` and `g_ξ`.
pub fn distance_fs(
    space: &SphereSpace,
    f: &SphereFunction,
    params: &InequalityParams,
    opts: &DistanceOptions,
) -> Result<DistanceResult> {
    if !f.is_real() {
        return Err(Error::PreconditionViolation("distance_fs needs a real-valued function".into()));
    }
    let norm_sq = sobolev_norm_sq(&f.spectral, params);
    if !(norm_sq > 0.0) {
        return Err(Error::ZeroFunction);
    }
    let lam = a_s(params);
    let weighted = f.spectral.apply_multiplier(&lam)?;
    let coeffs = |xi: [Complex64; 2]| -> Result<(f64, f64)> {
        let g = extremizer_fs(space, &ExtremizerPoint { c: 1.0, xi }, params);
        let g_hat = space.analyze(&g)?;
        let c = weighted.inner(&g_hat).re / sobolev_norm_sq(&g_hat, params);
        let r = f.spectral.sub(&g_hat.scale(c))?;
        Ok((c, sobolev_norm_sq(&r, params) / norm_sq))
    };
    let objective = |v: &[f64]| coeffs(xi_of(v)).map(|x| x.1).unwrap_or(f64::INFINITY);
    let gtol = opts.gradient_tol.unwrap_or(FS_GRADIENT_TOL);
    let mut trace = Vec::new();
    let (best, tried) = search(
        f,
        opts,
        gtol,
        objective,
        || Derivatives::<fn(&[f64]) -> Vec<f64>>::Differences(FS_STEPS.0, FS_STEPS.1),
        &mut trace,
    )?;
    let xi = xi_of(&best.v);
    let (c, value) = coeffs(xi)?;
    finish(value, norm_sq.sqrt(), c, xi, tried, best.gradient, gtol, trace)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    value: f64,
    scale: f64,
    c: f64,
    xi: [Complex64; 2],
    tried: usize,
    gradient: f64,
    gtol: f64,
    trace: Vec<TraceRow>,
) -> Result<DistanceResult> {
    let distance = value.max(0.0).sqrt() * scale;
    let zero_limit = distance >= scale || c == 0.0;
    let (distance, argmin) = if zero_limit {
        (scale, ExtremizerPoint { c: 0.0, xi })
    } else {
        (distance, ExtremizerPoint { c, xi })
    };
    Ok(DistanceResult {
        distance,
        argmin,
        starts_tried: tried,
        converged: gradient <= gtol,
        residual_gradient_norm: gradient,
        zero_limit,
        trace,
    })
}

/// `d_p(f, M_{-*}) = inf |f - c g_ξ|_p`.
pub fn distance_hls(
    space: &SphereSpace,
    f: &SphereFunction,
    params: &InequalityParams,
    opts: &DistanceOptions,
) -> Result<DistanceResult> {
    if !f.is_real() {
        return Err(Error::PreconditionViolation("distance_hls needs a real-valued function".into()));
    }
    let p = params.p();
    let fp = f.grid.lp_norm(p)?;
    if !(fp > 0.0) {
        return Err(Error::ZeroFunction);
    }
    let fv = f.grid.real_values();
    let grid = space.grid().clone();
    let w = grid.weights();
    let nodes: Vec<SpherePoint> = grid.nodes().collect();
    let alpha = (params.homogeneous_dim() + params.s()) / 2.0;
    let profile = |xi: [Complex64; 2]| -> Vec<f64> {
        extremizer_hls(space, &ExtremizerPoint { c: 1.0, xi }, params).real_values()
    };
    // optimal c and Φ = ∫|f - cg|^p
    let solve = |g: &[f64]| -> (f64, f64) {
        let gp = g.iter().zip(&w).map(|(v, w)| w * v.abs().powf(p)).sum::<f64>().powf(1.0 / p);
        let bound = 2.0 * fp / gp;
        // derivative of c ↦ ∫|f - cg|^p / p and its own derivative
        let slope = |c: f64| -> (f64, f64) {
            let (mut d, mut dd) = (0.0, 0.0);
            for ((a, b), w) in fv.iter().zip(g).zip(&w) {
                let r = a - c * b;
                let ar = r.abs();
                if ar > 0.0 {
                    let m = ar.powf(p - 2.0);
                    d -= w * m * r * b;
                    dd += w * (p - 1.0) * m * b * b;
                } else {
                    dd = f64::INFINITY;
                }
            }
            (d, dd)
        };
        let gg = g.iter().zip(&w).map(|(b, w)| w * b * b).sum::<f64>();
        let c0 = fv.iter().zip(g).zip(&w).map(|((a, b), w)| w * a * b).sum::<f64>() / gg;
        let c = monotone_root_newton(slope, -bound, bound, c0, 1e-15);
        let phi = fv.iter().zip(g).zip(&w).map(|((a, b), w)| w * (a - c * b).abs().powf(p)).sum::<f64>();
        (c, phi)
    };
    let normalized = |phi: f64| (phi.powf(1.0 / p) / fp).powi(2);
    let objective = |v: &[f64]| normalized(solve(&profile(xi_of(v))).1);
    // With c optimal, ∂Φ/∂x = -p c ∫ sgn(r)|r|^{p-1} ∂g/∂x, x the real
    // coordinates of ξ, and ∂g/∂x = (α/2) |1-w|^{-α-2} 2Re((1-w̄) ∂w).
    let gradient = |v: &[f64]| -> Vec<f64> {
        let xi = xi_of(v);
        let g = profile(xi);
        let (c, phi) = solve(&g);
        let mut dx = [0.0; 4];
        for (i, z) in nodes.iter().enumerate() {
            let r = fv[i] - c * g[i];
            let weight = -p * c * w[i] * r.signum() * r.abs().powf(p - 1.0);
            let one_minus = Complex64::new(1.0, 0.0) - xi[0] * z.0[0].conj() - xi[1] * z.0[1].conj();
            let d2 = one_minus.norm_sqr();
            let common = alpha * g[i] / d2;
            for k in 0..2 {
                let dw = z.0[k].conj();
                dx[2 * k] += weight * common * (one_minus.conj() * dw).re;
                dx[2 * k + 1] += weight * common * (one_minus.conj() * dw * Complex64::new(0.0, 1.0)).re;
            }
        }
        let chain = (2.0 / p) * phi.powf(2.0 / p - 1.0) / (fp * fp);
        let s = (1.0 + v.iter().map(|x| x * x).sum::<f64>()).sqrt();
        (0..4)
            .map(|b| {
                (0..4)
                    .map(|a| {
                        let jac = if a == b { 1.0 / s } else { 0.0 } - v[a] * v[b] / (s * s * s);
                        chain * dx[a] * jac
                    })
                    .sum()
            })
            .collect()
    };
    let gtol = opts.gradient_tol.unwrap_or(HLS_GRADIENT_TOL);
    let mut trace = Vec::new();
    let (best, tried) =
        search(f, opts, gtol, objective, || Derivatives::Gradient(&gradient, HLS_HESSIAN_STEP), &mut trace)?;
    let xi = xi_of(&best.v);
    let (c, phi) = solve(&profile(xi));
    let value = normalized(phi);
    finish(value, fp, c, xi, tried, best.gradient, gtol, trace)
}
