//! Bispherical harmonic analysis on `S^3`.
//!
//! Every `H_{j,k}` is spanned by functions of the separated form
//! `ζ₁^{(m₁)} ζ₂^{(m₂)} p(|ζ₁|²)` where `ζ^{(m)}` means `ζ^m` for `m ≥ 0`
//! and `ζ̄^{|m|}` otherwise, `m₁ + m₂ = j - k`. Each frequency sector
//! `(m₁, m₂)` contributes exactly one function to each block it meets, so
//! the basis is built by Gram–Schmidt along the radial variable only, and
//! analysis is a 2-D DFT on each Hopf ring followed by a radial sum.
//!
//! Entry `i` of block `(j, k)` sits in sector `m₁ = i - k`. Its complex
//! conjugate is entry `j + k - i` of block `(k, j)`.

use std::f64::consts::PI;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::constants::{eigenvalue, eigenvalue_limit, subspace_dimension, InequalityParams, ModeIndex};
use crate::grid::{build_grid, GridFunction, SphereGrid};
use crate::heisenberg::SpherePoint;
use crate::quadrature::jacobi;
use crate::{Error, Result};

const S3: f64 = 2.0 * PI * PI;

/// Relative tail energy above which analysis reports a warning.
pub const DEFAULT_TAIL_FRACTION: f64 = 1e-6;

/// Energy outside the pluriharmonic modes tolerated by the BO quadratic form.
pub const PLURIHARMONIC_TOL: f64 = 1e-10;

/// Number of coefficients of a function band-limited to `j + k ≤ band`.
pub fn num_coefficients(band: usize) -> usize {
    (band + 1) * (band + 2) * (2 * band + 3) / 6
}

/// Offset of block `(j, k)` in the flat coefficient vector. Blocks are
/// ordered by degree `j + k`, then by `j`.
pub fn mode_offset(mode: ModeIndex) -> usize {
    let d = (mode.j + mode.k) as usize;
    d * (d + 1) * (2 * d + 1) / 6 + mode.j as usize * (d + 1)
}

/// All modes with `j + k ≤ band` in storage order.
pub fn modes(band: usize) -> impl Iterator<Item = ModeIndex> {
    (0..=band as u32).flat_map(|d| (0..=d).map(move |j| ModeIndex::new(j, d - j)))
}

/// Frequency sector and radial degree of entry `i` of block `mode`.
pub fn entry_sector(mode: ModeIndex, i: usize) -> (i64, i64, usize) {
    let (j, k) = (i64::from(mode.j), i64::from(mode.k));
    let m1 = i as i64 - k;
    let m2 = j - k - m1;
    let ell = (j + k - m1.abs() - m2.abs()) / 2;
    (m1, m2, ell as usize)
}

fn sector_entry(m1: i64, m2: i64, ell: usize) -> (ModeIndex, usize) {
    let l = ell as i64;
    let j = l + m1.max(0) + m2.max(0);
    let k = l + (-m1).max(0) + (-m2).max(0);
    (ModeIndex::new(j as u32, k as u32), (m1 + k) as usize)
}

/// Polynomial in `x` with coefficients in increasing degree.
type Poly = Vec<f64>;

fn poly_eval(p: &[f64], x: f64) -> f64 {
    p.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

fn poly_mul(a: &[f64], b: &[f64]) -> Poly {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_axpy(y: &mut Poly, a: f64, x: &[f64]) {
    if y.len() < x.len() {
        y.resize(x.len(), 0.0);
    }
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Seed `t^i (1-t)^{ell-i}` written in `x = 2t - 1`.
fn seed_poly(i: usize, ell: usize) -> Poly {
    let t = vec![0.5, 0.5];
    let one_minus_t = vec![0.5, -0.5];
    let mut p = vec![1.0];
    for _ in 0..i {
        p = poly_mul(&p, &t);
    }
    for _ in 0..(ell - i) {
        p = poly_mul(&p, &one_minus_t);
    }
    p
}

#[derive(Debug, Clone)]
struct Sector {
    m1: i64,
    m2: i64,
    /// Index into the radial table for `(|m₁|, |m₂|)`.
    radial: usize,
    /// Flat coefficient index for `ell = 0, 1, ...`.
    entries: Vec<usize>,
}

/// Orthonormal bispherical basis up to a band limit, tabulated on a grid.
#[derive(Debug, Clone)]
pub struct BasisTable {
    band_limit: usize,
    grid: Arc<SphereGrid>,
    /// Radial polynomials indexed by `a * (L + 1) + b`, then by `ell`.
    radial: Vec<Vec<Poly>>,
    /// `t^{a/2} (1-t)^{b/2} p_ell(x)` on the rings.
    radial_rings: Vec<Vec<Vec<f64>>>,
    sectors: Vec<Sector>,
    gram_residual: f64,
}

/// Builds the basis for all modes with `j + k ≤ band_limit` on `grid`.
pub fn build_basis(grid: &Arc<SphereGrid>, band_limit: usize) -> Result<BasisTable> {
    if band_limit > grid.band_limit() {
        return Err(Error::InvalidParameter(format!(
            "grid of band {} cannot resolve basis band {band_limit}",
            grid.band_limit()
        )));
    }
    let big_l = band_limit;
    let xs = grid.ring_x();
    let ws = grid.ring_gl_weights();
    let ab_index = |a: usize, b: usize| a * (big_l + 1) + b;

    // ⟨p, q⟩ = 2π² ∫₀¹ t^a (1-t)^b p q dt
    let weight_at = |a: usize, b: usize| -> Vec<f64> {
        xs.iter()
            .zip(ws)
            .map(|(&x, &w)| {
                let t = 0.5 * (1.0 + x);
                PI * PI * w * t.powi(a as i32) * (1.0 - t).powi(b as i32)
            })
            .collect()
    };
    let inner = |wts: &[f64], p: &[f64], q: &[f64]| -> f64 {
        xs.iter().zip(wts).map(|(&x, &w)| w * poly_eval(p, x) * poly_eval(q, x)).sum()
    };

    let mut radial: Vec<Vec<Poly>> = vec![Vec::new(); (big_l + 1) * (big_l + 1)];
    for d in 0..=big_l as u32 {
        for j in 0..=d {
            let mode = ModeIndex::new(j, d - j);
            let dim = subspace_dimension(1, mode)?;
            let mut found = 0;
            for i in 0..dim {
                let (m1, m2, ell) = entry_sector(mode, i);
                let (a, b) = (m1.unsigned_abs() as usize, m2.unsigned_abs() as usize);
                let wts = weight_at(a, b);
                let chain = &radial[ab_index(a, b)];
                if chain.len() < ell {
                    return Err(Error::RankDeficiency { mode, expected: dim, found });
                }
                let mut accepted: Vec<Poly> = Vec::new();
                for seed_i in 0..=ell {
                    let seed = seed_poly(seed_i, ell);
                    let seed_norm = inner(&wts, &seed, &seed).sqrt();
                    let mut r = seed.clone();
                    for _ in 0..2 {
                        for p in chain[..ell].iter().chain(&accepted) {
                            let c = inner(&wts, &r, p);
                            poly_axpy(&mut r, -c, p);
                        }
                    }
                    let norm = inner(&wts, &r, &r).sqrt();
                    if norm > 1e-8 * seed_norm {
                        r.iter_mut().for_each(|c| *c /= norm);
                        accepted.push(r);
                    }
                }
                found += accepted.len();
                if accepted.len() == 1 && radial[ab_index(a, b)].len() == ell {
                    let mut p = accepted.pop().unwrap_or_default();
                    while p.len() > ell + 1 {
                        p.pop();
                    }
                    if p.last().copied().unwrap_or(0.0) < 0.0 {
                        p.iter_mut().for_each(|c| *c = -*c);
                    }
                    radial[ab_index(a, b)].push(p);
                }
            }
            if found != dim {
                return Err(Error::RankDeficiency { mode, expected: dim, found });
            }
        }
    }

    let mut gram_residual: f64 = 0.0;
    for a in 0..=big_l {
        for b in 0..=(big_l - a) {
            let wts = weight_at(a, b);
            let chain = &radial[ab_index(a, b)];
            for (p_i, p) in chain.iter().enumerate() {
                for (q_i, q) in chain.iter().enumerate() {
                    let target = if p_i == q_i { 1.0 } else { 0.0 };
                    gram_residual = gram_residual.max((inner(&wts, p, q) - target).abs());
                }
            }
        }
    }

    let radial_rings = (0..radial.len())
        .map(|idx| {
            let (a, b) = (idx / (big_l + 1), idx % (big_l + 1));
            radial[idx]
                .iter()
                .map(|p| {
                    xs.iter()
                        .map(|&x| {
                            let t = 0.5 * (1.0 + x);
                            t.powf(a as f64 / 2.0) * (1.0 - t).powf(b as f64 / 2.0) * poly_eval(p, x)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let l = big_l as i64;
    let mut sectors = Vec::new();
    for m1 in -l..=l {
        let rest = l - m1.abs();
        for m2 in -rest..=rest {
            let (a, b) = (m1.unsigned_abs() as usize, m2.unsigned_abs() as usize);
            let n_ell = (big_l - a - b) / 2 + 1;
            let entries = (0..n_ell)
                .map(|ell| {
                    let (mode, i) = sector_entry(m1, m2, ell);
                    mode_offset(mode) + i
                })
                .collect();
            sectors.push(Sector { m1, m2, radial: ab_index(a, b), entries });
        }
    }

    Ok(BasisTable { band_limit, grid: grid.clone(), radial, radial_rings, sectors, gram_residual })
}

impl BasisTable {
    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    /// Largest deviation of the radial Gram matrices from the identity.
    /// Cross-sector orthogonality is exact through the fibre DFT.
    pub fn gram_residual(&self) -> f64 {
        self.gram_residual
    }

    fn radial_poly(&self, m1: i64, m2: i64, ell: usize) -> &Poly {
        let (a, b) = (m1.unsigned_abs() as usize, m2.unsigned_abs() as usize);
        &self.radial[a * (self.band_limit + 1) + b][ell]
    }

    /// Value of basis function `i` of block `mode` at an arbitrary point.
    pub fn basis_value(&self, mode: ModeIndex, i: usize, zeta: &SpherePoint) -> Complex64 {
        let (m1, m2, ell) = entry_sector(mode, i);
        let x = zeta.z1().norm_sqr() - zeta.z2().norm_sqr();
        signed_power(zeta.z1(), m1) * signed_power(zeta.z2(), m2) * poly_eval(self.radial_poly(m1, m2, ell), x)
    }

    /// Basis function tabulated on the grid.
    pub fn tabulate(&self, mode: ModeIndex, i: usize) -> GridFunction {
        GridFunction::from_fn(&self.grid, |p| self.basis_value(mode, i, p))
    }

    /// Full Gram matrix residual from tabulated basis functions. Quadratic in
    /// the number of coefficients; meant for small band limits.
    pub fn brute_force_gram_residual(&self) -> f64 {
        let mut table = Vec::new();
        for mode in modes(self.band_limit) {
            for i in 0..(mode.degree() as usize + 1) {
                table.push(self.tabulate(mode, i));
            }
        }
        let mut worst: f64 = 0.0;
        for (a, fa) in table.iter().enumerate() {
            for (b, fb) in table.iter().enumerate().skip(a) {
                let g = fa.multiply(&fb.conj()).map(|h| h.integrate()).unwrap_or_default();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g - target).norm());
            }
        }
        worst
    }
}

fn signed_power(z: Complex64, m: i64) -> Complex64 {
    if m >= 0 {
        z.powu(m as u32)
    } else {
        z.conj().powu((-m) as u32)
    }
}

/// Grid plus basis: the context every spectral computation runs in.
#[derive(Debug, Clone)]
pub struct SphereSpace {
    grid: Arc<SphereGrid>,
    basis: BasisTable,
    /// `e^{-2πik/N_φ}`.
    twiddle: Vec<Complex64>,
}

impl SphereSpace {
    pub fn new(band_limit: usize) -> Result<Self> {
        let grid = build_grid(band_limit)?;
        Self::with_grid(grid, band_limit)
    }

    pub fn with_grid(grid: Arc<SphereGrid>, band_limit: usize) -> Result<Self> {
        let basis = build_basis(&grid, band_limit)?;
        let n = grid.n_phi();
        let twiddle = (0..n).map(|k| Complex64::from_polar(1.0, -2.0 * PI * k as f64 / n as f64)).collect();
        Ok(SphereSpace { grid, basis, twiddle })
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn basis(&self) -> &BasisTable {
        &self.basis
    }

    pub fn band_limit(&self) -> usize {
        self.basis.band_limit
    }

    fn tw(&self, m: i64, a: usize) -> Complex64 {
        let n = self.twiddle.len() as i64;
        self.twiddle[(m * a as i64).rem_euclid(n) as usize]
    }

    fn check_grid(&self, f: &GridFunction) -> Result<()> {
        if Arc::ptr_eq(f.grid(), &self.grid) || **f.grid() == *self.grid {
            Ok(())
        } else {
            Err(Error::InvalidParameter("grid function lives on a different grid".into()))
        }
    }

    fn check_band(&self, f: &SpectralFunction) -> Result<()> {
        if f.band_limit > self.band_limit() {
            return Err(Error::InvalidParameter(format!(
                "spectral band {} exceeds the space band {}",
                f.band_limit,
                self.band_limit()
            )));
        }
        Ok(())
    }

    /// Projects onto `⊕_{j+k≤L} H_{j,k}`; the discarded energy is recorded as
    /// the tail.
    pub fn analyze(&self, f: &GridFunction) -> Result<SpectralFunction> {
        self.check_grid(f)?;
        let l = self.band_limit() as i64;
        let n = self.grid.n_phi();
        let nm = (2 * l + 1) as usize;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); num_coefficients(self.band_limit())];
        let mut h = vec![Complex64::new(0.0, 0.0); n * nm];
        let values = f.values();
        for (r, &w) in self.grid.ring_weights().iter().enumerate() {
            let ring = &values[r * n * n..(r + 1) * n * n];
            for a in 0..n {
                for m2 in -l..=l {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for b in 0..n {
                        acc += ring[a * n + b] * self.tw(m2, b);
                    }
                    h[a * nm + (m2 + l) as usize] = acc;
                }
            }
            for s in &self.basis.sectors {
                let col = (s.m2 + l) as usize;
                let mut g = Complex64::new(0.0, 0.0);
                for a in 0..n {
                    g += h[a * nm + col] * self.tw(s.m1, a);
                }
                let g = g * w;
                for (ell, &idx) in s.entries.iter().enumerate() {
                    coeffs[idx] += g * self.basis.radial_rings[s.radial][ell][r];
                }
            }
        }
        let total: f64 = self.grid.quadrature_real(&f.values().iter().map(|v| v.norm_sqr()).collect::<Vec<_>>());
        let captured: f64 = coeffs.iter().map(|c| c.norm_sqr()).sum();
        let mut out = SpectralFunction { band_limit: self.band_limit(), coeffs, real: f.is_real(), tail_energy: 0.0 };
        out.tail_energy = (total - captured).max(0.0);
        if out.real {
            out.symmetrize();
        }
        Ok(out)
    }

    pub fn synthesize(&self, f: &SpectralFunction) -> Result<GridFunction> {
        self.check_band(f)?;
        let l = self.band_limit() as i64;
        let n = self.grid.n_phi();
        let nm = (2 * l + 1) as usize;
        let n_rings = self.grid.n_theta();
        let mut values = vec![Complex64::new(0.0, 0.0); self.grid.len()];
        let mut s_tab = vec![Complex64::new(0.0, 0.0); nm * nm];
        let mut t_tab = vec![Complex64::new(0.0, 0.0); n * nm];
        let full = f.padded(self.band_limit());
        for r in 0..n_rings {
            s_tab.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
            for s in &self.basis.sectors {
                let mut acc = Complex64::new(0.0, 0.0);
                for (ell, &idx) in s.entries.iter().enumerate() {
                    acc += full.coeffs[idx] * self.basis.radial_rings[s.radial][ell][r];
                }
                s_tab[(s.m1 + l) as usize * nm + (s.m2 + l) as usize] = acc;
            }
            for a in 0..n {
                for m2 in -l..=l {
                    let rest = l - m2.abs();
                    let mut acc = Complex64::new(0.0, 0.0);
                    for m1 in -rest..=rest {
                        acc += s_tab[(m1 + l) as usize * nm + (m2 + l) as usize] * self.tw(m1, a).conj();
                    }
                    t_tab[a * nm + (m2 + l) as usize] = acc;
                }
            }
            let ring = &mut values[r * n * n..(r + 1) * n * n];
            for a in 0..n {
                for b in 0..n {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for m2 in -l..=l {
                        acc += t_tab[a * nm + (m2 + l) as usize] * self.tw(m2, b).conj();
                    }
                    ring[a * n + b] = acc;
                }
            }
        }
        let g = GridFunction::new(self.grid.clone(), values)?;
        Ok(if f.real { g.real_part() } else { g })
    }

    /// Evaluates a band-limited function at arbitrary points.
    pub fn evaluate(&self, f: &SpectralFunction, points: &[SpherePoint]) -> Result<Vec<Complex64>> {
        self.check_band(f)?;
        let full = f.padded(self.band_limit());
        let l = self.band_limit();
        let out = points
            .iter()
            .map(|p| {
                let x = p.z1().norm_sqr() - p.z2().norm_sqr();
                let pow = |z: Complex64| -> (Vec<Complex64>, Vec<Complex64>) {
                    let mut pos = vec![Complex64::new(1.0, 0.0); l + 1];
                    let mut neg = vec![Complex64::new(1.0, 0.0); l + 1];
                    for m in 1..=l {
                        pos[m] = pos[m - 1] * z;
                        neg[m] = neg[m - 1] * z.conj();
                    }
                    (pos, neg)
                };
                let (p1, n1) = pow(p.z1());
                let (p2, n2) = pow(p.z2());
                let pick = |pos: &[Complex64], neg: &[Complex64], m: i64| {
                    if m >= 0 {
                        pos[m as usize]
                    } else {
                        neg[(-m) as usize]
                    }
                };
                let mut acc = Complex64::new(0.0, 0.0);
                for s in &self.basis.sectors {
                    let chain = &self.basis.radial[s.radial];
                    let mut rad = Complex64::new(0.0, 0.0);
                    for (ell, &idx) in s.entries.iter().enumerate() {
                        let c = full.coeffs[idx];
                        if c != Complex64::new(0.0, 0.0) {
                            rad += c * poly_eval(&chain[ell], x);
                        }
                    }
                    if rad != Complex64::new(0.0, 0.0) {
                        acc += rad * pick(&p1, &n1, s.m1) * pick(&p2, &n2, s.m2);
                    }
                }
                if f.real {
                    Complex64::new(acc.re, 0.0)
                } else {
                    acc
                }
            })
            .collect();
        Ok(out)
    }

    /// `Σ_η w_η K_{j,k}(ζ, η) f(η)` at the requested points.
    pub fn apply_zonal_projector(
        &self,
        mode: ModeIndex,
        f: &GridFunction,
        points: &[SpherePoint],
    ) -> Result<Vec<Complex64>> {
        self.check_grid(f)?;
        let nodes: Vec<SpherePoint> = self.grid.nodes().collect();
        let weights = self.grid.weights();
        Ok(points
            .iter()
            .map(|z| {
                nodes
                    .iter()
                    .zip(&weights)
                    .zip(f.values())
                    .map(|((eta, &w), &v)| zonal_kernel(mode, z, eta) * (w * v))
                    .sum()
            })
            .collect())
    }

    /// Projector onto `H_{j,k}` through the orthonormal basis.
    pub fn gram_projector(&self, mode: ModeIndex, f: &SpectralFunction) -> SpectralFunction {
        let mut out = SpectralFunction::zeros(f.band_limit);
        if mode.degree() as usize <= f.band_limit {
            out.block_mut(mode).copy_from_slice(f.block(mode));
        }
        out.real = f.real && mode.j == mode.k;
        out
    }
}

/// A function held both as grid samples and as band-limited coefficients.
///
/// Nonlinear quantities (powers, exponentials, Lebesgue norms) use the grid
/// samples; quadratic forms use the coefficients. Both views are computed
/// once per function so every functional sees the same decomposition.
#[derive(Debug, Clone)]
pub struct SphereFunction {
    pub grid: GridFunction,
    pub spectral: SpectralFunction,
}

impl SphereFunction {
    pub fn is_real(&self) -> bool {
        self.grid.is_real()
    }

    /// Tail warning of the spectral view.
    pub fn tail_warning(&self) -> Option<String> {
        self.spectral.tail_warning(DEFAULT_TAIL_FRACTION)
    }
}

impl SphereSpace {
    /// Samples on the grid, analyzed once.
    pub fn lift(&self, f: GridFunction) -> Result<SphereFunction> {
        let spectral = self.analyze(&f)?;
        Ok(SphereFunction { grid: f, spectral })
    }

    /// Band-limited coefficients, synthesized once.
    pub fn lift_spectral(&self, f: SpectralFunction) -> Result<SphereFunction> {
        let spectral = f.truncated(self.band_limit());
        let grid = self.synthesize(&spectral)?;
        Ok(SphereFunction { grid, spectral })
    }
}

/// Reproducing kernel of `H_{j,k}`:
/// `(dim/|S³|) w^{j-k} P^{(0,|j-k|)}_{min(j,k)}(2|w|²-1)` with `w = ζ·η̄`
/// (`w̄^{k-j}` when `k > j`).
pub fn zonal_kernel(mode: ModeIndex, zeta: &SpherePoint, eta: &SpherePoint) -> Complex64 {
    let w = zeta.dot_conj(eta);
    let (j, k) = (mode.j as i64, mode.k as i64);
    let dim = (j + k + 1) as f64;
    let m = j.min(k) as usize;
    let a = (j - k).unsigned_abs() as f64;
    let jac = jacobi(m, 0.0, a, 2.0 * w.norm_sqr() - 1.0);
    dim / S3 * signed_power(w, j - k) * jac
}

/// How inverse multipliers treat modes where the multiplier vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum InverseMode {
    /// Drop the excluded modes before inverting.
    #[default]
    Project,
    /// Error on any nonzero coefficient in an excluded mode.
    Strict,
}

/// Coefficients of a band-limited function in the bispherical basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFunction {
    band_limit: usize,
    coeffs: Vec<Complex64>,
    real: bool,
    tail_energy: f64,
}

impl SpectralFunction {
    pub fn zeros(band_limit: usize) -> Self {
        SpectralFunction {
            band_limit,
            coeffs: vec![Complex64::new(0.0, 0.0); num_coefficients(band_limit)],
            real: true,
            tail_energy: 0.0,
        }
    }

    /// Constant function `c`.
    pub fn constant(band_limit: usize, c: f64) -> Self {
        let mut f = Self::zeros(band_limit);
        f.coeffs[0] = Complex64::new(c * S3.sqrt(), 0.0);
        f
    }

    pub fn from_coefficients(band_limit: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != num_coefficients(band_limit) {
            return Err(Error::InvalidParameter(format!(
                "{} coefficients for band {band_limit} (expected {})",
                coeffs.len(),
                num_coefficients(band_limit)
            )));
        }
        let mut f = SpectralFunction { band_limit, coeffs, real: false, tail_energy: 0.0 };
        f.real = f.conjugate_asymmetry() < 1e-12 * f.norm_sq().sqrt().max(1.0);
        Ok(f)
    }

    /// Real function `Y + Ȳ` where `Y` is entry `i` of block `mode`.
    pub fn real_mode(band_limit: usize, mode: ModeIndex, i: usize) -> Result<Self> {
        if mode.degree() as usize > band_limit || i > mode.degree() as usize {
            return Err(Error::InvalidParameter(format!("mode ({}, {}) entry {i} out of range", mode.j, mode.k)));
        }
        let mut f = Self::zeros(band_limit);
        f.coeffs[mode_offset(mode) + i] += Complex64::new(1.0, 0.0);
        f.coeffs[mode_offset(mode.conjugate()) + mode.degree() as usize - i] += Complex64::new(1.0, 0.0);
        Ok(f)
    }

    /// Real random function on modes with `j + k ≤ max_degree`: one standard
    /// normal draw per real dimension.
    pub fn random_real<R: Rng + ?Sized>(band_limit: usize, max_degree: usize, rng: &mut R) -> Self {
        let mut f = Self::zeros(band_limit);
        for mode in modes(max_degree.min(band_limit)) {
            let d = mode.degree() as usize;
            for i in 0..=d {
                let idx = mode_offset(mode) + i;
                let pair = mode_offset(mode.conjugate()) + d - i;
                if pair < idx {
                    continue;
                }
                if pair == idx {
                    f.coeffs[idx] = Complex64::new(rng.sample(StandardNormal), 0.0);
                } else {
                    let c = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
                        / std::f64::consts::SQRT_2;
                    f.coeffs[idx] = c;
                    f.coeffs[pair] = c.conj();
                }
            }
        }
        f
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    /// `∫|f|² - Σ|c|²` measured by [`SphereSpace::analyze`].
    pub fn tail_energy(&self) -> f64 {
        self.tail_energy
    }

    pub fn relative_tail(&self) -> f64 {
        let e = self.norm_sq() + self.tail_energy;
        if e > 0.0 {
            self.tail_energy / e
        } else {
            0.0
        }
    }

    /// Warning text when the tail exceeds `fraction` of the total energy.
    pub fn tail_warning(&self, fraction: f64) -> Option<String> {
        let rel = self.relative_tail();
        (rel > fraction).then(|| format!("unresolved tail energy fraction {rel:.3e} exceeds {fraction:.1e}"))
    }

    pub fn block(&self, mode: ModeIndex) -> &[Complex64] {
        let o = mode_offset(mode);
        &self.coeffs[o..o + mode.degree() as usize + 1]
    }

    pub fn block_mut(&mut self, mode: ModeIndex) -> &mut [Complex64] {
        let o = mode_offset(mode);
        &mut self.coeffs[o..o + mode.degree() as usize + 1]
    }

    pub fn block_energy(&self, mode: ModeIndex) -> f64 {
        if mode.degree() as usize > self.band_limit {
            return 0.0;
        }
        self.block(mode).iter().map(|c| c.norm_sqr()).sum()
    }

    /// `Σ|c|² = ∫|f|²`.
    pub fn norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// `Σ a c̄ = ∫ f ḡ`.
    pub fn inner(&self, other: &SpectralFunction) -> Complex64 {
        self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b.conj()).sum()
    }

    /// Mean integral `∮ f`.
    pub fn mean(&self) -> f64 {
        self.coeffs[0].re / S3.sqrt()
    }

    fn padded(&self, band: usize) -> std::borrow::Cow<'_, SpectralFunction> {
        if self.band_limit == band {
            std::borrow::Cow::Borrowed(self)
        } else {
            std::borrow::Cow::Owned(self.truncated(band))
        }
    }

    /// Restricts or zero-pads to another band limit.
    pub fn truncated(&self, band: usize) -> SpectralFunction {
        let n = num_coefficients(band);
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
        let m = n.min(self.coeffs.len());
        coeffs[..m].copy_from_slice(&self.coeffs[..m]);
        SpectralFunction { band_limit: band, coeffs, real: self.real, tail_energy: self.tail_energy }
    }

    fn zip(&self, other: &SpectralFunction, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        if self.band_limit != other.band_limit {
            return Err(Error::InvalidParameter("spectral functions have different band limits".into()));
        }
        Ok(SpectralFunction {
            band_limit: self.band_limit,
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(&a, &b)| f(a, b)).collect(),
            real: self.real && other.real,
            tail_energy: 0.0,
        })
    }

    pub fn add(&self, other: &SpectralFunction) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &SpectralFunction) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        SpectralFunction {
            band_limit: self.band_limit,
            coeffs: self.coeffs.iter().map(|&v| v * c).collect(),
            real: self.real,
            tail_energy: self.tail_energy * c * c,
        }
    }

    /// Largest `|c_{(k,j),d-i} - conj(c_{(j,k),i})|`.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for mode in modes(self.band_limit) {
            let d = mode.degree() as usize;
            let mirror = self.block(mode.conjugate());
            for (i, c) in self.block(mode).iter().enumerate() {
                worst = worst.max((mirror[d - i] - c.conj()).norm());
            }
        }
        worst
    }

    /// Enforces the exact conjugate-mirror symmetry of a real function.
    fn symmetrize(&mut self) {
        for mode in modes(self.band_limit) {
            if mode.j < mode.k {
                continue;
            }
            let d = mode.degree() as usize;
            for i in 0..=d {
                let a = mode_offset(mode) + i;
                let b = mode_offset(mode.conjugate()) + d - i;
                if b < a && mode.j == mode.k {
                    continue;
                }
                let avg = 0.5 * (self.coeffs[a] + self.coeffs[b].conj());
                self.coeffs[a] = avg;
                self.coeffs[b] = avg.conj();
            }
        }
    }

    /// Blockwise scaling by `μ(j, k)`.
    pub fn apply_multiplier(&self, mu: impl Fn(ModeIndex) -> f64) -> Result<Self> {
        let mut out = self.clone();
        out.tail_energy = 0.0;
        for mode in modes(self.band_limit) {
            let m = mu(mode);
            if !m.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "multiplier is not finite on mode ({}, {})",
                    mode.j, mode.k
                )));
            }
            out.block_mut(mode).iter_mut().for_each(|c| *c *= m);
        }
        Ok(out)
    }

    /// Blockwise division by `μ(j, k)`; modes with `μ = 0` are handled per
    /// `mode`.
    pub fn apply_inverse_multiplier(&self, mu: impl Fn(ModeIndex) -> f64, mode: InverseMode) -> Result<Self> {
        let scale = self.norm_sq().sqrt().max(1.0);
        let mut out = self.clone();
        out.tail_energy = 0.0;
        for m in modes(self.band_limit) {
            let v = mu(m);
            if v == 0.0 {
                let energy = self.block_energy(m).sqrt();
                if mode == InverseMode::Strict && energy > 1e-12 * scale {
                    return Err(Error::KernelModePresent { mode: m });
                }
                out.block_mut(m).iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            } else {
                out.block_mut(m).iter_mut().for_each(|c| *c /= v);
            }
        }
        Ok(out)
    }

    /// Zeroes every block with `j ≥ 1` and `k ≥ 1`.
    pub fn pluriharmonic_project(&self) -> Self {
        let mut out = self.clone();
        for mode in modes(self.band_limit) {
            if !mode.is_pluriharmonic() {
                out.block_mut(mode).iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
            }
        }
        out
    }

    /// Energy in blocks with `j ≥ 1` and `k ≥ 1`.
    pub fn non_pluriharmonic_energy(&self) -> f64 {
        modes(self.band_limit).filter(|m| !m.is_pluriharmonic()).map(|m| self.block_energy(m)).sum()
    }

    /// Dumps the coefficients keyed by `(j, k, m)`, `m` the entry within the block.
    pub fn to_dump(&self) -> SpectralDump {
        let mut coefficients = Vec::with_capacity(self.coeffs.len());
        for mode in modes(self.band_limit) {
            for (m, c) in self.block(mode).iter().enumerate() {
                coefficients.push(CoefficientRecord { j: mode.j, k: mode.k, m: m as u32, re: c.re, im: c.im });
            }
        }
        SpectralDump { band_limit: self.band_limit, coefficients }
    }

    pub fn from_dump(dump: &SpectralDump) -> Result<Self> {
        let mut f = Self::zeros(dump.band_limit);
        for rec in &dump.coefficients {
            let mode = ModeIndex::new(rec.j, rec.k);
            if mode.degree() as usize > dump.band_limit || rec.m > mode.degree() {
                return Err(Error::InvalidParameter(format!(
                    "coefficient ({}, {}, {}) outside band {}",
                    rec.j, rec.k, rec.m, dump.band_limit
                )));
            }
            f.block_mut(mode)[rec.m as usize] = Complex64::new(rec.re, rec.im);
        }
        let coeffs = f.coeffs;
        Self::from_coefficients(dump.band_limit, coeffs)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        serde_json::to_writer_pretty(BufWriter::new(file), &self.to_dump())?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_dump(&serde_json::from_str(&text)?)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        for rec in self.to_dump().coefficients {
            w.serialize(rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRecord {
    pub j: u32,
    pub k: u32,
    pub m: u32,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDump {
    pub band_limit: usize,
    pub coefficients: Vec<CoefficientRecord>,
}

/// Multiplier of `A_s`.
pub fn a_s(params: &InequalityParams) -> impl Fn(ModeIndex) -> f64 + '_ {
    move |m| eigenvalue(params, m)
}

/// Multiplier of `A'_Q` for `n = 1`: `λ'_j` on `(j, 0)` and `(0, j)`, zero
/// on constants and on mixed modes.
pub fn a_prime(mode: ModeIndex) -> f64 {
    if !mode.is_pluriharmonic() || mode.degree() == 0 {
        return 0.0;
    }
    eigenvalue_limit(1, mode.degree()).unwrap_or(0.0)
}

/// `‖f‖_*² = Σ λ_{j,k} ‖f_{j,k}‖²`.
pub fn sobolev_norm_sq(f: &SpectralFunction, params: &InequalityParams) -> f64 {
    modes(f.band_limit).map(|m| eigenvalue(params, m) * f.block_energy(m)).sum()
}

/// `‖f‖_{-*}² = Σ λ_{j,k}^{-1} ‖f_{j,k}‖²`.
pub fn negative_norm_sq(f: &SpectralFunction, params: &InequalityParams) -> f64 {
    modes(f.band_limit).map(|m| f.block_energy(m) / eigenvalue(params, m)).sum()
}

/// `∮ f A'_Q f` for pluriharmonic `f`.
pub fn bo_form(f: &SpectralFunction) -> Result<f64> {
    let outside = f.non_pluriharmonic_energy();
    if outside > PLURIHARMONIC_TOL * f.norm_sq().max(1.0) {
        return Err(Error::NotPluriharmonic { energy: outside });
    }
    Ok(modes(f.band_limit).map(|m| a_prime(m) * f.block_energy(m)).sum::<f64>() / S3)
}

/// `∮ h A'^{-1}_Q P h`: the inverse acts after pluriharmonic projection and
/// ignores the constant mode.
pub fn a_prime_inverse_form(h: &SpectralFunction) -> f64 {
    modes(h.band_limit)
        .filter(|m| m.is_pluriharmonic() && m.degree() > 0)
        .map(|m| h.block_energy(m) / a_prime(m))
        .sum::<f64>()
        / S3
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn layout_counts() {
        assert_eq!(num_coefficients(12), 819);
        assert_eq!(modes(12).count(), 91);
        let mut expected = 0;
        for m in modes(6) {
            assert_eq!(mode_offset(m), expected);
            expected += m.degree() as usize + 1;
        }
        assert_eq!(expected, num_coefficients(6));
    }

    #[test]
    fn sector_round_trip() {
        for m in modes(9) {
            for i in 0..=m.degree() as usize {
                let (m1, m2, ell) = entry_sector(m, i);
                assert_eq!(m1 + m2, i64::from(m.j) - i64::from(m.k));
                assert_eq!(sector_entry(m1, m2, ell), (m, i));
            }
        }
    }

    #[test]
    fn low_modes_have_expected_bases() {
        let space = SphereSpace::new(4).unwrap();
        let b = space.basis();
        let p = SpherePoint::from_hopf(0.7, 0.3, -1.1);
        let y00 = b.basis_value(ModeIndex::new(0, 0), 0, &p);
        assert!((y00.re - 1.0 / S3.sqrt()).abs() < 1e-14);
        // H_{1,0} = span{ζ₁, ζ₂}, normalized by ∫|ζᵢ|² = π².
        let y10a = b.basis_value(ModeIndex::new(1, 0), 0, &p);
        let y10b = b.basis_value(ModeIndex::new(1, 0), 1, &p);
        assert!((y10a - p.z2() / PI).norm() < 1e-14);
        assert!((y10b - p.z1() / PI).norm() < 1e-14);
        assert!(b.gram_residual() < 1e-12);
    }

    #[test]
    fn brute_force_gram_at_small_band() {
        let space = SphereSpace::new(6).unwrap();
        assert!(space.basis().brute_force_gram_residual() < 1e-12);
    }

    #[test]
    fn round_trip_and_reality() {
        let space = SphereSpace::new(8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let f = SpectralFunction::random_real(8, 8, &mut rng);
        assert!(f.conjugate_asymmetry() < 1e-15);
        let g = space.synthesize(&f).unwrap();
        assert!(g.is_real());
        let back = space.analyze(&g).unwrap();
        let err = back.sub(&f).unwrap().norm_sq().sqrt();
        assert!(err < 1e-12, "{err}");
        assert!(back.tail_energy() < 1e-10);
        let pts: Vec<_> = (0..20).map(|i| space.grid().node(i * 37)).collect();
        let vals = space.evaluate(&f, &pts).unwrap();
        for (k, v) in vals.iter().enumerate() {
            assert!((v - g.values()[k * 37]).norm() < 1e-12);
        }
    }

    #[test]
    fn constant_analysis() {
        let space = SphereSpace::new(5).unwrap();
        let one = GridFunction::constant(space.grid(), 1.0);
        let f = space.analyze(&one).unwrap();
        assert!((f.coefficients()[0].re - S3.sqrt()).abs() < 1e-13);
        assert!(f.norm_sq() - f.block_energy(ModeIndex::new(0, 0)) < 1e-26);
        assert!((f.mean() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn zonal_kernel_matches_gram_projector() {
        let space = SphereSpace::new(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = SpectralFunction::random_real(5, 5, &mut rng);
        let g = space.synthesize(&f).unwrap();
        let pts: Vec<_> = (0..6).map(|i| space.grid().node(i * 101 + 5)).collect();
        for mode in modes(5) {
            let zonal = space.apply_zonal_projector(mode, &g, &pts).unwrap();
            let gram = space.evaluate(&space.gram_projector(mode, &f), &pts).unwrap();
            for (a, b) in zonal.iter().zip(&gram) {
                assert!((a - b).norm() < 1e-11, "mode ({}, {}): {a} vs {b}", mode.j, mode.k);
            }
        }
    }

    #[test]
    fn multipliers() {
        let p = InequalityParams::new(1, 2.0).unwrap();
        let one = SpectralFunction::constant(4, 1.0);
        let a1 = one.apply_multiplier(a_s(&p)).unwrap();
        assert!((a1.coefficients()[0].re - 2f64.sqrt() / 4.0 * S3.sqrt()).abs() < 1e-13);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let f = SpectralFunction::random_real(4, 4, &mut rng);
        let back = f.apply_multiplier(a_s(&p)).unwrap().apply_inverse_multiplier(a_s(&p), InverseMode::Strict).unwrap();
        assert!(back.sub(&f).unwrap().norm_sq().sqrt() < 1e-13);
        let phi = SpectralFunction::real_mode(4, ModeIndex::new(2, 0), 1).unwrap();
        let a = phi.apply_multiplier(a_prime).unwrap();
        assert!(a.sub(&phi.scale(6.0)).unwrap().norm_sq() < 1e-26);
        assert!(matches!(
            f.apply_inverse_multiplier(a_prime, InverseMode::Strict),
            Err(Error::KernelModePresent { .. })
        ));
        let projected = f.apply_inverse_multiplier(a_prime, InverseMode::Project).unwrap();
        assert_eq!(projected.block_energy(ModeIndex::new(1, 1)), 0.0);
        assert_eq!(projected.block_energy(ModeIndex::new(0, 0)), 0.0);
    }

    #[test]
    fn quadratic_forms() {
        let p = InequalityParams::new(1, 2.0).unwrap();
        let one = SpectralFunction::constant(4, 1.0);
        let sob = sobolev_norm_sq(&one, &p);
        assert!((sob - 2f64.sqrt() * PI * PI / 2.0).abs() < 1e-12);
        assert!((sob * negative_norm_sq(&one, &p) - S3 * S3).abs() < 1e-10);
        let phi = SpectralFunction::real_mode(4, ModeIndex::new(2, 0), 0).unwrap();
        let bo = bo_form(&phi).unwrap();
        assert!((bo - 6.0 * phi.norm_sq() / S3).abs() < 1e-13);
        assert!((bo - 2.0 * 6.0 / S3).abs() < 1e-13);
        let mixed = SpectralFunction::real_mode(4, ModeIndex::new(1, 1), 0).unwrap();
        assert!(matches!(bo_form(&mixed), Err(Error::NotPluriharmonic { .. })));
        assert_eq!(mixed.pluriharmonic_project().norm_sq(), 0.0);
        assert_eq!(one.pluriharmonic_project(), one);
    }

    #[test]
    fn dumps_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = SpectralFunction::random_real(3, 3, &mut rng);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.json");
        f.write_json(&path).unwrap();
        let back = SpectralFunction::read_json(&path).unwrap();
        assert_eq!(back.coefficients(), f.coefficients());
        assert!(back.is_real());
        let csv_path = dir.path().join("f.csv");
        f.write_csv(&csv_path).unwrap();
        let text = std::fs::read_to_string(&csv_path).unwrap();
        assert!(text.starts_with("j,k,m,re,im\n"));
        assert_eq!(text.lines().count(), num_coefficients(3) + 1);
    }
}
