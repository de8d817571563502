//! Product quadrature on `S^3` in Hopf coordinates and functions sampled on it.
//!
//! Nodes are Gauss–Legendre in `x = cos 2θ` times uniform grids in both
//! fibre angles. With `band_limit = L` the rule integrates every restricted
//! monomial `ζ^α ζ̄^β` with `|α| + |β| ≤ 2L` exactly, which is what the
//! spectral transforms rely on.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::heisenberg::SpherePoint;
use crate::quadrature::gauss_legendre;
use crate::{Error, Result};

/// Largest band limit a grid will be built for.
pub const MAX_BAND_LIMIT: usize = 64;

/// Values with imaginary part below this are treated as real.
pub const REALITY_TOL: f64 = 1e-10;

/// Smallest value accepted by `power` and `log`.
pub const POSITIVITY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SphereGrid {
    band_limit: usize,
    /// Gauss–Legendre nodes in `x = cos 2θ`, ascending.
    x: Vec<f64>,
    theta: Vec<f64>,
    /// Raw Gauss–Legendre weights on `[-1, 1]`.
    gl_weight: Vec<f64>,
    /// Weight of every node on a ring: `¼ w_GL (2π/N_φ)²`.
    ring_weight: Vec<f64>,
    n_phi: usize,
}

impl SphereGrid {
    pub fn new(band_limit: usize) -> Result<Self> {
        if band_limit == 0 {
            return Err(Error::InvalidParameter("band limit must be at least 1".into()));
        }
        if band_limit > MAX_BAND_LIMIT {
            return Err(Error::ResourceLimit(format!(
                "band limit {band_limit} exceeds the supported maximum {MAX_BAND_LIMIT}"
            )));
        }
        let rule = gauss_legendre(band_limit + 1);
        let n_phi = 2 * band_limit + 1;
        let dphi = 2.0 * PI / n_phi as f64;
        let theta = rule.nodes.iter().map(|&x| 0.5 * x.acos()).collect();
        let ring_weight = rule.weights.iter().map(|&w| 0.25 * w * dphi * dphi).collect();
        Ok(SphereGrid { band_limit, x: rule.nodes, theta, gl_weight: rule.weights, ring_weight, n_phi })
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    /// `(N_θ, N_φ)`.
    pub fn resolution(&self) -> (usize, usize) {
        (self.x.len(), self.n_phi)
    }

    pub fn n_theta(&self) -> usize {
        self.x.len()
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn len(&self) -> usize {
        self.x.len() * self.n_phi * self.n_phi
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ring_x(&self) -> &[f64] {
        &self.x
    }

    pub fn ring_theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn ring_gl_weights(&self) -> &[f64] {
        &self.gl_weight
    }

    pub fn ring_weights(&self) -> &[f64] {
        &self.ring_weight
    }

    pub fn phi(&self, a: usize) -> f64 {
        2.0 * PI * a as f64 / self.n_phi as f64
    }

    /// Node index of `(ring, a, b)`.
    pub fn index(&self, ring: usize, a: usize, b: usize) -> usize {
        (ring * self.n_phi + a) * self.n_phi + b
    }

    /// `(ring, a, b)` of a node index.
    pub fn split_index(&self, i: usize) -> (usize, usize, usize) {
        let np = self.n_phi;
        (i / (np * np), (i / np) % np, i % np)
    }

    /// Hopf coordinates `(θ, φ₁, φ₂)` of a node.
    pub fn hopf(&self, i: usize) -> (f64, f64, f64) {
        let (r, a, b) = self.split_index(i);
        (self.theta[r], self.phi(a), self.phi(b))
    }

    pub fn node(&self, i: usize) -> SpherePoint {
        let (t, p1, p2) = self.hopf(i);
        SpherePoint::from_hopf(t, p1, p2)
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.ring_weight[self.split_index(i).0]
    }

    pub fn nodes(&self) -> impl Iterator<Item = SpherePoint> + '_ {
        (0..self.len()).map(|i| self.node(i))
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// Quadrature sum `Σ wᵢ vᵢ`, accumulated ring by ring.
    pub fn quadrature(&self, values: &[Complex64]) -> Complex64 {
        let per_ring = self.n_phi * self.n_phi;
        values
            .chunks(per_ring)
            .zip(&self.ring_weight)
            .map(|(ring, &w)| ring.iter().sum::<Complex64>() * w)
            .sum()
    }

    /// Real quadrature sum.
    pub fn quadrature_real(&self, values: &[f64]) -> f64 {
        let per_ring = self.n_phi * self.n_phi;
        values
            .chunks(per_ring)
            .zip(&self.ring_weight)
            .map(|(ring, &w)| ring.iter().sum::<f64>() * w)
            .sum()
    }
}

pub fn build_grid(band_limit: usize) -> Result<Arc<SphereGrid>> {
    SphereGrid::new(band_limit).map(Arc::new)
}

/// Complex samples on a [`SphereGrid`].
#[derive(Debug, Clone)]
pub struct GridFunction {
    grid: Arc<SphereGrid>,
    values: Vec<Complex64>,
    real: bool,
}

impl PartialEq for GridFunction {
    fn eq(&self, other: &Self) -> bool {
        self.real == other.real && *self.grid == *other.grid && self.values == other.values
    }
}

impl GridFunction {
    pub fn new(grid: Arc<SphereGrid>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        let real = values.iter().all(|v| v.im.abs() < REALITY_TOL);
        Ok(GridFunction { grid, values, real })
    }

    pub fn from_real(grid: Arc<SphereGrid>, values: Vec<f64>) -> Result<Self> {
        let values = values.into_iter().map(|v| Complex64::new(v, 0.0)).collect();
        let mut f = Self::new(grid, values)?;
        f.real = true;
        Ok(f)
    }

    pub fn from_fn(grid: &Arc<SphereGrid>, f: impl Fn(&SpherePoint) -> Complex64) -> Self {
        let values: Vec<Complex64> = grid.nodes().map(|p| f(&p)).collect();
        let real = values.iter().all(|v| v.im.abs() < REALITY_TOL);
        GridFunction { grid: grid.clone(), values, real }
    }

    pub fn from_real_fn(grid: &Arc<SphereGrid>, f: impl Fn(&SpherePoint) -> f64) -> Self {
        let values = grid.nodes().map(|p| Complex64::new(f(&p), 0.0)).collect();
        GridFunction { grid: grid.clone(), values, real: true }
    }

    pub fn constant(grid: &Arc<SphereGrid>, c: f64) -> Self {
        GridFunction { grid: grid.clone(), values: vec![Complex64::new(c, 0.0); grid.len()], real: true }
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn is_real(&self) -> bool {
        self.real
    }

    /// Drops imaginary parts and marks the function real.
    pub fn real_part(&self) -> Self {
        GridFunction {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| Complex64::new(v.re, 0.0)).collect(),
            real: true,
        }
    }

    fn check_same_grid(&self, other: &GridFunction) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid {
            Ok(())
        } else {
            Err(Error::InvalidParameter("grid functions live on different grids".into()))
        }
    }

    fn map(&self, real: bool, f: impl Fn(Complex64) -> Complex64) -> Self {
        GridFunction { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect(), real }
    }

    fn zip(&self, other: &GridFunction, real: bool, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        self.check_same_grid(other)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(GridFunction { grid: self.grid.clone(), values, real })
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        self.zip(other, self.real && other.real, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        self.zip(other, self.real && other.real, |a, b| a - b)
    }

    pub fn multiply(&self, other: &GridFunction) -> Result<Self> {
        self.zip(other, self.real && other.real, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(self.real, |v| v * c)
    }

    pub fn scale_complex(&self, c: Complex64) -> Self {
        self.map(self.real && c.im == 0.0, |v| v * c)
    }

    pub fn add_constant(&self, c: f64) -> Self {
        self.map(self.real, |v| v + c)
    }

    pub fn conj(&self) -> Self {
        self.map(self.real, |v| v.conj())
    }

    fn require_positive(&self, op: &str) -> Result<()> {
        if !self.real {
            return Err(Error::DomainViolation(format!("{op} needs a real-valued function")));
        }
        let min = self.min_real();
        if !(min > POSITIVITY_FLOOR) {
            return Err(Error::DomainViolation(format!("{op} needs positive values (min {min:e})")));
        }
        Ok(())
    }

    /// Nodewise `f^e` for strictly positive real `f`.
    pub fn power(&self, exponent: f64) -> Result<Self> {
        self.require_positive("power")?;
        Ok(self.map(true, |v| Complex64::new(v.re.powf(exponent), 0.0)))
    }

    /// Nodewise `|f|^e`.
    pub fn abs_power(&self, exponent: f64) -> Self {
        self.map(true, |v| Complex64::new(v.norm().powf(exponent), 0.0))
    }

    pub fn exp(&self) -> Self {
        self.map(self.real, |v| v.exp())
    }

    pub fn log(&self) -> Result<Self> {
        self.require_positive("log")?;
        Ok(self.map(true, |v| Complex64::new(v.re.ln(), 0.0)))
    }

    pub fn integrate(&self) -> Complex64 {
        self.grid.quadrature(&self.values)
    }

    pub fn integrate_real(&self) -> f64 {
        self.integrate().re
    }

    /// `|S³|^{-1} ∫ f`.
    pub fn mean_integral(&self) -> Complex64 {
        self.integrate() / (2.0 * PI * PI)
    }

    pub fn lp_norm(&self, r: f64) -> Result<f64> {
        if !(r >= 1.0 && r.is_finite()) {
            return Err(Error::InvalidParameter(format!("L^r norm needs r >= 1 (got {r})")));
        }
        let powered: Vec<f64> = self.values.iter().map(|v| v.norm().powf(r)).collect();
        Ok(self.grid.quadrature_real(&powered).powf(1.0 / r))
    }

    pub fn min_real(&self) -> f64 {
        self.values.iter().map(|v| v.re).fold(f64::INFINITY, f64::min)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn max_imag(&self) -> f64 {
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max)
    }

    /// Writes `theta,phi1,phi2,re,im` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        w.write_record(["theta", "phi1", "phi2", "re", "im"])?;
        for (i, v) in self.values.iter().enumerate() {
            let (t, p1, p2) = self.grid.hopf(i);
            w.write_record([t, p1, p2, v.re, v.im].iter().map(|x| format!("{x:e}")))?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reads a CSV written by [`write_csv`](Self::write_csv); node order and
    /// coordinates must match `grid`.
    pub fn read_csv(path: &Path, grid: &Arc<SphereGrid>) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = csv::Reader::from_reader(BufReader::new(file));
        let mut values = Vec::with_capacity(grid.len());
        for (i, rec) in r.deserialize::<CsvRow>().enumerate() {
            let row = rec?;
            if i >= grid.len() {
                return Err(Error::InvalidParameter("more rows than grid nodes".into()));
            }
            let (t, p1, p2) = grid.hopf(i);
            if (row.theta - t).abs() > 1e-9 || (row.phi1 - p1).abs() > 1e-9 || (row.phi2 - p2).abs() > 1e-9 {
                return Err(Error::InvalidParameter(format!("row {i} does not match the grid node")));
            }
            values.push(Complex64::new(row.re, row.im));
        }
        GridFunction::new(grid.clone(), values)
    }

    /// Columnar little-endian layout: magic, band limit, node count, then the
    /// five `f64` columns `theta, phi1, phi2, re, im`.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(|e| Error::io(path, e));
        put(BINARY_MAGIC)?;
        put(&(self.grid.band_limit as u64).to_le_bytes())?;
        put(&(self.values.len() as u64).to_le_bytes())?;
        let columns: [Box<dyn Fn(usize) -> f64>; 5] = [
            Box::new(|i| self.grid.hopf(i).0),
            Box::new(|i| self.grid.hopf(i).1),
            Box::new(|i| self.grid.hopf(i).2),
            Box::new(|i| self.values[i].re),
            Box::new(|i| self.values[i].im),
        ];
        for col in &columns {
            for i in 0..self.values.len() {
                put(&col(i).to_le_bytes())?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if &magic != BINARY_MAGIC {
            return Err(Error::InvalidParameter(format!("{} is not a grid function file", path.display())));
        }
        let mut word = [0u8; 8];
        let mut next = |r: &mut BufReader<File>| -> Result<[u8; 8]> {
            r.read_exact(&mut word).map_err(|e| Error::io(path, e))?;
            Ok(word)
        };
        let band = u64::from_le_bytes(next(&mut r)?) as usize;
        let len = u64::from_le_bytes(next(&mut r)?) as usize;
        let grid = build_grid(band)?;
        if len != grid.len() {
            return Err(Error::InvalidParameter("node count does not match the band limit".into()));
        }
        let mut cols = vec![vec![0.0; len]; 5];
        for col in cols.iter_mut() {
            for v in col.iter_mut() {
                *v = f64::from_le_bytes(next(&mut r)?);
            }
        }
        let values = cols[3].iter().zip(&cols[4]).map(|(&re, &im)| Complex64::new(re, im)).collect();
        GridFunction::new(grid, values)
    }
}

const BINARY_MAGIC: &[u8; 8] = b"CRSSGRD1";

#[derive(Deserialize, Serialize)]
struct CsvRow {
    theta: f64,
    phi1: f64,
    phi2: f64,
    re: f64,
    im: f64,
}
