//! Reproducible experiment suites and report emission.
//!
//! Each suite returns a [`Report`] holding named checks (value, expected
//! value, tolerance, verdict) and plot-ready tables. Reports serialize
//! deterministically: identical configuration and seed give identical bytes.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::conformal::{act_log, act_p, act_q, extremizer_bo, extremizer_fs, extremizer_hls, extremizer_with_exponent};
use crate::conformal::{kernel_covariance_defect, ConformalMap, ExtremizerPoint, WordRanges};
use crate::constants::{
    eigenvalue, eigenvalue_limit, modified_eigenvalue, sharp_constant, InequalityParams, ModeIndex,
};
use crate::functionals::{
    bo_bridge_quotient, bo_deficit, bo_dual_rhs, christ_phi, dual_remainder_pair, fs_deficit, hls_deficit,
    loghls_deficit, loghls_double_integral, square_identity,
};
use crate::grid::GridFunction;
use crate::harmonics::{sobolev_norm_sq, SpectralFunction, SphereFunction, SphereSpace};
use crate::heisenberg::{SpherePoint, Q};
use crate::manifold::{distance_fs, distance_hls, DistanceOptions};
use crate::{Error, Result};

/// Name of the pseudo-random generator recorded in every report.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng";

/// Degree cap of random test functions.
pub const RANDOM_DEGREE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Relative error of extrapolated FS and dual ratio limits.
    pub limit_rel: f64,
    /// Relative error of extrapolated BO ratio limits.
    pub bo_limit_rel: f64,
    /// Slack in `deficit ≤ d²`.
    pub upper_bound: f64,
    /// Slack in the global inequalities.
    pub global: f64,
    /// Relative gap of the completion-of-squares identity.
    pub identity_rel: f64,
    pub invariance: f64,
    pub kernel_covariance: f64,
    pub translation: f64,
    /// Smallest accepted empirical order of the `λ → 0` bridge.
    pub bridge_order: f64,
    /// Accepted window of `normalized HLS deficit / (d_p/|f|_p)²`.
    pub hls_window: (f64, f64),
    /// Deficits on extremizers.
    pub extremal: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            limit_rel: 1e-2,
            bo_limit_rel: 2e-2,
            upper_bound: 1e-3,
            global: 1e-8,
            identity_rel: 1e-8,
            invariance: 1e-5,
            kernel_covariance: 1e-8,
            translation: 1e-10,
            bridge_order: 0.8,
            hls_window: (0.01, 100.0),
            extremal: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n: u32,
    pub s_values: Vec<f64>,
    pub band_limit: usize,
    /// Decreasing perturbation sizes; the last three drive extrapolation.
    pub epsilons: Vec<f64>,
    pub modes: Vec<(u32, u32)>,
    /// Pluriharmonic degrees for the limit case.
    pub bo_degrees: Vec<u32>,
    pub bridge_lambdas: Vec<f64>,
    pub seed: u64,
    /// Random inputs for global checks.
    pub samples: usize,
    /// Random inputs for the completion-of-squares identity.
    pub identity_samples: usize,
    pub words: usize,
    pub word_length: usize,
    /// Band of the invariance audit; moved functions are not band-limited.
    pub audit_band: usize,
    pub tolerances: Tolerances,
    pub distance: DistanceOptions,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 1,
            s_values: vec![1.0, 2.0, 3.0],
            band_limit: 12,
            epsilons: vec![3e-2, 1e-2, 3e-3, 1e-3],
            modes: vec![(2, 0), (1, 1), (3, 0), (2, 1)],
            bo_degrees: vec![2, 3],
            bridge_lambdas: vec![0.2, 0.1, 0.05],
            seed: 20240601,
            samples: 100,
            identity_samples: 50,
            words: 20,
            word_length: 4,
            audit_band: 16,
            tolerances: Tolerances::default(),
            distance: DistanceOptions::default(),
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let config: ExperimentConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n != 1 {
            return Err(Error::InvalidParameter(format!("only n = 1 is implemented (got {})", self.n)));
        }
        for &s in &self.s_values {
            InequalityParams::new(self.n, s)?;
        }
        if self.epsilons.len() < 3 || self.epsilons.windows(2).any(|w| !(w[1] < w[0])) || self.epsilons[0] <= 0.0 {
            return Err(Error::InvalidParameter("epsilons must be at least three positive decreasing values".into()));
        }
        if self.bridge_lambdas.len() < 2 || self.bridge_lambdas.iter().any(|&l| !(l > 0.0 && l < Q)) {
            return Err(Error::InvalidParameter("bridge needs at least two λ in (0, Q)".into()));
        }
        let max_degree = self.modes.iter().map(|m| m.0 + m.1).chain(self.bo_degrees.iter().copied()).max().unwrap_or(0);
        if (max_degree as usize).max(RANDOM_DEGREE) > self.band_limit {
            return Err(Error::InvalidParameter(format!(
                "band limit {} cannot hold degree {max_degree}",
                self.band_limit
            )));
        }
        if self.audit_band < RANDOM_DEGREE {
            return Err(Error::InvalidParameter(format!("audit band must be at least {RANDOM_DEGREE}")));
        }
        if self.bo_degrees.iter().any(|&j| j < 2) {
            return Err(Error::InvalidParameter("limit-case degrees must be at least 2 (f ⊥ H_1)".into()));
        }
        Ok(())
    }

    pub fn space(&self) -> Result<SphereSpace> {
        SphereSpace::new(self.band_limit)
    }

    fn params(&self) -> Result<Vec<InequalityParams>> {
        self.s_values.iter().map(|&s| InequalityParams::new(self.n, s)).collect()
    }
}

/// Limit of `r(ε) = r∞ + A ε^p` estimated from the last three samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub limit: f64,
    /// Empirical order `p`; `None` when the samples do not determine it and
    /// first order was assumed.
    pub order: Option<f64>,
    /// Value at the smallest `ε`.
    pub last: f64,
}

/// Richardson extrapolation with an estimated order `p ∈ [1/4, 4]`.
pub fn richardson(eps: &[f64], values: &[f64]) -> Result<Extrapolation> {
    if eps.len() != values.len() || eps.len() < 2 {
        return Err(Error::InvalidParameter("extrapolation needs matching samples, at least two".into()));
    }
    let k = eps.len();
    let (e2, e3) = (eps[k - 2], eps[k - 1]);
    let (r2, r3) = (values[k - 2], values[k - 1]);
    let order = if k >= 3 {
        let (e1, r1) = (eps[k - 3], values[k - 3]);
        let target = (r1 - r2) / (r2 - r3);
        let h = |p: f64| (e1.powf(p) - e2.powf(p)) / (e2.powf(p) - e3.powf(p)) - target;
        let (mut lo, mut hi) = (0.25, 4.0);
        if target.is_finite() && h(lo) * h(hi) < 0.0 {
            for _ in 0..100 {
                let mid = 0.5 * (lo + hi);
                if h(lo) * h(mid) <= 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Some(0.5 * (lo + hi))
        } else {
            None
        }
    } else {
        None
    };
    let p = order.unwrap_or(1.0);
    let limit = r3 - (r2 - r3) * e3.powf(p) / (e2.powf(p) - e3.powf(p));
    Ok(Extrapolation { limit, order, last: r3 })
}

/// Empirical order of `|errors|` against decreasing `steps`, from the last pair.
pub fn empirical_order(steps: &[f64], errors: &[f64]) -> f64 {
    let k = steps.len();
    (errors[k - 2].abs() / errors[k - 1].abs()).ln() / (steps[k - 2] / steps[k - 1]).ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: Option<f64>,
    pub tolerance: f64,
    pub passed: bool,
    /// Convergence order of the extrapolation behind `value`, if any.
    pub order: Option<f64>,
}

impl Check {
    /// `|value - expected| ≤ tolerance · |expected|`.
    pub fn relative(name: impl Into<String>, value: f64, expected: f64, tolerance: f64) -> Self {
        let passed = (value - expected).abs() <= tolerance * expected.abs();
        Check { name: name.into(), value, expected: Some(expected), tolerance, passed, order: None }
    }

    /// `|value - expected| ≤ tolerance`.
    pub fn absolute(name: impl Into<String>, value: f64, expected: f64, tolerance: f64) -> Self {
        let passed = (value - expected).abs() <= tolerance;
        Check { name: name.into(), value, expected: Some(expected), tolerance, passed, order: None }
    }

    /// `value ≥ -tolerance`.
    pub fn nonnegative(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, expected: None, tolerance, passed: value >= -tolerance, order: None }
    }

    /// `value ≤ tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check { name: name.into(), value, expected: None, tolerance, passed: value <= tolerance, order: None }
    }

    /// `value < 0`.
    pub fn negative(name: impl Into<String>, value: f64) -> Self {
        Check { name: name.into(), value, expected: None, tolerance: 0.0, passed: value < 0.0, order: None }
    }

    pub fn with_order(mut self, order: Option<f64>) -> Self {
        self.order = order;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub rng: String,
    pub provenance: String,
    pub checks: Vec<Check>,
    pub tables: BTreeMap<String, Table>,
    pub warnings: Vec<String>,
}

impl Report {
    pub fn new(experiment: &str, config: &ExperimentConfig) -> Self {
        Report {
            experiment: experiment.to_string(),
            config: config.clone(),
            rng: RNG_ALGORITHM.to_string(),
            provenance: provenance().to_string(),
            checks: Vec::new(),
            tables: BTreeMap::new(),
            warnings: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn check(&mut self, c: Check) {
        self.checks.push(c);
    }

    /// Merges another report's checks, tables and warnings.
    pub fn absorb(&mut self, other: Report) {
        self.checks.extend(other.checks);
        self.tables.extend(other.tables);
        self.warnings.extend(other.warnings);
    }
}

/// `git describe` of the working tree at first use, or the crate version.
pub fn provenance() -> &'static str {
    static PROVENANCE: OnceLock<String> = OnceLock::new();
    PROVENANCE.get_or_init(|| {
        let described = std::process::Command::new("git")
            .args(["describe", "--always", "--dirty", "--tags"])
            .current_dir(env!("CARGO_MANIFEST_DIR"))
            .output()
            .ok()
            .filter(|o| o.status.success())
            .and_then(|o| String::from_utf8(o.stdout).ok())
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty());
        match described {
            Some(d) => format!("crss {} ({d})", env!("CARGO_PKG_VERSION")),
            None => format!("crss {}", env!("CARGO_PKG_VERSION")),
        }
    })
}

/// Writes `report.json` and `tables/<name>.csv` under `dir`; returns the
/// written paths.
pub fn emit_report(report: &Report, dir: &Path) -> Result<Vec<PathBuf>> {
    let tables = dir.join("tables");
    fs::create_dir_all(&tables).map_err(|e| Error::io(&tables, e))?;
    let json_path = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    let mut file = File::create(&json_path).map_err(|e| Error::io(&json_path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| Error::io(&json_path, e))?;
    let mut written = vec![json_path];
    for (name, table) in &report.tables {
        let path = tables.join(format!("{name}.csv"));
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

/// `1 + 0.2 g/‖g‖_∞` for a random real `g` of degree at most 4.
pub fn random_positive(space: &SphereSpace, rng: &mut ChaCha8Rng) -> Result<SphereFunction> {
    let band = space.band_limit();
    let g = SpectralFunction::random_real(band, RANDOM_DEGREE, rng);
    let sup = space.synthesize(&g)?.max_abs();
    let f = g.scale(0.2 / sup).add(&SpectralFunction::constant(band, 1.0))?;
    space.lift_spectral(f)
}

/// Random real pluriharmonic function with sup norm `amplitude`.
pub fn random_pluriharmonic(space: &SphereSpace, rng: &mut ChaCha8Rng, amplitude: f64) -> Result<SphereFunction> {
    let band = space.band_limit();
    let g = SpectralFunction::random_real(band, RANDOM_DEGREE, rng).pluriharmonic_project();
    let sup = space.synthesize(&g)?.max_abs();
    space.lift_spectral(g.scale(amplitude / sup))
}

/// Real element of `H_{j,k} + H_{k,j}` with unit Sobolev norm.
pub fn unit_mode(band: usize, mode: ModeIndex, params: &InequalityParams) -> Result<SpectralFunction> {
    let phi = SpectralFunction::real_mode(band, mode, 0)?;
    Ok(phi.scale(1.0 / sobolev_norm_sq(&phi, params).sqrt()))
}

/// `1 + ε φ`.
pub fn one_plus(space: &SphereSpace, eps: f64, phi: &SpectralFunction) -> Result<SphereFunction> {
    space.lift_spectral(SpectralFunction::constant(space.band_limit(), 1.0).add(&phi.scale(eps))?)
}

fn mode_name(m: ModeIndex) -> String {
    format!("({},{})", m.j, m.k)
}

/// Deficit over squared Sobolev distance along `1 + εφ` for every `s` and
/// mode, extrapolated to `ε → 0`.
pub fn run_fs_stability_scan(space: &SphereSpace, config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let tol = config.tolerances;
    let mut report = Report::new("fs-stability", config);
    let mut table = Table::new(&["s", "j", "k", "epsilon", "deficit", "distance", "ratio"]);
    let mut limits = Table::new(&["s", "j", "k", "limit", "order", "expected", "rel_error"]);
    for params in config.params()? {
        let s = params.s();
        let l10 = eigenvalue(&params, ModeIndex::new(1, 0));
        let mut smallest = f64::INFINITY;
        for &(j, k) in &config.modes {
            let mode = ModeIndex::new(j, k);
            let phi = unit_mode(space.band_limit(), mode, &params)?;
            let mut ratios = Vec::new();
            for &eps in &config.epsilons {
                let f = one_plus(space, eps, &phi)?;
                let deficit = fs_deficit(&f, &params)?;
                let d = distance_fs(space, &f, &params, &config.distance)?.distance;
                let ratio = deficit / (d * d);
                table.push(vec![s, j as f64, k as f64, eps, deficit, d, ratio]);
                ratios.push(ratio);
                report.check(Check::at_most(
                    format!("s={s} mode {} eps={eps}: deficit/d²", mode_name(mode)),
                    ratio,
                    1.0 + tol.upper_bound,
                ));
            }
            let ex = richardson(&config.epsilons, &ratios)?;
            let expected = 1.0 - l10 / eigenvalue(&params, mode);
            smallest = smallest.min(ex.limit);
            limits.push(vec![
                s,
                j as f64,
                k as f64,
                ex.limit,
                ex.order.unwrap_or(f64::NAN),
                expected,
                (ex.limit - expected) / expected,
            ]);
            report.check(
                Check::relative(format!("s={s} mode {}: local ratio", mode_name(mode)), ex.limit, expected, tol.limit_rel)
                    .with_order(ex.order),
            );
        }
        report.check(Check::relative(
            format!("s={s}: smallest local ratio"),
            smallest,
            2.0 * s / (Q + 4.0 + s),
            tol.limit_rel,
        ));
    }
    report.tables.insert("fs_stability".into(), table);
    report.tables.insert("fs_stability_limits".into(), limits);
    Ok(report)
}

/// Global and local behaviour of the dual remainder pair.
pub fn run_dual_ratio_scan(space: &SphereSpace, config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let tol = config.tolerances;
    let mut report = Report::new("dual-ratio", config);
    let mut local = Table::new(&["s", "j", "k", "epsilon", "i1", "i2", "ratio"]);
    let mut limits = Table::new(&["s", "j", "k", "limit", "order", "expected"]);
    let mut global = Table::new(&["s", "sample", "gap", "identity_rel"]);
    for params in config.params()? {
        let s = params.s();
        let c = sharp_constant(&params);
        let l10 = eigenvalue(&params, ModeIndex::new(1, 0));
        for &(j, k) in &config.modes {
            let mode = ModeIndex::new(j, k);
            let phi = unit_mode(space.band_limit(), mode, &params)?;
            let mut ratios = Vec::new();
            for &eps in &config.epsilons {
                let pair = dual_remainder_pair(space, &one_plus(space, eps, &phi)?, &params)?;
                let r = pair.ratio()?;
                local.push(vec![s, j as f64, k as f64, eps, pair.i1, pair.i2, r]);
                ratios.push(r);
            }
            let ex = richardson(&config.epsilons, &ratios)?;
            let expected = c * eigenvalue(&params, mode) / l10;
            limits.push(vec![s, j as f64, k as f64, ex.limit, ex.order.unwrap_or(f64::NAN), expected]);
            report.check(
                Check::relative(format!("s={s} mode {}: i1/i2 limit", mode_name(mode)), ex.limit, expected, tol.limit_rel)
                    .with_order(ex.order),
            );
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut worst_gap = f64::INFINITY;
        let mut worst_identity: f64 = 0.0;
        for i in 0..config.samples.max(config.identity_samples) {
            let f = random_positive(space, &mut rng)?;
            let id = square_identity(space, &f, &params)?;
            if i < config.samples {
                worst_gap = worst_gap.min(id.difference);
            }
            let rel = id.relative_gap();
            if i < config.identity_samples {
                worst_identity = worst_identity.max(rel);
            }
            global.push(vec![s, i as f64, id.difference, rel]);
        }
        report.check(Check::nonnegative(format!("s={s}: min(i1 - C i2)"), worst_gap, tol.global));
        report.check(Check::at_most(format!("s={s}: completion of squares"), worst_identity, tol.identity_rel));
    }
    report.tables.insert("dual_ratio".into(), local);
    report.tables.insert("dual_ratio_limits".into(), limits);
    report.tables.insert("dual_global".into(), global);
    Ok(report)
}

/// The `s = Q` endpoint: BO deficit against its dual right-hand side, and
/// the `λ → 0` bridges.
pub fn run_limit_case_scan(space: &SphereSpace, config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let tol = config.tolerances;
    let band = space.band_limit();
    let mut report = Report::new("limit-case", config);
    let mut local = Table::new(&["j", "epsilon", "deficit", "rhs", "ratio"]);
    let mut smallest = f64::INFINITY;
    for &j in &config.bo_degrees {
        let phi = SpectralFunction::real_mode(band, ModeIndex::new(j, 0), 0)?;
        let mut ratios = Vec::new();
        for &eps in &config.epsilons {
            let f = space.lift_spectral(phi.scale(eps))?;
            let d = bo_deficit(&f)?;
            let r = bo_dual_rhs(space, &f)?;
            local.push(vec![j as f64, eps, d, r, d / r]);
            ratios.push(d / r);
        }
        let ex = richardson(&config.epsilons, &ratios)?;
        let expected = eigenvalue_limit(1, j)? / 2.0;
        smallest = smallest.min(ex.limit);
        report.check(
            Check::relative(format!("degree {j}: BO ratio limit"), ex.limit, expected, tol.bo_limit_rel).with_order(ex.order),
        );
    }
    if config.bo_degrees.contains(&2) {
        report.check(Check::relative("smallest BO ratio", smallest, f64::from(config.n) + 2.0, tol.bo_limit_rel));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut worst: f64 = f64::INFINITY;
    let mut worst_shift: f64 = 0.0;
    for _ in 0..config.samples {
        let f = random_pluriharmonic(space, &mut rng, 0.5)?;
        let d = bo_deficit(&f)?;
        let r = bo_dual_rhs(space, &f)?;
        worst = worst.min(d - r);
        let shift = f.grid.exp().mean_integral().re.ln();
        let moved = space.lift_spectral(f.spectral.add(&SpectralFunction::constant(band, -shift))?)?;
        worst_shift = worst_shift.max((bo_deficit(&moved)? - d).abs()).max((bo_dual_rhs(space, &moved)? - r).abs());
    }
    report.check(Check::nonnegative("min(BO deficit - dual rhs)", worst, tol.global));
    report.check(Check::at_most("translation invariance", worst_shift, tol.translation));

    let zero = SpectralFunction::zeros(band);
    let mut worst_ext: f64 = 0.0;
    for _ in 0..config.words.min(10) {
        let tau = ConformalMap::random(&mut rng, config.word_length, &WordRanges::audit());
        worst_ext = worst_ext.max(bo_deficit(&space.lift(act_log(space, &tau, &zero)?)?)?.abs());
    }
    report.check(Check::at_most("BO deficit on log|J_τ|", worst_ext, 1e-6));

    // (4/n!) λ^mod_{j,0} / λ → λ'_j
    let lambdas = &config.bridge_lambdas;
    let mut eig = Table::new(&["j", "lambda", "value", "target"]);
    for &j in &config.bo_degrees {
        let target = eigenvalue_limit(1, j)?;
        let mut errors = Vec::new();
        for &l in lambdas {
            let params = InequalityParams::new(1, Q - l)?;
            let v = 4.0 * modified_eigenvalue(&params, ModeIndex::new(j, 0)) / l;
            eig.push(vec![j as f64, l, v, target]);
            errors.push(v - target);
        }
        report.check(Check {
            name: format!("degree {j}: eigenvalue bridge order"),
            value: empirical_order(lambdas, &errors),
            expected: None,
            tolerance: tol.bridge_order,
            passed: empirical_order(lambdas, &errors) >= tol.bridge_order,
            order: None,
        });
    }
    let mut bridge = Table::new(&["lambda", "quotient", "bo_deficit", "error"]);
    let phi = SpectralFunction::real_mode(band, ModeIndex::new(2, 0), 0)?;
    let psi = SpectralFunction::real_mode(band, ModeIndex::new(0, 3), 1)?;
    let f = space.lift_spectral(phi.scale(0.3).add(&psi.scale(0.2))?)?;
    let target = bo_deficit(&f)?;
    let mut errors = Vec::new();
    for &l in lambdas {
        let v = bo_bridge_quotient(&f, l)?;
        bridge.push(vec![l, v, target, v - target]);
        errors.push(v - target);
    }
    let order = empirical_order(lambdas, &errors);
    report.check(Check {
        name: "functional bridge order".into(),
        value: order,
        expected: None,
        tolerance: tol.bridge_order,
        passed: order >= tol.bridge_order,
        order: None,
    });
    report.tables.insert("limit_case".into(), local);
    report.tables.insert("eigen_bridge".into(), eig);
    report.tables.insert("functional_bridge".into(), bridge);
    Ok(report)
}

fn relative_change(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Invariance of norms and deficits under random conformal words, and the
/// covariance of `|1 - ζ·η̄|`.
pub fn run_invariance_audit(space: &SphereSpace, config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let tol = config.tolerances;
    let mut report = Report::new("invariance", config);
    let finer;
    let space = if space.band_limit() >= config.audit_band {
        space
    } else {
        finer = SphereSpace::new(config.audit_band)?;
        &finer
    };
    let mut table = Table::new(&["word", "s", "lq", "sobolev", "hls_normalized", "exp_mean", "fs_deficit"]);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let ranges = WordRanges::audit();
    let mut worst = [0.0f64; 5];
    let mut worst_kernel: f64 = 0.0;
    for w in 0..config.words {
        let tau = ConformalMap::random(&mut rng, config.word_length, &ranges);
        let f = random_positive(space, &mut rng)?;
        for params in config.params()? {
            let moved_q = space.lift(act_q(space, &tau, &f.spectral, &params)?)?;
            let moved_p = space.lift(act_p(space, &tau, &f.spectral, &params)?)?;
            let q = params.q();
            let dev = [
                relative_change(moved_q.grid.lp_norm(q)?, f.grid.lp_norm(q)?),
                relative_change(sobolev_norm_sq(&moved_q.spectral, &params), sobolev_norm_sq(&f.spectral, &params)),
                (hls_deficit(&moved_p, &params)?.normalized - hls_deficit(&f, &params)?.normalized).abs(),
                0.0,
                (fs_deficit(&moved_q, &params)? - fs_deficit(&f, &params)?).abs() / sobolev_norm_sq(&f.spectral, &params),
            ];
            let logf = f.spectral.sub(&SpectralFunction::constant(space.band_limit(), 1.0))?;
            let moved_log = act_log(space, &tau, &logf)?;
            let dev_exp = relative_change(moved_log.exp().mean_integral().re, f.grid.add_constant(-1.0).exp().mean_integral().re);
            let dev = [dev[0], dev[1], dev[2], dev_exp, dev[4]];
            for (acc, d) in worst.iter_mut().zip(dev) {
                *acc = acc.max(d);
            }
            table.push(vec![w as f64, params.s(), dev[0], dev[1], dev[2], dev[3], dev[4]]);
        }
        let pairs: Vec<(SpherePoint, SpherePoint)> = (0..16)
            .map(|_| (random_point(&mut rng), random_point(&mut rng)))
            .collect();
        worst_kernel = worst_kernel.max(kernel_covariance_defect(&tau, &pairs)?);
    }
    let names = ["|f|_q", "‖f‖_*²", "normalized HLS deficit", "∮e^f", "FS deficit / ‖f‖_*²"];
    for (name, w) in names.iter().zip(worst) {
        report.check(Check::at_most(format!("invariance of {name}"), w, tol.invariance));
    }
    report.check(Check::at_most("kernel covariance", worst_kernel, tol.kernel_covariance));
    report.tables.insert("invariance".into(), table);
    Ok(report)
}

fn random_point(rng: &mut ChaCha8Rng) -> SpherePoint {
    use rand_distr::{Distribution, StandardNormal};
    loop {
        let v: Vec<f64> = (0..4).map(|_| StandardNormal.sample(rng)).collect();
        if let Ok(p) = SpherePoint::normalized(
            num_complex::Complex64::new(v[0], v[1]),
            num_complex::Complex64::new(v[2], v[3]),
        ) {
            return p;
        }
    }
}

/// Which inequality [`run_verify`] exercises.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VerifyTarget {
    Fs,
    Hls,
    Bo,
    Loghls,
}

/// `count` extremizer centres with `|ξ| ≤ radius`.
pub fn extremizer_points(rng: &mut ChaCha8Rng, count: usize, radius: f64) -> Result<Vec<ExtremizerPoint>> {
    use rand::Rng;
    (0..count)
        .map(|_| {
            let p = random_point(rng);
            let r = radius * rng.random::<f64>();
            let c = 0.5 + 1.5 * rng.random::<f64>();
            ExtremizerPoint::new(c, [p.0[0] * r, p.0[1] * r])
        })
        .collect()
}

/// Equality and sign checks of one inequality on its extremizers and on
/// random inputs.
pub fn run_verify(space: &SphereSpace, config: &ExperimentConfig, target: VerifyTarget) -> Result<Report> {
    config.validate()?;
    let tol = config.tolerances;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let name = match target {
        VerifyTarget::Fs => "verify-fs",
        VerifyTarget::Hls => "verify-hls",
        VerifyTarget::Bo => "verify-bo",
        VerifyTarget::Loghls => "verify-loghls",
    };
    let mut report = Report::new(name, config);
    let points = extremizer_points(&mut rng, config.words, 0.5)?;
    match target {
        VerifyTarget::Fs => {
            for params in config.params()? {
                let worst = points.iter().try_fold(0.0f64, |acc, pt| -> Result<f64> {
                    let g = space.lift(extremizer_fs(space, pt, &params))?;
                    Ok(acc.max(fs_deficit(&g, &params)?.abs()))
                })?;
                report.check(Check::at_most(format!("s={}: FS deficit on extremizers", params.s()), worst, tol.extremal));
                let mut least = f64::INFINITY;
                for _ in 0..config.samples.min(20) {
                    least = least.min(fs_deficit(&random_positive(space, &mut rng)?, &params)?);
                }
                report.check(Check::nonnegative(format!("s={}: FS deficit on random inputs", params.s()), least, tol.global));
            }
        }
        VerifyTarget::Hls => {
            let mut table = Table::new(&["s", "exponent", "worst_deficit"]);
            for params in config.params()? {
                let s = params.s();
                let worst = |make: &dyn Fn(&ExtremizerPoint) -> GridFunction| -> Result<f64> {
                    points.iter().try_fold(0.0f64, |acc, pt| {
                        Ok(acc.max(hls_deficit(&space.lift(make(pt))?, &params)?.normalized.abs()))
                    })
                };
                let good = worst(&|pt| extremizer_hls(space, pt, &params))?;
                let printed = worst(&|pt| extremizer_with_exponent(space, pt, (Q + s) / 4.0))?;
                table.push(vec![s, (Q + s) / 2.0, good]);
                table.push(vec![s, (Q + s) / 4.0, printed]);
                report.check(Check::at_most(format!("s={s}: HLS deficit on extremizers"), good, tol.extremal));
                report.check(Check {
                    name: format!("s={s}: exponent (Q+s)/4 is not extremal"),
                    value: printed,
                    expected: None,
                    tolerance: tol.extremal,
                    passed: printed > tol.extremal,
                    order: None,
                });
                let mut least = f64::INFINITY;
                for _ in 0..config.samples.min(20) {
                    let g = SpectralFunction::random_real(space.band_limit(), RANDOM_DEGREE, &mut rng);
                    least = least.min(hls_deficit(&space.lift_spectral(g)?, &params)?.absolute);
                }
                report.check(Check::nonnegative(format!("s={s}: HLS deficit on random inputs"), least, tol.global));
            }
            report.tables.insert("hls_exponents".into(), table);
        }
        VerifyTarget::Bo => {
            let worst = points.iter().try_fold(0.0f64, |acc, pt| -> Result<f64> {
                Ok(acc.max(bo_deficit(&space.lift(extremizer_bo(space, pt)?)?)?.abs()))
            })?;
            report.check(Check::at_most("BO deficit on extremizers", worst, 1e-6));
            let mut least = f64::INFINITY;
            for _ in 0..config.samples.min(20) {
                least = least.min(bo_deficit(&random_pluriharmonic(space, &mut rng, 0.5)?)?);
            }
            report.check(Check::nonnegative("BO deficit on random inputs", least, tol.global));
        }
        VerifyTarget::Loghls => {
            let mut worst: f64 = 0.0;
            for pt in &points {
                let g = extremizer_bo(space, pt)?.exp();
                worst = worst.max(loghls_deficit(&density(space, &g)?)?.abs());
            }
            report.check(Check::at_most("log-HLS deficit on extremizers", worst, 1e-6));
            let mut offsets = Table::new(&["sample", "t", "spectral", "double_integral", "offset"]);
            let mut least = f64::INFINITY;
            let mut spread: f64 = 0.0;
            for i in 0..config.samples.min(5) {
                let h = random_positive(space, &mut rng)?;
                let mut first = None;
                for t in [0.5, 1.0, 2.0] {
                    let g = h.grid.add_constant(-1.0).scale(t).add_constant(1.0);
                    let f = density(space, &g)?;
                    let spectral = loghls_deficit(&f)?;
                    let entropy = f.grid.multiply(&f.grid.log()?)?.mean_integral().re;
                    let double = entropy - loghls_double_integral(&f)?;
                    let offset = double - spectral;
                    offsets.push(vec![i as f64, t, spectral, double, offset]);
                    least = least.min(spectral);
                    let base = *first.get_or_insert(offset);
                    spread = spread.max((offset - base).abs());
                }
            }
            report.check(Check::nonnegative("log-HLS deficit on random inputs", least, tol.global));
            report.check(Check::at_most("log-HLS form offset spread", spread, 1e-4));
            report.tables.insert("loghls_offsets".into(), offsets);
        }
    }
    Ok(report)
}

fn density(space: &SphereSpace, g: &GridFunction) -> Result<SphereFunction> {
    let m = g.mean_integral().re;
    space.lift(g.scale(1.0 / m))
}

/// Distances of `1 + εφ` to both manifolds, with the HLS comparison window.
pub fn run_hls_probe(space: &SphereSpace, config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let tol = config.tolerances;
    let mut report = Report::new("hls-probe", config);
    let mut table = Table::new(&["s", "epsilon", "normalized_deficit", "distance", "lp_norm", "ratio"]);
    for params in config.params()? {
        let s = params.s();
        let phi = unit_mode(space.band_limit(), ModeIndex::new(2, 0), &params)?;
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        let mut bounded = true;
        for &eps in &[1e-3, 1e-2, 1e-1] {
            let f = one_plus(space, eps, &phi)?;
            let r = distance_hls(space, &f, &params, &config.distance)?;
            let fp = f.grid.lp_norm(params.p())?;
            let h = hls_deficit(&f, &params)?.normalized;
            let ratio = h / (r.distance / fp).powi(2);
            bounded &= r.distance <= fp;
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            table.push(vec![s, eps, h, r.distance, fp, ratio]);
        }
        for &(j, k) in &config.modes {
            let phi = unit_mode(space.band_limit(), ModeIndex::new(j, k), &params)?;
            let value = christ_phi(space, &space.lift_spectral(phi.scale(1e-3))?, &params)?;
            report.check(Check::negative(format!("s={s} mode ({j},{k}): christ φ"), value));
        }
        report.check(Check {
            name: format!("s={s}: d_p ≤ |f|_p"),
            value: if bounded { 0.0 } else { 1.0 },
            expected: Some(0.0),
            tolerance: 0.0,
            passed: bounded,
            order: None,
        });
        report.check(Check {
            name: format!("s={s}: smallest deficit/d_p² ratio"),
            value: lo,
            expected: None,
            tolerance: tol.hls_window.0,
            passed: lo >= tol.hls_window.0,
            order: None,
        });
        report.check(Check {
            name: format!("s={s}: largest deficit/d_p² ratio"),
            value: hi,
            expected: None,
            tolerance: tol.hls_window.1,
            passed: hi <= tol.hls_window.1,
            order: None,
        });
    }
    report.tables.insert("hls_probe".into(), table);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn richardson_recovers_limit_and_order() {
        let eps = [3e-2, 1e-2, 3e-3, 1e-3];
        let vals: Vec<f64> = eps.iter().map(|&e: &f64| 0.4 + 2.0 * e * e.sqrt()).collect();
        let ex = richardson(&eps, &vals).unwrap();
        assert!((ex.limit - 0.4).abs() < 1e-12, "{ex:?}");
        assert!((ex.order.unwrap() - 1.5).abs() < 1e-9);
        let flat = richardson(&eps, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(flat.limit, 1.0);
        assert!(flat.order.is_none());
    }

    #[test]
    fn config_validation() {
        let good = ExperimentConfig::default();
        good.validate().unwrap();
        let json = serde_json::to_string(&good).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, good);
        let partial: ExperimentConfig = serde_json::from_str(r#"{"seed": 3, "s_values": [2.0]}"#).unwrap();
        assert_eq!(partial.seed, 3);
        assert_eq!(partial.band_limit, 12);
        let bad = ExperimentConfig { n: 2, ..good.clone() };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig { epsilons: vec![1e-3, 1e-2, 1e-1], ..good.clone() };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig { band_limit: 2, ..good };
        assert!(bad.validate().is_err());
    }
}
