//! Small dense local optimizers used by the distance computations.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Outcome of a local minimization.
#[derive(Debug, Clone)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    /// Best value after each iteration.
    pub trace: Vec<f64>,
}

/// Nelder–Mead simplex search with the standard coefficients.
pub(crate) fn nelder_mead(
    mut f: impl FnMut(&[f64]) -> f64,
    x0: &[f64],
    step: f64,
    max_evals: usize,
    ftol: f64,
) -> Minimum {
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| {
        *evals += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0, &mut evals)));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = eval(&x, &mut evals);
        simplex.push((x, v));
    }
    let mut trace = Vec::new();
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        trace.push(simplex[0].1);
        let spread = simplex[n].1 - simplex[0].1;
        if spread.abs() <= ftol * (simplex[0].1.abs() + ftol) {
            break;
        }
        let centroid: Vec<f64> =
            (0..n).map(|d| simplex[..n].iter().map(|(x, _)| x[d]).sum::<f64>() / n as f64).collect();
        let toward = |t: f64, worst: &[f64]| -> Vec<f64> {
            centroid.iter().zip(worst).map(|(c, w)| c + t * (w - c)).collect()
        };
        let worst = simplex[n].0.clone();
        let xr = toward(-1.0, &worst);
        let fr = eval(&xr, &mut evals);
        if fr < simplex[0].1 {
            let xe = toward(-2.0, &worst);
            let fe = eval(&xe, &mut evals);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = toward(-0.5, &worst);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            } else {
                let xc = toward(0.5, &worst);
                let fc = eval(&xc, &mut evals);
                (xc, fc)
            };
            if fc < simplex[n].1.min(fr) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for item in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = best.iter().zip(&item.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    let v = eval(&x, &mut evals);
                    *item = (x, v);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, _) = simplex.swap_remove(0);
    Minimum { x, trace }
}

/// Central-difference gradient.
pub(crate) fn fd_gradient(f: &mut impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut y = x.to_vec();
    for i in 0..x.len() {
        y[i] = x[i] + h;
        let fp = f(&y);
        y[i] = x[i] - h;
        let fm = f(&y);
        y[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Central-difference Hessian.
pub(crate) fn fd_hessian(f: &mut impl FnMut(&[f64]) -> f64, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    let f0 = f(x);
    let mut hess = DMatrix::zeros(n, n);
    let mut y = x.to_vec();
    for i in 0..n {
        y[i] = x[i] + h;
        let fp = f(&y);
        y[i] = x[i] - h;
        let fm = f(&y);
        y[i] = x[i];
        hess[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let mut corner = |si: f64, sj: f64| {
                y[i] = x[i] + si * h;
                y[j] = x[j] + sj * h;
                let v = f(&y);
                y[i] = x[i];
                y[j] = x[j];
                v
            };
            let v = (corner(1.0, 1.0) - corner(1.0, -1.0) - corner(-1.0, 1.0) + corner(-1.0, -1.0)) / (4.0 * h * h);
            hess[(i, j)] = v;
            hess[(j, i)] = v;
        }
    }
    hess
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Hessian by central differences of a gradient, symmetrized.
pub(crate) fn fd_jacobian(grad: &mut impl FnMut(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> DMatrix<f64> {
    let n = x.len();
    let mut hess = DMatrix::zeros(n, n);
    let mut y = x.to_vec();
    for j in 0..n {
        y[j] = x[j] + h;
        let gp = grad(&y);
        y[j] = x[j] - h;
        let gm = grad(&y);
        y[j] = x[j];
        for i in 0..n {
            hess[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    (&hess + hess.transpose()) * 0.5
}

/// Derivative source for [`newton_polish`].
pub(crate) enum Derivatives<G> {
    /// Central differences of the objective with the given gradient and
    /// Hessian steps.
    Differences(f64, f64),
    /// Exact gradient; the Hessian differences it with the given step.
    Gradient(G, f64),
}

/// Newton iterations with eigenvalue flooring and backtracking so every
/// accepted step decreases `f`. Returns the polished point, its value and
/// the final gradient norm.
pub(crate) fn newton_polish<G: FnMut(&[f64]) -> Vec<f64>>(
    mut f: impl FnMut(&[f64]) -> f64,
    mut derivs: Derivatives<G>,
    x0: &[f64],
    max_iter: usize,
    gtol: f64,
) -> (Vec<f64>, f64, f64) {
    let gradient = |f: &mut dyn FnMut(&[f64]) -> f64, d: &mut Derivatives<G>, x: &[f64]| match d {
        Derivatives::Differences(h, _) => {
            let mut ff = |y: &[f64]| f(y);
            fd_gradient(&mut ff, x, *h)
        }
        Derivatives::Gradient(g, _) => g(x),
    };
    let hessian = |f: &mut dyn FnMut(&[f64]) -> f64, d: &mut Derivatives<G>, x: &[f64]| match d {
        Derivatives::Differences(_, h) => {
            let mut ff = |y: &[f64]| f(y);
            fd_hessian(&mut ff, x, *h)
        }
        Derivatives::Gradient(g, h) => fd_jacobian(g, x, *h),
    };
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut g = gradient(&mut f, &mut derivs, &x);
    for _ in 0..max_iter {
        if norm(&g) <= gtol {
            break;
        }
        let eig = SymmetricEigen::new(hessian(&mut f, &mut derivs, &x));
        let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        let gv = DVector::from_column_slice(&g);
        let coords = eig.eigenvectors.transpose() * &gv;
        let step_coords = DVector::from_iterator(
            coords.len(),
            coords.iter().zip(eig.eigenvalues.iter()).map(|(c, l)| -c / l.abs().max(1e-8 * scale)),
        );
        let step = &eig.eigenvectors * step_coords;
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let y: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + t * b).collect();
            let fy = f(&y);
            if fy <= fx {
                x = y;
                fx = fy;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
        g = gradient(&mut f, &mut derivs, &x);
    }
    let gn = norm(&g);
    (x, fx, gn)
}

/// Root of a nondecreasing function given with its derivative: Newton
/// steps from `x0`, falling back to bisection whenever a step leaves the
/// current bracket `[lo, hi]`.
pub(crate) fn monotone_root_newton(
    mut g: impl FnMut(f64) -> (f64, f64),
    mut lo: f64,
    mut hi: f64,
    x0: f64,
    tol: f64,
) -> f64 {
    let mut x = x0.clamp(lo, hi);
    for _ in 0..200 {
        let (v, dv) = g(x);
        if v == 0.0 {
            return x;
        }
        if v < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - v / dv;
        let next = if dv > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= tol * (1.0 + x.abs()) || hi - lo <= tol * (1.0 + x.abs()) {
            return next;
        }
        x = next;
    }
    x
}
