//! Property tests for the module invariants.

use std::sync::OnceLock;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crss::conformal::{act_q, ConformalMap, WordRanges};
use crss::constants::{eigenvalue, sharp_constant, InequalityParams, ModeIndex};
use crss::experiments::{random_pluriharmonic, random_positive, richardson};
use crss::functionals::{bo_deficit, bo_dual_rhs, fs_deficit, hls_deficit};
use crss::harmonics::{bo_form, negative_norm_sq, sobolev_norm_sq, SpectralFunction, SphereSpace};
use crss::heisenberg::{
    cayley, cayley_inverse, cayley_jacobian, dilate, group_multiply, homogeneous_distance, homogeneous_norm,
    kernel_group, kernel_sphere, GroupPoint, SpherePoint,
};

fn space() -> &'static SphereSpace {
    static SPACE: OnceLock<SphereSpace> = OnceLock::new();
    SPACE.get_or_init(|| SphereSpace::new(8).unwrap())
}

fn fine_space() -> &'static SphereSpace {
    static SPACE: OnceLock<SphereSpace> = OnceLock::new();
    SPACE.get_or_init(|| SphereSpace::new(16).unwrap())
}

fn group_point() -> impl Strategy<Value = GroupPoint> {
    (-3.0..3.0f64, -3.0..3.0f64, -5.0..5.0f64).prop_map(|(x, y, t)| GroupPoint::new(Complex64::new(x, y), t))
}

fn sphere_point() -> impl Strategy<Value = SpherePoint> {
    (0.0..1.0f64, 0.0..std::f64::consts::TAU, 0.0..std::f64::consts::TAU)
        .prop_map(|(x, a, b)| SpherePoint::from_hopf(x.sqrt().acos(), a, b))
}

fn exponent() -> impl Strategy<Value = f64> {
    0.05..3.95f64
}

fn close(a: GroupPoint, b: GroupPoint, tol: f64) -> bool {
    (a.z - b.z).norm() <= tol && (a.t - b.t).abs() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn eigenvalues_increase_in_each_index(s in exponent(), j in 0u32..12, k in 0u32..12) {
        let p = InequalityParams::new(1, s).unwrap();
        let l = eigenvalue(&p, ModeIndex::new(j, k));
        prop_assert!(eigenvalue(&p, ModeIndex::new(j + 1, k)) > l);
        prop_assert!(eigenvalue(&p, ModeIndex::new(j, k + 1)) > l);
        prop_assert!(eigenvalue(&p, ModeIndex::new(1, 1)) >= eigenvalue(&p, ModeIndex::new(2, 0)));
        prop_assert!((l - eigenvalue(&p, ModeIndex::new(k, j))).abs() <= 1e-14 * l);
    }

    #[test]
    fn eigenvalue_identities(s in exponent()) {
        let p = InequalityParams::new(1, s).unwrap();
        let l00 = eigenvalue(&p, ModeIndex::new(0, 0));
        let l10 = eigenvalue(&p, ModeIndex::new(1, 0));
        let l20 = eigenvalue(&p, ModeIndex::new(2, 0));
        prop_assert!(((p.q() - 1.0) * l00 / l10 - 1.0).abs() < 1e-12);
        prop_assert!(((1.0 - l10 / l20) / (2.0 * s / (8.0 + s)) - 1.0).abs() < 1e-12);
        prop_assert!(sharp_constant(&p) > 0.0);
    }

    #[test]
    fn group_law(u in group_point(), v in group_point(), w in group_point()) {
        let left = group_multiply(group_multiply(u, v), w);
        let right = group_multiply(u, group_multiply(v, w));
        prop_assert!(close(left, right, 1e-12 * (1.0 + left.t.abs())));
        prop_assert!(close(group_multiply(u, GroupPoint::IDENTITY), u, 0.0));
        prop_assert!(close(group_multiply(GroupPoint::IDENTITY, u), u, 0.0));
        prop_assert!(close(group_multiply(u, u.inverse()), GroupPoint::IDENTITY, 1e-12));
        prop_assert!(close(group_multiply(u.inverse(), u), GroupPoint::IDENTITY, 1e-12));
        prop_assert!((homogeneous_norm(u.inverse()) - homogeneous_norm(u)).abs() < 1e-15);
        prop_assert!((homogeneous_distance(u, v) - homogeneous_distance(v, u)).abs() < 1e-12);
    }

    #[test]
    fn kernel_homogeneity(u in group_point(), v in group_point(), delta in 0.2..5.0f64, s in exponent()) {
        prop_assume!(homogeneous_distance(u, v) > 1e-3);
        let p = InequalityParams::new(1, s).unwrap();
        let k = kernel_group(&p, u, v).unwrap();
        let kd = kernel_group(&p, dilate(u, delta).unwrap(), dilate(v, delta).unwrap()).unwrap();
        prop_assert!((kd / k - delta.powf(s - 4.0)).abs() < 1e-10 * delta.powf(s - 4.0));
    }

    #[test]
    fn cayley_round_trip(u in group_point()) {
        let back = cayley_inverse(cayley(u)).unwrap();
        prop_assert!(close(back, u, 1e-10 * (1.0 + u.t.abs() + u.z.norm_sqr())));
    }

    #[test]
    fn cayley_is_injective(u in group_point(), v in group_point()) {
        prop_assume!(homogeneous_distance(u, v) >= 1e-6);
        prop_assert!(cayley(u).distance(&cayley(v)) >= 1e-10);
    }

    #[test]
    fn cayley_jacobian_is_volume_distortion(u in group_point()) {
        let h = 1e-6;
        let column = |d: GroupPoint| -> [f64; 4] {
            let plus = cayley(GroupPoint::new(u.z + d.z * h, u.t + d.t * h)).0;
            let minus = cayley(GroupPoint::new(u.z - d.z * h, u.t - d.t * h)).0;
            let e = [(plus[0] - minus[0]) / (2.0 * h), (plus[1] - minus[1]) / (2.0 * h)];
            [e[0].re, e[0].im, e[1].re, e[1].im]
        };
        let cols = [
            column(GroupPoint::new(Complex64::new(1.0, 0.0), 0.0)),
            column(GroupPoint::new(Complex64::new(0.0, 1.0), 0.0)),
            column(GroupPoint::new(Complex64::new(0.0, 0.0), 1.0)),
        ];
        let dot = |a: &[f64; 4], b: &[f64; 4]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let g: Vec<Vec<f64>> = cols.iter().map(|a| cols.iter().map(|b| dot(a, b)).collect()).collect();
        let det = g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1]) - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
            + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0]);
        let jac = cayley_jacobian(u);
        prop_assert!((det.sqrt() / jac - 1.0).abs() < 1e-5, "{} vs {}", det.sqrt(), jac);
    }

    #[test]
    fn sphere_kernel_is_symmetric(a in sphere_point(), b in sphere_point(), s in exponent()) {
        prop_assume!(a.distance(&b) > 1e-6);
        let p = InequalityParams::new(1, s).unwrap();
        let k1 = kernel_sphere(&p, a, b).unwrap();
        let k2 = kernel_sphere(&p, b, a).unwrap();
        prop_assert!((k1 - k2).abs() <= 1e-13 * k1);
    }

    #[test]
    fn conformal_cocycle_and_covariance(seed in any::<u64>(), a in sphere_point(), b in sphere_point()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t1 = ConformalMap::random(&mut rng, 3, &WordRanges::default());
        let t2 = ConformalMap::random(&mut rng, 3, &WordRanges::default());
        let (ta, j1) = t1.apply_with_jacobian(a).unwrap();
        let j2 = t2.jacobian(ta).unwrap();
        let j12 = t1.then(&t2).jacobian(a).unwrap();
        prop_assert!((j12 - j1 * j2).abs() <= 1e-8 * j12);
        let back = t1.then(&t1.inverse()).apply(a).unwrap();
        prop_assert!(back.distance(&a) < 1e-9);
        prop_assume!(a.distance(&b) > 1e-3);
        let (tb, jb) = t1.apply_with_jacobian(b).unwrap();
        let one = Complex64::new(1.0, 0.0);
        let lhs = (one - ta.dot_conj(&tb)).norm().sqrt();
        let rhs = (one - a.dot_conj(&b)).norm().sqrt() * (j1 * jb).powf(1.0 / 8.0);
        prop_assert!((lhs - rhs).abs() <= 1e-8 * rhs.max(1e-3));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn grid_linearity_and_homogeneity(seed in any::<u64>(), a in -3.0..3.0f64, r in 1.0..6.0f64) {
        let sp = space();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = sp.synthesize(&SpectralFunction::random_real(8, 4, &mut rng)).unwrap();
        let g = sp.synthesize(&SpectralFunction::random_real(8, 4, &mut rng)).unwrap();
        let combo = f.scale(a).add(&g).unwrap();
        let lin = combo.integrate_real() - (a * f.integrate_real() + g.integrate_real());
        prop_assert!(lin.abs() < 1e-10 * (1.0 + combo.max_abs()));
        let hom = f.scale(a).lp_norm(r).unwrap() - a.abs() * f.lp_norm(r).unwrap();
        prop_assert!(hom.abs() < 1e-12 * (1.0 + f.lp_norm(r).unwrap()));
    }

    #[test]
    fn parseval_and_round_trip(seed in any::<u64>()) {
        let sp = space();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = SpectralFunction::random_real(8, 8, &mut rng);
        let grid = sp.synthesize(&f).unwrap();
        let energy = grid.multiply(&grid.conj()).unwrap().integrate_real();
        prop_assert!((energy - f.norm_sq()).abs() < 1e-10 * f.norm_sq());
        let back = sp.analyze(&grid).unwrap();
        prop_assert!(back.sub(&f).unwrap().norm_sq().sqrt() < 1e-10 * f.norm_sq().sqrt());
    }

    #[test]
    fn sobolev_and_hls_inequalities(seed in any::<u64>(), s in exponent()) {
        let sp = space();
        let p = InequalityParams::new(1, s).unwrap();
        let c = sharp_constant(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = sp.lift_spectral(SpectralFunction::random_real(8, 4, &mut rng)).unwrap();
        let norm = sobolev_norm_sq(&f.spectral, &p);
        let l00 = eigenvalue(&p, ModeIndex::new(0, 0));
        prop_assert!(norm >= l00 * f.spectral.norm_sq() * (1.0 - 1e-12));
        prop_assert!(norm - c * f.grid.lp_norm(p.q()).unwrap().powi(2) >= -1e-8 * norm);
        let lp = f.grid.lp_norm(p.p()).unwrap().powi(2);
        prop_assert!(c * negative_norm_sq(&f.spectral, &p) <= lp * (1.0 + 1e-8));
        prop_assert!(fs_deficit(&f, &p).unwrap() >= -1e-8 * norm);
        prop_assert!(hls_deficit(&f, &p).unwrap().absolute >= -1e-8 * lp);
    }

    #[test]
    fn bo_form_and_deficit(seed in any::<u64>(), amplitude in 0.01..1.0f64) {
        let sp = space();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_pluriharmonic(sp, &mut rng, amplitude).unwrap();
        prop_assert!(bo_form(&f.spectral).unwrap() > 0.0);
        prop_assert!(bo_form(&SpectralFunction::constant(8, amplitude)).unwrap().abs() < 1e-14);
        let d = bo_deficit(&f).unwrap();
        prop_assert!(d >= -1e-10);
        prop_assert!(d - bo_dual_rhs(sp, &f).unwrap() >= -1e-8);
    }

    #[test]
    fn random_positive_is_positive(seed in any::<u64>()) {
        let sp = space();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_positive(sp, &mut rng).unwrap();
        prop_assert!(f.grid.min_real() >= 0.8 - 1e-12);
        prop_assert!(f.is_real());
    }

    #[test]
    fn richardson_is_exact_on_power_laws(limit in -5.0..5.0f64, a in 0.1..10.0f64, order in 0.5..3.0f64) {
        let eps = [3e-2, 1e-2, 3e-3, 1e-3];
        let values: Vec<f64> = eps.iter().map(|e: &f64| limit + a * e.powf(order)).collect();
        let ex = richardson(&eps, &values).unwrap();
        prop_assert!((ex.limit - limit).abs() < 1e-9 * (1.0 + a));
        prop_assert!((ex.order.unwrap() - order).abs() < 1e-5);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn conformal_action_composes(seed in any::<u64>(), s in 0.5..3.5f64) {
        let sp = fine_space();
        let p = InequalityParams::new(1, s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t1 = ConformalMap::random(&mut rng, 2, &WordRanges::audit());
        let t2 = ConformalMap::random(&mut rng, 2, &WordRanges::audit());
        let f = SpectralFunction::random_real(16, 3, &mut rng);
        let inner = sp.analyze(&act_q(sp, &t2, &f, &p).unwrap()).unwrap();
        let twice = act_q(sp, &t1, &inner, &p).unwrap();
        let once = act_q(sp, &t1.then(&t2), &f, &p).unwrap();
        let err = twice.sub(&once).unwrap().max_abs() / once.max_abs();
        prop_assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn deficits_are_conformally_invariant(seed in any::<u64>(), s in 0.5..3.5f64) {
        let sp = fine_space();
        let p = InequalityParams::new(1, s).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let tau = ConformalMap::random(&mut rng, 3, &WordRanges::audit());
        let f = random_positive(sp, &mut rng).unwrap();
        let moved = sp.lift(act_q(sp, &tau, &f.spectral, &p).unwrap()).unwrap();
        let scale = sobolev_norm_sq(&f.spectral, &p);
        prop_assert!((fs_deficit(&moved, &p).unwrap() - fs_deficit(&f, &p).unwrap()).abs() < 1e-6 * scale);
    }
}
