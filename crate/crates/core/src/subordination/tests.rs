use nalgebra::{DMatrix, DVector};

use super::*;
use crate::base_kernel::{assemble_operator, heat_kernel_matrix, Boundary, CoefficientField, Grid};
use crate::subordinator::StableParams;

fn rule(alpha: f64) -> SubordinationRule<f64> {
    SubordinationRule::with_defaults(StableParams::new(alpha).unwrap()).unwrap()
}

fn poisson(t: f64, r: f64) -> f64 {
    t / (std::f64::consts::PI * (t * t + r * r))
}

#[test]
fn poisson_examples() {
    let rule = rule(0.5);
    let g = GaussianBase { dim: 1 };
    let v = subordinate_pointwise(&g, &rule, 1.0, &[0.0], &[0.0]).unwrap();
    assert!((v - std::f64::consts::FRAC_1_PI).abs() < 5e-7);
    let v = subordinate_pointwise(&g, &rule, 1.0, &[1.0], &[0.0]).unwrap();
    assert!((v - 0.159155).abs() < 5e-7);
    let v = subordinate_pointwise(&g, &rule, 2.0, &[0.3], &[0.3]).unwrap();
    assert!((v - 0.159155).abs() < 5e-7);
    assert!(subordinate_pointwise(&g, &rule, 0.0, &[0.0], &[0.0]).is_err());
}

#[test]
fn poisson_closed_form_across_scales() {
    let rule = rule(0.5);
    let g = GaussianBase { dim: 1 };
    for t in [0.1, 1.0, 10.0] {
        for k in 0..20 {
            let r = 10.0 * k as f64 / 19.0;
            let v = subordinate_pointwise(&g, &rule, t, &[r], &[0.0]).unwrap();
            let exact = poisson(t, r);
            assert!(((v - exact) / exact).abs() <= 1e-6, "t={t} r={r}: {v} vs {exact}");
        }
    }
    let d = rule.diagnostics();
    assert!(d.evaluations == 60 && d.max_refinement_change < 1e-8);
}

#[test]
fn poisson_gradient() {
    let rule = rule(0.5);
    let g = GaussianBase { dim: 1 };
    let zero = subordinate_gradient(&g, &rule, 1.0, &[0.2], &[0.2]).unwrap();
    assert_eq!(zero, vec![0.0]);
    let v = subordinate_gradient(&g, &rule, 1.0, &[1.0], &[0.0]).unwrap();
    assert!((v[0].abs() - 0.159155).abs() < 5e-7, "{v:?}");
    assert!(v[0] < 0.0);
}

#[test]
fn gradient_matches_finite_differences() {
    let rule = rule(0.7);
    let g = GaussianBase { dim: 1 };
    let (t, r) = (0.5, 2.0);
    let grad = subordinate_gradient(&g, &rule, t, &[r], &[0.0]).unwrap()[0];
    let h = 1e-3;
    let up = subordinate_pointwise(&g, &rule, t, &[r + h], &[0.0]).unwrap();
    let dn = subordinate_pointwise(&g, &rule, t, &[r - h], &[0.0]).unwrap();
    let fd = (up - dn) / (2.0 * h);
    assert!((grad - fd).abs() <= 1e-6f64.max(1e-4 * grad.abs()), "{grad} vs {fd}");
}

#[test]
fn eigen_factor_example() {
    let rule = rule(0.5);
    let f = subordinated_factor(&rule, 1.0, -1.0).unwrap();
    assert!((f - 0.367879).abs() < 5e-7);
    assert_eq!(subordinated_factor(&rule, 1.0, 0.0).unwrap(), 1.0);
}

fn checkerboard_op(points: usize, boundary: Boundary) -> DiscreteEllipticOperator<f64> {
    let g = Grid::line(8.0, points, boundary).unwrap();
    assemble_operator(&g, &CoefficientField::checkerboard(&g, 2.0, 1.0).unwrap()).unwrap()
}

#[test]
fn matrix_agrees_with_spectral_oracle() {
    let op = checkerboard_op(64, Boundary::Dirichlet);
    let rule = rule(0.5);
    for t in [0.1, 1.0, 10.0] {
        let q = subordinate_matrix(&op, &rule, t).unwrap();
        let o = spectral_oracle(&op, 0.5, t).unwrap();
        let (d, ..) = q.max_abs_diff(&o).unwrap();
        assert!(d <= 1e-6, "t={t}: {d}");
    }
}

#[test]
fn contraction_and_semigroup() {
    let op = checkerboard_op(64, Boundary::Neumann);
    let rule = rule(0.7);
    let vol = op.cell_volume();
    let q1 = subordinate_matrix(&op, &rule, 0.3).unwrap();
    let q2 = subordinate_matrix(&op, &rule, 0.5).unwrap();
    let q12 = subordinate_matrix(&op, &rule, 0.8).unwrap();
    for q in [&q1, &q2, &q12] {
        let worst = q.matrix().row_iter().map(|r| r.abs().sum() * vol).fold(0.0, f64::max);
        assert!(worst <= 1.0 + 1e-8);
        assert!(q.row_masses().iter().all(|m| (m - 1.0).abs() < 1e-8));
    }
    let prod = q1.matrix() * q2.matrix() * vol;
    assert!((prod - q12.matrix()).amax() < 1e-7);
}

#[test]
fn strong_continuity_at_zero() {
    let op = checkerboard_op(64, Boundary::Dirichlet);
    let rule = rule(0.5);
    let q = subordinate_matrix(&op, &rule, 1e-6).unwrap();
    let id = DMatrix::<f64>::identity(64, 64) / op.cell_volume();
    assert!(((q.matrix() - id) * op.cell_volume()).amax() < 1e-3);
}

#[test]
fn oracle_examples() {
    let op = checkerboard_op(16, Boundary::Dirichlet);
    let heat = heat_kernel_matrix(&op, 0.7).unwrap();
    let one = spectral_oracle(&op, 1.0, 0.7).unwrap();
    assert!((heat.matrix() - one.matrix()).amax() < 1e-12);
    let zero = spectral_oracle(&op, 0.4, 0.0).unwrap();
    let id = DMatrix::<f64>::identity(16, 16) / op.cell_volume();
    assert!((zero.matrix() - id).amax() < 1e-10);

    let m = DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, -2.0]);
    let op2 = DiscreteEllipticOperator::from_matrix(m, 1.0).unwrap();
    let q = spectral_oracle(&op2, 0.5, 1.0).unwrap();
    let (e1, e3) = ((-1.0f64).exp(), (-(3.0f64).sqrt()).exp());
    let expected = DMatrix::from_row_slice(2, 2, &[e1 + e3, e1 - e3, e1 - e3, e1 + e3]) * 0.5;
    assert!((q.matrix() - expected).amax() < 1e-14);
    assert!(spectral_oracle(&op2, 1.5, 1.0).is_err());
}

#[test]
fn generator_examples() {
    let quad = QuadratureSpec::for_alpha(&StableParams::new(0.5).unwrap());
    let op = checkerboard_op(32, Boundary::Neumann);
    let ones = DVector::from_element(32, 1.0);
    let g = generator_apply(&op, 0.5, &ones, &quad).unwrap();
    assert!(g.amax() < 1e-10);

    let one = DiscreteEllipticOperator::from_matrix(DMatrix::from_element(1, 1, -1.0), 1.0).unwrap();
    let f = DVector::from_element(1, 2.0);
    for alpha in [0.2, 0.5, 0.9] {
        let g: DVector<f64> = generator_apply(&one, alpha, &f, &quad).unwrap();
        assert!((g[0] + 2.0).abs() < 1e-8, "alpha={alpha}: {}", g[0]);
    }
    let four = DiscreteEllipticOperator::from_matrix(DMatrix::from_element(1, 1, -4.0), 1.0).unwrap();
    let g: DVector<f64> = generator_apply(&four, 0.5, &f, &quad).unwrap();
    assert!((g[0] + 4.0).abs() < 1e-8);
}

#[test]
fn generator_matches_spectral_power() {
    let quad = QuadratureSpec::for_alpha(&StableParams::new(0.3).unwrap());
    let op = checkerboard_op(40, Boundary::Dirichlet);
    let f = DVector::from_fn(40, |i, _| ((i * 7919) % 13) as f64 / 13.0 - 0.4);
    for alpha in [0.3, 0.7] {
        let g = generator_apply(&op, alpha, &f, &quad).unwrap();
        let s = spectral_generator(&op, alpha, &f).unwrap();
        assert!((g - s).amax() < 1e-8);
    }
}

#[test]
fn difference_quotient_converges_to_generator() {
    let alpha = 0.6;
    let rule = rule(alpha);
    let op = checkerboard_op(24, Boundary::Dirichlet);
    let spec = op.spectrum().unwrap();
    let f = spec.vectors.column(2).into_owned();
    let g = generator_apply(&op, alpha, &f, rule.spec()).unwrap();
    let vol = op.cell_volume();
    let mut errs = Vec::new();
    for h in [1e-2, 5e-3] {
        let q = subordinate_matrix(&op, &rule, h).unwrap();
        let dq = (q.matrix() * &f * vol - &f) / h;
        errs.push((dq - &g).amax());
    }
    let rate = (errs[0] / errs[1]).log2();
    assert!((rate - 1.0).abs() < 0.1, "{errs:?}");
}

#[test]
fn quadrature_spec_validation() {
    let p = StableParams::new(0.5).unwrap();
    let mut q = QuadratureSpec::for_alpha(&p);
    assert!(q.validate(&p).is_ok());
    q.panels = 4;
    assert!(q.validate(&p).is_err());
    let mut q = QuadratureSpec::for_alpha(&p);
    q.tail_order = 1;
    assert!(q.validate(&p).is_err());
    let mut q = QuadratureSpec::for_alpha(&p);
    q.s_min = 0.5;
    assert!(q.validate(&p).is_err());
}
