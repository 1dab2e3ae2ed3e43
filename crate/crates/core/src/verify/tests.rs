use std::f64::consts::PI;

use nalgebra::DMatrix;
use proptest::prelude::*;

use super::*;
use crate::base_kernel::{
    assemble_operator, Boundary, CoefficientField, DiscreteEllipticOperator, Grid, MatrixField, SymMat,
};
use crate::subordination::spectral_oracle;

fn poisson(t: f64, x: &[f64], y: &[f64]) -> crate::Result<f64> {
    let r = (x[0] - y[0]).abs();
    Ok(t / (PI * (t * t + r * r)))
}

fn poisson_gradient(t: f64, x: &[f64], y: &[f64]) -> crate::Result<f64> {
    let r = (x[0] - y[0]).abs();
    Ok(2.0 * t * r / (PI * (t * t + r * r).powi(2)))
}

fn free_scan() -> ScanGrid {
    ScanGrid::lattice((1e-2, 1e2), (1e-2, 1e4), 4, vec![vec![0.0]]).unwrap()
}

#[test]
fn scan_grid_invariants() {
    assert!(ScanGrid::lattice((1.0, 10.0), (0.1, 10.0), 4, vec![vec![0.0]]).is_err());
    assert!(ScanGrid::lattice((1e-2, 1e2), (1.0, 2.0), 4, vec![vec![0.0]]).is_err());
    let s = free_scan();
    assert_eq!(s.offsets[0], 0.0);
    assert!(s.offsets.len() >= 20);
    assert_eq!(s.refined().per_decade(), 8);
    assert_eq!(s.points().len(), s.times.len() * s.offsets.len());
}

#[test]
fn poisson_gradient_constant_is_two_over_pi() {
    let r = gradient_ratio_scan(&poisson_gradient, 0.5, 2.0, &free_scan()).unwrap();
    let c1 = r.report.constant("c1").unwrap();
    assert!((c1 / (2.0 / PI) - 1.0).abs() < 0.02, "{c1}");
    assert!(r.report.passed());
    assert!(r.report.drift.unwrap() < 0.05);
    let zero = |_: f64, _: &[f64], _: &[f64]| Ok(0.0);
    let z = gradient_ratio_scan(&zero, 0.5, 2.0, &free_scan()).unwrap();
    assert_eq!(z.report.constant("c1"), Some(0.0));
    assert!(z.report.passed());
}

#[test]
fn poisson_two_sided_constant_is_two_pi() {
    let r = two_sided_ratio_scan(&poisson, 0.5, 1, &free_scan()).unwrap();
    let c = r.report.constant("c").unwrap();
    assert!((c / (2.0 * PI) - 1.0).abs() < 0.02, "{c}");
    assert!((r.report.constant("sup_ratio").unwrap() - 1.0 / PI).abs() < 1e-12);
    assert!((r.report.constant("inf_ratio").unwrap() - 0.5 / PI).abs() < 1e-12);
    assert!(r.report.passed());
}

#[test]
fn two_sided_ratios_are_scale_invariant() {
    let scan = free_scan();
    let a = two_sided_ratio_scan(&poisson, 0.5, 1, &scan).unwrap();
    let b = two_sided_ratio_scan(&poisson, 0.5, 1, &scan.rescaled(3.7, 0.5)).unwrap();
    for (p, q) in a.samples.iter().zip(&b.samples) {
        assert!((p.ratio - q.ratio).abs() <= 1e-8 * p.ratio.abs());
    }
    let (ca, cb) = (a.report.constant("c").unwrap(), b.report.constant("c").unwrap());
    assert!((ca - cb).abs() < 1e-8 * ca);
}

#[test]
fn two_sided_counts_nonpositive_values_as_failures() {
    let bad = |t: f64, x: &[f64], y: &[f64]| if x[0] > 100.0 { Ok(0.0) } else { poisson(t, x, y) };
    let r = two_sided_ratio_scan(&bad, 0.5, 1, &free_scan()).unwrap();
    assert!(r.report.failures > 0);
    assert!(r.report.samples > 0);
}

#[test]
fn holder_fit_on_poisson_saturates_at_one() {
    let design = HolderDesign {
        times: vec![0.5, 1.0, 2.0],
        offsets: (0..12).map(|k| 1e-4 * 10f64.powf(k as f64 / 4.0)).collect(),
        anchors: vec![(vec![0.7], vec![0.0]), (vec![-1.3], vec![0.2])],
    };
    let r = holder_fit(&poisson, 0.5, 1, &design).unwrap().report;
    let g = r.exponents["gamma"];
    assert!(g.value >= 0.99 && g.value <= 1.0, "{g:?}");
    assert!(g.r_squared >= 0.9);
    assert!(r.passed(), "{r:?}");
    let flat = |_: f64, _: &[f64], _: &[f64]| Ok(1.0);
    let r = holder_fit(&flat, 0.5, 1, &design).unwrap().report;
    assert_eq!(r.verdict, None);
}

fn line(points: usize) -> Grid<f64> {
    Grid::line(8.0, points, Boundary::Neumann).unwrap()
}

#[test]
fn l2loc_examples() {
    let g = Grid::line(10.0, 101, Boundary::Neumann).unwrap();
    let a = CoefficientField::new(MatrixField::constant(&g, 1.0), 2.0).unwrap();
    assert_eq!(l2loc_norm(&a, &a).unwrap(), 0.0);
    let eps = 0.1;
    let b = a.perturbed(&MatrixField::constant(&g, 1.0), eps).unwrap();
    assert!((l2loc_norm(&a, &b).unwrap() - 2.0 * eps).abs() < 1e-12);
    // one-cell bump: some ball covering the cell attains it
    let mut vals = vec![SymMat::scalar(1.0); 101];
    vals[50] = SymMat::scalar(1.5);
    let c = CoefficientField::new(MatrixField::new(&g, vals).unwrap(), 2.0).unwrap();
    let v = l2loc_norm(&a, &c).unwrap();
    assert!((v - (0.25f64 * 0.1).sqrt()).abs() < 1e-12);
    let other = Grid::line(10.0, 51, Boundary::Neumann).unwrap();
    assert!(l2loc_norm(&a, &CoefficientField::identity(&other)).is_err());
}

#[test]
fn l2loc_in_two_dimensions() {
    let g = Grid::square(12.0, 49, Boundary::Dirichlet).unwrap();
    let a = CoefficientField::new(MatrixField::constant(&g, 1.0), 2.0).unwrap();
    let b = a.perturbed(&MatrixField::constant(&g, 1.0), 0.2).unwrap();
    // two diagonal entries, each ε·√(area of a disc of radius 2√2)
    let expected = 2.0 * 0.2 * (PI * 8.0).sqrt();
    let v = l2loc_norm(&a, &b).unwrap();
    assert!((v / expected - 1.0).abs() < 0.01, "{v} vs {expected}");
}

#[test]
fn semigroup_distance_scalar_example() {
    let a = DiscreteEllipticOperator::from_matrix(DMatrix::from_element(1, 1, -1.0), 1.0).unwrap();
    let b = DiscreteEllipticOperator::from_matrix(DMatrix::from_element(1, 1, -4.0), 1.0).unwrap();
    for p in NormSelector::all() {
        let d = semigroup_distance(&a, &b, 0.5, 1.0, p).unwrap();
        assert!((d - 0.232544).abs() < 5e-7, "{p:?}: {d}");
        assert_eq!(semigroup_distance(&a, &a, 0.5, 1.0, p).unwrap(), 0.0);
    }
}

fn checker_op(eps: f64, points: usize) -> DiscreteEllipticOperator<f64> {
    let g = line(points);
    let base = CoefficientField::new(MatrixField::constant(&g, 1.0), 2.0).unwrap();
    let a = base.perturbed(&MatrixField::checkerboard_sign(&g, 1.0), eps).unwrap();
    assemble_operator(&g, &a).unwrap()
}

#[test]
fn semigroup_distance_is_bounded_by_two() {
    let a = checker_op(0.45, 32);
    let b = checker_op(-0.45, 32);
    for p in NormSelector::all() {
        for t in [0.01, 1.0, 100.0] {
            assert!(semigroup_distance(&a, &b, 0.4, t, p).unwrap() <= 2.0 + 1e-8);
        }
    }
    assert!(semigroup_distance(&a, &checker_op(0.1, 16), 0.5, 1.0, NormSelector::Two).is_err());
}

#[test]
fn kernel_distance_is_symmetric_with_witness() {
    let (a, b) = (checker_op(0.3, 24), checker_op(0.0, 24));
    let qa = spectral_oracle(&a, 0.5, 1.0).unwrap();
    let qb = spectral_oracle(&b, 0.5, 1.0).unwrap();
    let (d1, w) = kernel_distance_sup(&qa, &qb).unwrap();
    let (d2, _) = kernel_distance_sup(&qb, &qa).unwrap();
    assert_eq!(d1, d2);
    assert_eq!(w.t, 1.0);
    assert!(d1 > 0.0);
    assert_eq!(kernel_distance_sup(&qa, &qa).unwrap().0, 0.0);
}

fn stability_design(epsilons: Vec<f64>) -> StabilityDesign {
    StabilityDesign { epsilons, alpha: 0.5, times: vec![0.1, 1.0, 10.0], norms: NormSelector::all().to_vec() }
}

#[test]
fn stability_with_zero_epsilon_is_trivial() {
    let g = line(64);
    let base = CoefficientField::new(MatrixField::constant(&g, 1.0), 2.0).unwrap();
    let dir = MatrixField::checkerboard_sign(&g, 1.0);
    let r = stability_experiment(&base, &dir, &stability_design(vec![0.0])).unwrap();
    assert!(r.rows.iter().all(|row| row.kernel_sup == 0.0 && row.norm_inf == Some(0.0)));
    assert!(r.report.passed());
}

#[test]
fn stability_sweep_decays_with_epsilon() {
    let g = Grid::line(32.0, 128, Boundary::Neumann).unwrap();
    let base = CoefficientField::new(MatrixField::constant(&g, 1.0), 2.0).unwrap();
    let dir = MatrixField::checkerboard_cells(&g, 1.0);
    let r = stability_experiment(&base, &dir, &stability_design(vec![0.4, 0.2, 0.1, 0.05, 0.025])).unwrap();
    assert!(r.report.passed(), "{:?}", r.report);
    for row in &r.rows {
        for p in NormSelector::all() {
            let v = match p {
                NormSelector::One => row.norm_1,
                NormSelector::Two => row.norm_2,
                NormSelector::Infinity => row.norm_inf,
            }
            .unwrap();
            assert!(v <= 2.0);
        }
    }
    // every distance sits under the fitted envelope
    for p in NormSelector::all() {
        let key = format!("p{}", p.name());
        let c = r.report.constant(&format!("C_envelope_{key}")).unwrap();
        let gamma = r.report.exponents[&format!("gamma_{key}")].value;
        let delta = r.report.exponents[&format!("delta_{key}")].value;
        for row in &r.rows {
            let v = match p {
                NormSelector::One => row.norm_1,
                NormSelector::Two => row.norm_2,
                NormSelector::Infinity => row.norm_inf,
            }
            .unwrap();
            let env = (c * (1.0 + row.t.powf(-gamma / 0.5)) * row.z.powf(delta)).min(2.0);
            assert!(v <= env * (1.0 + 1e-12));
        }
    }
}

#[test]
fn over_large_epsilon_is_skipped() {
    let g = line(16);
    let base = CoefficientField::new(MatrixField::constant(&g, 1.0), 2.0).unwrap();
    let dir = MatrixField::checkerboard_sign(&g, 1.0);
    let design = StabilityDesign { times: vec![1.0], ..stability_design(vec![0.9, 0.2]) };
    let r = stability_experiment(&base, &dir, &design).unwrap();
    assert!(r.report.notes.iter().any(|n| n.contains("0.9")));
    assert!(r.rows.iter().all(|row| row.epsilon == 0.2));
}

fn random_field(g: &Grid<f64>, seed: u64) -> CoefficientField<f64> {
    CoefficientField::random(g, 2.0, 1.0, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn l2loc_is_a_pseudometric(s1 in 0u64..1000, s2 in 0u64..1000, s3 in 0u64..1000) {
        let g = Grid::line(6.0, 25, Boundary::Neumann).unwrap();
        let (a, b, c) = (random_field(&g, s1), random_field(&g, s2), random_field(&g, s3));
        let ab = l2loc_norm(&a, &b).unwrap();
        prop_assert_eq!(ab, l2loc_norm(&b, &a).unwrap());
        prop_assert_eq!(l2loc_norm(&a, &a).unwrap(), 0.0);
        let ac = l2loc_norm(&a, &c).unwrap();
        let cb = l2loc_norm(&c, &b).unwrap();
        prop_assert!(ab <= ac + cb + 1e-12);
    }

    #[test]
    fn semigroup_distance_triangle_inequality(
        s1 in 0u64..1000, s2 in 0u64..1000, s3 in 0u64..1000,
        alpha in 0.2f64..0.9, t in 0.05f64..5.0, p in 0usize..3,
    ) {
        let g = Grid::line(6.0, 16, Boundary::Dirichlet).unwrap();
        let ops: Vec<_> = [s1, s2, s3].iter().map(|&s| assemble_operator(&g, &random_field(&g, s)).unwrap()).collect();
        let p = NormSelector::all()[p];
        let d = |i: usize, j: usize| semigroup_distance(&ops[i], &ops[j], alpha, t, p).unwrap();
        prop_assert!(d(0, 1) <= d(0, 2) + d(2, 1) + 1e-12);
        prop_assert!(d(0, 1) <= 2.0 + 1e-8);
    }
}
