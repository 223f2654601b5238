use std::collections::BTreeMap;

use super::*;
use crate::asymptotics::{adjoint_profile, alpha_profile, stable_subtree, AlphaOptions, DEFAULT_TOL};
use crate::tree::{Fork, TreeWindow};

fn op(model: TreeModel, rule: WeightRule) -> ShiftOperator {
    ShiftOperator::new(model, rule).unwrap()
}

fn fam(f: Family) -> TreeModel {
    TreeModel::Family(f)
}

fn map(values: &[(VertexId, f64)], default: f64) -> WeightRule {
    WeightRule::Map { values: values.iter().cloned().collect(), default: Some(default) }
}

fn asymptote(s: &ShiftOperator, lo: i64, hi: i64, breadth: usize) -> Result<(AsymptoteDescriptor, AsymptoticProfile)> {
    let w = TreeWindow::build(s.model(), lo, hi, breadth)?;
    let p = alpha_profile(s, &w, AlphaOptions::default())?;
    let st = stable_subtree(s, &w, &p, DEFAULT_ZERO_THRESHOLD)?;
    Ok((isometric_asymptote(s, &p, &st)?, p))
}

fn halving_path() -> ShiftOperator {
    op(fam(Family::RootedPath), WeightRule::Geometric { scale: 1.0, ratio: 0.5, start: Some(1) })
}

#[test]
fn single_child_chains_have_unit_beta() {
    for s in [halving_path(), op(fam(Family::BilateralPath), WeightRule::ExpRay { scale: 1.0, center: 3 })] {
        let (d, _) = asymptote(&s, -4, 10, 4).unwrap();
        for (v, b) in &d.beta {
            assert!((b.unwrap() - 1.0).abs() < 1e-10, "{v}: {b:?}");
        }
    }
    let (d, _) = asymptote(&halving_path(), 0, 10, 4).unwrap();
    assert_eq!((d.kind, d.multiplicity), (AsymptoteKind::Unilateral, Multiplicity::Count(1)));
}

#[test]
fn binary_isometry_is_cnu_with_infinite_multiplicity() {
    let s = op(fam(Family::RootlessBinary), WeightRule::Constant(std::f64::consts::FRAC_1_SQRT_2));
    let (d, _) = asymptote(&s, 0, 4, 16).unwrap();
    for b in d.beta.values() {
        assert!((b.unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);
    }
    assert_eq!((d.kind, d.multiplicity), (AsymptoteKind::CnuUnilateral, Multiplicity::Infinite));
    assert!(d.cnu.value <= 2f64.powi(-60), "{}", d.cnu.value);
    assert!(d.cnu.level_spread <= 10.0 * DEFAULT_TOL);
    assert!(d.isometry_residual < 1e-12);
}

#[test]
fn exp_ray_binary_has_a_unitary_part() {
    let s = op(fam(Family::RootlessBinary), WeightRule::ExpRay { scale: 1.0, center: 0 });
    let (d, _) = asymptote(&s, -3, 3, 16).unwrap();
    assert_eq!(d.kind, AsymptoteKind::BilateralPlusUnilateral);
    let zeta2 = std::f64::consts::PI.powi(2) / 6.0;
    let floor = (-2.0 * (2.0 * zeta2 - 1.0)).exp();
    assert!(d.cnu.level_values.values().all(|x| *x >= floor), "{:?}", d.cnu.level_values);
    assert!(d.isometry_residual < 1e-12);
}

#[test]
fn cnu_examples() {
    let ones = op(fam(Family::BilateralPath), WeightRule::Constant(1.0));
    let (d, _) = asymptote(&ones, -5, 5, 4).unwrap();
    assert!(d.cnu.level_values.values().all(|x| *x == 1.0));
    assert_eq!((d.kind, d.multiplicity), (AsymptoteKind::BilateralPlusUnilateral, Multiplicity::Count(0)));

    // weights 1 above the branching vertex: products up the spine stay 1
    let s =
        op(fam(Family::Tilde(Fork::tilde(false))), map(&[(VertexId::Int(1), 0.6), (VertexId::Primed(1), 0.8)], 1.0));
    let (d, _) = asymptote(&s, -4, 5, 8).unwrap();
    for x in d.cnu.level_values.values() {
        assert!((x - 1.0).abs() < 1e-12, "{x}");
    }
    assert_eq!((d.kind, d.multiplicity), (AsymptoteKind::BilateralPlusUnilateral, Multiplicity::Count(1)));
}

#[test]
fn empty_stable_subtree_is_an_error() {
    let s = op(fam(Family::RootedPath), WeightRule::Constant(0.5));
    assert_eq!(asymptote(&s, 0, 6, 4).unwrap_err(), Error::StableSubtreeEmpty);
}

#[test]
fn intertwining_holds_on_windows() {
    for s in [
        op(fam(Family::RootlessBinary), WeightRule::Constant(std::f64::consts::FRAC_1_SQRT_2)),
        op(fam(Family::BilateralPath), WeightRule::ExpRay { scale: 1.0, center: -2 }),
        op(fam(Family::RootlessBinary), WeightRule::ExpRay { scale: 1.0, center: 1 }),
    ] {
        let (d, p) = asymptote(&s, -4, 4, 16).unwrap();
        let r = intertwining_residual(&s, &d, &p).unwrap();
        assert!(r.checked > 0 && r.skipped == 0);
        assert!(r.max_residual <= 10.0 * DEFAULT_TOL, "{}", r.max_residual);
    }
}

#[test]
fn adjoint_asymptote_examples() {
    let ones = op(fam(Family::BilateralPath), WeightRule::Constant(1.0));
    let w = TreeWindow::build(ones.model(), -3, 3, 4).unwrap();
    let a = adjoint_profile(&ones, &w, 64, DEFAULT_TOL).unwrap();
    let d = adjoint_isometric_asymptote(&ones, &a).unwrap();
    assert_eq!(d.kind, AdjointShiftKind::SimpleBilateral);
    assert!(d.coefficients.values().all(|c| *c == 1.0));

    let comb = op(
        fam(Family::Comb(Fork::comb(Some(2), Some(3)).unwrap())),
        map(&[(VertexId::Int(1), 0.6), (VertexId::Primed(1), 0.8)], 1.0),
    );
    let w = TreeWindow::build(comb.model(), -3, 3, 8).unwrap();
    let a = adjoint_profile(&comb, &w, 64, DEFAULT_TOL).unwrap();
    let d = adjoint_isometric_asymptote(&comb, &a).unwrap();
    assert_eq!((d.kind, d.last_level), (AdjointShiftKind::SimpleUnilateral, Some(3)));

    let rooted = halving_path();
    let w = TreeWindow::build(rooted.model(), 0, 5, 4).unwrap();
    let a = adjoint_profile(&rooted, &w, 64, DEFAULT_TOL).unwrap();
    assert_eq!(adjoint_isometric_asymptote(&rooted, &a).unwrap_err(), Error::AdjointStable);
}

#[test]
fn adjoint_coefficients_telescope_and_intertwine() {
    let mut values = BTreeMap::new();
    for (i, l) in (-6..=6i64).enumerate() {
        values.insert(VertexId::Int(l), 0.5 + 0.04 * i as f64);
    }
    let s = op(fam(Family::BilateralPath), WeightRule::Map { values, default: Some(1.0) });
    let w = TreeWindow::build(s.model(), -8, 8, 4).unwrap();
    let a = adjoint_profile(&s, &w, 64, DEFAULT_TOL).unwrap();
    let d = adjoint_isometric_asymptote(&s, &a).unwrap();
    for from in -6..=8i64 {
        for k in 1..=(from + 8) as usize {
            let want = (a.level_value(from).unwrap() / a.level_value(from - k as i64).unwrap()).sqrt();
            assert!((d.telescoped(from, k).unwrap() - want).abs() < 1e-12);
        }
    }
    let r = adjoint_intertwining_residual(&s, &d, &a).unwrap();
    assert_eq!(r.checked, d.coefficients.len());
    assert!(r.max_residual <= 10.0 * DEFAULT_TOL);

    let tilde = op(
        fam(Family::Tilde(Fork::tilde(false))),
        WeightRule::Rays {
            unprimed: Box::new(map(&[(VertexId::Int(1), 0.6), (VertexId::Int(3), 0.7), (VertexId::Int(-2), 0.9)], 1.0)),
            primed: Box::new(map(&[(VertexId::Primed(1), 0.75), (VertexId::Primed(2), 0.5)], 1.0)),
        },
    );
    let w = TreeWindow::build(tilde.model(), -4, 5, 8).unwrap();
    let a = adjoint_profile(&tilde, &w, 64, DEFAULT_TOL).unwrap();
    let d = adjoint_isometric_asymptote(&tilde, &a).unwrap();
    let r = adjoint_intertwining_residual(&tilde, &d, &a).unwrap();
    assert!(r.checked > 0 && r.max_residual <= 10.0 * DEFAULT_TOL, "{r:?}");
}

#[test]
fn similarity_to_isometries() {
    let check = |s: &ShiftOperator, lo, hi| {
        let w = TreeWindow::build(s.model(), lo, hi, 8).unwrap();
        let p = alpha_profile(s, &w, AlphaOptions::default()).unwrap();
        similar_to_isometry(s, &p, DEFAULT_ZERO_THRESHOLD).unwrap()
    };
    let d = check(&halving_path(), 0, 8);
    assert_eq!(d.decision, Decision::Yes);
    assert!((d.infimum.unwrap() - (-2f64).exp()).abs() < 1e-12);
    assert_eq!(check(&op(fam(Family::RootedPath), WeightRule::Constant(0.5)), 0, 8).decision, Decision::No);
    let v = |s: &str| VertexId::from(s);
    let finite = TreeModel::finite(&[v("r"), v("a")], &[(v("r"), v("a"))], None).unwrap();
    assert_eq!(check(&op(finite, WeightRule::Constant(0.9)), 0, 3).decision, Decision::No);
}

#[test]
fn similarity_to_coisometries() {
    let check = |s: &ShiftOperator| {
        let w = TreeWindow::build(s.model(), -3, 3, 8).unwrap();
        let a = adjoint_profile(s, &w, 64, DEFAULT_TOL).unwrap();
        similar_to_coisometry(s, &a).unwrap().decision
    };
    let tilde = op(fam(Family::Tilde(Fork::tilde(false))), WeightRule::Constant(0.5));
    assert_eq!(check(&tilde), Decision::No);
    assert_eq!(check(&op(fam(Family::BilateralPath), WeightRule::Constant(1.0))), Decision::Yes);
    assert_eq!(check(&op(fam(Family::BilateralPath), WeightRule::Constant(0.5))), Decision::No);
}
