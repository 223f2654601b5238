use super::*;
use crate::shift::WeightRule;
use crate::tree::TreeModel;

fn fork_op(family: Family, rule: WeightRule) -> ShiftOperator {
    ShiftOperator::new(TreeModel::Family(family), rule).unwrap()
}

fn tilde(rule: WeightRule) -> ShiftOperator {
    fork_op(Family::Tilde(Fork::tilde(false)), rule)
}

fn rays(unprimed: WeightRule, primed: WeightRule) -> WeightRule {
    WeightRule::Rays { unprimed: Box::new(unprimed), primed: Box::new(primed) }
}

fn window(op: &ShiftOperator, lo: i64, hi: i64) -> TreeWindow {
    TreeWindow::build(op.model(), lo, hi, 4).unwrap()
}

/// Deterministic weights in `[0.3, 1]` for both rays.
fn scattered(seed: u64) -> WeightRule {
    let mut s = seed;
    let mut next = || {
        s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        0.3 + 0.7 * ((s >> 11) as f64 / (1u64 << 53) as f64)
    };
    let mut values = BTreeMap::new();
    for k in -10..=30i64 {
        values.insert(VertexId::Int(k), next());
        if k >= 1 {
            values.insert(VertexId::Primed(k as u64), next());
        }
    }
    WeightRule::Map { values, default: Some(0.9) }
}

#[test]
fn g_vectors_are_orthogonal_and_shift_down() {
    for seed in 0..5 {
        let s = tilde(scattered(seed));
        let g: Vec<GVector> = (1..=25).map(|k| gvector(&s, k).unwrap()).collect();
        assert!(s.apply_adjoint(&g[0].vector).unwrap().norm() <= 1e-12 * g[0].norm);
        for k in 1..g.len() {
            let down = s.apply_adjoint(&g[k].vector).unwrap();
            assert!(down.sub(&g[k - 1].vector).norm() <= 1e-12 * g[k - 1].norm);
            for l in 0..k {
                assert_eq!(g[k].vector.dot(&g[l].vector), 0.0);
            }
        }
    }
    assert!(matches!(gvector(&tilde(WeightRule::Constant(1.0)), 0), Err(Error::ShapeMismatch(_))));
}

#[test]
fn leaf_similarity_examples() {
    let comb = |k0, j0, rule| fork_op(Family::Comb(Fork::comb(Some(k0), j0).unwrap()), rule);

    let s = comb(2, None, WeightRule::Constant(1.0));
    let w = build_leaf_similarity(&s, &window(&s, -3, 5)).unwrap();
    assert_eq!(w.residual, 0.0);
    for k in 1..=2 {
        assert!((gvector(&s, k).unwrap().norm - 2f64.sqrt()).abs() < 1e-15);
    }
    let TargetOperator::WPlusN { spine, nilpotent_dimension, nilpotent_weights } = &w.target else { panic!() };
    assert_eq!((*spine, *nilpotent_dimension), ("bilateral", 2));
    assert_eq!(nilpotent_weights, &vec![1.0]);
    assert_eq!(w.invertibility.mode, InvertibilityMode::Similar);
    assert_eq!(w.blocks.len(), 2);

    let s = comb(2, Some(4), rays(WeightRule::Constant(0.5), WeightRule::Constant(1.0)));
    let w = build_leaf_similarity(&s, &window(&s, -3, 4)).unwrap();
    let TargetOperator::WPlusN { spine, nilpotent_weights, .. } = &w.target else { panic!() };
    assert_eq!(*spine, "backward");
    assert!((nilpotent_weights[0] - 5f64.sqrt() / 17f64.sqrt()).abs() < 1e-15);
    assert!(w.residual <= 1e-12);
    // r_k = 2^k here, so the inverse bound grows with k but stays finite
    let last = w.blocks.last().unwrap();
    assert!((last.ratio - 4.0).abs() < 1e-15);
    assert!((last.inverse_norm_bound - 34f64.sqrt()).abs() < 1e-12);
    assert_eq!(w.invertibility.column_rank, w.dimension());

    let t = tilde(WeightRule::Constant(0.5));
    assert!(matches!(build_leaf_similarity(&t, &window(&t, 0, 3)), Err(Error::ShapeMismatch(_))));
    let leafless = fork_op(Family::Comb(Fork::comb(None, None).unwrap()), WeightRule::Constant(0.5));
    assert!(matches!(build_leaf_similarity(&leafless, &window(&leafless, 0, 3)), Err(Error::ShapeMismatch(_))));
}

#[test]
fn block_certificates_invert() {
    for r in [0.0, 0.3, 1.0, 7.5, 1e4] {
        let b = BlockCertificate::new(1, r);
        let (m, inv) = (b.matrix(), b.inverse());
        for (i, row) in m.iter().enumerate() {
            for j in 0..2 {
                let p: f64 = row.iter().zip(&inv).map(|(x, inv_row)| x * inv_row[j]).sum();
                assert!((p - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        assert!((b.determinant - (m[0][0] * m[1][1] - m[0][1] * m[1][0])).abs() < 1e-15);
        let frob = inv.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
        assert!(frob <= b.inverse_norm_bound * (1.0 + 1e-15));
    }
}

#[test]
fn ratio_examples() {
    let same = tilde(WeightRule::Constant(0.7));
    assert_eq!(
        ratio_bounded(&same, 64, DEFAULT_BLOWUP).unwrap(),
        RatioCertificate::Bounded { sup: 1.0, certified: true }
    );

    let blow = tilde(rays(WeightRule::Constant(0.5), WeightRule::Constant(1.0)));
    assert_eq!(
        ratio_bounded(&blow, 64, DEFAULT_BLOWUP).unwrap(),
        RatioCertificate::UnboundedEvidence { k: 20, value: 2f64.powi(20) }
    );

    let shrinking =
        tilde(rays(WeightRule::Constant(1.0), WeightRule::Geometric { scale: 1.0, ratio: 0.5, start: None }));
    assert_eq!(
        ratio_bounded(&shrinking, 16, DEFAULT_BLOWUP).unwrap(),
        RatioCertificate::Bounded { sup: 1.0, certified: true }
    );

    // the spine tail sum bounds the ratio past the horizon
    let tail = tilde(rays(WeightRule::Geometric { scale: 1.0, ratio: 0.5, start: None }, WeightRule::Constant(1.0)));
    let RatioCertificate::Bounded { sup, certified: true } = ratio_bounded(&tail, 4, DEFAULT_BLOWUP).unwrap() else {
        panic!()
    };
    assert!((sup - 1f64.exp()).abs() < 1e-12, "sup = {sup}");

    // listed weights end at level 30 and both rays share the default after it
    let listed = tilde(scattered(1));
    let RatioCertificate::Bounded { certified, .. } = ratio_bounded(&listed, 64, 1e300).unwrap() else { panic!() };
    assert!(certified);
    let RatioCertificate::Bounded { certified, .. } = ratio_bounded(&listed, 16, 1e300).unwrap() else { panic!() };
    assert!(!certified);
}

#[test]
fn tilde_quasiaffinity_examples() {
    let s = tilde(WeightRule::Constant(1.0));
    let w = build_tilde_quasiaffinity(&s, &window(&s, -4, 6), 64, DEFAULT_BLOWUP).unwrap();
    assert_eq!(w.residual, 0.0);
    let TargetOperator::WTilde { primed_weights } = &w.target else { panic!() };
    assert!(primed_weights.iter().all(|x| (x - 1.0).abs() < 1e-15));
    assert_eq!(w.invertibility.mode, InvertibilityMode::Similar);
    assert!((w.invertibility.uniform_inverse_bound.unwrap() - 2.0).abs() < 1e-15);
    assert_eq!(w.invertibility.column_rank, w.dimension());

    let s = tilde(rays(WeightRule::Constant(0.5), WeightRule::Constant(1.0)));
    let w = build_tilde_quasiaffinity(&s, &window(&s, -4, 6), 64, DEFAULT_BLOWUP).unwrap();
    assert!(w.residual <= 1e-12);
    assert_eq!(w.invertibility.mode, InvertibilityMode::QuasiaffineOnly);
    assert_eq!(w.invertibility.uniform_inverse_bound, None);
    assert_eq!(w.invertibility.column_rank, w.dimension());

    let json = serde_json::to_value(&w).unwrap();
    assert_eq!(json["invertibility"]["mode"], "quasiaffine-only");
    assert_eq!(json["ratio_certificate"]["kind"], "unbounded-evidence");
    assert_eq!(json["blocks"].as_array().unwrap().len(), 6);

    let big = tilde(WeightRule::Constant(1.2));
    assert!(matches!(
        build_tilde_quasiaffinity(&big, &window(&big, 0, 3), 64, DEFAULT_BLOWUP),
        Err(Error::NotAContraction { .. })
    ));
}

#[test]
fn krylov_ranks_transfer_through_the_witness() {
    for seed in 0..4 {
        let s = tilde(scattered(seed));
        let w = build_tilde_quasiaffinity(&s, &window(&s, -3, 6), 64, DEFAULT_BLOWUP).unwrap();
        let v: SparseVector = w.basis().iter().enumerate().map(|(i, u)| (u.clone(), 1.0 / (1.0 + i as f64))).collect();
        let t = krylov_transfer(&w, &v, crate::linalg::DEFAULT_RANK_TOL, 512).unwrap();
        assert!(t.window_residual <= 1e-12, "{t:?}");
        assert_eq!(t.shift_rank, t.target_rank);
    }
}

#[test]
fn direct_sum_examples() {
    let s = tilde(WeightRule::Constant(1.0));
    let d = direct_sum_decomposition(&s, &SparseVector::basis(VertexId::Primed(1))).unwrap();
    assert_eq!(d.nu[&1], 1.0);
    assert!((d.mu[&1] + 2f64.sqrt()).abs() < 1e-15);
    assert!(d.residual <= 1e-12);

    let x = SparseVector::basis(VertexId::Int(5));
    let d = direct_sum_decomposition(&s, &x).unwrap();
    assert_eq!(d.e_part, x);
    assert!(d.g_part.is_empty() && d.mu.is_empty());

    let s = tilde(scattered(7));
    let g3 = gvector(&s, 3).unwrap();
    let d = direct_sum_decomposition(&s, &g3.vector).unwrap();
    assert!(d.e_part.max_abs() <= 1e-12 * g3.norm);
    assert!((d.mu[&3] - g3.norm).abs() <= 1e-12 * g3.norm);
    assert!(d.residual <= 1e-12 * g3.norm);
}

#[test]
fn mu_sum_is_bounded_by_the_primed_mass() {
    let s = tilde(scattered(3));
    let x: SparseVector =
        (1..=20u64).flat_map(|k| [(VertexId::Primed(k), 1.0 / k as f64), (VertexId::Int(k as i64 - 5), 0.5)]).collect();
    let d = direct_sum_decomposition(&s, &x).unwrap();
    let direct: f64 = (1..=20u64)
        .map(|k| {
            let (_, b) = inverse_products(&s, k).unwrap();
            (x.get(&VertexId::Primed(k)) / b).powi(2)
        })
        .sum();
    assert!((d.mu_weighted_sum - direct).abs() <= 1e-12 * direct);
    assert!(d.mu_weighted_sum <= d.primed_mass);
    assert!(d.residual <= 1e-12);

    // near-zero primed weights crush the g-part but leave the decomposition exact
    let thin = tilde(rays(WeightRule::Constant(0.9), WeightRule::Constant(1e-3)));
    let d = direct_sum_decomposition(&thin, &x).unwrap();
    assert!(d.mu_weighted_sum <= 1e-6 * d.primed_mass);
    assert!(d.residual <= 1e-12);
}

#[test]
fn unbounded_ratios_leave_vectors_outside_the_sum() {
    let s = tilde(rays(WeightRule::Constant(0.5), WeightRule::Constant(1.0)));
    let short = unbounded_witness(&s, 16).unwrap();
    let long = unbounded_witness(&s, 64).unwrap();
    assert!(long.norm_sq < 1.21);
    let harmonic: f64 = (1..=long.indices.len()).map(|m| 1.0 / m as f64).sum();
    assert!(long.nu_sq_sum > harmonic);
    assert!(long.nu_sq_sum > short.nu_sq_sum + 1.0);
}
