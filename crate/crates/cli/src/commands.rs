use std::fs;
use std::path::Path;

use serde_json::json;

use treeshift::asymptote::{
    adjoint_intertwining_residual, adjoint_isometric_asymptote, intertwining_residual, isometric_asymptote_with_depth,
    similar_to_coisometry, similar_to_isometry, AsymptoteDescriptor,
};
use treeshift::asymptotics::{
    adjoint_profile, alpha_profile, classify, stable_subtree, AdjointClass, AdjointProfile, AlphaOptions,
    AsymptoticProfile, ClassificationC, ForwardClass, ProfileEntry, StableSubtree, Thresholds,
    DEFAULT_ONE_SIDED_THRESHOLD,
};
use treeshift::cyclicity::{
    backward_cokernel, construct_backward_cyclic, construct_with_one_zero, cyclicity_verdict, verify_cyclic_candidate,
    BackwardShiftSpec, Term, VerdictSubject, Verification,
};
use treeshift::linalg::cokernel_dimension;
use treeshift::shift::{ShiftOperator, SparseVector, WeightSpec};
use treeshift::similarity::{
    build_leaf_similarity, build_tilde_quasiaffinity, krylov_transfer, RatioCertificate, SimilarityWitness,
};
use treeshift::tree::{Family, Multiplicity, TreeModel, TreeWindow};

use crate::report::Report;
use crate::{CliError, Common, CyclicArgs, OracleArgs, SimilarityArgs};

type Result<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })
}

fn load_tree(path: &Path) -> Result<TreeModel> {
    Ok(TreeModel::parse(&read(path)?)?)
}

struct Loaded {
    op: ShiftOperator,
    window: TreeWindow,
}

fn load(c: &Common) -> Result<Loaded> {
    let tree = c.tree.as_deref().ok_or_else(|| CliError::Usage("--tree is required".into()))?;
    let weights = c.weights.as_deref().ok_or_else(|| CliError::Usage("--weights is required".into()))?;
    let model = load_tree(tree)?;
    let rule = WeightSpec::parse(&read(weights)?)?;
    let (lo, hi) = c.levels.unwrap_or(match &model {
        TreeModel::Finite(t) => (0, t.depth()),
        m if m.is_rooted() => (0, 8),
        _ => (-4, 6),
    });
    let window = TreeWindow::build(&model, lo, hi, c.breadth)?;
    if window.len() > c.cap {
        return Err(treeshift::Error::WindowTooLarge { size: window.len(), cap: c.cap }.into());
    }
    let op = ShiftOperator::new(model, rule)?;
    op.check_window(&window)?;
    Ok(Loaded { op, window })
}

fn options(c: &Common) -> AlphaOptions {
    AlphaOptions { tol: c.tol, max_depth: c.depth, closed_forms: true }
}

fn thresholds(c: &Common) -> Thresholds {
    Thresholds { zero: c.zero_threshold, one_sided: DEFAULT_ONE_SIDED_THRESHOLD.max(c.zero_threshold) }
}

fn shape(model: &TreeModel) -> String {
    format!(
        "{}, {}, Br={}",
        model.describe(),
        if model.is_rooted() { "rooted" } else { "rootless" },
        model.branching_index()
    )
}

pub fn validate(tree: &Path) -> Result<Report> {
    let model = load_tree(tree)?;
    let leaves: Vec<String> = model.leaves().iter().map(ToString::to_string).collect();
    let mut r = Report::default();
    r.push(
        "tree",
        format!("{}\nleaves: {}", shape(&model), if leaves.is_empty() { "none".into() } else { leaves.join(" ") }),
        json!({
            "kind": model.describe(),
            "rooted": model.is_rooted(),
            "root": model.root().map(|v| v.to_string()),
            "leaves": leaves,
            "branching_index": model.branching_index(),
        }),
    );
    Ok(r)
}

fn entry_line(label: &str, e: &ProfileEntry) -> String {
    format!(
        "{label} {:>12}  {:.12e}  [{:.6e}, {:.6e}]  {} depth {} {}",
        e.vertex.to_string(),
        e.estimate,
        e.lower,
        e.upper,
        e.status.label(),
        e.depth_used,
        e.provenance
    )
}

fn push_profile(r: &mut Report, kind: &str, profile: &AsymptoticProfile) {
    for e in &profile.entries {
        r.push(kind, entry_line(kind, e), e);
    }
}

fn c_ij(class: &ClassificationC) -> Option<String> {
    let i = match class.forward {
        ForwardClass::C0Dot => '0',
        ForwardClass::C1Dot => '1',
        _ => return None,
    };
    let j = match class.adjoint {
        AdjointClass::CDot0 => '0',
        AdjointClass::CDot1 => '1',
        _ => return None,
    };
    Some(format!("C_{{{i}{j}}}"))
}

fn norm_record(r: &mut Report, op: &ShiftOperator, window: &TreeWindow) -> Result<()> {
    let norm = op.operator_norm(window)?;
    r.push(
        "norm",
        format!(
            "norm: {} ({}), contraction: {}",
            norm.value,
            if norm.exact { "exact" } else { "window" },
            norm.is_contraction()
        ),
        json!({ "value": norm.value, "exact": norm.exact, "contraction": norm.is_contraction() }),
    );
    if norm.is_contraction() {
        Ok(())
    } else {
        Err(treeshift::Error::NotAContraction { norm: norm.value }.into())
    }
}

fn stable_record(r: &mut Report, stable: &StableSubtree) {
    let br = stable.branching;
    r.push(
        "stable",
        format!(
            "stable subtree: {} window vertices, Br(T')={}{}",
            stable.members.len(),
            br.value,
            if br.exact { "" } else { " (window partial sum)" }
        ),
        stable,
    );
}

fn asymptote_line(d: &AsymptoteDescriptor) -> String {
    let kind = serde_json::to_value(d.kind).expect("kind serializes");
    format!("U: {}, multiplicity {}", kind.as_str().unwrap_or_default(), d.multiplicity)
}

pub fn analyze(c: &Common) -> Result<Report> {
    let Loaded { op, window } = load(c)?;
    let mut r = Report::default();
    r.note(format!("{} on levels {}:{}", shape(op.model()), window.min_level(), window.max_level()));
    norm_record(&mut r, &op, &window)?;
    let alpha = alpha_profile(&op, &window, options(c))?;
    push_profile(&mut r, "alpha", &alpha);
    let stable = stable_subtree(&op, &window, &alpha, c.zero_threshold)?;
    stable_record(&mut r, &stable);
    let adjoint = adjoint_profile(&op, &window, c.depth, c.tol)?;
    push_profile(&mut r, "a", &adjoint.profile);
    let class = classify(&op, &alpha, &adjoint, thresholds(c));
    let label = c_ij(&class);
    let mut text = format!("classification: {} ∧ {}", class.forward, class.adjoint);
    if let Some(l) = &label {
        text.push_str(&format!(" = {l}"));
    }
    text.push_str(&format!("\nprovenance: forward {}, adjoint {}", class.forward_provenance, class.adjoint_provenance));
    for n in &class.notes {
        text.push_str(&format!("\nnote: {n}"));
    }
    let mut value = serde_json::to_value(&class).expect("classification serializes");
    value["c_ij"] = json!(label);
    r.push("classification", text, value);
    if !stable.is_empty() {
        let d = isometric_asymptote_with_depth(&op, &alpha, &stable, c.depth)?;
        r.push("asymptote", asymptote_line(&d), &d);
    }
    for (kind, decision) in [
        ("similar-to-isometry", similar_to_isometry(&op, &alpha, c.zero_threshold)?),
        ("similar-to-coisometry", similar_to_coisometry(&op, &adjoint)?),
    ] {
        let d = serde_json::to_value(decision.decision).expect("decision serializes");
        r.push(kind, format!("{kind}: {} ({})", d.as_str().unwrap_or_default(), decision.reason), &decision);
    }
    Ok(r)
}

pub fn asymptote(c: &Common) -> Result<Report> {
    let Loaded { op, window } = load(c)?;
    let mut r = Report::default();
    norm_record(&mut r, &op, &window)?;
    let alpha = alpha_profile(&op, &window, options(c))?;
    let stable = stable_subtree(&op, &window, &alpha, c.zero_threshold)?;
    stable_record(&mut r, &stable);
    let d = isometric_asymptote_with_depth(&op, &alpha, &stable, c.depth)?;
    for (v, b) in &d.beta {
        let text = match b {
            Some(b) => format!("beta {:>12}  {b:.12e}", v.to_string()),
            None => format!("beta {:>12}  unsettled", v.to_string()),
        };
        r.push("beta", text, json!({ "vertex": v, "beta": b }));
    }
    r.push(
        "asymptote",
        format!(
            "{}\ncnu test: {:e} at level {} (depth {})\nisometry residual: {:e}",
            asymptote_line(&d),
            d.cnu.value,
            d.cnu.level,
            d.cnu.depth,
            d.isometry_residual
        ),
        &d,
    );
    let res = intertwining_residual(&op, &d, &alpha)?;
    r.push(
        "intertwining",
        format!(
            "intertwining residual: {:e} over {} vertices ({} skipped)",
            res.max_residual, res.checked, res.skipped
        ),
        res,
    );
    Ok(r)
}

fn push_levels(r: &mut Report, adjoint: &AdjointProfile) {
    for h in adjoint.h.values() {
        r.push(
            "a-level",
            format!("a {:>4}  {:.12e}  complete {} exact {}", h.level, h.norm_sq, h.complete, h.exact_products),
            json!({ "level": h.level, "value": h.norm_sq, "complete": h.complete, "exact_products": h.exact_products }),
        );
    }
}

pub fn adjoint_asymptote(c: &Common) -> Result<Report> {
    let Loaded { op, window } = load(c)?;
    let mut r = Report::default();
    norm_record(&mut r, &op, &window)?;
    let adjoint = adjoint_profile(&op, &window, c.depth, c.tol)?;
    push_levels(&mut r, &adjoint);
    let d = adjoint_isometric_asymptote(&op, &adjoint)?;
    let kind = serde_json::to_value(d.kind).expect("kind serializes");
    let mut text = format!("U_*: {}", kind.as_str().unwrap_or_default());
    if let Some(l) = d.last_level {
        text.push_str(&format!(", last level {l}"));
    }
    for (l, coeff) in &d.coefficients {
        text.push_str(&format!("\ncoefficient {l:>4}  {coeff:.12e}"));
    }
    r.push("adjoint-asymptote", text, &d);
    let res = adjoint_intertwining_residual(&op, &d, &adjoint)?;
    r.push(
        "intertwining",
        format!("intertwining residual: {:e} over {} levels ({} skipped)", res.max_residual, res.checked, res.skipped),
        res,
    );
    Ok(r)
}

fn push_terms(r: &mut Report, terms: &[Term]) {
    for t in terms {
        r.push("term", format!("term e[{}][{}]  {:.17e}", t.branch, t.index, t.coefficient), t);
    }
}

fn push_verification(r: &mut Report, v: &Verification) {
    r.push(
        "verification",
        format!(
            "Krylov rank {} of {} on indices 0..={} ({} columns), residual {:e}: {}",
            v.rank,
            v.dimension,
            v.window,
            v.columns,
            v.residual,
            if v.cyclic { "cyclic on the window" } else { "rank deficient" }
        ),
        v,
    );
}

pub fn cyclic(a: &CyclicArgs) -> Result<Report> {
    let mut r = Report::default();
    if let Some(path) = &a.backward {
        let spec = BackwardShiftSpec::parse(&read(path)?)?;
        let verdict = cyclicity_verdict(&VerdictSubject::Backward(&spec));
        r.push("verdict", format!("verdict: {verdict}"), &verdict);
        match spec.zeros().len() {
            0 => {
                let cand = construct_backward_cyclic(&spec, a.terms)?;
                push_terms(&mut r, &cand.terms);
                r.push(
                    "construction",
                    format!("sigma_m <= 2^-m for all m: {}", cand.monotone),
                    json!({ "sigmas": cand.sigmas, "monotone": cand.monotone, "rescalings": cand.rescalings }),
                );
                let v = verify_cyclic_candidate(&spec, &cand.terms, a.window, a.common.rank_tol, a.common.cap)?;
                push_verification(&mut r, &v);
            }
            1 => {
                let split = construct_with_one_zero(&spec, a.terms)?;
                push_terms(&mut r, &split.terms);
                let v = verify_cyclic_candidate(&spec, &split.terms, a.window, a.common.rank_tol, a.common.cap)?;
                push_verification(&mut r, &v);
            }
            _ => {
                let k = backward_cokernel(&spec, a.window, a.common.cap)?;
                r.push(
                    "cokernel",
                    format!("cokernel dimension {} ({} boundary, {} adjusted)", k.raw, k.boundary, k.adjusted),
                    k,
                );
            }
        }
        return Ok(r);
    }
    let c = &a.common;
    let Loaded { op, window } = load(c)?;
    norm_record(&mut r, &op, &window)?;
    let alpha = alpha_profile(&op, &window, options(c))?;
    let adjoint = adjoint_profile(&op, &window, c.depth, c.tol)?;
    let class = classify(&op, &alpha, &adjoint, thresholds(c));
    r.note(format!("{}; classification {}", shape(op.model()), class));
    let verdict = cyclicity_verdict(&VerdictSubject::Tree { op: &op, classification: &class });
    r.push("verdict", format!("verdict: {verdict}"), &verdict);
    Ok(r)
}

fn ratio_line(cert: &RatioCertificate) -> String {
    match cert {
        RatioCertificate::Bounded { sup, certified } => {
            format!("ratio bound: sup {sup:e} ({})", if *certified { "certified" } else { "numerical" })
        }
        RatioCertificate::UnboundedEvidence { k, value } => format!("ratio unbounded: r_{k} = {value:e}"),
    }
}

fn witness(op: &ShiftOperator, window: &TreeWindow, a: &SimilarityArgs) -> Result<SimilarityWitness> {
    Ok(match op.model().family() {
        Some(Family::Tilde(_)) => build_tilde_quasiaffinity(op, window, a.horizon, a.blowup)?,
        _ => build_leaf_similarity(op, window)?,
    })
}

pub fn similarity(a: &SimilarityArgs) -> Result<Report> {
    let c = &a.common;
    let Loaded { op, window } = load(c)?;
    let mut r = Report::default();
    let x = witness(&op, &window, a)?;
    let mode = serde_json::to_value(x.invertibility.mode).expect("mode serializes");
    r.push(
        "witness",
        format!(
            "{}: residual {:e}, mode {}, {} blocks, {} fixed vertices\n{}\ncondition estimate {:e}, rank {} of {}",
            x.construction,
            x.residual,
            mode.as_str().unwrap_or_default(),
            x.blocks.len(),
            x.fixed.len(),
            ratio_line(&x.ratio_certificate),
            x.invertibility.condition_estimate,
            x.invertibility.column_rank,
            x.invertibility.dimension
        ),
        &x,
    );
    let ones: SparseVector = x.basis().iter().map(|v| (v.clone(), 1.0)).collect();
    let t = krylov_transfer(&x, &ones, c.rank_tol, c.cap)?;
    r.push(
        "transfer",
        format!(
            "Krylov rank of the all-ones vector: {} under S, {} under the target, window residual {:e}",
            t.shift_rank, t.target_rank, t.window_residual
        ),
        t,
    );
    Ok(r)
}

/// `P_W S^n e_u = M^n e_u` and `P_W S*^n e_u = (Mᵀ)^n e_u` hold exactly
/// because the window is parent-closed.
pub fn oracle(a: &OracleArgs) -> Result<Report> {
    let c = &a.common;
    let Loaded { op, window } = load(c)?;
    let dense = op.dense_truncation(&window, c.cap)?;
    let m = &dense.matrix;
    let mt = m.transpose();
    let mut apply_diff: f64 = 0.0;
    let mut adjoint_diff: f64 = 0.0;
    let mut power_diff: f64 = 0.0;
    for (j, u) in dense.basis.iter().enumerate() {
        let e = SparseVector::basis(u.clone());
        apply_diff = apply_diff.max((dense.vector(&op.apply(&e)?) - m.column(j)).amax());
        adjoint_diff = adjoint_diff.max((dense.vector(&op.apply_adjoint(&e)?) - mt.column(j)).amax());
        let (mut fwd, mut back) = (dense.vector(&e), dense.vector(&e));
        for n in 0..=a.powers {
            power_diff = power_diff.max((dense.vector(&op.power_closed(u, n)?) - &fwd).amax());
            power_diff = power_diff.max((dense.vector(&op.adjoint_power_closed(u, n)?) - &back).amax());
            fwd = m * fwd;
            back = &mt * back;
        }
    }
    let norm = op.operator_norm(&window)?;
    let dense_norm = m.clone().svd(false, false).singular_values.max();
    let norm_ok = dense_norm <= norm.value * (1.0 + 1e-12) + c.tol;
    let diff_ok = apply_diff.max(adjoint_diff).max(power_diff) <= c.tol;
    let mut r = Report::default();
    r.push(
        "oracle",
        format!(
            "dimension {}: apply {:e}, adjoint {:e}, powers 0..={} {:e}, dense norm {} <= norm {}: {}",
            dense.basis.len(),
            apply_diff,
            adjoint_diff,
            a.powers,
            power_diff,
            dense_norm,
            norm.value,
            norm_ok
        ),
        json!({
            "dimension": dense.basis.len(),
            "apply_max_diff": apply_diff,
            "adjoint_max_diff": adjoint_diff,
            "powers": a.powers,
            "power_max_diff": power_diff,
            "dense_norm": dense_norm,
            "norm": norm.value,
            "agree": diff_ok && norm_ok,
        }),
    );
    let mut corank_ok = true;
    if let TreeModel::Finite(t) = op.model() {
        if window.len() == t.len() {
            let cokernel = cokernel_dimension(m, c.rank_tol, c.cap)?;
            let expected = op.model().branching_index().plus(1);
            corank_ok = Multiplicity::Count(cokernel) == expected;
            r.push(
                "corank",
                format!("cokernel dimension {cokernel}, 1 + Br = {expected}: {corank_ok}"),
                json!({ "cokernel": cokernel, "expected": expected, "agree": corank_ok }),
            );
        }
    }
    if diff_ok && norm_ok && corank_ok {
        Ok(r)
    } else {
        Err(CliError::Oracle(Box::new(r)))
    }
}
