//! Weighted backward shifts `B e_{j,0} = 0`, `B e_{j,k} = w_{j,k−1} e_{j,k−1}`
//! on finitely many branches, with an explicit cyclic vector
//! `f = Σ_l ξ_l e_{j_l,k_l}` and a Krylov witness for it on a window.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{check_cap, equilibrate, numerical_rank, projection_residual, DEFAULT_RANK_TOL};

/// Multiplier applied to the tail while rounding keeps `Σ_m` above `2^{−m}`.
const NUDGE: f64 = 1.0 - 1.0 / (1u64 << 50) as f64;
const MAX_NUDGES: usize = 64;

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackwardShiftSpec {
    /// `weights[j][i] = w_{j,i}`.
    pub weights: Vec<Vec<f64>>,
    /// `w_{j,i}` for every `i` past the listed ones.
    #[serde(default = "one")]
    pub tail: f64,
}

/// One basis coefficient `c · e_{branch,index}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Term {
    pub branch: usize,
    pub index: usize,
    pub coefficient: f64,
}

impl BackwardShiftSpec {
    pub fn new(weights: Vec<Vec<f64>>, tail: f64) -> Result<Self> {
        let spec = BackwardShiftSpec { weights, tail };
        spec.validate()?;
        Ok(spec)
    }

    pub fn uniform(branches: usize, w: f64) -> Result<Self> {
        Self::new(vec![Vec::new(); branches], w)
    }

    pub fn parse(json: &str) -> Result<Self> {
        let spec: BackwardShiftSpec =
            serde_json::from_str(json).map_err(|e| Error::Input(format!("backward shift spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.weights.is_empty() {
            return Err(Error::WeightRule("a backward shift needs at least one branch".into()));
        }
        if !(self.tail > 0.0 && self.tail <= 1.0) {
            return Err(Error::WeightRule(format!("tail weight must lie in (0, 1], got {}", self.tail)));
        }
        for (j, ws) in self.weights.iter().enumerate() {
            if let Some((i, w)) = ws.iter().enumerate().find(|(_, w)| !(0.0..=1.0).contains(*w)) {
                return Err(Error::WeightRule(format!("w[{j}][{i}] = {w} is outside [0, 1]")));
            }
        }
        Ok(())
    }

    pub fn branch_count(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, branch: usize, i: usize) -> f64 {
        self.weights[branch].get(i).copied().unwrap_or(self.tail)
    }

    /// Positions `(branch, i)` with `w_{branch,i} = 0`.
    pub fn zeros(&self) -> Vec<(usize, usize)> {
        let mut z = Vec::new();
        for (j, ws) in self.weights.iter().enumerate() {
            z.extend(ws.iter().enumerate().filter(|(_, w)| **w == 0.0).map(|(i, _)| (j, i)));
        }
        z
    }

    /// `∏_{i=lo}^{hi−1} w_{branch,i}`.
    pub fn product(&self, branch: usize, lo: usize, hi: usize) -> f64 {
        (lo..hi).map(|i| self.weight(branch, i)).product()
    }

    pub fn window_dimension(&self, window: usize) -> usize {
        self.branch_count() * (window + 1)
    }

    /// Row of `e_{branch,index}` in window matrices, branch-major.
    pub fn window_index(&self, window: usize, branch: usize, index: usize) -> usize {
        branch * (window + 1) + index
    }

    /// Matrix of `B` compressed to indices `0..=window` on every branch.
    pub fn window_matrix(&self, window: usize, cap: usize) -> Result<DMatrix<f64>> {
        let d = self.window_dimension(window);
        check_cap(d, cap)?;
        let mut m = DMatrix::zeros(d, d);
        for j in 0..self.branch_count() {
            for k in 1..=window {
                m[(self.window_index(window, j, k - 1), self.window_index(window, j, k))] = self.weight(j, k - 1);
            }
        }
        Ok(m)
    }

    /// One application of `B`.
    pub fn apply(&self, terms: &[Term]) -> Vec<Term> {
        terms
            .iter()
            .filter(|t| t.index > 0)
            .map(|t| Term { index: t.index - 1, coefficient: t.coefficient * self.weight(t.branch, t.index - 1), ..*t })
            .filter(|t| t.coefficient != 0.0)
            .collect()
    }

    /// `P_W B^n f` for `n = 0..columns`, one column each.
    pub fn projected_orbit(&self, terms: &[Term], window: usize, columns: usize) -> DMatrix<f64> {
        let d = self.window_dimension(window);
        let mut m = DMatrix::zeros(d, columns);
        for t in terms {
            let mut c = t.coefficient;
            for n in 0..columns.min(t.index + 1) {
                let r = t.index - n;
                if r <= window {
                    m[(self.window_index(window, t.branch, r), n)] += c;
                }
                if r > 0 {
                    c *= self.weight(t.branch, r - 1);
                }
            }
        }
        m
    }
}

/// `k_l = stride · l(l+1)/2` and round-robin branches, `l = 1..=terms`.
pub fn schedule(branches: usize, terms: usize) -> Vec<(usize, usize)> {
    (1..=terms).map(|l| ((l - 1) % branches, branches * l * (l + 1) / 2)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Rescaling {
    pub m: usize,
    /// `Σ_m` before rescaling.
    pub sigma: f64,
    /// Divisor `sqrt(2^m Σ_m)` applied to every later coefficient.
    pub divisor: f64,
    /// Extra `(1 − 2^{−50})` multipliers needed after rounding.
    pub nudges: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CyclicCandidate {
    pub terms: Vec<Term>,
    pub rescalings: Vec<Rescaling>,
    /// Final `Σ_1, …, Σ_L`.
    pub sigmas: Vec<f64>,
    /// No rescaling raised an earlier `Σ_j`.
    pub monotone: bool,
}

impl CyclicCandidate {
    /// Coefficient records, one JSON object per line.
    pub fn to_json_lines(&self) -> String {
        self.terms.iter().map(|t| serde_json::to_string(t).expect("terms serialize")).collect::<Vec<_>>().join("\n")
    }
}

/// `Σ_m = max_{k_{m−1} < k ≤ k_m} Σ_{l>m} |ξ_l P_l(k) / (ξ_m P_m(k))|²` over
/// the listed terms, where `P_l(k) = ∏_{i=k_l−k}^{k_l−1} w_{j_l,i}` and
/// `k_0 = −1`; `m` counts from 1.
pub fn sigma_m(spec: &BackwardShiftSpec, terms: &[Term], m: usize) -> f64 {
    let here = &terms[m - 1];
    let first = if m == 1 { 0 } else { terms[m - 2].index + 1 };
    let scaled = |t: &Term| t.coefficient * spec.product(t.branch, t.index - first, t.index);
    let mut base = scaled(here);
    let mut later: Vec<f64> = terms[m..].iter().map(scaled).collect();
    let mut best: f64 = 0.0;
    for k in first..=here.index {
        if k > first {
            base *= spec.weight(here.branch, here.index - k);
            for (x, t) in later.iter_mut().zip(&terms[m..]) {
                *x *= spec.weight(t.branch, t.index - k);
            }
        }
        best = best.max(later.iter().map(|x| (x / base).powi(2)).sum());
    }
    best
}

/// Builds `f` for a backward shift with positive weights on the first `k_L`
/// indices of every branch: coefficients start at `2^{−l}` and, for
/// `m = 1..=L` in order, every later coefficient is divided by
/// `sqrt(2^m Σ_m)` whenever `Σ_m > 2^{−m}`.
pub fn construct_backward_cyclic(spec: &BackwardShiftSpec, terms: usize) -> Result<CyclicCandidate> {
    let branches = spec.branch_count();
    let required = 4 * branches;
    if terms < required {
        return Err(Error::ScheduleTooShort { terms, required });
    }
    let slots = schedule(branches, terms);
    let reach = slots.last().expect("nonempty schedule").1;
    for j in 0..branches {
        if let Some(i) = (0..reach).find(|&i| spec.weight(j, i) == 0.0) {
            return Err(Error::ZeroWeight { branch: j, index: i });
        }
    }
    let mut f: Vec<Term> = slots
        .iter()
        .enumerate()
        .map(|(l, &(branch, index))| Term { branch, index, coefficient: 0.5f64.powi(l as i32 + 1) })
        .collect();
    let mut rescalings = Vec::new();
    let mut monotone = true;
    for m in 1..=terms {
        let bound = 0.5f64.powi(m as i32);
        let sigma = sigma_m(spec, &f, m);
        if sigma <= bound {
            continue;
        }
        let before: Vec<f64> = (1..m).map(|j| sigma_m(spec, &f, j)).collect();
        let divisor = (2f64.powi(m as i32) * sigma).sqrt();
        for t in &mut f[m..] {
            t.coefficient /= divisor;
        }
        let mut nudges = 0;
        while sigma_m(spec, &f, m) > bound && nudges < MAX_NUDGES {
            for t in &mut f[m..] {
                t.coefficient *= NUDGE;
            }
            nudges += 1;
        }
        monotone &= before.iter().enumerate().all(|(j, b)| sigma_m(spec, &f, j + 1) <= *b);
        rescalings.push(Rescaling { m, sigma, divisor, nudges });
    }
    let sigmas = (1..=terms).map(|m| sigma_m(spec, &f, m)).collect();
    Ok(CyclicCandidate { terms: f, rescalings, sigmas, monotone })
}

/// Candidate for a backward shift with exactly one zero weight `w_{j,z}`:
/// the branch splits into a nilpotent block on `0..=z` and a backward shift
/// on `z+1..`, and `f` is the positive-weight candidate of the remainder
/// plus `e_{j,z}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitCandidate {
    pub zero: (usize, usize),
    /// Positive-weight spec with branch `j` replaced by its part past the zero.
    pub reduced: BackwardShiftSpec,
    pub core: CyclicCandidate,
    /// `f ⊕ e_{j,z}` in the original indexing.
    pub terms: Vec<Term>,
}

pub fn construct_with_one_zero(spec: &BackwardShiftSpec, terms: usize) -> Result<SplitCandidate> {
    let zeros = spec.zeros();
    let &[(branch, z)] = zeros.as_slice() else {
        return Err(Error::WeightRule(format!("expected exactly one zero weight, found {}", zeros.len())));
    };
    let mut weights = spec.weights.clone();
    weights[branch] = spec.weights[branch][z + 1..].to_vec();
    let reduced = BackwardShiftSpec::new(weights, spec.tail)?;
    let core = construct_backward_cyclic(&reduced, terms)?;
    let mut out: Vec<Term> = core
        .terms
        .iter()
        .map(|t| if t.branch == branch { Term { index: t.index + z + 1, ..*t } } else { *t })
        .collect();
    out.push(Term { branch, index: z, coefficient: 1.0 });
    Ok(SplitCandidate { zero: (branch, z), reduced, core, terms: out })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verification {
    pub window: usize,
    pub dimension: usize,
    pub columns: usize,
    pub rank: usize,
    /// `max_i dist(e_i, Krylov span)` after power-of-two equilibration.
    pub residual: f64,
    pub cyclic: bool,
}

/// Krylov witness on indices `0..=window`: the columns are `P_W B^n f` for
/// every `n` up to the deepest index of `f`, with `B` untruncated.
pub fn verify_cyclic_candidate(
    spec: &BackwardShiftSpec,
    terms: &[Term],
    window: usize,
    rank_tol: f64,
    cap: usize,
) -> Result<Verification> {
    let dimension = spec.window_dimension(window);
    let columns = terms.iter().map(|t| t.index + 1).max().unwrap_or(0);
    check_cap(dimension.max(columns), cap)?;
    let orbit = equilibrate(&spec.projected_orbit(terms, window, columns));
    let rank = numerical_rank(&orbit, rank_tol);
    let residual = if columns == 0 { 1.0 } else { projection_residual(&orbit, rank_tol) };
    Ok(Verification { window, dimension, columns, rank, residual, cyclic: rank == dimension })
}

/// Cokernel of the window matrix of `B`, with the top index of each branch
/// counted separately: it lies outside the range of the compression only.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CokernelReport {
    pub raw: usize,
    pub boundary: usize,
    pub adjusted: usize,
}

pub fn backward_cokernel(spec: &BackwardShiftSpec, window: usize, cap: usize) -> Result<CokernelReport> {
    let m = spec.window_matrix(window, cap)?;
    let raw = m.nrows() - numerical_rank(&m, DEFAULT_RANK_TOL);
    let boundary = spec.branch_count();
    Ok(CokernelReport { raw, boundary, adjusted: raw.saturating_sub(boundary) })
}

/// `Σ_k |x_{j,k}|² / |w_{j,k} ⋯ w_{j,k+n−1}|²` per power `n = 1..=max_power`;
/// a vector lies in the range of `B^n` exactly when the untruncated sum is
/// finite.
pub fn range_membership_sums(spec: &BackwardShiftSpec, x: &[Term], max_power: usize) -> Vec<f64> {
    (1..=max_power)
        .map(|n| {
            x.iter()
                .map(|t| {
                    let p = spec.product(t.branch, t.index, t.index + n);
                    (t.coefficient / p).powi(2)
                })
                .sum()
        })
        .collect()
}

/// Dense vector of `terms` restricted to the window.
pub fn window_vector(spec: &BackwardShiftSpec, terms: &[Term], window: usize) -> DVector<f64> {
    let mut v = DVector::zeros(spec.window_dimension(window));
    for t in terms.iter().filter(|t| t.index <= window) {
        v[spec.window_index(window, t.branch, t.index)] += t.coefficient;
    }
    v
}
