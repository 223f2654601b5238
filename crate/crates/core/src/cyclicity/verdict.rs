use std::fmt;

use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use super::BackwardShiftSpec;
use crate::asymptotics::{AdjointClass, ClassificationC, ForwardClass};
use crate::shift::ShiftOperator;
use crate::tree::{Family, Multiplicity};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rule {
    /// Rooted with `Br > 0`: the co-rank exceeds one.
    R1,
    /// Rootless with `Br > 1`.
    R2,
    /// Backward shift: cyclic iff at most one zero weight.
    R3,
    /// Rootless, `Br = 1`, two leaves.
    R4,
    /// Rootless, `Br = 1`, one leaf, adjoint not stable.
    R5,
    /// Bilateral path whose adjoint is in `C_{·1}`.
    R5Prime,
    /// Rootless, `Br = 1`, forward class `C_{1·}`.
    R6,
    /// Rooted, `C_{1·}`: the adjoint is cyclic.
    R7,
    /// Rootless, finite `Br`, `C_{1·}`: the adjoint is cyclic.
    R8,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::R1 => "R1",
            Rule::R2 => "R2",
            Rule::R3 => "R3",
            Rule::R4 => "R4",
            Rule::R5 => "R5",
            Rule::R5Prime => "R5'",
            Rule::R6 => "R6",
            Rule::R7 => "R7",
            Rule::R8 => "R8",
        }
    }

    /// Labels of the results each rule rests on.
    pub fn anchors(self) -> &'static [&'static str] {
        match self {
            Rule::R1 | Rule::R2 => &["co-rank formula"],
            Rule::R3 => &["Thm 5.4"],
            Rule::R4 => &["Thm 6.2"],
            Rule::R5 => &["Thm 6.3"],
            Rule::R5Prime => &["C·1 bilateral shifts are cyclic"],
            Rule::R6 => &["Thm 6.5"],
            Rule::R7 => &["Thm 7.3(i)"],
            Rule::R8 => &["Thm 7.3(ii)"],
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Cyclic(Rule),
    NonCyclic(Rule),
    AdjointCyclic(Rule),
    Unknown(Vec<String>),
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Cyclic(_) => "cyclic",
            Verdict::NonCyclic(_) => "non-cyclic",
            Verdict::AdjointCyclic(_) => "adjoint-cyclic",
            Verdict::Unknown(_) => "unknown",
        }
    }

    pub fn rule(&self) -> Option<Rule> {
        match self {
            Verdict::Cyclic(r) | Verdict::NonCyclic(r) | Verdict::AdjointCyclic(r) => Some(*r),
            Verdict::Unknown(_) => None,
        }
    }
}

impl Serialize for Verdict {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut m = s.serialize_map(Some(3))?;
        m.serialize_entry("verdict", self.label())?;
        match self {
            Verdict::Unknown(blockers) => m.serialize_entry("blockers", blockers)?,
            _ => {
                let r = self.rule().expect("decided verdicts carry a rule");
                m.serialize_entry("rule", r.name())?;
                m.serialize_entry("anchors", r.anchors())?;
            }
        }
        m.end()
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Unknown(b) => write!(f, "unknown: {}", b.join("; ")),
            v => {
                let r = v.rule().expect("decided verdicts carry a rule");
                write!(f, "{} by {} ({})", v.label(), r, r.anchors().join(", "))
            }
        }
    }
}

pub enum VerdictSubject<'a> {
    Tree { op: &'a ShiftOperator, classification: &'a ClassificationC },
    Backward(&'a BackwardShiftSpec),
}

fn exceeds(br: Multiplicity, n: usize) -> bool {
    match br {
        Multiplicity::Count(c) => c > n,
        Multiplicity::Infinite => true,
    }
}

/// First matching rule in the order R1, R2, R3, R4, R5, R5', R6, R7, R8.
pub fn cyclicity_verdict(subject: &VerdictSubject) -> Verdict {
    let (op, class) = match subject {
        VerdictSubject::Backward(spec) => {
            let zeros = spec.zeros().len();
            return if zeros <= 1 { Verdict::Cyclic(Rule::R3) } else { Verdict::NonCyclic(Rule::R3) };
        }
        VerdictSubject::Tree { op, classification } => (op, classification),
    };
    let model = op.model();
    let rooted = model.is_rooted();
    let br = model.branching_index();
    let leaves = model.leaves().len();
    let one = br == Multiplicity::Count(1);
    let c1dot = class.forward == ForwardClass::C1Dot;

    if rooted && exceeds(br, 0) {
        return Verdict::NonCyclic(Rule::R1);
    }
    if !rooted && exceeds(br, 1) {
        return Verdict::NonCyclic(Rule::R2);
    }
    if !rooted && one && leaves == 2 {
        return Verdict::Cyclic(Rule::R4);
    }
    if !rooted && one && leaves == 1 && class.adjoint_nonzero() {
        return Verdict::Cyclic(Rule::R5);
    }
    if model.family() == Some(&Family::BilateralPath) && class.adjoint == AdjointClass::CDot1 {
        return Verdict::Cyclic(Rule::R5Prime);
    }
    if !rooted && one && c1dot {
        return Verdict::NonCyclic(Rule::R6);
    }
    if rooted && c1dot {
        return Verdict::AdjointCyclic(Rule::R7);
    }
    if !rooted && br != Multiplicity::Infinite && c1dot {
        return Verdict::AdjointCyclic(Rule::R8);
    }

    let mut blockers = vec![format!("{}, Br = {br}, {leaves} leaves", if rooted { "rooted" } else { "rootless" })];
    blockers.push(format!("forward class: {}", class.forward));
    blockers.push(format!("adjoint class: {}", class.adjoint));
    if !rooted && one && leaves == 1 {
        blockers.push("one leaf but the adjoint is not known to be outside C_{·0}".into());
    }
    if !rooted && br == Multiplicity::Count(0) {
        blockers.push("bilateral shifts outside C_{·1} have no cyclicity characterization".into());
    }
    Verdict::Unknown(blockers)
}
