//! MIP representation with one-hot class groups.
//!
//! A [`Model`] is always a minimization problem. Objects that must take
//! exactly one class are declared as [`OneHotGroup`]s; every group has to be
//! backed by a `sum_k x[v][k] = 1` equality row over exactly its members.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default tolerance for bounds, rows and integrality.
pub const FEAS_TOL: f64 = 1e-6;

pub type VarId = usize;
pub type ObjectId = usize;
pub type ClassLabel = u32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Binary,
    Integer,
    Continuous,
}

impl VarKind {
    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub id: VarId,
    pub name: String,
    pub lower: f64,
    pub upper: f64,
    pub kind: VarKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub sense: RowSense,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn activity(&self, values: &[f64]) -> f64 {
        self.terms.iter().map(|&(j, a)| a * values[j]).sum()
    }
}

/// The binaries `x[v][k]` of one object `v`, one per admissible class `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneHotGroup {
    pub object: ObjectId,
    pub name: String,
    pub members: Vec<(ClassLabel, VarId)>,
}

impl OneHotGroup {
    pub fn var_of(&self, k: ClassLabel) -> Option<VarId> {
        self.members.iter().find(|m| m.0 == k).map(|m| m.1)
    }

    pub fn labels(&self) -> impl Iterator<Item = ClassLabel> + '_ {
        self.members.iter().map(|m| m.0)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Model {
    pub name: String,
    pub objective: Vec<(VarId, f64)>,
    pub variables: Vec<Variable>,
    pub constraints: Vec<LinearConstraint>,
    pub groups: Vec<OneHotGroup>,
}

/// One value per variable, indexed by [`VarId`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment(pub Vec<f64>);

impl Assignment {
    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    BadBounds { var: VarId },
    InfiniteLower { var: VarId },
    BinaryOutOfRange { var: VarId },
    NonFiniteCoefficient { row: usize },
    UnknownVariable { row: usize, var: VarId },
    DuplicateTerm { row: usize, var: VarId },
    TooFewMembers { object: ObjectId },
    NonBinaryMember { object: ObjectId, var: VarId },
    DuplicateLabel { object: ObjectId, label: ClassLabel },
    OverlappingGroups { var: VarId },
    MissingOneHotRow { object: ObjectId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::BadBounds { var } => write!(f, "variable {var} has lower > upper"),
            Violation::InfiniteLower { var } => {
                write!(f, "variable {var} has an unsupported infinite lower bound")
            }
            Violation::BinaryOutOfRange { var } => {
                write!(f, "binary variable {var} has bounds outside [0,1]")
            }
            Violation::NonFiniteCoefficient { row } => {
                write!(f, "row {row} has a non-finite coefficient or rhs")
            }
            Violation::UnknownVariable { row, var } => {
                write!(f, "row {row} references unknown variable {var}")
            }
            Violation::DuplicateTerm { row, var } => {
                write!(f, "row {row} mentions variable {var} twice")
            }
            Violation::TooFewMembers { object } => {
                write!(f, "group v={object} has fewer than 2 members")
            }
            Violation::NonBinaryMember { object, var } => {
                write!(f, "group v={object}: non-binary group member {var}")
            }
            Violation::DuplicateLabel { object, label } => {
                write!(f, "group v={object} repeats class label {label}")
            }
            Violation::OverlappingGroups { var } => {
                write!(f, "variable {var} belongs to more than one group")
            }
            Violation::MissingOneHotRow { object } => {
                write!(f, "group v={object} has no one-hot constraint")
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("group v={object} is not one-hot in the assignment")]
    NotOneHot { object: ObjectId },
    #[error("group v={object} is already fixed to class {existing}, cannot fix to {requested}")]
    ConflictingFix {
        object: ObjectId,
        existing: ClassLabel,
        requested: ClassLabel,
    },
    #[error("unknown group v={0}")]
    UnknownGroup(ObjectId),
    #[error("group v={object} has no class {label}")]
    UnknownClass { object: ObjectId, label: ClassLabel },
}

/// The class chosen for `group` by `values`.
pub fn class_of(values: &[f64], group: &OneHotGroup, tol: f64) -> Result<ClassLabel, ModelError> {
    let mut found = None;
    for &(k, j) in &group.members {
        if values[j] >= 1.0 - tol {
            if found.is_some() {
                return Err(ModelError::NotOneHot {
                    object: group.object,
                });
            }
            found = Some(k);
        }
    }
    found.ok_or(ModelError::NotOneHot {
        object: group.object,
    })
}

/// Tightens `lower`/`upper` so that only class `k` remains open for `group`.
///
/// Returns `Ok(false)` when the group was already fixed to `k`.
pub fn apply_class_fix(
    lower: &mut [f64],
    upper: &mut [f64],
    group: &OneHotGroup,
    k: ClassLabel,
) -> Result<bool, ModelError> {
    let target = group.var_of(k).ok_or(ModelError::UnknownClass {
        object: group.object,
        label: k,
    })?;
    if let Some(&(existing, _)) = group
        .members
        .iter()
        .find(|&&(k2, j)| k2 != k && lower[j] >= 1.0 - FEAS_TOL)
    {
        return Err(ModelError::ConflictingFix {
            object: group.object,
            existing,
            requested: k,
        });
    }
    if upper[target] < 1.0 - FEAS_TOL {
        // Only reachable if the target was closed by an earlier fix elsewhere.
        let existing = group
            .members
            .iter()
            .find(|&&(_, j)| upper[j] >= 1.0 - FEAS_TOL)
            .map(|m| m.0)
            .unwrap_or(k);
        return Err(ModelError::ConflictingFix {
            object: group.object,
            existing,
            requested: k,
        });
    }
    let already = lower[target] >= 1.0 - FEAS_TOL
        && group
            .members
            .iter()
            .all(|&(k2, j)| k2 == k || upper[j] <= FEAS_TOL);
    for &(k2, j) in &group.members {
        if k2 == k {
            lower[j] = 1.0;
            upper[j] = 1.0;
        } else {
            lower[j] = 0.0;
            upper[j] = 0.0;
        }
    }
    Ok(!already)
}

impl Model {
    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn group(&self, v: ObjectId) -> Option<&OneHotGroup> {
        self.groups.iter().find(|g| g.object == v)
    }

    pub fn objective_value(&self, values: &[f64]) -> f64 {
        self.objective.iter().map(|&(j, c)| c * values[j]).sum()
    }

    /// Dense objective vector.
    pub fn cost_vector(&self) -> Vec<f64> {
        let mut c = vec![0.0; self.num_vars()];
        for &(j, cj) in &self.objective {
            c[j] += cj;
        }
        c
    }

    /// Every structural problem of the model; empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.num_vars();
        for v in &self.variables {
            if v.lower.is_nan() || v.upper.is_nan() || v.lower > v.upper {
                out.push(Violation::BadBounds { var: v.id });
            }
            if v.lower == f64::NEG_INFINITY {
                out.push(Violation::InfiniteLower { var: v.id });
            }
            if v.kind == VarKind::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                out.push(Violation::BinaryOutOfRange { var: v.id });
            }
        }
        for (r, row) in self.constraints.iter().enumerate() {
            if !row.rhs.is_finite() || row.terms.iter().any(|t| !t.1.is_finite()) {
                out.push(Violation::NonFiniteCoefficient { row: r });
            }
            let mut seen = HashSet::new();
            for &(j, _) in &row.terms {
                if j >= n {
                    out.push(Violation::UnknownVariable { row: r, var: j });
                } else if !seen.insert(j) {
                    out.push(Violation::DuplicateTerm { row: r, var: j });
                }
            }
        }

        // Candidate one-hot rows keyed by their sorted variable set.
        let mut onehot_rows: HashSet<Vec<VarId>> = HashSet::new();
        for row in &self.constraints {
            if row.sense == RowSense::Eq
                && row.rhs == 1.0
                && row.terms.iter().all(|t| t.1 == 1.0)
            {
                let mut vars: Vec<VarId> = row.terms.iter().map(|t| t.0).collect();
                vars.sort_unstable();
                onehot_rows.insert(vars);
            }
        }

        let mut owner: HashMap<VarId, ObjectId> = HashMap::new();
        for g in &self.groups {
            if g.members.len() < 2 {
                out.push(Violation::TooFewMembers { object: g.object });
            }
            let mut labels = HashSet::new();
            for &(k, j) in &g.members {
                if !labels.insert(k) {
                    out.push(Violation::DuplicateLabel {
                        object: g.object,
                        label: k,
                    });
                }
                match self.variables.get(j) {
                    Some(var) if var.kind == VarKind::Binary => {}
                    _ => out.push(Violation::NonBinaryMember {
                        object: g.object,
                        var: j,
                    }),
                }
                if owner.insert(j, g.object).is_some() {
                    out.push(Violation::OverlappingGroups { var: j });
                }
            }
            let mut vars: Vec<VarId> = g.members.iter().map(|m| m.1).collect();
            vars.sort_unstable();
            if !onehot_rows.contains(&vars) {
                out.push(Violation::MissingOneHotRow { object: g.object });
            }
        }
        out
    }

    /// Objective value and feasibility (bounds, integrality, rows) within `tol`.
    pub fn evaluate(&self, assignment: &Assignment, tol: f64) -> (f64, bool) {
        let x = assignment.values();
        let obj = self.objective_value(x);
        if x.len() != self.num_vars() {
            return (obj, false);
        }
        let feasible = self.variables.iter().all(|v| {
            let xv = x[v.id];
            xv.is_finite()
                && xv >= v.lower - tol
                && xv <= v.upper + tol
                && (!v.kind.is_integral() || (xv - xv.round()).abs() <= tol)
        }) && self.constraints.iter().all(|row| {
            let a = row.activity(x);
            match row.sense {
                RowSense::Le => a <= row.rhs + tol,
                RowSense::Ge => a >= row.rhs - tol,
                RowSense::Eq => (a - row.rhs).abs() <= tol,
            }
        });
        (obj, feasible)
    }

    /// Fixes object `v` to class `k` by bounds: `x[v][k] = 1`, siblings 0.
    pub fn fix_class(&mut self, v: ObjectId, k: ClassLabel) -> Result<(), ModelError> {
        let group = self
            .groups
            .iter()
            .find(|g| g.object == v)
            .ok_or(ModelError::UnknownGroup(v))?
            .clone();
        let mut lower: Vec<f64> = self.variables.iter().map(|v| v.lower).collect();
        let mut upper: Vec<f64> = self.variables.iter().map(|v| v.upper).collect();
        apply_class_fix(&mut lower, &mut upper, &group, k)?;
        for &(_, j) in &group.members {
            self.variables[j].lower = lower[j];
            self.variables[j].upper = upper[j];
        }
        Ok(())
    }

    /// Class labels chosen by `values`, one per group in group order.
    pub fn classes(&self, values: &[f64], tol: f64) -> Result<Vec<ClassLabel>, ModelError> {
        self.groups.iter().map(|g| class_of(values, g, tol)).collect()
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn binary(id: VarId) -> Variable {
        Variable {
            id,
            name: format!("x{id}"),
            lower: 0.0,
            upper: 1.0,
            kind: VarKind::Binary,
        }
    }

    fn two_var_model(with_row: bool) -> Model {
        let mut m = Model {
            name: "t".into(),
            objective: vec![(0, -1.0), (1, -1.0)],
            variables: vec![binary(0), binary(1)],
            constraints: vec![],
            groups: vec![OneHotGroup {
                object: 0,
                name: "v0".into(),
                members: vec![(0, 0), (1, 1)],
            }],
        };
        if with_row {
            m.constraints.push(LinearConstraint {
                name: "oh".into(),
                terms: vec![(0, 1.0), (1, 1.0)],
                sense: RowSense::Eq,
                rhs: 1.0,
            });
        }
        m
    }

    fn three_class_model() -> Model {
        Model {
            name: "k3".into(),
            objective: vec![],
            variables: (0..3).map(binary).collect(),
            constraints: vec![LinearConstraint {
                name: "oh".into(),
                terms: vec![(0, 1.0), (1, 1.0), (2, 1.0)],
                sense: RowSense::Eq,
                rhs: 1.0,
            }],
            groups: vec![OneHotGroup {
                object: 0,
                name: "v0".into(),
                members: vec![(0, 0), (1, 1), (2, 2)],
            }],
        }
    }

    #[test]
    fn validate_accepts_group_with_row() {
        assert!(two_var_model(true).validate().is_empty());
    }

    #[test]
    fn validate_flags_missing_row() {
        let v = two_var_model(false).validate();
        assert_eq!(v, vec![Violation::MissingOneHotRow { object: 0 }]);
        assert_eq!(v[0].to_string(), "group v=0 has no one-hot constraint");
    }

    #[test]
    fn validate_flags_continuous_member() {
        let mut m = two_var_model(true);
        m.variables[1].kind = VarKind::Continuous;
        let v = m.validate();
        assert!(v
            .iter()
            .any(|x| x.to_string().contains("non-binary group member")));
    }

    #[test]
    fn validate_flags_overlap_and_bounds() {
        let mut m = two_var_model(true);
        m.groups.push(OneHotGroup {
            object: 1,
            name: "v1".into(),
            members: vec![(0, 0), (1, 1)],
        });
        m.variables[0].lower = 2.0;
        let v = m.validate();
        assert!(v.contains(&Violation::OverlappingGroups { var: 0 }));
        assert!(v.contains(&Violation::BadBounds { var: 0 }));
    }

    #[test]
    fn class_of_cases() {
        let g = &three_class_model().groups[0];
        assert_eq!(class_of(&[0.0, 1.0, 0.0], g, 1e-6), Ok(1));
        assert!(matches!(
            class_of(&[0.0, 0.0, 0.0], g, 1e-6),
            Err(ModelError::NotOneHot { object: 0 })
        ));
        assert_eq!(class_of(&[1.0 - 1e-9, 1e-9, 0.0], g, 1e-6), Ok(0));
        assert!(class_of(&[1.0, 1.0, 0.0], g, 1e-6).is_err());
    }

    #[test]
    fn fix_class_sets_bounds_and_is_idempotent() {
        let mut m = three_class_model();
        m.fix_class(0, 2).unwrap();
        let b: Vec<(f64, f64)> = m.variables.iter().map(|v| (v.lower, v.upper)).collect();
        assert_eq!(b, vec![(0.0, 0.0), (0.0, 0.0), (1.0, 1.0)]);
        let before = m.clone();
        m.fix_class(0, 2).unwrap();
        assert_eq!(m, before);
        assert_eq!(
            m.fix_class(0, 1),
            Err(ModelError::ConflictingFix {
                object: 0,
                existing: 2,
                requested: 1
            })
        );
    }

    #[test]
    fn evaluate_cases() {
        let mut m = two_var_model(false);
        m.constraints.push(LinearConstraint {
            name: "cap".into(),
            terms: vec![(0, 1.0), (1, 1.0)],
            sense: RowSense::Le,
            rhs: 1.5,
        });
        assert_eq!(m.evaluate(&Assignment(vec![1.0, 0.0]), FEAS_TOL), (-1.0, true));
        assert_eq!(m.evaluate(&Assignment(vec![1.0, 1.0]), FEAS_TOL), (-2.0, false));
        let mut free = m.clone();
        free.constraints.clear();
        assert!(!free.evaluate(&Assignment(vec![0.4, 0.0]), FEAS_TOL).1);
    }

    #[test]
    fn fix_preserves_feasibility_of_matching_assignment() {
        let m = three_class_model();
        let mut fixed = m.clone();
        fixed.fix_class(0, 1).unwrap();
        let x = Assignment(vec![0.0, 1.0, 0.0]);
        assert_eq!(m.evaluate(&x, FEAS_TOL).1, fixed.evaluate(&x, FEAS_TOL).1);
    }
}
