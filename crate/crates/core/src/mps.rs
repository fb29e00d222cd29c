//! Free-format MPS reader/writer, the one-hot group sidecar, and JSON-lines
//! run logs.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bnb::{Clock, RunRecord, RunStatus, SolutionSource};
use crate::model::{
    ClassLabel, LinearConstraint, Model, ObjectId, OneHotGroup, RowSense, VarId, VarKind, Variable,
};

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unknown variable {0:?}")]
    UnknownVariable(String),
    #[error("variable {0:?} belongs to more than one group")]
    DuplicateMembership(String),
    #[error("invalid group sidecar: {0}")]
    Sidecar(String),
    #[error("no one-hot groups declared ({0} not found)")]
    MissingSidecar(PathBuf),
    #[error("invalid instance: {0}")]
    Invalid(String),
    #[error("invalid run log line {line}: {msg}")]
    Log { line: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn perr(line: usize, msg: impl Into<String>) -> MpsError {
    MpsError::Parse {
        line,
        msg: msg.into(),
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    None,
    Name,
    ObjSense,
    Rows,
    Columns,
    Rhs,
    Bounds,
    End,
}

fn parse_num(tok: &str, line: usize) -> Result<f64, MpsError> {
    let v: f64 = tok
        .parse()
        .map_err(|_| perr(line, format!("expected a number, found {tok:?}")))?;
    if v.is_nan() {
        return Err(perr(line, "NaN is not a valid coefficient"));
    }
    Ok(v)
}

/// Parses a free-format MPS model. Groups are declared separately.
pub fn parse_mps(text: &str) -> Result<Model, MpsError> {
    let mut name = String::new();
    let mut maximize = false;
    let mut objective_row: Option<String> = None;
    let mut free_rows: HashSet<String> = HashSet::new();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut constraints: Vec<LinearConstraint> = Vec::new();
    let mut var_index: HashMap<String, VarId> = HashMap::new();
    let mut variables: Vec<Variable> = Vec::new();
    let mut in_marker: Vec<bool> = Vec::new();
    let mut objective: Vec<(VarId, f64)> = Vec::new();
    let mut seen_entries: HashSet<(VarId, usize)> = HashSet::new();
    let mut seen_objective: HashSet<VarId> = HashSet::new();
    let mut integer_block = false;
    let mut current: Option<VarId> = None;
    let mut section = Section::None;
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let toks: Vec<&str> = raw.split_whitespace().collect();
        let header = !raw.starts_with(char::is_whitespace);
        if header {
            section = match toks[0] {
                "NAME" => {
                    name = toks.get(1..).map(|t| t.join(" ")).unwrap_or_default();
                    Section::Name
                }
                "OBJSENSE" => {
                    if let Some(s) = toks.get(1) {
                        maximize = parse_sense(s, line)?;
                    }
                    Section::ObjSense
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "BOUNDS" => Section::Bounds,
                "RANGES" => return Err(perr(line, "RANGES section is not supported")),
                "ENDATA" => Section::End,
                other => {
                    // OBJSENSE values may also be written flush left.
                    if section == Section::ObjSense {
                        maximize = parse_sense(other, line)?;
                        continue;
                    }
                    return Err(perr(line, format!("unknown section {other:?}")));
                }
            };
            if section == Section::End {
                break;
            }
            continue;
        }
        match section {
            Section::None | Section::Name | Section::End => {
                return Err(perr(line, "data line outside of a section"));
            }
            Section::ObjSense => maximize = parse_sense(toks[0], line)?,
            Section::Rows => {
                if toks.len() != 2 {
                    return Err(perr(line, "ROWS entries need a type and a name"));
                }
                let row = toks[1].to_string();
                if row_index.contains_key(&row)
                    || free_rows.contains(&row)
                    || objective_row.as_deref() == Some(&row)
                {
                    return Err(perr(line, format!("duplicate row {row:?}")));
                }
                let sense = match toks[0] {
                    "N" => {
                        if objective_row.is_none() {
                            objective_row = Some(row);
                        } else {
                            free_rows.insert(row);
                        }
                        continue;
                    }
                    "L" => RowSense::Le,
                    "G" => RowSense::Ge,
                    "E" => RowSense::Eq,
                    t => return Err(perr(line, format!("unknown row type {t:?}"))),
                };
                row_index.insert(row.clone(), constraints.len());
                constraints.push(LinearConstraint {
                    name: row,
                    terms: Vec::new(),
                    sense,
                    rhs: 0.0,
                });
            }
            Section::Columns => {
                if toks.len() >= 3 && toks[1].trim_matches('\'') == "MARKER" {
                    match toks[2].trim_matches('\'') {
                        "INTORG" => integer_block = true,
                        "INTEND" => integer_block = false,
                        m => return Err(perr(line, format!("unknown marker {m:?}"))),
                    }
                    continue;
                }
                if toks.len() != 3 && toks.len() != 5 {
                    return Err(perr(line, "COLUMNS entries need a column and 1 or 2 (row, value) pairs"));
                }
                let col = toks[0];
                let j = match var_index.get(col) {
                    Some(&j) if current == Some(j) => j,
                    Some(_) => return Err(perr(line, format!("duplicate column {col:?}"))),
                    None => {
                        let j = variables.len();
                        var_index.insert(col.to_string(), j);
                        variables.push(Variable {
                            id: j,
                            name: col.to_string(),
                            lower: 0.0,
                            upper: if integer_block { 1.0 } else { f64::INFINITY },
                            kind: if integer_block { VarKind::Integer } else { VarKind::Continuous },
                        });
                        in_marker.push(integer_block);
                        current = Some(j);
                        j
                    }
                };
                for pair in toks[1..].chunks(2) {
                    let (row, val) = (pair[0], parse_num(pair[1], line)?);
                    if objective_row.as_deref() == Some(row) {
                        if !seen_objective.insert(j) {
                            return Err(perr(line, format!("duplicate objective entry for {col:?}")));
                        }
                        if val != 0.0 {
                            objective.push((j, val));
                        }
                    } else if free_rows.contains(row) {
                        continue;
                    } else {
                        let &i = row_index
                            .get(row)
                            .ok_or_else(|| perr(line, format!("unknown row {row:?}")))?;
                        if !seen_entries.insert((j, i)) {
                            return Err(perr(line, format!("duplicate entry ({col}, {row})")));
                        }
                        if val != 0.0 {
                            constraints[i].terms.push((j, val));
                        }
                    }
                }
            }
            Section::Rhs => {
                let pairs = if toks.len() % 2 == 1 { &toks[1..] } else { &toks[..] };
                if pairs.is_empty() || pairs.len() > 4 {
                    return Err(perr(line, "RHS entries need 1 or 2 (row, value) pairs"));
                }
                for pair in pairs.chunks(2) {
                    let (row, val) = (pair[0], parse_num(pair[1], line)?);
                    if objective_row.as_deref() == Some(row) {
                        return Err(perr(line, "objective constants are not supported"));
                    }
                    if free_rows.contains(row) {
                        continue;
                    }
                    let &i = row_index
                        .get(row)
                        .ok_or_else(|| perr(line, format!("unknown row {row:?}")))?;
                    constraints[i].rhs = val;
                }
            }
            Section::Bounds => {
                let kind = toks[0];
                let valued = matches!(kind, "UP" | "LO" | "FX" | "LI" | "UI");
                let (col, val) = match (valued, toks.len()) {
                    (true, 4) => (toks[2], Some(parse_num(toks[3], line)?)),
                    (true, 3) => (toks[1], Some(parse_num(toks[2], line)?)),
                    (false, 3) => (toks[2], None),
                    (false, 2) => (toks[1], None),
                    _ => return Err(perr(line, "malformed BOUNDS entry")),
                };
                let &j = var_index
                    .get(col)
                    .ok_or_else(|| perr(line, format!("unknown column {col:?}")))?;
                let v = &mut variables[j];
                match (kind, val) {
                    ("UP", Some(x)) => v.upper = x,
                    ("LO", Some(x)) => v.lower = x,
                    ("FX", Some(x)) => {
                        v.lower = x;
                        v.upper = x;
                    }
                    ("LI", Some(x)) => {
                        v.lower = x;
                        v.kind = VarKind::Integer;
                    }
                    ("UI", Some(x)) => {
                        v.upper = x;
                        v.kind = VarKind::Integer;
                    }
                    ("FR", None) => {
                        v.lower = f64::NEG_INFINITY;
                        v.upper = f64::INFINITY;
                    }
                    ("MI", None) => v.lower = f64::NEG_INFINITY,
                    ("PL", None) => v.upper = f64::INFINITY,
                    ("BV", None) => {
                        v.lower = 0.0;
                        v.upper = 1.0;
                        v.kind = VarKind::Binary;
                    }
                    (k, _) => return Err(perr(line, format!("unknown bound type {k:?}"))),
                }
            }
        }
    }
    if section != Section::End {
        return Err(perr(last_line, "missing ENDATA"));
    }
    if objective_row.is_none() {
        return Err(perr(last_line, "no objective (N) row"));
    }
    for v in &mut variables {
        if v.lower > v.upper {
            return Err(MpsError::Invalid(format!("variable {} has lower > upper", v.name)));
        }
        if v.kind.is_integral() {
            v.kind = if v.lower >= 0.0 && v.upper <= 1.0 {
                VarKind::Binary
            } else {
                VarKind::Integer
            };
        }
    }
    if maximize {
        for c in &mut objective {
            c.1 = -c.1;
        }
    }
    Ok(Model {
        name,
        objective,
        variables,
        constraints,
        groups: Vec::new(),
    })
}

fn parse_sense(tok: &str, line: usize) -> Result<bool, MpsError> {
    match tok {
        "MAX" | "MAXIMIZE" => Ok(true),
        "MIN" | "MINIMIZE" => Ok(false),
        s => Err(perr(line, format!("unknown objective sense {s:?}"))),
    }
}

/// Writes `model` (minimization) as free-format MPS; groups are not included.
pub fn write_mps(model: &Model) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "NAME {}", if model.name.is_empty() { "model" } else { &model.name });
    out.push_str("ROWS\n N obj\n");
    for c in &model.constraints {
        let t = match c.sense {
            RowSense::Le => "L",
            RowSense::Ge => "G",
            RowSense::Eq => "E",
        };
        let _ = writeln!(out, " {t} {}", c.name);
    }

    let mut entries: Vec<Vec<(&str, f64)>> = vec![Vec::new(); model.num_vars()];
    for &(j, c) in &model.objective {
        entries[j].push(("obj", c));
    }
    for c in &model.constraints {
        for &(j, a) in &c.terms {
            entries[j].push((&c.name, a));
        }
    }
    out.push_str("COLUMNS\n");
    let mut marker = 0;
    let mut open = false;
    for v in &model.variables {
        let int = v.kind.is_integral();
        if int != open {
            let tag = if int { "INTORG" } else { "INTEND" };
            let _ = writeln!(out, "    M{marker} 'MARKER' '{tag}'");
            marker += 1;
            open = int;
        }
        if entries[v.id].is_empty() {
            let _ = writeln!(out, "    {} obj 0", v.name);
        }
        for (row, a) in &entries[v.id] {
            let _ = writeln!(out, "    {} {} {}", v.name, row, a);
        }
    }
    if open {
        let _ = writeln!(out, "    M{marker} 'MARKER' 'INTEND'");
    }

    out.push_str("RHS\n");
    for c in &model.constraints {
        if c.rhs != 0.0 {
            let _ = writeln!(out, "    RHS {} {}", c.name, c.rhs);
        }
    }

    out.push_str("BOUNDS\n");
    for v in &model.variables {
        let n = &v.name;
        if v.kind == VarKind::Binary && v.lower == 0.0 && v.upper == 1.0 {
            let _ = writeln!(out, " BV BND {n}");
            continue;
        }
        if v.lower == v.upper {
            let _ = writeln!(out, " FX BND {n} {}", v.lower);
            continue;
        }
        if v.lower == f64::NEG_INFINITY {
            let _ = writeln!(out, " MI BND {n}");
        } else if v.lower != 0.0 {
            let _ = writeln!(out, " LO BND {n} {}", v.lower);
        }
        if v.upper.is_finite() {
            let _ = writeln!(out, " UP BND {n} {}", v.upper);
        } else if v.kind.is_integral() {
            let _ = writeln!(out, " PL BND {n}");
        }
    }
    out.push_str("ENDATA\n");
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSidecar {
    pub groups: Vec<SidecarGroup>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarGroup {
    pub object: String,
    pub classes: Vec<SidecarClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SidecarClass {
    pub k: ClassLabel,
    pub var: String,
}

/// Resolves a sidecar document against `model`. Object ids are the
/// positions in the `groups` list.
pub fn parse_groups(text: &str, model: &Model) -> Result<Vec<OneHotGroup>, MpsError> {
    let doc: GroupSidecar = serde_json::from_str(text).map_err(|e| MpsError::Sidecar(e.to_string()))?;
    let index: HashMap<&str, VarId> = model
        .variables
        .iter()
        .map(|v| (v.name.as_str(), v.id))
        .collect();
    let mut used: HashSet<VarId> = HashSet::new();
    let mut groups = Vec::with_capacity(doc.groups.len());
    for (v, g) in doc.groups.into_iter().enumerate() {
        let mut members = Vec::with_capacity(g.classes.len());
        for c in g.classes {
            let &j = index
                .get(c.var.as_str())
                .ok_or_else(|| MpsError::UnknownVariable(c.var.clone()))?;
            if !used.insert(j) {
                return Err(MpsError::DuplicateMembership(c.var));
            }
            members.push((c.k, j));
        }
        groups.push(OneHotGroup {
            object: v as ObjectId,
            name: g.object,
            members,
        });
    }
    Ok(groups)
}

pub fn write_groups(model: &Model) -> String {
    let doc = GroupSidecar {
        groups: model
            .groups
            .iter()
            .map(|g| SidecarGroup {
                object: g.name.clone(),
                classes: g
                    .members
                    .iter()
                    .map(|&(k, j)| SidecarClass {
                        k,
                        var: model.variables[j].name.clone(),
                    })
                    .collect(),
            })
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("sidecar serializes");
    s.push('\n');
    s
}

/// `<base>.mps` and `<base>.groups.json` for an instance path given with or
/// without the `.mps` extension.
pub fn instance_paths(path: &Path) -> (PathBuf, PathBuf) {
    let s = path.to_string_lossy();
    let base = s.strip_suffix(".mps").unwrap_or(&s).to_string();
    (PathBuf::from(format!("{base}.mps")), PathBuf::from(format!("{base}.groups.json")))
}

/// Reads an instance pair and validates the combined model.
pub fn load_instance(path: &Path) -> Result<Model, MpsError> {
    let (mps, sidecar) = instance_paths(path);
    let mut model = parse_mps(&std::fs::read_to_string(&mps)?)?;
    if !sidecar.exists() {
        return Err(MpsError::MissingSidecar(sidecar));
    }
    model.groups = parse_groups(&std::fs::read_to_string(&sidecar)?, &model)?;
    let violations = model.validate();
    if !violations.is_empty() {
        let msg: Vec<String> = violations.iter().map(|v| v.to_string()).collect();
        return Err(MpsError::Invalid(msg.join("; ")));
    }
    Ok(model)
}

/// Writes `<dir>/<model.name>.mps` and `.groups.json`.
pub fn save_instance(model: &Model, dir: &Path) -> std::io::Result<(PathBuf, PathBuf)> {
    let (mps, sidecar) = instance_paths(&dir.join(&model.name));
    std::fs::write(&mps, write_mps(model))?;
    std::fs::write(&sidecar, write_groups(model))?;
    Ok((mps, sidecar))
}

/// One line of a run log. `wall_s` is omitted (null) under the node clock so
/// logs are byte-for-byte reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LogEvent {
    Solution {
        t: u64,
        wall_s: Option<f64>,
        objective: f64,
        source: SolutionSource,
        classes: Vec<ClassLabel>,
    },
    Incumbent {
        t: u64,
        wall_s: Option<f64>,
        objective: f64,
        solution: usize,
    },
    Fix {
        t: u64,
        wall_s: Option<f64>,
        v: ObjectId,
        k: ClassLabel,
        incumbent_k: ClassLabel,
    },
    Summary(Box<LogSummary>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogSummary {
    pub t: u64,
    pub wall_s: Option<f64>,
    pub instance: String,
    pub policy: String,
    pub seed: u64,
    pub status: RunStatus,
    pub nodes: u64,
    pub lp_iterations: u64,
    pub best_objective: Option<f64>,
    pub dual_bound: Option<f64>,
    pub restricted_bound: Option<f64>,
    pub solutions: usize,
    pub incumbents: usize,
    pub fixes: usize,
    pub skipped_fixes: usize,
    /// Fixes whose class differs from the triggering incumbent's class.
    pub disagreements: usize,
    pub best_classes: Option<Vec<ClassLabel>>,
}

/// Events of `record` in chronological order, ending with the summary.
pub fn log_events(record: &RunRecord, clock: Clock) -> Vec<LogEvent> {
    let wall = |w: f64| match clock {
        Clock::Node => None,
        Clock::Wall => Some(w),
    };
    let mut out = Vec::new();
    let mut inc = record.incumbents.iter().peekable();
    let mut fix = record.fixes.iter().peekable();
    for (i, s) in record.solutions.iter().enumerate() {
        out.push(LogEvent::Solution {
            t: s.node,
            wall_s: wall(s.wall_s),
            objective: s.objective,
            source: s.source,
            classes: s.classes.clone(),
        });
        if let Some(e) = inc.next_if(|e| e.solution == i) {
            out.push(LogEvent::Incumbent {
                t: e.node,
                wall_s: wall(e.wall_s),
                objective: e.objective,
                solution: e.solution,
            });
            while let Some(f) = fix.next_if(|f| f.node == e.node) {
                out.push(LogEvent::Fix {
                    t: f.node,
                    wall_s: wall(f.wall_s),
                    v: f.v,
                    k: f.k,
                    incumbent_k: f.incumbent_k,
                });
            }
        }
    }
    out.push(LogEvent::Summary(Box::new(LogSummary {
        t: record.nodes,
        wall_s: wall(record.wall_s),
        instance: record.instance.clone(),
        policy: record.policy.clone(),
        seed: record.seed,
        status: record.status,
        nodes: record.nodes,
        lp_iterations: record.lp_iterations,
        best_objective: record.best_objective,
        dual_bound: record.dual_bound,
        restricted_bound: record.restricted_bound,
        solutions: record.solutions.len(),
        incumbents: record.incumbents.len(),
        fixes: record.fixes.len(),
        skipped_fixes: record.skipped_fixes,
        disagreements: record.fixes.iter().filter(|f| f.k != f.incumbent_k).count(),
        best_classes: record.best_classes().map(<[_]>::to_vec),
    })));
    out
}

/// Writes the run log as JSON lines; returns the number of bytes written.
pub fn write_run_log<W: Write>(record: &RunRecord, clock: Clock, mut out: W) -> std::io::Result<usize> {
    let mut n = 0;
    for e in log_events(record, clock) {
        let mut line = serde_json::to_string(&e).map_err(std::io::Error::other)?;
        line.push('\n');
        out.write_all(line.as_bytes())?;
        n += line.len();
    }
    out.flush()?;
    Ok(n)
}

/// A parsed run log.
#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub events: Vec<LogEvent>,
    pub summary: LogSummary,
}

impl RunLog {
    /// `(t, wall_s, objective)` of every incumbent.
    pub fn incumbents(&self) -> impl Iterator<Item = (u64, Option<f64>, f64)> + '_ {
        self.events.iter().filter_map(|e| match e {
            LogEvent::Incumbent {
                t, wall_s, objective, ..
            } => Some((*t, *wall_s, *objective)),
            _ => None,
        })
    }

    /// `(v, k)` of every fix, in order.
    pub fn fixes(&self) -> impl Iterator<Item = (ObjectId, ClassLabel)> + '_ {
        self.events.iter().filter_map(|e| match e {
            LogEvent::Fix { v, k, .. } => Some((*v, *k)),
            _ => None,
        })
    }
}

pub fn read_run_log(text: &str) -> Result<RunLog, MpsError> {
    let mut events = Vec::new();
    let mut summary = None;
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if summary.is_some() {
            return Err(MpsError::Log {
                line: i + 1,
                msg: "event after summary".into(),
            });
        }
        let e: LogEvent = serde_json::from_str(line).map_err(|e| MpsError::Log {
            line: i + 1,
            msg: e.to_string(),
        })?;
        match e {
            LogEvent::Summary(s) => summary = Some(*s),
            e => events.push(e),
        }
    }
    let summary = summary.ok_or(MpsError::Log {
        line: text.lines().count(),
        msg: "missing summary line".into(),
    })?;
    Ok(RunLog { events, summary })
}
