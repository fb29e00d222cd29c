//! Synthetic locomotive-assignment instances on a cyclic time-space network.
//!
//! Nodes are `(station, period)` pairs over one week. Every train arc picks
//! exactly one locomotive configuration (a multiset of locomotive types);
//! ground arcs carry idle locomotives from one period to the next at a
//! station, wrapping at the end of the week. Per-type flow is conserved at
//! every node and the number of locomotives of each type in use at the week
//! boundary is capped by the fleet size.
//!
//! Trains are created by routing consists along random closed walks, so the
//! routing used for construction is always a feasible solution (the witness).

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    Assignment, ClassLabel, LinearConstraint, Model, OneHotGroup, RowSense, VarKind, Variable,
};

const MAX_ATTEMPTS: u64 = 10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LapError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("could not place {trains} trains after {attempts} attempts")]
    ConstructionFailure { trains: usize, attempts: u64 },
}

/// A locomotive consist: how many locomotives of each type it uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistConfig {
    pub name: String,
    pub counts: Vec<u32>,
    pub power: u32,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LapParams {
    pub name: String,
    pub stations: usize,
    pub periods: usize,
    pub trains: usize,
    pub loco_types: usize,
    /// Fixed fleet per type; derived from the week-one witness when absent.
    pub fleet: Option<Vec<u32>>,
    pub configs: Vec<ConsistConfig>,
    pub demand_min: u32,
    pub demand_max: u32,
    pub idle_cost: f64,
    /// Cost per locomotive carried dead (not pulling) on a train. `None`
    /// leaves deadheading out of the model.
    pub deadhead_cost: Option<f64>,
    /// Longest trip, in periods.
    pub max_trip: usize,
    /// Longest stop between two trips of a walk, in periods.
    pub max_dwell: usize,
    pub min_walk_trips: usize,
    pub max_walk_trips: usize,
    pub perturbation_rate: f64,
    pub seed: u64,
}

/// Types A (power 1, cost 1.0) and B (power 2, cost 1.8), combined additively.
pub fn default_configs() -> Vec<ConsistConfig> {
    let power = [1u32, 2];
    let cost = [1.0f64, 1.8];
    [("A", [1, 0]), ("B", [0, 1]), ("AA", [2, 0]), ("AB", [1, 1]), ("BB", [0, 2]), ("AAB", [2, 1])]
        .into_iter()
        .map(|(name, counts)| ConsistConfig {
            name: name.to_string(),
            counts: counts.to_vec(),
            power: counts.iter().zip(power).map(|(c, p)| c * p).sum(),
            cost: counts.iter().zip(cost).map(|(&c, p)| c as f64 * p).sum(),
        })
        .collect()
}

impl Default for LapParams {
    fn default() -> Self {
        LapParams {
            name: "lap".into(),
            stations: 4,
            periods: 42,
            trains: 60,
            loco_types: 2,
            fleet: None,
            configs: default_configs(),
            demand_min: 1,
            demand_max: 4,
            idle_cost: 0.05,
            deadhead_cost: None,
            max_trip: 6,
            max_dwell: 6,
            min_walk_trips: 2,
            max_walk_trips: 5,
            perturbation_rate: 0.1,
            seed: 7,
        }
    }
}

impl LapParams {
    pub fn check(&self) -> Result<(), LapError> {
        let bad = |m: &str| Err(LapError::InvalidParams(m.to_string()));
        if self.trains < 2 {
            return bad("at least two trains are required");
        }
        if self.stations < 3 {
            return bad("at least three stations are required");
        }
        if self.periods < 2 || self.max_trip < 1 || self.max_trip >= self.periods {
            return bad("trip length must be in 1..periods");
        }
        if self.max_dwell < 1 {
            return bad("max_dwell must be positive");
        }
        if self.min_walk_trips < 2 || self.min_walk_trips > self.max_walk_trips {
            return bad("walk trip range must satisfy 2 <= min <= max");
        }
        if self.configs.len() < 2 {
            return bad("at least two configurations are required");
        }
        if self.configs.iter().any(|c| c.counts.len() != self.loco_types) {
            return bad("every configuration needs one count per locomotive type");
        }
        let max_power = self.configs.iter().map(|c| c.power).max().unwrap_or(0);
        if self.demand_min < 1 || self.demand_min > self.demand_max || self.demand_max > max_power {
            return bad("demand range must lie within 1..=max configuration power");
        }
        if self.configs.iter().filter(|c| c.power >= self.demand_max).count() < 2 {
            return bad("every demand needs at least two admissible configurations");
        }
        if let Some(f) = &self.fleet {
            if f.len() != self.loco_types {
                return bad("fleet needs one size per locomotive type");
            }
        }
        if self.deadhead_cost.is_some_and(|c| !(c.is_finite() && c >= 0.0)) {
            return bad("deadhead_cost must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.perturbation_rate) {
            return bad("perturbation_rate must lie in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainArc {
    pub id: usize,
    pub origin: usize,
    pub departure: usize,
    pub destination: usize,
    /// Arrival period counted from the departure's week, so it may exceed
    /// the horizon for trains crossing the week boundary.
    pub arrival: usize,
    pub demand: u32,
    /// Construction walk and its consist (the witness class).
    pub walk: usize,
    pub witness_config: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Walk {
    id: usize,
    config: usize,
    station: usize,
    start: usize,
    /// Positions of the walk's arcs in the arc list.
    slots: Vec<usize>,
    wraps: usize,
    /// Unwrapped `(station, from, to)` idle intervals.
    idle: Vec<(usize, usize, usize)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LapMeta {
    pub name: String,
    pub week: usize,
    pub stations: usize,
    pub periods: usize,
    pub fleet: Vec<u32>,
    pub configs: Vec<ConsistConfig>,
    pub arcs: Vec<TrainArc>,
    pub witness_objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LapInstance {
    pub model: Model,
    pub meta: LapMeta,
    pub witness: Assignment,
}

/// Generator state carried from one week to the next.
#[derive(Debug, Clone)]
struct Network {
    arcs: Vec<TrainArc>,
    walks: Vec<Walk>,
    next_arc_id: usize,
    next_walk_id: usize,
}

fn sub_seed(seed: u64, week: usize, attempt: u64) -> u64 {
    seed ^ (week as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ attempt.wrapping_mul(0xD1B5_4A32_D192_ED03)
}

/// One instance from `params`; identical to week one of a series.
pub fn generate(params: &LapParams) -> Result<LapInstance, LapError> {
    Ok(generate_weekly_series(params, 1)?.remove(0))
}

/// `weeks` consecutive instances; each week perturbs the previous one.
pub fn generate_weekly_series(params: &LapParams, weeks: usize) -> Result<Vec<LapInstance>, LapError> {
    params.check()?;
    if weeks == 0 {
        return Err(LapError::InvalidParams("weeks must be at least 1".into()));
    }
    let (mut net, fleet) = first_week(params)?;
    let mut out = vec![build_instance(params, &net, &fleet, 1)];
    for week in 2..=weeks {
        net = perturb(params, &net, &fleet, week)?;
        out.push(build_instance(params, &net, &fleet, week));
    }
    Ok(out)
}

fn first_week(params: &LapParams) -> Result<(Network, Vec<u32>), LapError> {
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(params.seed, 1, attempt));
        let mut net = Network {
            arcs: Vec::new(),
            walks: Vec::new(),
            next_arc_id: 0,
            next_walk_id: 0,
        };
        let mut remaining = params.trains;
        while remaining > 0 {
            let mut n = rng.gen_range(params.min_walk_trips..=params.max_walk_trips).min(remaining);
            if remaining - n == 1 {
                n += 1;
            }
            if n < 2 {
                n = 2;
            }
            let slots: Vec<usize> = (net.arcs.len()..net.arcs.len() + n).collect();
            add_walk(params, &mut rng, &mut net, &slots);
            remaining = remaining.saturating_sub(n);
        }
        net.arcs.truncate(params.trains);
        if net.arcs.len() != params.trains || net.walks.iter().any(|w| w.slots.iter().any(|&s| s >= params.trains)) {
            continue;
        }
        let usage = fleet_usage(params, &net);
        let fleet = match &params.fleet {
            Some(f) => f.clone(),
            None => usage.iter().map(|&u| (u as f64 * 1.25).ceil() as u32 + 1).collect(),
        };
        if usage.iter().zip(&fleet).all(|(u, f)| u <= f) {
            return Ok((net, fleet));
        }
    }
    Err(LapError::ConstructionFailure {
        trains: params.trains,
        attempts: MAX_ATTEMPTS,
    })
}

fn perturb(params: &LapParams, prev: &Network, fleet: &[u32], week: usize) -> Result<Network, LapError> {
    let t = prev.arcs.len();
    let target = (params.perturbation_rate * t as f64).round() as usize;
    if target == 0 {
        return Ok(prev.clone());
    }
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(params.seed, week, attempt));
        let mut net = prev.clone();

        let mut order: Vec<usize> = (0..net.walks.len()).collect();
        order.shuffle(&mut rng);
        let mut replaced = 0;
        let mut retired = Vec::new();
        for wi in order {
            if replaced >= target {
                break;
            }
            replaced += net.walks[wi].slots.len();
            retired.push(wi);
        }
        retired.sort_unstable();
        for &wi in retired.iter().rev() {
            let old = net.walks.remove(wi);
            add_walk(params, &mut rng, &mut net, &old.slots);
        }

        let mut idx: Vec<usize> = (0..t).collect();
        idx.shuffle(&mut rng);
        for &a in idx.iter().take(target) {
            let power = params.configs[net.arcs[a].witness_config].power;
            net.arcs[a].demand = sample_demand(params, &mut rng, power);
        }

        if fleet_usage(params, &net).iter().zip(fleet).all(|(u, f)| u <= f) {
            return Ok(net);
        }
    }
    Err(LapError::ConstructionFailure {
        trains: params.trains,
        attempts: MAX_ATTEMPTS,
    })
}

fn sample_demand(params: &LapParams, rng: &mut impl Rng, power: u32) -> u32 {
    rng.gen_range(params.demand_min..=params.demand_max.min(power))
}

/// Routes a fresh consist along a closed walk with one trip per slot.
fn add_walk(params: &LapParams, rng: &mut impl Rng, net: &mut Network, slots: &[usize]) {
    let p = params.periods;
    let n = slots.len();
    let admissible: Vec<usize> = (0..params.configs.len())
        .filter(|&c| params.configs[c].power >= params.demand_min)
        .collect();
    let config = *admissible.choose(rng).expect("checked params");
    let power = params.configs[config].power;
    let home = rng.gen_range(0..params.stations);
    let start = rng.gen_range(0..p);
    let walk_id = net.next_walk_id;
    net.next_walk_id += 1;

    let mut cur = home;
    let mut time = start;
    let mut idle = Vec::new();
    for (i, &slot) in slots.iter().enumerate() {
        if i > 0 {
            let dwell = rng.gen_range(1..=params.max_dwell);
            idle.push((cur, time, time + dwell));
            time += dwell;
        }
        let dest = if i == n - 1 {
            home
        } else {
            let choices: Vec<usize> = (0..params.stations)
                .filter(|&s| s != cur && (i + 2 != n || s != home))
                .collect();
            *choices.choose(rng).expect("at least three stations")
        };
        let dur = rng.gen_range(1..=params.max_trip);
        let dep = time % p;
        let arc = TrainArc {
            id: net.next_arc_id,
            origin: cur,
            departure: dep,
            destination: dest,
            arrival: dep + dur,
            demand: sample_demand(params, rng, power),
            walk: walk_id,
            witness_config: config,
        };
        net.next_arc_id += 1;
        if slot < net.arcs.len() {
            net.arcs[slot] = arc;
        } else {
            net.arcs.push(arc);
        }
        time += dur;
        cur = dest;
    }
    // Wait at home until the walk closes on its start period.
    let elapsed = time - start;
    let wraps = elapsed.div_ceil(p).max(1);
    let close = start + wraps * p;
    if close > time {
        idle.push((home, time, close));
    }
    net.walks.push(Walk {
        id: walk_id,
        config,
        station: home,
        start,
        slots: slots.to_vec(),
        wraps,
        idle,
    });
}

fn fleet_usage(params: &LapParams, net: &Network) -> Vec<u32> {
    let mut usage = vec![0u32; params.loco_types];
    for w in &net.walks {
        for (u, &c) in usage.iter_mut().zip(&params.configs[w.config].counts) {
            *u += c * w.wraps as u32;
        }
    }
    usage
}

fn build_instance(params: &LapParams, net: &Network, fleet: &[u32], week: usize) -> LapInstance {
    let (s_count, p) = (params.stations, params.periods);
    let types = params.loco_types;
    let name = format!("{}_w{:02}", params.name, week);
    let mut variables = Vec::new();
    let mut objective = Vec::new();
    let mut groups = Vec::new();
    let mut constraints = Vec::new();
    // members[v] = (config, var id)
    let mut members: Vec<Vec<(usize, usize)>> = Vec::new();

    for (v, arc) in net.arcs.iter().enumerate() {
        let mut ms = Vec::new();
        for (c, cfg) in params.configs.iter().enumerate() {
            if cfg.power < arc.demand {
                continue;
            }
            let id = variables.len();
            variables.push(Variable {
                id,
                name: format!("x_t{}_{}", arc.id, cfg.name),
                lower: 0.0,
                upper: 1.0,
                kind: VarKind::Binary,
            });
            objective.push((id, cfg.cost));
            ms.push((c, id));
        }
        constraints.push(LinearConstraint {
            name: format!("onehot_t{}", arc.id),
            terms: ms.iter().map(|&(_, j)| (j, 1.0)).collect(),
            sense: RowSense::Eq,
            rhs: 1.0,
        });
        groups.push(OneHotGroup {
            object: v,
            name: format!("train_{}", arc.id),
            members: ms.iter().map(|&(c, j)| (c as ClassLabel, j)).collect(),
        });
        members.push(ms);
    }

    let ground = |t: usize, s: usize, q: usize| (t * s_count + s) * p + q;
    let ground_base = variables.len();
    for t in 0..types {
        for s in 0..s_count {
            for q in 0..p {
                let id = variables.len();
                debug_assert_eq!(id, ground_base + ground(t, s, q));
                variables.push(Variable {
                    id,
                    name: format!("g_{}_{}_{}", t, s, q),
                    lower: 0.0,
                    upper: fleet[t] as f64,
                    kind: VarKind::Integer,
                });
                objective.push((id, params.idle_cost));
            }
        }
    }

    // deadhead[v][t] = variable id of type-t locomotives riding train v dead.
    let mut deadhead: Vec<Vec<usize>> = Vec::new();
    if let Some(cost) = params.deadhead_cost {
        for arc in &net.arcs {
            let mut ids = Vec::with_capacity(types);
            for (t, &f) in fleet.iter().enumerate() {
                let id = variables.len();
                variables.push(Variable {
                    id,
                    name: format!("d_t{}_{}", arc.id, t),
                    lower: 0.0,
                    upper: f as f64,
                    kind: VarKind::Integer,
                });
                objective.push((id, cost));
                ids.push(id);
            }
            deadhead.push(ids);
        }
    }

    // Flow conservation: inflow - outflow = 0 per (type, station, period).
    for t in 0..types {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); s_count * p];
        for s in 0..s_count {
            for q in 0..p {
                let row = &mut rows[s * p + q];
                row.push((ground_base + ground(t, s, (q + p - 1) % p), 1.0));
                row.push((ground_base + ground(t, s, q), -1.0));
            }
        }
        for (v, arc) in net.arcs.iter().enumerate() {
            for &(c, j) in &members[v] {
                let n = params.configs[c].counts[t] as f64;
                if n == 0.0 {
                    continue;
                }
                rows[arc.origin * p + arc.departure].push((j, -n));
                rows[arc.destination * p + arc.arrival % p].push((j, n));
            }
            if let Some(ids) = deadhead.get(v) {
                rows[arc.origin * p + arc.departure].push((ids[t], -1.0));
                rows[arc.destination * p + arc.arrival % p].push((ids[t], 1.0));
            }
        }
        for s in 0..s_count {
            for q in 0..p {
                constraints.push(LinearConstraint {
                    name: format!("flow_{}_{}_{}", t, s, q),
                    terms: std::mem::take(&mut rows[s * p + q]),
                    sense: RowSense::Eq,
                    rhs: 0.0,
                });
            }
        }
    }

    // Locomotives of each type in use at the week boundary.
    for t in 0..types {
        let mut terms: Vec<(usize, f64)> = (0..s_count)
            .map(|s| (ground_base + ground(t, s, p - 1), 1.0))
            .collect();
        for (v, arc) in net.arcs.iter().enumerate() {
            if arc.arrival < p {
                continue;
            }
            for &(c, j) in &members[v] {
                let n = params.configs[c].counts[t];
                if n > 0 {
                    terms.push((j, n as f64));
                }
            }
            if let Some(ids) = deadhead.get(v) {
                terms.push((ids[t], 1.0));
            }
        }
        constraints.push(LinearConstraint {
            name: format!("fleet_{}", t),
            terms,
            sense: RowSense::Le,
            rhs: fleet[t] as f64,
        });
    }

    // Witness: each arc takes its walk's consist; idle intervals fill ground arcs.
    let mut x = vec![0.0; variables.len()];
    for (v, arc) in net.arcs.iter().enumerate() {
        let j = members[v]
            .iter()
            .find(|m| m.0 == arc.witness_config)
            .expect("witness consist covers its demand")
            .1;
        x[j] = 1.0;
    }
    for w in &net.walks {
        let counts = &params.configs[w.config].counts;
        for &(s, from, to) in &w.idle {
            for q in from..to {
                for (t, &n) in counts.iter().enumerate() {
                    x[ground_base + ground(t, s, q % p)] += n as f64;
                }
            }
        }
    }

    // Column order, which is what an MPS file round-trips to.
    for c in &mut constraints {
        c.terms.sort_by_key(|t| t.0);
    }
    let model = Model {
        name: name.clone(),
        objective,
        variables,
        constraints,
        groups,
    };
    let witness = Assignment(x);
    let witness_objective = model.objective_value(witness.values());
    LapInstance {
        meta: LapMeta {
            name,
            week,
            stations: s_count,
            periods: p,
            fleet: fleet.to_vec(),
            configs: params.configs.clone(),
            arcs: net.arcs.clone(),
            witness_objective,
        },
        model,
        witness,
    }
}

impl LapInstance {
    /// Writes `<name>.mps`, `<name>.groups.json` and `<name>.meta.json`.
    pub fn write_files(&self, dir: &Path) -> std::io::Result<[PathBuf; 3]> {
        let (mps, groups) = crate::mps::save_instance(&self.model, dir)?;
        let meta = dir.join(format!("{}.meta.json", self.model.name));
        let mut text = serde_json::to_string_pretty(&self.meta).map_err(std::io::Error::other)?;
        text.push('\n');
        std::fs::write(&meta, text)?;
        Ok([mps, groups, meta])
    }
}
