//! Chemical Reaction Optimization over EVUC schedules.
//!
//! A small population of molecules (schedules) reacts one elementary
//! reaction at a time. Every reaction conserves the total of potential
//! energy (schedule cost), kinetic energy and the shared energy buffer;
//! a move to a worse schedule is only possible while kinetic energy can
//! pay for it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{initial_solution, InitError};
use crate::dispatch::{evaluate, CostLedger, DispatchResult};
use crate::model::Instance;
use crate::neighborhood::{perturb_in_place, Move};
use crate::solution::Solution;

/// Evaluations between two best-cost samples in [`RunStats::trace`].
pub const TRACE_INTERVAL: u64 = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CroError {
    #[error("invalid CRO parameters: {0}")]
    InvalidParams(String),
    #[error(transparent)]
    Init(#[from] InitError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CroParams {
    pub pop_size: usize,
    pub initial_ke: f64,
    pub initial_buffer: f64,
    /// Probability that a step is a two-molecule reaction.
    pub mole_coll: f64,
    /// Lower bound of the fraction of surplus energy kept as kinetic energy.
    pub ke_loss_rate: f64,
    /// Hits without a new personal best before a molecule decomposes.
    pub alpha: u64,
    /// Kinetic energy at or below which two colliding molecules fuse.
    pub beta: f64,
    /// Objective evaluations allowed per run, initial population included.
    pub eval_budget: u64,
}

impl Default for CroParams {
    fn default() -> Self {
        Self {
            pop_size: 5,
            initial_ke: 100.0,
            initial_buffer: 0.0,
            mole_coll: 0.05,
            ke_loss_rate: 0.05,
            alpha: 10_000,
            beta: 100_000.0,
            eval_budget: 50_000,
        }
    }
}

impl CroParams {
    pub fn validate(&self) -> Result<(), CroError> {
        let bad = |msg: &str| Err(CroError::InvalidParams(msg.to_string()));
        if self.pop_size < 2 {
            return bad("pop_size must be at least 2");
        }
        if !(0.0..=1.0).contains(&self.mole_coll) || !(0.0..=1.0).contains(&self.ke_loss_rate) {
            return bad("mole_coll and ke_loss_rate must lie in [0, 1]");
        }
        if !(self.initial_ke >= 0.0) || !(self.initial_buffer >= 0.0) || !(self.beta >= 0.0) {
            return bad("initial_ke, initial_buffer and beta must be non-negative");
        }
        if self.eval_budget < self.pop_size as u64 {
            return bad("eval_budget must cover the initial population");
        }
        Ok(())
    }
}

/// Random stream for run `run` of a multi-run experiment seeded with `seed`.
///
/// Run 0 uses the same stream as [`solve`] with that seed, and the stream of
/// a run does not depend on how many runs execute or in which order.
pub fn run_rng(seed: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run);
    rng
}

#[derive(Debug, Clone)]
pub struct Molecule {
    pub structure: Solution,
    ledger: CostLedger,
    pub pe: f64,
    pub ke: f64,
    pub num_hit: u64,
    pub min_hit: u64,
    pub min_pe: f64,
}

impl Molecule {
    fn new(structure: Solution, ledger: CostLedger, pe: f64, ke: f64) -> Self {
        Self {
            structure,
            ledger,
            pe,
            ke,
            num_hit: 0,
            min_hit: 0,
            min_pe: pe,
        }
    }

    fn accept(&mut self, candidate: Candidate, ke: f64) {
        self.structure = candidate.structure;
        self.ledger = candidate.ledger;
        self.pe = candidate.pe;
        self.ke = ke;
        if self.pe < self.min_pe {
            self.min_pe = self.pe;
            self.min_hit = self.num_hit;
        }
    }
}

struct Candidate {
    structure: Solution,
    ledger: CostLedger,
    pe: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reaction {
    OnWall,
    Decomposition,
    InterCollision,
    Synthesis,
}

impl Reaction {
    pub const ALL: [Reaction; 4] = [
        Reaction::OnWall,
        Reaction::Decomposition,
        Reaction::InterCollision,
        Reaction::Synthesis,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint {
    pub evaluations: u64,
    pub best_cost: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct RunStats {
    pub evaluations: u64,
    /// Attempts per reaction, indexed in [`Reaction::ALL`] order.
    pub attempted: [u64; 4],
    pub accepted: [u64; 4],
    pub initial_best_cost: f64,
    pub final_population: usize,
    pub trace: Vec<TracePoint>,
}

impl RunStats {
    pub fn attempted(&self, reaction: Reaction) -> u64 {
        self.attempted[reaction.index()]
    }

    pub fn accepted(&self, reaction: Reaction) -> u64 {
        self.accepted[reaction.index()]
    }
}

#[derive(Debug, Clone)]
pub struct CroOutcome {
    pub best: Solution,
    pub dispatch: DispatchResult,
    pub stats: RunStats,
}

impl CroOutcome {
    pub fn best_cost(&self) -> f64 {
        self.dispatch.total_cost
    }
}

/// The reaction vessel: population, energy buffer and the best schedule seen.
pub struct Reactor<'a> {
    instance: &'a Instance,
    params: CroParams,
    rng: ChaCha8Rng,
    population: Vec<Molecule>,
    buffer: f64,
    best: Solution,
    best_cost: f64,
    stats: RunStats,
    next_trace: u64,
}

impl<'a> Reactor<'a> {
    pub fn new(instance: &'a Instance, params: CroParams, seed: u64) -> Result<Self, CroError> {
        Self::with_rng(instance, params, ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn with_rng(instance: &'a Instance, params: CroParams, mut rng: ChaCha8Rng) -> Result<Self, CroError> {
        params.validate()?;
        let mut population = Vec::with_capacity(params.pop_size);
        for _ in 0..params.pop_size {
            let structure = initial_solution(instance, &mut rng)?;
            let ledger = CostLedger::new(instance, &structure);
            let pe = ledger.total(instance);
            population.push(Molecule::new(structure, ledger, pe, params.initial_ke));
        }
        let best_index = (0..population.len())
            .min_by(|&a, &b| population[a].pe.total_cmp(&population[b].pe))
            .expect("population is non-empty");
        let best = population[best_index].structure.clone();
        let best_cost = population[best_index].pe;
        let stats = RunStats {
            evaluations: params.pop_size as u64,
            initial_best_cost: best_cost,
            final_population: population.len(),
            trace: vec![TracePoint {
                evaluations: params.pop_size as u64,
                best_cost,
            }],
            ..RunStats::default()
        };
        let next_trace = (params.pop_size as u64 / TRACE_INTERVAL + 1) * TRACE_INTERVAL;
        Ok(Self {
            instance,
            buffer: params.initial_buffer,
            params,
            rng,
            population,
            best,
            best_cost,
            stats,
            next_trace,
        })
    }

    pub fn population(&self) -> &[Molecule] {
        &self.population
    }

    pub fn buffer(&self) -> f64 {
        self.buffer
    }

    pub fn evaluations(&self) -> u64 {
        self.stats.evaluations
    }

    pub fn best(&self) -> &Solution {
        &self.best
    }

    pub fn best_cost(&self) -> f64 {
        self.best_cost
    }

    pub fn stats(&self) -> &RunStats {
        &self.stats
    }

    pub fn is_exhausted(&self) -> bool {
        self.stats.evaluations >= self.params.eval_budget
    }

    /// Potential plus kinetic energy of every molecule plus the buffer.
    pub fn total_energy(&self) -> f64 {
        self.population.iter().map(|m| m.pe + m.ke).sum::<f64>() + self.buffer
    }

    /// Run one elementary reaction; `None` once the budget is spent.
    pub fn step(&mut self) -> Option<(Reaction, bool)> {
        if self.is_exhausted() {
            return None;
        }
        let unimolecular = self.rng.random::<f64>() > self.params.mole_coll || self.population.len() < 2;
        let (reaction, accepted) = if unimolecular {
            let idx = self.rng.random_range(0..self.population.len());
            let m = &self.population[idx];
            if m.num_hit - m.min_hit >= self.params.alpha {
                (Reaction::Decomposition, self.decompose(idx))
            } else {
                (Reaction::OnWall, self.on_wall(idx))
            }
        } else {
            let n = self.population.len();
            let a = self.rng.random_range(0..n);
            let mut b = self.rng.random_range(0..n - 1);
            if b >= a {
                b += 1;
            }
            let (ma, mb) = (&self.population[a], &self.population[b]);
            if ma.ke <= self.params.beta && mb.ke <= self.params.beta && n > 2 {
                (Reaction::Synthesis, self.synthesize(a, b))
            } else {
                (Reaction::InterCollision, self.inter_collide(a, b))
            }
        };
        self.stats.attempted[reaction.index()] += 1;
        if accepted {
            self.stats.accepted[reaction.index()] += 1;
        }
        self.stats.final_population = self.population.len();
        self.record_trace();
        Some((reaction, accepted))
    }

    pub fn run(mut self) -> CroOutcome {
        while self.step().is_some() {}
        self.finish()
    }

    pub fn finish(mut self) -> CroOutcome {
        if self.stats.trace.last().map(|p| p.evaluations) != Some(self.stats.evaluations) {
            self.stats.trace.push(TracePoint {
                evaluations: self.stats.evaluations,
                best_cost: self.best_cost,
            });
        }
        let dispatch = evaluate(self.instance, &self.best).expect("solver keeps instance dimensions");
        CroOutcome {
            best: self.best,
            dispatch,
            stats: self.stats,
        }
    }

    fn record_trace(&mut self) {
        while self.stats.evaluations >= self.next_trace {
            self.stats.trace.push(TracePoint {
                evaluations: self.next_trace,
                best_cost: self.best_cost,
            });
            self.next_trace += TRACE_INTERVAL;
        }
    }

    /// Perturb a copy of molecule `idx`; costs one evaluation.
    fn neighbour(&mut self, idx: usize) -> Candidate {
        let source = &self.population[idx];
        let mut structure = source.structure.clone();
        let mut ledger = source.ledger.clone();
        match perturb_in_place(self.instance, &mut structure, &mut self.rng) {
            Move::Toggled { t, i } => {
                ledger.refresh_interval(self.instance, &structure, t);
                ledger.refresh_unit(self.instance, &structure, i);
            }
            Move::Shifted { inc, dec, .. } => {
                ledger.refresh_interval(self.instance, &structure, inc);
                ledger.refresh_interval(self.instance, &structure, dec);
            }
            Move::Unchanged => {}
        }
        let pe = ledger.total(self.instance);
        self.stats.evaluations += 1;
        Candidate { structure, ledger, pe }
    }

    fn observe(&mut self, idx: usize) {
        let m = &self.population[idx];
        if m.pe < self.best_cost {
            self.best_cost = m.pe;
            self.best = m.structure.clone();
        }
    }

    fn on_wall(&mut self, idx: usize) -> bool {
        let candidate = self.neighbour(idx);
        let m = &mut self.population[idx];
        m.num_hit += 1;
        let surplus = m.pe + m.ke - candidate.pe;
        if surplus < 0.0 {
            return false;
        }
        let keep = self.rng.random_range(self.params.ke_loss_rate..=1.0);
        let ke = surplus * keep;
        self.buffer += surplus - ke;
        self.population[idx].accept(candidate, ke);
        self.observe(idx);
        true
    }

    fn decompose(&mut self, idx: usize) -> bool {
        let first = self.neighbour(idx);
        let second = self.neighbour(idx);
        let parent = &mut self.population[idx];
        let own = parent.pe + parent.ke;
        let needed = first.pe + second.pe;
        let residual = if own >= needed {
            own - needed
        } else if needed - own <= self.buffer {
            self.buffer -= needed - own;
            0.0
        } else {
            parent.num_hit += 1;
            return false;
        };
        let split = self.rng.random::<f64>();
        let ke_first = residual * split;
        self.population[idx] = Molecule::new(first.structure, first.ledger, first.pe, ke_first);
        self.population.push(Molecule::new(
            second.structure,
            second.ledger,
            second.pe,
            residual - ke_first,
        ));
        self.observe(idx);
        self.observe(self.population.len() - 1);
        true
    }

    fn inter_collide(&mut self, a: usize, b: usize) -> bool {
        let first = self.neighbour(a);
        let second = self.neighbour(b);
        self.population[a].num_hit += 1;
        self.population[b].num_hit += 1;
        let (ma, mb) = (&self.population[a], &self.population[b]);
        let residual = ma.pe + ma.ke + mb.pe + mb.ke - first.pe - second.pe;
        if residual < 0.0 {
            return false;
        }
        let split = self.rng.random::<f64>();
        let ke_first = residual * split;
        self.population[a].accept(first, ke_first);
        self.population[b].accept(second, residual - ke_first);
        self.observe(a);
        self.observe(b);
        true
    }

    fn synthesize(&mut self, a: usize, b: usize) -> bool {
        let better = if self.population[b].pe < self.population[a].pe {
            b
        } else {
            a
        };
        let child = self.neighbour(better);
        let (ma, mb) = (&self.population[a], &self.population[b]);
        let residual = ma.pe + ma.ke + mb.pe + mb.ke - child.pe;
        if residual < 0.0 {
            self.population[a].num_hit += 1;
            self.population[b].num_hit += 1;
            return false;
        }
        let (keep, drop) = (a.min(b), a.max(b));
        self.population.swap_remove(drop);
        self.population[keep] = Molecule::new(child.structure, child.ledger, child.pe, residual);
        self.observe(keep);
        true
    }
}

/// Run CRO to the evaluation budget and return the best schedule found.
pub fn solve(instance: &Instance, params: &CroParams, seed: u64) -> Result<CroOutcome, CroError> {
    Ok(Reactor::new(instance, params.clone(), seed)?.run())
}

/// Like [`solve`] but with an explicit random stream (see [`run_rng`]).
pub fn solve_with_rng(instance: &Instance, params: &CroParams, rng: ChaCha8Rng) -> Result<CroOutcome, CroError> {
    Ok(Reactor::with_rng(instance, params.clone(), rng)?.run())
}
