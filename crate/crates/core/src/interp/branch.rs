//! Many-worlds execution: every categorical draw forks one weighted child
//! per outcome instead of sampling.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::{ConfigError, RunConfig, TerminationReason};
use crate::engine::{
    apply_law, select_law, BranchSignal, CausalModel, Chooser, EvalErrorKind,
};
use crate::state::SystemState;

#[derive(Debug, Clone)]
pub struct BranchConfig {
    /// `dt`, `max_steps`, and `mode` apply to every lineage; the seed and
    /// observables are unused.
    pub run: RunConfig,
    /// Draws allowed per lineage before it stops as `DepthBound`.
    pub depth: u32,
    /// Most live lineages kept after each fork generation.
    pub width: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BranchError {
    #[error("law `{0}` draws from a continuous range, which cannot be branched")]
    ContinuousRandomNotBranchable(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("depth and width bounds must be at least 1")]
    Bounds,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WorldNode {
    pub id: usize,
    /// Outcome labels taken from the parent, joined with `/` when one step
    /// drew several times. `None` for the root.
    pub outcome: Option<String>,
    /// Probability of `outcome` given the parent.
    pub probability: f64,
    pub weight: f64,
    pub step: u64,
    pub time: f64,
    pub draws: u32,
    pub state: SystemState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub termination: Option<TerminationReason>,
    /// State where a leaf's lineage stopped.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_state: Option<SystemState>,
    pub children: Vec<WorldNode>,
}

impl WorldNode {
    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a WorldNode>) {
        if self.children.is_empty() {
            out.push(self);
        }
        for c in &self.children {
            c.collect_leaves(out);
        }
    }

    /// Checks that children's weights add up to this node's weight.
    pub fn weights_conserved(&self, tol: f64) -> bool {
        if self.children.is_empty() {
            return true;
        }
        let sum: f64 = self.children.iter().map(|c| c.weight).sum();
        (sum - self.weight).abs() <= tol && self.children.iter().all(|c| c.weights_conserved(tol))
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WorldTree {
    pub model_name: String,
    pub depth_bound: u32,
    pub width_bound: usize,
    /// Total weight of lineages dropped by the width bound.
    pub pruned_mass: f64,
    pub root: WorldNode,
}

impl WorldTree {
    /// Every leaf, pruned ones included, in depth-first order.
    pub fn leaves(&self) -> Vec<&WorldNode> {
        let mut out = Vec::new();
        self.root.collect_leaves(&mut out);
        out
    }

    /// Leaves whose lineage was not pruned.
    pub fn live_leaves(&self) -> Vec<&WorldNode> {
        self.leaves()
            .into_iter()
            .filter(|n| n.termination != Some(TerminationReason::Pruned))
            .collect()
    }
}

/// Replays a fixed outcome prefix; asks for a choice once it runs out.
struct Scripted<'a> {
    script: &'a [usize],
    pos: usize,
    taken: Vec<(f64, String)>,
}

impl Chooser for Scripted<'_> {
    fn categorical(
        &mut self,
        probs: &[f64],
        label: &dyn Fn(usize) -> String,
    ) -> Result<usize, BranchSignal> {
        match self.script.get(self.pos) {
            Some(&i) => {
                self.pos += 1;
                self.taken.push((probs[i], label(i)));
                Ok(i)
            }
            None => Err(BranchSignal::NeedsChoice {
                probs: probs.to_vec(),
                labels: (0..probs.len()).map(label).collect(),
            }),
        }
    }

    fn uniform(&mut self) -> Result<f64, BranchSignal> {
        Err(BranchSignal::Continuous)
    }

    fn normal(&mut self) -> Result<f64, BranchSignal> {
        Err(BranchSignal::Continuous)
    }
}

struct Arena {
    nodes: Vec<Slot>,
}

struct Slot {
    outcome: Option<String>,
    probability: f64,
    weight: f64,
    step: u64,
    draws: u32,
    state: SystemState,
    termination: Option<TerminationReason>,
    final_state: Option<SystemState>,
    children: Vec<usize>,
}

/// One branch of a forking step: outcome indices, their probability, the
/// labels, and the resulting state.
struct Outcome {
    probability: f64,
    labels: Vec<String>,
    draws: usize,
    state: SystemState,
}

enum Advance {
    Leaf(TerminationReason, SystemState),
    Fork(Vec<Outcome>, u64),
}

/// Every complete outcome sequence for one application of the law chosen
/// on `s`, in lexicographic order of outcome indices.
fn expand(
    model: &CausalModel,
    s: &SystemState,
    cfg: &RunConfig,
    next_time: f64,
    script: &mut Vec<usize>,
    out: &mut Vec<Outcome>,
) -> Result<Result<(), TerminationReason>, BranchError> {
    let law = match select_law(model, s, cfg.dt, cfg.mode) {
        Ok(l) => l,
        Err(e) => return Ok(Err(e.into())),
    };
    let mut ch = Scripted {
        script,
        pos: 0,
        taken: Vec::new(),
    };
    match apply_law(law, s, cfg.dt, &mut ch) {
        Ok(mut s1) => {
            s1.set_time(next_time);
            out.push(Outcome {
                probability: ch.taken.iter().map(|(p, _)| p).product(),
                labels: ch.taken.into_iter().map(|(_, l)| l).collect(),
                draws: script.len(),
                state: s1,
            });
            Ok(Ok(()))
        }
        Err(e) => match e.kind {
            EvalErrorKind::Branch(BranchSignal::NeedsChoice { probs, .. }) => {
                for (i, p) in probs.iter().enumerate() {
                    if *p > 0.0 {
                        script.push(i);
                        let r = expand(model, s, cfg, next_time, script, out)?;
                        script.pop();
                        if r.is_err() {
                            return Ok(r);
                        }
                    }
                }
                Ok(Ok(()))
            }
            EvalErrorKind::Branch(BranchSignal::Continuous) => {
                Err(BranchError::ContinuousRandomNotBranchable(law.name.clone()))
            }
            _ => Ok(Err(e.into())),
        },
    }
}

/// Steps one lineage deterministically until it stops or must fork.
fn advance(
    model: &CausalModel,
    mut s: SystemState,
    mut k: u64,
    draws: u32,
    t0: f64,
    cfg: &BranchConfig,
) -> Result<Advance, BranchError> {
    let rc = &cfg.run;
    loop {
        match model.should_halt(&s, rc.dt) {
            Ok(true) => return Ok(Advance::Leaf(TerminationReason::Halted, s)),
            Ok(false) => {}
            Err(e) => return Ok(Advance::Leaf(e.into(), s)),
        }
        if k == rc.max_steps {
            return Ok(Advance::Leaf(TerminationReason::MaxSteps, s));
        }
        let next_time = t0 + (k + 1) as f64 * rc.dt;
        let mut outs = Vec::new();
        if let Err(reason) = expand(model, &s, rc, next_time, &mut Vec::new(), &mut outs)? {
            return Ok(Advance::Leaf(reason, s));
        }
        if outs.len() == 1 && outs[0].draws == 0 {
            s = outs.pop().expect("one outcome").state;
            k += 1;
            continue;
        }
        if draws >= cfg.depth {
            return Ok(Advance::Leaf(TerminationReason::DepthBound, s));
        }
        return Ok(Advance::Fork(outs, k + 1));
    }
}

/// Executes like [`super::run`] but forks at every categorical draw. The
/// frontier is advanced one fork generation at a time; after each
/// generation, lineages beyond `width` are pruned in order of weight
/// (descending), then creation order.
pub fn branch_run(
    model: &CausalModel,
    init: &SystemState,
    cfg: &BranchConfig,
) -> Result<WorldTree, BranchError> {
    cfg.run.validate()?;
    if cfg.depth == 0 || cfg.width == 0 {
        return Err(BranchError::Bounds);
    }
    let mut arena = Arena {
        nodes: vec![Slot {
            outcome: None,
            probability: 1.0,
            weight: 1.0,
            step: 0,
            draws: 0,
            state: init.clone(),
            termination: None,
            final_state: None,
            children: Vec::new(),
        }],
    };
    let t0 = init.time();
    let mut frontier = vec![0usize];
    let mut pruned_mass = 0.0;
    while !frontier.is_empty() {
        let results: Vec<Result<Advance, BranchError>> = frontier
            .par_iter()
            .map(|&i| {
                let n = &arena.nodes[i];
                advance(model, n.state.clone(), n.step, n.draws, t0, cfg)
            })
            .collect();
        let mut next = Vec::new();
        for (&i, r) in frontier.iter().zip(results) {
            match r? {
                Advance::Leaf(reason, s) => {
                    arena.nodes[i].termination = Some(reason);
                    arena.nodes[i].final_state = Some(s);
                }
                Advance::Fork(outs, step) => {
                    let (w, d) = (arena.nodes[i].weight, arena.nodes[i].draws);
                    for o in outs {
                        let id = arena.nodes.len();
                        arena.nodes.push(Slot {
                            outcome: Some(o.labels.join("/")),
                            probability: o.probability,
                            weight: w * o.probability,
                            step,
                            draws: d + o.draws as u32,
                            state: o.state,
                            termination: None,
                            final_state: None,
                            children: Vec::new(),
                        });
                        arena.nodes[i].children.push(id);
                        next.push(id);
                    }
                }
            }
        }
        if next.len() > cfg.width {
            let mut order = next.clone();
            order.sort_by(|a, b| {
                arena.nodes[*b]
                    .weight
                    .total_cmp(&arena.nodes[*a].weight)
                    .then(a.cmp(b))
            });
            for &i in &order[cfg.width..] {
                pruned_mass += arena.nodes[i].weight;
                arena.nodes[i].termination = Some(TerminationReason::Pruned);
            }
            let keep: Vec<usize> = order[..cfg.width].to_vec();
            next.retain(|i| keep.contains(i));
        }
        frontier = next;
    }
    let root = build(&mut arena, 0);
    Ok(WorldTree {
        model_name: model.name.clone(),
        depth_bound: cfg.depth,
        width_bound: cfg.width,
        pruned_mass,
        root,
    })
}

fn build(arena: &mut Arena, i: usize) -> WorldNode {
    let children: Vec<usize> = std::mem::take(&mut arena.nodes[i].children);
    let kids = children.into_iter().map(|c| build(arena, c)).collect();
    let n = &mut arena.nodes[i];
    WorldNode {
        id: i,
        outcome: n.outcome.take(),
        probability: n.probability,
        weight: n.weight,
        step: n.step,
        time: n.state.time(),
        draws: n.draws,
        state: n.state.clone(),
        termination: n.termination.take(),
        final_state: n.final_state.take(),
        children: kids,
    }
}
