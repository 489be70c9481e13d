//! Optimal two-draft acceptance via maximum flow.
//!
//! For a fixed pair joint `Q` and target `p`, the best achievable acceptance
//! probability is a transport problem that only needs the mass a plan puts
//! on "accept slot 1" and "accept slot 2" for every pair. That reduced
//! problem is a maximum flow: the source feeds each token `v` with its
//! first-slot marginal, `v` drains to the sink up to `p(v)`, and an edge
//! `u -> v` of capacity `Q(u, v)` lets pair `(u, v)` hand its mass to `v`.
//!
//! The solver works on a bipartite split of that network (token as first
//! draft, token as target). Both forms have the same value, but a split
//! witness never routes mass through an intermediate token, so it maps
//! straight to a per-pair plan. [`max_flow_value_unsplit`] solves the plain
//! form as a cross-check.
//!
//! That the flow value equals the reduced LP optimum is derived rather than
//! quoted: every plan is a flow (so the value is an upper bound) and
//! [`flow_to_plan`] turns the witness into a plan with the same total.

mod dinic;
mod full;
mod otm;

pub use full::{membership_cost, reconstruct_full_coupling, FullCoupling, MAX_FULL_VOCAB};
pub use otm::{otm_accept_rule, OtmVerifier};

use serde::Serialize;

use crate::draftjoint::PairJoint;
use crate::error::{Error, Result};
use crate::simplex::{Distribution, Token};
use crate::verify::SpecHubVerifier;
use dinic::Dinic;

/// Capacities are snapped to multiples of `2^-48` before solving.
pub const FLOW_GRID: f64 = (1u64 << 48) as f64;

/// Slack allowed by the plan invariants.
pub const PLAN_TOLERANCE: f64 = 1e-9;

/// Largest vocabulary for which [`SimplifiedPlan::to_dense`] materializes `V × V` matrices.
pub const MAX_DENSE_PLAN_VOCAB: usize = 4096;

fn to_grid(c: f64) -> i64 {
    (c.max(0.0) * FLOW_GRID).round() as i64
}

fn from_grid(c: i64) -> f64 {
    c as f64 / FLOW_GRID
}

/// Capacities of the pair-transport network for `(Q, p)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowNetwork {
    vocab: usize,
    /// `g(s, v)`: first-slot marginal of `Q`.
    pub source: Vec<f64>,
    /// `g(v, t) = p(v)`.
    pub sink: Vec<f64>,
    /// `(u, v, Q(u, v))` for `u != v` with positive mass.
    pub edges: Vec<(Token, Token, f64)>,
}

impl FlowNetwork {
    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn capacity(&self, u: Token, v: Token) -> f64 {
        self.edges
            .iter()
            .find(|(a, b, _)| *a == u && *b == v)
            .map_or(0.0, |e| e.2)
    }
}

/// Builds the network; a hub-sparse `Q` yields only hub row and column edges.
pub fn build_flow(joint: &PairJoint, p: &Distribution) -> Result<FlowNetwork> {
    if joint.vocab() != p.len() {
        return Err(Error::invalid(format!(
            "joint has vocabulary {}, target has {}",
            joint.vocab(),
            p.len()
        )));
    }
    let edges = joint
        .support()
        .into_iter()
        .filter(|(u, v, _)| u != v)
        .collect();
    Ok(FlowNetwork {
        vocab: p.len(),
        source: joint.first_marginal(),
        sink: p.probs().to_vec(),
        edges,
    })
}

/// Maximum flow and its witness.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowSolution {
    pub value: f64,
    /// Flow on `s -> v`.
    pub source: Vec<f64>,
    /// Flow on `v -> t`.
    pub sink: Vec<f64>,
    /// Part of `s -> v` that leaves through `v -> t` directly (first-slot acceptance of `v`).
    pub direct: Vec<f64>,
    /// Flow on each inter-token edge, aligned with [`FlowNetwork::edges`].
    pub edges: Vec<f64>,
}

/// Solves the split network exactly on the `2^-48` grid.
pub fn max_flow(net: &FlowNetwork) -> FlowSolution {
    let v = net.vocab;
    let (s, t) = (0, 1);
    let first = |x: usize| 2 + x;
    let second = |x: usize| 2 + v + x;
    let mut g = Dinic::new(2 + 2 * v);
    let src_ids: Vec<usize> = (0..v)
        .map(|x| g.add_edge(s, first(x), to_grid(net.source[x])))
        .collect();
    let direct_ids: Vec<usize> = (0..v)
        .map(|x| g.add_edge(first(x), second(x), to_grid(net.source[x])))
        .collect();
    let edge_ids: Vec<usize> = net
        .edges
        .iter()
        .map(|&(a, b, c)| g.add_edge(first(a), second(b), to_grid(c)))
        .collect();
    let sink_ids: Vec<usize> = (0..v)
        .map(|x| g.add_edge(second(x), t, to_grid(net.sink[x])))
        .collect();
    let value = g.max_flow(s, t);
    let read = |ids: &[usize]| ids.iter().map(|&e| from_grid(g.flow(e))).collect::<Vec<_>>();
    FlowSolution {
        value: from_grid(value),
        source: read(&src_ids),
        sink: read(&sink_ids),
        direct: read(&direct_ids),
        edges: read(&edge_ids),
    }
}

/// Value of the plain network (`s -> v -> t` plus token-to-token edges), solved independently.
pub fn max_flow_value_unsplit(net: &FlowNetwork) -> f64 {
    let v = net.vocab;
    let (s, t) = (v, v + 1);
    let mut g = Dinic::new(v + 2);
    for x in 0..v {
        g.add_edge(s, x, to_grid(net.source[x]));
        g.add_edge(x, t, to_grid(net.sink[x]));
    }
    for &(a, b, c) in &net.edges {
        g.add_edge(a, b, to_grid(c));
    }
    from_grid(g.max_flow(s, t))
}

/// Acceptance mass a plan assigns to one draft pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlanEntry {
    pub x1: Token,
    pub x2: Token,
    /// `Q(x1, x2)`.
    pub mass: f64,
    /// `pi(x1, x2, y = x1)`.
    pub accept1: f64,
    /// `pi(x1, x2, y = x2)`; always zero on the diagonal, where slot 1 takes everything.
    pub accept2: f64,
}

/// Acceptance part of a two-draft transport plan, stored over the support of `Q`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimplifiedPlan {
    p: Vec<f64>,
    entries: Vec<PlanEntry>,
}

impl SimplifiedPlan {
    /// Plan that accepts nothing.
    pub fn zero(joint: &PairJoint, p: &Distribution) -> Self {
        let entries = joint
            .support()
            .into_iter()
            .map(|(x1, x2, mass)| PlanEntry {
                x1,
                x2,
                mass,
                accept1: 0.0,
                accept2: 0.0,
            })
            .collect();
        Self {
            p: p.probs().to_vec(),
            entries,
        }
    }

    /// Wraps explicit entries after checking the plan invariants.
    pub fn from_entries(p: &Distribution, entries: Vec<PlanEntry>) -> Result<Self> {
        let plan = Self {
            p: p.probs().to_vec(),
            entries,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Plan induced by a full coupling `pi(x1, x2, y)` (row-major `V × V × V`).
    pub fn from_coupling(joint: &PairJoint, p: &Distribution, pi: &[f64]) -> Result<Self> {
        let v = p.len();
        if pi.len() != v * v * v || joint.vocab() != v {
            return Err(Error::invalid("coupling shape does not match the vocabulary"));
        }
        let entries = joint
            .support()
            .into_iter()
            .map(|(x1, x2, mass)| {
                let base = (x1 * v + x2) * v;
                let (accept1, accept2) = if x1 == x2 {
                    (pi[base + x1], 0.0)
                } else {
                    (pi[base + x1], pi[base + x2])
                };
                PlanEntry {
                    x1,
                    x2,
                    mass,
                    accept1,
                    accept2,
                }
            })
            .collect();
        Self::from_entries(p, entries)
    }

    pub fn vocab(&self) -> usize {
        self.p.len()
    }

    pub fn target(&self) -> &[f64] {
        &self.p
    }

    pub fn entries(&self) -> &[PlanEntry] {
        &self.entries
    }

    pub fn entry(&self, x1: Token, x2: Token) -> Option<&PlanEntry> {
        self.entries.iter().find(|e| e.x1 == x1 && e.x2 == x2)
    }

    /// Total acceptance probability `sum (accept1 + accept2)`.
    pub fn acceptance(&self) -> f64 {
        self.entries.iter().map(|e| e.accept1 + e.accept2).sum()
    }

    /// Target mass `alpha(y)` the plan accepts as token `y`.
    pub fn accepted_mass(&self) -> Vec<f64> {
        let mut alpha = vec![0.0; self.p.len()];
        for e in &self.entries {
            alpha[e.x1] += e.accept1;
            alpha[e.x2] += e.accept2;
        }
        alpha
    }

    /// Unaccepted target mass `max(p(y) - alpha(y), 0)`.
    pub fn residual_weights(&self) -> Vec<f64> {
        self.accepted_mass()
            .iter()
            .zip(&self.p)
            .map(|(a, p)| (p - a).max(0.0))
            .collect()
    }

    /// Checks non-negativity, per-pair capacity and per-token target bounds.
    pub fn validate(&self) -> Result<()> {
        for e in &self.entries {
            if e.accept1 < -PLAN_TOLERANCE || e.accept2 < -PLAN_TOLERANCE {
                return Err(Error::invalid(format!("negative acceptance on ({}, {})", e.x1, e.x2)));
            }
            if e.accept1 + e.accept2 > e.mass + PLAN_TOLERANCE {
                return Err(Error::invalid(format!(
                    "pair ({}, {}) accepts {} of its {} mass",
                    e.x1,
                    e.x2,
                    e.accept1 + e.accept2,
                    e.mass
                )));
            }
        }
        for (y, (a, p)) in self.accepted_mass().iter().zip(&self.p).enumerate() {
            if *a > p + PLAN_TOLERANCE {
                return Err(Error::invalid(format!("token {y} accepted {a} > p = {p}")));
            }
        }
        Ok(())
    }

    /// Dense row-major `(accept1, accept2)` matrices.
    pub fn to_dense(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let v = self.p.len();
        if v > MAX_DENSE_PLAN_VOCAB {
            return Err(Error::ResourceLimit(format!(
                "dense plans are limited to V <= {MAX_DENSE_PLAN_VOCAB}"
            )));
        }
        let mut a1 = vec![0.0; v * v];
        let mut a2 = vec![0.0; v * v];
        for e in &self.entries {
            a1[e.x1 * v + e.x2] = e.accept1;
            a2[e.x1 * v + e.x2] = e.accept2;
        }
        Ok((a1, a2))
    }
}

/// Rejection probability `1 - sum (accept1 + accept2)`.
pub fn plan_cost(plan: &SimplifiedPlan) -> f64 {
    1.0 - plan.acceptance()
}

/// Converts a split-network witness into a per-pair plan.
///
/// `accept2(u, v)` is the flow on `u -> v`. The first-slot acceptance of `v`
/// (its direct flow) is spread over the pairs `(v, x2)` in descending order of
/// their leftover mass.
pub fn flow_to_plan(
    net: &FlowNetwork,
    flow: &FlowSolution,
    joint: &PairJoint,
    p: &Distribution,
) -> Result<SimplifiedPlan> {
    if net.vocab != p.len() || joint.vocab() != p.len() || flow.edges.len() != net.edges.len() {
        return Err(Error::invalid("flow, network, joint and target disagree on shape"));
    }
    let mut plan = SimplifiedPlan::zero(joint, p);
    let index: std::collections::HashMap<(Token, Token), usize> = plan
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| ((e.x1, e.x2), i))
        .collect();
    for (&(u, v, _), &f) in net.edges.iter().zip(&flow.edges) {
        if f <= 0.0 {
            continue;
        }
        let &i = index
            .get(&(u, v))
            .ok_or_else(|| Error::Internal(format!("flow on ({u}, {v}) outside the joint support")))?;
        let e = &mut plan.entries[i];
        e.accept2 = f.min(e.mass);
    }
    let mut by_first: Vec<Vec<usize>> = vec![Vec::new(); p.len()];
    for (i, e) in plan.entries.iter().enumerate() {
        by_first[e.x1].push(i);
    }
    for (x, rows) in by_first.iter_mut().enumerate() {
        let mut budget = flow.direct[x];
        if budget <= 0.0 {
            continue;
        }
        let leftover = |e: &PlanEntry| e.mass - e.accept2;
        rows.sort_by(|&a, &b| {
            leftover(&plan.entries[b])
                .total_cmp(&leftover(&plan.entries[a]))
                .then(a.cmp(&b))
        });
        for &i in rows.iter() {
            let e = &mut plan.entries[i];
            let take = budget.min(leftover(e).max(0.0));
            e.accept1 = take;
            budget -= take;
            if budget <= 0.0 {
                break;
            }
        }
        if budget > PLAN_TOLERANCE {
            return Err(Error::Internal(format!(
                "first-slot flow of token {x} exceeds its leftover pair mass by {budget}"
            )));
        }
    }
    plan.validate()
        .map_err(|e| Error::Internal(format!("flow produced an infeasible plan: {e}")))?;
    Ok(plan)
}

/// Optimal plan for `(Q, p)`: builds the network, solves it and converts the witness.
pub fn optimal_plan(joint: &PairJoint, p: &Distribution) -> Result<(SimplifiedPlan, FlowSolution)> {
    let net = build_flow(joint, p)?;
    let flow = max_flow(&net);
    let plan = flow_to_plan(&net, &flow, joint, p)?;
    Ok((plan, flow))
}

/// SpecHub's closed-form plan on the hub-sparse joint of `q`.
pub fn spechub_plan(p: &Distribution, q: &Distribution) -> Result<SimplifiedPlan> {
    let verifier = SpecHubVerifier::new(p, q)?;
    let hub = verifier.hub();
    let mut entries = Vec::new();
    for (x1, x2, mass) in verifier.joint().support() {
        let (other, then_hub) = verifier.acceptance((x1, x2))?;
        let other_mass = other * mass;
        let hub_mass = (1.0 - other) * then_hub * mass;
        let (accept1, accept2) = if x2 == hub {
            (other_mass, hub_mass)
        } else {
            (hub_mass, other_mass)
        };
        entries.push(PlanEntry {
            x1,
            x2,
            mass,
            accept1,
            accept2,
        });
    }
    SimplifiedPlan::from_entries(p, entries)
}
