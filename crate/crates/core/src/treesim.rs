//! Multi-step token-tree decoding simulation.
//!
//! The root of a [`TreeTopology`] stands for the already-decoded context;
//! every other node is a draft token. One step walks down from the root:
//! the children of the current node are the drafts for its slots, the
//! verifier either accepts one of them (and the walk descends into it) or
//! rejects all and the walk stops. Each step yields the accepted tokens plus
//! one bonus token, drawn from the residual on rejection or from the target
//! at a leaf.
//!
//! Distributions are keyed by `(step, depth)`, so siblings at the same depth
//! share one `(p, q)`. This is a simulation approximation: a real model would
//! condition each node on its own prefix.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::RngChooser;
use crate::simplex::Distribution;
use crate::synthlab::{gen_toy_pair, LogitNoise, ToyConfig};
use crate::verify::{step_verdict, Method, RateVector, Verdict};

/// Largest tree the constructors will build.
pub const MAX_TREE_NODES: usize = 1 << 20;

/// Rooted tree with children kept in draft-slot order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TreeTopology {
    parents: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depths: Vec<usize>,
}

impl TreeTopology {
    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    /// Root is node 0 for built trees; loaded trees may place it anywhere.
    pub fn root(&self) -> usize {
        self.parents.iter().position(Option::is_none).expect("validated tree has a root")
    }

    pub fn parent(&self, node: usize) -> Option<usize> {
        self.parents[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    pub fn depth(&self, node: usize) -> usize {
        self.depths[node]
    }

    /// Number of node levels, counting the root.
    pub fn levels(&self) -> usize {
        self.depths.iter().max().map_or(0, |d| d + 1)
    }

    /// Number of draft levels below the root; a step yields at most `draft_depth + 1` tokens.
    pub fn draft_depth(&self) -> usize {
        self.levels() - 1
    }

    pub fn max_branching(&self) -> usize {
        self.children.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Every internal node has exactly two children.
    pub fn is_binary(&self) -> bool {
        self.children.iter().all(|c| c.is_empty() || c.len() == 2)
    }

    /// Parent vector with `-1` for the root.
    pub fn parent_vector(&self) -> Vec<i64> {
        self.parents.iter().map(|p| p.map_or(-1, |p| p as i64)).collect()
    }
}

impl fmt::Display for TreeTopology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "tree(nodes={}, levels={}, max_branching={})",
            self.len(),
            self.levels(),
            self.max_branching()
        )
    }
}

/// Complete tree with `levels` levels (the root counts as one) and `branching` children per internal node.
pub fn make_full_tree(branching: usize, levels: usize) -> Result<TreeTopology> {
    if branching == 0 || levels == 0 {
        return Err(Error::invalid("branching and depth must be at least 1"));
    }
    let mut nodes = 0usize;
    let mut width = 1usize;
    for _ in 0..levels {
        nodes = nodes.saturating_add(width);
        width = width.saturating_mul(branching);
        if nodes > MAX_TREE_NODES {
            return Err(Error::ResourceLimit(format!(
                "a {branching}-ary tree with {levels} levels exceeds {MAX_TREE_NODES} nodes"
            )));
        }
    }
    let parents: Vec<i64> = (0..nodes)
        .map(|i| if i == 0 { -1 } else { ((i - 1) / branching) as i64 })
        .collect();
    load_tree(&parents)
}

/// Validates a parent vector (`-1` marks the root); children keep index order.
pub fn load_tree(parents: &[i64]) -> Result<TreeTopology> {
    let n = parents.len();
    if n == 0 {
        return Err(Error::invalid("tree has no nodes"));
    }
    if n > MAX_TREE_NODES {
        return Err(Error::ResourceLimit(format!("tree exceeds {MAX_TREE_NODES} nodes")));
    }
    let mut parsed = Vec::with_capacity(n);
    for (i, &p) in parents.iter().enumerate() {
        parsed.push(match p {
            -1 => None,
            p if p >= 0 && (p as usize) < n && p as usize != i => Some(p as usize),
            p => return Err(Error::invalid(format!("node {i} has invalid parent {p}"))),
        });
    }
    let roots = parsed.iter().filter(|p| p.is_none()).count();
    if roots != 1 {
        return Err(Error::invalid(format!("tree needs exactly one root, found {roots}")));
    }
    let mut children = vec![Vec::new(); n];
    for (i, p) in parsed.iter().enumerate() {
        if let Some(p) = p {
            children[*p].push(i);
        }
    }
    let root = parsed.iter().position(Option::is_none).expect("one root");
    let mut depths = vec![usize::MAX; n];
    depths[root] = 0;
    let mut stack = vec![root];
    let mut seen = 1;
    while let Some(u) = stack.pop() {
        for &c in &children[u] {
            depths[c] = depths[u] + 1;
            seen += 1;
            stack.push(c);
        }
    }
    if seen != n {
        return Err(Error::invalid("parent vector contains a cycle"));
    }
    Ok(TreeTopology {
        parents: parsed,
        children,
        depths,
    })
}

/// One `(p, q)` observation at `(step, depth)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u64,
    pub depth: u64,
    pub p: Distribution,
    pub q: Distribution,
}

/// Parameters of the synthetic per-node process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticProcess {
    pub temperature: f64,
    pub lambda: f64,
    pub vocab: usize,
    pub seed: u64,
    #[serde(default)]
    pub noise: LogitNoise,
}

impl SyntheticProcess {
    fn config(&self) -> ToyConfig {
        ToyConfig {
            temperature: self.temperature,
            lambda: self.lambda,
            vocab: self.vocab,
            n_pairs: 1,
            mc_trials: 1,
            seed: self.seed,
            noise: self.noise,
        }
    }

    /// Toy-generator stream used for `(step, depth)`.
    pub fn stream(step: u64, depth: u64) -> Result<u64> {
        if depth >= 1 << 16 || step >= 1 << 48 {
            return Err(Error::invalid("step or depth out of the synthetic key range"));
        }
        Ok(step << 16 | depth)
    }

    pub fn pair(&self, step: u64, depth: u64) -> Result<(Distribution, Distribution)> {
        gen_toy_pair(&self.config(), Self::stream(step, depth)?)
    }
}

/// Source of the `(p, q)` pair used at each `(step, depth)`.
#[derive(Debug, Clone, PartialEq)]
pub enum DistProcess {
    Synthetic(SyntheticProcess),
    Trace(Trace),
    /// The same pair at every node.
    Constant { p: Distribution, q: Distribution },
}

impl DistProcess {
    pub fn pair(&self, step: u64, depth: u64) -> Result<(Distribution, Distribution)> {
        match self {
            DistProcess::Synthetic(s) => s.pair(step, depth),
            DistProcess::Trace(t) => t.pair(step, depth),
            DistProcess::Constant { p, q } => Ok((p.clone(), q.clone())),
        }
    }
}

impl fmt::Display for DistProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DistProcess::Synthetic(s) => write!(
                f,
                "synthetic:{}:{}:{}",
                s.temperature, s.lambda, s.vocab
            ),
            DistProcess::Trace(t) => write!(f, "trace({} records)", t.len()),
            DistProcess::Constant { p, .. } => write!(f, "constant(V={})", p.len()),
        }
    }
}

/// Trace records indexed by `(step, depth)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    records: HashMap<(u64, u64), (Distribution, Distribution)>,
}

impl Trace {
    /// Later records replace earlier ones with the same key.
    pub fn new(records: impl IntoIterator<Item = TraceRecord>) -> Result<Self> {
        let mut map = HashMap::new();
        for r in records {
            if r.p.len() != r.q.len() {
                return Err(Error::invalid(format!(
                    "record ({}, {}) has p of length {} and q of length {}",
                    r.step,
                    r.depth,
                    r.p.len(),
                    r.q.len()
                )));
            }
            map.insert((r.step, r.depth), (r.p, r.q));
        }
        Ok(Self { records: map })
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn pair(&self, step: u64, depth: u64) -> Result<(Distribution, Distribution)> {
        self.records
            .get(&(step, depth))
            .cloned()
            .ok_or_else(|| Error::EndOfTrace(format!("no record for step {step}, depth {depth}")))
    }

    /// How many of the `steps × depth` records a simulation needs are missing.
    pub fn shortfall(&self, steps: u64, depth: u64) -> u64 {
        let have = self
            .records
            .keys()
            .filter(|(s, d)| *s < steps && *d < depth)
            .count() as u64;
        steps * depth - have
    }
}

fn check_method(tree: &TreeTopology, method: Method) -> Result<()> {
    match method {
        Method::SpecHub if !tree.is_binary() => {
            Err(Error::invalid("SpecHub needs every internal node to have exactly two children"))
        }
        Method::Single if tree.max_branching() > 1 => {
            Err(Error::invalid("single-draft verification needs a chain"))
        }
        _ => Ok(()),
    }
}

/// Tokens produced by one step and the slot accepted at the root, if any.
struct StepResult {
    tokens: usize,
    root_slot: Option<usize>,
}

fn walk<R: Rng + ?Sized>(
    tree: &TreeTopology,
    process: &DistProcess,
    method: Method,
    step: u64,
    rng: &mut R,
) -> Result<StepResult> {
    let mut ch = RngChooser(rng);
    let mut node = tree.root();
    let mut accepted = 0;
    let mut root_slot = None;
    loop {
        let kids = tree.children(node);
        if kids.is_empty() {
            // the leaf bonus comes from the leaf's target; only its count matters here
            return Ok(StepResult {
                tokens: accepted + 1,
                root_slot,
            });
        }
        let (p, q) = process.pair(step, tree.depth(node) as u64)?;
        match step_verdict(method, &p, &q, kids.len(), &mut ch)? {
            Verdict::Accepted { position, .. } => {
                if accepted == 0 {
                    root_slot = Some(position);
                }
                accepted += 1;
                node = kids[position - 1];
            }
            rejected @ Verdict::Rejected { .. } => {
                rejected.finish(&mut ch);
                return Ok(StepResult {
                    tokens: accepted + 1,
                    root_slot,
                });
            }
        }
    }
}

/// Tokens generated by one decoding step: accepted drafts along the path plus the bonus token.
pub fn simulate_step<R: Rng + ?Sized>(
    tree: &TreeTopology,
    process: &DistProcess,
    method: Method,
    step: u64,
    rng: &mut R,
) -> Result<usize> {
    check_method(tree, method)?;
    Ok(walk(tree, process, method, step, rng)?.tokens)
}

/// Aggregate of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub method: Method,
    pub tree: String,
    pub process: String,
    pub steps: usize,
    pub mean_tokens_per_step: f64,
    pub std_error: f64,
    /// Empirical acceptance frequency of each root slot.
    pub per_position_rates: RateVector,
}

/// Runs steps `0..steps` in order.
pub fn run_sim<R: Rng + ?Sized>(
    tree: &TreeTopology,
    process: &DistProcess,
    method: Method,
    steps: usize,
    rng: &mut R,
) -> Result<SimReport> {
    if steps == 0 {
        return Err(Error::invalid("steps must be at least 1"));
    }
    check_method(tree, method)?;
    if let DistProcess::Trace(t) = process {
        let missing = t.shortfall(steps as u64, tree.draft_depth() as u64);
        if missing > 0 {
            return Err(Error::EndOfTrace(format!(
                "{steps} steps over {} draft levels need {} records; the trace is short by {missing}",
                tree.draft_depth(),
                steps * tree.draft_depth()
            )));
        }
    }
    let slots = tree.children(tree.root()).len();
    let mut slot_hits = vec![0usize; slots];
    let mut tokens = Vec::with_capacity(steps);
    for step in 0..steps as u64 {
        let r = walk(tree, process, method, step, rng)?;
        if let Some(s) = r.root_slot {
            slot_hits[s - 1] += 1;
        }
        tokens.push(r.tokens as f64);
    }
    let (mean, std_error) = crate::synthlab::mean_and_stderr(&tokens);
    Ok(SimReport {
        method,
        tree: tree.to_string(),
        process: process.to_string(),
        steps,
        mean_tokens_per_step: mean,
        std_error,
        per_position_rates: RateVector::new(
            slot_hits.iter().map(|&h| h as f64 / steps as f64).collect(),
        ),
    })
}

/// `E(node) = 1 + sum_i rate_i E(child_i)`, `E(leaf) = 1`, evaluated at the root.
pub fn expected_tokens_given_rates(tree: &TreeTopology, rates: &RateVector) -> Result<f64> {
    if tree.max_branching() > rates.per_position.len() {
        return Err(Error::invalid(format!(
            "{} slot rates for a node with {} children",
            rates.per_position.len(),
            tree.max_branching()
        )));
    }
    let mut value = vec![1.0; tree.len()];
    // deeper nodes first so children are final before their parent
    let mut order: Vec<usize> = (0..tree.len()).collect();
    order.sort_by_key(|&n| std::cmp::Reverse(tree.depth(n)));
    for n in order {
        value[n] = 1.0
            + tree
                .children(n)
                .iter()
                .zip(&rates.per_position)
                .map(|(&c, r)| r * value[c])
                .sum::<f64>();
    }
    Ok(value[tree.root()])
}
