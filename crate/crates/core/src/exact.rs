//! Exhaustive ground truth on small instances: counts of independent sets
//! by size, independence numbers and gamma-balanced optima.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::gamma::GammaVector;
use crate::greedy_balanced::{next_permutation, run_greedy_balanced};
use crate::greedy_uniform::run_greedy_uniform;
use crate::online::ArrivalPolicy;
use crate::sampling::{
    binomial_u128, materialize_with_cap, Hypergraph, Model, ModelSpec, VertexId, DEFAULT_MATERIALIZE_CAP,
};

/// Default limit on search nodes (uniform) or enumerated part selections
/// (partite) before giving up.
pub const DEFAULT_NODE_BUDGET: u64 = 200_000_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExactReport {
    pub model: Model,
    /// Largest `alpha` with a (balanced, for partite) independent set.
    pub independence_number: usize,
    /// `counts_by_size[alpha] = Z_alpha`, for `alpha` in `0..=horizon`.
    pub counts_by_size: Vec<u128>,
    pub optimum_witness: Vec<VertexId>,
    pub gamma: Option<String>,
}

struct UniformInstance {
    n: usize,
    /// `closing[v]`: masks `e \ {v}` of present edges whose largest vertex is `v`.
    closing: Vec<Vec<u64>>,
}

impl UniformInstance {
    fn new(spec: &ModelSpec) -> Result<Self> {
        if spec.model != Model::Uniform {
            return Err(LabError::WrongModel { expected: "uniform" });
        }
        if spec.n > 64 {
            return Err(LabError::CapExceeded { what: "vertex", count: u128::from(spec.n), cap: 64 });
        }
        Ok(Self::from_graph(&materialize_with_cap(spec, DEFAULT_MATERIALIZE_CAP)?))
    }

    fn from_graph(h: &Hypergraph) -> Self {
        let n = h.spec.n as usize;
        let mut closing = vec![Vec::new(); n];
        for e in &h.edges {
            let vs = e.vertices();
            let top = vs[vs.len() - 1].index as usize;
            let mask = vs[..vs.len() - 1].iter().fold(0u64, |m, v| m | 1 << v.index);
            closing[top].push(mask);
        }
        UniformInstance { n, closing }
    }

    #[inline]
    fn can_add(&self, current: u64, v: usize) -> bool {
        self.closing[v].iter().all(|&m| m & current != m)
    }
}

fn mask_to_vertices(mask: u64) -> Vec<VertexId> {
    (0..64).filter(|i| mask >> i & 1 == 1).map(VertexId::uniform).collect()
}

/// Counts every independent set of the materialized uniform instance.
pub fn exact_uniform(spec: &ModelSpec) -> Result<ExactReport> {
    exact_uniform_with_budget(spec, DEFAULT_NODE_BUDGET)
}

pub fn exact_uniform_with_budget(spec: &ModelSpec, budget: u64) -> Result<ExactReport> {
    count_uniform(&UniformInstance::new(spec)?, budget)
}

/// As [`exact_uniform`] on an explicit instance.
pub fn exact_uniform_graph(h: &Hypergraph, budget: u64) -> Result<ExactReport> {
    if h.spec.model != Model::Uniform {
        return Err(LabError::WrongModel { expected: "uniform" });
    }
    if h.spec.n > 64 {
        return Err(LabError::CapExceeded { what: "vertex", count: u128::from(h.spec.n), cap: 64 });
    }
    count_uniform(&UniformInstance::from_graph(h), budget)
}

fn count_uniform(inst: &UniformInstance, budget: u64) -> Result<ExactReport> {
    let mut counts = vec![0u128; inst.n + 1];
    let mut best = 0u64;
    let mut nodes = 0u64;
    // Each node is an independent set whose elements are all below `next`.
    let mut stack: Vec<(u64, usize)> = vec![(0, 0)];
    while let Some((set, next)) = stack.pop() {
        nodes += 1;
        if nodes > budget {
            return Err(LabError::CapExceeded { what: "search node", count: u128::from(nodes), cap: u128::from(budget) });
        }
        counts[set.count_ones() as usize] += 1;
        if set.count_ones() > best.count_ones() {
            best = set;
        }
        for v in (next..inst.n).rev() {
            if inst.can_add(set, v) {
                stack.push((set | 1 << v, v + 1));
            }
        }
    }
    let independence_number = counts.iter().rposition(|&c| c > 0).unwrap_or(0);
    Ok(ExactReport {
        model: Model::Uniform,
        independence_number,
        counts_by_size: counts,
        optimum_witness: mask_to_vertices(best),
        gamma: None,
    })
}

/// Maximum independent set by branch and bound. The bound is the current
/// size plus the number of later vertices still individually addable.
pub fn max_independent_uniform(spec: &ModelSpec) -> Result<(usize, Vec<VertexId>)> {
    let inst = UniformInstance::new(spec)?;
    let mut best = 0u64;
    let mut nodes = 0u64;
    bnb(&inst, 0, 0, &mut best, &mut nodes)?;
    Ok((best.count_ones() as usize, mask_to_vertices(best)))
}

fn bnb(inst: &UniformInstance, set: u64, next: usize, best: &mut u64, nodes: &mut u64) -> Result<()> {
    *nodes += 1;
    if *nodes > DEFAULT_NODE_BUDGET {
        return Err(LabError::CapExceeded {
            what: "search node",
            count: u128::from(*nodes),
            cap: u128::from(DEFAULT_NODE_BUDGET),
        });
    }
    if set.count_ones() > best.count_ones() {
        *best = set;
    }
    let candidates: Vec<usize> = (next..inst.n).filter(|&v| inst.can_add(set, v)).collect();
    if set.count_ones() as usize + candidates.len() <= best.count_ones() as usize {
        return Ok(());
    }
    for (i, &v) in candidates.iter().enumerate() {
        if set.count_ones() as usize + candidates.len() - i <= best.count_ones() as usize {
            break;
        }
        bnb(inst, set | 1 << v, v + 1, best, nodes)?;
    }
    Ok(())
}

/// Distinct rearrangements of `sizes`, in lexicographic order.
pub(crate) fn distinct_arrangements(sizes: &[u64]) -> Vec<Vec<u64>> {
    let mut cur = sizes.to_vec();
    cur.sort_unstable();
    let mut out = vec![cur.clone()];
    let mut idx: Vec<usize> = (0..cur.len()).collect();
    // permute positions and keep unseen value vectors
    while next_permutation(&mut idx) {
        let v: Vec<u64> = idx.iter().map(|&i| cur[i]).collect();
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out.sort();
    out
}

struct PartiteInstance {
    n: usize,
    r: usize,
    present: Vec<bool>,
}

impl PartiteInstance {
    fn new(spec: &ModelSpec) -> Result<Self> {
        if spec.model != Model::Partite {
            return Err(LabError::WrongModel { expected: "partite" });
        }
        if spec.n > 64 {
            return Err(LabError::CapExceeded { what: "part size", count: u128::from(spec.n), cap: 64 });
        }
        Ok(Self::from_graph(&materialize_with_cap(spec, DEFAULT_MATERIALIZE_CAP)?))
    }

    fn from_graph(h: &Hypergraph) -> Self {
        let n = h.spec.n as usize;
        let r = h.spec.r as usize;
        let mut present = vec![false; n.pow(r as u32)];
        for e in &h.edges {
            let flat = e.vertices().iter().fold(0usize, |acc, v| acc * n + v.index as usize);
            present[flat] = true;
        }
        PartiteInstance { n, r, present }
    }

    /// Vertices of the last part that close no edge with a transversal of
    /// `chosen` (one index list per earlier part).
    fn allowed_last(&self, chosen: &[Vec<usize>]) -> u64 {
        let mut allowed = if self.n == 64 { u64::MAX } else { (1u64 << self.n) - 1 };
        let mut prefixes = vec![0usize];
        for part in chosen {
            prefixes = prefixes.iter().flat_map(|&p| part.iter().map(move |&i| p * self.n + i)).collect();
        }
        for p in prefixes {
            for w in 0..self.n {
                if allowed >> w & 1 == 1 && self.present[p * self.n + w] {
                    allowed &= !(1 << w);
                }
            }
        }
        allowed
    }
}

fn pick_bits(mask: u64, k: usize) -> Vec<usize> {
    (0..64).filter(|i| mask >> i & 1 == 1).take(k).collect()
}

/// Counts gamma-balanced independent sets of every size. A vertex set is
/// counted once even when several proportion assignments fit it.
pub fn exact_balanced(spec: &ModelSpec, gamma: &GammaVector) -> Result<ExactReport> {
    exact_balanced_with_budget(spec, gamma, DEFAULT_NODE_BUDGET)
}

pub fn exact_balanced_with_budget(spec: &ModelSpec, gamma: &GammaVector, budget: u64) -> Result<ExactReport> {
    let inst = PartiteInstance::new(spec)?;
    if gamma.r() != inst.r {
        return Err(LabError::InvalidGamma(format!("gamma has {} entries but r = {}", gamma.r(), inst.r)));
    }
    let horizon = inst.n * inst.r;
    let step = gamma.lcm_denominator() as usize;
    let mut work: u128 = 0;
    for alpha in (step..=horizon).step_by(step) {
        let sizes = gamma.part_sizes(alpha as u64)?;
        for arr in distinct_arrangements(&sizes) {
            if arr.iter().any(|&c| c as usize > inst.n) {
                continue;
            }
            work += arr[..inst.r - 1].iter().map(|&c| binomial_u128(inst.n as u128, c as u128)).product::<u128>();
        }
    }
    if work > u128::from(budget) {
        return Err(LabError::CapExceeded { what: "part selection", count: work, cap: u128::from(budget) });
    }

    let mut counts = vec![0u128; horizon + 1];
    counts[0] = 1;
    let mut witness: Vec<VertexId> = Vec::new();
    for alpha in (step..=horizon).step_by(step) {
        let sizes = gamma.part_sizes(alpha as u64)?;
        for arr in distinct_arrangements(&sizes) {
            if arr.iter().any(|&c| c as usize > inst.n) {
                continue;
            }
            let mut chosen: Vec<Vec<usize>> = Vec::with_capacity(inst.r - 1);
            count_arrangement(&inst, &arr, &mut chosen, &mut counts[alpha], &mut witness, alpha);
        }
    }
    let independence_number = counts.iter().rposition(|&c| c > 0).unwrap_or(0);
    Ok(ExactReport {
        model: Model::Partite,
        independence_number,
        counts_by_size: counts,
        optimum_witness: witness,
        gamma: Some(gamma.to_string()),
    })
}

fn count_arrangement(
    inst: &PartiteInstance,
    arr: &[u64],
    chosen: &mut Vec<Vec<usize>>,
    total: &mut u128,
    witness: &mut Vec<VertexId>,
    alpha: usize,
) {
    let part = chosen.len();
    if part == inst.r - 1 {
        let allowed = inst.allowed_last(chosen);
        let need = arr[part] as usize;
        let ways = binomial_u128(u128::from(allowed.count_ones()), need as u128);
        if ways > 0 {
            *total += ways;
            if witness.len() < alpha {
                witness.clear();
                for (j, idx) in chosen.iter().enumerate() {
                    witness.extend(idx.iter().map(|&i| VertexId::partite(j as u32, i as u32)));
                }
                let last = part as u32;
                witness.extend(pick_bits(allowed, need).into_iter().map(|i| VertexId::partite(last, i as u32)));
            }
        }
        return;
    }
    let k = arr[part] as usize;
    crate::online::for_each_combination(inst.n, k, |c| {
        chosen.push(c.to_vec());
        count_arrangement(inst, arr, chosen, total, witness, alpha);
        chosen.pop();
    });
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GreedyExactComparison {
    pub seed: u64,
    pub greedy_size: usize,
    pub exact_optimum: usize,
    /// `greedy_size / exact_optimum`; absent when the optimum is zero.
    pub ratio: Option<f64>,
}

fn compare(seed: u64, greedy_size: usize, exact_optimum: usize) -> GreedyExactComparison {
    let ratio = (exact_optimum > 0).then(|| greedy_size as f64 / exact_optimum as f64);
    GreedyExactComparison { seed, greedy_size, exact_optimum, ratio }
}

pub fn greedy_vs_exact_uniform(spec: &ModelSpec, policy: &ArrivalPolicy) -> Result<GreedyExactComparison> {
    let greedy = run_greedy_uniform(spec, policy)?;
    let (alpha, _) = max_independent_uniform(spec)?;
    Ok(compare(spec.seed, greedy.size, alpha))
}

/// Failed balanced runs count as size zero.
pub fn greedy_vs_exact_balanced(
    spec: &ModelSpec,
    gamma: &GammaVector,
    target: u64,
    policy: &ArrivalPolicy,
) -> Result<GreedyExactComparison> {
    let greedy = run_greedy_balanced(spec, gamma, target, policy)?;
    let exact = exact_balanced(spec, gamma)?;
    Ok(compare(spec.seed, greedy.effective_size(), exact.independence_number))
}
