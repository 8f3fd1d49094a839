//! Staged and bucketed greedy for gamma-balanced independent sets in the
//! partite model.
//!
//! Parts fill in stages. While `m` parts are locked, any unlocked part that
//! reaches `cap_{m+1} = gamma_{m+1} * target` (gamma ascending) is locked at
//! the end of that round; if several qualify, the fullest one wins, ties to
//! the lowest part index. A run succeeds once all `r` parts are locked.

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::gamma::GammaVector;
use crate::greedy_uniform::{GreedyResult, IndependenceAudit};
use crate::online::{run_client, ArrivalPolicy, OnlineClient, OnlineRun, Transcript};
use crate::sampling::{edge_bernoulli, EdgeKey, EdgeOracle, EdgeSource, Model, ModelSpec, VertexId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LockEvent {
    pub part: u32,
    pub round: u64,
    /// 1-based stage that this lock completed.
    pub stage: usize,
    pub capacity: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StageState {
    /// Number of locked parts.
    pub m: usize,
    pub locked: Vec<bool>,
    pub per_part_counts: Vec<u64>,
    pub target: u64,
    /// `gamma_j * target`, ascending.
    pub capacities: Vec<u64>,
}

impl StageState {
    fn new(r: usize, target: u64, capacities: Vec<u64>) -> Self {
        StageState { m: 0, locked: vec![false; r], per_part_counts: vec![0; r], target, capacities }
    }

    /// Locks at most one part whose count reached the current capacity.
    fn try_lock(&mut self) -> Option<(u32, usize, u64)> {
        let r = self.locked.len();
        if self.m == r {
            return None;
        }
        let cap = self.capacities[self.m];
        let mut best: Option<usize> = None;
        for j in 0..r {
            if self.locked[j] || self.per_part_counts[j] < cap {
                continue;
            }
            if best.is_none_or(|b| self.per_part_counts[j] > self.per_part_counts[b]) {
                best = Some(j);
            }
        }
        let j = best?;
        self.locked[j] = true;
        self.m += 1;
        Some((j as u32, self.m, cap))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BalancedDetail {
    pub target: u64,
    pub capacities: Vec<u64>,
    /// Locked parts when the run ended.
    pub stage: usize,
    pub locks: Vec<LockEvent>,
    /// Arrivals rejected because their part was locked (or all were).
    pub rejected_locked: Vec<u64>,
    /// Arrivals rejected because they closed a present edge.
    pub rejected_dependent: Vec<u64>,
}

/// The staged greedy client.
#[derive(Clone, Debug)]
pub struct GreedyBalanced {
    state: StageState,
    members: Vec<Vec<VertexId>>,
    locks: Vec<LockEvent>,
    rejected_locked: Vec<u64>,
    rejected_dependent: Vec<u64>,
    idx: Vec<usize>,
    tuple: Vec<VertexId>,
}

impl GreedyBalanced {
    pub fn new(r: u32, gamma: &GammaVector, target: u64) -> Result<Self> {
        if gamma.r() != r as usize {
            return Err(LabError::InvalidGamma(format!(
                "gamma has {} entries but r = {r}",
                gamma.r()
            )));
        }
        if target == 0 {
            return Err(LabError::InvalidConfig("target must be positive".into()));
        }
        let capacities = gamma.part_sizes(target)?;
        let r = r as usize;
        Ok(GreedyBalanced {
            state: StageState::new(r, target, capacities),
            members: vec![Vec::new(); r],
            locks: Vec::new(),
            rejected_locked: vec![0; r],
            rejected_dependent: vec![0; r],
            idx: Vec::new(),
            tuple: Vec::new(),
        })
    }

    pub fn state(&self) -> &StageState {
        &self.state
    }

    pub fn locks(&self) -> &[LockEvent] {
        &self.locks
    }

    fn detail(&self) -> BalancedDetail {
        BalancedDetail {
            target: self.state.target,
            capacities: self.state.capacities.clone(),
            stage: self.state.m,
            locks: self.locks.clone(),
            rejected_locked: self.rejected_locked.clone(),
            rejected_dependent: self.rejected_dependent.clone(),
        }
    }

    /// Queries every transversal through `v` with one member from each other
    /// part, odometer order over parts in index order.
    fn independent_with<E: EdgeSource>(&mut self, run: &mut OnlineRun<E>, v: VertexId) -> Result<bool> {
        let others: Vec<usize> = (0..self.members.len()).filter(|&j| j != v.part as usize).collect();
        if others.iter().any(|&j| self.members[j].is_empty()) {
            return Ok(true);
        }
        self.idx.clear();
        self.idx.resize(others.len(), 0);
        let mut independent = true;
        loop {
            self.tuple.clear();
            self.tuple.extend(others.iter().zip(&self.idx).map(|(&j, &i)| self.members[j][i]));
            if run.query_edge(&self.tuple)?.is_present() {
                independent = false;
            }
            let mut i = others.len();
            loop {
                if i == 0 {
                    return Ok(independent);
                }
                i -= 1;
                self.idx[i] += 1;
                if self.idx[i] < self.members[others[i]].len() {
                    break;
                }
                self.idx[i] = 0;
            }
        }
    }
}

impl OnlineClient for GreedyBalanced {
    fn on_arrival<E: EdgeSource>(&mut self, run: &mut OnlineRun<E>, v: VertexId) -> Result<bool> {
        let part = v.part as usize;
        let r = self.members.len();
        let accept = if self.state.m == r || self.state.locked[part] {
            self.rejected_locked[part] += 1;
            false
        } else if self.independent_with(run, v)? {
            true
        } else {
            self.rejected_dependent[part] += 1;
            false
        };
        if accept {
            self.members[part].push(v);
            self.state.per_part_counts[part] += 1;
        }
        if let Some((part, stage, capacity)) = self.state.try_lock() {
            self.locks.push(LockEvent { part, round: run.round(), stage, capacity });
        }
        Ok(accept)
    }

    fn succeeded(&self) -> bool {
        self.state.m == self.members.len()
    }
}

fn require_partite(spec: &ModelSpec) -> Result<()> {
    if spec.model != Model::Partite {
        return Err(LabError::WrongModel { expected: "partite" });
    }
    Ok(())
}

fn finish<E: EdgeSource>(run: &OnlineRun<E>, client: &GreedyBalanced) -> GreedyResult {
    let mut result = GreedyResult::from_run(run, client.succeeded());
    result.balanced = Some(client.detail());
    result
}

/// Runs the staged greedy to the horizon with a stateless oracle.
///
/// Targets whose largest capacity exceeds `n` are accepted; such runs simply
/// fail, which is what a post-mortem on infeasible targets needs.
pub fn run_greedy_balanced(
    spec: &ModelSpec,
    gamma: &GammaVector,
    target: u64,
    policy: &ArrivalPolicy,
) -> Result<GreedyResult> {
    require_partite(spec)?;
    let mut client = GreedyBalanced::new(spec.r, gamma, target)?;
    let mut run = OnlineRun::new(EdgeOracle::stateless(*spec), policy)?.with_recording(false);
    run_client(&mut run, &mut client, None)?;
    Ok(finish(&run, &client))
}

/// Runs the staged greedy with a recording oracle and returns the transcript.
pub fn run_greedy_balanced_traced(
    spec: &ModelSpec,
    gamma: &GammaVector,
    target: u64,
    policy: &ArrivalPolicy,
) -> Result<(GreedyResult, Transcript)> {
    require_partite(spec)?;
    let mut client = GreedyBalanced::new(spec.r, gamma, target)?;
    let mut run = OnlineRun::new(EdgeOracle::new(*spec), policy)?;
    run_client(&mut run, &mut client, None)?;
    let result = finish(&run, &client);
    Ok((result, run.into_transcript()))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FailureReport {
    /// 1-based stage that was being filled when the run ended.
    pub stalled_stage: usize,
    pub counts: Vec<u64>,
    pub capacities: Vec<u64>,
    pub locked_parts: Vec<u32>,
    pub rounds_used: u64,
    pub horizon: u64,
    pub arrivals_exhausted: bool,
    pub rejected_locked: Vec<u64>,
    pub rejected_dependent: Vec<u64>,
}

pub fn failure_postmortem(result: &GreedyResult) -> Result<FailureReport> {
    if result.success {
        return Err(LabError::NotAFailure);
    }
    let detail = result.balanced.as_ref().ok_or(LabError::WrongModel { expected: "partite" })?;
    Ok(FailureReport {
        stalled_stage: detail.stage + 1,
        counts: result.per_part_counts.clone().unwrap_or_default(),
        capacities: detail.capacities.clone(),
        locked_parts: detail.locks.iter().map(|l| l.part).collect(),
        rounds_used: result.rounds_used,
        horizon: result.horizon,
        arrivals_exhausted: result.rounds_used == result.horizon,
        rejected_locked: detail.rejected_locked.clone(),
        rejected_dependent: detail.rejected_dependent.clone(),
    })
}

/// True iff the per-part sizes of `set` equal `gamma_j * |set|` under some
/// assignment of proportions to parts. Checked against every permutation.
pub fn is_gamma_balanced(set: &[VertexId], r: u32, gamma: &GammaVector) -> bool {
    let mut counts = vec![0u64; r as usize];
    for v in set {
        match counts.get_mut(v.part as usize) {
            Some(c) => *c += 1,
            None => return false,
        }
    }
    let sizes = match gamma.part_sizes(set.len() as u64) {
        Ok(s) => s,
        Err(_) => return false,
    };
    if sizes.len() != counts.len() {
        return false;
    }
    let mut perm: Vec<usize> = (0..sizes.len()).collect();
    loop {
        if perm.iter().enumerate().all(|(j, &s)| counts[j] == sizes[s]) {
            return true;
        }
        if !next_permutation(&mut perm) {
            return false;
        }
    }
}

/// Advances to the next permutation in lexicographic order.
pub fn next_permutation(a: &mut [usize]) -> bool {
    if a.len() < 2 {
        return false;
    }
    let mut i = a.len() - 1;
    while i > 0 && a[i - 1] >= a[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = a.len() - 1;
    while a[j] <= a[i - 1] {
        j -= 1;
    }
    a.swap(i - 1, j);
    a[i..].reverse();
    true
}

/// Checks transversal tuples of `set` against the instance: all of them
/// when there are at most `exhaustive_cap`, else `samples` random ones.
pub fn audit_partite_independence(
    spec: &ModelSpec,
    set: &[VertexId],
    exhaustive_cap: u128,
    samples: u64,
    sample_seed: u64,
) -> IndependenceAudit {
    let r = spec.r as usize;
    let mut groups = vec![Vec::new(); r];
    for v in set {
        groups[v.part as usize].push(*v);
    }
    let total: u128 = groups.iter().map(|g| g.len() as u128).product();
    let present = |tuple: &[VertexId]| {
        let key = EdgeKey::from_sorted(tuple.iter().copied().collect());
        edge_bernoulli(spec.seed, spec.p, &key).is_present()
    };
    if total <= exhaustive_cap {
        let mut checked = 0;
        let mut violations = 0;
        crate::online::for_each_product(&groups, |t| {
            checked += 1;
            if present(t) {
                violations += 1;
            }
        });
        return IndependenceAudit { checked, exhaustive: true, violations };
    }
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(sample_seed);
    let mut violations = 0;
    let mut tuple = Vec::with_capacity(r);
    for _ in 0..samples {
        tuple.clear();
        tuple.extend(groups.iter().map(|g| g[rng.random_range(0..g.len())]));
        if present(&tuple) {
            violations += 1;
        }
    }
    IndependenceAudit { checked: samples, exhaustive: false, violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::materialize;

    fn gamma(s: &str) -> GammaVector {
        s.parse().unwrap()
    }

    #[test]
    fn empty_instance_fills_every_part() {
        let s = ModelSpec::partite(6, 2, 0.0, 1).unwrap();
        let res = run_greedy_balanced(&s, &gamma("1/2,1/2"), 10, &ArrivalPolicy::uniform_random(3)).unwrap();
        assert!(res.success);
        assert_eq!(res.per_part_counts, Some(vec![5, 5]));
        assert_eq!(res.size, 10);
    }

    #[test]
    fn complete_bipartite_stalls_at_stage_two() {
        let s = ModelSpec::partite(6, 2, 1.0, 1).unwrap();
        let res = run_greedy_balanced(&s, &gamma("1/2,1/2"), 10, &ArrivalPolicy::uniform_random(3)).unwrap();
        assert!(!res.success);
        let detail = res.balanced.as_ref().unwrap();
        assert_eq!(detail.stage, 1);
        let report = failure_postmortem(&res).unwrap();
        assert_eq!(report.stalled_stage, 2);
        assert!(report.arrivals_exhausted);
        let first = detail.locks[0].part as usize;
        assert_eq!(report.counts[first], 5);
        assert_eq!(report.counts[1 - first], 0);
    }

    #[test]
    fn infeasible_target_consumes_all_arrivals() {
        let s = ModelSpec::partite(3, 2, 0.0, 1).unwrap();
        let res = run_greedy_balanced(&s, &gamma("1/2,1/2"), 20, &ArrivalPolicy::uniform_random(1)).unwrap();
        let report = failure_postmortem(&res).unwrap();
        assert_eq!(report.stalled_stage, 1);
        assert_eq!(report.rounds_used, 6);
        assert!(report.arrivals_exhausted);
    }

    #[test]
    fn postmortem_rejects_success() {
        let s = ModelSpec::partite(6, 2, 0.0, 1).unwrap();
        let res = run_greedy_balanced(&s, &gamma("1/2,1/2"), 4, &ArrivalPolicy::uniform_random(3)).unwrap();
        assert!(matches!(failure_postmortem(&res), Err(LabError::NotAFailure)));
    }

    #[test]
    fn validation() {
        let s = ModelSpec::partite(6, 3, 0.5, 1).unwrap();
        let g = gamma("1/6,1/3,1/2");
        assert!(matches!(
            run_greedy_balanced(&s, &g, 9, &ArrivalPolicy::uniform_random(1)),
            Err(LabError::NonIntegralCapacity { .. })
        ));
        assert!(run_greedy_balanced(&s, &gamma("1/2,1/2"), 4, &ArrivalPolicy::uniform_random(1)).is_err());
        let u = ModelSpec::uniform(6, 3, 0.5, 1).unwrap();
        assert!(matches!(
            run_greedy_balanced(&u, &g, 6, &ArrivalPolicy::uniform_random(1)),
            Err(LabError::WrongModel { .. })
        ));
    }

    #[test]
    fn lock_order_follows_first_part_to_fill() {
        // parts 2, 0, 1 fill in that order under this arrival order
        let s = ModelSpec::partite(4, 3, 0.0, 1).unwrap();
        let order = [(2, 0), (2, 1), (0, 0), (1, 0), (0, 1), (1, 1), (0, 2), (1, 2), (2, 2), (0, 3), (1, 3), (2, 3)]
            .into_iter()
            .map(|(p, i)| VertexId::partite(p, i))
            .collect();
        let res = run_greedy_balanced(&s, &gamma("1/3,1/3,1/3"), 6, &ArrivalPolicy::fixed_order(order)).unwrap();
        let locks = &res.balanced.as_ref().unwrap().locks;
        assert_eq!(locks.iter().map(|l| l.part).collect::<Vec<_>>(), vec![2, 0, 1]);
        assert_eq!(locks.iter().map(|l| l.round).collect::<Vec<_>>(), vec![2, 5, 6]);
        assert!(res.success);
        assert_eq!(res.rounds_used, 12);
        assert_eq!(res.balanced.as_ref().unwrap().rejected_locked, vec![2, 2, 2]);
    }

    #[test]
    fn unequal_caps_lock_ascending() {
        let g = gamma("1/6,1/3,1/2");
        for seed in 0..30 {
            let s = ModelSpec::partite(30, 3, 0.3, seed).unwrap();
            let res = run_greedy_balanced(&s, &g, 6, &ArrivalPolicy::uniform_random(seed)).unwrap();
            let detail = res.balanced.as_ref().unwrap();
            let caps: Vec<u64> = detail.locks.iter().map(|l| l.capacity).collect();
            assert!(caps.windows(2).all(|w| w[0] <= w[1]));
            let counts = res.per_part_counts.clone().unwrap();
            for l in &detail.locks {
                assert_eq!(counts[l.part as usize], l.capacity);
                // nothing from a locked part is accepted after its lock
                assert!(res
                    .independent_set
                    .iter()
                    .zip(&res.accept_rounds)
                    .all(|(v, &t)| v.part != l.part || t <= l.round));
            }
            if res.success {
                let mut sorted = counts.clone();
                sorted.sort();
                assert_eq!(sorted, vec![1, 2, 3]);
                assert!(is_gamma_balanced(&res.independent_set, 3, &g));
                let h = materialize(&s).unwrap();
                assert!(h.is_independent(&res.independent_set));
                assert!(audit_partite_independence(&s, &res.independent_set, 1 << 20, 0, 0).passed());
            }
        }
    }

    #[test]
    fn traced_matches_stateless() {
        let s = ModelSpec::partite(40, 3, 0.5, 7).unwrap();
        let g = gamma("1/6,1/3,1/2");
        let a = run_greedy_balanced(&s, &g, 6, &ArrivalPolicy::uniform_random(2)).unwrap();
        let (b, t) = run_greedy_balanced_traced(&s, &g, 6, &ArrivalPolicy::uniform_random(2)).unwrap();
        assert_eq!(a, b);
        assert_eq!(t.rounds(), 120);
    }

    #[test]
    fn balancedness_check() {
        let g = gamma("1/6,1/3,1/2");
        let mk = |counts: [u32; 3]| -> Vec<VertexId> {
            (0..3u32).flat_map(|p| (0..counts[p as usize]).map(move |i| VertexId::partite(p, i))).collect()
        };
        assert!(is_gamma_balanced(&mk([3, 1, 2]), 3, &g));
        assert!(is_gamma_balanced(&mk([1, 2, 3]), 3, &g));
        assert!(!is_gamma_balanced(&mk([2, 2, 2]), 3, &g));
        assert!(!is_gamma_balanced(&mk([1, 1, 1]), 3, &g));
        let mut p = vec![0, 1, 2];
        let mut n = 1;
        while next_permutation(&mut p) {
            n += 1;
        }
        assert_eq!(n, 6);
    }
}
