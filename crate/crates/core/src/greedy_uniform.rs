//! Online greedy for the uniform model, plus waiting-time statistics.

use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{LabError, Result};
use crate::greedy_balanced::BalancedDetail;
use crate::online::{run_client, ArrivalPolicy, OnlineClient, OnlineRun, Transcript};
use crate::sampling::{
    binomial_u128, edge_bernoulli, EdgeKey, EdgeOracle, EdgeSource, Model, ModelSpec, VertexId,
};
use crate::thresholds::acceptance_prob;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GreedyResult {
    pub model: Model,
    pub independent_set: Vec<VertexId>,
    /// Round at which each member was accepted.
    pub accept_rounds: Vec<u64>,
    /// `accept_rounds[i] - accept_rounds[i - 1]`, with round 0 before the first.
    pub waiting_times: Vec<u64>,
    pub size: usize,
    pub rounds_used: u64,
    pub horizon: u64,
    pub success: bool,
    pub r: u32,
    pub p: f64,
    /// Accepted vertices per part (partite model only).
    pub per_part_counts: Option<Vec<u64>>,
    pub queries: u64,
    pub balanced: Option<BalancedDetail>,
}

impl GreedyResult {
    pub(crate) fn from_run<E: EdgeSource>(run: &OnlineRun<E>, success: bool) -> Self {
        let spec = run.spec();
        let accept_rounds = run.accept_rounds().to_vec();
        let mut prev = 0;
        let waiting_times = accept_rounds
            .iter()
            .map(|&t| {
                let d = t - prev;
                prev = t;
                d
            })
            .collect();
        let per_part_counts = (spec.model == Model::Partite).then(|| {
            let mut counts = vec![0u64; spec.r as usize];
            for v in run.accepted() {
                counts[v.part as usize] += 1;
            }
            counts
        });
        GreedyResult {
            model: spec.model,
            independent_set: run.accepted().to_vec(),
            accept_rounds,
            waiting_times,
            size: run.accepted().len(),
            rounds_used: run.round(),
            horizon: run.horizon(),
            success,
            r: spec.r,
            p: spec.p,
            per_part_counts,
            queries: run.query_count(),
            balanced: None,
        }
    }

    /// Size counted towards `P[|A(G)| >= k]`: zero for failed runs.
    pub fn effective_size(&self) -> usize {
        if self.success {
            self.size
        } else {
            0
        }
    }
}

/// Accepts an arrival iff no `(r-1)`-subset of the current set closes an
/// edge with it. Every such subset is queried, in lexicographic order of
/// positions in acceptance order.
#[derive(Clone, Debug, Default)]
pub struct GreedyUniform {
    set: Vec<VertexId>,
}

impl GreedyUniform {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&self) -> &[VertexId] {
        &self.set
    }
}

impl OnlineClient for GreedyUniform {
    fn on_arrival<E: EdgeSource>(&mut self, run: &mut OnlineRun<E>, v: VertexId) -> Result<bool> {
        let independent = run.query_combinations(&self.set)? == 0;
        if independent {
            self.set.push(v);
        }
        Ok(independent)
    }
}

fn require_uniform(spec: &ModelSpec) -> Result<()> {
    if spec.model != Model::Uniform {
        return Err(LabError::WrongModel { expected: "uniform" });
    }
    Ok(())
}

/// Runs greedy to the horizon with a stateless oracle and no transcript.
pub fn run_greedy_uniform(spec: &ModelSpec, policy: &ArrivalPolicy) -> Result<GreedyResult> {
    run_greedy_uniform_until(spec, policy, None)
}

/// As [`run_greedy_uniform`], stopping after `max_rounds` rounds if given.
pub fn run_greedy_uniform_until(
    spec: &ModelSpec,
    policy: &ArrivalPolicy,
    max_rounds: Option<u64>,
) -> Result<GreedyResult> {
    require_uniform(spec)?;
    let mut run = OnlineRun::new(EdgeOracle::stateless(*spec), policy)?.with_recording(false);
    let mut client = GreedyUniform::new();
    run_client(&mut run, &mut client, max_rounds)?;
    Ok(GreedyResult::from_run(&run, true))
}

/// Runs greedy with a recording oracle and returns the full transcript.
pub fn run_greedy_uniform_traced(
    spec: &ModelSpec,
    policy: &ArrivalPolicy,
) -> Result<(GreedyResult, Transcript)> {
    require_uniform(spec)?;
    let mut run = OnlineRun::new(EdgeOracle::new(*spec), policy)?;
    let mut client = GreedyUniform::new();
    run_client(&mut run, &mut client, None)?;
    let result = GreedyResult::from_run(&run, true);
    Ok((result, run.into_transcript()))
}

/// Result of re-checking an output against the instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct IndependenceAudit {
    pub checked: u64,
    pub exhaustive: bool,
    pub violations: u64,
}

impl IndependenceAudit {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Checks every `r`-subset of `set` (or `samples` random ones when there
/// are more than `exhaustive_cap`) against the instance.
pub fn audit_uniform_independence(
    spec: &ModelSpec,
    set: &[VertexId],
    exhaustive_cap: u128,
    samples: u64,
    sample_seed: u64,
) -> IndependenceAudit {
    let r = spec.r as usize;
    let total = binomial_u128(set.len() as u128, r as u128);
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    let status_of = |idx: &[usize]| {
        let key = EdgeKey::from_sorted(idx.iter().map(|&i| sorted[i]).collect());
        edge_bernoulli(spec.seed, spec.p, &key).is_present()
    };
    if total <= exhaustive_cap {
        let mut violations = 0;
        let mut checked = 0;
        crate::online::for_each_combination(sorted.len(), r, |idx| {
            checked += 1;
            if status_of(idx) {
                violations += 1;
            }
        });
        return IndependenceAudit { checked, exhaustive: true, violations };
    }
    use rand::seq::index::sample;
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(sample_seed);
    let mut violations = 0;
    for _ in 0..samples {
        let mut idx = sample(&mut rng, sorted.len(), r).into_vec();
        idx.sort_unstable();
        if status_of(&idx) {
            violations += 1;
        }
    }
    IndependenceAudit { checked: samples, exhaustive: false, violations }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WaitingTimeStats {
    pub i: usize,
    pub samples: usize,
    /// Runs that never reached size `i` and were excluded.
    pub excluded: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
    pub acceptance_prob: f64,
    pub expected_mean: f64,
    /// `(mean - expected_mean) / std_error`; zero when both spreads vanish.
    pub z_score: f64,
    pub chi_square: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Summarizes the `i`-th waiting time (1-based) across runs against
/// `Geometric(acceptance_prob(i, r, p))`.
pub fn waiting_time_stats(results: &[GreedyResult], i: usize, r: u32, p: f64) -> Result<WaitingTimeStats> {
    if i == 0 {
        return Err(LabError::InvalidConfig("waiting-time index starts at 1".into()));
    }
    if let Some(bad) = results.iter().find(|res| res.r != r || res.p != p) {
        return Err(LabError::InvalidConfig(format!(
            "result with (r, p) = ({}, {}) mixed into ({r}, {p})",
            bad.r, bad.p
        )));
    }
    let data: Vec<u64> = results.iter().filter_map(|res| res.waiting_times.get(i - 1).copied()).collect();
    if data.is_empty() {
        return Err(LabError::NoUntruncatedSamples(i));
    }
    let q = acceptance_prob(i as u64, r, p);
    let k = data.len() as f64;
    let mean = data.iter().map(|&d| d as f64).sum::<f64>() / k;
    let variance = if data.len() > 1 {
        data.iter().map(|&d| (d as f64 - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    let std_error = (variance / k).sqrt();
    let expected_mean = 1.0 / q;
    let z_score = if std_error > 0.0 {
        (mean - expected_mean) / std_error
    } else if mean == expected_mean {
        0.0
    } else {
        f64::INFINITY
    };
    let (chi_square, dof, p_value) = geometric_gof(&data, q);
    Ok(WaitingTimeStats {
        i,
        samples: data.len(),
        excluded: results.len() - data.len(),
        mean,
        variance,
        std_error,
        acceptance_prob: q,
        expected_mean,
        z_score,
        chi_square,
        dof,
        p_value,
    })
}

/// Pearson chi-square of `data` against `Geometric(q)` on `{1, 2, ...}`,
/// with bins merged left to right until each expects at least 5 samples.
fn geometric_gof(data: &[u64], q: f64) -> (f64, usize, f64) {
    let total = data.len() as f64;
    let max = data.iter().copied().max().unwrap_or(1);
    let mut bins: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    let mut tail = 1.0;
    for k in 1..=max {
        let pk = q * (1.0 - q).powf((k - 1) as f64);
        tail -= pk;
        obs += data.iter().filter(|&&d| d == k).count() as f64;
        exp += pk * total;
        if exp >= 5.0 && tail * total >= 5.0 {
            bins.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    exp += tail.max(0.0) * total;
    match bins.last_mut() {
        Some(last) if exp < 5.0 => {
            last.0 += obs;
            last.1 += exp;
        }
        _ => bins.push((obs, exp)),
    }
    if bins.len() < 2 {
        return (0.0, 0, 1.0);
    }
    let chi: f64 = bins.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = bins.len() - 1;
    let p_value = ChiSquared::new(dof as f64).map(|d| 1.0 - d.cdf(chi)).unwrap_or(f64::NAN);
    (chi, dof, p_value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::materialize;

    fn spec(n: u32, r: u32, p: f64, seed: u64) -> ModelSpec {
        ModelSpec::uniform(n, r, p, seed).unwrap()
    }

    #[test]
    fn empty_and_complete_instances() {
        let res = run_greedy_uniform(&spec(10, 3, 0.0, 1), &ArrivalPolicy::uniform_random(2)).unwrap();
        assert_eq!(res.size, 10);
        assert!(res.waiting_times.iter().all(|&d| d == 1));
        let res = run_greedy_uniform(&spec(10, 3, 1.0, 1), &ArrivalPolicy::uniform_random(2)).unwrap();
        assert_eq!(res.size, 2);
        assert_eq!(res.accept_rounds, vec![1, 2]);
        assert!(res.success);
    }

    #[test]
    fn rejects_partite_spec() {
        let s = ModelSpec::partite(4, 2, 0.5, 1).unwrap();
        assert!(matches!(
            run_greedy_uniform(&s, &ArrivalPolicy::uniform_random(1)),
            Err(LabError::WrongModel { .. })
        ));
    }

    #[test]
    fn queries_every_subset_of_the_current_set() {
        let s = spec(40, 3, 0.3, 5);
        let (res, t) = run_greedy_uniform_traced(&s, &ArrivalPolicy::uniform_random(6)).unwrap();
        let mut expected = 0u64;
        for round in 1..=t.rounds() {
            let before = t.accepted_prefix(round - 1).len() as u64;
            let asked = t.edge_queries.iter().filter(|q| q.round == round).count() as u64;
            assert_eq!(asked, before * before.saturating_sub(1) / 2);
            expected += asked;
        }
        assert_eq!(res.queries, expected);
        let k = res.size as u64;
        assert!(res.queries <= 40 * k * (k - 1) / 2);
        for q in &t.edge_queries {
            assert!(q.key.contains(t.arrivals[q.round as usize - 1]));
        }
    }

    #[test]
    fn output_is_independent_in_full_instance() {
        for seed in 0..20 {
            let s = spec(18, 3, 0.4, seed);
            let res = run_greedy_uniform(&s, &ArrivalPolicy::uniform_random(seed + 100)).unwrap();
            let h = materialize(&s).unwrap();
            assert!(h.is_independent(&res.independent_set));
            let audit = audit_uniform_independence(&s, &res.independent_set, 1 << 20, 0, 0);
            assert!(audit.exhaustive && audit.passed());
        }
    }

    #[test]
    fn prefix_property() {
        let s = spec(300, 3, 0.5, 9);
        let policy = ArrivalPolicy::uniform_random(3);
        let full = run_greedy_uniform(&s, &policy).unwrap();
        for t in [1, 10, 77, 200] {
            let part = run_greedy_uniform_until(&s, &policy, Some(t)).unwrap();
            let expect: Vec<_> = full
                .independent_set
                .iter()
                .zip(&full.accept_rounds)
                .filter(|(_, &a)| a <= t)
                .map(|(v, _)| *v)
                .collect();
            assert_eq!(part.independent_set, expect);
            assert_eq!(part.rounds_used, t);
        }
    }

    #[test]
    fn stateless_and_traced_agree() {
        let s = spec(200, 3, 0.5, 4);
        let policy = ArrivalPolicy::uniform_random(8);
        let a = run_greedy_uniform(&s, &policy).unwrap();
        let (b, _) = run_greedy_uniform_traced(&s, &policy).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn waiting_times_of_forced_increments() {
        let results: Vec<_> = (0..50)
            .map(|seed| run_greedy_uniform(&spec(64, 3, 0.5, seed), &ArrivalPolicy::uniform_random(seed)).unwrap())
            .collect();
        for i in 1..=2 {
            let st = waiting_time_stats(&results, i, 3, 0.5).unwrap();
            assert_eq!(st.mean, 1.0);
            assert_eq!(st.variance, 0.0);
            assert_eq!(st.z_score, 0.0);
        }
        assert!(matches!(waiting_time_stats(&results, 40, 3, 0.5), Err(LabError::NoUntruncatedSamples(40))));
        assert!(waiting_time_stats(&results, 3, 2, 0.5).is_err());
    }

    #[test]
    fn gof_accepts_geometric_samples() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let q = 0.25;
        let data: Vec<u64> = (0..5000)
            .map(|_| {
                let mut k = 1;
                while rng.random::<f64>() >= q {
                    k += 1;
                }
                k
            })
            .collect();
        let (chi, dof, pv) = geometric_gof(&data, q);
        assert!(dof > 5, "dof {dof}");
        assert!(pv > 0.001, "chi {chi} p {pv}");
        let skewed: Vec<u64> = data.iter().map(|&d| d + 1).collect();
        let (_, _, pv) = geometric_gof(&skewed, q);
        assert!(pv < 1e-6);
    }
}
