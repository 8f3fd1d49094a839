//! Correlated replica families and stopping times.
//!
//! A family runs a deterministic client on a base instance, finds the
//! stopping round `tau`, then re-runs the client on `m - 1` replicas that
//! agree with the base on every edge queried through `tau` and resample all
//! other edges independently.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use smallvec::SmallVec;

use crate::error::{LabError, Result};
use crate::gamma::GammaVector;
use crate::greedy_balanced::GreedyBalanced;
use crate::greedy_uniform::GreedyUniform;
use crate::online::{step, ArrivalPolicy, OnlineClient, OnlineRun, Transcript};
use crate::sampling::{
    derive_seed, edge_bernoulli, EdgeHasher, EdgeKey, EdgeOracle, EdgeSource, EdgeStatus, Model, ModelSpec, VertexId,
};
use crate::thresholds::{thresholds_balanced, thresholds_uniform};

/// Replica counts above this are clamped.
pub const MAX_REPLICAS: usize = 64;

/// Slack used when rounding real thresholds up to integers, so that
/// `0.9 * 20` counts as 18 rather than 19.
const ROUNDING_SLACK: f64 = 1e-9;

fn ceil_slack(x: f64) -> u64 {
    (x - ROUNDING_SLACK).ceil().max(0.0) as u64
}

/// `min(64, ceil(c / eps^2))`.
pub fn default_replica_count(c: f64, epsilon: f64) -> usize {
    let m = (c / (epsilon * epsilon) - ROUNDING_SLACK).ceil();
    if m.is_finite() && m >= 1.0 {
        (m as usize).min(MAX_REPLICAS)
    } else {
        1
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StoppingConfig {
    pub model: Model,
    pub epsilon: f64,
    pub mu: f64,
    pub alpha_comp: f64,
    pub gamma: Option<GammaVector>,
}

impl StoppingConfig {
    /// Uniform-model config; `mu` defaults to `epsilon / 2`.
    pub fn uniform(n: u32, r: u32, p: f64, epsilon: f64, mu: Option<f64>) -> Result<Self> {
        let report = thresholds_uniform(u64::from(n), r, p)?;
        Self::build(Model::Uniform, epsilon, mu.unwrap_or(epsilon / 2.0), report.alpha_comp, None)
    }

    /// Partite-model config; `mu` defaults to `epsilon^2`.
    pub fn partite(n: u32, r: u32, p: f64, gamma: &GammaVector, epsilon: f64, mu: Option<f64>) -> Result<Self> {
        let report = thresholds_balanced(u64::from(n), r, p, gamma)?;
        Self::build(Model::Partite, epsilon, mu.unwrap_or(epsilon * epsilon), report.alpha_comp, Some(gamma.clone()))
    }

    fn build(model: Model, epsilon: f64, mu: f64, alpha_comp: f64, gamma: Option<GammaVector>) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(LabError::InvalidConfig(format!("epsilon = {epsilon} must be positive")));
        }
        if !(mu > 0.0 && mu < 1.0) {
            return Err(LabError::InvalidConfig(format!("mu = {mu} must lie in (0, 1)")));
        }
        Ok(StoppingConfig { model, epsilon, mu, alpha_comp, gamma })
    }

    /// `ceil((1 - mu) * alpha_comp)`, the uniform stopping size.
    pub fn threshold(&self) -> u64 {
        ceil_slack((1.0 - self.mu) * self.alpha_comp).max(1)
    }

    /// `(1 - mu) * gamma_j * alpha_comp`, ascending (partite only).
    pub fn part_targets(&self) -> Vec<f64> {
        match &self.gamma {
            Some(g) => g.as_f64().iter().map(|gj| (1.0 - self.mu) * gj * self.alpha_comp).collect(),
            None => Vec::new(),
        }
    }

    /// Output size a replica must reach for the forbidden event.
    pub fn forbidden_size(&self) -> f64 {
        (1.0 + self.epsilon) * self.alpha_comp
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TauOutcome {
    pub tau: u64,
    /// False when the threshold was never met and `tau` is the horizon.
    pub reached: bool,
    /// Parts ordered by accepted count at `tau`, ties by index (partite).
    pub pi: Option<Vec<u32>>,
    /// 1-based sorted position of the part that crossed last (partite).
    pub j_star: Option<usize>,
    /// Whether that part's count equals its rounded-up target exactly.
    pub j_star_equality: Option<bool>,
}

/// Incremental stopping-time detector fed one round at a time.
#[derive(Clone, Debug)]
pub struct TauTracker {
    model: Model,
    threshold: u64,
    targets: Vec<f64>,
    counts: Vec<u64>,
    accepted: u64,
    round: u64,
    horizon: u64,
    hit: Option<TauOutcome>,
}

impl TauTracker {
    pub fn new(config: &StoppingConfig, spec: &ModelSpec) -> Self {
        TauTracker {
            model: config.model,
            threshold: config.threshold(),
            targets: config.part_targets(),
            counts: vec![0; if spec.model == Model::Partite { spec.r as usize } else { 1 }],
            accepted: 0,
            round: 0,
            horizon: spec.horizon(),
            hit: None,
        }
    }

    pub fn is_stopped(&self) -> bool {
        self.hit.is_some()
    }

    /// Records one round. Returns true on the round where `tau` is hit.
    pub fn observe(&mut self, v: VertexId, accepted: bool) -> bool {
        self.round += 1;
        if self.hit.is_some() {
            return false;
        }
        if accepted {
            self.accepted += 1;
            if let Some(c) = self.counts.get_mut(v.part as usize) {
                *c += 1;
            }
        }
        let hit = match self.model {
            Model::Uniform => self.accepted >= self.threshold,
            Model::Partite => accepted && sorted_dominates(&self.counts, &self.targets),
        };
        if hit {
            self.hit = Some(self.outcome(true, Some(v)));
        }
        hit
    }

    fn outcome(&self, reached: bool, last: Option<VertexId>) -> TauOutcome {
        if self.model == Model::Uniform {
            let tau = if reached { self.round } else { self.horizon };
            return TauOutcome { tau, reached, pi: None, j_star: None, j_star_equality: None };
        }
        if !reached {
            let pi = (0..self.counts.len() as u32).collect();
            return TauOutcome { tau: self.horizon, reached, pi: Some(pi), j_star: None, j_star_equality: None };
        }
        let pi = sorted_parts(&self.counts);
        let last_count = self.counts[last.expect("reached implies an arrival").part as usize];
        let j = pi.iter().position(|&q| self.counts[q as usize] == last_count).expect("part present");
        let equality = last_count == ceil_slack(self.targets[j]);
        TauOutcome { tau: self.round, reached, pi: Some(pi), j_star: Some(j + 1), j_star_equality: Some(equality) }
    }

    /// The outcome so far; `tau` is the horizon if nothing was hit.
    pub fn finish(&self) -> TauOutcome {
        self.hit.clone().unwrap_or_else(|| self.outcome(false, None))
    }
}

/// Parts sorted by `(count, index)`.
pub fn sorted_parts(counts: &[u64]) -> Vec<u32> {
    let mut pi: Vec<u32> = (0..counts.len() as u32).collect();
    pi.sort_by_key(|&q| (counts[q as usize], q));
    pi
}

/// True iff ascending counts meet ascending targets coordinatewise, which
/// holds iff some assignment of targets to parts is met.
pub fn sorted_dominates(counts: &[u64], targets: &[f64]) -> bool {
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    sorted.iter().zip(targets).all(|(&c, &t)| c as f64 >= t - ROUNDING_SLACK)
}

fn replay_tau(transcript: &Transcript, config: &StoppingConfig, spec: &ModelSpec) -> TauOutcome {
    let mut tracker = TauTracker::new(config, spec);
    for (v, d) in transcript.arrivals.iter().zip(&transcript.decisions) {
        if tracker.observe(*v, d.is_accept()) {
            break;
        }
    }
    let mut out = tracker.finish();
    if !out.reached {
        out.tau = transcript.horizon;
    }
    out
}

fn spec_for(transcript: &Transcript, r: u32) -> ModelSpec {
    let n = match transcript.model {
        Model::Uniform => transcript.horizon as u32,
        Model::Partite => (transcript.horizon / u64::from(r)) as u32,
    };
    ModelSpec { model: transcript.model, n, r, p: 0.0, seed: 0 }
}

/// First round whose accepted prefix reaches `config.threshold()`, else
/// the horizon.
pub fn detect_tau_uniform(transcript: &Transcript, config: &StoppingConfig) -> Result<TauOutcome> {
    if transcript.model != Model::Uniform || config.model != Model::Uniform {
        return Err(LabError::WrongModel { expected: "uniform" });
    }
    Ok(replay_tau(transcript, config, &spec_for(transcript, 2)))
}

/// First round at which the per-part accepted counts dominate the part
/// targets under some assignment, else the horizon.
pub fn detect_tau_partite(transcript: &Transcript, config: &StoppingConfig) -> Result<TauOutcome> {
    let gamma = config.gamma.as_ref().ok_or(LabError::WrongModel { expected: "partite" })?;
    if transcript.model != Model::Partite || config.model != Model::Partite {
        return Err(LabError::WrongModel { expected: "partite" });
    }
    Ok(replay_tau(transcript, config, &spec_for(transcript, gamma.r() as u32)))
}

/// Edge source for replica `i >= 2`: shared statuses for keys queried
/// through `tau`, fresh keyed draws otherwise.
pub struct ReplicaOracle<'a> {
    spec: ModelSpec,
    shared: &'a HashMap<EdgeKey, EdgeStatus>,
    fresh: EdgeHasher,
}

impl<'a> ReplicaOracle<'a> {
    pub fn new(spec: ModelSpec, shared: &'a HashMap<EdgeKey, EdgeStatus>, resample_seed: u64, replica: usize) -> Self {
        ReplicaOracle { spec, shared, fresh: EdgeHasher::new(derive_seed(resample_seed, replica as u64)) }
    }

    pub fn peek(&self, key: &EdgeKey) -> EdgeStatus {
        match self.shared.get(key) {
            Some(s) => *s,
            None => self.fresh.bernoulli(self.spec.p, key),
        }
    }
}

impl EdgeSource for ReplicaOracle<'_> {
    fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn status(&mut self, key: &EdgeKey, _round: u64) -> Result<EdgeStatus> {
        key.check(&self.spec)?;
        Ok(self.peek(key))
    }

    fn status_sorted(&mut self, vertices: &[VertexId], _round: u64) -> Result<EdgeStatus> {
        Ok(match self.shared.get(vertices) {
            Some(s) => *s,
            None => self.fresh.bernoulli_sorted(self.spec.p, vertices),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReplicaOutcome {
    pub replica: usize,
    pub accepted: Vec<VertexId>,
    pub accept_rounds: Vec<u64>,
    pub success: bool,
    /// Transcript agreement with the base through `tau` (always true for
    /// the base itself).
    pub prefix_agrees: bool,
}

impl ReplicaOutcome {
    pub fn size(&self) -> usize {
        self.accepted.len()
    }

    pub fn effective_size(&self) -> usize {
        if self.success {
            self.accepted.len()
        } else {
            0
        }
    }
}

pub struct CorrelatedFamily {
    pub spec: ModelSpec,
    /// Base transcript through `tau`.
    pub base_transcript: Transcript,
    pub tau: TauOutcome,
    pub m: usize,
    pub resample_seed: u64,
    /// Statuses of every edge queried by the base run through `tau`.
    pub shared_edges: HashMap<EdgeKey, EdgeStatus>,
    /// Replica 1 is the base run.
    pub replicas: Vec<ReplicaOutcome>,
}

impl CorrelatedFamily {
    /// Edge source of replica `i` (1-based). Replica 1 reads the base instance.
    pub fn replica_status(&self, i: usize, key: &EdgeKey) -> EdgeStatus {
        if i <= 1 {
            edge_bernoulli(self.spec.seed, self.spec.p, key)
        } else {
            ReplicaOracle::new(self.spec, &self.shared_edges, self.resample_seed, i).peek(key)
        }
    }

    pub fn truncated(&self) -> bool {
        !self.tau.reached
    }
}

struct RunOutput {
    accepted: Vec<VertexId>,
    accept_rounds: Vec<u64>,
    success: bool,
    prefix: Transcript,
}

/// Runs `client` on `source`, recording the transcript only through the
/// stopping round. With `stop_at` unset, the stopping round is detected on
/// the fly.
fn drive<E: EdgeSource, C: OnlineClient>(
    source: E,
    mut client: C,
    policy: &ArrivalPolicy,
    config: &StoppingConfig,
    stop_at: Option<u64>,
) -> Result<(RunOutput, TauOutcome)> {
    let spec = *source.spec();
    let mut run = OnlineRun::new(source, policy)?;
    let mut tracker = TauTracker::new(config, &spec);
    let mut prefix = None;
    while let Some((v, accepted)) = step(&mut run, &mut client)? {
        let hit = tracker.observe(v, accepted);
        let done = match stop_at {
            Some(t) => run.round() == t,
            None => hit,
        };
        if done && prefix.is_none() {
            prefix = Some(run.take_transcript());
            run.set_recording(false);
        }
    }
    let prefix = match prefix {
        Some(p) => p,
        None => run.take_transcript(),
    };
    let out = RunOutput {
        accepted: run.accepted().to_vec(),
        accept_rounds: run.accept_rounds().to_vec(),
        success: client.succeeded(),
        prefix,
    };
    Ok((out, tracker.finish()))
}

/// Builds a family of `m` replicas for a deterministic client.
pub fn build_family<C, F>(
    spec: &ModelSpec,
    make_client: F,
    policy: &ArrivalPolicy,
    config: &StoppingConfig,
    m: usize,
    resample_seed: u64,
) -> Result<CorrelatedFamily>
where
    C: OnlineClient + Send,
    F: Fn() -> Result<C> + Sync,
{
    if m == 0 {
        return Err(LabError::InvalidConfig("replica count must be at least 1".into()));
    }
    if config.model != spec.model {
        return Err(LabError::InvalidConfig("stopping config model differs from the spec".into()));
    }
    let (base, tau) = drive(EdgeOracle::stateless(*spec), make_client()?, policy, config, None)?;
    let shared: HashMap<EdgeKey, EdgeStatus> =
        base.prefix.edge_queries.iter().map(|q| (q.key.clone(), q.status)).collect();
    let tau_round = tau.tau;

    let others: Vec<Result<ReplicaOutcome>> = (2..=m)
        .into_par_iter()
        .map(|i| {
            let oracle = ReplicaOracle::new(*spec, &shared, resample_seed, i);
            let (out, _) = drive(oracle, make_client()?, policy, config, Some(tau_round))?;
            if let Some(round) = base.prefix.first_divergence(&out.prefix, tau_round) {
                return Err(LabError::NonDeterministicClient { replica: i, round });
            }
            Ok(ReplicaOutcome {
                replica: i,
                accepted: out.accepted,
                accept_rounds: out.accept_rounds,
                success: out.success,
                prefix_agrees: true,
            })
        })
        .collect();
    let mut replicas = vec![ReplicaOutcome {
        replica: 1,
        accepted: base.accepted,
        accept_rounds: base.accept_rounds,
        success: base.success,
        prefix_agrees: true,
    }];
    for r in others {
        replicas.push(r?);
    }
    Ok(CorrelatedFamily {
        spec: *spec,
        base_transcript: base.prefix,
        tau,
        m,
        resample_seed,
        shared_edges: shared,
        replicas,
    })
}

/// Family built around the plain greedy (uniform) or the staged greedy at
/// `target` (partite).
pub fn build_greedy_family(
    spec: &ModelSpec,
    target: Option<u64>,
    policy: &ArrivalPolicy,
    config: &StoppingConfig,
    m: usize,
    resample_seed: u64,
) -> Result<CorrelatedFamily> {
    match spec.model {
        Model::Uniform => build_family(spec, || Ok(GreedyUniform::new()), policy, config, m, resample_seed),
        Model::Partite => {
            let gamma = config.gamma.clone().ok_or(LabError::InvalidConfig("partite family needs gamma".into()))?;
            let target = match target {
                Some(t) => t,
                None => default_ogp_target(config)?,
            };
            build_family(spec, || GreedyBalanced::new(spec.r, &gamma, target), policy, config, m, resample_seed)
        }
    }
}

/// Smallest feasible balanced size at or above `(1 + eps) * alpha_comp`.
pub fn default_ogp_target(config: &StoppingConfig) -> Result<u64> {
    let gamma = config.gamma.as_ref().ok_or(LabError::WrongModel { expected: "partite" })?;
    Ok(gamma.round_up(config.forbidden_size() - ROUNDING_SLACK).max(gamma.lcm_denominator()))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FamilyRecord {
    pub tau: u64,
    pub truncated: bool,
    pub m: usize,
    pub sizes: Vec<usize>,
    pub success: Vec<bool>,
    pub forbidden: bool,
    pub prefix_size: usize,
    pub threshold: u64,
    pub overlaps: Vec<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub part_overlaps: Option<Vec<Vec<Vec<usize>>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pi_tau: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_star: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub j_star_equality: Option<bool>,
    pub shared_edges: usize,
}

pub fn family_statistics(family: &CorrelatedFamily, config: &StoppingConfig) -> FamilyRecord {
    let sets: Vec<std::collections::HashSet<VertexId>> =
        family.replicas.iter().map(|r| r.accepted.iter().copied().collect()).collect();
    let m = sets.len();
    let mut overlaps = vec![vec![0usize; m]; m];
    for i in 0..m {
        for j in 0..m {
            overlaps[i][j] = sets[i].intersection(&sets[j]).count();
        }
    }
    let part_overlaps = (family.spec.model == Model::Partite).then(|| {
        let r = family.spec.r as usize;
        (0..m)
            .map(|i| {
                (0..m)
                    .map(|j| {
                        let mut per = vec![0usize; r];
                        for v in sets[i].intersection(&sets[j]) {
                            per[v.part as usize] += 1;
                        }
                        per
                    })
                    .collect()
            })
            .collect()
    });
    let bar = config.forbidden_size();
    let forbidden = family.replicas.iter().all(|r| r.effective_size() as f64 >= bar - ROUNDING_SLACK);
    FamilyRecord {
        tau: family.tau.tau,
        truncated: family.truncated(),
        m: family.m,
        sizes: family.replicas.iter().map(ReplicaOutcome::size).collect(),
        success: family.replicas.iter().map(|r| r.success).collect(),
        forbidden,
        prefix_size: family.base_transcript.accepted_prefix(family.tau.tau).len(),
        threshold: config.threshold(),
        overlaps,
        part_overlaps,
        pi_tau: family.tau.pi.clone(),
        j_star: family.tau.j_star,
        j_star_equality: family.tau.j_star_equality,
        shared_edges: family.shared_edges.len(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FamilyAudit {
    pub shared_keys: usize,
    pub mismatches: usize,
    pub prefixes_agree: bool,
    /// Every replica's accepted prefix through `tau` equals the base one.
    pub accepted_prefixes_agree: bool,
}

impl FamilyAudit {
    pub fn passed(&self) -> bool {
        self.mismatches == 0 && self.prefixes_agree && self.accepted_prefixes_agree
    }
}

/// Re-queries every shared key on every replica and compares against the
/// base instance read directly from its seed.
pub fn audit(family: &CorrelatedFamily) -> FamilyAudit {
    let mut mismatches = 0;
    for (key, status) in &family.shared_edges {
        let base = edge_bernoulli(family.spec.seed, family.spec.p, key);
        if base != *status {
            mismatches += 1;
        }
        for i in 1..=family.m {
            if family.replica_status(i, key) != base {
                mismatches += 1;
            }
        }
    }
    let tau = family.tau.tau;
    let base_prefix: Vec<VertexId> = family.base_transcript.accepted_prefix(tau);
    let accepted_prefixes_agree = family.replicas.iter().all(|r| {
        let prefix: Vec<VertexId> =
            r.accepted.iter().zip(&r.accept_rounds).filter(|(_, &t)| t <= tau).map(|(v, _)| *v).collect();
        prefix == base_prefix
    });
    FamilyAudit {
        shared_keys: family.shared_edges.len(),
        mismatches,
        prefixes_agree: family.replicas.iter().all(|r| r.prefix_agrees),
        accepted_prefixes_agree,
    }
}

/// A uniformly random admissible key.
pub fn random_admissible_key<R: Rng>(spec: &ModelSpec, rng: &mut R) -> EdgeKey {
    let r = spec.r as usize;
    let mut vs: SmallVec<[VertexId; 6]> = match spec.model {
        Model::Uniform => rand::seq::index::sample(rng, spec.n as usize, r)
            .into_iter()
            .map(|i| VertexId::uniform(i as u32))
            .collect(),
        Model::Partite => (0..spec.r).map(|q| VertexId::partite(q, rng.random_range(0..spec.n))).collect(),
    };
    vs.sort_unstable();
    EdgeKey::from_sorted(vs)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AgreementProbe {
    pub probes: u64,
    pub agreements: u64,
    pub frequency: f64,
    pub expected: f64,
    pub std_error: f64,
}

/// Compares replicas `i` and `j` on `probes` random keys outside the shared
/// set. Agreement should occur with probability `p^2 + (1-p)^2`.
pub fn probe_unqueried_agreement(family: &CorrelatedFamily, i: usize, j: usize, probes: u64, seed: u64) -> AgreementProbe {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agreements = 0;
    let mut done = 0;
    while done < probes {
        let key = random_admissible_key(&family.spec, &mut rng);
        if family.shared_edges.contains_key(&key) {
            continue;
        }
        done += 1;
        if family.replica_status(i, &key) == family.replica_status(j, &key) {
            agreements += 1;
        }
    }
    let p = family.spec.p;
    let expected = p * p + (1.0 - p) * (1.0 - p);
    let std_error = (expected * (1.0 - expected) / probes.max(1) as f64).sqrt();
    AgreementProbe { probes, agreements, frequency: agreements as f64 / probes.max(1) as f64, expected, std_error }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greedy_balanced::next_permutation;
    use crate::online::Decision;

    #[test]
    fn replica_count_default() {
        assert_eq!(default_replica_count(1.0, 0.5), 4);
        assert_eq!(default_replica_count(1.0, 0.1), 64);
        assert_eq!(default_replica_count(0.16, 0.2), 4);
    }

    #[test]
    fn config_validation() {
        assert!(StoppingConfig::uniform(1 << 10, 2, 0.5, 0.0, None).is_err());
        assert!(StoppingConfig::uniform(1 << 10, 2, 0.5, 0.2, Some(1.0)).is_err());
        let c = StoppingConfig::uniform(1 << 20, 2, 0.5, 0.2, None).unwrap();
        assert_eq!(c.mu, 0.1);
        assert_eq!(c.threshold(), 18);
        let g: GammaVector = "1/2,1/2".parse().unwrap();
        let c = StoppingConfig::partite(1 << 20, 2, 0.5, &g, 0.2, None).unwrap();
        assert!((c.mu - 0.04).abs() < 1e-15);
        assert_eq!(c.part_targets().len(), 2);
    }

    fn transcript_from(model: Model, horizon: u64, rows: &[(VertexId, bool)]) -> Transcript {
        let mut t = Transcript::new(model, horizon);
        for (v, a) in rows {
            t.arrivals.push(*v);
            t.decisions.push(if *a { Decision::Accept } else { Decision::Reject });
        }
        t
    }

    #[test]
    fn uniform_tau_is_first_threshold_crossing() {
        let c = StoppingConfig::uniform(1 << 20, 2, 0.5, 0.2, None).unwrap();
        let rows: Vec<_> = (0..40).map(|i| (VertexId::uniform(i), i % 2 == 0)).collect();
        let t = transcript_from(Model::Uniform, 40, &rows);
        // 18th accept is arrival index 34, round 35
        assert_eq!(detect_tau_uniform(&t, &c).unwrap().tau, 35);
        let short = transcript_from(Model::Uniform, 40, &rows[..20]);
        let out = detect_tau_uniform(&short, &c).unwrap();
        assert_eq!((out.tau, out.reached), (40, false));
    }

    #[test]
    fn sorted_check_matches_permutations() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let r = rng.random_range(2..=5usize);
            let counts: Vec<u64> = (0..r).map(|_| rng.random_range(0..6)).collect();
            let mut targets: Vec<f64> = (0..r).map(|_| rng.random_range(0.0..6.0)).collect();
            targets.sort_by(f64::total_cmp);
            let mut perm: Vec<usize> = (0..r).collect();
            let mut any = false;
            loop {
                any |= (0..r).all(|j| counts[perm[j]] as f64 >= targets[j]);
                if !next_permutation(&mut perm) {
                    break;
                }
            }
            assert_eq!(any, sorted_dominates(&counts, &targets));
        }
    }

    #[test]
    fn partite_tau_with_alternating_arrivals() {
        let g: GammaVector = "1/2,1/2".parse().unwrap();
        let n = 1u32 << 20;
        let c = StoppingConfig { model: Model::Partite, epsilon: 0.2, mu: 0.04, alpha_comp: 20.0, gamma: Some(g) };
        let target = c.part_targets()[0];
        let rows: Vec<_> = (0..200u32).map(|i| (VertexId::partite(i % 2, i / 2), true)).collect();
        let t = transcript_from(Model::Partite, u64::from(n) * 2, &rows);
        let out = detect_tau_partite(&t, &c).unwrap();
        assert_eq!(out.tau, 2 * ceil_slack(target));
        assert_eq!(out.pi, Some(vec![0, 1]));
        assert_eq!(out.j_star, Some(1));
        assert_eq!(out.j_star_equality, Some(true));
    }

    #[test]
    fn singleton_family_is_the_base_run() {
        let spec = ModelSpec::uniform(4096, 2, 0.5, 5).unwrap();
        let c = StoppingConfig::uniform(4096, 2, 0.5, 0.2, None).unwrap();
        let fam = build_greedy_family(&spec, None, &ArrivalPolicy::uniform_random(1), &c, 1, 9).unwrap();
        let base = crate::greedy_uniform::run_greedy_uniform(&spec, &ArrivalPolicy::uniform_random(1)).unwrap();
        assert_eq!(fam.replicas.len(), 1);
        assert_eq!(fam.replicas[0].accepted, base.independent_set);
        let rec = family_statistics(&fam, &c);
        assert_eq!(rec.overlaps, vec![vec![base.size]]);
        assert_eq!(rec.forbidden, base.size as f64 >= c.forbidden_size());
    }

    #[test]
    fn degenerate_p_gives_identical_replicas() {
        for p in [0.0, 1.0] {
            let spec = ModelSpec::uniform(300, 3, p, 5).unwrap();
            let c = StoppingConfig { model: Model::Uniform, epsilon: 0.2, mu: 0.1, alpha_comp: 10.0, gamma: None };
            let fam = build_greedy_family(&spec, None, &ArrivalPolicy::uniform_random(1), &c, 5, 9).unwrap();
            let first = &fam.replicas[0].accepted;
            assert!(fam.replicas.iter().all(|r| &r.accepted == first));
            assert!(audit(&fam).passed());
        }
    }

    #[test]
    fn families_share_prefixes() {
        let spec = ModelSpec::uniform(2000, 3, 0.5, 12).unwrap();
        let c = StoppingConfig::uniform(2000, 3, 0.5, 0.2, None).unwrap();
        let fam = build_greedy_family(&spec, None, &ArrivalPolicy::uniform_random(2), &c, 6, 3).unwrap();
        assert!(audit(&fam).passed());
        let rec = family_statistics(&fam, &c);
        if !rec.truncated {
            assert_eq!(rec.prefix_size as u64, c.threshold());
        }
        for i in 0..6 {
            assert_eq!(rec.overlaps[i][i], rec.sizes[i]);
            assert!(rec.overlaps[i].iter().all(|&o| o >= rec.prefix_size));
        }

        let g: GammaVector = "1/6,1/3,1/2".parse().unwrap();
        let spec = ModelSpec::partite(3000, 3, 0.5, 4).unwrap();
        let c = StoppingConfig::partite(3000, 3, 0.5, &g, 0.3, None).unwrap();
        let fam = build_greedy_family(&spec, None, &ArrivalPolicy::uniform_random(2), &c, 4, 3).unwrap();
        assert!(audit(&fam).passed());
        let rec = family_statistics(&fam, &c);
        assert!(rec.part_overlaps.is_some());
        assert!(rec.pi_tau.is_some());
    }

    #[test]
    fn unqueried_keys_are_resampled() {
        let spec = ModelSpec::uniform(5000, 2, 0.5, 1).unwrap();
        let c = StoppingConfig::uniform(5000, 2, 0.5, 0.2, None).unwrap();
        let fam = build_greedy_family(&spec, None, &ArrivalPolicy::uniform_random(2), &c, 3, 3).unwrap();
        let probe = probe_unqueried_agreement(&fam, 2, 3, 20_000, 8);
        assert!((probe.frequency - probe.expected).abs() < 4.0 * probe.std_error);
        let probe = probe_unqueried_agreement(&fam, 1, 2, 20_000, 9);
        assert!((probe.frequency - probe.expected).abs() < 4.0 * probe.std_error);
    }
}
