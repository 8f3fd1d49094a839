//! Vertices, canonical edge keys and the lazily evaluated edge oracle for
//! the two random hypergraph models.
//!
//! Edge presence is never stored up front. Each admissible key is mapped to
//! a uniform value in `[0, 1)` by a keyed pseudorandom function of
//! `(seed, canonical key)` and compared against `p`. The function is:
//!
//! ```text
//! k    = mix64(seed ^ EDGE_DOMAIN)
//! t(v) = mix64(k ^ pack(v))                    pack(v) = part << 32 | index
//! h    = mix64(k + r * GOLDEN + sum of t(v) over the key's vertices)
//! u    = (h >> 11) * 2^-53
//! ```
//!
//! where `mix64` is the SplitMix64 finalizer and arithmetic wraps mod 2^64.
//! The value depends on the vertex set only, so per-vertex terms can be
//! reused across the many keys that share vertices. The query round never
//! enters the hash, so query order cannot change the instance.

use std::borrow::Borrow;
use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{LabError, Result};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;
const EDGE_DOMAIN: u64 = 0x6879_7065_7273_6574; // "hyperset"

/// Default cap on the number of admissible edges `materialize` will enumerate.
pub const DEFAULT_MATERIALIZE_CAP: u128 = 10_000_000;

/// SplitMix64 output function.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a stream label.
#[inline]
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    mix64(mix64(seed ^ GOLDEN).wrapping_add(stream.wrapping_mul(GOLDEN)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Uniform,
    Partite,
}

impl Model {
    pub fn as_str(self) -> &'static str {
        match self {
            Model::Uniform => "uniform",
            Model::Partite => "partite",
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Model {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(Model::Uniform),
            "partite" => Ok(Model::Partite),
            other => Err(LabError::InvalidSpec(format!("unknown model {other:?}"))),
        }
    }
}

/// Largest supported edge size.
pub const MAX_ARITY: usize = 16;

/// A vertex. In the uniform model `part` is always 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VertexId {
    pub part: u32,
    pub index: u32,
}

impl VertexId {
    pub const fn uniform(index: u32) -> Self {
        VertexId { part: 0, index }
    }

    pub const fn partite(part: u32, index: u32) -> Self {
        VertexId { part, index }
    }

    #[inline]
    fn packed(self) -> u64 {
        (u64::from(self.part) << 32) | u64::from(self.index)
    }
}

impl fmt::Display for VertexId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.part, self.index)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeStatus {
    Present,
    Absent,
}

impl EdgeStatus {
    #[inline]
    pub fn is_present(self) -> bool {
        self == EdgeStatus::Present
    }

    #[inline]
    pub fn from_present(present: bool) -> Self {
        if present {
            EdgeStatus::Present
        } else {
            EdgeStatus::Absent
        }
    }
}

/// Instance parameters for either random model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub model: Model,
    /// Vertex count (uniform) or vertices per part (partite).
    pub n: u32,
    pub r: u32,
    pub p: f64,
    pub seed: u64,
}

impl ModelSpec {
    pub fn new(model: Model, n: u32, r: u32, p: f64, seed: u64) -> Result<Self> {
        let spec = ModelSpec { model, n, r, p, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn uniform(n: u32, r: u32, p: f64, seed: u64) -> Result<Self> {
        Self::new(Model::Uniform, n, r, p, seed)
    }

    pub fn partite(n: u32, r: u32, p: f64, seed: u64) -> Result<Self> {
        Self::new(Model::Partite, n, r, p, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r < 2 || self.r as usize > MAX_ARITY {
            return Err(LabError::InvalidSpec(format!(
                "r = {} must lie in [2, {MAX_ARITY}]",
                self.r
            )));
        }
        if !(0.0..=1.0).contains(&self.p) {
            return Err(LabError::InvalidProbability(self.p));
        }
        match self.model {
            Model::Uniform if self.n < self.r => Err(LabError::InvalidSpec(format!(
                "uniform model needs n >= r (n = {}, r = {})",
                self.n, self.r
            ))),
            Model::Partite if self.n == 0 => {
                Err(LabError::InvalidSpec("partite model needs n >= 1".into()))
            }
            Model::Partite if u64::from(self.n) * u64::from(self.r) > u64::from(u32::MAX) => {
                Err(LabError::InvalidSpec("r * n must fit in 32 bits".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// `b = 1/(1-p)`; undefined for `p = 1`.
    pub fn b(&self) -> Option<f64> {
        (self.p < 1.0).then(|| 1.0 / (1.0 - self.p))
    }

    /// Number of online rounds: `n` (uniform) or `r * n` (partite).
    pub fn horizon(&self) -> u64 {
        match self.model {
            Model::Uniform => u64::from(self.n),
            Model::Partite => u64::from(self.r) * u64::from(self.n),
        }
    }

    pub fn contains(&self, v: VertexId) -> bool {
        match self.model {
            Model::Uniform => v.part == 0 && v.index < self.n,
            Model::Partite => v.part < self.r && v.index < self.n,
        }
    }

    /// Position of `v` in the flat ordering `part * n + index`.
    #[inline]
    pub fn flat_index(&self, v: VertexId) -> usize {
        v.part as usize * self.n as usize + v.index as usize
    }

    #[inline]
    pub fn vertex_at(&self, flat: usize) -> VertexId {
        let n = self.n as usize;
        VertexId { part: (flat / n) as u32, index: (flat % n) as u32 }
    }

    /// All vertices in flat order.
    pub fn vertices(&self) -> impl Iterator<Item = VertexId> + '_ {
        (0..self.horizon() as usize).map(move |i| self.vertex_at(i))
    }

    /// `C(n, r)` (uniform) or `n^r` (partite), saturating.
    pub fn admissible_edge_count(&self) -> u128 {
        match self.model {
            Model::Uniform => binomial_u128(u128::from(self.n), u128::from(self.r)),
            Model::Partite => {
                let mut acc: u128 = 1;
                for _ in 0..self.r {
                    acc = acc.saturating_mul(u128::from(self.n));
                }
                acc
            }
        }
    }
}

pub(crate) fn binomial_u128(n: u128, k: u128) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Canonical hyperedge: vertices sorted by `(part, index)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeKey(SmallVec<[VertexId; 6]>);

impl EdgeKey {
    pub fn vertices(&self) -> &[VertexId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, v: VertexId) -> bool {
        self.0.contains(&v)
    }

    /// Wraps vertices that are already in canonical order. Callers must
    /// uphold the canonical-form invariant; `check` verifies it.
    pub(crate) fn from_sorted(vertices: SmallVec<[VertexId; 6]>) -> Self {
        EdgeKey(vertices)
    }

    /// Verifies that the key is canonical and admissible for `spec`.
    pub fn check(&self, spec: &ModelSpec) -> Result<()> {
        let r = spec.r as usize;
        if self.0.len() != r {
            return Err(LabError::InadmissibleKey(format!(
                "expected {r} vertices, got {}",
                self.0.len()
            )));
        }
        for v in &self.0 {
            if !spec.contains(*v) {
                return Err(LabError::InadmissibleKey(format!("vertex {v} out of range")));
            }
        }
        match spec.model {
            Model::Uniform => {
                if self.0.windows(2).any(|w| w[0].index >= w[1].index) {
                    return Err(LabError::InadmissibleKey(
                        "uniform keys must be strictly increasing".into(),
                    ));
                }
            }
            Model::Partite => {
                if self.0.iter().enumerate().any(|(i, v)| v.part as usize != i) {
                    return Err(LabError::InadmissibleKey(
                        "partite keys need one vertex per part, ordered by part".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

impl Borrow<[VertexId]> for EdgeKey {
    fn borrow(&self) -> &[VertexId] {
        &self.0
    }
}

impl fmt::Display for EdgeKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        f.write_str("]")
    }
}

/// Puts `vertices` into canonical form for `spec`.
pub fn canonicalize_edge(vertices: &[VertexId], spec: &ModelSpec) -> Result<EdgeKey> {
    let r = spec.r as usize;
    if vertices.len() != r {
        return Err(LabError::WrongArity { expected: r, got: vertices.len() });
    }
    if let Some(v) = vertices.iter().find(|v| !spec.contains(**v)) {
        return Err(LabError::VertexOutOfRange(v.to_string()));
    }
    let mut sorted: SmallVec<[VertexId; 6]> = vertices.iter().copied().collect();
    sorted.sort_unstable();
    match spec.model {
        Model::Uniform => {
            if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
                return Err(LabError::DuplicateVertex(w[0].index.to_string()));
            }
        }
        Model::Partite => {
            if sorted.iter().enumerate().any(|(i, v)| v.part as usize != i) {
                return Err(LabError::WrongPartMultiset);
            }
        }
    }
    Ok(EdgeKey(sorted))
}

/// The keyed pseudorandom function with its seed-only prefix precomputed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EdgeHasher {
    key: u64,
}

impl EdgeHasher {
    pub fn new(seed: u64) -> Self {
        EdgeHasher { key: mix64(seed ^ EDGE_DOMAIN) }
    }

    /// Per-vertex term; keys sum these before finishing.
    #[inline]
    pub fn vertex_term(&self, v: VertexId) -> u64 {
        mix64(self.key ^ v.packed())
    }

    /// Maps the wrapping sum of a key's vertex terms to `[0, 1)`.
    #[inline]
    pub fn finish(&self, term_sum: u64, len: usize) -> f64 {
        let h = mix64(self.key.wrapping_add((len as u64).wrapping_mul(GOLDEN)).wrapping_add(term_sum));
        (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform value in `[0, 1)` for the key with these vertices.
    #[inline]
    pub fn uniform(&self, vertices: &[VertexId]) -> f64 {
        let sum = vertices.iter().fold(0u64, |acc, &v| acc.wrapping_add(self.vertex_term(v)));
        self.finish(sum, vertices.len())
    }

    #[inline]
    pub fn bernoulli(&self, p: f64, key: &EdgeKey) -> EdgeStatus {
        self.bernoulli_sorted(p, key.vertices())
    }

    #[inline]
    pub fn bernoulli_sorted(&self, p: f64, vertices: &[VertexId]) -> EdgeStatus {
        EdgeStatus::from_present(self.uniform(vertices) < p)
    }
}

/// The keyed pseudorandom function: `(seed, key) -> [0, 1)`.
#[inline]
pub fn edge_uniform(seed: u64, key: &EdgeKey) -> f64 {
    EdgeHasher::new(seed).uniform(key.vertices())
}

/// Bernoulli(p) status of `key` under `seed`.
#[inline]
pub fn edge_bernoulli(seed: u64, p: f64, key: &EdgeKey) -> EdgeStatus {
    EdgeStatus::from_present(edge_uniform(seed, key) < p)
}

/// Anything that answers edge-status queries for one hypergraph instance.
pub trait EdgeSource {
    fn spec(&self) -> &ModelSpec;

    /// Status of an admissible canonical key. `round` is bookkeeping only.
    fn status(&mut self, key: &EdgeKey, round: u64) -> Result<EdgeStatus>;

    /// Status of the key whose canonical vertex list is `vertices`, already
    /// checked against `spec()`. Sources may skip their own check and avoid
    /// building the key.
    fn status_sorted(&mut self, vertices: &[VertexId], round: u64) -> Result<EdgeStatus> {
        self.status(&EdgeKey::from_sorted(SmallVec::from_slice(vertices)), round)
    }

    /// The hasher and edge probability that reproduce `status` for every
    /// key, if the source is a side-effect-free function of the key.
    fn stateless(&self) -> Option<(EdgeHasher, f64)> {
        None
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct QueryRecord {
    pub round: u64,
    pub key: EdgeKey,
    pub status: EdgeStatus,
}

/// Lazily sampled, optionally memoized edge-status source.
///
/// A stateless oracle answers identically to a recording one; it only skips
/// the memo table and the query log, which matters for runs with tens of
/// millions of queries.
#[derive(Clone, Debug)]
pub struct EdgeOracle {
    spec: ModelSpec,
    hasher: EdgeHasher,
    recording: bool,
    queried: HashMap<EdgeKey, EdgeStatus>,
    query_order: Vec<QueryRecord>,
}

impl EdgeOracle {
    /// Recording oracle: memoizes statuses and logs every query.
    pub fn new(spec: ModelSpec) -> Self {
        EdgeOracle { spec, hasher: EdgeHasher::new(spec.seed), recording: true, queried: HashMap::new(), query_order: Vec::new() }
    }

    pub fn stateless(spec: ModelSpec) -> Self {
        EdgeOracle { spec, hasher: EdgeHasher::new(spec.seed), recording: false, queried: HashMap::new(), query_order: Vec::new() }
    }

    pub fn is_recording(&self) -> bool {
        self.recording
    }

    pub fn queried(&self) -> &HashMap<EdgeKey, EdgeStatus> {
        &self.queried
    }

    pub fn query_order(&self) -> &[QueryRecord] {
        &self.query_order
    }

    /// Status without touching the memo or the log.
    pub fn peek(&self, key: &EdgeKey) -> EdgeStatus {
        self.hasher.bernoulli(self.spec.p, key)
    }

    pub fn edge_status(&mut self, key: &EdgeKey, round: u64) -> Result<EdgeStatus> {
        key.check(&self.spec)?;
        Ok(self.admissible_status(key, round))
    }

    fn admissible_status(&mut self, key: &EdgeKey, round: u64) -> EdgeStatus {
        if !self.recording {
            return self.peek(key);
        }
        let status = match self.queried.get(key) {
            Some(s) => *s,
            None => {
                let s = self.peek(key);
                self.queried.insert(key.clone(), s);
                s
            }
        };
        self.query_order.push(QueryRecord { round, key: key.clone(), status });
        status
    }
}

impl EdgeSource for EdgeOracle {
    fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    fn status(&mut self, key: &EdgeKey, round: u64) -> Result<EdgeStatus> {
        self.edge_status(key, round)
    }

    fn status_sorted(&mut self, vertices: &[VertexId], round: u64) -> Result<EdgeStatus> {
        if !self.recording {
            return Ok(self.hasher.bernoulli_sorted(self.spec.p, vertices));
        }
        Ok(self.admissible_status(&EdgeKey::from_sorted(SmallVec::from_slice(vertices)), round))
    }

    fn stateless(&self) -> Option<(EdgeHasher, f64)> {
        (!self.recording).then_some((self.hasher, self.spec.p))
    }
}

/// Calls `f` on every admissible key of `spec` in lexicographic order.
pub fn for_each_admissible(spec: &ModelSpec, mut f: impl FnMut(&EdgeKey)) {
    let r = spec.r as usize;
    let n = spec.n;
    match spec.model {
        Model::Uniform => {
            let mut idx: Vec<u32> = (0..r as u32).collect();
            loop {
                let key = EdgeKey(idx.iter().map(|&i| VertexId::uniform(i)).collect());
                f(&key);
                // advance combination
                let mut i = r;
                while i > 0 && idx[i - 1] == n - (r - i + 1) as u32 {
                    i -= 1;
                }
                if i == 0 {
                    return;
                }
                idx[i - 1] += 1;
                for j in i..r {
                    idx[j] = idx[j - 1] + 1;
                }
            }
        }
        Model::Partite => {
            let mut idx = vec![0u32; r];
            loop {
                let key = EdgeKey(
                    idx.iter().enumerate().map(|(part, &i)| VertexId::partite(part as u32, i)).collect(),
                );
                f(&key);
                let mut i = r;
                loop {
                    if i == 0 {
                        return;
                    }
                    i -= 1;
                    idx[i] += 1;
                    if idx[i] < n {
                        break;
                    }
                    idx[i] = 0;
                }
            }
        }
    }
}

/// A fully enumerated instance.
#[derive(Clone, Debug)]
pub struct Hypergraph {
    pub spec: ModelSpec,
    pub admissible: u128,
    /// Present edges in lexicographic key order.
    pub edges: Vec<EdgeKey>,
    present: HashSet<EdgeKey>,
}

impl Hypergraph {
    /// An explicit instance with the given edge set.
    pub fn from_edges(spec: &ModelSpec, mut edges: Vec<EdgeKey>) -> Result<Self> {
        spec.validate()?;
        for e in &edges {
            e.check(spec)?;
        }
        edges.sort_unstable();
        edges.dedup();
        let present = edges.iter().cloned().collect();
        Ok(Hypergraph { spec: *spec, admissible: spec.admissible_edge_count(), edges, present })
    }

    pub fn is_present(&self, key: &EdgeKey) -> bool {
        self.present.contains(key)
    }

    /// True iff no present edge lies inside `set`.
    pub fn is_independent(&self, set: &[VertexId]) -> bool {
        let inside: HashSet<VertexId> = set.iter().copied().collect();
        !self.edges.iter().any(|e| e.vertices().iter().all(|v| inside.contains(v)))
    }
}

/// Enumerates every admissible key with its status.
pub fn materialize(spec: &ModelSpec) -> Result<Hypergraph> {
    materialize_with_cap(spec, DEFAULT_MATERIALIZE_CAP)
}

pub fn materialize_with_cap(spec: &ModelSpec, cap: u128) -> Result<Hypergraph> {
    spec.validate()?;
    let admissible = spec.admissible_edge_count();
    if admissible > cap {
        return Err(LabError::CapExceeded { what: "admissible edge", count: admissible, cap });
    }
    let mut edges = Vec::new();
    for_each_admissible(spec, |key| {
        if edge_bernoulli(spec.seed, spec.p, key).is_present() {
            edges.push(key.clone());
        }
    });
    let present = edges.iter().cloned().collect();
    Ok(Hypergraph { spec: *spec, admissible, edges, present })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(i: u32) -> VertexId {
        VertexId::uniform(i)
    }

    #[test]
    fn canonicalize_sorts_uniform() {
        let spec = ModelSpec::uniform(10, 3, 0.5, 1).unwrap();
        let key = canonicalize_edge(&[u(5), u(2), u(7)], &spec).unwrap();
        assert_eq!(key.vertices(), &[u(2), u(5), u(7)]);
        let again = canonicalize_edge(key.vertices(), &spec).unwrap();
        assert_eq!(key, again);
    }

    #[test]
    fn canonicalize_orders_partite_by_part() {
        let spec = ModelSpec::partite(10, 2, 0.5, 1).unwrap();
        let key =
            canonicalize_edge(&[VertexId::partite(1, 3), VertexId::partite(0, 9)], &spec).unwrap();
        assert_eq!(key.vertices(), &[VertexId::partite(0, 9), VertexId::partite(1, 3)]);
    }

    #[test]
    fn canonicalize_errors() {
        let spec = ModelSpec::uniform(10, 3, 0.5, 1).unwrap();
        assert!(matches!(
            canonicalize_edge(&[u(2), u(2), u(7)], &spec),
            Err(LabError::DuplicateVertex(_))
        ));
        assert!(matches!(
            canonicalize_edge(&[u(2), u(7)], &spec),
            Err(LabError::WrongArity { expected: 3, got: 2 })
        ));
        assert!(matches!(
            canonicalize_edge(&[u(2), u(7), u(10)], &spec),
            Err(LabError::VertexOutOfRange(_))
        ));
        let partite = ModelSpec::partite(4, 3, 0.5, 1).unwrap();
        let same_part = [VertexId::partite(0, 1), VertexId::partite(0, 2), VertexId::partite(2, 0)];
        assert!(matches!(canonicalize_edge(&same_part, &partite), Err(LabError::WrongPartMultiset)));
    }

    #[test]
    fn spec_validation() {
        assert!(ModelSpec::uniform(2, 3, 0.5, 0).is_err());
        assert!(ModelSpec::uniform(3, 1, 0.5, 0).is_err());
        assert!(ModelSpec::uniform(3, 2, 1.5, 0).is_err());
        assert!(ModelSpec::uniform(3, 2, f64::NAN, 0).is_err());
        assert!(ModelSpec::partite(0, 2, 0.5, 0).is_err());
        assert!(ModelSpec::partite(1, 3, 0.5, 0).is_ok());
        assert_eq!(ModelSpec::partite(5, 3, 0.5, 0).unwrap().horizon(), 15);
        assert_eq!(ModelSpec::uniform(5, 3, 0.5, 0).unwrap().b(), Some(2.0));
        assert_eq!(ModelSpec::uniform(5, 3, 1.0, 0).unwrap().b(), None);
    }

    #[test]
    fn extreme_probabilities() {
        for (p, expect) in [(0.0, EdgeStatus::Absent), (1.0, EdgeStatus::Present)] {
            let spec = ModelSpec::uniform(30, 3, p, 99).unwrap();
            let mut oracle = EdgeOracle::new(spec);
            for_each_admissible(&spec, |key| {
                assert_eq!(oracle.edge_status(key, 0).unwrap(), expect);
            });
        }
    }

    #[test]
    fn memoized_query_is_stable_and_logged() {
        let spec = ModelSpec::uniform(10, 3, 0.5, 7).unwrap();
        let mut oracle = EdgeOracle::new(spec);
        let key = canonicalize_edge(&[u(1), u(4), u(8)], &spec).unwrap();
        let a = oracle.edge_status(&key, 3).unwrap();
        let b = oracle.edge_status(&key, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(oracle.queried().len(), 1);
        assert_eq!(oracle.query_order().len(), 2);
        assert_eq!(oracle.query_order()[1].round, 9);
        assert_eq!(EdgeOracle::stateless(spec).edge_status(&key, 0).unwrap(), a);
    }

    #[test]
    fn inadmissible_key_rejected() {
        let spec = ModelSpec::partite(4, 2, 0.5, 7).unwrap();
        let mut oracle = EdgeOracle::new(spec);
        let bad = EdgeKey(smallvec::smallvec![VertexId::partite(1, 0), VertexId::partite(1, 2)]);
        assert!(matches!(oracle.edge_status(&bad, 0), Err(LabError::InadmissibleKey(_))));
    }

    #[test]
    fn materialize_complete_hypergraphs() {
        let h = materialize(&ModelSpec::uniform(4, 3, 1.0, 0).unwrap()).unwrap();
        assert_eq!(h.admissible, 4);
        assert_eq!(h.edges.len(), 4);
        let h = materialize(&ModelSpec::partite(2, 2, 1.0, 0).unwrap()).unwrap();
        assert_eq!(h.edges.len(), 4);
    }

    #[test]
    fn materialize_agrees_with_oracle() {
        let spec = ModelSpec::uniform(8, 3, 0.5, 0xdead_beef).unwrap();
        let h = materialize(&spec).unwrap();
        let mut oracle = EdgeOracle::new(spec);
        let mut seen = 0;
        for_each_admissible(&spec, |key| {
            seen += 1;
            assert_eq!(oracle.edge_status(key, 0).unwrap().is_present(), h.is_present(key));
        });
        assert_eq!(seen, 56);
        // p = 1/2 on 56 keys: neither empty nor complete
        assert!(!h.edges.is_empty() && h.edges.len() < 56);
    }

    #[test]
    fn materialize_cap() {
        let spec = ModelSpec::uniform(100, 3, 0.5, 0).unwrap();
        assert!(matches!(materialize_with_cap(&spec, 1000), Err(LabError::CapExceeded { .. })));
    }

    #[test]
    fn marginal_and_pairwise_frequencies() {
        let spec = ModelSpec::uniform(10, 3, 0.3, 0).unwrap();
        let k1 = canonicalize_edge(&[u(0), u(1), u(2)], &spec).unwrap();
        let k2 = canonicalize_edge(&[u(0), u(1), u(3)], &spec).unwrap();
        let trials = 100_000u64;
        let (mut c1, mut both) = (0u64, 0u64);
        for seed in 0..trials {
            let a = edge_bernoulli(seed, spec.p, &k1).is_present();
            let b = edge_bernoulli(seed, spec.p, &k2).is_present();
            c1 += a as u64;
            both += (a && b) as u64;
        }
        let n = trials as f64;
        let p = spec.p;
        assert!((c1 as f64 / n - p).abs() <= 3.0 * (p * (1.0 - p) / n).sqrt());
        let pp = p * p;
        assert!((both as f64 / n - pp).abs() <= 3.0 * (pp * (1.0 - pp) / n).sqrt());
    }
}
