//! Online arrival model: vertices are revealed one per round, edge statuses
//! incident to the new vertex may be queried against previously revealed
//! vertices, and each arrival gets exactly one irrevocable decision.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{LabError, Result};
use crate::sampling::{
    EdgeKey, EdgeSource, EdgeStatus, Model, ModelSpec, QueryRecord, VertexId, MAX_ARITY,
};

/// Header line written before every JSON-lines and CSV artifact.
pub const SCHEMA_HEADER: &str = "# hyperset-lab schema v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalKind {
    UniformRandom,
    FixedOrder,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArrivalPolicy {
    pub kind: ArrivalKind,
    pub order: Option<Vec<VertexId>>,
    pub arrival_seed: u64,
}

impl ArrivalPolicy {
    pub fn uniform_random(arrival_seed: u64) -> Self {
        ArrivalPolicy { kind: ArrivalKind::UniformRandom, order: None, arrival_seed }
    }

    pub fn fixed_order(order: Vec<VertexId>) -> Self {
        ArrivalPolicy { kind: ArrivalKind::FixedOrder, order: Some(order), arrival_seed: 0 }
    }

    fn validate(&self, spec: &ModelSpec) -> Result<()> {
        match (self.kind, &self.order) {
            (ArrivalKind::UniformRandom, _) => Ok(()),
            (ArrivalKind::FixedOrder, None) => {
                Err(LabError::PolicyMismatch("fixed_order policy without an order".into()))
            }
            (ArrivalKind::FixedOrder, Some(order)) => {
                let horizon = spec.horizon();
                if order.len() as u64 != horizon {
                    return Err(LabError::PolicyMismatch(format!(
                        "order has {} vertices but the horizon is {horizon}",
                        order.len()
                    )));
                }
                let mut seen = vec![false; horizon as usize];
                for v in order {
                    if !spec.contains(*v) {
                        return Err(LabError::PolicyMismatch(format!("vertex {v} not in the model")));
                    }
                    let slot = &mut seen[spec.flat_index(*v)];
                    if *slot {
                        return Err(LabError::PolicyMismatch(format!("vertex {v} repeated")));
                    }
                    *slot = true;
                }
                Ok(())
            }
        }
    }
}

/// Whether incident edges are revealed only when the client asks, or all
/// admissible ones automatically at each arrival.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RevealMode {
    #[default]
    OnDemand,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Accept,
    Reject,
}

impl Decision {
    pub fn is_accept(self) -> bool {
        self == Decision::Accept
    }
}

/// Ordered record of arrivals, edge queries and decisions. Rounds are
/// 1-based: `arrivals[t - 1]` is the vertex revealed in round `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transcript {
    pub model: Model,
    pub horizon: u64,
    pub arrivals: Vec<VertexId>,
    pub decisions: Vec<Decision>,
    pub edge_queries: Vec<QueryRecord>,
}

impl Transcript {
    pub fn new(model: Model, horizon: u64) -> Self {
        Transcript {
            model,
            horizon,
            arrivals: Vec::new(),
            decisions: Vec::new(),
            edge_queries: Vec::new(),
        }
    }

    /// Number of fully recorded rounds.
    pub fn rounds(&self) -> u64 {
        self.decisions.len() as u64
    }

    /// Accepted vertices among the first `t` arrivals.
    pub fn accepted_prefix(&self, t: u64) -> Vec<VertexId> {
        self.arrivals
            .iter()
            .zip(&self.decisions)
            .take(t as usize)
            .filter(|(_, d)| d.is_accept())
            .map(|(v, _)| *v)
            .collect()
    }

    /// The transcript restricted to rounds `1..=t`.
    pub fn truncated(&self, t: u64) -> Transcript {
        let t = t.min(self.rounds()) as usize;
        Transcript {
            model: self.model,
            horizon: self.horizon,
            arrivals: self.arrivals[..t.min(self.arrivals.len())].to_vec(),
            decisions: self.decisions[..t].to_vec(),
            edge_queries: self
                .edge_queries
                .iter()
                .filter(|q| q.round <= t as u64)
                .cloned()
                .collect(),
        }
    }

    /// First round at which the two transcripts differ within `1..=t`, or
    /// `None` if they agree there.
    pub fn first_divergence(&self, other: &Transcript, t: u64) -> Option<u64> {
        for round in 1..=t {
            let i = (round - 1) as usize;
            if self.arrivals.get(i) != other.arrivals.get(i)
                || self.decisions.get(i) != other.decisions.get(i)
            {
                return Some(round);
            }
        }
        let a = self.edge_queries.iter().filter(|q| q.round <= t);
        let mut b = other.edge_queries.iter().filter(|q| q.round <= t);
        for qa in a {
            match b.next() {
                Some(qb) if qa == qb => {}
                Some(qb) => return Some(qa.round.min(qb.round)),
                None => return Some(qa.round),
            }
        }
        b.next().map(|q| q.round)
    }

    /// Writes one JSON object per event, preceded by the schema header.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{SCHEMA_HEADER}")?;
        let mut queries = self.edge_queries.iter().peekable();
        for (i, v) in self.arrivals.iter().enumerate() {
            let round = i as u64 + 1;
            let ev = Event::Arrival { round, vertex: JsonVertex::from_vertex(self.model, *v) };
            serde_json::to_writer(&mut out, &ev)?;
            writeln!(out)?;
            while let Some(q) = queries.next_if(|q| q.round <= round) {
                let ev = Event::Query {
                    round: q.round,
                    edge: q.key.vertices().iter().map(|v| JsonVertex::from_vertex(self.model, *v)).collect(),
                    present: q.status.is_present(),
                };
                serde_json::to_writer(&mut out, &ev)?;
                writeln!(out)?;
            }
            if let Some(d) = self.decisions.get(i) {
                let ev = Event::Decision { round, accept: d.is_accept() };
                serde_json::to_writer(&mut out, &ev)?;
                writeln!(out)?;
            }
        }
        Ok(())
    }

    /// Parses the output of [`Transcript::write_jsonl`].
    pub fn read_jsonl<R: BufRead>(input: R, model: Model, horizon: u64) -> Result<Transcript> {
        let mut t = Transcript::new(model, horizon);
        for line in input.lines() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match serde_json::from_str::<Event>(line)? {
                Event::Arrival { round, vertex } => {
                    if round != t.arrivals.len() as u64 + 1 {
                        return Err(LabError::MalformedTranscript(format!(
                            "arrival for round {round} out of sequence"
                        )));
                    }
                    t.arrivals.push(vertex.to_vertex());
                }
                Event::Query { round, edge, present } => {
                    let vs: SmallVec<[VertexId; 6]> = edge.into_iter().map(JsonVertex::to_vertex).collect();
                    t.edge_queries.push(QueryRecord {
                        round,
                        key: EdgeKey::from_sorted(vs),
                        status: EdgeStatus::from_present(present),
                    });
                }
                Event::Decision { round, accept } => {
                    if round != t.decisions.len() as u64 + 1 || round > t.arrivals.len() as u64 {
                        return Err(LabError::MalformedTranscript(format!(
                            "decision for round {round} out of sequence"
                        )));
                    }
                    t.decisions.push(if accept { Decision::Accept } else { Decision::Reject });
                }
            }
        }
        Ok(t)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "lowercase")]
enum Event {
    Arrival { round: u64, vertex: JsonVertex },
    Query { round: u64, edge: Vec<JsonVertex>, present: bool },
    Decision { round: u64, accept: bool },
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum JsonVertex {
    Uniform(u32),
    Partite([u32; 2]),
}

impl JsonVertex {
    fn from_vertex(model: Model, v: VertexId) -> Self {
        match model {
            Model::Uniform => JsonVertex::Uniform(v.index),
            Model::Partite => JsonVertex::Partite([v.part, v.index]),
        }
    }

    fn to_vertex(self) -> VertexId {
        match self {
            JsonVertex::Uniform(i) => VertexId::uniform(i),
            JsonVertex::Partite([p, i]) => VertexId::partite(p, i),
        }
    }
}

enum ArrivalStream {
    Random { perm: Vec<u32>, rng: ChaCha8Rng },
    Fixed(Vec<VertexId>),
}

/// One execution of the online model against an edge source.
pub struct OnlineRun<E: EdgeSource> {
    spec: ModelSpec,
    source: E,
    stream: ArrivalStream,
    horizon: u64,
    round: u64,
    pending: Option<VertexId>,
    revealed: Vec<u64>,
    accepted: Vec<VertexId>,
    accept_rounds: Vec<u64>,
    recording: bool,
    transcript: Transcript,
    reveal: RevealMode,
    revealed_order: Vec<VertexId>,
    last_reveal: Vec<(EdgeKey, EdgeStatus)>,
    queries: u64,
    marks: Vec<u64>,
    terms: Vec<u64>,
}

impl<E: EdgeSource> OnlineRun<E> {
    /// Starts a run with transcript recording on and on-demand reveals.
    pub fn new(source: E, policy: &ArrivalPolicy) -> Result<Self> {
        let spec = *source.spec();
        spec.validate()?;
        policy.validate(&spec)?;
        let horizon = spec.horizon();
        let stream = match policy.kind {
            ArrivalKind::UniformRandom => ArrivalStream::Random {
                perm: (0..horizon as u32).collect(),
                rng: ChaCha8Rng::seed_from_u64(policy.arrival_seed),
            },
            ArrivalKind::FixedOrder => {
                ArrivalStream::Fixed(policy.order.clone().expect("validated fixed order"))
            }
        };
        Ok(OnlineRun {
            spec,
            source,
            stream,
            horizon,
            round: 0,
            pending: None,
            revealed: vec![0; (horizon as usize).div_ceil(64)],
            accepted: Vec::new(),
            accept_rounds: Vec::new(),
            recording: true,
            transcript: Transcript::new(spec.model, horizon),
            reveal: RevealMode::OnDemand,
            revealed_order: Vec::new(),
            last_reveal: Vec::new(),
            queries: 0,
            marks: vec![0; (horizon as usize).div_ceil(64)],
            terms: Vec::new(),
        })
    }

    pub fn with_recording(mut self, on: bool) -> Self {
        self.recording = on;
        self
    }

    pub fn with_reveal_mode(mut self, mode: RevealMode) -> Self {
        self.reveal = mode;
        self
    }

    /// Stops (or resumes) appending to the transcript. The run itself is
    /// unaffected.
    pub fn set_recording(&mut self, on: bool) {
        self.recording = on;
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn source(&self) -> &E {
        &self.source
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    /// Number of arrivals so far (the current round while a decision is pending).
    pub fn round(&self) -> u64 {
        self.round
    }

    pub fn is_finished(&self) -> bool {
        self.round == self.horizon && self.pending.is_none()
    }

    pub fn pending(&self) -> Option<VertexId> {
        self.pending
    }

    pub fn accepted(&self) -> &[VertexId] {
        &self.accepted
    }

    /// Round of each acceptance, parallel to [`OnlineRun::accepted`].
    pub fn accept_rounds(&self) -> &[u64] {
        &self.accept_rounds
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn into_transcript(self) -> Transcript {
        self.transcript
    }

    /// Moves the recorded transcript out, leaving an empty one behind.
    pub fn take_transcript(&mut self) -> Transcript {
        let empty = Transcript::new(self.spec.model, self.horizon);
        std::mem::replace(&mut self.transcript, empty)
    }

    pub fn query_count(&self) -> u64 {
        self.queries
    }

    /// Edges revealed automatically at the latest arrival (full reveal mode).
    pub fn revealed_edges(&self) -> &[(EdgeKey, EdgeStatus)] {
        &self.last_reveal
    }

    fn is_revealed(&self, v: VertexId) -> bool {
        let i = self.spec.flat_index(v);
        self.revealed[i / 64] >> (i % 64) & 1 == 1
    }

    /// True if `v` arrived in an earlier round than the current one.
    pub fn revealed_before_current(&self, v: VertexId) -> bool {
        self.spec.contains(v) && self.is_revealed(v) && Some(v) != self.pending
    }

    pub fn next_arrival(&mut self) -> Result<VertexId> {
        if self.pending.is_some() {
            return Err(LabError::DecisionPending(self.round));
        }
        if self.round >= self.horizon {
            return Err(LabError::HorizonExhausted(self.horizon));
        }
        let t = self.round as usize;
        let v = match &mut self.stream {
            ArrivalStream::Random { perm, rng } => {
                let j = rng.random_range(t..perm.len());
                perm.swap(t, j);
                self.spec.vertex_at(perm[t] as usize)
            }
            ArrivalStream::Fixed(order) => order[t],
        };
        self.round += 1;
        self.pending = Some(v);
        let i = self.spec.flat_index(v);
        self.revealed[i / 64] |= 1 << (i % 64);
        if self.recording {
            self.transcript.arrivals.push(v);
        }
        if self.reveal == RevealMode::Full {
            self.reveal_all(v)?;
            self.revealed_order.push(v);
        }
        Ok(v)
    }

    fn reveal_all(&mut self, v: VertexId) -> Result<()> {
        self.last_reveal.clear();
        let k = self.spec.r as usize - 1;
        let pool: Vec<VertexId> = match self.spec.model {
            Model::Uniform => self.revealed_order.clone(),
            Model::Partite => {
                self.revealed_order.iter().copied().filter(|u| u.part != v.part).collect()
            }
        };
        let mut subsets: Vec<Vec<VertexId>> = Vec::new();
        match self.spec.model {
            Model::Uniform => {
                for_each_combination(pool.len(), k, |idx| {
                    subsets.push(idx.iter().map(|&i| pool[i]).collect());
                });
            }
            Model::Partite => {
                let groups: Vec<Vec<VertexId>> = (0..self.spec.r)
                    .filter(|&p| p != v.part)
                    .map(|p| pool.iter().copied().filter(|u| u.part == p).collect())
                    .collect();
                for_each_product(&groups, |tuple| subsets.push(tuple.to_vec()));
            }
        }
        for subset in subsets {
            let status = self.query_edge(&subset)?;
            let mut vs: SmallVec<[VertexId; 6]> = subset.into_iter().collect();
            vs.push(v);
            vs.sort_unstable();
            self.last_reveal.push((EdgeKey::from_sorted(vs), status));
        }
        Ok(())
    }

    /// Status of `subset ∪ {v_t}` where `v_t` is the pending arrival and
    /// `subset` is an `(r-1)`-set of earlier arrivals.
    pub fn query_edge(&mut self, subset: &[VertexId]) -> Result<EdgeStatus> {
        let v = self.pending.ok_or(LabError::NoPendingArrival)?;
        let r = self.spec.r as usize;
        if subset.len() + 1 != r {
            return Err(LabError::WrongArity { expected: r - 1, got: subset.len() });
        }
        let mut buf = [v; MAX_ARITY];
        for (slot, &u) in buf.iter_mut().zip(subset) {
            if !self.revealed_before_current(u) {
                return Err(LabError::NotRevealed(u.to_string()));
            }
            *slot = u;
        }
        let vs = &mut buf[..r];
        insertion_sort(vs);
        match self.spec.model {
            Model::Uniform => {
                if let Some(w) = vs.windows(2).find(|w| w[0] == w[1]) {
                    return Err(LabError::DuplicateVertex(w[0].index.to_string()));
                }
            }
            Model::Partite => {
                if vs.iter().enumerate().any(|(i, u)| u.part as usize != i) {
                    return Err(LabError::WrongPartMultiset);
                }
            }
        }
        self.query_sorted(vs)
    }

    fn query_sorted(&mut self, vs: &[VertexId]) -> Result<EdgeStatus> {
        let status = self.source.status_sorted(vs, self.round)?;
        self.queries += 1;
        if self.recording {
            let key = EdgeKey::from_sorted(SmallVec::from_slice(vs));
            self.transcript.edge_queries.push(QueryRecord { round: self.round, key, status });
        }
        Ok(status)
    }

    fn clear_marks(&mut self, vertices: &[VertexId]) {
        for &u in vertices {
            let i = self.spec.flat_index(u);
            self.marks[i / 64] &= !(1 << (i % 64));
        }
    }

    /// Uniform model only. Queries every `(r-1)`-subset of `pool` together
    /// with the pending arrival, in lexicographic order of positions in
    /// `pool`, and returns how many edges were present. Same effect as
    /// calling [`OnlineRun::query_edge`] on each subset in that order.
    pub fn query_combinations(&mut self, pool: &[VertexId]) -> Result<usize> {
        let v = self.pending.ok_or(LabError::NoPendingArrival)?;
        if self.spec.model != Model::Uniform {
            return Err(LabError::WrongModel { expected: "uniform" });
        }
        let k = self.spec.r as usize - 1;
        let mut dup = None;
        for (j, &u) in pool.iter().enumerate() {
            if !self.revealed_before_current(u) {
                self.clear_marks(&pool[..j]);
                return Err(LabError::NotRevealed(u.to_string()));
            }
            let i = self.spec.flat_index(u);
            if self.marks[i / 64] >> (i % 64) & 1 == 1 {
                dup = Some(u);
            }
            self.marks[i / 64] |= 1 << (i % 64);
        }
        self.clear_marks(pool);
        if let Some(u) = dup {
            return Err(LabError::DuplicateVertex(u.index.to_string()));
        }
        let n = pool.len();
        if n < k {
            return Ok(0);
        }
        let mut present = 0;
        let mut idx: SmallVec<[usize; MAX_ARITY]> = (0..k).collect();
        if let (false, Some((hasher, p))) = (self.recording, self.source.stateless()) {
            let base = hasher.vertex_term(v);
            self.terms.clear();
            self.terms.extend(pool.iter().map(|&u| hasher.vertex_term(u)));
            let mut queries = 0u64;
            loop {
                let sum = idx.iter().fold(base, |acc, &i| acc.wrapping_add(self.terms[i]));
                present += (hasher.finish(sum, k + 1) < p) as usize;
                queries += 1;
                let mut i = k;
                while i > 0 && idx[i - 1] == n - k + i - 1 {
                    i -= 1;
                }
                if i == 0 {
                    self.queries += queries;
                    return Ok(present);
                }
                idx[i - 1] += 1;
                for j in i..k {
                    idx[j] = idx[j - 1] + 1;
                }
            }
        }
        loop {
            let mut buf = [v; MAX_ARITY];
            for (slot, &i) in buf.iter_mut().zip(&idx) {
                *slot = pool[i];
            }
            let vs = &mut buf[..k + 1];
            insertion_sort(vs);
            present += self.query_sorted(vs)?.is_present() as usize;
            let mut i = k;
            while i > 0 && idx[i - 1] == n - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                return Ok(present);
            }
            idx[i - 1] += 1;
            for j in i..k {
                idx[j] = idx[j - 1] + 1;
            }
        }
    }

    pub fn query_edges(&mut self, subsets: &[Vec<VertexId>]) -> Result<Vec<EdgeStatus>> {
        subsets.iter().map(|s| self.query_edge(s)).collect()
    }

    /// Records the irrevocable decision for the pending arrival.
    pub fn decide(&mut self, accept: bool) -> Result<()> {
        let v = match self.pending.take() {
            Some(v) => v,
            None if self.round > 0 => return Err(LabError::AlreadyDecided(self.round)),
            None => return Err(LabError::NoPendingArrival),
        };
        if accept {
            self.accepted.push(v);
            self.accept_rounds.push(self.round);
        }
        if self.recording {
            self.transcript.decisions.push(if accept { Decision::Accept } else { Decision::Reject });
        }
        Ok(())
    }
}

/// A deterministic online algorithm: sees each arrival once, may query
/// edges through the run, and returns its decision.
pub trait OnlineClient {
    fn on_arrival<E: EdgeSource>(&mut self, run: &mut OnlineRun<E>, v: VertexId) -> Result<bool>;

    /// Whether the client's output counts as a valid solution. Clients with
    /// structural requirements (balancedness) override this.
    fn succeeded(&self) -> bool {
        true
    }
}

/// Plays one round. Returns `None` once the horizon is reached.
pub fn step<E: EdgeSource, C: OnlineClient>(
    run: &mut OnlineRun<E>,
    client: &mut C,
) -> Result<Option<(VertexId, bool)>> {
    if run.round() >= run.horizon() {
        return Ok(None);
    }
    let v = run.next_arrival()?;
    let accept = client.on_arrival(run, v)?;
    run.decide(accept)?;
    Ok(Some((v, accept)))
}

/// Plays rounds until the horizon, or until `max_rounds` rounds in total.
pub fn run_client<E: EdgeSource, C: OnlineClient>(
    run: &mut OnlineRun<E>,
    client: &mut C,
    max_rounds: Option<u64>,
) -> Result<()> {
    let stop = max_rounds.map_or(run.horizon(), |m| m.min(run.horizon()));
    while run.round() < stop {
        step(run, client)?;
    }
    Ok(())
}

fn insertion_sort(a: &mut [VertexId]) {
    for i in 1..a.len() {
        let mut j = i;
        while j > 0 && a[j - 1] > a[j] {
            a.swap(j - 1, j);
            j -= 1;
        }
    }
}

/// Visits every `k`-combination of `0..n` in lexicographic order.
pub fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Visits every tuple with one element from each group, odometer order.
pub fn for_each_product<T: Copy>(groups: &[Vec<T>], mut f: impl FnMut(&[T])) {
    if groups.iter().any(Vec::is_empty) {
        return;
    }
    let mut idx = vec![0usize; groups.len()];
    let mut tuple: Vec<T> = groups.iter().map(|g| g[0]).collect();
    loop {
        f(&tuple);
        let mut i = groups.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            idx[i] += 1;
            if idx[i] < groups[i].len() {
                tuple[i] = groups[i][idx[i]];
                break;
            }
            idx[i] = 0;
            tuple[i] = groups[i][0];
        }
    }
}
