//! Personalized relevance distributions p(i|s) and p(i|t,s).
//!
//! The estimator is a topic model over annotations: every train annotation
//! (s, i, t) picks a topic z from the user's mixture θ_s, then draws the item
//! from φ_z and the tag from ψ_z. Symmetric Dirichlet priors α (items),
//! β (tags) and γ (topics per user) smooth the counts. Parameters are fitted
//! by collapsed Gibbs sampling; point estimates average the smoothed counts
//! over post-burn-in sweeps, one sample every [`SAMPLE_LAG`] sweeps.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{ItemId, SplitTrace, TagId, TraceIndex, UserId, Vocabularies, Vocabulary};
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Sweeps between two retained Gibbs samples.
pub const SAMPLE_LAG: usize = 10;

/// How p(z|t,s) is formed from the fitted parameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TagPosterior {
    /// p(z|t,s) ∝ ψ_{z,t} θ_{s,z}
    #[default]
    UserWeighted,
    /// p(z|t,s) ∝ ψ_{z,t}, ignoring the user's mixture.
    TagOnly,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModelConfig {
    pub num_topics: usize,
    /// Dirichlet prior over items per topic.
    pub alpha: f64,
    /// Dirichlet prior over tags per topic.
    pub beta: f64,
    /// Dirichlet prior over topics per user.
    pub gamma: f64,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    #[serde(default)]
    pub tag_posterior: TagPosterior,
}

impl TopicModelConfig {
    /// α = 0.1/|I|, β = 0.1/|T|, γ = 0.001.
    pub fn with_default_priors(num_topics: usize, n_items: usize, n_tags: usize) -> Self {
        TopicModelConfig {
            num_topics,
            alpha: 0.1 / n_items.max(1) as f64,
            beta: 0.1 / n_tags.max(1) as f64,
            gamma: 0.001,
            iterations: 500,
            burn_in: 200,
            seed: 0,
            tag_posterior: TagPosterior::UserWeighted,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_topics == 0 {
            return Err(Error::config("num_topics must be positive"));
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations must be positive"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::config(format!(
                "burn_in ({}) must be smaller than iterations ({})",
                self.burn_in, self.iterations
            )));
        }
        Ok(())
    }
}

/// Collapsed Gibbs sampler state over train annotations.
pub struct GibbsSampler {
    k: usize,
    n_items: usize,
    n_tags: usize,
    alpha: f64,
    beta: f64,
    gamma: f64,
    tokens: Vec<(u32, u32, u32)>,
    assignments: Vec<u32>,
    user_topic: Vec<u32>,
    topic_item: Vec<u32>,
    topic_tag: Vec<u32>,
    topic_total: Vec<u32>,
    user_total: Vec<u32>,
    weights: Vec<f64>,
    rng: ChaCha8Rng,
}

impl GibbsSampler {
    pub fn new(train: &TraceIndex, vocab: &Vocabularies, config: &TopicModelConfig) -> Result<Self> {
        config.validate()?;
        if train.is_empty() {
            return Err(Error::Training("training segment is empty".into()));
        }
        if config.num_topics > train.len() {
            return Err(Error::Training(format!(
                "{} topics exceed the {} training annotations",
                config.num_topics,
                train.len()
            )));
        }
        let k = config.num_topics;
        let (n_users, n_items, n_tags) = (vocab.users.len(), vocab.items.len(), vocab.tags.len());
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let tokens: Vec<_> = train
            .annotations()
            .iter()
            .map(|a| (a.user.0, a.item.0, a.tag.0))
            .collect();
        let mut s = GibbsSampler {
            k,
            n_items,
            n_tags,
            alpha: config.alpha,
            beta: config.beta,
            gamma: config.gamma,
            assignments: Vec::with_capacity(tokens.len()),
            user_topic: vec![0; n_users * k],
            topic_item: vec![0; k * n_items],
            topic_tag: vec![0; k * n_tags],
            topic_total: vec![0; k],
            user_total: vec![0; n_users],
            weights: vec![0.0; k],
            tokens,
            rng: ChaCha8Rng::seed_from_u64(0),
        };
        for idx in 0..s.tokens.len() {
            let z = rng.gen_range(0..k) as u32;
            s.assignments.push(z);
            s.add(idx, z);
        }
        s.rng = rng;
        Ok(s)
    }

    #[inline]
    fn add(&mut self, idx: usize, z: u32) {
        let (u, i, t) = self.tokens[idx];
        let z = z as usize;
        self.user_topic[u as usize * self.k + z] += 1;
        self.topic_item[z * self.n_items + i as usize] += 1;
        self.topic_tag[z * self.n_tags + t as usize] += 1;
        self.topic_total[z] += 1;
        self.user_total[u as usize] += 1;
    }

    #[inline]
    fn remove(&mut self, idx: usize, z: u32) {
        let (u, i, t) = self.tokens[idx];
        let z = z as usize;
        self.user_topic[u as usize * self.k + z] -= 1;
        self.topic_item[z * self.n_items + i as usize] -= 1;
        self.topic_tag[z * self.n_tags + t as usize] -= 1;
        self.topic_total[z] -= 1;
        self.user_total[u as usize] -= 1;
    }

    /// One full pass resampling every annotation's topic.
    pub fn sweep(&mut self) {
        let item_mass = self.n_items as f64 * self.alpha;
        let tag_mass = self.n_tags as f64 * self.beta;
        for idx in 0..self.tokens.len() {
            let old = self.assignments[idx];
            self.remove(idx, old);
            let (u, i, t) = self.tokens[idx];
            let (u, i, t) = (u as usize, i as usize, t as usize);
            let mut acc = 0.0;
            for z in 0..self.k {
                let n_z = self.topic_total[z] as f64;
                let w = (self.user_topic[u * self.k + z] as f64 + self.gamma)
                    * (self.topic_item[z * self.n_items + i] as f64 + self.alpha)
                    * (self.topic_tag[z * self.n_tags + t] as f64 + self.beta)
                    / ((n_z + item_mass) * (n_z + tag_mass));
                acc += w;
                self.weights[z] = acc;
            }
            let draw = self.rng.gen::<f64>() * acc;
            let new = self.weights.iter().position(|&c| draw < c).unwrap_or(self.k - 1) as u32;
            self.assignments[idx] = new;
            self.add(idx, new);
        }
    }

    /// Total topic assignments; always equals the number of annotations.
    pub fn total_assignments(&self) -> u64 {
        self.topic_total.iter().map(|&c| c as u64).sum()
    }

    pub fn num_tokens(&self) -> usize {
        self.tokens.len()
    }

    /// Adds the current smoothed estimates of θ, φ and ψ into the accumulators.
    fn accumulate(&self, theta: &mut [f64], phi: &mut [f64], psi: &mut [f64]) {
        let k = self.k;
        let kg = k as f64 * self.gamma;
        for (u, &total) in self.user_total.iter().enumerate() {
            let denom = total as f64 + kg;
            for z in 0..k {
                theta[u * k + z] += (self.user_topic[u * k + z] as f64 + self.gamma) / denom;
            }
        }
        for z in 0..k {
            let n_z = self.topic_total[z] as f64;
            let di = n_z + self.n_items as f64 * self.alpha;
            for i in 0..self.n_items {
                phi[z * self.n_items + i] += (self.topic_item[z * self.n_items + i] as f64 + self.alpha) / di;
            }
            let dt = n_z + self.n_tags as f64 * self.beta;
            for t in 0..self.n_tags {
                psi[z * self.n_tags + t] += (self.topic_tag[z * self.n_tags + t] as f64 + self.beta) / dt;
            }
        }
    }
}

/// Fitted relevance model.
///
/// Row-major parameter tables: `user_topic[s * K + z]` = θ̂_{s,z},
/// `topic_item[z * |I| + i]` = φ̂_{z,i}, `topic_tag[z * |T| + t]` = ψ̂_{z,t}.
#[derive(Debug, Clone, PartialEq)]
pub struct RelevanceModel {
    config: TopicModelConfig,
    vocab: Vocabularies,
    user_topic: Vec<f64>,
    topic_item: Vec<f64>,
    topic_tag: Vec<f64>,
}

/// Which relevance distribution is being evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    /// p(i|s)
    Prior,
    /// p(i|t,s)
    Conditional,
}

fn normalize_rows(table: &mut [f64], width: usize) {
    for row in table.chunks_mut(width) {
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= sum);
    }
}

fn normalize(v: &mut [f64]) {
    let sum: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= sum);
}

impl RelevanceModel {
    /// Fits the model on the split's train segment.
    pub fn train(split: &SplitTrace, config: &TopicModelConfig) -> Result<RelevanceModel> {
        Self::train_with(split, config, |_| {})
    }

    /// As [`RelevanceModel::train`], calling `observe` after every sweep.
    pub fn train_with<F>(split: &SplitTrace, config: &TopicModelConfig, mut observe: F) -> Result<RelevanceModel>
    where
        F: FnMut(&GibbsSampler),
    {
        let vocab = split.vocab();
        let mut sampler = GibbsSampler::new(split.train(), vocab, config)?;
        let k = config.num_topics;
        let mut theta = vec![0.0; vocab.users.len() * k];
        let mut phi = vec![0.0; k * vocab.items.len()];
        let mut psi = vec![0.0; k * vocab.tags.len()];
        let mut samples = 0usize;
        for it in 1..=config.iterations {
            sampler.sweep();
            observe(&sampler);
            if it > config.burn_in && (it - config.burn_in).is_multiple_of(SAMPLE_LAG) {
                sampler.accumulate(&mut theta, &mut phi, &mut psi);
                samples += 1;
            }
        }
        if samples == 0 {
            sampler.accumulate(&mut theta, &mut phi, &mut psi);
        }
        // Averaging normalized rows keeps them normalized up to rounding.
        normalize_rows(&mut theta, k);
        normalize_rows(&mut phi, vocab.items.len());
        normalize_rows(&mut psi, vocab.tags.len());
        Ok(RelevanceModel {
            config: config.clone(),
            vocab: vocab.clone(),
            user_topic: theta,
            topic_item: phi,
            topic_tag: psi,
        })
    }

    pub fn config(&self) -> &TopicModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocabularies {
        &self.vocab
    }

    pub fn num_topics(&self) -> usize {
        self.config.num_topics
    }

    pub fn num_items(&self) -> usize {
        self.vocab.items.len()
    }

    /// True when the model was trained on a split with the same vocabularies.
    pub fn is_compatible(&self, split: &SplitTrace) -> bool {
        &self.vocab == split.vocab()
    }

    fn check_user(&self, s: UserId) -> Result<()> {
        if s.index() < self.vocab.users.len() {
            Ok(())
        } else {
            Err(Error::Unknown {
                kind: "user",
                name: s.to_string(),
            })
        }
    }

    fn check_tag(&self, t: TagId) -> Result<()> {
        if t.index() < self.vocab.tags.len() {
            Ok(())
        } else {
            Err(Error::Unknown {
                kind: "tag",
                name: t.to_string(),
            })
        }
    }

    /// θ̂_s
    pub fn user_topics(&self, s: UserId) -> Result<&[f64]> {
        self.check_user(s)?;
        let k = self.num_topics();
        Ok(&self.user_topic[s.index() * k..(s.index() + 1) * k])
    }

    /// φ̂_z
    pub fn topic_items(&self, z: usize) -> &[f64] {
        let n = self.num_items();
        &self.topic_item[z * n..(z + 1) * n]
    }

    /// ψ̂_z
    pub fn topic_tags(&self, z: usize) -> &[f64] {
        let n = self.vocab.tags.len();
        &self.topic_tag[z * n..(z + 1) * n]
    }

    /// p(z|t,s), normalized.
    pub fn topic_posterior(&self, t: TagId, s: UserId) -> Result<Vec<f64>> {
        self.check_tag(t)?;
        let theta = self.user_topics(s)?;
        let mut post: Vec<f64> = (0..self.num_topics())
            .map(|z| {
                let psi = self.topic_tags(z)[t.index()];
                match self.config.tag_posterior {
                    TagPosterior::UserWeighted => psi * theta[z],
                    TagPosterior::TagOnly => psi,
                }
            })
            .collect();
        normalize(&mut post);
        Ok(post)
    }

    fn mix(&self, weights: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_items()];
        for (z, &w) in weights.iter().enumerate() {
            for (o, &p) in out.iter_mut().zip(self.topic_items(z)) {
                *o += w * p;
            }
        }
        out
    }

    fn mix_on(&self, weights: &[f64], items: &[ItemId]) -> Vec<f64> {
        let mut out: Vec<f64> = items
            .iter()
            .map(|i| {
                weights
                    .iter()
                    .enumerate()
                    .map(|(z, &w)| w * self.topic_item[z * self.num_items() + i.index()])
                    .sum()
            })
            .collect();
        normalize(&mut out);
        out
    }

    /// p(i|s) = Σ_z φ̂_{z,i} θ̂_{s,z} over all items.
    pub fn prob_item_given_user(&self, s: UserId) -> Result<Vec<f64>> {
        Ok(self.mix(self.user_topics(s)?))
    }

    /// p(i|t,s) = Σ_z φ̂_{z,i} p(z|t,s) over all items.
    pub fn prob_item_given_tag_user(&self, t: TagId, s: UserId) -> Result<Vec<f64>> {
        Ok(self.mix(&self.topic_posterior(t, s)?))
    }

    /// p(·|t,s) restricted to `items` and renormalized there.
    pub fn prob_item_given_tag_user_on(&self, t: TagId, s: UserId, items: &[ItemId]) -> Result<Vec<f64>> {
        Ok(self.mix_on(&self.topic_posterior(t, s)?, items))
    }

    /// Serializes the model (see [`write_snapshot`](Self::write_snapshot)).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_snapshot(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    /// Binary snapshot, little-endian:
    ///
    /// ```text
    /// magic    8 bytes  "TAGVMDL\0"
    /// version  u32      1
    /// hlen     u64      length of the JSON header
    /// header   hlen     {"config": .., "users": [..], "items": [..], "tags": [..]}
    /// theta    f64 × |U|·K
    /// phi      f64 × K·|I|
    /// psi      f64 × K·|T|
    /// ```
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> Result<()> {
        let header = SnapshotHeader {
            config: self.config.clone(),
            users: self.vocab.users.names().to_vec(),
            items: self.vocab.items.names().to_vec(),
            tags: self.vocab.tags.names().to_vec(),
        };
        let header = serde_json::to_vec(&header).expect("header serializes");
        w.write_all(SNAPSHOT_MAGIC)?;
        w.write_all(&SNAPSHOT_VERSION.to_le_bytes())?;
        w.write_all(&(header.len() as u64).to_le_bytes())?;
        w.write_all(&header)?;
        for table in [&self.user_topic, &self.topic_item, &self.topic_tag] {
            let mut bytes = Vec::with_capacity(table.len() * 8);
            for x in table.iter() {
                bytes.extend_from_slice(&x.to_le_bytes());
            }
            w.write_all(&bytes)?;
        }
        Ok(())
    }

    pub fn read_snapshot<R: Read>(mut r: R) -> Result<RelevanceModel> {
        let bad = |m: &str| Error::Snapshot(m.to_owned());
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(|_| bad("truncated magic"))?;
        if &magic != SNAPSHOT_MAGIC {
            return Err(bad("not a model snapshot"));
        }
        let mut word = [0u8; 4];
        r.read_exact(&mut word).map_err(|_| bad("truncated version"))?;
        let version = u32::from_le_bytes(word);
        if version != SNAPSHOT_VERSION {
            return Err(Error::Snapshot(format!("unsupported snapshot version {version}")));
        }
        let mut len = [0u8; 8];
        r.read_exact(&mut len).map_err(|_| bad("truncated header length"))?;
        let len = u64::from_le_bytes(len) as usize;
        let mut header = vec![0u8; len];
        r.read_exact(&mut header).map_err(|_| bad("truncated header"))?;
        let header: SnapshotHeader =
            serde_json::from_slice(&header).map_err(|e| Error::Snapshot(format!("header: {e}")))?;
        header.config.validate()?;
        let vocab = Vocabularies {
            users: Vocabulary::from_names(header.users),
            items: Vocabulary::from_names(header.items),
            tags: Vocabulary::from_names(header.tags),
        };
        let k = header.config.num_topics;
        let mut read_table = |n: usize| -> Result<Vec<f64>> {
            let mut bytes = vec![0u8; n * 8];
            r.read_exact(&mut bytes).map_err(|_| bad("truncated parameter table"))?;
            Ok(bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect())
        };
        let user_topic = read_table(vocab.users.len() * k)?;
        let topic_item = read_table(k * vocab.items.len())?;
        let topic_tag = read_table(k * vocab.tags.len())?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(bad("trailing bytes after parameter tables"));
        }
        Ok(RelevanceModel {
            config: header.config,
            vocab,
            user_topic,
            topic_item,
            topic_tag,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RelevanceModel> {
        let path = path.as_ref();
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        RelevanceModel::read_snapshot(bytes.as_slice())
    }

    /// FNV-1a of the snapshot bytes, as 16 hex digits.
    pub fn snapshot_id(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in self.to_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        format!("{h:016x}")
    }
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"TAGVMDL\0";
const SNAPSHOT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct SnapshotHeader {
    config: TopicModelConfig,
    users: Vec<String>,
    items: Vec<String>,
    tags: Vec<String>,
}

/// Γ_s: a user's top unannotated items by p(i|s).
#[derive(Debug, Clone, PartialEq)]
pub struct RelevantSet {
    pub user: UserId,
    /// Best first.
    pub items: Vec<ItemId>,
    /// Aligned with `items`, renormalized to sum to 1.
    pub probabilities: Vec<f64>,
}

impl RelevantSet {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Item ids ranked by score descending, ties by id ascending, skipping
/// `exclude` (sorted). At most `limit` ids are returned.
pub fn rank_items(scores: &[f64], exclude: &[ItemId], limit: usize) -> Vec<ItemId> {
    let mut candidates: Vec<ItemId> = Vec::with_capacity(scores.len().saturating_sub(exclude.len()));
    let mut ex = exclude.iter().peekable();
    for i in 0..scores.len() as u32 {
        let id = ItemId(i);
        while ex.next_if(|&&e| e < id).is_some() {}
        if ex.peek() == Some(&&id) {
            continue;
        }
        candidates.push(id);
    }
    let cmp = |a: &ItemId, b: &ItemId| scores[b.index()].total_cmp(&scores[a.index()]).then(a.cmp(b));
    if limit < candidates.len() {
        candidates.select_nth_unstable_by(limit, cmp);
        candidates.truncate(limit);
    }
    candidates.sort_unstable_by(cmp);
    candidates
}

/// Top `top_n` items of I − I_s(train) by p(i|s), renormalized.
pub fn relevant_set(model: &RelevanceModel, split: &SplitTrace, s: UserId, top_n: usize) -> Result<RelevantSet> {
    let prior = model.prob_item_given_user(s)?;
    relevant_set_from_prior(&prior, split.train().user_items(s), s, top_n)
}

pub(crate) fn relevant_set_from_prior(
    prior: &[f64],
    library: &[ItemId],
    s: UserId,
    top_n: usize,
) -> Result<RelevantSet> {
    if top_n == 0 {
        return Err(Error::config("top_n must be positive"));
    }
    let items = rank_items(prior, library, top_n);
    if items.is_empty() {
        return Err(Error::EmptySet(format!("{s} has annotated every item")));
    }
    let mut probabilities: Vec<f64> = items.iter().map(|i| prior[i.index()]).collect();
    normalize(&mut probabilities);
    Ok(RelevantSet {
        user: s,
        items,
        probabilities,
    })
}

/// Success@10 on the param segment, averaged per user.
///
/// `Prior`: a user scores 1 when any of their param items is among the top 10
/// unannotated items by p(i|s). `Conditional`: each (user, tag) pair of the
/// param segment scores 1 when any param item the user tagged with it is in
/// the top 10 by p(i|t,s); pair scores are averaged per user. Users without
/// param annotations are not counted.
pub fn success_at_10(model: &RelevanceModel, split: &SplitTrace, which: Distribution, exec: Exec) -> f64 {
    success_at_k(model, split, which, 10, exec)
}

pub fn success_at_k(model: &RelevanceModel, split: &SplitTrace, which: Distribution, k: usize, exec: Exec) -> f64 {
    let users: Vec<UserId> = split.param().active_users().collect();
    if users.is_empty() {
        return 0.0;
    }
    let scores = exec.map(&users, |&s| user_success(model, split, s, which, k));
    scores.iter().sum::<f64>() / users.len() as f64
}

fn user_success(model: &RelevanceModel, split: &SplitTrace, s: UserId, which: Distribution, k: usize) -> f64 {
    let library = split.train().user_items(s);
    let hit = |scores: &[f64], relevant: &[ItemId]| -> bool {
        rank_items(scores, library, k)
            .iter()
            .any(|i| relevant.binary_search(i).is_ok())
    };
    match which {
        Distribution::Prior => {
            let prior = model.prob_item_given_user(s).expect("user from split");
            f64::from(u8::from(hit(&prior, split.param().user_items(s))))
        }
        Distribution::Conditional => {
            let mut pairs: Vec<(TagId, ItemId)> = split
                .param()
                .annotations()
                .iter()
                .filter(|a| a.user == s)
                .map(|a| (a.tag, a.item))
                .collect();
            pairs.sort_unstable();
            pairs.dedup();
            let mut total = 0.0;
            let mut n = 0usize;
            for group in pairs.chunk_by(|a, b| a.0 == b.0) {
                let tag = group[0].0;
                let items: Vec<ItemId> = group.iter().map(|p| p.1).collect();
                let cond = model.prob_item_given_tag_user(tag, s).expect("tag from split");
                total += f64::from(u8::from(hit(&cond, &items)));
                n += 1;
            }
            total / n as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningRow {
    pub config: TopicModelConfig,
    pub success_prior: f64,
    pub success_conditional: f64,
}

pub struct TuningOutcome {
    /// Best model for p(i|s).
    pub prior: RelevanceModel,
    /// Best model for p(i|t,s).
    pub conditional: RelevanceModel,
    pub prior_index: usize,
    pub conditional_index: usize,
    pub table: Vec<TuningRow>,
}

/// Trains every grid configuration on train and keeps, independently for each
/// distribution, the one with the highest Success@10 on param. Ties go to the
/// earlier grid entry.
pub fn tune(split: &SplitTrace, grid: &[TopicModelConfig], exec: Exec) -> Result<TuningOutcome> {
    if grid.is_empty() {
        return Err(Error::config("tuning grid is empty"));
    }
    // Configs train concurrently; scoring inside each runs sequentially.
    let fitted = exec.map(grid, |cfg| -> Result<(RelevanceModel, TuningRow)> {
        let model = RelevanceModel::train(split, cfg)?;
        let row = TuningRow {
            config: cfg.clone(),
            success_prior: success_at_10(&model, split, Distribution::Prior, Exec::Sequential),
            success_conditional: success_at_10(&model, split, Distribution::Conditional, Exec::Sequential),
        };
        Ok((model, row))
    });
    let fitted = fitted.into_iter().collect::<Result<Vec<_>>>()?;
    let argmax = |score: fn(&TuningRow) -> f64| -> usize {
        let mut best = 0;
        for (i, (_, row)) in fitted.iter().enumerate() {
            if score(row) > score(&fitted[best].1) {
                best = i;
            }
        }
        best
    };
    let prior_index = argmax(|r| r.success_prior);
    let conditional_index = argmax(|r| r.success_conditional);
    let table = fitted.iter().map(|(_, row)| row.clone()).collect();
    let prior = fitted[prior_index].0.clone();
    let conditional = fitted[conditional_index].0.clone();
    Ok(TuningOutcome {
        prior,
        conditional,
        prior_index,
        conditional_index,
        table,
    })
}

/// CSV: num_topics,alpha,beta,gamma,iterations,burn_in,seed,success_prior,success_conditional
pub fn write_tuning_csv<W: Write>(mut w: W, table: &[TuningRow]) -> Result<()> {
    writeln!(
        w,
        "num_topics,alpha,beta,gamma,iterations,burn_in,seed,success_prior,success_conditional"
    )?;
    for r in table {
        let c = &r.config;
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            c.num_topics,
            c.alpha,
            c.beta,
            c.gamma,
            c.iterations,
            c.burn_in,
            c.seed,
            r.success_prior,
            r.success_conditional
        )?;
    }
    Ok(())
}
