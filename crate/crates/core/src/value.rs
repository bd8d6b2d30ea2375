//! Tag value: search-space reduction × delivered relevance.
//!
//! For a seeker s and tag t:
//!
//! * reduction `kl` = D_KL(p(·|t,s) ‖ p(·|s)) over Γ_s, in bits;
//! * relevance `rho` = 1 − τ(I^t, Γ_s^[k]) with k = |I^t|, where I^t are the
//!   tag's unannotated items ranked by relevance and τ is the generalized
//!   Kendall distance;
//! * value = rho × kl.

use std::collections::HashMap;
use std::hash::Hash;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::corpus::{ItemId, SplitTrace, TagId, TraceIndex, UserId};
use crate::error::{Error, Result};
use crate::relevance::{relevant_set_from_prior, RelevanceModel, RelevantSet};

const SUM_TOLERANCE: f64 = 1e-6;

fn check_sum(p: &[f64], what: &str) -> Result<()> {
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::Distribution(format!("{what} sums to {sum}")));
    }
    Ok(())
}

/// D_KL(p ‖ q) in bits, with 0·log(0/q) = 0.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Distribution(format!(
            "supports differ: {} vs {} entries",
            p.len(),
            q.len()
        )));
    }
    check_sum(p, "p")?;
    check_sum(q, "q")?;
    let mut d = 0.0;
    for (i, (&pi, &qi)) in p.iter().zip(q).enumerate() {
        if pi < 0.0 || qi < 0.0 {
            return Err(Error::Distribution(format!("negative mass at {i}")));
        }
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(Error::Distribution(format!("q vanishes where p > 0 (entry {i})")));
        }
        d += pi * (pi / qi).log2();
    }
    // rounding can leave tiny negative totals for p ≈ q
    Ok(d.max(0.0))
}

/// Shannon entropy in bits, with 0·log 0 = 0.
pub fn entropy(p: &[f64]) -> Result<f64> {
    if let Some(i) = p.iter().position(|&x| x < 0.0) {
        return Err(Error::Distribution(format!("negative mass at {i}")));
    }
    check_sum(p, "p")?;
    Ok(-p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.log2()).sum::<f64>())
}

/// An ordered list of distinct entries, best first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ranking<T = ItemId> {
    entries: Vec<T>,
}

impl<T: Copy + Eq + Hash> Ranking<T> {
    pub fn new(entries: Vec<T>) -> Result<Self> {
        let mut seen = HashMap::with_capacity(entries.len());
        for (pos, e) in entries.iter().enumerate() {
            if seen.insert(*e, pos).is_some() {
                return Err(Error::DuplicateEntry(pos));
            }
        }
        Ok(Ranking { entries })
    }

    pub(crate) fn new_unchecked(entries: Vec<T>) -> Self {
        Ranking { entries }
    }

    pub fn entries(&self) -> &[T] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn pairs(n: u64) -> u64 {
    n * n.saturating_sub(1) / 2
}

/// Inversions of `seq` (distinct values) by merge sort.
fn inversions(seq: &mut [usize], buf: &mut Vec<usize>) -> u64 {
    let n = seq.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = inversions(&mut seq[..mid], buf) + inversions(&mut seq[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if seq[i] <= seq[j] {
            buf.push(seq[i]);
            i += 1;
        } else {
            buf.push(seq[j]);
            count += (mid - i) as u64;
            j += 1;
        }
    }
    buf.extend_from_slice(&seq[i..mid]);
    buf.extend_from_slice(&seq[j..n]);
    seq.copy_from_slice(buf);
    count
}

/// Generalized Kendall distance between two top-k style rankings, in [0, 1].
///
/// Every unordered pair of the union is scored 0 or 1:
/// * both items in both rankings: 1 if their relative order differs;
/// * an item missing from a ranking counts as ranked below all of that
///   ranking's items; the pair scores 1 if the two induced orders differ;
/// * a ranking containing neither item gives no order, and the pair scores 1.
///
/// The total is divided by the number of pairs in the union. Two empty
/// rankings are at distance 0. A single item present in only one ranking has
/// no pairs and is at distance 1.
pub fn kendall_distance<T: Copy + Eq + Hash>(a: &Ranking<T>, b: &Ranking<T>) -> f64 {
    let pos_b: HashMap<T, usize> = b.entries.iter().enumerate().map(|(i, &e)| (e, i)).collect();

    // Shared items in a's order, replaced by their b-position.
    let mut shared_in_b = Vec::new();
    // For a-only items: shared items ranked below them in a.
    let mut a_only = 0u64;
    let mut penalties = 0u64;
    let in_a: HashMap<T, ()> = a.entries.iter().map(|&e| (e, ())).collect();
    let mut shared_after = a.entries.iter().filter(|e| pos_b.contains_key(e)).count() as u64;
    for e in &a.entries {
        match pos_b.get(e) {
            Some(&pb) => {
                shared_in_b.push(pb);
                shared_after -= 1;
            }
            None => {
                a_only += 1;
                penalties += shared_after;
            }
        }
    }
    let shared = shared_in_b.len() as u64;
    let mut shared_after = shared;
    let mut b_only = 0u64;
    for e in &b.entries {
        if in_a.contains_key(e) {
            shared_after -= 1;
        } else {
            b_only += 1;
            penalties += shared_after;
        }
    }
    let n = shared + a_only + b_only;
    if n < 2 {
        return if n == shared { 0.0 } else { 1.0 };
    }
    penalties += inversions(&mut shared_in_b, &mut Vec::new());
    penalties += pairs(a_only) + pairs(b_only) + a_only * b_only;
    penalties as f64 / pairs(n) as f64
}

/// Distance between a tag's retrieved ranking and the seeker's top-|I^t|
/// relevant items. An empty retrieved set is at distance 1.
pub fn retrieval_distance(retrieved: &Ranking, relevant: &RelevantSet) -> f64 {
    if retrieved.is_empty() {
        return 1.0;
    }
    let k = retrieved.len().min(relevant.items.len());
    let top = Ranking::new_unchecked(relevant.items[..k].to_vec());
    kendall_distance(retrieved, &top)
}

/// ρ(t, s) = 1 − τ(I^t, Γ_s^[k]), k = |I^t|; 0 when I^t is empty.
pub fn delivered_relevance(retrieved: &Ranking, relevant: &RelevantSet) -> f64 {
    1.0 - retrieval_distance(retrieved, relevant)
}

/// Relevance used to order I^t.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RetrievedOrder {
    /// p(i|s)
    #[default]
    Prior,
    /// p(i|t,s)
    Conditional,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValueOptions {
    #[serde(default)]
    pub retrieved_order: RetrievedOrder,
}

/// Per-seeker quantities shared by every tag evaluated for that seeker.
#[derive(Debug, Clone)]
pub struct Seeker<'a> {
    pub user: UserId,
    /// I_s on the train segment.
    pub library: &'a [ItemId],
    /// p(i|s) over all items.
    pub prior: Vec<f64>,
    /// Γ_s
    pub relevant: RelevantSet,
}

impl<'a> Seeker<'a> {
    pub fn new(prior_model: &RelevanceModel, split: &'a SplitTrace, user: UserId, top_n: usize) -> Result<Self> {
        let prior = prior_model.prob_item_given_user(user)?;
        let library = split.train().user_items(user);
        let relevant = relevant_set_from_prior(&prior, library, user, top_n)?;
        Ok(Seeker {
            user,
            library,
            prior,
            relevant,
        })
    }
}

/// I^t − I_s, both sorted.
fn unannotated(postings: &[ItemId], library: &[ItemId]) -> Vec<ItemId> {
    postings
        .iter()
        .copied()
        .filter(|i| library.binary_search(i).is_err())
        .collect()
}

fn ranked_by(items: &mut [ItemId], score: impl Fn(ItemId) -> f64) {
    items.sort_unstable_by(|&a, &b| score(b).total_cmp(&score(a)).then(a.cmp(&b)));
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TagValueRecord {
    pub user: String,
    pub tag: String,
    pub rho: f64,
    pub kl: f64,
    pub value: f64,
    pub naive_value: f64,
    pub retrieved_count: usize,
}

fn check_tag(train: &TraceIndex, model: &RelevanceModel, t: TagId) -> Result<()> {
    if t.index() >= model.vocab().tags.len() || train.tag_count(t) == 0 {
        return Err(Error::Unknown {
            kind: "tag",
            name: t.to_string(),
        });
    }
    Ok(())
}

/// v(t, s) together with its factors and the naïve baseline.
///
/// `conditional` supplies p(·|t,s); the seeker carries p(·|s) and Γ_s from
/// the prior model. `train` provides the postings I^t.
pub fn tag_value(
    conditional: &RelevanceModel,
    seeker: &Seeker<'_>,
    t: TagId,
    train: &TraceIndex,
    opts: ValueOptions,
) -> Result<TagValueRecord> {
    check_tag(train, conditional, t)?;
    let gamma = &seeker.relevant;
    let p_cond = conditional.prob_item_given_tag_user_on(t, seeker.user, &gamma.items)?;
    let kl = kl_divergence(&p_cond, &gamma.probabilities)?;

    let mut retrieved = unannotated(train.tag_items(t), seeker.library);
    match opts.retrieved_order {
        RetrievedOrder::Prior => ranked_by(&mut retrieved, |i| seeker.prior[i.index()]),
        RetrievedOrder::Conditional => {
            let p = conditional.prob_item_given_tag_user_on(t, seeker.user, &retrieved)?;
            let score: HashMap<ItemId, f64> = retrieved.iter().copied().zip(p).collect();
            ranked_by(&mut retrieved, |i| score[&i]);
        }
    }
    let naive_value = naive_from_retrieved(&seeker.prior, &retrieved);
    let retrieved_count = retrieved.len();
    let rho = delivered_relevance(&Ranking::new_unchecked(retrieved), gamma);
    let vocab = conditional.vocab();
    Ok(TagValueRecord {
        user: vocab.user_name(seeker.user).to_owned(),
        tag: vocab.tag_name(t).to_owned(),
        rho,
        kl,
        value: rho * kl,
        naive_value,
        retrieved_count,
    })
}

fn naive_from_retrieved(prior: &[f64], retrieved: &[ItemId]) -> f64 {
    if retrieved.is_empty() {
        return 0.0;
    }
    let n = retrieved.len() as f64;
    let mean = retrieved.iter().map(|i| prior[i.index()]).sum::<f64>() / n;
    mean / n
}

/// Mean p(i|s) over I^t − I_s divided by |I^t − I_s|; 0 when nothing is
/// retrieved.
pub fn naive_tag_value(seeker: &Seeker<'_>, t: TagId, train: &TraceIndex) -> Result<f64> {
    if train.tag_count(t) == 0 {
        return Err(Error::Unknown {
            kind: "tag",
            name: t.to_string(),
        });
    }
    let retrieved = unannotated(train.tag_items(t), seeker.library);
    Ok(naive_from_retrieved(&seeker.prior, &retrieved))
}

/// CSV: user,tag,rho,kl_bits,value,naive_value,retrieved_count
pub fn write_records_csv<W: Write>(mut w: W, records: &[TagValueRecord]) -> Result<()> {
    writeln!(w, "user,tag,rho,kl_bits,value,naive_value,retrieved_count")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            csv_field(&r.user),
            csv_field(&r.tag),
            r.rho,
            r.kl,
            r.value,
            r.naive_value,
            r.retrieved_count
        )?;
    }
    Ok(())
}

pub(crate) fn csv_field(s: &str) -> std::borrow::Cow<'_, str> {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\"")).into()
    } else {
        s.into()
    }
}
