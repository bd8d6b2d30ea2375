//! Hidden-vs-random validation.
//!
//! For each sampled user the tags they applied in the test segment form the
//! hidden set G_s; a random set R_s is drawn from train tags the user never
//! used. A method that captures what users value should score G above R.
//! The separation is measured with a two-sample Kolmogorov-Smirnov test over
//! the pooled values and with the mean reciprocal rank of the first hidden
//! tag in each user's value-ranked candidate list.

use std::io::{BufRead, Write};

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{SplitTrace, TagId, UserId};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::relevance::RelevanceModel;
use crate::value::{csv_field, tag_value, Seeker, TagValueRecord, ValueOptions};

/// Smallest p-value reported.
pub const P_VALUE_FLOOR: f64 = 2.2e-16;
const KOLMOGOROV_TERMS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// v(t,s) = ρ · D_KL
    Info,
    /// mean relevance of retrieved items / number retrieved
    Naive,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Info => "info",
            Method::Naive => "naive",
        }
    }

    pub fn score(self, record: &TagValueRecord) -> f64 {
        match self {
            Method::Info => record.value,
            Method::Naive => record.naive_value,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "info" => Ok(Method::Info),
            "naive" => Ok(Method::Naive),
            other => Err(Error::config(format!(
                "unknown method `{other}` (expected info or naive)"
            ))),
        }
    }
}

/// How random-set candidates are weighted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RandomSampling {
    #[default]
    Uniform,
    /// Proportional to the tag's train annotation count.
    Popularity,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TagSets {
    pub user: UserId,
    /// G_s, sorted.
    pub hidden: Vec<TagId>,
    /// R_s, sorted.
    pub random: Vec<TagId>,
    /// How many random tags short of the requested size.
    pub shortfall: usize,
}

/// Builds G_s from the user's test tags and draws R_s without replacement
/// from train tags the user did not use in train, param or test.
///
/// The draw uses stream `s` of a ChaCha8 generator seeded with `seed`, so the
/// result does not depend on the order users are processed in.
pub fn build_tag_sets(
    split: &SplitTrace,
    s: UserId,
    random_size: usize,
    seed: u64,
    sampling: RandomSampling,
) -> TagSets {
    let hidden = split.test().user_tags(s).to_vec();
    let n_tags = split.vocab().tags.len();
    let mut used = vec![false; n_tags];
    for seg in [split.train(), split.param(), split.test()] {
        for t in seg.user_tags(s) {
            used[t.index()] = true;
        }
    }
    let candidates: Vec<TagId> = (0..n_tags as u32)
        .map(TagId)
        .filter(|t| !used[t.index()] && split.train().tag_count(*t) > 0)
        .collect();
    let take = random_size.min(candidates.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(s.0 as u64);
    let mut random: Vec<TagId> = match sampling {
        RandomSampling::Uniform => index::sample(&mut rng, candidates.len(), take)
            .into_iter()
            .map(|i| candidates[i])
            .collect(),
        RandomSampling::Popularity => candidates
            .choose_multiple_weighted(&mut rng, take, |t| split.train().tag_count(*t) as f64)
            .expect("train tags have positive counts")
            .copied()
            .collect(),
    };
    random.sort_unstable();
    TagSets {
        user: s,
        hidden,
        random,
        shortfall: random_size - take,
    }
}

/// Two-sample Kolmogorov-Smirnov result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    /// sup_v |F_x(v) − F_y(v)|, computed exactly as a multiple of 1/(n_x·n_y).
    pub d: f64,
    /// Asymptotic two-sided p-value.
    pub p: f64,
    /// sup_v (F_y(v) − F_x(v)): x's CDF lying below y's.
    pub d_x_below: f64,
    /// Asymptotic one-sided p-value for `d_x_below`.
    pub p_x_below: f64,
    pub n_x: usize,
    pub n_y: usize,
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// Two-sample KS test on empirical CDFs.
///
/// p-values use the Kolmogorov limit distribution at λ = D·√(nm/(n+m)),
/// with series truncated at 100 terms and floored at [`P_VALUE_FLOOR`].
pub fn ks_two_sample(x: &[f64], y: &[f64]) -> Result<KsResult> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::EmptySet("KS test needs two non-empty samples".into()));
    }
    let (xs, ys) = (sorted(x), sorted(y));
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    // gaps are kept as integers i·m − j·n so equal statistics compare equal
    let (mut d_num, mut below_num) = (0u64, 0u64);
    while i < n && j < m {
        let v = if xs[i] <= ys[j] { xs[i] } else { ys[j] };
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        let gap = (i * m) as i64 - (j * n) as i64;
        d_num = d_num.max(gap.unsigned_abs());
        if gap < 0 {
            below_num = below_num.max(gap.unsigned_abs());
        }
    }
    let nm = (n * m) as f64;
    let (d, d_below) = (d_num as f64 / nm, below_num as f64 / nm);
    let (n, m) = (n as f64, m as f64);
    let ne = n * m / (n + m);
    Ok(KsResult {
        d,
        p: kolmogorov_tail(d * ne.sqrt()),
        d_x_below: d_below,
        p_x_below: (-2.0 * ne * d_below * d_below).exp().clamp(P_VALUE_FLOOR, 1.0),
        n_x: xs.len(),
        n_y: ys.len(),
    })
}

/// P(K > λ) for the Kolmogorov distribution.
pub fn kolmogorov_tail(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let p = if lambda < 1.18 {
        // Jacobi theta form converges fast for small λ
        let c = std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=KOLMOGOROV_TERMS)
            .map(|j| {
                let odd = (2 * j - 1) as f64;
                (-odd * odd * c).exp()
            })
            .sum();
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s
    } else {
        let s: f64 = (1..=KOLMOGOROV_TERMS)
            .map(|j| {
                let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
                let j = j as f64;
                sign * (-2.0 * j * j * lambda * lambda).exp()
            })
            .sum();
        2.0 * s
    };
    p.clamp(P_VALUE_FLOOR, 1.0)
}

/// One step of an empirical CDF.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfPoint {
    pub label: String,
    pub value: f64,
    pub cdf: f64,
}

/// Distinct sorted values of each sample with their cumulative fraction.
pub fn export_cdf(samples: &[(&str, &[f64])]) -> Vec<CdfPoint> {
    let mut points = Vec::new();
    for &(label, xs) in samples {
        let xs = sorted(xs);
        let n = xs.len() as f64;
        for (k, chunk) in xs.chunk_by(|a, b| a == b).scan(0usize, |acc, c| {
            *acc += c.len();
            Some((*acc, c))
        }) {
            points.push(CdfPoint {
                label: label.to_owned(),
                value: chunk[0],
                cdf: k as f64 / n,
            });
        }
    }
    points
}

pub fn write_cdf_csv<W: Write>(mut w: W, points: &[CdfPoint]) -> Result<()> {
    writeln!(w, "label,value,cdf")?;
    for p in points {
        writeln!(w, "{},{},{}", csv_field(&p.label), p.value, p.cdf)?;
    }
    Ok(())
}

pub fn read_cdf_csv<R: BufRead>(r: R) -> Result<Vec<CdfPoint>> {
    let mut points = Vec::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if lineno == 0 || line.is_empty() {
            continue;
        }
        let bad = || Error::Snapshot(format!("cdf line {}: {line:?}", lineno + 1));
        let mut fields = line.rsplitn(3, ',');
        let cdf = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
        let value = fields.next().and_then(|f| f.parse().ok()).ok_or_else(bad)?;
        let label = fields.next().ok_or_else(bad)?;
        let label = label
            .strip_prefix('"')
            .and_then(|l| l.strip_suffix('"'))
            .map_or_else(|| label.to_owned(), |l| l.replace("\"\"", "\""));
        points.push(CdfPoint { label, value, cdf });
    }
    Ok(points)
}

/// Largest gap between two step CDFs taken from an exported table.
pub fn ks_from_cdf(points: &[CdfPoint], x: &str, y: &str) -> f64 {
    let steps = |label: &str| -> Vec<(f64, f64)> {
        points
            .iter()
            .filter(|p| p.label == label)
            .map(|p| (p.value, p.cdf))
            .collect()
    };
    let (fx, fy) = (steps(x), steps(y));
    let at = |f: &[(f64, f64)], v: f64| -> f64 { f.iter().take_while(|(x, _)| *x <= v).last().map_or(0.0, |s| s.1) };
    fx.iter()
        .chain(&fy)
        .map(|&(v, _)| (at(&fx, v) - at(&fy, v)).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedTag<'a> {
    pub tag: &'a str,
    pub value: f64,
    pub hidden: bool,
}

/// 1 / rank of the best-ranked hidden tag; value descending, ties by tag.
pub fn reciprocal_rank(candidates: &[RankedTag<'_>]) -> Result<f64> {
    let mut order: Vec<&RankedTag> = candidates.iter().collect();
    order.sort_by(|a, b| b.value.total_cmp(&a.value).then_with(|| a.tag.cmp(b.tag)));
    order
        .iter()
        .position(|c| c.hidden)
        .map(|r| 1.0 / (r + 1) as f64)
        .ok_or_else(|| Error::EmptySet("candidate list has no hidden tag".into()))
}

pub fn mean_reciprocal_rank(lists: &[Vec<RankedTag<'_>>]) -> Result<f64> {
    if lists.is_empty() {
        return Err(Error::EmptySet("no users to rank".into()));
    }
    let mut sum = 0.0;
    for l in lists {
        sum += reciprocal_rank(l)?;
    }
    Ok(sum / lists.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSettings {
    pub random_size: usize,
    /// Size of Γ_s.
    pub top_n: usize,
    pub seed: u64,
    #[serde(default)]
    pub sampling: RandomSampling,
    #[serde(default)]
    pub value: ValueOptions,
    #[serde(skip)]
    pub exec: Exec,
}

impl Default for ExperimentSettings {
    fn default() -> Self {
        ExperimentSettings {
            random_size: 50,
            top_n: 1000,
            seed: 0,
            sampling: RandomSampling::Uniform,
            value: ValueOptions::default(),
            exec: Exec::default(),
        }
    }
}

/// Value records of one user's hidden and random tags.
#[derive(Debug, Clone, PartialEq)]
pub struct UserOutcome {
    pub user: UserId,
    pub hidden: Vec<TagValueRecord>,
    pub random: Vec<TagValueRecord>,
    pub shortfall: usize,
    pub excluded_tags: usize,
}

/// Method-independent per-tag values for every evaluable user.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub outcomes: Vec<UserOutcome>,
    pub skipped_no_hidden: usize,
    pub skipped_no_candidates: usize,
    pub prior_model: String,
    pub conditional_model: String,
    pub settings: ExperimentSettings,
}

enum UserResult {
    Done(UserOutcome),
    NoHidden,
    NoCandidates,
}

/// Values of `tags` for `user`. Depends on the train segment only.
pub fn value_tags(
    prior: &RelevanceModel,
    conditional: &RelevanceModel,
    split: &SplitTrace,
    user: UserId,
    tags: &[TagId],
    settings: &ExperimentSettings,
) -> Result<Vec<Result<TagValueRecord>>> {
    let seeker = Seeker::new(prior, split, user, settings.top_n)?;
    Ok(tags
        .iter()
        .map(|&t| tag_value(conditional, &seeker, t, split.train(), settings.value))
        .collect())
}

fn evaluate_user(
    prior: &RelevanceModel,
    conditional: &RelevanceModel,
    split: &SplitTrace,
    user: UserId,
    settings: &ExperimentSettings,
) -> Result<UserResult> {
    let sets = build_tag_sets(split, user, settings.random_size, settings.seed, settings.sampling);
    if sets.hidden.is_empty() {
        return Ok(UserResult::NoHidden);
    }
    let all: Vec<TagId> = sets.hidden.iter().chain(&sets.random).copied().collect();
    let values = match value_tags(prior, conditional, split, user, &all, settings) {
        Ok(v) => v,
        Err(Error::EmptySet(_)) => return Ok(UserResult::NoCandidates),
        Err(e) => return Err(e),
    };
    let mut hidden = Vec::new();
    let mut random = Vec::new();
    let mut excluded = 0;
    for (pos, v) in values.into_iter().enumerate() {
        match v {
            Ok(rec) if pos < sets.hidden.len() => hidden.push(rec),
            Ok(rec) => random.push(rec),
            Err(Error::Unknown { .. }) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    if hidden.is_empty() {
        return Ok(UserResult::NoHidden);
    }
    Ok(UserResult::Done(UserOutcome {
        user,
        hidden,
        random,
        shortfall: sets.shortfall,
        excluded_tags: excluded,
    }))
}

/// Computes tag values for every sampled user with a non-empty hidden set.
///
/// Models are functions of train (and param, through tuning); the test
/// segment is read only to build hidden sets and exclude them from R_s.
pub fn evaluate(
    split: &SplitTrace,
    prior: &RelevanceModel,
    conditional: &RelevanceModel,
    settings: &ExperimentSettings,
) -> Result<Evaluation> {
    if !prior.is_compatible(split) || !conditional.is_compatible(split) {
        return Err(Error::config("models were not trained on this split"));
    }
    let users = split.sample();
    let results = settings
        .exec
        .map(&users, |&u| evaluate_user(prior, conditional, split, u, settings));
    let mut eval = Evaluation {
        outcomes: Vec::new(),
        skipped_no_hidden: 0,
        skipped_no_candidates: 0,
        prior_model: prior.snapshot_id(),
        conditional_model: conditional.snapshot_id(),
        settings: settings.clone(),
    };
    for r in results {
        match r? {
            UserResult::Done(o) => eval.outcomes.push(o),
            UserResult::NoHidden => eval.skipped_no_hidden += 1,
            UserResult::NoCandidates => eval.skipped_no_candidates += 1,
        }
    }
    Ok(eval)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: Method,
    pub ks: KsResult,
    pub mrr: f64,
    pub users_evaluated: usize,
    pub users_skipped_no_hidden: usize,
    pub users_skipped_no_candidates: usize,
    pub tags_excluded: usize,
    pub random_shortfall: usize,
    pub seed: u64,
    pub random_size: usize,
    pub top_n: usize,
    pub sampling: RandomSampling,
    pub value_options: ValueOptions,
    pub prior_model: String,
    pub conditional_model: String,
    /// Values of G, pooled over users in user order.
    #[serde(skip)]
    pub hidden_values: Vec<f64>,
    /// Values of R, pooled over users in user order.
    #[serde(skip)]
    pub random_values: Vec<f64>,
    #[serde(skip)]
    pub cdf: Vec<CdfPoint>,
}

impl ExperimentReport {
    pub fn from_evaluation(eval: &Evaluation, method: Method) -> Result<ExperimentReport> {
        let mut hidden_values = Vec::new();
        let mut random_values = Vec::new();
        let mut lists = Vec::with_capacity(eval.outcomes.len());
        for o in &eval.outcomes {
            hidden_values.extend(o.hidden.iter().map(|r| method.score(r)));
            random_values.extend(o.random.iter().map(|r| method.score(r)));
            let list: Vec<RankedTag> = o
                .hidden
                .iter()
                .map(|r| (r, true))
                .chain(o.random.iter().map(|r| (r, false)))
                .map(|(r, hidden)| RankedTag {
                    tag: &r.tag,
                    value: method.score(r),
                    hidden,
                })
                .collect();
            lists.push(list);
        }
        if hidden_values.is_empty() || random_values.is_empty() {
            return Err(Error::EmptySet(format!(
                "{} hidden and {} random values; nothing to compare",
                hidden_values.len(),
                random_values.len()
            )));
        }
        let ks = ks_two_sample(&hidden_values, &random_values)?;
        let mrr = mean_reciprocal_rank(&lists)?;
        let cdf = export_cdf(&[("hidden", &hidden_values), ("random", &random_values)]);
        Ok(ExperimentReport {
            method,
            ks,
            mrr,
            users_evaluated: eval.outcomes.len(),
            users_skipped_no_hidden: eval.skipped_no_hidden,
            users_skipped_no_candidates: eval.skipped_no_candidates,
            tags_excluded: eval.outcomes.iter().map(|o| o.excluded_tags).sum(),
            random_shortfall: eval.outcomes.iter().map(|o| o.shortfall).sum(),
            seed: eval.settings.seed,
            random_size: eval.settings.random_size,
            top_n: eval.settings.top_n,
            sampling: eval.settings.sampling,
            value_options: eval.settings.value,
            prior_model: eval.prior_model.clone(),
            conditional_model: eval.conditional_model.clone(),
            hidden_values,
            random_values,
            cdf,
        })
    }
}

/// Evaluates once and derives a report per method.
pub fn run_experiments(
    split: &SplitTrace,
    prior: &RelevanceModel,
    conditional: &RelevanceModel,
    methods: &[Method],
    settings: &ExperimentSettings,
) -> Result<(Evaluation, Vec<ExperimentReport>)> {
    let eval = evaluate(split, prior, conditional, settings)?;
    let reports = methods
        .iter()
        .map(|&m| ExperimentReport::from_evaluation(&eval, m))
        .collect::<Result<Vec<_>>>()?;
    Ok((eval, reports))
}

pub fn run_experiment(
    split: &SplitTrace,
    prior: &RelevanceModel,
    conditional: &RelevanceModel,
    method: Method,
    settings: &ExperimentSettings,
) -> Result<ExperimentReport> {
    let (_, mut reports) = run_experiments(split, prior, conditional, &[method], settings)?;
    Ok(reports.pop().expect("one method"))
}
