//! Tagging traces: parsing, indexing, user sampling and the chronological split.
//!
//! Identifiers are interned per kind (user, item, tag). Interned ids are
//! assigned in lexicographic order of the identifier strings, so ordering by
//! id is ordering by name. Every tie-break in the crate relies on that.

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}#{}", stringify!($name), self.0)
            }
        }
    };
}

id_type!(
    /// Interned user identifier.
    UserId
);
id_type!(
    /// Interned item identifier.
    ItemId
);
id_type!(
    /// Interned tag.
    TagId
);

/// One (user, item, tag, timestamp) tuple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Annotation {
    pub user: UserId,
    pub item: ItemId,
    pub tag: TagId,
    /// Seconds since the epoch.
    pub timestamp: i64,
}

/// String interner with lexicographically ordered ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds a vocabulary from names; duplicates are collapsed and the
    /// result is sorted.
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut names: Vec<String> = names.into_iter().map(Into::into).collect();
        names.sort_unstable();
        names.dedup();
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i as u32)).collect();
        Vocabulary { names, index }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// The three interned identifier spaces of a trace.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabularies {
    pub users: Vocabulary,
    pub items: Vocabulary,
    pub tags: Vocabulary,
}

impl Vocabularies {
    pub fn user(&self, name: &str) -> Result<UserId> {
        self.users.get(name).map(UserId).ok_or_else(|| Error::Unknown {
            kind: "user",
            name: name.to_owned(),
        })
    }

    pub fn item(&self, name: &str) -> Result<ItemId> {
        self.items.get(name).map(ItemId).ok_or_else(|| Error::Unknown {
            kind: "item",
            name: name.to_owned(),
        })
    }

    pub fn tag(&self, name: &str) -> Result<TagId> {
        self.tags.get(name).map(TagId).ok_or_else(|| Error::Unknown {
            kind: "tag",
            name: name.to_owned(),
        })
    }

    pub fn user_name(&self, id: UserId) -> &str {
        self.users.name(id.0)
    }

    pub fn item_name(&self, id: ItemId) -> &str {
        self.items.name(id.0)
    }

    pub fn tag_name(&self, id: TagId) -> &str {
        self.tags.name(id.0)
    }
}

/// Annotations plus the derived per-user, per-tag and per-item indexes.
///
/// All index lists are sorted and duplicate-free.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceIndex {
    annotations: Vec<Annotation>,
    user_items: Vec<Vec<ItemId>>,
    user_tags: Vec<Vec<TagId>>,
    tag_items: Vec<Vec<ItemId>>,
    item_tags: Vec<Vec<TagId>>,
    tag_counts: Vec<usize>,
}

impl TraceIndex {
    pub fn build(annotations: Vec<Annotation>, n_users: usize, n_items: usize, n_tags: usize) -> Self {
        let mut user_items = vec![Vec::new(); n_users];
        let mut user_tags = vec![Vec::new(); n_users];
        let mut tag_items = vec![Vec::new(); n_tags];
        let mut item_tags = vec![Vec::new(); n_items];
        let mut tag_counts = vec![0; n_tags];
        for a in &annotations {
            user_items[a.user.index()].push(a.item);
            user_tags[a.user.index()].push(a.tag);
            tag_items[a.tag.index()].push(a.item);
            item_tags[a.item.index()].push(a.tag);
            tag_counts[a.tag.index()] += 1;
        }
        fn normalize<T: Ord>(lists: &mut [Vec<T>]) {
            for l in lists {
                l.sort_unstable();
                l.dedup();
            }
        }
        normalize(&mut user_items);
        normalize(&mut user_tags);
        normalize(&mut tag_items);
        normalize(&mut item_tags);
        TraceIndex {
            annotations,
            user_items,
            user_tags,
            tag_items,
            item_tags,
            tag_counts,
        }
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn len(&self) -> usize {
        self.annotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.annotations.is_empty()
    }

    /// Library I_s: items the user annotated.
    pub fn user_items(&self, user: UserId) -> &[ItemId] {
        self.user_items.get(user.index()).map_or(&[], Vec::as_slice)
    }

    /// Vocabulary T_s: tags the user applied.
    pub fn user_tags(&self, user: UserId) -> &[TagId] {
        self.user_tags.get(user.index()).map_or(&[], Vec::as_slice)
    }

    /// Postings I^t: items annotated with the tag.
    pub fn tag_items(&self, tag: TagId) -> &[ItemId] {
        self.tag_items.get(tag.index()).map_or(&[], Vec::as_slice)
    }

    /// T^i: tags applied to the item.
    pub fn item_tags(&self, item: ItemId) -> &[TagId] {
        self.item_tags.get(item.index()).map_or(&[], Vec::as_slice)
    }

    /// Number of annotations carrying the tag.
    pub fn tag_count(&self, tag: TagId) -> usize {
        self.tag_counts.get(tag.index()).copied().unwrap_or(0)
    }

    /// Distinct users with at least one annotation.
    pub fn active_users(&self) -> impl Iterator<Item = UserId> + '_ {
        self.user_items
            .iter()
            .enumerate()
            .filter(|(_, items)| !items.is_empty())
            .map(|(u, _)| UserId(u as u32))
    }
}

/// Column layout of a delimited trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceFormat {
    pub delimiter: char,
    pub user_column: usize,
    pub item_column: usize,
    pub tag_column: usize,
    pub timestamp_column: usize,
    pub header: HeaderMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeaderMode {
    /// The first line is a header iff its timestamp field is not an integer.
    Auto,
    Present,
    Absent,
}

impl Default for TraceFormat {
    fn default() -> Self {
        TraceFormat {
            delimiter: '\t',
            user_column: 0,
            item_column: 1,
            tag_column: 2,
            timestamp_column: 3,
            header: HeaderMode::Auto,
        }
    }
}

impl TraceFormat {
    fn min_fields(&self) -> usize {
        1 + self
            .user_column
            .max(self.item_column)
            .max(self.tag_column)
            .max(self.timestamp_column)
    }
}

/// Lowercases and trims a tag.
pub fn normalize_tag(raw: &str) -> String {
    raw.trim().to_lowercase()
}

/// Raw record after field extraction and normalization.
struct Record<'a> {
    user: &'a str,
    item: &'a str,
    tag: String,
    timestamp: i64,
}

fn parse_record<'a>(line: &'a str, fmt: &TraceFormat) -> Option<Record<'a>> {
    let fields: Vec<&str> = line.split(fmt.delimiter).collect();
    if fields.len() < fmt.min_fields() {
        return None;
    }
    let user = fields[fmt.user_column].trim();
    let item = fields[fmt.item_column].trim();
    let tag = normalize_tag(fields[fmt.tag_column]);
    let timestamp: i64 = fields[fmt.timestamp_column].trim().parse().ok()?;
    if user.is_empty() || item.is_empty() || tag.is_empty() || timestamp < 0 {
        return None;
    }
    Some(Record {
        user,
        item,
        tag,
        timestamp,
    })
}

/// Accumulates string records, deduplicating (user, item, tag) triples.
#[derive(Default)]
struct TraceBuilder {
    users: Interner,
    items: Interner,
    tags: Interner,
    // Raw ids in first-appearance order.
    records: Vec<(u32, u32, u32, i64)>,
    seen: HashMap<(u32, u32, u32), usize>,
}

#[derive(Default)]
struct Interner {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Interner {
    fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }

    /// Sorted vocabulary plus a remap from raw ids to sorted ids.
    fn finish(self) -> (Vocabulary, Vec<u32>) {
        let vocab = Vocabulary::from_names(self.names.iter().cloned());
        let remap = self.names.iter().map(|n| vocab.get(n).unwrap()).collect();
        (vocab, remap)
    }
}

impl TraceBuilder {
    fn push(&mut self, user: &str, item: &str, tag: &str, timestamp: i64) {
        let key = (self.users.intern(user), self.items.intern(item), self.tags.intern(tag));
        match self.seen.get(&key) {
            Some(&pos) => {
                let slot = &mut self.records[pos].3;
                *slot = (*slot).min(timestamp);
            }
            None => {
                self.seen.insert(key, self.records.len());
                self.records.push((key.0, key.1, key.2, timestamp));
            }
        }
    }

    fn finish(self) -> (Vocabularies, Vec<Annotation>) {
        let (users, ru) = self.users.finish();
        let (items, ri) = self.items.finish();
        let (tags, rt) = self.tags.finish();
        let annotations = self
            .records
            .into_iter()
            .map(|(u, i, t, ts)| Annotation {
                user: UserId(ru[u as usize]),
                item: ItemId(ri[i as usize]),
                tag: TagId(rt[t as usize]),
                timestamp: ts,
            })
            .collect();
        (Vocabularies { users, items, tags }, annotations)
    }
}

/// An indexed tagging trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    vocab: Vocabularies,
    index: TraceIndex,
    skipped: usize,
}

impl Corpus {
    /// Parses a delimited trace. Malformed records are skipped and counted;
    /// duplicate (user, item, tag) records keep the earliest timestamp.
    pub fn parse<R: BufRead>(reader: R, fmt: &TraceFormat) -> Result<Corpus> {
        let mut builder = TraceBuilder::default();
        let mut skipped = 0;
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.trim().is_empty() {
                continue;
            }
            let record = parse_record(line, fmt);
            if lineno == 0 {
                match fmt.header {
                    HeaderMode::Present => continue,
                    HeaderMode::Auto if is_header(line, fmt) => continue,
                    _ => {}
                }
            }
            match record {
                Some(r) => builder.push(r.user, r.item, &r.tag, r.timestamp),
                None => skipped += 1,
            }
        }
        if builder.records.is_empty() {
            return Err(Error::EmptyTrace { skipped });
        }
        let (vocab, annotations) = builder.finish();
        Ok(Corpus::from_parts(vocab, annotations, skipped))
    }

    /// Opens a trace file; gzip input is detected by its magic bytes.
    pub fn from_path(path: impl AsRef<Path>, fmt: &TraceFormat) -> Result<Corpus> {
        let path = path.as_ref();
        let reader = open_maybe_gzip(path)?;
        Corpus::parse(reader, fmt).map_err(|e| match e {
            Error::Stream(source) => Error::io(path, source),
            other => other,
        })
    }

    /// Builds a corpus from string tuples; mostly for tests and generators.
    pub fn from_records<I, U, It, T>(records: I) -> Result<Corpus>
    where
        I: IntoIterator<Item = (U, It, T, i64)>,
        U: AsRef<str>,
        It: AsRef<str>,
        T: AsRef<str>,
    {
        let mut builder = TraceBuilder::default();
        let mut skipped = 0;
        for (u, i, t, ts) in records {
            let (u, i, t) = (u.as_ref().trim(), i.as_ref().trim(), normalize_tag(t.as_ref()));
            if u.is_empty() || i.is_empty() || t.is_empty() || ts < 0 {
                skipped += 1;
                continue;
            }
            builder.push(u, i, &t, ts);
        }
        if builder.records.is_empty() {
            return Err(Error::EmptyTrace { skipped });
        }
        let (vocab, annotations) = builder.finish();
        Ok(Corpus::from_parts(vocab, annotations, skipped))
    }

    fn from_parts(vocab: Vocabularies, annotations: Vec<Annotation>, skipped: usize) -> Corpus {
        let index = TraceIndex::build(annotations, vocab.users.len(), vocab.items.len(), vocab.tags.len());
        Corpus { vocab, index, skipped }
    }

    pub fn vocab(&self) -> &Vocabularies {
        &self.vocab
    }

    pub fn index(&self) -> &TraceIndex {
        &self.index
    }

    pub fn annotations(&self) -> &[Annotation] {
        self.index.annotations()
    }

    pub fn num_users(&self) -> usize {
        self.vocab.users.len()
    }

    pub fn num_items(&self) -> usize {
        self.vocab.items.len()
    }

    pub fn num_tags(&self) -> usize {
        self.vocab.tags.len()
    }

    /// Malformed records skipped while parsing.
    pub fn skipped(&self) -> usize {
        self.skipped
    }

    /// Writes the trace as TSV with a header line, in annotation order.
    pub fn write_tsv<W: Write>(&self, w: W) -> Result<()> {
        write_annotations(w, &self.vocab, self.annotations())
    }

    /// Users with at least `min_items` distinct annotated items.
    pub fn select_sample(&self, min_items: usize) -> Result<Vec<UserId>> {
        if min_items == 0 {
            return Err(Error::config("min_items must be at least 1"));
        }
        Ok(self
            .index
            .active_users()
            .filter(|&u| self.index.user_items(u).len() >= min_items)
            .collect())
    }

    pub fn manifest(&self) -> CorpusManifest {
        CorpusManifest {
            annotations: self.index.len(),
            users: self.num_users(),
            items: self.num_items(),
            tags: self.num_tags(),
            skipped_records: self.skipped,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub annotations: usize,
    pub users: usize,
    pub items: usize,
    pub tags: usize,
    pub skipped_records: usize,
}

fn is_header(line: &str, fmt: &TraceFormat) -> bool {
    line.split(fmt.delimiter)
        .nth(fmt.timestamp_column)
        .is_none_or(|f| f.trim().parse::<i64>().is_err())
}

fn open_maybe_gzip(path: &Path) -> Result<Box<dyn BufRead>> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic).map_err(|e| Error::io(path, e))?;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

fn write_annotations<W: Write>(mut w: W, vocab: &Vocabularies, annotations: &[Annotation]) -> Result<()> {
    writeln!(w, "user\titem\ttag\ttimestamp")?;
    for a in annotations {
        let (u, i, t) = (vocab.user_name(a.user), vocab.item_name(a.item), vocab.tag_name(a.tag));
        for field in [u, i, t] {
            if field.contains(['\t', '\n', '\r']) {
                return Err(Error::Snapshot(format!(
                    "identifier {field:?} cannot be written as TSV"
                )));
            }
        }
        writeln!(w, "{u}\t{i}\t{t}\t{}", a.timestamp)?;
    }
    Ok(())
}

/// Fractions of each user's items assigned to train / param / test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub param: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.8,
            param: 0.1,
            test: 0.1,
        }
    }
}

impl SplitFractions {
    pub fn new(train: f64, param: f64, test: f64) -> Result<Self> {
        let f = SplitFractions { train, param, test };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.param, self.test];
        if parts.iter().any(|p| !p.is_finite() || *p <= 0.0) {
            return Err(Error::config(format!(
                "split fractions must be positive, got {parts:?}"
            )));
        }
        let sum: f64 = parts.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::config(format!("split fractions must sum to 1, got {sum}")));
        }
        Ok(())
    }

    /// Item counts (train, param, test) for a user with `n` items.
    pub fn item_counts(&self, n: usize) -> (usize, usize, usize) {
        let nf = n as f64;
        let train = ((nf * self.train).round() as usize).clamp(n.min(1), n);
        let upto_param = ((nf * (self.train + self.param)).round() as usize).clamp(train, n);
        (train, upto_param - train, n - upto_param)
    }
}

/// Annotations removed from param/test because their tag or item never
/// occurs in train.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropCounts {
    pub param: usize,
    pub test: usize,
}

/// Chronological train / param / test split over a user sample.
///
/// The split carries its own vocabularies: users are the sample, items and
/// tags are those occurring in the train segment. Because every param and
/// test annotation references a train item and tag, all three segments share
/// these vocabularies.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitTrace {
    vocab: Vocabularies,
    train: TraceIndex,
    param: TraceIndex,
    test: TraceIndex,
    dropped: DropCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    Train,
    Param,
    Test,
}

impl SplitTrace {
    /// Splits each sampled user's items chronologically.
    ///
    /// A user's annotations are stable-sorted by timestamp (ties keep input
    /// order) and items are ranked by their first annotation. The first
    /// `train` fraction of items goes to train, the next `param` fraction to
    /// param, the rest to test; all annotations of an item stay together.
    /// Param and test annotations whose tag or item is absent from train are
    /// then dropped.
    pub fn split_chronological(corpus: &Corpus, sample: &[UserId], fractions: SplitFractions) -> Result<SplitTrace> {
        fractions.validate()?;
        if sample.is_empty() {
            return Err(Error::config("user sample is empty"));
        }
        let n_users = corpus.num_users();
        let mut in_sample = vec![false; n_users];
        for &u in sample {
            if u.index() >= n_users {
                return Err(Error::Unknown {
                    kind: "user",
                    name: u.to_string(),
                });
            }
            in_sample[u.index()] = true;
        }

        let mut per_user: Vec<Vec<Annotation>> = vec![Vec::new(); n_users];
        for a in corpus.annotations() {
            if in_sample[a.user.index()] {
                per_user[a.user.index()].push(*a);
            }
        }

        let mut segments: [Vec<Annotation>; 3] = Default::default();
        let mut item_segment = vec![usize::MAX; corpus.num_items()];
        for anns in per_user.iter_mut().filter(|a| !a.is_empty()) {
            anns.sort_by_key(|a| a.timestamp);
            let mut order = Vec::new();
            for a in anns.iter() {
                if item_segment[a.item.index()] == usize::MAX {
                    item_segment[a.item.index()] = 0;
                    order.push(a.item);
                }
            }
            let (n_train, n_param, _) = fractions.item_counts(order.len());
            for (rank, item) in order.iter().enumerate() {
                item_segment[item.index()] = if rank < n_train {
                    0
                } else if rank < n_train + n_param {
                    1
                } else {
                    2
                };
            }
            for a in anns.iter() {
                segments[item_segment[a.item.index()]].push(*a);
            }
            for item in order {
                item_segment[item.index()] = usize::MAX;
            }
        }

        let [train, param, test] = segments;
        Self::assemble(&corpus.vocab, train, param, test, DropCounts::default())
    }

    /// Re-interns segments against the train vocabulary, dropping param/test
    /// annotations that reference unseen tags or items.
    fn assemble(
        source: &Vocabularies,
        train: Vec<Annotation>,
        param: Vec<Annotation>,
        test: Vec<Annotation>,
        mut dropped: DropCounts,
    ) -> Result<SplitTrace> {
        if train.is_empty() {
            return Err(Error::EmptySet("train segment is empty".into()));
        }
        let mut user_map = vec![None; source.users.len()];
        let mut item_map = vec![None; source.items.len()];
        let mut tag_map = vec![None; source.tags.len()];
        for a in train.iter().chain(&param).chain(&test) {
            user_map[a.user.index()] = Some(0);
        }
        for a in &train {
            item_map[a.item.index()] = Some(0);
            tag_map[a.tag.index()] = Some(0);
        }
        // Source ids are lexicographic, so renumbering in id order keeps the
        // new ids lexicographic too.
        fn renumber(map: &mut [Option<u32>], vocab: &Vocabulary) -> Vocabulary {
            let mut next = 0;
            let mut names = Vec::new();
            for (old, slot) in map.iter_mut().enumerate() {
                if slot.is_some() {
                    *slot = Some(next);
                    next += 1;
                    names.push(vocab.name(old as u32).to_owned());
                }
            }
            Vocabulary::from_names(names)
        }
        let vocab = Vocabularies {
            users: renumber(&mut user_map, &source.users),
            items: renumber(&mut item_map, &source.items),
            tags: renumber(&mut tag_map, &source.tags),
        };
        let remap = |a: &Annotation| -> Option<Annotation> {
            Some(Annotation {
                user: UserId(user_map[a.user.index()]?),
                item: ItemId(item_map[a.item.index()]?),
                tag: TagId(tag_map[a.tag.index()]?),
                timestamp: a.timestamp,
            })
        };
        let train: Vec<_> = train.iter().map(|a| remap(a).unwrap()).collect();
        let keep = |segment: Vec<Annotation>, drops: &mut usize| -> Vec<Annotation> {
            let before = segment.len();
            let kept: Vec<_> = segment.iter().filter_map(remap).collect();
            *drops += before - kept.len();
            kept
        };
        let param = keep(param, &mut dropped.param);
        let test = keep(test, &mut dropped.test);

        let (nu, ni, nt) = (vocab.users.len(), vocab.items.len(), vocab.tags.len());
        Ok(SplitTrace {
            train: TraceIndex::build(train, nu, ni, nt),
            param: TraceIndex::build(param, nu, ni, nt),
            test: TraceIndex::build(test, nu, ni, nt),
            vocab,
            dropped,
        })
    }

    pub fn vocab(&self) -> &Vocabularies {
        &self.vocab
    }

    pub fn train(&self) -> &TraceIndex {
        &self.train
    }

    pub fn param(&self) -> &TraceIndex {
        &self.param
    }

    pub fn test(&self) -> &TraceIndex {
        &self.test
    }

    pub fn segment(&self, which: Segment) -> &TraceIndex {
        match which {
            Segment::Train => &self.train,
            Segment::Param => &self.param,
            Segment::Test => &self.test,
        }
    }

    /// The sampled users, in id order.
    pub fn sample(&self) -> Vec<UserId> {
        (0..self.vocab.users.len() as u32).map(UserId).collect()
    }

    pub fn dropped(&self) -> DropCounts {
        self.dropped
    }

    /// Same split with the test segment emptied.
    pub fn without_test(&self) -> SplitTrace {
        let (nu, ni, nt) = (self.vocab.users.len(), self.vocab.items.len(), self.vocab.tags.len());
        SplitTrace {
            test: TraceIndex::build(Vec::new(), nu, ni, nt),
            ..self.clone()
        }
    }

    pub fn manifest(&self) -> SplitManifest {
        SplitManifest {
            users: self.vocab.users.len(),
            items: self.vocab.items.len(),
            tags: self.vocab.tags.len(),
            train_annotations: self.train.len(),
            param_annotations: self.param.len(),
            test_annotations: self.test.len(),
            dropped: self.dropped,
            sample: self.vocab.users.names().to_vec(),
        }
    }

    /// Writes `train.tsv`, `param.tsv`, `test.tsv` and `manifest.json`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for (name, seg) in [
            ("train.tsv", &self.train),
            ("param.tsv", &self.param),
            ("test.tsv", &self.test),
        ] {
            let path = dir.join(name);
            let mut buf = Vec::new();
            write_annotations(&mut buf, &self.vocab, seg.annotations())?;
            std::fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
        }
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(&self.manifest()).expect("manifest serializes");
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }

    /// Reads a split written by [`SplitTrace::write_dir`].
    pub fn read_dir(dir: impl AsRef<Path>) -> Result<SplitTrace> {
        let dir = dir.as_ref();
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: SplitManifest =
            serde_json::from_str(&text).map_err(|e| Error::Snapshot(format!("{}: {e}", path.display())))?;
        let fmt = TraceFormat {
            header: HeaderMode::Present,
            ..TraceFormat::default()
        };
        let mut raw = Vec::new();
        for name in ["train.tsv", "param.tsv", "test.tsv"] {
            let path = dir.join(name);
            let reader = open_maybe_gzip(&path)?;
            let mut rows = Vec::new();
            for (lineno, line) in reader.lines().enumerate() {
                let line = line.map_err(|e| Error::io(&path, e))?;
                if lineno == 0 || line.is_empty() {
                    continue;
                }
                let r = parse_record(&line, &fmt)
                    .ok_or_else(|| Error::Snapshot(format!("{}:{}: malformed record", path.display(), lineno + 1)))?;
                rows.push((r.user.to_owned(), r.item.to_owned(), r.tag, r.timestamp));
            }
            raw.push(rows);
        }
        let vocab = Vocabularies {
            users: Vocabulary::from_names(manifest.sample.iter().cloned()),
            items: Vocabulary::from_names(raw[0].iter().map(|r| r.1.clone())),
            tags: Vocabulary::from_names(raw[0].iter().map(|r| r.2.clone())),
        };
        let mut segments = Vec::new();
        for rows in &raw {
            let mut anns = Vec::with_capacity(rows.len());
            for (u, i, t, ts) in rows {
                anns.push(Annotation {
                    user: vocab.user(u)?,
                    item: vocab.item(i)?,
                    tag: vocab.tag(t)?,
                    timestamp: *ts,
                });
            }
            segments.push(anns);
        }
        let test = segments.pop().unwrap();
        let param = segments.pop().unwrap();
        let train = segments.pop().unwrap();
        let (nu, ni, nt) = (vocab.users.len(), vocab.items.len(), vocab.tags.len());
        let split = SplitTrace {
            train: TraceIndex::build(train, nu, ni, nt),
            param: TraceIndex::build(param, nu, ni, nt),
            test: TraceIndex::build(test, nu, ni, nt),
            vocab,
            dropped: manifest.dropped,
        };
        if split.manifest() != manifest {
            return Err(Error::Snapshot(format!(
                "{}: counts do not match segment files",
                path.display()
            )));
        }
        Ok(split)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub users: usize,
    pub items: usize,
    pub tags: usize,
    pub train_annotations: usize,
    pub param_annotations: usize,
    pub test_annotations: usize,
    pub dropped: DropCounts,
    pub sample: Vec<String>,
}
