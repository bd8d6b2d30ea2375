//! Synthetic tagging traces with planted topics.
//!
//! Items and tags are partitioned into contiguous topic blocks. Every user
//! has a primary topic (`user index % topics`) and a random secondary one;
//! each library item comes from the primary topic with probability
//! `primary_weight`. A user tags items only with a personal vocabulary drawn
//! from the matching topic, so the tags a user actually applies are on-topic
//! by construction. Item and tag popularity within a topic follow Zipf-like
//! weights.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use flate2::write::GzEncoder;
use flate2::Compression;

use rand::distributions::{Distribution, WeightedIndex};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedConfig {
    pub users: usize,
    pub items: usize,
    pub tags: usize,
    pub topics: usize,
    /// Inclusive range of library sizes.
    pub items_per_user: (usize, usize),
    /// Inclusive range of tags applied per item.
    pub tags_per_item: (usize, usize),
    /// Tags a user adopts from each topic they read.
    pub user_vocabulary: usize,
    pub primary_weight: f64,
    pub item_skew: f64,
    pub tag_skew: f64,
    pub seed: u64,
}

impl PlantedConfig {
    /// 200 users, 2000 items, 500 tags, 4 topics.
    pub fn four_topic() -> Self {
        PlantedConfig {
            users: 200,
            items: 2000,
            tags: 500,
            topics: 4,
            items_per_user: (60, 100),
            tags_per_item: (1, 3),
            user_vocabulary: 20,
            primary_weight: 0.75,
            item_skew: 0.8,
            tag_skew: 1.0,
            seed: 0x7a67_5f76_616c_7565,
        }
    }

    /// Two disjoint single-topic groups; small enough for unit tests.
    pub fn two_group_small() -> Self {
        PlantedConfig {
            users: 40,
            items: 200,
            tags: 40,
            topics: 2,
            items_per_user: (20, 30),
            tags_per_item: (1, 2),
            user_vocabulary: 8,
            primary_weight: 1.0,
            item_skew: 0.5,
            tag_skew: 0.8,
            seed: 11,
        }
    }
}

pub type Record = (String, String, String, i64);

#[derive(Debug, Clone)]
pub struct PlantedTrace {
    config: PlantedConfig,
    records: Vec<Record>,
    primary: HashMap<String, usize>,
    secondary: HashMap<String, usize>,
}

fn zipf(n: usize, skew: f64) -> Vec<f64> {
    (0..n).map(|r| 1.0 / ((r + 1) as f64).powf(skew)).collect()
}

fn block(n: usize, topics: usize, topic: usize) -> std::ops::Range<usize> {
    (topic * n / topics)..((topic + 1) * n / topics)
}

impl PlantedTrace {
    pub fn generate(config: &PlantedConfig) -> PlantedTrace {
        assert!(config.topics >= 1 && config.items >= config.topics && config.tags >= config.topics);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut records = Vec::new();
        let mut primary = HashMap::new();
        let mut secondary = HashMap::new();
        for u in 0..config.users {
            let user = format!("user{u:04}");
            let first = u % config.topics;
            let second = if config.topics > 1 {
                (first + rng.gen_range(1..config.topics)) % config.topics
            } else {
                first
            };
            primary.insert(user.clone(), first);
            secondary.insert(user.clone(), second);

            // personal vocabulary per topic, most popular first
            let mut vocab: HashMap<usize, Vec<usize>> = HashMap::new();
            for topic in [first, second] {
                if vocab.contains_key(&topic) {
                    continue;
                }
                let range = block(config.tags, config.topics, topic);
                let weights = zipf(range.len(), config.tag_skew);
                let ranks: Vec<usize> = (0..range.len()).collect();
                let mut chosen: Vec<usize> = ranks
                    .choose_multiple_weighted(&mut rng, config.user_vocabulary.min(range.len()), |&r| weights[r])
                    .expect("positive weights")
                    .copied()
                    .collect();
                chosen.sort_unstable();
                vocab.insert(topic, chosen.into_iter().map(|r| range.start + r).collect());
            }

            let n_items = rng.gen_range(config.items_per_user.0..=config.items_per_user.1);
            let mut library = HashSet::new();
            let base = 1_300_000_000 + u as i64 * 7;
            for slot in 0..n_items {
                let topic = if rng.gen::<f64>() < config.primary_weight {
                    first
                } else {
                    second
                };
                let range = block(config.items, config.topics, topic);
                let items = WeightedIndex::new(zipf(range.len(), config.item_skew)).unwrap();
                let item = loop {
                    let candidate = range.start + items.sample(&mut rng);
                    if library.insert(candidate) {
                        break candidate;
                    }
                    if library.len() >= config.items {
                        return Self::finish(config, records, primary, secondary);
                    }
                };
                let tags = &vocab[&topic];
                let tag_weights = zipf(tags.len(), config.tag_skew);
                let m = rng
                    .gen_range(config.tags_per_item.0..=config.tags_per_item.1)
                    .min(tags.len());
                let positions: Vec<usize> = (0..tags.len()).collect();
                let picked: Vec<usize> = positions
                    .choose_multiple_weighted(&mut rng, m, |&p| tag_weights[p])
                    .expect("positive weights")
                    .copied()
                    .collect();
                let timestamp = base + slot as i64 * 3600;
                for p in picked {
                    records.push((user.clone(), item_name(item), tag_name(tags[p]), timestamp));
                }
            }
        }
        Self::finish(config, records, primary, secondary)
    }

    fn finish(
        config: &PlantedConfig,
        records: Vec<Record>,
        primary: HashMap<String, usize>,
        secondary: HashMap<String, usize>,
    ) -> PlantedTrace {
        PlantedTrace {
            config: config.clone(),
            records,
            primary,
            secondary,
        }
    }

    pub fn config(&self) -> &PlantedConfig {
        &self.config
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn corpus(&self) -> Corpus {
        Corpus::from_records(self.records.iter().cloned()).expect("generated trace is non-empty")
    }

    pub fn write_tsv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "user\titem\ttag\ttimestamp")?;
        for (u, i, t, ts) in &self.records {
            writeln!(w, "{u}\t{i}\t{t}\t{ts}")?;
        }
        Ok(())
    }

    /// Writes the trace as TSV, gzip-compressed when `path` ends in `.gz`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        if path.extension().is_some_and(|e| e == "gz") {
            let mut gz = GzEncoder::new(w, Compression::default());
            self.write_tsv(&mut gz)?;
            w = gz.finish().map_err(|e| Error::io(path, e))?;
        } else {
            self.write_tsv(&mut w)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn user_primary(&self, user: &str) -> usize {
        self.primary[user]
    }

    pub fn user_secondary(&self, user: &str) -> usize {
        self.secondary[user]
    }

    pub fn item_topic(&self, item: &str) -> usize {
        topic_of(item, "item", self.config.items, self.config.topics)
    }

    pub fn tag_topic(&self, tag: &str) -> usize {
        topic_of(tag, "tag", self.config.tags, self.config.topics)
    }
}

fn item_name(i: usize) -> String {
    format!("item{i:05}")
}

fn tag_name(t: usize) -> String {
    format!("tag{t:04}")
}

fn topic_of(name: &str, prefix: &str, n: usize, topics: usize) -> usize {
    let idx: usize = name
        .strip_prefix(prefix)
        .and_then(|s| s.parse().ok())
        .unwrap_or_else(|| panic!("{name} is not a generated {prefix} name"));
    (0..topics)
        .find(|&z| block(n, topics, z).contains(&idx))
        .expect("index within range")
}
