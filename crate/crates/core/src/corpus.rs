//! Interaction datasets: loading, pruning, per-user splitting and planted-cluster
//! synthetic generation.
//!
//! File formats (UTF-8, lines starting with `#` are ignored):
//!
//! * interactions: `user_id<TAB>item_id`
//! * attributes: `item_id<TAB>attr_id[,attr_id...]`

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Interaction {
    pub user: usize,
    pub item: usize,
}

impl Interaction {
    pub fn new(user: usize, item: usize) -> Self {
        Self { user, item }
    }
}

/// Item universe plus the attribute sets describing each item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Catalog {
    pub num_users: usize,
    pub num_items: usize,
    pub num_attributes: usize,
    /// Sorted, deduplicated attribute ids per item.
    item_attributes: Vec<Vec<usize>>,
}

impl Catalog {
    pub fn new(
        num_users: usize,
        num_attributes: usize,
        item_attributes: Vec<Vec<usize>>,
    ) -> Result<Self> {
        let mut normalized = Vec::with_capacity(item_attributes.len());
        for (item, attrs) in item_attributes.into_iter().enumerate() {
            let set: BTreeSet<usize> = attrs.into_iter().collect();
            if set.is_empty() {
                return Err(Error::Integrity(format!("item {item} has no attributes")));
            }
            if let Some(&bad) = set.iter().find(|&&a| a >= num_attributes) {
                return Err(Error::Integrity(format!(
                    "item {item} references attribute {bad} (num_attributes = {num_attributes})"
                )));
            }
            normalized.push(set.into_iter().collect());
        }
        Ok(Self {
            num_users,
            num_items: normalized.len(),
            num_attributes,
            item_attributes: normalized,
        })
    }

    pub fn attributes(&self, item: usize) -> &[usize] {
        &self.item_attributes[item]
    }

    pub fn has_attribute(&self, item: usize, attribute: usize) -> bool {
        self.item_attributes[item].binary_search(&attribute).is_ok()
    }

    /// True when `item` carries every attribute in the sorted set `attrs`.
    pub fn has_all(&self, item: usize, attrs: &[usize]) -> bool {
        attrs.iter().all(|&a| self.has_attribute(item, a))
    }

    pub fn with_num_users(mut self, num_users: usize) -> Self {
        self.num_users = num_users;
        self
    }
}

/// Counts in the usual dataset-summary layout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub users: usize,
    pub items: usize,
    pub interactions: usize,
    pub attributes: usize,
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "#users\t#items\t#interactions\t#attributes")?;
        write!(
            f,
            "{}\t{}\t{}\t{}",
            self.users, self.items, self.interactions, self.attributes
        )
    }
}

pub fn stats(catalog: &Catalog, interactions: &[Interaction]) -> DatasetStats {
    DatasetStats {
        users: catalog.num_users,
        items: catalog.num_items,
        interactions: interactions.len(),
        attributes: catalog.num_attributes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub train: Vec<Interaction>,
    pub validation: Vec<Interaction>,
    pub test: Vec<Interaction>,
    pub catalog: Catalog,
}

impl SplitDataset {
    pub fn num_users(&self) -> usize {
        self.catalog.num_users
    }

    /// Items per user for one split, sorted.
    pub fn items_by_user(&self, split: &[Interaction]) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.catalog.num_users];
        for it in split {
            out[it.user].push(it.item);
        }
        for items in &mut out {
            items.sort_unstable();
        }
        out
    }

    pub fn train_by_user(&self) -> Vec<Vec<usize>> {
        self.items_by_user(&self.train)
    }

    /// Union of all three splits per user; what an evaluator excludes when drawing negatives.
    pub fn known_by_user(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.catalog.num_users];
        for it in self.train.iter().chain(&self.validation).chain(&self.test) {
            out[it.user].push(it.item);
        }
        for items in &mut out {
            items.sort_unstable();
            items.dedup();
        }
        out
    }

    pub fn all_interactions(&self) -> Vec<Interaction> {
        let mut all: Vec<_> = self
            .train
            .iter()
            .chain(&self.validation)
            .chain(&self.test)
            .copied()
            .collect();
        all.sort_unstable();
        all
    }

    pub fn stats(&self) -> DatasetStats {
        DatasetStats {
            users: self.catalog.num_users,
            items: self.catalog.num_items,
            interactions: self.train.len() + self.validation.len() + self.test.len(),
            attributes: self.catalog.num_attributes,
        }
    }
}

/// Optional declared catalog dimensions; inferred from the files when absent.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadOptions {
    pub num_items: Option<usize>,
    pub num_attributes: Option<usize>,
}

pub fn load_dataset(
    interactions_path: &Path,
    attributes_path: &Path,
) -> Result<(Catalog, Vec<Interaction>)> {
    load_dataset_with(interactions_path, attributes_path, LoadOptions::default())
}

pub fn load_dataset_with(
    interactions_path: &Path,
    attributes_path: &Path,
    options: LoadOptions,
) -> Result<(Catalog, Vec<Interaction>)> {
    let interactions = parse_interactions(&fs::read_to_string(interactions_path)?, interactions_path)?;
    let attributes = parse_attributes(&fs::read_to_string(attributes_path)?, attributes_path)?;
    assemble(interactions, attributes, options)
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

fn parse_id(field: &str, path: &Path, line: usize, what: &str) -> Result<usize> {
    field
        .trim()
        .parse::<usize>()
        .map_err(|_| parse_error(path, line, format!("invalid {what} `{}`", field.trim())))
}

/// Parses `user<TAB>item` lines; duplicates are dropped, first occurrence order kept.
pub fn parse_interactions(text: &str, path: &Path) -> Result<Vec<Interaction>> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (line, content) in content_lines(text) {
        let mut fields = content.split('\t');
        let (Some(u), Some(v), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_error(path, line, "expected `user_id<TAB>item_id`"));
        };
        let it = Interaction::new(
            parse_id(u, path, line, "user id")?,
            parse_id(v, path, line, "item id")?,
        );
        if seen.insert(it) {
            out.push(it);
        }
    }
    Ok(out)
}

/// Parses `item<TAB>attr[,attr...]` lines into a map; repeated item lines are merged.
pub fn parse_attributes(text: &str, path: &Path) -> Result<BTreeMap<usize, BTreeSet<usize>>> {
    let mut out: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (line, content) in content_lines(text) {
        let Some((item, attrs)) = content.split_once('\t') else {
            return Err(parse_error(path, line, "expected `item_id<TAB>attr_id[,attr_id...]`"));
        };
        let item = parse_id(item, path, line, "item id")?;
        let entry = out.entry(item).or_default();
        for a in attrs.split(',') {
            entry.insert(parse_id(a, path, line, "attribute id")?);
        }
    }
    Ok(out)
}

fn assemble(
    interactions: Vec<Interaction>,
    attributes: BTreeMap<usize, BTreeSet<usize>>,
    options: LoadOptions,
) -> Result<(Catalog, Vec<Interaction>)> {
    let max_item = interactions
        .iter()
        .map(|i| i.item)
        .chain(attributes.keys().copied())
        .max();
    let num_items = match (options.num_items, max_item) {
        (Some(n), _) => n,
        (None, Some(m)) => m + 1,
        (None, None) => 0,
    };
    let max_attr = attributes.values().flat_map(|s| s.iter().copied()).max();
    let num_attributes = match (options.num_attributes, max_attr) {
        (Some(n), _) => n,
        (None, Some(m)) => m + 1,
        (None, None) => 0,
    };

    if let Some(&item) = attributes.keys().find(|&&i| i >= num_items) {
        return Err(Error::Integrity(format!(
            "attribute file references item {item} outside a {num_items}-item catalog"
        )));
    }
    if let Some(it) = interactions.iter().find(|i| i.item >= num_items) {
        return Err(Error::Integrity(format!(
            "interaction references item {} outside a {num_items}-item catalog",
            it.item
        )));
    }
    if let Some(it) = interactions.iter().find(|i| !attributes.contains_key(&i.item)) {
        return Err(Error::Integrity(format!(
            "interaction references item {} which has no attribute entry",
            it.item
        )));
    }

    let mut item_attributes = Vec::with_capacity(num_items);
    for item in 0..num_items {
        match attributes.get(&item) {
            Some(set) => item_attributes.push(set.iter().copied().collect()),
            None => {
                return Err(Error::Integrity(format!("item {item} has no attributes")));
            }
        }
    }
    let num_users = interactions.iter().map(|i| i.user + 1).max().unwrap_or(0);
    let catalog = Catalog::new(num_users, num_attributes, item_attributes)?;
    Ok((catalog, interactions))
}

/// Writes a catalog and interaction list in the loadable text formats.
pub fn write_dataset(
    catalog: &Catalog,
    interactions: &[Interaction],
    interactions_path: &Path,
    attributes_path: &Path,
) -> Result<()> {
    let mut f = fs::File::create(interactions_path)?;
    writeln!(f, "# user_id\titem_id")?;
    for it in interactions {
        writeln!(f, "{}\t{}", it.user, it.item)?;
    }
    let mut f = fs::File::create(attributes_path)?;
    writeln!(f, "# item_id\tattr_id[,attr_id...]")?;
    for item in 0..catalog.num_items {
        let attrs: Vec<String> = catalog.attributes(item).iter().map(|a| a.to_string()).collect();
        writeln!(f, "{item}\t{}", attrs.join(","))?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitRatios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        Self {
            train: 0.7,
            validation: 0.2,
            test: 0.1,
        }
    }
}

impl SplitRatios {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.validation, self.test];
        if parts.iter().any(|r| !r.is_finite() || *r < 0.0) {
            return Err(Error::invalid("split ratios must be non-negative"));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("split ratios must sum to 1"));
        }
        Ok(())
    }

    /// (train, validation, test) sizes for a user with `n` interactions.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let n_train = ((self.train * n as f64).round() as usize).min(n);
        let n_val = ((self.validation * n as f64).round() as usize).min(n - n_train);
        (n_train, n_val, n - n_train - n_val)
    }
}

/// Drops users with fewer than `min_interactions`, re-indexes the rest densely (in order of
/// original id) and splits each user's shuffled interactions by `ratios`.
pub fn prune_and_split(
    catalog: &Catalog,
    interactions: &[Interaction],
    min_interactions: usize,
    ratios: SplitRatios,
    seed: u64,
) -> Result<SplitDataset> {
    if min_interactions == 0 {
        return Err(Error::invalid("min_interactions must be at least 1"));
    }
    ratios.validate()?;

    let mut by_user: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for it in interactions {
        by_user.entry(it.user).or_default().insert(it.item);
    }
    by_user.retain(|_, items| items.len() >= min_interactions);
    if by_user.is_empty() {
        return Err(Error::EmptyDataset(format!(
            "no user has at least {min_interactions} interactions"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut validation, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for (new_id, items) in by_user.values().enumerate() {
        let mut items: Vec<usize> = items.iter().copied().collect();
        items.shuffle(&mut rng);
        let (n_train, n_val, _) = ratios.sizes(items.len());
        for (pos, &item) in items.iter().enumerate() {
            let it = Interaction::new(new_id, item);
            if pos < n_train {
                train.push(it);
            } else if pos < n_train + n_val {
                validation.push(it);
            } else {
                test.push(it);
            }
        }
    }

    Ok(SplitDataset {
        train,
        validation,
        test,
        catalog: catalog.clone().with_num_users(by_user.len()),
    })
}

/// Parameters of the planted-cluster generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub num_users: usize,
    pub num_items: usize,
    pub num_attributes: usize,
    pub clusters: usize,
    pub interactions_per_user: usize,
    /// Fraction of each user's interactions drawn from the user's own cluster.
    pub affinity: f64,
    /// Probability that an item carries each attribute owned by its cluster.
    pub owned_attribute_prob: f64,
    /// Probability that an item carries each attribute owned by another cluster.
    pub foreign_attribute_prob: f64,
    /// Zipf exponent of item popularity within each cluster; 0 draws items uniformly.
    pub popularity_skew: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_users: 50,
            num_items: 200,
            num_attributes: 10,
            clusters: 5,
            interactions_per_user: 20,
            affinity: 0.95,
            owned_attribute_prob: 0.6,
            foreign_attribute_prob: 0.1,
            popularity_skew: 0.0,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn new(
        num_users: usize,
        num_items: usize,
        num_attributes: usize,
        clusters: usize,
        seed: u64,
    ) -> Self {
        Self {
            num_users,
            num_items,
            num_attributes,
            clusters,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_users == 0 || self.num_items == 0 || self.num_attributes == 0 || self.clusters == 0 {
            return Err(Error::invalid("synthetic counts must all be at least 1"));
        }
        if self.clusters > self.num_attributes {
            return Err(Error::invalid("clusters must not exceed num_attributes"));
        }
        if self.clusters > self.num_items {
            return Err(Error::invalid("clusters must not exceed num_items"));
        }
        if self.interactions_per_user == 0 {
            return Err(Error::invalid("interactions_per_user must be at least 1"));
        }
        for (name, p) in [
            ("affinity", self.affinity),
            ("owned_attribute_prob", self.owned_attribute_prob),
            ("foreign_attribute_prob", self.foreign_attribute_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1]")));
            }
        }
        if !(self.popularity_skew >= 0.0 && self.popularity_skew.is_finite()) {
            return Err(Error::invalid("popularity_skew must be finite and non-negative"));
        }
        Ok(())
    }
}

/// A generated dataset together with its planted labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub split: SplitDataset,
    pub user_clusters: Vec<usize>,
    pub item_clusters: Vec<usize>,
}

/// Balanced random assignment of `n` entities to `k` clusters.
fn balanced_labels(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut ids: Vec<usize> = (0..n).collect();
    ids.shuffle(rng);
    let mut labels = vec![0; n];
    for (pos, id) in ids.into_iter().enumerate() {
        labels[id] = pos % k;
    }
    labels
}

pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticDataset> {
    config.validate()?;
    let k = config.clusters;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let item_clusters = balanced_labels(config.num_items, k, &mut rng);
    let user_clusters = balanced_labels(config.num_users, k, &mut rng);

    // Attribute a is owned by cluster a % k.
    let mut item_attributes = Vec::with_capacity(config.num_items);
    for &c in &item_clusters {
        let owned: Vec<usize> = (0..config.num_attributes).filter(|a| a % k == c).collect();
        let mut attrs = Vec::new();
        for a in 0..config.num_attributes {
            let p = if a % k == c {
                config.owned_attribute_prob
            } else {
                config.foreign_attribute_prob
            };
            if rng.gen::<f64>() < p {
                attrs.push(a);
            }
        }
        if !attrs.iter().any(|a| a % k == c) {
            attrs.push(*owned.choose(&mut rng).expect("cluster owns an attribute"));
        }
        item_attributes.push(attrs);
    }
    let catalog = Catalog::new(config.num_users, config.num_attributes, item_attributes)?;

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); k];
    let mut weight = vec![1.0; config.num_items];
    for (item, &c) in item_clusters.iter().enumerate() {
        weight[item] = ((members[c].len() + 1) as f64).powf(-config.popularity_skew);
        members[c].push(item);
    }

    let mut interactions = Vec::new();
    for (user, &c) in user_clusters.iter().enumerate() {
        let n = config.interactions_per_user.min(config.num_items);
        let others: Vec<usize> = (0..config.num_items).filter(|&i| item_clusters[i] != c).collect();
        let n_out = ((n as f64 * (1.0 - config.affinity)).floor() as usize).min(others.len());
        let n_in = (n - n_out).min(members[c].len());
        let mut draw = |pool: &[usize], m: usize| -> Vec<usize> {
            if config.popularity_skew == 0.0 {
                pool.choose_multiple(&mut rng, m).copied().collect()
            } else {
                pool.choose_multiple_weighted(&mut rng, m, |&i| weight[i])
                    .expect("weights are positive and finite")
                    .copied()
                    .collect()
            }
        };
        let inside = draw(&members[c], n_in);
        let outside = draw(&others, n_out);
        for item in inside.into_iter().chain(outside) {
            interactions.push(Interaction::new(user, item));
        }
    }

    let split = prune_and_split(&catalog, &interactions, 1, SplitRatios::default(), rng.gen())?;
    Ok(SyntheticDataset {
        split,
        user_clusters,
        item_clusters,
    })
}

/// Paths of the two text files making up a dataset on disk.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetFiles {
    pub interactions: PathBuf,
    pub attributes: PathBuf,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> PathBuf {
        PathBuf::from("mem")
    }

    #[test]
    fn duplicate_interactions_are_removed() {
        let parsed = parse_interactions("0\t5\n0\t5\n1\t2\n", &p()).unwrap();
        assert_eq!(parsed, vec![Interaction::new(0, 5), Interaction::new(1, 2)]);
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let parsed = parse_interactions("# header\n\n3\t4\n", &p()).unwrap();
        assert_eq!(parsed, vec![Interaction::new(3, 4)]);
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_interactions("0\t1\n0 1\n", &p()).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_interactions("0\t1\n\n# c\n-3\t1\n", &p()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }));
    }

    #[test]
    fn attribute_referencing_item_outside_catalog() {
        let attrs = parse_attributes("0\t1\n9999\t2\n", &p()).unwrap();
        let opts = LoadOptions {
            num_items: Some(100),
            num_attributes: None,
        };
        let err = assemble(vec![Interaction::new(0, 0)], attrs, opts).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)), "{err}");
    }

    #[test]
    fn interaction_with_item_lacking_attributes() {
        let attrs = parse_attributes("0\t1\n", &p()).unwrap();
        let err = assemble(vec![Interaction::new(0, 1)], attrs, LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Integrity(_)));
    }

    #[test]
    fn user_below_threshold_removed() {
        let catalog = Catalog::new(2, 1, vec![vec![0]; 20]).unwrap();
        let mut its: Vec<_> = (0..9).map(|i| Interaction::new(0, i)).collect();
        its.extend((0..10).map(|i| Interaction::new(1, i)));
        let split = prune_and_split(&catalog, &its, 10, SplitRatios::default(), 3).unwrap();
        assert_eq!(split.catalog.num_users, 1);
        assert_eq!((split.train.len(), split.validation.len(), split.test.len()), (7, 2, 1));
        assert!(split.all_interactions().iter().all(|i| i.user == 0));
    }

    #[test]
    fn single_user_keeps_everything() {
        let catalog = Catalog::new(1, 1, vec![vec![0]; 3]).unwrap();
        let its: Vec<_> = (0..3).map(|i| Interaction::new(4, i)).collect();
        let split = prune_and_split(&catalog, &its, 1, SplitRatios::default(), 0).unwrap();
        // 0.7*3 = 2.1 -> 2, 0.2*3 = 0.6 -> 1, remainder 0
        assert_eq!((split.train.len(), split.validation.len(), split.test.len()), (2, 1, 0));
        assert_eq!(split.all_interactions().len(), 3);
    }

    #[test]
    fn empty_after_pruning_is_an_error() {
        let catalog = Catalog::new(1, 1, vec![vec![0]; 3]).unwrap();
        let its = vec![Interaction::new(0, 0)];
        let err = prune_and_split(&catalog, &its, 2, SplitRatios::default(), 0).unwrap_err();
        assert!(matches!(err, Error::EmptyDataset(_)));
    }

    #[test]
    fn bad_ratios_rejected() {
        let catalog = Catalog::new(1, 1, vec![vec![0]; 3]).unwrap();
        let its = vec![Interaction::new(0, 0)];
        let ratios = SplitRatios {
            train: 0.5,
            validation: 0.2,
            test: 0.1,
        };
        assert!(prune_and_split(&catalog, &its, 1, ratios, 0).is_err());
        assert!(prune_and_split(&catalog, &its, 0, SplitRatios::default(), 0).is_err());
    }

    #[test]
    fn synthetic_is_deterministic() {
        let cfg = SyntheticConfig::new(20, 60, 6, 3, 11);
        assert_eq!(generate_synthetic(&cfg).unwrap(), generate_synthetic(&cfg).unwrap());
    }

    #[test]
    fn synthetic_preconditions() {
        assert!(generate_synthetic(&SyntheticConfig::new(0, 10, 3, 1, 0)).is_err());
        assert!(generate_synthetic(&SyntheticConfig::new(5, 10, 3, 4, 0)).is_err());
    }

    #[test]
    fn stats_display_layout() {
        let s = DatasetStats {
            users: 1801,
            items: 7432,
            interactions: 76693,
            attributes: 33,
        };
        assert_eq!(
            s.to_string(),
            "#users\t#items\t#interactions\t#attributes\n1801\t7432\t76693\t33"
        );
    }
}
