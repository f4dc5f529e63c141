//! Groups journal-article outputs into unique journals.
//!
//! Outputs and their identifier keys (normalized ISSN / ISBN / DOI /
//! title) form an undirected bipartite graph; each connected component is
//! one journal. Union-find over the nodes gives the components.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::titles::normalize_title;
use super::{OutputType, RawOutput};

/// One unique journal: the outputs it contains and the identifier keys
/// that glued them together.
#[derive(Debug, Clone)]
pub struct JournalCluster {
    pub journal_id: usize,
    pub display_title: String,
    pub member_output_ids: BTreeSet<String>,
    pub identifier_keys: BTreeSet<String>,
}

impl JournalCluster {
    pub fn article_count(&self) -> usize {
        self.member_output_ids.len()
    }
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(size: usize) -> Self {
        Self {
            parent: (0..size).collect(),
            rank: vec![0; size],
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn unite(&mut self, x: usize, y: usize) {
        let (rx, ry) = (self.find(x), self.find(y));
        if rx == ry {
            return;
        }
        match self.rank[rx].cmp(&self.rank[ry]) {
            std::cmp::Ordering::Less => self.parent[rx] = ry,
            std::cmp::Ordering::Greater => self.parent[ry] = rx,
            std::cmp::Ordering::Equal => {
                self.parent[ry] = rx;
                self.rank[rx] += 1;
            }
        }
    }
}

/// All identifier keys of one output, namespaced by identifier type.
pub fn identifier_keys(output: &RawOutput) -> Vec<String> {
    let mut keys = Vec::new();
    for issn in &output.issns {
        let k = normalize_issn(issn);
        if !k.is_empty() {
            keys.push(format!("issn:{k}"));
        }
    }
    if let Some(isbn) = &output.isbn {
        let k: String = isbn.chars().filter(|c| c.is_alphanumeric()).collect();
        if !k.is_empty() {
            keys.push(format!("isbn:{}", k.to_uppercase()));
        }
    }
    if let Some(doi) = &output.doi {
        let k = normalize_doi(doi);
        if !k.is_empty() {
            keys.push(format!("doi:{k}"));
        }
    }
    if let Some(title) = &output.volume_title {
        if let Ok(k) = normalize_title(title) {
            keys.push(format!("title:{k}"));
        }
    }
    keys
}

pub fn normalize_issn(raw: &str) -> String {
    raw.chars()
        .filter(|c| c.is_alphanumeric())
        .collect::<String>()
        .to_uppercase()
}

pub fn normalize_doi(raw: &str) -> String {
    let trimmed = raw.trim();
    let stripped = trimmed
        .strip_prefix("https://doi.org/")
        .or_else(|| trimmed.strip_prefix("http://doi.org/"))
        .or_else(|| trimmed.strip_prefix("doi:"))
        .unwrap_or(trimmed);
    stripped.to_lowercase()
}

/// Connected components of the output–identifier bipartite graph.
///
/// Deterministic: the partition depends only on the set of outputs, and
/// journal ids are assigned after sorting components by descending size,
/// then display title, then smallest member id. Identifier-free articles
/// become singleton clusters and are logged.
pub fn cluster_journals(outputs: &[RawOutput]) -> Vec<JournalCluster> {
    let articles: Vec<&RawOutput> = outputs
        .iter()
        .filter(|o| o.output_type == OutputType::JournalArticle)
        .collect();

    let mut ds = DisjointSet::new(articles.len());
    let mut key_owner: HashMap<String, usize> = HashMap::new();
    let mut keys_per_article: Vec<Vec<String>> = Vec::with_capacity(articles.len());
    for (i, output) in articles.iter().enumerate() {
        let keys = identifier_keys(output);
        if keys.is_empty() {
            log::warn!(
                "output {} has no usable journal identifier; keeping it as a singleton",
                output.output_id
            );
        }
        for key in &keys {
            match key_owner.get(key) {
                Some(&j) => ds.unite(i, j),
                None => {
                    key_owner.insert(key.clone(), i);
                }
            }
        }
        keys_per_article.push(keys);
    }

    let mut components: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..articles.len() {
        components.entry(ds.find(i)).or_default().push(i);
    }

    let mut clusters: Vec<JournalCluster> = components
        .into_values()
        .map(|members| {
            let mut title_counts: BTreeMap<&str, usize> = BTreeMap::new();
            let mut member_output_ids = BTreeSet::new();
            let mut keys = BTreeSet::new();
            for &i in &members {
                member_output_ids.insert(articles[i].output_id.clone());
                keys.extend(keys_per_article[i].iter().cloned());
                if let Some(t) = &articles[i].volume_title {
                    *title_counts.entry(t.as_str()).or_insert(0) += 1;
                }
            }
            // Most frequent raw title; ties break lexicographically
            // (BTreeMap iteration order plus a strict count comparison).
            let display_title = title_counts
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(t, _)| t.to_string())
                .or_else(|| keys.iter().next().cloned())
                .unwrap_or_else(|| format!("untitled ({})", member_output_ids.iter().next().unwrap()));
            JournalCluster {
                journal_id: 0,
                display_title,
                member_output_ids,
                identifier_keys: keys,
            }
        })
        .collect();

    clusters.sort_by(|a, b| {
        b.article_count()
            .cmp(&a.article_count())
            .then_with(|| a.display_title.cmp(&b.display_title))
            .then_with(|| a.member_output_ids.iter().next().cmp(&b.member_output_ids.iter().next()))
    });
    for (id, cluster) in clusters.iter_mut().enumerate() {
        cluster.journal_id = id;
    }
    clusters
}
