//! Content catalogs, Zipf popularity and the MNO caching policy.
//!
//! The caching policy turns a CP's storage allocation into a binary placement:
//! the allocation is split equally across SBSs and every SBS caches the CP's
//! files in descending popularity, whole files only, stopping at the first file
//! that no longer fits. The cached set is therefore always a popularity prefix,
//! identical at every SBS.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::UserRecord;

/// Popularity vectors must sum to one within this tolerance.
pub const POPULARITY_SUM_TOL: f64 = 1e-9;

/// Files offered by one CP: sizes in bits and a popularity distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct FileCatalog {
    cp: usize,
    sizes: Vec<f64>,
    popularity: Vec<f64>,
    order: Vec<usize>,
}

impl FileCatalog {
    pub fn new(cp: usize, sizes: Vec<f64>, popularity: Vec<f64>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::Invalid(format!("catalog of CP {cp} has no files")));
        }
        if sizes.len() != popularity.len() {
            return Err(Error::DimensionMismatch {
                expected: sizes.len(),
                found: popularity.len(),
            });
        }
        if let Some(s) = sizes.iter().find(|s| !(**s > 0.0 && s.is_finite())) {
            return Err(Error::Invalid(format!(
                "CP {cp}: file size {s} is not positive"
            )));
        }
        if let Some(p) = popularity.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
            return Err(Error::Invalid(format!(
                "CP {cp}: popularity entry {p} is negative"
            )));
        }
        let sum: f64 = popularity.iter().sum();
        if (sum - 1.0).abs() > POPULARITY_SUM_TOL {
            return Err(Error::Invalid(format!(
                "CP {cp}: popularity sums to {sum}, not 1"
            )));
        }
        let mut order: Vec<usize> = (0..sizes.len()).collect();
        // Stable sort keeps lower file indices first among equal popularity.
        order.sort_by(|&a, &b| popularity[b].total_cmp(&popularity[a]));
        Ok(Self {
            cp,
            sizes,
            popularity,
            order,
        })
    }

    /// Catalog with `file_count` files of `file_size` bits and Zipf popularity.
    pub fn zipf(cp: usize, file_count: usize, alpha: f64, file_size: f64) -> Result<Self> {
        let popularity = zipf_popularity(file_count, alpha)?;
        Self::new(cp, vec![file_size; file_count], popularity)
    }

    pub fn cp(&self) -> usize {
        self.cp
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    pub fn sizes(&self) -> &[f64] {
        &self.sizes
    }

    pub fn popularity(&self) -> &[f64] {
        &self.popularity
    }

    /// File indices in caching order (descending popularity, ties by index).
    pub fn caching_order(&self) -> &[usize] {
        &self.order
    }

    pub fn total_bits(&self) -> f64 {
        self.sizes.iter().sum()
    }

    pub fn contains(&self, file: usize) -> bool {
        file < self.sizes.len()
    }

    /// Number of files, taken in caching order, that fit into `share_bits`.
    pub fn cached_prefix_len(&self, share_bits: f64) -> usize {
        let mut used = 0.0;
        let mut count = 0;
        for &f in &self.order {
            let next = used + self.sizes[f];
            if next > share_bits {
                break;
            }
            used = next;
            count += 1;
        }
        count
    }
}

/// Zipf popularity over `file_count` ranks: entry n is proportional to n^(-alpha).
pub fn zipf_popularity(file_count: usize, alpha: f64) -> Result<Vec<f64>> {
    if file_count == 0 {
        return Err(Error::Invalid(
            "zipf_popularity needs at least one file".into(),
        ));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::Invalid(format!(
            "Zipf exponent {alpha} must be nonnegative"
        )));
    }
    let weights: Vec<f64> = (1..=file_count)
        .map(|n| libm::pow(n as f64, -alpha))
        .collect();
    let total: f64 = weights.iter().sum();
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Binary cache placement of one CP over SBS x file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CachePlacement {
    cp: usize,
    sbs_count: usize,
    file_count: usize,
    beta: Vec<bool>,
}

impl CachePlacement {
    pub fn empty(cp: usize, sbs_count: usize, file_count: usize) -> Self {
        Self {
            cp,
            sbs_count,
            file_count,
            beta: vec![false; sbs_count * file_count],
        }
    }

    pub fn cp(&self) -> usize {
        self.cp
    }

    pub fn sbs_count(&self) -> usize {
        self.sbs_count
    }

    pub fn file_count(&self) -> usize {
        self.file_count
    }

    pub fn is_cached(&self, sbs: usize, file: usize) -> bool {
        self.beta[sbs * self.file_count + file]
    }

    pub fn set(&mut self, sbs: usize, file: usize, cached: bool) {
        self.beta[sbs * self.file_count + file] = cached;
    }

    pub fn cached_bits(&self, sbs: usize, catalog: &FileCatalog) -> f64 {
        (0..self.file_count)
            .filter(|&f| self.is_cached(sbs, f))
            .map(|f| catalog.sizes()[f])
            .sum()
    }

    pub fn cached_count(&self) -> usize {
        self.beta.iter().filter(|b| **b).count()
    }

    /// True when every file cached here is also cached in `other`.
    pub fn is_subset_of(&self, other: &CachePlacement) -> bool {
        self.beta.len() == other.beta.len()
            && self.beta.iter().zip(&other.beta).all(|(a, b)| !*a || *b)
    }
}

/// Turns a CP storage allocation into a placement (equal split, popularity-greedy).
pub fn placement_from_allocation(
    catalog: &FileCatalog,
    rho: f64,
    sbs_count: usize,
) -> CachePlacement {
    let mut placement = CachePlacement::empty(catalog.cp(), sbs_count, catalog.len());
    if sbs_count == 0 || rho.is_nan() || rho <= 0.0 {
        return placement;
    }
    let prefix = catalog.cached_prefix_len(rho / sbs_count as f64);
    for sbs in 0..sbs_count {
        for &f in &catalog.caching_order()[..prefix] {
            placement.set(sbs, f, true);
        }
    }
    placement
}

/// Per-SBS, per-file request counts generated by one CP.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Demand {
    sbs_count: usize,
    file_count: usize,
    counts: Vec<u64>,
}

impl Demand {
    pub fn count(&self, sbs: usize, file: usize) -> u64 {
        self.counts[sbs * self.file_count + file]
    }

    pub fn sbs_count(&self) -> usize {
        self.sbs_count
    }

    pub fn file_count(&self) -> usize {
        self.file_count
    }

    pub fn sbs_total(&self, sbs: usize) -> u64 {
        self.counts[sbs * self.file_count..(sbs + 1) * self.file_count]
            .iter()
            .sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Round half up; request counts are nonnegative.
pub(crate) fn round_count(x: f64) -> u64 {
    libm::floor(x + 0.5) as u64
}

/// Expected requests: theta x popularity(f) x (subscribers of the CP at SBS i), rounded.
pub fn cp_demand(
    catalog: &FileCatalog,
    theta: f64,
    users: &[UserRecord],
    sbs_count: usize,
) -> Result<Demand> {
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::Invalid(format!(
            "CP type {theta} must be nonnegative"
        )));
    }
    let mut subscribers = vec![0usize; sbs_count];
    for u in users.iter().filter(|u| u.subscribes_to(catalog.cp())) {
        if u.serving_sbs >= sbs_count {
            return Err(Error::OutOfRange {
                what: "SBS",
                index: u.serving_sbs,
                len: sbs_count,
            });
        }
        subscribers[u.serving_sbs] += 1;
    }
    let file_count = catalog.len();
    let mut counts = Vec::with_capacity(sbs_count * file_count);
    for &n in &subscribers {
        for &p in catalog.popularity() {
            counts.push(round_count(theta * p * n as f64));
        }
    }
    Ok(Demand {
        sbs_count,
        file_count,
        counts,
    })
}
