//! Oversamplers that grow class × group clusters with synthetic instances.
//!
//! [`Technique::HeteroFair`] pairs an instance of the target cluster with an
//! instance of a heterogeneous cluster (other class in the same group, or the
//! same class in another group) and interpolates with a step length scaled to
//! the instance's neighborhood radius and bounded by its local density. The
//! remaining techniques are the comparison baselines: SMOTE on the minority
//! class, and SMOTE, Borderline-SMOTE and ADASYN applied per cluster.
//!
//! Every run consumes a single seeded random stream. Within one generated
//! instance draws happen in a fixed order: source `i`, Bernoulli draw `b`
//! (heterogeneous technique only), partner `j`, then weight `w`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{partition_clusters, ClusterIndex, ClusterKey, Dataset, RowTag};
use crate::error::{Error, Result};
use crate::neighbors::{euclidean_unchecked, knn_within, NeighborCache, NeighborResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Technique {
    /// Train on the data as is.
    #[serde(rename = "original", alias = "none")]
    None,
    Smote,
    Fsmote,
    Fbsmote,
    Fadasyn,
    HeteroFair,
}

impl Technique {
    pub const ALL: [Technique; 6] = [
        Technique::None,
        Technique::Smote,
        Technique::Fsmote,
        Technique::Fbsmote,
        Technique::Fadasyn,
        Technique::HeteroFair,
    ];

    /// Lowercase identifier used on the command line and in CSV output.
    pub fn name(self) -> &'static str {
        match self {
            Technique::None => "original",
            Technique::Smote => "smote",
            Technique::Fsmote => "fsmote",
            Technique::Fbsmote => "fbsmote",
            Technique::Fadasyn => "fadasyn",
            Technique::HeteroFair => "heterofair",
        }
    }

    /// True for techniques that balance every class × group cluster.
    pub fn is_fair(self) -> bool {
        matches!(
            self,
            Technique::Fsmote | Technique::Fbsmote | Technique::Fadasyn | Technique::HeteroFair
        )
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Technique::None => "Original",
            Technique::Smote => "SMOTE",
            Technique::Fsmote => "FSMOTE",
            Technique::Fbsmote => "FBSMOTE",
            Technique::Fadasyn => "FADASYN",
            Technique::HeteroFair => "HeteroFair",
        };
        f.write_str(s)
    }
}

impl FromStr for Technique {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" | "original" => Ok(Technique::None),
            "smote" => Ok(Technique::Smote),
            "fsmote" => Ok(Technique::Fsmote),
            "fbsmote" => Ok(Technique::Fbsmote),
            "fadasyn" => Ok(Technique::Fadasyn),
            "heterofair" | "hetero" | "ours" => Ok(Technique::HeteroFair),
            other => Err(Error::Parameter(format!("unknown technique '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OversamplerConfig {
    pub technique: Technique,
    pub k: usize,
    pub seed: u64,
    /// Copy group-column features from the source instance instead of interpolating them.
    pub pin_protected: bool,
    /// Extra pair draws allowed when a proposed pair has zero distance.
    pub max_pair_retries: usize,
}

impl Default for OversamplerConfig {
    fn default() -> Self {
        OversamplerConfig {
            technique: Technique::HeteroFair,
            k: 5,
            seed: 0,
            pin_protected: true,
            max_pair_retries: 10,
        }
    }
}

impl OversamplerConfig {
    pub fn new(technique: Technique, k: usize, seed: u64) -> Self {
        OversamplerConfig {
            technique,
            k,
            seed,
            ..Default::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Parameter("k must be at least 1".into()));
        }
        if self.max_pair_retries == 0 {
            return Err(Error::Parameter("max_pair_retries must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PairKind {
    /// Partner from the other class of the same group.
    IntraGroup,
    /// Partner from the same class of another group.
    IntraClass,
}

/// A drawn generation pair. `i` and `j` are dataset row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct PairProposal {
    pub target: ClusterKey,
    pub i: usize,
    pub j: usize,
    pub pair_kind: PairKind,
    pub p: f64,
    pub bernoulli_draw: bool,
}

/// Deviation from a technique's regular generation path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Fallback {
    /// No heterogeneous cluster available; generated within the target cluster.
    Homogeneous,
    /// Borderline rule found no danger instances; sourced from the whole cluster.
    NoDangerSet,
    /// All density ratios were zero; generation spread evenly.
    UniformAllocation,
    /// No usable partner; the source instance was copied.
    Duplicate,
}

impl Fallback {
    pub fn name(self) -> &'static str {
        match self {
            Fallback::Homogeneous => "homogeneous",
            Fallback::NoDangerSet => "no-danger-set",
            Fallback::UniformAllocation => "uniform-allocation",
            Fallback::Duplicate => "duplicate",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticInstance {
    pub features: Vec<f64>,
    pub label: u8,
    pub group: usize,
    pub target: ClusterKey,
    pub technique: Technique,
    pub fallback: Option<Fallback>,
    /// Source instance and interpolation partner, as row indices of the input dataset.
    pub source: (usize, usize),
    pub weight: f64,
    pub pair_kind: Option<PairKind>,
}

impl SyntheticInstance {
    /// Provenance string, e.g. `heterofair` or `fsmote+duplicate`.
    pub fn tag(&self) -> String {
        match self.fallback {
            Some(f) => format!("{}+{}", self.technique.name(), f.name()),
            None => self.technique.name().to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ClusterSummary {
    pub original: usize,
    pub generated: usize,
    pub fallbacks: BTreeMap<Fallback, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBatch {
    pub technique: Technique,
    pub instances: Vec<SyntheticInstance>,
    pub clusters: BTreeMap<ClusterKey, ClusterSummary>,
    pub warnings: Vec<String>,
}

impl SyntheticBatch {
    fn new(technique: Technique, ci: &ClusterIndex) -> Self {
        SyntheticBatch {
            technique,
            instances: Vec::new(),
            clusters: ci
                .iter()
                .map(|(k, v)| {
                    (
                        k,
                        ClusterSummary {
                            original: v.len(),
                            ..Default::default()
                        },
                    )
                })
                .collect(),
            warnings: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn generated_for(&self, key: ClusterKey) -> usize {
        self.clusters.get(&key).map_or(0, |s| s.generated)
    }

    fn push(&mut self, inst: SyntheticInstance) {
        let summary = self.clusters.entry(inst.target).or_default();
        summary.generated += 1;
        if let Some(f) = inst.fallback {
            *summary.fallbacks.entry(f).or_default() += 1;
        }
        self.instances.push(inst);
    }
}

/// The input rows followed by the synthetic rows, plus generation records.
#[derive(Debug, Clone, PartialEq)]
pub struct Augmented {
    pub dataset: Dataset,
    pub batch: SyntheticBatch,
    pub original_n: usize,
}

impl Augmented {
    pub fn row_tags(&self) -> Vec<RowTag> {
        let mut tags: Vec<RowTag> = (0..self.original_n)
            .map(|_| RowTag {
                synthetic: false,
                technique: "original".into(),
            })
            .collect();
        tags.extend(self.batch.instances.iter().map(|s| RowTag {
            synthetic: true,
            technique: s.tag(),
        }));
        tags
    }
}

/// Probability of drawing an intra-group partner for `target`:
/// `|H_y| / (|H_y| + |H_g|)`.
pub fn selection_probability(ci: &ClusterIndex, target: ClusterKey) -> Result<f64> {
    let hy = ci.other_class(target).len();
    let hg = ci.other_groups_len(target);
    if hy + hg == 0 {
        return Err(Error::HeteroUnavailable {
            class: target.class,
            group: target.group,
        });
    }
    Ok(hy as f64 / (hy + hg) as f64)
}

struct HeteroPools<'a> {
    target: ClusterKey,
    members: &'a [usize],
    other_class: &'a [usize],
    other_groups: Vec<usize>,
    p: f64,
}

impl<'a> HeteroPools<'a> {
    fn new(ci: &'a ClusterIndex, target: ClusterKey) -> Result<Self> {
        let members = ci.get(target);
        if members.is_empty() {
            return Err(Error::NoSource {
                class: target.class,
                group: target.group,
            });
        }
        let p = selection_probability(ci, target)?;
        Ok(HeteroPools {
            target,
            members,
            other_class: ci.other_class(target),
            other_groups: ci.other_groups(target),
            p,
        })
    }

    fn propose<R: Rng + ?Sized>(&self, rng: &mut R) -> PairProposal {
        let i = self.members[rng.random_range(0..self.members.len())];
        let b = rng.random::<f64>() < self.p;
        let use_other_class = if b {
            !self.other_class.is_empty()
        } else {
            self.other_groups.is_empty()
        };
        let (pool, kind) = if use_other_class {
            (self.other_class, PairKind::IntraGroup)
        } else {
            (self.other_groups.as_slice(), PairKind::IntraClass)
        };
        let j = pool[rng.random_range(0..pool.len())];
        PairProposal {
            target: self.target,
            i,
            j,
            pair_kind: kind,
            p: self.p,
            bernoulli_draw: b,
        }
    }
}

/// Draws a generation pair for `target`: `i` uniform over the cluster, then a
/// Bernoulli draw choosing the intra-group or intra-class side, then `j`
/// uniform over that side.
pub fn propose_pair<R: Rng + ?Sized>(
    ci: &ClusterIndex,
    target: ClusterKey,
    rng: &mut R,
) -> Result<PairProposal> {
    Ok(HeteroPools::new(ci, target)?.propose(rng))
}

/// `w ~ U(0, delta)`; exactly 0 when `delta` is 0.
pub fn draw_weight<R: Rng + ?Sized>(delta: f64, rng: &mut R) -> f64 {
    delta * rng.random::<f64>()
}

/// `x_i + w (x_j - x_i) * max_knn_dist / d_ij`.
///
/// The step length is `w * max_knn_dist` regardless of how far `x_j` is, so
/// the result may lie beyond `x_j` when the neighborhood is wider than the pair.
pub fn interpolate_hetero(
    x_i: &[f64],
    x_j: &[f64],
    w: f64,
    max_knn_dist: f64,
    d_ij: f64,
) -> Result<Vec<f64>> {
    if x_i.len() != x_j.len() {
        return Err(Error::Parameter("interpolation endpoints differ in dimension".into()));
    }
    if !(d_ij > 0.0) {
        return Err(Error::DegeneratePair);
    }
    let scale = w * max_knn_dist / d_ij;
    Ok(x_i.iter().zip(x_j).map(|(a, b)| a + scale * (b - a)).collect())
}

/// `x_i + w (x_j - x_i)`.
pub fn interpolate_smote(x_i: &[f64], x_j: &[f64], w: f64) -> Result<Vec<f64>> {
    if x_i.len() != x_j.len() {
        return Err(Error::Parameter("interpolation endpoints differ in dimension".into()));
    }
    Ok(x_i.iter().zip(x_j).map(|(a, b)| a + w * (b - a)).collect())
}

/// Runs the technique selected in `cfg`.
pub fn oversample(ds: &Dataset, cfg: &OversamplerConfig) -> Result<Augmented> {
    match cfg.technique {
        Technique::None => {
            cfg.validate()?;
            let ci = partition_clusters(ds);
            finish(ds, SyntheticBatch::new(Technique::None, &ci))
        }
        Technique::Smote => oversample_smote(ds, cfg),
        Technique::Fsmote => oversample_fsmote(ds, cfg),
        Technique::Fbsmote => oversample_fbsmote(ds, cfg),
        Technique::Fadasyn => oversample_fadasyn(ds, cfg),
        Technique::HeteroFair => oversample_hetero(ds, cfg),
    }
}

fn finish(ds: &Dataset, batch: SyntheticBatch) -> Result<Augmented> {
    let dataset = ds.appended(
        batch
            .instances
            .iter()
            .map(|s| (s.features.as_slice(), s.label, s.group)),
    )?;
    Ok(Augmented {
        dataset,
        batch,
        original_n: ds.n(),
    })
}

fn pin(ds: &Dataset, cfg: &OversamplerConfig, x_new: &mut [f64], source: usize) {
    if cfg.pin_protected {
        let x_i = ds.row(source);
        for &k in &ds.meta().protected_features {
            x_new[k] = x_i[k];
        }
    }
}

/// Grows every non-empty cluster to the largest cluster size by pairing with
/// heterogeneous clusters.
pub fn oversample_hetero(ds: &Dataset, cfg: &OversamplerConfig) -> Result<Augmented> {
    cfg.validate()?;
    let ci = partition_clusters(ds);
    let mut batch = SyntheticBatch::new(Technique::HeteroFair, &ci);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let target_size = ci.max_size();
    let mut cache = NeighborCache::new(ds, cfg.k)?;

    for key in ci.keys() {
        let members = ci.get(key);
        let need = target_size - members.len();
        if need == 0 {
            continue;
        }
        if members.is_empty() {
            batch
                .warnings
                .push(format!("cluster {key} is empty; skipped"));
            continue;
        }
        let pools = match HeteroPools::new(&ci, key) {
            Ok(p) => p,
            Err(Error::HeteroUnavailable { .. }) => {
                batch.warnings.push(format!(
                    "cluster {key} has no heterogeneous clusters; generated within the cluster"
                ));
                grow_homogeneous(
                    ds,
                    cfg,
                    key,
                    members,
                    SourcePlan::Uniform(members),
                    need,
                    Technique::HeteroFair,
                    Some(Fallback::Homogeneous),
                    &mut rng,
                    &mut batch,
                )?;
                continue;
            }
            Err(e) => return Err(e),
        };

        for _ in 0..need {
            let mut attempts = 0;
            let proposal = loop {
                let prop = pools.propose(&mut rng);
                let d_ij = euclidean_unchecked(ds.row(prop.i), ds.row(prop.j));
                if d_ij > 0.0 {
                    break Ok((prop, d_ij));
                }
                attempts += 1;
                if attempts > cfg.max_pair_retries {
                    break Err(prop);
                }
            };
            let inst = match proposal {
                Ok((prop, d_ij)) => {
                    let delta = cache.local_density(prop.i);
                    let w = draw_weight(delta, &mut rng);
                    let radius = cache.max_distance(prop.i);
                    let mut x = interpolate_hetero(ds.row(prop.i), ds.row(prop.j), w, radius, d_ij)?;
                    pin(ds, cfg, &mut x, prop.i);
                    SyntheticInstance {
                        features: x,
                        label: key.class,
                        group: key.group,
                        target: key,
                        technique: Technique::HeteroFair,
                        fallback: None,
                        source: (prop.i, prop.j),
                        weight: w,
                        pair_kind: Some(prop.pair_kind),
                    }
                }
                Err(prop) => SyntheticInstance {
                    features: ds.row(prop.i).to_vec(),
                    label: key.class,
                    group: key.group,
                    target: key,
                    technique: Technique::HeteroFair,
                    fallback: Some(Fallback::Duplicate),
                    source: (prop.i, prop.i),
                    weight: 0.0,
                    pair_kind: Some(prop.pair_kind),
                },
            };
            batch.push(inst);
        }
    }
    finish(ds, batch)
}

enum SourcePlan<'a> {
    /// Draw the source uniformly from the slice for every instance.
    Uniform(&'a [usize]),
    /// Fixed number of instances per source, in order.
    Allocated(Vec<(usize, usize)>),
}

/// SMOTE interpolation inside one pool: partner drawn from the source's
/// nearest neighbors within `pool`.
#[allow(clippy::too_many_arguments)]
fn grow_homogeneous<R: Rng + ?Sized>(
    ds: &Dataset,
    cfg: &OversamplerConfig,
    key: ClusterKey,
    pool: &[usize],
    sources: SourcePlan<'_>,
    need: usize,
    technique: Technique,
    fallback: Option<Fallback>,
    rng: &mut R,
    batch: &mut SyntheticBatch,
) -> Result<()> {
    if pool.len() == 1 && need > 0 {
        batch.warnings.push(format!(
            "cluster {key} has a single instance; duplicated it {need} time(s)"
        ));
    }
    let mut neighborhoods: HashMap<usize, NeighborResult> = HashMap::new();
    let mut generate = |i: usize, rng: &mut R, batch: &mut SyntheticBatch| -> Result<()> {
        if pool.len() < 2 {
            batch.push(SyntheticInstance {
                features: ds.row(i).to_vec(),
                label: key.class,
                group: key.group,
                target: key,
                technique,
                fallback: Some(Fallback::Duplicate),
                source: (i, i),
                weight: 0.0,
                pair_kind: None,
            });
            return Ok(());
        }
        let nn = match neighborhoods.entry(i) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => e.insert(knn_within(ds, i, pool, cfg.k)?),
        };
        let j = nn.indices[rng.random_range(0..nn.len())];
        let w = rng.random::<f64>();
        let mut x = interpolate_smote(ds.row(i), ds.row(j), w)?;
        pin(ds, cfg, &mut x, i);
        batch.push(SyntheticInstance {
            features: x,
            label: key.class,
            group: key.group,
            target: key,
            technique,
            fallback,
            source: (i, j),
            weight: w,
            pair_kind: None,
        });
        Ok(())
    };
    match sources {
        SourcePlan::Uniform(from) => {
            for _ in 0..need {
                let i = from[rng.random_range(0..from.len())];
                generate(i, rng, batch)?;
            }
        }
        SourcePlan::Allocated(plan) => {
            for (i, count) in plan {
                for _ in 0..count {
                    generate(i, rng, batch)?;
                }
            }
        }
    }
    Ok(())
}

/// Classic SMOTE: grows the minority class to the majority size. Synthetic
/// instances take the group of their source instance.
pub fn oversample_smote(ds: &Dataset, cfg: &OversamplerConfig) -> Result<Augmented> {
    cfg.validate()?;
    let ci = partition_clusters(ds);
    let mut batch = SyntheticBatch::new(Technique::Smote, &ci);
    let counts = ds.class_counts();
    if counts[0] == 0 || counts[1] == 0 {
        return Err(Error::InsufficientData("SMOTE needs both classes present".into()));
    }
    let minority: u8 = if counts[1] < counts[0] { 1 } else { 0 };
    let need = counts[1 - minority as usize] - counts[minority as usize];
    if need == 0 {
        return finish(ds, batch);
    }
    let pool = ci.class_members(minority);
    if pool.len() == 1 {
        batch.warnings.push(format!(
            "minority class has a single instance; duplicated it {need} time(s)"
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut neighborhoods: HashMap<usize, NeighborResult> = HashMap::new();
    for _ in 0..need {
        let i = pool[rng.random_range(0..pool.len())];
        let key = ClusterKey::new(minority, ds.group(i));
        if pool.len() == 1 {
            batch.push(SyntheticInstance {
                features: ds.row(i).to_vec(),
                label: minority,
                group: key.group,
                target: key,
                technique: Technique::Smote,
                fallback: Some(Fallback::Duplicate),
                source: (i, i),
                weight: 0.0,
                pair_kind: None,
            });
            continue;
        }
        if let std::collections::hash_map::Entry::Vacant(slot) = neighborhoods.entry(i) {
            slot.insert(knn_within(ds, i, &pool, cfg.k)?);
        }
        let nn = &neighborhoods[&i];
        let j = nn.indices[rng.random_range(0..nn.len())];
        let w = rng.random::<f64>();
        let mut x = interpolate_smote(ds.row(i), ds.row(j), w)?;
        pin(ds, cfg, &mut x, i);
        batch.push(SyntheticInstance {
            features: x,
            label: minority,
            group: key.group,
            target: key,
            technique: Technique::Smote,
            fallback: None,
            source: (i, j),
            weight: w,
            pair_kind: None,
        });
    }
    finish(ds, batch)
}

/// Iterates clusters that need growth, skipping (with a warning) empty ones.
fn per_cluster<F>(ds: &Dataset, cfg: &OversamplerConfig, technique: Technique, mut body: F) -> Result<Augmented>
where
    F: FnMut(ClusterKey, &[usize], usize, &mut ChaCha8Rng, &mut SyntheticBatch) -> Result<()>,
{
    cfg.validate()?;
    let ci = partition_clusters(ds);
    let mut batch = SyntheticBatch::new(technique, &ci);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let target_size = ci.max_size();
    for key in ci.keys() {
        let members = ci.get(key);
        let need = target_size - members.len();
        if need == 0 {
            continue;
        }
        if members.is_empty() {
            batch
                .warnings
                .push(format!("cluster {key} is empty; skipped"));
            continue;
        }
        body(key, members, need, &mut rng, &mut batch)?;
    }
    finish(ds, batch)
}

/// SMOTE within each cluster, neighbors restricted to the cluster.
pub fn oversample_fsmote(ds: &Dataset, cfg: &OversamplerConfig) -> Result<Augmented> {
    per_cluster(ds, cfg, Technique::Fsmote, |key, members, need, rng, batch| {
        grow_homogeneous(
            ds,
            cfg,
            key,
            members,
            SourcePlan::Uniform(members),
            need,
            Technique::Fsmote,
            None,
            rng,
            batch,
        )
    })
}

/// Members of `cluster` whose whole-dataset neighborhood holds at least half,
/// but not all, opposite-class instances.
pub fn borderline_danger(cache: &mut NeighborCache<'_>, cluster: &[usize]) -> Vec<usize> {
    cluster
        .iter()
        .copied()
        .filter(|&i| {
            let (opposite, k) = cache.opposite_count(i);
            2 * opposite >= k && opposite < k
        })
        .collect()
}

/// Borderline-SMOTE within each cluster.
pub fn oversample_fbsmote(ds: &Dataset, cfg: &OversamplerConfig) -> Result<Augmented> {
    cfg.validate()?;
    let mut cache = NeighborCache::new(ds, cfg.k)?;
    per_cluster(ds, cfg, Technique::Fbsmote, |key, members, need, rng, batch| {
        let danger = borderline_danger(&mut cache, members);
        let (sources, fallback) = if danger.is_empty() {
            batch.warnings.push(format!(
                "cluster {key} has no borderline instances; sampling from the whole cluster"
            ));
            (members.to_vec(), Some(Fallback::NoDangerSet))
        } else {
            (danger, None)
        };
        grow_homogeneous(
            ds,
            cfg,
            key,
            members,
            SourcePlan::Uniform(&sources),
            need,
            Technique::Fbsmote,
            fallback,
            rng,
            batch,
        )
    })
}

/// Splits `total` proportionally to `weights`, flooring each share and giving
/// the remainder one unit at a time to the largest weights (lower position
/// first among equals). `None` when every weight is zero.
pub fn adasyn_allocation(weights: &[usize], total: usize) -> Option<Vec<usize>> {
    let sum: u128 = weights.iter().map(|&w| w as u128).sum();
    if sum == 0 {
        return None;
    }
    let mut alloc: Vec<usize> = weights
        .iter()
        .map(|&w| (total as u128 * w as u128 / sum) as usize)
        .collect();
    let residual = total - alloc.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..weights.len()).collect();
    order.sort_by(|&a, &b| weights[b].cmp(&weights[a]).then(a.cmp(&b)));
    for &pos in order.iter().take(residual) {
        alloc[pos] += 1;
    }
    Some(alloc)
}

fn uniform_allocation(n: usize, total: usize) -> Vec<usize> {
    (0..n)
        .map(|p| total / n + usize::from(p < total % n))
        .collect()
}

/// ADASYN within each cluster: sources with more opposite-class neighbors
/// produce more synthetic instances.
pub fn oversample_fadasyn(ds: &Dataset, cfg: &OversamplerConfig) -> Result<Augmented> {
    cfg.validate()?;
    let mut cache = NeighborCache::new(ds, cfg.k)?;
    per_cluster(ds, cfg, Technique::Fadasyn, |key, members, need, rng, batch| {
        let weights: Vec<usize> = members.iter().map(|&i| cache.opposite_count(i).0).collect();
        let (alloc, fallback) = match adasyn_allocation(&weights, need) {
            Some(a) => (a, None),
            None => {
                batch.warnings.push(format!(
                    "cluster {key} has no opposite-class neighbors; allocating uniformly"
                ));
                (
                    uniform_allocation(members.len(), need),
                    Some(Fallback::UniformAllocation),
                )
            }
        };
        let plan = members.iter().copied().zip(alloc).collect();
        grow_homogeneous(
            ds,
            cfg,
            key,
            members,
            SourcePlan::Allocated(plan),
            need,
            Technique::Fadasyn,
            fallback,
            rng,
            batch,
        )
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{imbalance_degrees, make_synthetic_dataset, GaussianCluster, SyntheticSpec};
    use crate::neighbors::{knn, local_density, max_knn_distance};

    fn fixture(seed: u64) -> Dataset {
        let c = |y, g, n, mx: f64, my: f64| {
            GaussianCluster::isotropic(ClusterKey::new(y, g), n, vec![mx, my], 1.0)
        };
        make_synthetic_dataset(&SyntheticSpec {
            clusters: vec![
                c(1, 0, 500, 1.0, 0.0),
                c(0, 0, 300, -1.0, 0.0),
                c(1, 1, 150, 1.0, 2.0),
                c(0, 1, 30, -1.0, 2.0),
            ],
            seed,
        })
        .unwrap()
    }

    fn small(sizes: &[(u8, usize, usize)], seed: u64) -> Dataset {
        let clusters = sizes
            .iter()
            .map(|&(y, g, n)| {
                GaussianCluster::isotropic(
                    ClusterKey::new(y, g),
                    n,
                    vec![y as f64 * 2.0, g as f64],
                    1.0,
                )
            })
            .collect();
        make_synthetic_dataset(&SyntheticSpec { clusters, seed }).unwrap()
    }

    #[test]
    fn selection_probability_formula() {
        let ds = fixture(0);
        let ci = partition_clusters(&ds);
        let p = selection_probability(&ci, ClusterKey::new(0, 1)).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
        // (1,0): H_y = C(0,0) = 300, H_g = C(1,1) = 150
        let p = selection_probability(&ci, ClusterKey::new(1, 0)).unwrap();
        assert!((p - 2.0 / 3.0).abs() < 1e-15);
        let ds = small(&[(1, 0, 30), (0, 0, 10), (1, 1, 10), (0, 1, 20)], 1);
        let ci = partition_clusters(&ds);
        assert_eq!(selection_probability(&ci, ClusterKey::new(1, 1)).unwrap(), 0.4);
        assert_eq!(selection_probability(&ci, ClusterKey::new(0, 0)).unwrap(), 0.6);
        assert_eq!(selection_probability(&ci, ClusterKey::new(1, 0)).unwrap(), 0.5);
    }

    #[test]
    fn selection_probability_unavailable() {
        let ds = small(&[(1, 0, 3), (0, 1, 3)], 1);
        let ci = partition_clusters(&ds);
        // (1,0): H_y = C(0,0) empty, H_g = C(1,1) empty
        assert!(matches!(
            selection_probability(&ci, ClusterKey::new(1, 0)),
            Err(Error::HeteroUnavailable { .. })
        ));
        // an empty target still has heterogeneous data: C(1,0) and C(0,1)
        assert_eq!(selection_probability(&ci, ClusterKey::new(1, 1)).unwrap(), 0.5);
    }

    #[test]
    fn forced_branches() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // target (1,0): H_y = C(0,0) empty, H_g = C(1,1) non-empty
        let ds = small(&[(1, 0, 5), (1, 1, 5), (0, 1, 5)], 2);
        let ci = partition_clusters(&ds);
        for _ in 0..200 {
            let p = propose_pair(&ci, ClusterKey::new(1, 0), &mut rng).unwrap();
            assert_eq!(p.pair_kind, PairKind::IntraClass);
            assert_eq!(p.p, 0.0);
            assert_eq!(ds.label(p.j), 1);
            assert_eq!(ds.group(p.j), 1);
        }
        // target (0,1): H_y = C(1,1), H_g = C(0,0) empty
        for _ in 0..200 {
            let p = propose_pair(&ci, ClusterKey::new(0, 1), &mut rng).unwrap();
            assert_eq!(p.pair_kind, PairKind::IntraGroup);
            assert_eq!(p.p, 1.0);
            assert_eq!((ds.label(p.j), ds.group(p.j)), (1, 1));
            assert_eq!((ds.label(p.i), ds.group(p.i)), (0, 1));
        }
        assert!(matches!(
            propose_pair(&ci, ClusterKey::new(0, 0), &mut rng),
            Err(Error::NoSource { .. })
        ));
    }

    #[test]
    fn weight_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            assert_eq!(draw_weight(0.0, &mut rng), 0.0);
            let w = draw_weight(1.0, &mut rng);
            assert!((0.0..=1.0).contains(&w));
        }
    }

    #[test]
    fn weight_mean_statistics() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 10_000;
        let mean = (0..n).map(|_| draw_weight(0.6, &mut rng)).sum::<f64>() / n as f64;
        // variance of U(0, 0.6) is 0.6^2 / 12
        let sigma = (0.36f64 / 12.0 / n as f64).sqrt();
        assert!((mean - 0.3).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn hetero_interpolation_examples() {
        let x = interpolate_hetero(&[0.0, 0.0], &[4.0, 0.0], 0.5, 1.0, 4.0).unwrap();
        assert_eq!(x, vec![0.5, 0.0]);
        let x = interpolate_hetero(&[1.0, 2.0], &[4.0, 0.0], 0.0, 3.0, 2.0).unwrap();
        assert_eq!(x, vec![1.0, 2.0]);
        assert!(matches!(
            interpolate_hetero(&[1.0], &[1.0], 0.5, 1.0, 0.0),
            Err(Error::DegeneratePair)
        ));
    }

    #[test]
    fn smote_interpolation_examples() {
        assert_eq!(interpolate_smote(&[0.0, 1.0], &[3.0, 5.0], 1.0).unwrap(), vec![3.0, 5.0]);
        assert_eq!(interpolate_smote(&[0.0, 0.0], &[2.0, 2.0], 0.5).unwrap(), vec![1.0, 1.0]);
        assert!(interpolate_smote(&[0.0], &[1.0, 1.0], 0.5).is_err());
    }

    #[test]
    fn hetero_generates_to_largest_cluster() {
        let ds = fixture(3);
        let aug = oversample_hetero(&ds, &OversamplerConfig::default()).unwrap();
        let b = &aug.batch;
        assert_eq!(b.generated_for(ClusterKey::new(1, 0)), 0);
        assert_eq!(b.generated_for(ClusterKey::new(0, 0)), 200);
        assert_eq!(b.generated_for(ClusterKey::new(1, 1)), 350);
        assert_eq!(b.generated_for(ClusterKey::new(0, 1)), 470);
        let ci = partition_clusters(&aug.dataset);
        assert!(ci.iter().all(|(_, v)| v.len() == 500));
        // original rows are an unchanged prefix
        assert_eq!(&aug.dataset.features()[..ds.features().len()], ds.features());
        assert_eq!(&aug.dataset.labels()[..ds.n()], ds.labels());
    }

    #[test]
    fn hetero_records_are_consistent() {
        let ds = small(&[(1, 0, 40), (0, 0, 25), (1, 1, 12), (0, 1, 6)], 5);
        let aug = oversample_hetero(&ds, &OversamplerConfig::new(Technique::HeteroFair, 5, 11)).unwrap();
        for s in &aug.batch.instances {
            assert_eq!((s.label, s.group), (s.target.class, s.target.group));
            let (i, j) = s.source;
            assert_eq!((ds.label(i), ds.group(i)), (s.target.class, s.target.group));
            match s.pair_kind.unwrap() {
                PairKind::IntraGroup => {
                    assert_ne!(ds.label(j), s.target.class);
                    assert_eq!(ds.group(j), s.target.group);
                }
                PairKind::IntraClass => {
                    assert_eq!(ds.label(j), s.target.class);
                    assert_ne!(ds.group(j), s.target.group);
                }
            }
            let delta = local_density(&ds, i, 5).unwrap();
            assert!(s.weight >= 0.0 && s.weight <= delta);
            let step = crate::neighbors::euclidean(&s.features, ds.row(i)).unwrap();
            let radius = max_knn_distance(&ds, i, 5).unwrap();
            let expect = s.weight * radius;
            assert!((step - expect).abs() <= 1e-9 * expect.max(1e-300));
        }
    }

    #[test]
    fn balanced_input_yields_empty_batch() {
        let ds = small(&[(1, 0, 7), (0, 0, 7), (1, 1, 7), (0, 1, 7)], 2);
        for t in Technique::ALL {
            let aug = oversample(&ds, &OversamplerConfig::new(t, 5, 1)).unwrap();
            assert!(aug.batch.is_empty(), "{t}");
            assert_eq!(aug.dataset, ds);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let ds = small(&[(1, 0, 40), (0, 0, 25), (1, 1, 12), (0, 1, 6)], 5);
        for t in Technique::ALL {
            let a = oversample(&ds, &OversamplerConfig::new(t, 5, 99)).unwrap();
            let b = oversample(&ds, &OversamplerConfig::new(t, 5, 99)).unwrap();
            assert_eq!(a, b);
        }
        let a = oversample_hetero(&ds, &OversamplerConfig::new(Technique::HeteroFair, 5, 1)).unwrap();
        let b = oversample_hetero(&ds, &OversamplerConfig::new(Technique::HeteroFair, 5, 2)).unwrap();
        assert_ne!(a.dataset, b.dataset);
    }

    #[test]
    fn hetero_skips_empty_and_falls_back() {
        // (0,0), (1,1), (1,2) empty: skipped. (1,0) has H_y = C(0,0) and
        // H_g = C(1,1) ∪ C(1,2), all empty
        let ds = small(&[(1, 0, 3), (0, 1, 8), (0, 2, 2)], 8);
        let aug = oversample_hetero(&ds, &OversamplerConfig::default()).unwrap();
        let ci = partition_clusters(&aug.dataset);
        assert_eq!(ci.size(ClusterKey::new(1, 0)), 8);
        assert_eq!(ci.size(ClusterKey::new(0, 2)), 8);
        assert_eq!(ci.size(ClusterKey::new(0, 0)), 0);
        assert_eq!(ci.size(ClusterKey::new(1, 1)), 0);
        let fallback = &aug.batch.clusters[&ClusterKey::new(1, 0)];
        assert_eq!(fallback.fallbacks[&Fallback::Homogeneous], 5);
        assert!(aug.batch.warnings.iter().any(|w| w.contains("empty")));
        assert!(aug
            .batch
            .instances
            .iter()
            .filter(|s| s.target == ClusterKey::new(1, 0))
            .all(|s| s.tag() == "heterofair+homogeneous"));
    }

    #[test]
    fn hetero_duplicates_when_every_pair_is_degenerate() {
        // all points coincide
        let ds = Dataset::new(vec![1.0; 6], 1, vec![1, 1, 1, 0, 1, 0], vec![0, 0, 0, 0, 1, 1], 2).unwrap();
        let aug = oversample_hetero(&ds, &OversamplerConfig::default()).unwrap();
        assert!(!aug.batch.is_empty());
        for s in &aug.batch.instances {
            assert_eq!(s.fallback, Some(Fallback::Duplicate));
            assert_eq!(s.weight, 0.0);
            assert_eq!(s.features, vec![1.0]);
        }
    }

    #[test]
    fn pinned_protected_features_follow_source() {
        let csv = "a,sex,y\n0,0,1\n1,0,1\n2,0,1\n3,0,0\n4,1,1\n5,1,0\n6,1,0\n";
        let schema = crate::dataset::DatasetSchema {
            label_column: "y".into(),
            positive_label: "1".into(),
            group_columns: vec!["sex".into()],
            feature_columns: vec!["a".into(), "sex".into()],
            delimiter: ',',
        };
        let ds = Dataset::read_csv(csv.as_bytes(), &schema).unwrap();
        for t in [Technique::HeteroFair, Technique::Fsmote, Technique::Smote] {
            let aug = oversample(&ds, &OversamplerConfig::new(t, 3, 5)).unwrap();
            for s in &aug.batch.instances {
                assert_eq!(s.features[1], s.group as f64, "{t}");
            }
        }
        let cfg = OversamplerConfig {
            pin_protected: false,
            ..OversamplerConfig::new(Technique::HeteroFair, 3, 5)
        };
        let aug = oversample(&ds, &cfg).unwrap();
        assert!(aug
            .batch
            .instances
            .iter()
            .any(|s| s.features[1] != 0.0 && s.features[1] != 1.0));
    }

    #[test]
    fn smote_balances_classes() {
        let ds = small(&[(0, 0, 500), (0, 1, 200), (1, 0, 250), (1, 1, 50)], 4);
        let aug = oversample_smote(&ds, &OversamplerConfig::new(Technique::Smote, 5, 3)).unwrap();
        assert_eq!(aug.batch.len(), 400);
        assert_eq!(aug.dataset.class_counts(), [700, 700]);
        for s in &aug.batch.instances {
            let (i, j) = s.source;
            assert_eq!(ds.label(i), 1);
            assert_eq!(ds.label(j), 1);
            assert_eq!(s.group, ds.group(i));
            for k in 0..ds.d() {
                let (lo, hi) = (ds.row(i)[k].min(ds.row(j)[k]), ds.row(i)[k].max(ds.row(j)[k]));
                assert!(s.features[k] >= lo && s.features[k] <= hi);
            }
        }
    }

    #[test]
    fn smote_single_minority_duplicates() {
        let ds = small(&[(0, 0, 4), (0, 1, 3), (1, 1, 1)], 4);
        let aug = oversample_smote(&ds, &OversamplerConfig::new(Technique::Smote, 5, 3)).unwrap();
        assert_eq!(aug.batch.len(), 6);
        assert!(aug.batch.instances.iter().all(|s| s.fallback == Some(Fallback::Duplicate)));
        assert!(!aug.batch.warnings.is_empty());
    }

    #[test]
    fn fair_baselines_balance_clusters() {
        let ds = small(&[(1, 0, 60), (0, 0, 33), (1, 1, 9), (0, 1, 2)], 6);
        for t in [Technique::Fsmote, Technique::Fbsmote, Technique::Fadasyn] {
            let aug = oversample(&ds, &OversamplerConfig::new(t, 5, 17)).unwrap();
            let degrees = imbalance_degrees(&partition_clusters(&aug.dataset));
            assert!(degrees.values().all(|&d| d == 0), "{t}: {degrees:?}");
            for s in &aug.batch.instances {
                assert_eq!((s.label, s.group), (s.target.class, s.target.group));
                let (i, j) = s.source;
                assert_eq!((ds.label(j), ds.group(j)), (ds.label(i), ds.group(i)));
            }
        }
    }

    #[test]
    fn fsmote_identical_pair_yields_duplicates() {
        let ds = Dataset::new(
            vec![0.0, 0.0, 3.0, 3.0, 5.0, 5.0, 7.0, 8.0, 9.0, 1.0, 1.0],
            1,
            vec![1, 1, 0, 0, 0, 0, 1, 1, 1, 1, 0],
            vec![0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1],
            2,
        )
        .unwrap();
        let aug = oversample_fsmote(&ds, &OversamplerConfig::new(Technique::Fsmote, 5, 1)).unwrap();
        let made: Vec<_> = aug
            .batch
            .instances
            .iter()
            .filter(|s| s.target == ClusterKey::new(1, 0))
            .collect();
        assert_eq!(made.len(), 2);
        assert!(made.iter().all(|s| s.features == vec![0.0]));
    }

    #[test]
    fn fbsmote_without_danger_falls_back() {
        // well separated classes: no instance has opposite-class neighbors
        let clusters = vec![
            GaussianCluster::isotropic(ClusterKey::new(1, 0), 30, vec![50.0, 0.0], 0.5),
            GaussianCluster::isotropic(ClusterKey::new(0, 0), 10, vec![-50.0, 0.0], 0.5),
            GaussianCluster::isotropic(ClusterKey::new(1, 1), 10, vec![50.0, 1.0], 0.5),
            GaussianCluster::isotropic(ClusterKey::new(0, 1), 20, vec![-50.0, 1.0], 0.5),
        ];
        let ds = make_synthetic_dataset(&SyntheticSpec { clusters, seed: 2 }).unwrap();
        let aug = oversample_fbsmote(&ds, &OversamplerConfig::new(Technique::Fbsmote, 5, 1)).unwrap();
        let ci = partition_clusters(&aug.dataset);
        assert!(ci.iter().all(|(_, v)| v.len() == 30));
        assert!(aug
            .batch
            .instances
            .iter()
            .all(|s| s.fallback == Some(Fallback::NoDangerSet)));
    }

    #[test]
    fn fbsmote_sources_are_borderline() {
        let ds = small(&[(1, 0, 60), (0, 0, 40), (1, 1, 20), (0, 1, 10)], 12);
        let aug = oversample_fbsmote(&ds, &OversamplerConfig::new(Technique::Fbsmote, 5, 2)).unwrap();
        for s in aug.batch.instances.iter().filter(|s| s.fallback.is_none()) {
            let nn = knn(&ds, s.source.0, 5).unwrap();
            let opp = nn.indices.iter().filter(|&&j| ds.label(j) != s.label).count();
            assert!(2 * opp >= 5 && opp < 5);
        }
    }

    #[test]
    fn adasyn_allocation_rounding() {
        // ratios 0.2 and 0.6 with K = 5
        assert_eq!(adasyn_allocation(&[1, 3], 4), Some(vec![1, 3]));
        assert_eq!(adasyn_allocation(&[0, 0, 0], 5), None);
        assert_eq!(adasyn_allocation(&[1, 1, 1], 5), Some(vec![2, 2, 1]));
        assert_eq!(adasyn_allocation(&[1, 2, 2], 6), Some(vec![1, 3, 2]));
        assert_eq!(uniform_allocation(3, 7), vec![3, 2, 2]);
    }

    #[test]
    fn fadasyn_uniform_fallback() {
        let clusters = vec![
            GaussianCluster::isotropic(ClusterKey::new(1, 0), 30, vec![50.0, 0.0], 0.5),
            GaussianCluster::isotropic(ClusterKey::new(0, 0), 7, vec![-50.0, 0.0], 0.5),
            GaussianCluster::isotropic(ClusterKey::new(1, 1), 10, vec![50.0, 1.0], 0.5),
            GaussianCluster::isotropic(ClusterKey::new(0, 1), 20, vec![-50.0, 1.0], 0.5),
        ];
        let ds = make_synthetic_dataset(&SyntheticSpec { clusters, seed: 2 }).unwrap();
        let aug = oversample_fadasyn(&ds, &OversamplerConfig::new(Technique::Fadasyn, 5, 1)).unwrap();
        assert_eq!(aug.batch.generated_for(ClusterKey::new(0, 0)), 23);
        let summary = &aug.batch.clusters[&ClusterKey::new(0, 0)];
        assert_eq!(summary.fallbacks[&Fallback::UniformAllocation], 23);
        let ci = partition_clusters(&aug.dataset);
        assert!(ci.iter().all(|(_, v)| v.len() == 30));
    }

    #[test]
    fn singleton_cluster_duplicates() {
        let ds = small(&[(1, 0, 6), (0, 0, 4), (1, 1, 3), (0, 1, 1)], 3);
        for t in [Technique::Fsmote, Technique::Fbsmote, Technique::Fadasyn] {
            let aug = oversample(&ds, &OversamplerConfig::new(t, 5, 1)).unwrap();
            let singles: Vec<_> = aug
                .batch
                .instances
                .iter()
                .filter(|s| s.target == ClusterKey::new(0, 1))
                .collect();
            assert_eq!(singles.len(), 5);
            assert!(singles.iter().all(|s| s.fallback == Some(Fallback::Duplicate)));
        }
    }

    #[test]
    fn technique_names_parse() {
        for t in Technique::ALL {
            assert_eq!(t.name().parse::<Technique>().unwrap(), t);
        }
        assert_eq!("Ours".parse::<Technique>().unwrap(), Technique::HeteroFair);
        assert!("adasyn".parse::<Technique>().is_err());
    }

    #[test]
    fn rejects_zero_k() {
        let ds = small(&[(1, 0, 6), (0, 0, 4), (1, 1, 3), (0, 1, 2)], 3);
        for t in Technique::ALL {
            assert!(oversample(&ds, &OversamplerConfig::new(t, 0, 1)).is_err());
        }
    }
}
