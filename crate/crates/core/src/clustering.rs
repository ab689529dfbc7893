//! Label-guided kMeans.
//!
//! Plain Lloyd iteration groups points by proximity only. [`label_guided_cluster`]
//! starts with one cluster per label and keeps re-splitting any cluster that
//! still mixes labels, with `k` set to the number of labels inside it, until
//! every cluster is label-pure. Each pure cluster becomes a [`Region`].

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{write_row, Dataset, LabeledPoint};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_DEPTH: usize = 32;
pub const DEFAULT_MAX_ITERS: usize = 100;
pub const DEFAULT_RESTARTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMetric {
    L1,
    #[default]
    L2,
}

impl DistanceMetric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            DistanceMetric::L1 => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            DistanceMetric::L2 => a
                .iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt(),
        }
    }
}

impl fmt::Display for DistanceMetric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DistanceMetric::L1 => "l1",
            DistanceMetric::L2 => "l2",
        })
    }
}

impl FromStr for DistanceMetric {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" | "manhattan" => Ok(DistanceMetric::L1),
            "l2" | "euclidean" => Ok(DistanceMetric::L2),
            _ => Err(format!("unknown metric {s:?} (expected l1 or l2)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Init {
    /// `k` distinct points drawn uniformly.
    #[default]
    Random,
    PlusPlus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansParams {
    pub metric: DistanceMetric,
    pub seed: u64,
    pub max_iters: usize,
    pub init: Init,
    /// Independent Lloyd runs; the one with the lowest final cost wins.
    pub restarts: usize,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self {
            metric: DistanceMetric::L2,
            seed: 0,
            max_iters: DEFAULT_MAX_ITERS,
            init: Init::Random,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub centroid: Vec<f64>,
    /// Indices into the input point slice.
    pub members: Vec<usize>,
}

/// Result of one Lloyd run, with the within-cluster sum of squared metric
/// distances recorded after every assignment step.
#[derive(Debug, Clone)]
pub struct KMeansRun {
    pub clusters: Vec<Cluster>,
    pub iterations: usize,
    pub sse_history: Vec<f64>,
}

/// Best of `params.restarts` Lloyd runs, each seeded from `params.seed`.
pub fn kmeans(points: &[&[f64]], k: usize, params: &KMeansParams) -> Result<Vec<Cluster>> {
    let mut best: Option<KMeansRun> = None;
    for r in 0..params.restarts.max(1) {
        let run_params = KMeansParams {
            seed: child_seed(params.seed, r),
            ..*params
        };
        let run = kmeans_traced(points, k, &run_params)?;
        let cost = run.final_cost();
        if best.as_ref().is_none_or(|b| cost < b.final_cost()) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one run").clusters)
}

impl KMeansRun {
    pub fn final_cost(&self) -> f64 {
        self.sse_history.last().copied().unwrap_or(0.0)
    }
}

/// One Lloyd run. Empty clusters are dropped, so fewer than `k` clusters
/// may come back. Assignment ties go to the lowest cluster index.
pub fn kmeans_traced(points: &[&[f64]], k: usize, params: &KMeansParams) -> Result<KMeansRun> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if k > points.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} exceeds the {} points",
            points.len()
        )));
    }
    let dim = points[0].len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut centroids = match params.init {
        Init::Random => init_random(points, k, &mut rng),
        Init::PlusPlus => init_plus_plus(points, k, params.metric, &mut rng),
    };

    let metric = params.metric;
    let mut assignment = assign(points, &centroids, metric);
    let mut sse_history = vec![sse(points, &centroids, &assignment, metric)];
    let mut iterations = 0;
    while iterations < params.max_iters {
        iterations += 1;
        let (next, remap) = update_centroids(points, &assignment, centroids.len(), dim);
        centroids = next;
        for a in assignment.iter_mut() {
            *a = remap[*a].expect("assigned cluster is nonempty");
        }
        let reassigned = assign(points, &centroids, metric);
        sse_history.push(sse(points, &centroids, &reassigned, metric));
        if reassigned == assignment {
            break;
        }
        assignment = reassigned;
    }

    let (centroids, remap) = update_centroids(points, &assignment, centroids.len(), dim);
    let mut clusters: Vec<Cluster> = centroids
        .into_iter()
        .map(|centroid| Cluster {
            centroid,
            members: Vec::new(),
        })
        .collect();
    for (i, a) in assignment.iter().enumerate() {
        let c = remap[*a].expect("assigned cluster is nonempty");
        clusters[c].members.push(i);
    }
    Ok(KMeansRun {
        clusters,
        iterations,
        sse_history,
    })
}

fn init_random(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.shuffle(rng);
    let mut seen = BTreeSet::new();
    let mut centroids = Vec::with_capacity(k);
    for i in order {
        if seen.insert(bits(points[i])) {
            centroids.push(points[i].to_vec());
            if centroids.len() == k {
                break;
            }
        }
    }
    centroids
}

fn init_plus_plus(
    points: &[&[f64]],
    k: usize,
    metric: DistanceMetric,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.gen_range(0..points.len())].to_vec()];
    while centroids.len() < k {
        let weights: Vec<f64> = points
            .iter()
            .map(|p| {
                centroids
                    .iter()
                    .map(|c| metric.distance(p, c).powi(2))
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            // every point coincides with a chosen centroid
            break;
        }
        let mut target = rng.gen::<f64>() * total;
        let mut pick = points.len() - 1;
        for (i, w) in weights.iter().enumerate() {
            if *w > 0.0 && target < *w {
                pick = i;
                break;
            }
            target -= w;
        }
        if weights[pick] == 0.0 {
            pick = weights.iter().rposition(|w| *w > 0.0).unwrap();
        }
        centroids.push(points[pick].to_vec());
    }
    centroids
}

fn assign(points: &[&[f64]], centroids: &[Vec<f64>], metric: DistanceMetric) -> Vec<usize> {
    points
        .iter()
        .map(|p| {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (c, centroid) in centroids.iter().enumerate() {
                let d = metric.distance(p, centroid);
                if d < best_d {
                    best = c;
                    best_d = d;
                }
            }
            best
        })
        .collect()
}

/// Member means for nonempty clusters, plus the old-to-new index map.
fn update_centroids(
    points: &[&[f64]],
    assignment: &[usize],
    k: usize,
    dim: usize,
) -> (Vec<Vec<f64>>, Vec<Option<usize>>) {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignment) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p.iter()) {
            *s += v;
        }
    }
    let mut remap = vec![None; k];
    let mut centroids = Vec::with_capacity(k);
    for (c, (sum, count)) in sums.into_iter().zip(counts).enumerate() {
        if count == 0 {
            continue;
        }
        remap[c] = Some(centroids.len());
        centroids.push(sum.into_iter().map(|s| s / count as f64).collect());
    }
    (centroids, remap)
}

fn sse(
    points: &[&[f64]],
    centroids: &[Vec<f64>],
    assignment: &[usize],
    metric: DistanceMetric,
) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(p, &a)| metric.distance(p, &centroids[a]).powi(2))
        .sum()
}

fn bits(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| x.to_bits()).collect()
}

/// Seed for the `child`-th sub-cluster, independent of evaluation order.
pub fn child_seed(parent: u64, child: usize) -> u64 {
    splitmix64(parent ^ splitmix64(child as u64 + 1))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Centroid, radii and density of a set of points.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    pub centroid: Vec<f64>,
    pub r_max: f64,
    pub r_avg: f64,
    /// `n / r_avg`, or `+inf` when `r_avg == 0`.
    pub density: f64,
}

pub fn region_geometry(members: &[LabeledPoint], metric: DistanceMetric) -> Result<Geometry> {
    let Some(first) = members.first() else {
        return Err(Error::InvalidArgument("region has no members".into()));
    };
    let n = members.len() as f64;
    let mut centroid = vec![0.0; first.features.len()];
    for p in members {
        for (c, v) in centroid.iter_mut().zip(&p.features) {
            *c += v;
        }
    }
    centroid.iter_mut().for_each(|c| *c /= n);
    let distances: Vec<f64> = members
        .iter()
        .map(|p| metric.distance(&p.features, &centroid))
        .collect();
    let r_max = distances.iter().cloned().fold(0.0, f64::max);
    let r_avg = (distances.iter().sum::<f64>() / n).min(r_max);
    let density = if r_avg > 0.0 {
        n / r_avg
    } else {
        f64::INFINITY
    };
    Ok(Geometry {
        centroid,
        r_max,
        r_avg,
        density,
    })
}

/// A label-pure cluster treated as a candidate safe region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: usize,
    pub label: usize,
    pub centroid: Vec<f64>,
    pub r_max: f64,
    pub r_avg: f64,
    #[serde(with = "crate::serde_inf")]
    pub density: f64,
    pub metric: DistanceMetric,
    #[serde(skip)]
    pub members: Vec<LabeledPoint>,
}

impl Region {
    pub fn from_members(
        id: usize,
        members: Vec<LabeledPoint>,
        metric: DistanceMetric,
    ) -> Result<Self> {
        let geometry = region_geometry(&members, metric)?;
        let label = members[0].label;
        if members.iter().any(|p| p.label != label) {
            return Err(Error::InvalidArgument(format!("region {id} mixes labels")));
        }
        Ok(Region {
            id,
            label,
            centroid: geometry.centroid,
            r_max: geometry.r_max,
            r_avg: geometry.r_avg,
            density: geometry.density,
            metric,
            members,
        })
    }

    pub fn member_count(&self) -> usize {
        self.members.len()
    }

    pub fn is_pure(&self) -> bool {
        self.members.iter().all(|p| p.label == self.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClusterParams {
    pub metric: DistanceMetric,
    pub seed: u64,
    pub max_iters: usize,
    pub max_depth: usize,
    pub init: Init,
    pub restarts: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        Self {
            metric: DistanceMetric::L2,
            seed: 0,
            max_iters: DEFAULT_MAX_ITERS,
            max_depth: DEFAULT_MAX_DEPTH,
            init: Init::Random,
            restarts: DEFAULT_RESTARTS,
        }
    }
}

struct Refined {
    pure: Vec<Vec<usize>>,
    impure: Vec<String>,
}

/// Recursively splits the dataset until every cluster carries a single label.
///
/// Regions are numbered from 1 in depth-first order of the split tree.
pub fn label_guided_cluster(ds: &Dataset, params: &ClusterParams) -> Result<Vec<Region>> {
    if params.max_depth == 0 {
        return Err(Error::InvalidArgument("max_depth must be positive".into()));
    }
    check_conflicting_duplicates(ds)?;
    let all: Vec<usize> = (0..ds.len()).collect();
    let refined = refine(ds, &all, "".to_string(), 1, params.seed, params)?;
    if !refined.impure.is_empty() {
        return Err(Error::ImpureClusters {
            max_depth: params.max_depth,
            impure: refined.impure,
        });
    }
    refined
        .pure
        .into_iter()
        .enumerate()
        .map(|(i, idx)| {
            let members = idx.into_iter().map(|j| ds.points()[j].clone()).collect();
            Region::from_members(i + 1, members, params.metric)
        })
        .collect()
}

fn unique_labels(ds: &Dataset, subset: &[usize]) -> usize {
    subset
        .iter()
        .map(|&i| ds.points()[i].label)
        .collect::<BTreeSet<_>>()
        .len()
}

fn refine(
    ds: &Dataset,
    subset: &[usize],
    path: String,
    depth: usize,
    seed: u64,
    params: &ClusterParams,
) -> Result<Refined> {
    let k = unique_labels(ds, subset);
    if k == 1 {
        return Ok(Refined {
            pure: vec![subset.to_vec()],
            impure: Vec::new(),
        });
    }
    let features: Vec<&[f64]> = subset
        .iter()
        .map(|&i| ds.points()[i].features.as_slice())
        .collect();
    let kparams = KMeansParams {
        metric: params.metric,
        seed,
        max_iters: params.max_iters,
        init: params.init,
        restarts: params.restarts,
    };
    let clusters = kmeans(&features, k, &kparams)?;

    let children: Vec<Result<Refined>> = clusters
        .par_iter()
        .enumerate()
        .map(|(i, cluster)| {
            let members: Vec<usize> = cluster.members.iter().map(|&m| subset[m]).collect();
            let child_path = if path.is_empty() {
                format!("{}", i + 1)
            } else {
                format!("{path}.{}", i + 1)
            };
            if unique_labels(ds, &members) == 1 {
                Ok(Refined {
                    pure: vec![members],
                    impure: Vec::new(),
                })
            } else if depth >= params.max_depth {
                Ok(Refined {
                    pure: Vec::new(),
                    impure: vec![child_path],
                })
            } else {
                refine(
                    ds,
                    &members,
                    child_path,
                    depth + 1,
                    child_seed(seed, i),
                    params,
                )
            }
        })
        .collect();

    let mut out = Refined {
        pure: Vec::new(),
        impure: Vec::new(),
    };
    for child in children {
        let child = child?;
        out.pure.extend(child.pure);
        out.impure.extend(child.impure);
    }
    Ok(out)
}

fn check_conflicting_duplicates(ds: &Dataset) -> Result<()> {
    let mut seen: HashMap<Vec<u64>, (usize, usize)> = HashMap::new();
    for (i, p) in ds.points().iter().enumerate() {
        match seen.get(&bits(&p.features)) {
            Some(&(j, label)) if label != p.label => {
                return Err(Error::ConflictingDuplicates {
                    cluster: format!("points {j} and {i}"),
                    labels: vec![label, p.label],
                })
            }
            Some(_) => {}
            None => {
                seen.insert(bits(&p.features), (i, p.label));
            }
        }
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct RegionManifestEntry {
    id: usize,
    label: usize,
    r_max: f64,
    r_avg: f64,
    #[serde(with = "crate::serde_inf")]
    density: f64,
    member_count: usize,
    metric: DistanceMetric,
}

pub const REGIONS_MANIFEST: &str = "regions.json";

pub fn cluster_file_name(id: usize) -> String {
    format!("clusterFinal{id}.csv")
}

/// Writes `clusterFinal<ID>.csv` (centroid row, then member rows with labels)
/// and the `regions.json` manifest.
pub fn write_regions(dir: impl AsRef<Path>, regions: &[Region]) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut manifest = Vec::with_capacity(regions.len());
    for region in regions {
        let mut text = String::new();
        write_row(&mut text, &region.centroid, None);
        for p in &region.members {
            write_row(&mut text, &p.features, Some(p.label));
        }
        let path = dir.join(cluster_file_name(region.id));
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        manifest.push(RegionManifestEntry {
            id: region.id,
            label: region.label,
            r_max: region.r_max,
            r_avg: region.r_avg,
            density: region.density,
            member_count: region.members.len(),
            metric: region.metric,
        });
    }
    let path = dir.join(REGIONS_MANIFEST);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}

pub fn read_regions(dir: impl AsRef<Path>) -> Result<Vec<Region>> {
    let dir = dir.as_ref();
    let path = dir.join(REGIONS_MANIFEST);
    if !path.exists() {
        return Err(Error::MissingArtifact(path));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Vec<RegionManifestEntry> =
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))?;
    manifest
        .into_iter()
        .map(|entry| {
            let path = dir.join(cluster_file_name(entry.id));
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            let mut lines = text.lines().filter(|l| !l.trim().is_empty());
            let parse_row = |line: &str| -> Result<Vec<f64>> {
                line.split(',')
                    .map(|c| {
                        c.trim()
                            .parse::<f64>()
                            .map_err(|e| Error::parse(path.display().to_string(), e))
                    })
                    .collect()
            };
            let centroid = parse_row(lines.next().ok_or_else(|| {
                Error::parse(path.display().to_string(), "missing centroid row")
            })?)?;
            let members = lines
                .map(|line| {
                    let mut row = parse_row(line)?;
                    let label = row.pop().unwrap_or(f64::NAN);
                    if row.len() != centroid.len() || label < 0.0 || label.fract() != 0.0 {
                        return Err(Error::parse(
                            path.display().to_string(),
                            format!("malformed member row {line:?}"),
                        ));
                    }
                    Ok(LabeledPoint::new(row, label as usize))
                })
                .collect::<Result<Vec<_>>>()?;
            if members.len() != entry.member_count {
                return Err(Error::parse(
                    path.display().to_string(),
                    format!(
                        "{} members, manifest says {}",
                        members.len(),
                        entry.member_count
                    ),
                ));
            }
            Ok(Region {
                id: entry.id,
                label: entry.label,
                centroid,
                r_max: entry.r_max,
                r_avg: entry.r_avg,
                density: entry.density,
                metric: entry.metric,
                members,
            })
        })
        .collect()
}
