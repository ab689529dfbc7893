//! End-to-end flow: cluster, rank, verify each region per target label,
//! aggregate, and re-check counterexamples on domain slices.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{build_plan, PlanEntry, PlanFilters, VerificationPlan};
use crate::clustering::{
    label_guided_cluster, write_regions, ClusterParams, DistanceMetric, Region,
};
use crate::dataset::{write_row, Dataset};
use crate::error::{Error, Result};
use crate::network::Network;
use crate::verifier::{decide, slice_radius, Limits, Outcome, Query, SliceConstraint, Verdict};

pub const REPORT_JSON: &str = "report.json";
pub const REPORT_MD: &str = "report.md";
pub const VERDICTS_JSON: &str = "verdicts.json";
pub const WITNESS_DIR: &str = "witnesses";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Planes {
    Centroid,
    Maximum,
    #[default]
    Both,
}

impl std::str::FromStr for Planes {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "centroid" => Ok(Planes::Centroid),
            "maximum" => Ok(Planes::Maximum),
            "both" => Ok(Planes::Both),
            _ => Err(format!(
                "unknown plane selection {s:?} (centroid, maximum or both)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Plane {
    Centroid,
    Maximum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub cluster: ClusterParams,
    pub filters: PlanFilters,
    pub limits: Limits,
    pub fail_fast: bool,
    pub jobs: usize,
    pub slice_dims: Option<Vec<usize>>,
    pub planes: Planes,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        crate::config::RunConfig::default().pipeline()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionStatus {
    CompletelySafe,
    TargetedSafe { targets: Vec<usize> },
    HasAdversarial,
    Unresolved,
}

/// Status plus the supporting facts that hold for every status.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Aggregate {
    pub status: RegionStatus,
    /// Targets proven safe, ascending.
    pub safe_targets: Vec<usize>,
    /// Some target hit a resource limit.
    pub unresolved: bool,
}

/// Combines per-target outcomes. Depends only on the multiset of
/// `(target, outcome)` pairs, not their order.
pub fn aggregate<'a>(outcomes: impl IntoIterator<Item = (usize, &'a Outcome)>) -> Aggregate {
    let mut safe_targets = Vec::new();
    let mut any_unsafe = false;
    let mut unresolved = false;
    for (target, outcome) in outcomes {
        match outcome {
            Outcome::Safe => safe_targets.push(target),
            Outcome::Unsafe { .. } => any_unsafe = true,
            Outcome::ResourceLimit { .. } => unresolved = true,
        }
    }
    safe_targets.sort_unstable();
    safe_targets.dedup();
    let status = if any_unsafe {
        RegionStatus::HasAdversarial
    } else if !unresolved {
        RegionStatus::CompletelySafe
    } else if !safe_targets.is_empty() {
        RegionStatus::TargetedSafe {
            targets: safe_targets.clone(),
        }
    } else {
        RegionStatus::Unresolved
    };
    Aggregate {
        status,
        safe_targets,
        unresolved,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetResult {
    pub target: usize,
    pub outcome: Outcome,
    pub splits: u64,
    pub leaves: u64,
    pub root_unstable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceResult {
    pub target: usize,
    pub plane: Plane,
    pub fixed: Vec<(usize, f64)>,
    /// Radius left on the plane; `None` when the plane misses the ball.
    pub radius: Option<f64>,
    /// `None` when the slice was skipped.
    pub outcome: Option<Outcome>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionReport {
    pub region_id: usize,
    pub label: usize,
    #[serde(with = "crate::serde_inf")]
    pub density: f64,
    pub centroid: Vec<f64>,
    /// L1 radius verified around the centroid (the region's average radius).
    pub radius: f64,
    pub metric: DistanceMetric,
    /// Clustering used L2, so a safe answer covers only the inscribed L1 ball.
    pub partial_region: bool,
    /// In the order the targets were queried.
    pub results: Vec<TargetResult>,
    #[serde(flatten)]
    pub aggregate: Aggregate,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slices: Vec<SliceResult>,
}

impl RegionReport {
    pub fn status(&self) -> &RegionStatus {
        &self.aggregate.status
    }

    pub fn count(&self, pred: impl Fn(&Outcome) -> bool) -> usize {
        self.results.iter().filter(|r| pred(&r.outcome)).count()
    }
}

/// One verification call with timing, as written to `verdicts.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictRecord {
    pub region_id: usize,
    pub target: usize,
    #[serde(flatten)]
    pub outcome: Outcome,
    pub splits: u64,
    pub leaves: u64,
    pub wall_ms: u64,
}

#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub regions: Vec<Region>,
    pub plan: VerificationPlan,
    pub reports: Vec<RegionReport>,
    pub verdicts: Vec<VerdictRecord>,
}

impl PipelineOutput {
    /// Writes cluster files, `plan.json`, reports, witnesses and timings.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        write_regions(dir, &self.regions)?;
        self.plan.write(dir)?;
        write_reports(dir, &self.reports, &self.verdicts)
    }
}

pub fn run_pipeline(
    net: &Network,
    ds: &Dataset,
    config: &PipelineConfig,
) -> Result<PipelineOutput> {
    if net.input_dim() != ds.dimension() {
        return Err(Error::DimensionMismatch {
            context: "network inputs vs dataset features".into(),
            expected: net.input_dim(),
            actual: ds.dimension(),
        });
    }
    if ds.label_count() > net.label_count() {
        return Err(Error::InvalidArgument(format!(
            "dataset uses {} labels but the network has {} outputs",
            ds.label_count(),
            net.label_count()
        )));
    }
    let regions = label_guided_cluster(ds, &config.cluster)?;
    let plan = build_plan(net, &regions, &config.filters)?;
    let (reports, verdicts) = verify_plan(net, &regions, &plan, config)?;
    Ok(PipelineOutput {
        regions,
        plan,
        reports,
        verdicts,
    })
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start {jobs} workers: {e}")))
}

/// Verifies every planned region. Reports come back in plan order whatever
/// the worker count.
pub fn verify_plan(
    net: &Network,
    regions: &[Region],
    plan: &VerificationPlan,
    config: &PipelineConfig,
) -> Result<(Vec<RegionReport>, Vec<VerdictRecord>)> {
    let by_id: BTreeMap<usize, &Region> = regions.iter().map(|r| (r.id, r)).collect();
    let pool = thread_pool(config.jobs)?;
    let per_region: Vec<Result<(RegionReport, Vec<VerdictRecord>)>> = pool.install(|| {
        plan.entries
            .par_iter()
            .map(|entry| {
                let region = by_id.get(&entry.region_id).ok_or_else(|| {
                    Error::InvalidArgument(format!("plan names unknown region {}", entry.region_id))
                })?;
                verify_region(net, region, entry, config)
            })
            .collect()
    });
    let mut reports = Vec::with_capacity(per_region.len());
    let mut verdicts = Vec::new();
    for r in per_region {
        let (report, records) = r?;
        reports.push(report);
        verdicts.extend(records);
    }
    Ok((reports, verdicts))
}

fn run_query(net: &Network, region: &Region, target: usize, limits: &Limits) -> Result<Verdict> {
    let q = Query::new(
        net,
        region.centroid.clone(),
        region.r_avg,
        region.label,
        target,
    )?
    .with_limits(*limits);
    decide(&q)
}

fn verify_region(
    net: &Network,
    region: &Region,
    entry: &PlanEntry,
    config: &PipelineConfig,
) -> Result<(RegionReport, Vec<VerdictRecord>)> {
    let verdicts: Vec<(usize, Verdict)> = if config.fail_fast {
        let mut done = Vec::new();
        for &target in &entry.targets {
            let v = run_query(net, region, target, &config.limits)?;
            let stop = v.outcome.is_unsafe();
            done.push((target, v));
            if stop {
                break;
            }
        }
        done
    } else {
        entry
            .targets
            .par_iter()
            .map(|&t| run_query(net, region, t, &config.limits).map(|v| (t, v)))
            .collect::<Result<Vec<_>>>()?
    };

    let mut slices = Vec::new();
    if let Some(dims) = &config.slice_dims {
        for (target, v) in &verdicts {
            if v.outcome.is_unsafe() {
                slices.extend(reprocess_with_slices(
                    net,
                    region,
                    *target,
                    config.planes,
                    dims,
                    &config.limits,
                )?);
            }
        }
    }

    let records = verdicts
        .iter()
        .map(|(t, v)| VerdictRecord {
            region_id: region.id,
            target: *t,
            outcome: v.outcome.clone(),
            splits: v.stats.splits,
            leaves: v.stats.leaves,
            wall_ms: v.stats.wall_ms,
        })
        .collect();
    let results: Vec<TargetResult> = verdicts
        .into_iter()
        .map(|(target, v)| TargetResult {
            target,
            outcome: v.outcome,
            splits: v.stats.splits,
            leaves: v.stats.leaves,
            root_unstable: v.stats.root_unstable,
        })
        .collect();
    let aggregate = aggregate(results.iter().map(|r| (r.target, &r.outcome)));
    Ok((
        RegionReport {
            region_id: region.id,
            label: region.label,
            density: region.density,
            centroid: region.centroid.clone(),
            radius: region.r_avg,
            metric: region.metric,
            partial_region: region.metric == DistanceMetric::L2,
            results,
            aggregate,
            slices,
        },
        records,
    ))
}

/// Most frequent member tuple on `dims`; ties go to the lexicographically
/// smallest tuple.
pub fn modal_tuple(region: &Region, dims: &[usize]) -> Vec<f64> {
    let mut tuples: Vec<Vec<f64>> = region
        .members
        .iter()
        .map(|p| dims.iter().map(|&d| p.features[d]).collect())
        .collect();
    let cmp = |a: &Vec<f64>, b: &Vec<f64>| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    };
    tuples.sort_by(cmp);
    let mut best: Option<(&Vec<f64>, usize)> = None;
    let mut i = 0;
    while i < tuples.len() {
        let mut j = i + 1;
        while j < tuples.len() && cmp(&tuples[i], &tuples[j]).is_eq() {
            j += 1;
        }
        if best.is_none_or(|(_, n)| j - i > n) {
            best = Some((&tuples[i], j - i));
        }
        i = j;
    }
    best.map(|(t, _)| t.clone()).unwrap_or_default()
}

/// Re-runs a target on the centroid plane and/or the maximum plane, which
/// pin `dims` to the centroid's values or to the members' modal tuple.
pub fn reprocess_with_slices(
    net: &Network,
    region: &Region,
    target: usize,
    planes: Planes,
    dims: &[usize],
    limits: &Limits,
) -> Result<Vec<SliceResult>> {
    if dims.is_empty() {
        return Err(Error::InvalidArgument(
            "no sliceable dimensions configured".into(),
        ));
    }
    if let Some(&d) = dims.iter().find(|&&d| d >= net.input_dim()) {
        return Err(Error::InvalidArgument(format!(
            "slice dimension {d} out of range for {} inputs",
            net.input_dim()
        )));
    }
    let mut selected = Vec::new();
    if matches!(planes, Planes::Centroid | Planes::Both) {
        selected.push((
            Plane::Centroid,
            dims.iter().map(|&d| region.centroid[d]).collect::<Vec<_>>(),
        ));
    }
    if matches!(planes, Planes::Maximum | Planes::Both) {
        selected.push((Plane::Maximum, modal_tuple(region, dims)));
    }

    selected
        .into_iter()
        .map(|(plane, values)| {
            let fixed: Vec<(usize, f64)> = dims.iter().copied().zip(values).collect();
            let radius = slice_radius(region.r_avg, &region.centroid, &fixed)?;
            let Some(r) = radius else {
                return Ok(SliceResult {
                    target,
                    plane,
                    fixed,
                    radius: None,
                    outcome: None,
                    note: Some("empty slice: plane lies outside the ball".into()),
                });
            };
            let q = Query::new(
                net,
                region.centroid.clone(),
                region.r_avg,
                region.label,
                target,
            )?
            .with_slice(SliceConstraint {
                fixed: fixed.clone(),
                radius: r,
            })?
            .with_limits(*limits);
            let v = decide(&q)?;
            Ok(SliceResult {
                target,
                plane,
                fixed,
                radius: Some(r),
                outcome: Some(v.outcome),
                note: None,
            })
        })
        .collect()
}

/// 0 when everything resolved, 1 if any counterexample, else 2 if any
/// region is unresolved.
pub fn exit_code(reports: &[RegionReport]) -> i32 {
    if reports
        .iter()
        .any(|r| r.aggregate.status == RegionStatus::HasAdversarial)
    {
        1
    } else if reports.iter().any(|r| r.aggregate.unresolved) {
        2
    } else {
        0
    }
}

pub fn witness_file_name(region_id: usize, target: usize) -> String {
    format!("region{region_id}_target{target}.csv")
}

fn status_label(report: &RegionReport) -> String {
    match &report.aggregate.status {
        RegionStatus::CompletelySafe if report.partial_region => {
            "completely safe (partial region)".into()
        }
        RegionStatus::CompletelySafe => "completely safe".into(),
        RegionStatus::TargetedSafe { targets } => {
            let list: Vec<String> = targets.iter().map(usize::to_string).collect();
            format!("targeted safe [{}], unresolved", list.join(", "))
        }
        RegionStatus::HasAdversarial => "has adversarial".into(),
        RegionStatus::Unresolved => "unresolved".into(),
    }
}

pub fn render_markdown(reports: &[RegionReport]) -> String {
    let mut md = String::from("# Verification report\n\n");
    md.push_str("| region | label | density | safe | unsafe | resource limit | status |\n");
    md.push_str("|---:|---:|---:|---:|---:|---:|---|\n");
    for r in reports {
        writeln!(
            md,
            "| {} | {} | {} | {} | {} | {} | {} |",
            r.region_id,
            r.label,
            if r.density.is_infinite() {
                "inf".to_string()
            } else {
                format!("{:.4}", r.density)
            },
            r.count(Outcome::is_safe),
            r.count(Outcome::is_unsafe),
            r.count(|o| matches!(o, Outcome::ResourceLimit { .. })),
            status_label(r),
        )
        .unwrap();
    }
    let adversarial = reports
        .iter()
        .filter(|r| r.aggregate.status == RegionStatus::HasAdversarial)
        .count();
    let safe = reports
        .iter()
        .filter(|r| r.aggregate.status == RegionStatus::CompletelySafe)
        .count();
    writeln!(
        md,
        "\n{} regions verified: {safe} completely safe, {adversarial} with counterexamples.",
        reports.len()
    )
    .unwrap();
    if adversarial > 0 {
        md.push_str(
            "Counterexamples are machine-checked by forward evaluation only; \
             whether they are meaningful inputs is for a domain expert to judge.\n",
        );
    }
    md
}

/// Writes `report.json`, `report.md`, `verdicts.json` and one CSV per witness.
pub fn write_reports(
    dir: impl AsRef<Path>,
    reports: &[RegionReport],
    verdicts: &[VerdictRecord],
) -> Result<()> {
    let dir = dir.as_ref();
    let witness_dir = dir.join(WITNESS_DIR);
    std::fs::create_dir_all(&witness_dir).map_err(|e| Error::io(&witness_dir, e))?;
    let write =
        |name: &Path, text: String| std::fs::write(name, text).map_err(|e| Error::io(name, e));

    write(
        &dir.join(REPORT_JSON),
        serde_json::to_string_pretty(reports).expect("reports serialize") + "\n",
    )?;
    write(&dir.join(REPORT_MD), render_markdown(reports))?;
    write(
        &dir.join(VERDICTS_JSON),
        serde_json::to_string_pretty(verdicts).expect("verdicts serialize") + "\n",
    )?;
    for r in reports {
        for t in &r.results {
            if let Some(w) = t.outcome.witness() {
                let mut row = String::new();
                write_row(&mut row, w, None);
                write(
                    &witness_dir.join(witness_file_name(r.region_id, t.target)),
                    row,
                )?;
            }
        }
        for s in &r.slices {
            if let Some(w) = s.outcome.as_ref().and_then(Outcome::witness) {
                let mut row = String::new();
                write_row(&mut row, w, None);
                let plane = match s.plane {
                    Plane::Centroid => "centroid",
                    Plane::Maximum => "maximum",
                };
                write(
                    &witness_dir.join(format!(
                        "region{}_target{}_{plane}.csv",
                        r.region_id, s.target
                    )),
                    row,
                )?;
            }
        }
    }
    Ok(())
}

pub fn read_reports(dir: impl AsRef<Path>) -> Result<Vec<RegionReport>> {
    let path = dir.as_ref().join(REPORT_JSON);
    if !path.exists() {
        return Err(Error::MissingArtifact(path));
    }
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::LabeledPoint;

    fn rl() -> Outcome {
        Outcome::ResourceLimit {
            reason: "test".into(),
            open_nodes: 1,
        }
    }

    fn unsafe_at(x: f64) -> Outcome {
        Outcome::Unsafe { witness: vec![x] }
    }

    #[test]
    fn aggregation_rules() {
        let a = aggregate([(1, &Outcome::Safe), (2, &Outcome::Safe)]);
        assert_eq!(a.status, RegionStatus::CompletelySafe);
        assert!(!a.unresolved);

        let limit = rl();
        let a = aggregate([(1, &Outcome::Safe), (2, &limit)]);
        assert_eq!(a.status, RegionStatus::TargetedSafe { targets: vec![1] });
        assert!(a.unresolved);

        let bad = unsafe_at(0.0);
        let a = aggregate([(2, &Outcome::Safe), (1, &bad)]);
        assert_eq!(a.status, RegionStatus::HasAdversarial);
        assert_eq!(a.safe_targets, vec![2]);

        let a = aggregate([(1, &limit), (2, &limit)]);
        assert_eq!(a.status, RegionStatus::Unresolved);

        let a = aggregate([(1, &limit), (2, &bad)]);
        assert_eq!(a.status, RegionStatus::HasAdversarial);
        assert!(a.unresolved);
    }

    fn region_with(members: &[[f64; 3]]) -> Region {
        let pts = members
            .iter()
            .map(|m| LabeledPoint::new(m.to_vec(), 0))
            .collect();
        Region::from_members(1, pts, DistanceMetric::L2).unwrap()
    }

    #[test]
    fn modal_tuple_tie_break() {
        let r = region_with(&[
            [0.0, 1.0, 0.5],
            [0.0, 0.0, 1.0],
            [1.0, 1.0, 0.5],
            [1.0, 0.0, 1.0],
        ]);
        // (1, 0.5) and (0, 1) both appear twice; (0, 1) is smaller
        assert_eq!(modal_tuple(&r, &[1, 2]), vec![0.0, 1.0]);
        let r = region_with(&[[0.0, 1.0, 0.5], [0.0, 0.0, 1.0], [1.0, 1.0, 0.5]]);
        assert_eq!(modal_tuple(&r, &[1, 2]), vec![1.0, 0.5]);
    }

    #[test]
    fn exit_codes() {
        let base = RegionReport {
            region_id: 1,
            label: 0,
            density: 1.0,
            centroid: vec![0.0],
            radius: 1.0,
            metric: DistanceMetric::L1,
            partial_region: false,
            results: vec![],
            aggregate: aggregate([]),
            slices: vec![],
        };
        assert_eq!(exit_code(std::slice::from_ref(&base)), 0);
        let limit = rl();
        let mut unresolved = base.clone();
        unresolved.aggregate = aggregate([(1, &limit)]);
        assert_eq!(exit_code(&[base.clone(), unresolved.clone()]), 2);
        let bad = unsafe_at(1.0);
        let mut adv = base;
        adv.aggregate = aggregate([(1, &bad)]);
        assert_eq!(exit_code(&[unresolved, adv]), 1);
    }
}
