//! Region ranking and target-label ordering.

use std::cmp::Ordering;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::Region;
use crate::error::{Error, Result};
use crate::network::Network;

pub const DEFAULT_MIN_MEMBERS: usize = 2;
pub const DEFAULT_TOP_K: usize = 40;
pub const PLAN_FILE: &str = "plan.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanFilters {
    pub min_members: usize,
    pub min_density: f64,
    pub top_k: usize,
}

impl Default for PlanFilters {
    fn default() -> Self {
        Self {
            min_members: DEFAULT_MIN_MEMBERS,
            min_density: 0.0,
            top_k: DEFAULT_TOP_K,
        }
    }
}

/// Density descending, then more members, then lower id.
fn density_order(a: &Region, b: &Region) -> Ordering {
    b.density
        .total_cmp(&a.density)
        .then_with(|| b.member_count().cmp(&a.member_count()))
        .then_with(|| a.id.cmp(&b.id))
}

/// Densest regions first, after dropping those below the thresholds.
pub fn rank_regions<'a>(regions: &'a [Region], filters: &PlanFilters) -> Vec<&'a Region> {
    let mut ranked: Vec<&Region> = regions
        .iter()
        .filter(|r| r.member_count() >= filters.min_members && r.density >= filters.min_density)
        .collect();
    ranked.sort_by(|a, b| density_order(a, b));
    ranked.truncate(filters.top_k);
    ranked
}

/// Labels other than `label`, highest score first; ties to the lower index.
pub fn order_by_scores(scores: &[f64], label: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).filter(|&l| l != label).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

pub fn target_label_order(net: &Network, region: &Region) -> Result<Vec<usize>> {
    if region.label >= net.label_count() {
        return Err(Error::InvalidArgument(format!(
            "region {} has label {} but the network has {} labels",
            region.id,
            region.label,
            net.label_count()
        )));
    }
    let scores = net.evaluate(&region.centroid)?;
    Ok(order_by_scores(scores.as_slice(), region.label))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub region_id: usize,
    pub label: usize,
    #[serde(with = "crate::serde_inf")]
    pub density: f64,
    pub targets: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationPlan {
    pub filters: PlanFilters,
    pub entries: Vec<PlanEntry>,
}

impl VerificationPlan {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let path = dir.as_ref().join(PLAN_FILE);
        let json = serde_json::to_string_pretty(self).expect("plan serializes");
        std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let path = dir.as_ref().join(PLAN_FILE);
        if !path.exists() {
            return Err(Error::MissingArtifact(path));
        }
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
    }
}

/// Ranks regions and orders each one's targets by centroid score.
///
/// Regions with zero average radius are left out: they have no ball to verify.
pub fn build_plan(
    net: &Network,
    regions: &[Region],
    filters: &PlanFilters,
) -> Result<VerificationPlan> {
    let usable: Vec<Region> = regions.iter().filter(|r| r.r_avg > 0.0).cloned().collect();
    let entries = rank_regions(&usable, filters)
        .into_iter()
        .map(|r| {
            Ok(PlanEntry {
                region_id: r.id,
                label: r.label,
                density: r.density,
                targets: target_label_order(net, r)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VerificationPlan {
        filters: *filters,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clustering::DistanceMetric;
    use crate::dataset::LabeledPoint;
    use crate::network::{Activation, Layer};

    fn region(id: usize, density: f64, members: usize) -> Region {
        Region {
            id,
            label: 0,
            centroid: vec![0.0],
            r_max: 1.0,
            r_avg: 1.0,
            density,
            metric: DistanceMetric::L2,
            members: vec![LabeledPoint::new(vec![0.0], 0); members],
        }
    }

    #[test]
    fn density_ties_prefer_more_members() {
        let regions = vec![region(1, 5.0, 3), region(2, 9.0, 4), region(3, 9.0, 2)];
        let ids: Vec<usize> = rank_regions(&regions, &PlanFilters::default())
            .iter()
            .map(|r| r.id)
            .collect();
        assert_eq!(ids, vec![2, 3, 1]);

        let regions = vec![region(4, 9.0, 3), region(2, 9.0, 3)];
        let ids: Vec<usize> = rank_regions(&regions, &PlanFilters::default())
            .iter()
            .map(|r| r.id)
            .collect();
        assert_eq!(ids, vec![2, 4]);
    }

    #[test]
    fn top_k_zero_is_empty() {
        let regions = vec![region(1, 5.0, 3)];
        let filters = PlanFilters {
            top_k: 0,
            ..Default::default()
        };
        assert!(rank_regions(&regions, &filters).is_empty());
    }

    #[test]
    fn singletons_filtered_by_default() {
        let regions = vec![region(1, f64::INFINITY, 1), region(2, 1.0, 2)];
        let ids: Vec<usize> = rank_regions(&regions, &PlanFilters::default())
            .iter()
            .map(|r| r.id)
            .collect();
        assert_eq!(ids, vec![2]);
        let all = PlanFilters {
            min_members: 1,
            ..Default::default()
        };
        assert_eq!(rank_regions(&regions, &all)[0].id, 1);
    }

    #[test]
    fn forty_densest_of_sixty() {
        let regions: Vec<Region> = (1..=60)
            .map(|i| region(i, (i * 7 % 61) as f64, 2))
            .collect();
        let plan = rank_regions(&regions, &PlanFilters::default());
        assert_eq!(plan.len(), 40);
        assert!(plan.windows(2).all(|w| w[0].density >= w[1].density));
        let cutoff = plan.last().unwrap().density;
        assert_eq!(regions.iter().filter(|r| r.density >= cutoff).count(), 40);
    }

    #[test]
    fn score_ordering() {
        assert_eq!(order_by_scores(&[10.0, 3.0, 7.0], 0), vec![2, 1]);
        assert_eq!(order_by_scores(&[1.0, 9.0], 1), vec![0]);
        assert_eq!(order_by_scores(&[2.0, 4.0, 4.0, 0.0], 3), vec![1, 2, 0]);
    }

    #[test]
    fn target_order_uses_centroid_scores() {
        let layer = Layer::new(
            vec![vec![1.0], vec![-1.0], vec![0.5]],
            vec![0.0, 0.0, 0.0],
            Activation::Identity,
        )
        .unwrap();
        let net = Network::new(1, vec![layer], None).unwrap();
        let mut r = region(1, 1.0, 2);
        r.centroid = vec![2.0]; // scores (2, -2, 1)
        r.label = 1;
        assert_eq!(target_label_order(&net, &r).unwrap(), vec![0, 2]);
        r.label = 7;
        assert!(target_label_order(&net, &r).is_err());
    }
}
