//! Run configuration shared by the CLI stages.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::analysis::PlanFilters;
use crate::clustering::{
    ClusterParams, DistanceMetric, Init, DEFAULT_MAX_DEPTH, DEFAULT_MAX_ITERS, DEFAULT_RESTARTS,
};
use crate::dataset::LabelColumn;
use crate::error::{Error, Result};
use crate::pipeline::{PipelineConfig, Planes};
use crate::verifier::{Limits, DEFAULT_MAX_SPLITS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub network: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub metric: DistanceMetric,
    pub seed: u64,
    pub max_iters: usize,
    pub max_depth: usize,
    pub init: Init,
    pub restarts: usize,
    pub min_members: usize,
    pub min_density: f64,
    pub top_k: usize,
    pub max_splits: u64,
    pub timeout_secs: f64,
    pub exact_recheck: bool,
    pub fail_fast: bool,
    /// Concurrent verification queries; 0 uses every core.
    pub jobs: usize,
    pub slice_dims: Option<Vec<usize>>,
    pub planes: Planes,
    pub header: bool,
    pub label_column: LabelColumn,
    /// Min-max scale features before clustering.
    pub scale: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let filters = PlanFilters::default();
        Self {
            network: None,
            dataset: None,
            out_dir: PathBuf::from("deepsafe-out"),
            metric: DistanceMetric::L2,
            seed: 0,
            max_iters: DEFAULT_MAX_ITERS,
            max_depth: DEFAULT_MAX_DEPTH,
            init: Init::Random,
            restarts: DEFAULT_RESTARTS,
            min_members: filters.min_members,
            min_density: filters.min_density,
            top_k: filters.top_k,
            max_splits: DEFAULT_MAX_SPLITS,
            timeout_secs: 12.0 * 3600.0,
            exact_recheck: false,
            fail_fast: false,
            jobs: 0,
            slice_dims: None,
            planes: Planes::Both,
            header: false,
            label_column: LabelColumn::Last,
            scale: false,
        }
    }
}

impl RunConfig {
    /// Reads a `.toml` or `.json` file; missing keys keep their defaults.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ctx = path.display().to_string();
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => serde_json::from_str(&text).map_err(|e| Error::parse(ctx, e)),
            _ => toml::from_str(&text).map_err(|e| Error::parse(ctx, e)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1");
        }
        if self.restarts == 0 {
            return bad("restarts must be at least 1");
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1");
        }
        if !(self.min_density >= 0.0) {
            return bad("min_density must be nonnegative");
        }
        if !(self.timeout_secs > 0.0) || !self.timeout_secs.is_finite() {
            return bad("timeout_secs must be positive");
        }
        if let Some(dims) = &self.slice_dims {
            if dims.is_empty() {
                return bad("slice_dims must not be empty when given");
            }
            let mut sorted = dims.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != dims.len() {
                return bad("slice_dims contains duplicates");
            }
        }
        Ok(())
    }

    pub fn cluster_params(&self) -> ClusterParams {
        ClusterParams {
            metric: self.metric,
            seed: self.seed,
            max_iters: self.max_iters,
            max_depth: self.max_depth,
            init: self.init,
            restarts: self.restarts,
        }
    }

    pub fn filters(&self) -> PlanFilters {
        PlanFilters {
            min_members: self.min_members,
            min_density: self.min_density,
            top_k: self.top_k,
        }
    }

    pub fn limits(&self) -> Limits {
        Limits {
            max_splits: self.max_splits,
            timeout: Duration::from_secs_f64(self.timeout_secs),
            exact_recheck: self.exact_recheck,
        }
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            cluster: self.cluster_params(),
            filters: self.filters(),
            limits: self.limits(),
            fail_fast: self.fail_fast,
            jobs: self.jobs,
            slice_dims: self.slice_dims.clone(),
            planes: self.planes,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_mirror_module_defaults() {
        let c = RunConfig::default();
        assert_eq!(c.top_k, 40);
        assert_eq!(c.min_members, 2);
        assert_eq!(c.max_depth, 32);
        assert_eq!(c.limits().max_splits, 1_000_000);
        assert_eq!(c.limits().timeout, Duration::from_secs(43_200));
        c.validate().unwrap();
    }

    #[test]
    fn toml_and_json_files() {
        let dir = tempfile::tempdir().unwrap();
        let toml_path = dir.path().join("run.toml");
        std::fs::write(
            &toml_path,
            "metric = \"l1\"\ntop_k = 5\nslice_dims = [2, 3, 4]\nlabel_column = 0\n",
        )
        .unwrap();
        let c = RunConfig::from_file(&toml_path).unwrap();
        assert_eq!(c.metric, DistanceMetric::L1);
        assert_eq!(c.top_k, 5);
        assert_eq!(c.slice_dims, Some(vec![2, 3, 4]));
        assert_eq!(c.label_column, LabelColumn::Index(0));
        assert_eq!(c.seed, 0);

        let json_path = dir.path().join("run.json");
        std::fs::write(&json_path, r#"{"fail_fast": true, "label_column": "last"}"#).unwrap();
        let c = RunConfig::from_file(&json_path).unwrap();
        assert!(c.fail_fast);
        assert_eq!(c.label_column, LabelColumn::Last);

        std::fs::write(&json_path, r#"{"no_such_key": 1}"#).unwrap();
        assert!(RunConfig::from_file(&json_path).is_err());
    }

    #[test]
    fn validation_rejects_out_of_range_values() {
        let bad = [
            RunConfig {
                timeout_secs: 0.0,
                ..RunConfig::default()
            },
            RunConfig {
                slice_dims: Some(vec![1, 1]),
                ..RunConfig::default()
            },
            RunConfig {
                max_depth: 0,
                ..RunConfig::default()
            },
            RunConfig {
                restarts: 0,
                ..RunConfig::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
