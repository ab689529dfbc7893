//! C interface to `deepsafe`.
//!
//! Objects cross the boundary as opaque handles created by a `*_load` or
//! constructor function and released with the matching `*_free`. Every
//! fallible function returns a [`DsStatus`]; on failure a description is
//! available from [`ds_last_error`] on the same thread until the next failing
//! call. Output pointers are written only on success. Panics are caught and
//! reported as [`DsStatus::Panic`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::time::Duration;

use deepsafe::clustering::{label_guided_cluster, ClusterParams, DistanceMetric, Region};
use deepsafe::dataset::{load_dataset, Dataset, LabelColumn};
use deepsafe::network::{load_network, Network};
use deepsafe::pipeline::{exit_code, run_pipeline, PipelineConfig};
use deepsafe::verifier::{decide, slice_radius, Limits, Outcome, Query};
use deepsafe::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    InvalidArgument = 5,
    DimensionMismatch = 6,
    ImpureClusters = 7,
    Solver = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsMetric {
    L1 = 1,
    L2 = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsOutcome {
    Safe = 0,
    Unsafe = 1,
    ResourceLimit = 2,
}

/// Per-query resource limits. A timeout of zero or less means the default.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DsLimits {
    pub max_splits: u64,
    pub timeout_secs: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct DsRegionInfo {
    pub id: usize,
    pub label: usize,
    pub member_count: usize,
    pub dimension: usize,
    pub r_max: f64,
    pub r_avg: f64,
    /// Positive infinity when `r_avg` is zero.
    pub density: f64,
}

pub struct DsNetwork(Network);
pub struct DsDataset(Dataset);
pub struct DsRegions(Vec<Region>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(DsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } | Error::MissingArtifact(_) => DsStatus::Io,
            Error::Parse { .. } | Error::InvalidNetwork(_) | Error::InvalidDataset(_) => {
                DsStatus::Parse
            }
            Error::DimensionMismatch { .. } => DsStatus::DimensionMismatch,
            Error::ImpureClusters { .. } | Error::ConflictingDuplicates { .. } => {
                DsStatus::ImpureClusters
            }
            Error::Solver(_) | Error::WitnessValidation(_) => DsStatus::Solver,
            _ => DsStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail<T>(status: DsStatus, msg: impl Into<String>) -> Result<T, Failure> {
    Err(Failure(status, msg.into()))
}

/// Runs `f`, translating errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            DsStatus::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| Failure(DsStatus::NullPointer, format!("{what} is null")))
}

unsafe fn as_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return fail(DsStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(DsStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn as_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return fail(DsStatus::NullPointer, format!("{what} is null"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return fail(DsStatus::NullPointer, format!("{what} is null"));
    }
    out.write(value);
    Ok(())
}

unsafe fn copy_to(buf: *mut f64, len: usize, values: &[f64], what: &str) -> Result<(), Failure> {
    if len < values.len() {
        return fail(
            DsStatus::BufferTooSmall,
            format!("{what} holds {len} values, {} needed", values.len()),
        );
    }
    if values.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return fail(DsStatus::NullPointer, format!("{what} is null"));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

/// Message of the last failed call on this thread, or null if none. The
/// pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn ds_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a network from a JSON file.
#[no_mangle]
pub unsafe extern "C" fn ds_network_load(
    path: *const c_char,
    out: *mut *mut DsNetwork,
) -> DsStatus {
    guard(|| {
        let path = as_str(path, "path")?;
        let net = load_network(path)?;
        write_out(out, Box::into_raw(Box::new(DsNetwork(net))), "out")
    })
}

/// Parses a network from JSON text.
#[no_mangle]
pub unsafe extern "C" fn ds_network_from_json(
    json: *const c_char,
    out: *mut *mut DsNetwork,
) -> DsStatus {
    guard(|| {
        let net = Network::from_json_str(as_str(json, "json")?)?;
        write_out(out, Box::into_raw(Box::new(DsNetwork(net))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn ds_network_free(net: *mut DsNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Input width, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ds_network_input_dim(net: *const DsNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.input_dim())
}

/// Number of output labels, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn ds_network_label_count(net: *const DsNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.0.label_count())
}

/// Writes the output scores for `x` into `scores`, which must hold at least
/// `ds_network_label_count` values.
#[no_mangle]
pub unsafe extern "C" fn ds_network_evaluate(
    net: *const DsNetwork,
    x: *const f64,
    x_len: usize,
    scores: *mut f64,
    scores_len: usize,
) -> DsStatus {
    guard(|| {
        let net = &as_ref(net, "net")?.0;
        let s = net.evaluate(as_slice(x, x_len, "x")?)?;
        copy_to(scores, scores_len, s.as_slice(), "scores")
    })
}

/// Highest-scoring label for `x`; ties go to the lowest index.
#[no_mangle]
pub unsafe extern "C" fn ds_network_predicted_label(
    net: *const DsNetwork,
    x: *const f64,
    x_len: usize,
    out_label: *mut usize,
) -> DsStatus {
    guard(|| {
        let net = &as_ref(net, "net")?.0;
        let label = net.predicted_label(as_slice(x, x_len, "x")?)?;
        write_out(out_label, label, "out_label")
    })
}

/// Loads a CSV dataset. A negative `label_column` selects the last column.
#[no_mangle]
pub unsafe extern "C" fn ds_dataset_load(
    path: *const c_char,
    header: bool,
    label_column: i64,
    out: *mut *mut DsDataset,
) -> DsStatus {
    guard(|| {
        let path = as_str(path, "path")?;
        let column = if label_column < 0 {
            LabelColumn::Last
        } else {
            LabelColumn::Index(label_column as usize)
        };
        let ds = load_dataset(path, column, header)?;
        write_out(out, Box::into_raw(Box::new(DsDataset(ds))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn ds_dataset_free(ds: *mut DsDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

#[no_mangle]
pub unsafe extern "C" fn ds_dataset_len(ds: *const DsDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn ds_dataset_dimension(ds: *const DsDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.dimension())
}

/// Label-guided clustering with default iteration and depth limits.
#[no_mangle]
pub unsafe extern "C" fn ds_cluster(
    ds: *const DsDataset,
    metric: DsMetric,
    seed: u64,
    out: *mut *mut DsRegions,
) -> DsStatus {
    guard(|| {
        let ds = &as_ref(ds, "ds")?.0;
        let params = ClusterParams {
            metric: match metric {
                DsMetric::L1 => DistanceMetric::L1,
                DsMetric::L2 => DistanceMetric::L2,
            },
            seed,
            ..ClusterParams::default()
        };
        let regions = label_guided_cluster(ds, &params)?;
        write_out(out, Box::into_raw(Box::new(DsRegions(regions))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn ds_regions_free(regions: *mut DsRegions) {
    if !regions.is_null() {
        drop(Box::from_raw(regions));
    }
}

#[no_mangle]
pub unsafe extern "C" fn ds_regions_len(regions: *const DsRegions) -> usize {
    regions.as_ref().map_or(0, |r| r.0.len())
}

unsafe fn region_at<'a>(regions: *const DsRegions, index: usize) -> Result<&'a Region, Failure> {
    let all = &as_ref(regions, "regions")?.0;
    all.get(index).ok_or_else(|| {
        Failure(
            DsStatus::InvalidArgument,
            format!("region index {index} out of range for {}", all.len()),
        )
    })
}

/// Summary of the region at position `index` (regions are ordered by id).
#[no_mangle]
pub unsafe extern "C" fn ds_region_info(
    regions: *const DsRegions,
    index: usize,
    out: *mut DsRegionInfo,
) -> DsStatus {
    guard(|| {
        let r = region_at(regions, index)?;
        let info = DsRegionInfo {
            id: r.id,
            label: r.label,
            member_count: r.member_count(),
            dimension: r.centroid.len(),
            r_max: r.r_max,
            r_avg: r.r_avg,
            density: r.density,
        };
        write_out(out, info, "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn ds_region_centroid(
    regions: *const DsRegions,
    index: usize,
    buf: *mut f64,
    buf_len: usize,
) -> DsStatus {
    guard(|| {
        let r = region_at(regions, index)?;
        copy_to(buf, buf_len, &r.centroid, "buf")
    })
}

/// Decides whether some input within L1 distance `radius` of `center` scores
/// `target` at least as high as `label`. `limits` may be null for defaults.
/// On `DS_OUTCOME_UNSAFE` the witness is copied to `witness` when that
/// pointer is non-null.
#[no_mangle]
pub unsafe extern "C" fn ds_decide(
    net: *const DsNetwork,
    center: *const f64,
    center_len: usize,
    radius: f64,
    label: usize,
    target: usize,
    limits: *const DsLimits,
    out_outcome: *mut DsOutcome,
    witness: *mut f64,
    witness_len: usize,
) -> DsStatus {
    guard(|| {
        let net = &as_ref(net, "net")?.0;
        let center = as_slice(center, center_len, "center")?.to_vec();
        let mut lim = Limits::default();
        if let Some(l) = limits.as_ref() {
            lim.max_splits = l.max_splits;
            if l.timeout_secs > 0.0 {
                lim.timeout = Duration::try_from_secs_f64(l.timeout_secs)
                    .map_err(|e| Failure(DsStatus::InvalidArgument, e.to_string()))?;
            }
        }
        let q = Query::new(net, center, radius, label, target)?.with_limits(lim);
        let verdict = decide(&q)?;
        let outcome = match &verdict.outcome {
            Outcome::Safe => DsOutcome::Safe,
            Outcome::Unsafe { witness: w } => {
                if !witness.is_null() {
                    copy_to(witness, witness_len, w, "witness")?;
                }
                DsOutcome::Unsafe
            }
            Outcome::ResourceLimit { .. } => DsOutcome::ResourceLimit,
        };
        write_out(out_outcome, outcome, "out_outcome")
    })
}

/// Radius of the slice that pins `dims[i]` to `values[i]` through an L2 ball
/// of radius `r`. Sets `out_nonempty` to false when the plane misses the ball.
#[no_mangle]
pub unsafe extern "C" fn ds_slice_radius(
    r: f64,
    center: *const f64,
    center_len: usize,
    dims: *const usize,
    values: *const f64,
    n_fixed: usize,
    out_radius: *mut f64,
    out_nonempty: *mut bool,
) -> DsStatus {
    guard(|| {
        let center = as_slice(center, center_len, "center")?;
        let values = as_slice(values, n_fixed, "values")?;
        let dims: &[usize] = if n_fixed == 0 {
            &[]
        } else if dims.is_null() {
            return fail(DsStatus::NullPointer, "dims is null");
        } else {
            std::slice::from_raw_parts(dims, n_fixed)
        };
        let fixed: Vec<(usize, f64)> = dims.iter().copied().zip(values.iter().copied()).collect();
        let radius = slice_radius(r, center, &fixed)?;
        write_out(out_radius, radius.unwrap_or(0.0), "out_radius")?;
        write_out(out_nonempty, radius.is_some(), "out_nonempty")
    })
}

/// Runs clustering, planning and verification with default settings and
/// `jobs` worker threads (0 for every core). Artifacts are written to
/// `out_dir` unless it is null. `out_exit_code` receives 0, 1 or 2 as the
/// command-line tool would return.
#[no_mangle]
pub unsafe extern "C" fn ds_pipeline_run(
    net: *const DsNetwork,
    ds: *const DsDataset,
    out_dir: *const c_char,
    jobs: usize,
    out_exit_code: *mut i32,
) -> DsStatus {
    guard(|| {
        let net = &as_ref(net, "net")?.0;
        let ds = &as_ref(ds, "ds")?.0;
        let dir = if out_dir.is_null() {
            None
        } else {
            Some(PathBuf::from(as_str(out_dir, "out_dir")?))
        };
        let config = PipelineConfig {
            jobs,
            ..PipelineConfig::default()
        };
        let output = run_pipeline(net, ds, &config)?;
        if let Some(dir) = dir {
            output.write(dir)?;
        }
        write_out(out_exit_code, exit_code(&output.reports), "out_exit_code")
    })
}
