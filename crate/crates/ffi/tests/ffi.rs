use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use deepsafe_ffi::*;

fn core_fixture(name: &str) -> CString {
    let p = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name);
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    let p = ds_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

const IDENTITY_NET: &str = r#"{"input_dim": 2, "labels": 2, "layers": [
    {"weights": [[0, 0], [1, 1]], "bias": [0, -1.5], "activation": "identity"}]}"#;

#[test]
fn network_round_trip_and_evaluation() {
    unsafe {
        let mut net = ptr::null_mut();
        assert_eq!(
            ds_network_load(core_fixture("tiny_net.json").as_ptr(), &mut net),
            DsStatus::Ok
        );
        assert_eq!(ds_network_input_dim(net), 2);
        assert_eq!(ds_network_label_count(net), 3);

        let x = [0.5, -0.25];
        let mut scores = [0.0; 3];
        assert_eq!(
            ds_network_evaluate(net, x.as_ptr(), 2, scores.as_mut_ptr(), 3),
            DsStatus::Ok
        );
        let native = deepsafe::load_network(
            Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/tiny_net.json"),
        )
        .unwrap()
        .evaluate(&x)
        .unwrap();
        assert_eq!(scores.to_vec(), native.0);

        let mut label = usize::MAX;
        assert_eq!(
            ds_network_predicted_label(net, x.as_ptr(), 2, &mut label),
            DsStatus::Ok
        );
        assert_eq!(label, native.predicted_label());

        let mut short = [0.0; 2];
        assert_eq!(
            ds_network_evaluate(net, x.as_ptr(), 2, short.as_mut_ptr(), 2),
            DsStatus::BufferTooSmall
        );
        assert_eq!(
            ds_network_evaluate(net, x.as_ptr(), 1, scores.as_mut_ptr(), 3),
            DsStatus::DimensionMismatch
        );
        ds_network_free(net);
    }
}

#[test]
fn bad_inputs_report_errors() {
    unsafe {
        let mut net = ptr::null_mut();
        assert_eq!(
            ds_network_load(ptr::null(), &mut net),
            DsStatus::NullPointer
        );
        assert!(net.is_null());
        let missing = CString::new("/nonexistent/net.json").unwrap();
        assert_eq!(ds_network_load(missing.as_ptr(), &mut net), DsStatus::Io);
        assert!(last_error().contains("/nonexistent/net.json"));
        let junk = CString::new("{\"input_dim\": 2}").unwrap();
        assert_eq!(
            ds_network_from_json(junk.as_ptr(), &mut net),
            DsStatus::Parse
        );
        assert_eq!(ds_network_input_dim(ptr::null()), 0);
        ds_network_free(ptr::null_mut());
    }
}

#[test]
fn decide_through_the_c_interface() {
    unsafe {
        let json = CString::new(IDENTITY_NET).unwrap();
        let mut net = ptr::null_mut();
        assert_eq!(ds_network_from_json(json.as_ptr(), &mut net), DsStatus::Ok);
        let center = [0.0, 0.0];
        let mut outcome = DsOutcome::ResourceLimit;
        let mut witness = [f64::NAN; 2];
        // score1 - score0 = x0 + x1 - 1.5, whose maximum over the ball is r - 1.5
        let status = ds_decide(
            net,
            center.as_ptr(),
            2,
            1.4,
            0,
            1,
            ptr::null(),
            &mut outcome,
            witness.as_mut_ptr(),
            2,
        );
        assert_eq!(status, DsStatus::Ok);
        assert_eq!(outcome, DsOutcome::Safe);

        let limits = DsLimits {
            max_splits: 100,
            timeout_secs: 5.0,
        };
        let status = ds_decide(
            net,
            center.as_ptr(),
            2,
            2.0,
            0,
            1,
            &limits,
            &mut outcome,
            witness.as_mut_ptr(),
            2,
        );
        assert_eq!(status, DsStatus::Ok);
        assert_eq!(outcome, DsOutcome::Unsafe);
        assert!(witness[0] + witness[1] >= 1.5 - 1e-6);
        assert!(witness[0].abs() + witness[1].abs() <= 2.0 + 1e-6);

        let status = ds_decide(
            net,
            center.as_ptr(),
            2,
            1.0,
            1,
            1,
            ptr::null(),
            &mut outcome,
            ptr::null_mut(),
            0,
        );
        assert_eq!(status, DsStatus::InvalidArgument);
        assert!(last_error().contains("target"));
        ds_network_free(net);
    }
}

#[test]
fn slice_radius_through_the_c_interface() {
    unsafe {
        let center = [0.0, 0.0, 0.0];
        let dims = [1usize];
        let values = [3.0];
        let (mut r, mut nonempty) = (0.0, false);
        assert_eq!(
            ds_slice_radius(
                5.0,
                center.as_ptr(),
                3,
                dims.as_ptr(),
                values.as_ptr(),
                1,
                &mut r,
                &mut nonempty
            ),
            DsStatus::Ok
        );
        assert!(nonempty);
        assert_eq!(r, 4.0);
        let far = [6.0];
        assert_eq!(
            ds_slice_radius(
                5.0,
                center.as_ptr(),
                3,
                dims.as_ptr(),
                far.as_ptr(),
                1,
                &mut r,
                &mut nonempty
            ),
            DsStatus::Ok
        );
        assert!(!nonempty);
        let bad = [7usize];
        assert_eq!(
            ds_slice_radius(
                5.0,
                center.as_ptr(),
                3,
                bad.as_ptr(),
                values.as_ptr(),
                1,
                &mut r,
                &mut nonempty
            ),
            DsStatus::InvalidArgument
        );
    }
}

#[test]
fn cluster_and_pipeline() {
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(
            ds_dataset_load(core_fixture("tiny.csv").as_ptr(), false, -1, &mut ds),
            DsStatus::Ok
        );
        assert_eq!(ds_dataset_len(ds), 49);
        assert_eq!(ds_dataset_dimension(ds), 2);

        let mut regions = ptr::null_mut();
        assert_eq!(ds_cluster(ds, DsMetric::L2, 0, &mut regions), DsStatus::Ok);
        let n = ds_regions_len(regions);
        assert!(n >= 3);
        let mut total = 0;
        for i in 0..n {
            let mut info = DsRegionInfo::default();
            assert_eq!(ds_region_info(regions, i, &mut info), DsStatus::Ok);
            assert_eq!(info.dimension, 2);
            assert!(info.r_avg <= info.r_max);
            total += info.member_count;
            let mut c = [0.0; 2];
            assert_eq!(
                ds_region_centroid(regions, i, c.as_mut_ptr(), 2),
                DsStatus::Ok
            );
        }
        assert_eq!(total, 49);
        let mut info = DsRegionInfo::default();
        assert_eq!(
            ds_region_info(regions, n, &mut info),
            DsStatus::InvalidArgument
        );
        ds_regions_free(regions);

        let mut net = ptr::null_mut();
        assert_eq!(
            ds_network_load(core_fixture("tiny_net.json").as_ptr(), &mut net),
            DsStatus::Ok
        );
        let dir = tempfile::tempdir().unwrap();
        let out = CString::new(dir.path().to_str().unwrap()).unwrap();
        let mut code = -1;
        assert_eq!(
            ds_pipeline_run(net, ds, out.as_ptr(), 2, &mut code),
            DsStatus::Ok
        );
        assert!((0..=2).contains(&code));
        assert!(dir.path().join("report.json").exists());
        assert_eq!(
            ds_pipeline_run(net, ds, ptr::null(), 1, &mut code),
            DsStatus::Ok
        );

        ds_network_free(net);
        ds_dataset_free(ds);
    }
}

/// Directory holding the library artifacts for this test build.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_compiles_links_and_runs() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = artifact_dir().join("libdeepsafe_ffi.a");
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let out = tempfile::tempdir().unwrap();
    let exe = out.path().join("smoke");
    let status = Command::new(&cc)
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&exe).output().unwrap();
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "ok");
}

fn which_cc() -> Result<String, ()> {
    for cc in ["cc", "gcc", "clang"] {
        if Command::new(cc).arg("--version").output().is_ok() {
            return Ok(cc.to_string());
        }
    }
    Err(())
}
