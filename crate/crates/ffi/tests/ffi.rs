use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use linkmse_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(lm_last_error_message()).to_string_lossy().into_owned() }
}

fn lp_table() -> *mut LmTable {
    let mut t = ptr::null_mut();
    let counts = [0u64, 5, 5, 5];
    assert_eq!(unsafe { lm_table_from_dense(2, counts.as_ptr(), 4, &mut t) }, LmStatus::Ok);
    t
}

fn probs(p: *const LmPosterior) -> Vec<f64> {
    let n = unsafe { lm_posterior_len(p) };
    let mut v = vec![0.0; n];
    assert_eq!(unsafe { lm_posterior_probs(p, v.as_mut_ptr(), n) }, LmStatus::Ok);
    v
}

#[test]
fn graphical_posterior_through_the_c_abi() {
    let t = lp_table();
    assert_eq!(unsafe { lm_table_n_obs(t) }, 15);
    let model = CString::new("[1][2]").unwrap();
    let mut p = ptr::null_mut();
    let s = unsafe { lm_posterior_graphical(t, model.as_ptr(), 1.0, LmSizePrior::Reciprocal, 2000, &mut p) };
    assert_eq!(s, LmStatus::Ok);
    let v = probs(p);
    assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert_eq!(unsafe { lm_posterior_start(p) }, 15);
    let mode = v.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap().0 as u64 + 15;
    assert!((18..=22).contains(&mode), "{mode}");
    let (mut lo, mut hi) = (0u64, 0u64);
    assert_eq!(unsafe { lm_posterior_interval(p, 0.9, &mut lo, &mut hi) }, LmStatus::Ok);
    assert!(lo <= mode && mode <= hi);
    assert_eq!(unsafe { lm_posterior_interval(p, 1.5, &mut lo, &mut hi) }, LmStatus::InvalidArgument);
    unsafe {
        lm_posterior_free(p);
        lm_table_free(t);
    }
}

#[test]
fn bma_weights_and_averaging() {
    let t = lp_table();
    let mut p = ptr::null_mut();
    let mut w = [0.0f64; 4];
    let mut m = 0usize;
    let s = unsafe { lm_posterior_bma(t, 1.0, LmSizePrior::Reciprocal, 2000, &mut p, w.as_mut_ptr(), 4, &mut m) };
    assert_eq!(s, LmStatus::Ok);
    assert_eq!(m, 1);
    assert!((w[0] - 1.0).abs() < 1e-12);

    let mut q = ptr::null_mut();
    let counts = [0u64, 8, 2, 4];
    let mut t2 = ptr::null_mut();
    assert_eq!(unsafe { lm_table_from_dense(2, counts.as_ptr(), 4, &mut t2) }, LmStatus::Ok);
    assert_eq!(unsafe { lm_posterior_bma(t2, 1.0, LmSizePrior::Uniform, 2000, &mut q, ptr::null_mut(), 0, ptr::null_mut()) }, LmStatus::Ok);

    let parts = [p as *const LmPosterior, q as *const LmPosterior];
    let mut avg = ptr::null_mut();
    assert_eq!(unsafe { lm_average(parts.as_ptr(), 2, &mut avg) }, LmStatus::Ok);
    let mut d = LmDecomposition::default();
    assert_eq!(unsafe { lm_averaged_decomposition(avg, &mut d) }, LmStatus::Ok);
    let mut pooled = ptr::null_mut();
    assert_eq!(unsafe { lm_averaged_pooled(avg, &mut pooled) }, LmStatus::Ok);
    let var = unsafe { lm_posterior_variance(pooled) };
    assert!((d.linkage + d.residual - var).abs() < 1e-9 * var.max(1.0));
    assert!((d.linkage_share + d.residual_share - 1.0).abs() < 1e-12);
    let mean = unsafe { lm_posterior_mean(pooled) };
    let expect = unsafe { (lm_posterior_mean(p) + lm_posterior_mean(q)) / 2.0 };
    assert!((mean - expect).abs() < 1e-9);
    unsafe {
        lm_posterior_free(pooled);
        lm_averaged_free(avg);
        lm_posterior_free(p);
        lm_posterior_free(q);
        lm_table_free(t);
        lm_table_free(t2);
    }
}

#[test]
fn lcmcr_is_seeded() {
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { lm_table_new(3, &mut t) }, LmStatus::Ok);
    for (h, n) in [(1u32, 40u64), (2, 35), (4, 30), (3, 12), (5, 10), (6, 9), (7, 4)] {
        assert_eq!(unsafe { lm_table_add(t, h, n) }, LmStatus::Ok);
    }
    assert_eq!(unsafe { lm_table_add(t, 0, 1) }, LmStatus::InvalidArgument);
    let run = || {
        let mut p = ptr::null_mut();
        assert_eq!(unsafe { lm_posterior_lcmcr(t, 3, 2000, 500, 5, 7, &mut p) }, LmStatus::Ok);
        let v = probs(p);
        unsafe { lm_posterior_free(p) };
        v
    };
    assert_eq!(run(), run());
    unsafe { lm_table_free(t) };
}

#[test]
fn errors_set_status_and_message() {
    let mut t = ptr::null_mut();
    assert_eq!(unsafe { lm_table_new(17, &mut t) }, LmStatus::InvalidArgument);
    assert!(t.is_null());
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { lm_table_new(3, ptr::null_mut()) }, LmStatus::NullPointer);
    let missing = CString::new("/nonexistent/table.csv").unwrap();
    assert_eq!(unsafe { lm_table_read_csv(missing.as_ptr(), &mut t) }, LmStatus::Io);
    assert!(last_error().contains("/nonexistent/table.csv"));
    let model = CString::new("[1,2").unwrap();
    let tt = lp_table();
    let mut p = ptr::null_mut();
    let s = unsafe { lm_posterior_graphical(tt, model.as_ptr(), 1.0, LmSizePrior::Reciprocal, 100, &mut p) };
    assert_eq!(s, LmStatus::Parse);
    assert!(p.is_null());
    unsafe { lm_table_free(tt) };
    assert_eq!(unsafe { lm_posterior_len(ptr::null()) }, 0);
    assert!(unsafe { lm_posterior_mean(ptr::null()) }.is_nan());
}

#[test]
fn link_run_over_a_candidate_directory() {
    use linkmse::simulate::{generate, CaptureModel, Distortion, SimSpec, SIM_COMPARISON};
    let dir = tempfile::tempdir().unwrap();
    let spec = SimSpec {
        seed: 3,
        population: 60,
        lists: 2,
        capture: CaptureModel::Independence(vec![0.6, 0.6]),
        distortion: Distortion::none(),
    };
    let sim = generate(&spec).unwrap();
    sim.write(dir.path()).unwrap();
    let schema = linkmse::simulate::sim_schema();
    let store = linkmse::ingest::load_lists(&sim.list_paths(dir.path()), &schema).unwrap();
    let cfg = linkmse::compare::SimilarityConfig::parse(SIM_COMPARISON, &schema).unwrap();
    let cand_dir = dir.path().join("cand");
    linkmse::compare::build_candidates(&store.records, &cfg)
        .unwrap()
        .write_dir(&cand_dir, &store.membership())
        .unwrap();

    let c_dir = CString::new(cand_dir.to_str().unwrap()).unwrap();
    let mut cands = ptr::null_mut();
    assert_eq!(unsafe { lm_candidates_read(c_dir.as_ptr(), &mut cands) }, LmStatus::Ok);
    assert!(unsafe { lm_candidates_num_pairs(cands) } > 0);
    let mut chain = ptr::null_mut();
    assert_eq!(unsafe { lm_link_run(cands, ptr::null(), 200, 50, 3, 11, &mut chain) }, LmStatus::Ok);
    assert_eq!(unsafe { lm_chain_len(chain) }, 50);
    let mut table = ptr::null_mut();
    assert_eq!(unsafe { lm_chain_table(chain, cands, 49, &mut table) }, LmStatus::Ok);
    let observed = sim.true_table.n_obs();
    assert_eq!(unsafe { lm_table_n_obs(table) }, observed);
    assert_eq!(unsafe { lm_chain_table(chain, cands, 50, &mut table) }, LmStatus::InvalidArgument);
    let out = CString::new(dir.path().join("chain.txt").to_str().unwrap()).unwrap();
    assert_eq!(unsafe { lm_chain_write(chain, cands, out.as_ptr()) }, LmStatus::Ok);
    unsafe {
        lm_table_free(table);
        lm_chain_free(chain);
        lm_candidates_free(cands);
    }
}

#[test]
fn header_compiles_and_links_from_c() {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let header = root.join("include/linkmse.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for f in ["lm_table_from_dense", "lm_posterior_bma", "lm_average", "lm_link_run", "lm_last_error_message"] {
        assert!(text.contains(f), "header lacks {f}");
    }
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("liblinkmse_ffi.a");
    assert!(lib.is_file(), "static library not built at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new("cc")
        .arg(root.join("tests/smoke.c"))
        .arg("-I")
        .arg(root.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("C compiler runs");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "smoke exited with {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with(env!("CARGO_PKG_VERSION")));
}
