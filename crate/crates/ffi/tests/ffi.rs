use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use prodcat_ffi::*;

fn cstr(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(prodcat_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn label(p: *const ProdcatPredictions, row: usize, t: ProdcatTarget) -> String {
    let mut out = ptr::null();
    let st = unsafe { prodcat_predictions_label(p, row, t as u32, &mut out) };
    assert_eq!(st, ProdcatStatus::Ok);
    unsafe { CStr::from_ptr(out) }.to_str().unwrap().to_owned()
}

#[test]
fn train_save_load_predict() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[gbt]\nn_rounds = 3\n").unwrap();
    let model_path = cstr(&dir.path().join("m.json"));
    unsafe {
        let mut data = ptr::null_mut();
        assert_eq!(prodcat_dataset_synthesize(400, 3, &mut data), ProdcatStatus::Ok);
        assert_eq!(prodcat_dataset_row_count(data), 400);

        let mut model = ptr::null_mut();
        let st = prodcat_model_train(data, cstr(&cfg).as_ptr(), &mut model);
        assert_eq!(st, ProdcatStatus::Ok, "{}", last_error());
        assert_eq!(prodcat_model_save(model, model_path.as_ptr()), ProdcatStatus::Ok);

        let mut loaded = ptr::null_mut();
        assert_eq!(prodcat_model_load(model_path.as_ptr(), &mut loaded), ProdcatStatus::Ok);

        let (mut a, mut b) = (ptr::null_mut(), ptr::null_mut());
        assert_eq!(prodcat_predict(model, data, &mut a), ProdcatStatus::Ok);
        assert_eq!(prodcat_predict(loaded, data, &mut b), ProdcatStatus::Ok);
        assert_eq!(prodcat_predictions_len(a), 400);
        for row in 0..400 {
            for t in [
                ProdcatTarget::TopCategory,
                ProdcatTarget::BottomCategory,
                ProdcatTarget::Color,
            ] {
                assert_eq!(label(a, row, t), label(b, row, t));
            }
        }

        let mut out = ptr::null();
        assert_eq!(
            prodcat_predictions_label(a, 400, 0, &mut out),
            ProdcatStatus::InvalidArgument
        );
        assert!(last_error().contains("400"));
        assert_eq!(
            prodcat_predictions_label(a, 0, 7, &mut out),
            ProdcatStatus::InvalidArgument
        );

        prodcat_predictions_free(a);
        prodcat_predictions_free(b);
        prodcat_model_free(model);
        prodcat_model_free(loaded);
        prodcat_dataset_free(data);
    }
}

#[test]
fn error_codes() {
    let dir = tempfile::tempdir().unwrap();
    unsafe {
        let mut data = ptr::null_mut();
        assert_eq!(
            prodcat_dataset_load_csv(ptr::null(), &mut data),
            ProdcatStatus::NullArgument
        );
        let missing = cstr(&dir.path().join("none.csv"));
        assert_eq!(prodcat_dataset_load_csv(missing.as_ptr(), &mut data), ProdcatStatus::Io);
        assert!(!last_error().is_empty());
        assert!(data.is_null());

        let bad_version = dir.path().join("old.json");
        std::fs::write(&bad_version, "{\"format_version\": 0}").unwrap();
        let mut model = ptr::null_mut();
        assert_eq!(
            prodcat_model_load(cstr(&bad_version).as_ptr(), &mut model),
            ProdcatStatus::Model
        );

        let cfg = dir.path().join("bad.toml");
        std::fs::write(&cfg, "[gbt]\nlearning_rate = 0\n").unwrap();
        assert_eq!(prodcat_dataset_synthesize(100, 1, &mut data), ProdcatStatus::Ok);
        assert_eq!(
            prodcat_model_train(data, cstr(&cfg).as_ptr(), &mut model),
            ProdcatStatus::Config
        );
        assert_eq!(
            prodcat_dataset_synthesize(3, 1, &mut ptr::null_mut()),
            ProdcatStatus::Config
        );
        assert_eq!(prodcat_predict(ptr::null(), data, &mut ptr::null_mut()), ProdcatStatus::NullArgument);
        prodcat_dataset_free(data);

        // NULL handles are accepted by the free and count functions
        prodcat_dataset_free(ptr::null_mut());
        prodcat_model_free(ptr::null_mut());
        prodcat_predictions_free(ptr::null_mut());
        assert_eq!(prodcat_dataset_row_count(ptr::null()), 0);
        assert_eq!(prodcat_predictions_len(ptr::null()), 0);
    }
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(prodcat_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

fn c_compiler() -> Option<String> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    Command::new(&cc).arg("--version").output().ok()?.status.success().then_some(cc)
}

#[test]
fn header_compiles_as_c() {
    let Some(cc) = c_compiler() else {
        eprintln!("no C compiler found; skipping header check");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("check.c");
    std::fs::write(
        &src,
        "#include \"prodcat.h\"\nint main(void) { ProdcatStatus s = PRODCAT_STATUS_OK; return (int)s + PRODCAT_TARGET_COLOR - 2; }\n",
    )
    .unwrap();
    let out = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"])
        .arg(header_dir())
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

/// Directory holding the cdylib built alongside this test binary.
fn library_dir() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let dir = exe.parent()?.parent()?.to_path_buf();
    dir.join("libprodcat_ffi.so").exists().then_some(dir)
}

#[test]
fn c_program_links_and_runs() {
    let (Some(cc), Some(lib)) = (c_compiler(), library_dir()) else {
        eprintln!("no C compiler or shared library found; skipping link check");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("classify");
    let src = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples/classify.c");
    let out = Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(header_dir())
        .arg(&src)
        .arg("-L")
        .arg(&lib)
        .args(["-lprodcat_ffi", "-o"])
        .arg(&exe)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&exe)
        .arg(dir.path().join("m.json"))
        .env("LD_LIBRARY_PATH", &lib)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert_eq!(stdout.lines().count(), 3, "{stdout}");
    assert!(stdout.starts_with("0,top"), "{stdout}");
}
