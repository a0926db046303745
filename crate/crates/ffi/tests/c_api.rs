use std::ffi::{c_char, CStr, CString};
use std::io::Write;
use std::ptr;

use selshot_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take_json(p: *mut c_char) -> serde_json::Value {
    assert!(!p.is_null());
    let v = serde_json::from_str(CStr::from_ptr(p).to_str().unwrap()).unwrap();
    selshot_string_free(p);
    v
}

fn last_error() -> String {
    let p = selshot_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn corpus_file() -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    let rows = [
        ("t1", "os.makedirs(path)", "create a directory", "train"),
        ("t2", "scipy.stats.norm.pdf(x)", "normal density", "train"),
        ("t3", "os.listdir(dname)", "list a directory", "train"),
        ("q1", "os.mkdir(path)", "make a directory", "test"),
    ];
    for (id, code, expl, split) in rows {
        let line = serde_json::json!({"id": id, "code": code, "explanation": expl, "language": "python", "split": split});
        writeln!(f, "{line}").unwrap();
    }
    f
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(selshot_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn extract_entities_worked_example() {
    let mut out = ptr::null_mut();
    let status = unsafe {
        selshot_extract_entities(c("print(os.listdir(dname))").as_ptr(), c("python").as_ptr(), &mut out)
    };
    assert_eq!(status, SelshotStatus::Ok);
    let v = unsafe { take_json(out) };
    assert_eq!(
        v,
        serde_json::json!({"function": ["listdir", "print"], "library": ["os"], "variable": ["dname"]})
    );
}

#[test]
fn bad_arguments_set_status_and_message() {
    let mut out = ptr::null_mut();
    let status = unsafe { selshot_extract_entities(ptr::null(), c("python").as_ptr(), &mut out) };
    assert_eq!(status, SelshotStatus::InvalidArgument);
    assert!(out.is_null());
    assert!(last_error().contains("code is null"));

    let status = unsafe { selshot_extract_entities(c("x").as_ptr(), c("cobol").as_ptr(), &mut out) };
    assert_eq!(status, SelshotStatus::InvalidArgument);

    let mut corpus = ptr::null_mut();
    let status = unsafe { selshot_corpus_load(c("/nonexistent/corpus.jsonl").as_ptr(), &mut corpus) };
    assert_eq!(status, SelshotStatus::Io);
    assert!(corpus.is_null());

    let mut scores = SelshotScores::default();
    let status = unsafe { selshot_metric_scores(c("a b").as_ptr(), c("").as_ptr(), &mut scores) };
    assert_eq!(status, SelshotStatus::Validation);
}

#[test]
fn metric_scores_and_token_similarity() {
    let mut scores = SelshotScores::default();
    let status = unsafe {
        selshot_metric_scores(c("create a new directory").as_ptr(), c("create a new directory").as_ptr(), &mut scores)
    };
    assert_eq!(status, SelshotStatus::Ok);
    assert_eq!((scores.bleu, scores.rouge_l), (1.0, 1.0));
    assert!(scores.meteor > 0.99);

    let mut sim = -1.0;
    let status = unsafe {
        selshot_score_token(c("os.mkdir(path)").as_ptr(), c("os.makedirs(path)").as_ptr(), c("python").as_ptr(), &mut sim)
    };
    assert_eq!(status, SelshotStatus::Ok);
    assert!((sim - 0.5).abs() < 1e-12, "{sim}");
}

#[test]
fn selector_ranks_and_outlives_corpus() {
    let file = corpus_file();
    let path = c(file.path().to_str().unwrap());
    let mut corpus = ptr::null_mut();
    assert_eq!(unsafe { selshot_corpus_load(path.as_ptr(), &mut corpus) }, SelshotStatus::Ok);
    assert_eq!(unsafe { selshot_corpus_len(corpus) }, 4);

    let mut sel = ptr::null_mut();
    let status = unsafe { selshot_selector_new(corpus, c("ner").as_ptr(), 2, ptr::null(), &mut sel) };
    assert_eq!(status, SelshotStatus::Ok);
    unsafe { selshot_corpus_free(corpus) };

    let mut out = ptr::null_mut();
    let status = unsafe { selshot_selector_rank(sel, c("os.mkdir(path)").as_ptr(), ptr::null(), &mut out) };
    assert_eq!(status, SelshotStatus::Ok);
    let v = unsafe { take_json(out) };
    let ids: Vec<&str> = v.as_array().unwrap().iter().map(|r| r["id"].as_str().unwrap()).collect();
    assert_eq!(ids.len(), 2);
    assert!(!ids.contains(&"t2"), "{ids:?}");

    // the semantic strategy needs embeddings
    let mut corpus = ptr::null_mut();
    unsafe { selshot_corpus_load(path.as_ptr(), &mut corpus) };
    let mut sem = ptr::null_mut();
    let status = unsafe { selshot_selector_new(corpus, c("semantic").as_ptr(), 2, ptr::null(), &mut sem) };
    assert_eq!(status, SelshotStatus::InvalidArgument);
    assert!(sem.is_null());
    let status = unsafe { selshot_selector_new(corpus, c("token").as_ptr(), 0, ptr::null(), &mut sem) };
    assert_eq!(status, SelshotStatus::InvalidArgument);

    unsafe {
        selshot_corpus_free(corpus);
        selshot_selector_free(sel);
        selshot_selector_free(ptr::null_mut());
        selshot_string_free(ptr::null_mut());
    }
}

#[test]
fn semantic_selector_with_precomputed_vectors() {
    let file = corpus_file();
    let mut emb = tempfile::NamedTempFile::new().unwrap();
    for (id, v) in [("t1", [1.0, 0.1]), ("t2", [0.0, 1.0]), ("t3", [0.9, 0.3]), ("q1", [1.0, 0.0])] {
        writeln!(emb, "{}", serde_json::json!({"id": id, "values": v})).unwrap();
    }
    let mut corpus = ptr::null_mut();
    unsafe { selshot_corpus_load(c(file.path().to_str().unwrap()).as_ptr(), &mut corpus) };
    let mut sel = ptr::null_mut();
    let status = unsafe {
        selshot_selector_new(corpus, c("semantic").as_ptr(), 3, c(emb.path().to_str().unwrap()).as_ptr(), &mut sel)
    };
    assert_eq!(status, SelshotStatus::Ok, "{}", last_error());

    let query = [1.0f32, 0.0];
    let mut out = ptr::null_mut();
    assert_eq!(
        unsafe { selshot_selector_rank_vector(sel, query.as_ptr(), query.len(), &mut out) },
        SelshotStatus::Ok
    );
    let v = unsafe { take_json(out) };
    let ids: Vec<&str> = v.as_array().unwrap().iter().map(|r| r["id"].as_str().unwrap()).collect();
    assert_eq!(ids, ["t1", "t3", "t2"]);

    // by id the vector comes from the file; q1 is not a train sample
    let status = unsafe { selshot_selector_rank(sel, c("os.mkdir(path)").as_ptr(), c("q1").as_ptr(), &mut out) };
    assert_eq!(status, SelshotStatus::NotFound);
    let status = unsafe { selshot_selector_rank(sel, c("x").as_ptr(), c("t1").as_ptr(), &mut out) };
    assert_eq!(status, SelshotStatus::Ok);
    let v = unsafe { take_json(out) };
    assert_eq!(v[0]["id"], "t3");

    unsafe {
        selshot_selector_free(sel);
        selshot_corpus_free(corpus);
    }
}

#[test]
fn header_declares_every_exported_function() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let header = std::fs::read_to_string(format!("{dir}/include/selshot.h")).unwrap();
    let source = std::fs::read_to_string(format!("{dir}/src/lib.rs")).unwrap();
    let exported: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exported.len() >= 12, "{exported:?}");
    for name in exported {
        assert!(header.contains(&format!("{name}(")), "{name} missing from selshot.h");
    }
    for ty in ["SELSHOT_STATUS_OK = 0", "typedef struct SelshotCorpus SelshotCorpus", "double meteor;"] {
        assert!(header.contains(ty), "{ty}");
    }
}

#[test]
fn c_program_links_against_the_shared_library() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib_dir = std::env::current_exe().unwrap().parent().unwrap().parent().unwrap().to_path_buf();
    let so = lib_dir.join("libselshot_ffi.so");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !so.exists() || std::process::Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or no shared library at {}", so.display());
        return;
    }
    let out = tempfile::tempdir().unwrap();
    let exe = out.path().join("smoke");
    let status = std::process::Command::new(&cc)
        .arg(dir.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(dir.join("include"))
        .arg("-L")
        .arg(&lib_dir)
        .arg("-lselshot_ffi")
        .arg("-o")
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let run = std::process::Command::new(&exe)
        .env("LD_LIBRARY_PATH", &lib_dir)
        .output()
        .unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
