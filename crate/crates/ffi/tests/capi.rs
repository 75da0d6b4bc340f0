use std::ffi::{c_char, CStr, CString};
use std::ptr;

use edgecorr_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut c_char) -> String {
    assert!(!s.is_null());
    let owned = CStr::from_ptr(s).to_str().unwrap().to_owned();
    ec_string_free(s);
    owned
}

unsafe fn last_error() -> String {
    let p = ec_last_error();
    assert!(!p.is_null());
    CStr::from_ptr(p).to_string_lossy().into_owned()
}

/// Twelve authors tweeting the same two tags in each stream, half of them
/// shared across streams.
unsafe fn push_cliques(p: *mut EcPipeline) {
    for (stream, range) in [(0usize, 0..12), (1, 6..18)] {
        for i in range {
            let author = c(&format!("@u{i:02}"));
            for tag in ["#x", if stream == 0 { "#a" } else { "#b" }] {
                let mut routed = 9;
                let t = c(tag);
                let status = ec_pipeline_push(p, stream, 1.0 + i as f64, author.as_ptr(), t.as_ptr(), &mut routed);
                assert_eq!(status, EcStatus::Ok);
                assert_eq!(routed, 1);
            }
        }
    }
}

#[test]
fn pipeline_round_trip() {
    unsafe {
        let names = [c("cnn"), c("fox")];
        let ptrs: Vec<*const c_char> = names.iter().map(|n| n.as_ptr()).collect();
        let params = ec_default_params();
        assert_eq!((params.tau, params.lambda, params.k), (60.0, 30.0, 400));
        let dir = tempfile::tempdir().unwrap();
        let data = c(dir.path().to_str().unwrap());
        let mut p = ptr::null_mut();
        assert_eq!(ec_pipeline_new(ptrs.as_ptr(), 2, &params, data.as_ptr(), &mut p), EcStatus::Ok);
        push_cliques(p);

        let mut store = ptr::null_mut();
        let mut summary = ptr::null_mut();
        assert_eq!(ec_pipeline_finish(p, &mut store, &mut summary), EcStatus::Ok);
        assert!(!take(summary).is_empty());

        // 12 + 2 nodes per stream; shared: @u06..@u11 and #x
        let mut matrix = ptr::null_mut();
        assert_eq!(ec_store_matrix(store, 60.0, &mut matrix), EcStatus::Ok);
        let matrix = take(matrix);
        assert!(matrix.contains(&(7.0f64 / 21.0).to_string()), "{matrix}");

        let tags = [c("cnn")];
        let tag_ptrs: Vec<*const c_char> = tags.iter().map(|t| t.as_ptr()).collect();
        let mut json = ptr::null_mut();
        assert_eq!(ec_store_search(store, tag_ptrs.as_ptr(), 1, 60.0, 5, &mut json), EcStatus::Ok);
        let v: serde_json::Value = serde_json::from_str(&take(json)).unwrap();
        assert_eq!(v["status"], "found");
        // the two hubs tie on degree 12 and order by tag
        assert_eq!((v["hits"][0]["tag"].as_str(), v["hits"][1]["tag"].as_str()), (Some("#a"), Some("#x")));
        ec_store_free(store);

        let mut reopened = ptr::null_mut();
        assert_eq!(ec_store_open(data.as_ptr(), &mut reopened), EcStatus::Ok);
        let mut again = ptr::null_mut();
        assert_eq!(ec_store_matrix(reopened, 60.0, &mut again), EcStatus::Ok);
        assert_eq!(take(again), matrix);
        ec_store_free(reopened);
    }
}

#[test]
fn live_correlation_is_exact() {
    unsafe {
        let names = [c("a"), c("b")];
        let ptrs: Vec<*const c_char> = names.iter().map(|n| n.as_ptr()).collect();
        let mut p = ptr::null_mut();
        assert_eq!(ec_pipeline_new(ptrs.as_ptr(), 2, &ec_default_params(), ptr::null(), &mut p), EcStatus::Ok);
        push_cliques(p);
        // an edge past the first window's end closes it
        let (u, v) = (c("@late"), c("#late"));
        assert_eq!(ec_pipeline_push(p, 0, 61.0, u.as_ptr(), v.as_ptr(), ptr::null_mut()), EcStatus::Ok);
        let (mut num, mut den) = (0, 0);
        assert_eq!(ec_pipeline_correlation(p, names[1].as_ptr(), names[0].as_ptr(), &mut num, &mut den), EcStatus::Ok);
        assert_eq!((num, den), (7, 21));
        let mut text = ptr::null_mut();
        assert_eq!(ec_pipeline_matrix(p, 60.0, &mut text), EcStatus::Ok);
        assert!(take(text).starts_with("\ta\tb\n"));
        let mut routed = 5;
        let (x, y) = (c("@old"), c("#old"));
        assert_eq!(ec_pipeline_push(p, 1, 10.0, x.as_ptr(), y.as_ptr(), &mut routed), EcStatus::Ok);
        assert_eq!(routed, 0);
        ec_pipeline_free(p);
    }
}

#[test]
fn errors_set_status_and_message() {
    unsafe {
        let mut p = ptr::null_mut();
        let params = EcParams { lambda: 90.0, ..ec_default_params() };
        let names = [c("a")];
        let ptrs: Vec<*const c_char> = names.iter().map(|n| n.as_ptr()).collect();
        assert_eq!(ec_pipeline_new(ptrs.as_ptr(), 1, &params, ptr::null(), &mut p), EcStatus::InvalidArgument);
        assert!(p.is_null());
        assert!(last_error().contains("lambda"));
        assert_eq!(ec_pipeline_new(ptr::null(), 1, &params, ptr::null(), &mut p), EcStatus::NullPointer);

        let bad = [0xffu8, 0];
        let mut d = 0;
        let ok = c("(a,b,c);");
        assert_eq!(
            ec_tree_distance(bad.as_ptr().cast(), ok.as_ptr(), 2, &mut d),
            EcStatus::InvalidUtf8
        );
        let broken = c("(a,b");
        assert_eq!(ec_tree_distance(broken.as_ptr(), ok.as_ptr(), 2, &mut d), EcStatus::InvalidArgument);
        assert!(last_error().contains("newick"));

        let mut store = ptr::null_mut();
        let file = tempfile::NamedTempFile::new().unwrap();
        let path = c(file.path().to_str().unwrap());
        assert_eq!(ec_store_open(path.as_ptr(), &mut store), EcStatus::Io);
        assert!(store.is_null());
        ec_string_free(ptr::null_mut());
        ec_store_free(ptr::null_mut());
        ec_pipeline_free(ptr::null_mut());
    }
}

#[test]
fn trees_from_text() {
    unsafe {
        let matrix = c("\tx\ty\tz\tw\nx\t1\t0.6\t0.1\t0.1\ny\t0.6\t1\t0.1\t0.1\nz\t0.1\t0.1\t1\t0.5\nw\t0.1\t0.1\t0.5\t1\n");
        let mut newick = ptr::null_mut();
        assert_eq!(ec_tree_from_matrix(matrix.as_ptr(), &mut newick), EcStatus::Ok);
        let newick = c(&take(newick));
        let mut d = 7;
        assert_eq!(ec_tree_distance(newick.as_ptr(), newick.as_ptr(), 2, &mut d), EcStatus::Ok);
        assert_eq!(d, 0);
        let other = c("((x,z),(y,w));");
        assert_eq!(ec_tree_distance(newick.as_ptr(), other.as_ptr(), 2, &mut d), EcStatus::Ok);
        assert!(d >= 1);
    }
}
