use std::path::Path;
use std::process::Command;

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/edgecorr.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for symbol in ["ec_pipeline_new", "ec_store_search", "ec_string_free", "EC_STATUS_NOT_FOUND"] {
        assert!(text.contains(symbol), "{symbol} missing from header");
    }
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let status = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(&header)
            .status();
        match status {
            Ok(s) => assert!(s.success(), "{compiler} rejected the header"),
            Err(_) => eprintln!("{compiler} not available; skipping"),
        }
    }
}
