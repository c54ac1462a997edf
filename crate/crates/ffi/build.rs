use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(std::env::var("CARGO_MANIFEST_DIR").unwrap());
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    let config = cbindgen::Config::from_file(crate_dir.join("cbindgen.toml")).expect("cbindgen.toml");
    match cbindgen::generate_with_config(&crate_dir, config) {
        Ok(b) => {
            b.write_to_file(crate_dir.join("include/labeldist.h"));
        }
        // Keep the build going if the header cannot be regenerated (e.g. a
        // syntax error mid-edit); rustc reports the real problem.
        Err(e) => println!("cargo:warning=cbindgen: {e}"),
    }
}
