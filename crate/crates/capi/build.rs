use std::path::PathBuf;

fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    let out_path = PathBuf::from(&crate_dir).join("include/scltl_planner.h");
    std::fs::create_dir_all(out_path.parent().unwrap()).unwrap();
    cbindgen::generate(&crate_dir)
        .expect("unable to generate the C header")
        .write_to_file(out_path);
    println!("cargo:rerun-if-changed=src");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
