fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("CARGO_MANIFEST_DIR");
    let dir = std::path::Path::new(&crate_dir);
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");

    let config = cbindgen::Config::from_file(dir.join("cbindgen.toml")).unwrap_or_default();
    match cbindgen::Builder::new().with_config(config).with_crate(&crate_dir).generate() {
        Ok(bindings) => {
            std::fs::create_dir_all(dir.join("include")).expect("create include dir");
            bindings.write_to_file(dir.join("include/koopman_roa.h"));
        }
        Err(e) => println!("cargo:warning=header not regenerated: {e}"),
    }
}
