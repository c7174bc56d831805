fn main() {
    println!("cargo:rerun-if-changed=src/lib.rs");
    let mut config = cbindgen::Config::default();
    config.enumeration.prefix_with_name = true;
    cbindgen::Builder::new()
        .with_config(config)
        .with_crate(".")
        .with_language(cbindgen::Language::C)
        .with_include_guard("CUSPWAVE_H")
        .generate()
        .expect("Unable to generate bindings")
        .write_to_file("include/cuspwave.h");
}
