use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").unwrap());

    let mut config = cbindgen::Config::default();
    config.language = cbindgen::Language::C;
    config.include_guard = Some("EFGP_H".into());
    config.cpp_compat = true;
    config.documentation = true;
    config.header = Some("/* C interface for the efgp Gaussian process library. */".into());
    config.usize_is_size_t = true;

    match cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
    {
        Ok(bindings) => {
            bindings.write_to_file(crate_dir.join("include").join("efgp.h"));
        }
        // don't fail the build during e.g. `cargo clippy`, where macro
        // expansion inside cbindgen can hiccup; the header is committed
        Err(err) => println!("cargo:warning=cbindgen failed: {err}"),
    }
    println!("cargo:rerun-if-changed=src/lib.rs");
}
