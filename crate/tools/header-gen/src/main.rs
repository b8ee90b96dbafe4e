//! Regenerate include/rankprior.h from the FFI crate's annotations.
//!
//! Usage: cargo run --manifest-path tools/header-gen/Cargo.toml -- \
//!            crates/rankprior-ffi crates/rankprior-ffi/include/rankprior.h

fn main() {
    let mut args = std::env::args().skip(1);
    let crate_dir = args.next().expect("usage: header-gen <ffi-crate-dir> <output-header>");
    let out_path = args.next().expect("usage: header-gen <ffi-crate-dir> <output-header>");
    cbindgen::generate(&crate_dir)
        .expect("header generation failed")
        .write_to_file(&out_path);
    println!("wrote {out_path}");
}
