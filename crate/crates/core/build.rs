fn main() {
    // Dense factorizations go through the system OpenBLAS (LAPACK included
    // in Debian's libopenblas). The thin FFI layer lives in linalg::lapack.
    println!("cargo:rustc-link-lib=dylib=openblas");
}
