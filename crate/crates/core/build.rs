fn main() {
    // The f64 eigensolver and rank-k update kernels call into the system
    // LAPACK/BLAS; a pure-Rust fallback covers every other scalar type.
    println!("cargo:rustc-link-lib=dylib=openblas");
}
