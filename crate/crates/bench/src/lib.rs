//! Criterion benchmarks of the solver kernels; see `benches/kernels.rs`.
//! Run with `cargo bench -p nondiv-bench`.
