//! Criterion benchmarks for the dense kernels, the Faddeeva engine, the
//! Kalman filter and the cycle model. Run with `cargo bench -p mfa-bench`.
