//! Criterion benchmarks for the mitigation pipeline live in `benches/`.
//!
//! Run with `cargo bench -p tqem-bench`.
