//! Criterion benchmarks for skelimg live under `benches/`.
