//! Criterion benchmarks for the noise designer live under `benches/`.
