//! Criterion benchmarks for the construction pipeline; see `benches/`.
