//! Criterion benchmarks for lcpseg; see `benches/`.
