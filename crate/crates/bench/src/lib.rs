//! Criterion benchmarks for the scheduling pipeline live in `benches/`.
