//! Criterion benchmarks for the hqrel pipeline live in `benches/`.
