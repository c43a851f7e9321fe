//! Criterion benchmarks for the synthesis pipeline; see `benches/pipeline.rs`.
