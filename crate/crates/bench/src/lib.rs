//! Criterion benchmarks for the assessment pipeline; see `benches/pipeline.rs`.
