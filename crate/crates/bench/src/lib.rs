//! Benchmarks for the clustering pipeline live under `benches/`.
