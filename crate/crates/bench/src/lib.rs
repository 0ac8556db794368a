//! Criterion benchmarks for `cognoise`; see `benches/`.
