//! Criterion benchmarks for `floquet-core`; see `benches/`.
