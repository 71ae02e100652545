//! Criterion benchmarks for `weakdep-core`; see `benches/`.
