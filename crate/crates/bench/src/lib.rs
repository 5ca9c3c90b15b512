//! Criterion benchmarks for `p2l-core`; the benchmarks live in `benches/`.
