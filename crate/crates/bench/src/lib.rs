//! Benchmarks for the per-bin solver, the dense oracle and the tracker; see `benches/`.
