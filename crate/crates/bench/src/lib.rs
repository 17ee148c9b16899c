//! Criterion benchmarks for the forecasting pipeline; see `benches/`.
