//! Shared fixtures for the benchmarks under `benches/`.

use smallbuf::{InterArrival, MarkLaw, ProcessFamily, ScalingRegime, TrafficModel};

/// Poisson sources, rate 1, unit jobs.
pub fn unit_poisson() -> TrafficModel {
    TrafficModel::poisson(1.0, MarkLaw::Unit).expect("valid model")
}

/// Renewal sources with Erlang-`shape` gaps of mean 1 and exponential jobs.
pub fn erlang_renewal(shape: u32) -> TrafficModel {
    TrafficModel::new(
        ProcessFamily::Renewal {
            interarrival: InterArrival::Erlang { shape, mean: 1.0 },
        },
        MarkLaw::Exponential { mean: 0.5 },
    )
    .expect("valid model")
}

/// The three small-buffer regimes used across benchmarks.
pub fn regimes() -> [(&'static str, ScalingRegime); 3] {
    [
        (
            "small_buffer_ld",
            ScalingRegime::new(0.5, 1.0, 1.0, 1.0).expect("valid"),
        ),
        (
            "small_buffer_md",
            ScalingRegime::new(0.6, 0.8, 1.0, 1.0).expect("valid"),
        ),
        (
            "light_load",
            ScalingRegime::new(0.5, 2.0, 0.25, 0.5).expect("valid"),
        ),
    ]
}
