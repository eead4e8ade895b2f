//! Traffic sources: stationary marked point processes.
//!
//! A [`TrafficModel`] pairs a point-process family with a mark law. Every
//! supported family exposes its rate and mark moments analytically, and each
//! can be sampled in its stationary regime, so windows that start at time zero
//! already see stationary increments.

mod marks;
mod path;

pub use marks::MarkLaw;
pub use path::{Event, MarkedPath};

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{derive_seed, rng_from_seed, AGGREGATE_STREAM};

/// Inter-arrival law of a renewal source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum InterArrival {
    Deterministic {
        period: f64,
    },
    Exponential {
        mean: f64,
    },
    /// Sum of `shape` exponential phases with total mean `mean`.
    Erlang {
        shape: u32,
        mean: f64,
    },
}

impl InterArrival {
    pub fn mean(&self) -> f64 {
        match self {
            InterArrival::Deterministic { period } => *period,
            InterArrival::Exponential { mean } | InterArrival::Erlang { mean, .. } => *mean,
        }
    }

    fn validate(&self) -> Result<()> {
        let m = self.mean();
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::Config(format!(
                "inter-arrival mean must be positive, got {m}"
            )));
        }
        if let InterArrival::Erlang { shape, .. } = self {
            if *shape == 0 {
                return Err(Error::Config("Erlang shape must be at least 1".into()));
            }
        }
        Ok(())
    }

    fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        match self {
            InterArrival::Deterministic { period } => *period,
            InterArrival::Exponential { mean } => mean * exp1(rng),
            InterArrival::Erlang { shape, mean } => {
                let rate = *shape as f64 / mean;
                (0..*shape).map(|_| exp1(rng)).sum::<f64>() / rate
            }
        }
    }

    /// Time to the first event from an arbitrary origin under the equilibrium
    /// (stationary) law, whose density is `P(X > u) / E[X]`.
    fn sample_residual(&self, rng: &mut dyn RngCore) -> f64 {
        match self {
            InterArrival::Deterministic { period } => period * open_unit(rng),
            InterArrival::Exponential { mean } => mean * exp1(rng),
            InterArrival::Erlang { shape, mean } => {
                // The residual of an Erlang-k is a uniform mixture of Erlang-j, j = 1..k.
                let rate = *shape as f64 / mean;
                let phases = 1 + (open_unit(rng) * *shape as f64) as u32;
                (0..phases.min(*shape)).map(|_| exp1(rng)).sum::<f64>() / rate
            }
        }
    }
}

/// Point-process family of a single source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ProcessFamily {
    Poisson {
        rate: f64,
    },
    Renewal {
        interarrival: InterArrival,
    },
    /// Markov-modulated on/off source: emits a Poisson stream at `peak_rate`
    /// while on. `switch_on_rate` is the off-to-on rate and `switch_off_rate`
    /// the on-to-off rate.
    OnOff {
        switch_on_rate: f64,
        switch_off_rate: f64,
        peak_rate: f64,
    },
}

/// Generative description of one source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrafficModel {
    pub process: ProcessFamily,
    pub marks: MarkLaw,
}

impl TrafficModel {
    pub fn new(process: ProcessFamily, marks: MarkLaw) -> Result<Self> {
        let model = Self { process, marks };
        model.validate()?;
        Ok(model)
    }

    pub fn poisson(rate: f64, marks: MarkLaw) -> Result<Self> {
        Self::new(ProcessFamily::Poisson { rate }, marks)
    }

    pub fn validate(&self) -> Result<()> {
        match &self.process {
            ProcessFamily::Poisson { rate } => positive("Poisson rate", *rate)?,
            ProcessFamily::Renewal { interarrival } => interarrival.validate()?,
            ProcessFamily::OnOff {
                switch_on_rate,
                switch_off_rate,
                peak_rate,
            } => {
                positive("on/off switch-on rate", *switch_on_rate)?;
                positive("on/off switch-off rate", *switch_off_rate)?;
                positive("on/off peak rate", *peak_rate)?;
            }
        }
        self.marks.validate()
    }

    /// Mean number of points per unit time.
    pub fn lambda(&self) -> f64 {
        match &self.process {
            ProcessFamily::Poisson { rate } => *rate,
            ProcessFamily::Renewal { interarrival } => 1.0 / interarrival.mean(),
            ProcessFamily::OnOff {
                switch_on_rate,
                switch_off_rate,
                peak_rate,
            } => peak_rate * switch_on_rate / (switch_on_rate + switch_off_rate),
        }
    }

    pub fn mark_mean(&self) -> f64 {
        self.marks.mean()
    }

    pub fn mark_second_moment(&self) -> f64 {
        self.marks.second_moment()
    }

    pub fn mgf_domain_sup(&self) -> f64 {
        self.marks.mgf_domain_sup()
    }

    pub fn mark_mgf(&self, theta: f64) -> f64 {
        mark_mgf(self, theta)
    }

    /// λ E\[Y\], the mean work rate of one source.
    pub fn mean_work_rate(&self) -> f64 {
        self.lambda() * self.mark_mean()
    }

    /// The point rate when the counting process is Poisson (independent increments).
    pub fn poisson_rate(&self) -> Option<f64> {
        match &self.process {
            ProcessFamily::Poisson { rate } => Some(*rate),
            ProcessFamily::Renewal {
                interarrival: InterArrival::Exponential { mean },
            } => Some(1.0 / mean),
            _ => None,
        }
    }

    pub fn has_independent_increments(&self) -> bool {
        self.poisson_rate().is_some()
    }

    pub fn family_name(&self) -> &'static str {
        match &self.process {
            ProcessFamily::Poisson { .. } => "poisson",
            ProcessFamily::Renewal { .. } => "renewal",
            ProcessFamily::OnOff { .. } => "on_off",
        }
    }
}

fn positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{what} must be positive, got {v}")))
    }
}

/// M(θ) of the model's mark law; `+inf` at or beyond the domain supremum.
pub fn mark_mgf(model: &TrafficModel, theta: f64) -> f64 {
    model.marks.mgf(theta)
}

/// Uniform draw on the open interval `(0, 1)`.
pub(crate) fn open_unit(rng: &mut dyn RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard exponential draw.
pub(crate) fn exp1(rng: &mut dyn RngCore) -> f64 {
    -open_unit(rng).ln()
}

/// Sequential event-time generator started in the stationary regime.
///
/// Draws are consumed in time order, so a path on a shorter window is always
/// a prefix of the path on a longer one for the same stream.
pub(crate) struct EventClock<'a> {
    process: &'a ProcessFamily,
    time: f64,
    started: bool,
    on: bool,
    next_switch: f64,
}

impl<'a> EventClock<'a> {
    pub(crate) fn new(process: &'a ProcessFamily, rng: &mut dyn RngCore) -> Self {
        let mut clock = Self {
            process,
            time: 0.0,
            started: false,
            on: false,
            next_switch: f64::INFINITY,
        };
        if let ProcessFamily::OnOff {
            switch_on_rate,
            switch_off_rate,
            ..
        } = process
        {
            let p_on = switch_on_rate / (switch_on_rate + switch_off_rate);
            clock.on = open_unit(rng) < p_on;
            let leave = if clock.on {
                switch_off_rate
            } else {
                switch_on_rate
            };
            clock.next_switch = exp1(rng) / leave;
        }
        clock
    }

    pub(crate) fn next_time(&mut self, rng: &mut dyn RngCore) -> f64 {
        match self.process {
            ProcessFamily::Poisson { rate } => {
                self.time += exp1(rng) / rate;
            }
            ProcessFamily::Renewal { interarrival } => {
                self.time += if self.started {
                    interarrival.sample(rng)
                } else {
                    interarrival.sample_residual(rng)
                };
            }
            ProcessFamily::OnOff {
                switch_on_rate,
                switch_off_rate,
                peak_rate,
            } => loop {
                if self.on {
                    let candidate = self.time + exp1(rng) / peak_rate;
                    if candidate < self.next_switch {
                        self.time = candidate;
                        break;
                    }
                    self.time = self.next_switch;
                    self.on = false;
                    self.next_switch = self.time + exp1(rng) / switch_on_rate;
                } else {
                    self.time = self.next_switch;
                    self.on = true;
                    self.next_switch = self.time + exp1(rng) / switch_off_rate;
                }
            },
        }
        self.started = true;
        self.time
    }
}

/// Appends the events of one stationary source on `(0, window]`.
pub(crate) fn sample_events_into(
    model: &TrafficModel,
    window: f64,
    rng: &mut dyn RngCore,
    out: &mut Vec<Event>,
) {
    let mut clock = EventClock::new(&model.process, rng);
    loop {
        let time = clock.next_time(rng);
        if time > window {
            break;
        }
        let mark = model.marks.sample(open_unit(rng));
        out.push(Event { time, mark });
    }
}

/// Samples one stationary source on `[0, window]`.
///
/// Equal `(model, window, seed)` triples give identical paths.
pub fn sample_path(model: &TrafficModel, window: f64, seed: u64) -> Result<MarkedPath> {
    model.validate()?;
    if !(window.is_finite() && window > 0.0) {
        return Err(Error::Usage(format!(
            "window must be positive, got {window}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut events = Vec::new();
    sample_events_into(model, window, &mut rng, &mut events);
    Ok(MarkedPath::from_sorted(window, events))
}

/// Merges paths on a common window; ties keep input order.
pub fn superpose(paths: &[MarkedPath]) -> Result<MarkedPath> {
    let first = paths
        .first()
        .ok_or_else(|| Error::Usage("cannot superpose an empty list of paths".into()))?;
    let window = first.window();
    if let Some(p) = paths.iter().find(|p| p.window() != window) {
        return Err(Error::Usage(format!(
            "mismatched windows: {} vs {}",
            window,
            p.window()
        )));
    }
    let mut events: Vec<Event> = paths
        .iter()
        .flat_map(|p| p.events().iter().copied())
        .collect();
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(MarkedPath::from_sorted(window, events))
}

/// Exponential tilt applied to a Poisson aggregate over `[0, window]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct TiltWindow {
    pub theta: f64,
    pub window: f64,
}

/// Samples the aggregate of `n` Poisson sources as one Poisson stream of rate
/// `n λ`, optionally tilted on an initial window.
///
/// Points are produced by mapping unit-rate arrival epochs through the
/// cumulative intensity and marks through the inverse CDF, so the untilted
/// and tilted samplers are coupled draw for draw. Returns the path and the
/// mark mass that fell inside the tilted window.
pub(crate) fn sample_poisson_aggregate(
    model: &TrafficModel,
    n: u64,
    window: f64,
    tilt: Option<TiltWindow>,
    rng: &mut dyn RngCore,
) -> Result<(MarkedPath, f64)> {
    let rate = model.poisson_rate().ok_or_else(|| {
        Error::Unsupported(format!(
            "direct aggregate sampling needs Poisson traffic, got {}",
            model.family_name()
        ))
    })?;
    let nominal = n as f64 * rate;
    let tilt = tilt.filter(|t| t.theta != 0.0 && t.window > 0.0);
    let tilted_marks;
    let (boost, tilt_end, marks_in) = match tilt {
        Some(t) => {
            tilted_marks = model.marks.tilted(t.theta)?;
            (nominal * model.marks.mgf(t.theta), t.window, &tilted_marks)
        }
        None => (nominal, 0.0, &model.marks),
    };
    let epoch_split = boost * tilt_end;
    let mut events = Vec::new();
    let mut epoch = 0.0;
    let mut tilted_mass = 0.0;
    loop {
        epoch += exp1(rng);
        let time = if epoch <= epoch_split {
            epoch / boost
        } else {
            tilt_end + (epoch - epoch_split) / nominal
        };
        if time > window {
            break;
        }
        let u = open_unit(rng);
        let mark = if epoch <= epoch_split {
            let m = marks_in.sample(u);
            tilted_mass += m;
            m
        } else {
            model.marks.sample(u)
        };
        events.push(Event { time, mark });
    }
    Ok((MarkedPath::from_sorted(window, events), tilted_mass))
}

/// Samples the `n`-source aggregate for one replication.
///
/// Poisson sources are sampled directly as a single Poisson stream (equal in
/// law to the superposition); other families superpose `n` independently
/// seeded sources, with seeds derived from `(seed, source, replication)`.
pub fn sample_aggregate(
    model: &TrafficModel,
    n: u64,
    window: f64,
    seed: u64,
    replication: u64,
) -> Result<MarkedPath> {
    if n == 0 {
        return Err(Error::Usage("number of sources must be positive".into()));
    }
    if !(window.is_finite() && window > 0.0) {
        return Err(Error::Usage(format!(
            "window must be positive, got {window}"
        )));
    }
    if model.poisson_rate().is_some() {
        let mut rng = rng_from_seed(derive_seed(seed, AGGREGATE_STREAM, replication));
        return Ok(sample_poisson_aggregate(model, n, window, None, &mut rng)?.0);
    }
    let mut events = Vec::new();
    for source in 0..n {
        let mut rng = rng_from_seed(derive_seed(seed, source, replication));
        sample_events_into(model, window, &mut rng, &mut events);
    }
    events.sort_by(|a, b| a.time.total_cmp(&b.time));
    Ok(MarkedPath::from_sorted(window, events))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_poisson(rate: f64) -> TrafficModel {
        TrafficModel::poisson(rate, MarkLaw::Unit).unwrap()
    }

    #[test]
    fn zero_rate_is_a_configuration_error() {
        let model = TrafficModel {
            process: ProcessFamily::Poisson { rate: 0.0 },
            marks: MarkLaw::Unit,
        };
        assert!(matches!(
            sample_path(&model, 10.0, 1),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn identical_seeds_give_identical_paths() {
        let models = [
            unit_poisson(2.0),
            TrafficModel::new(
                ProcessFamily::Renewal {
                    interarrival: InterArrival::Erlang {
                        shape: 3,
                        mean: 0.5,
                    },
                },
                MarkLaw::Exponential { mean: 1.5 },
            )
            .unwrap(),
            TrafficModel::new(
                ProcessFamily::OnOff {
                    switch_on_rate: 1.0,
                    switch_off_rate: 2.0,
                    peak_rate: 5.0,
                },
                MarkLaw::Unit,
            )
            .unwrap(),
        ];
        for m in &models {
            let a = sample_path(m, 50.0, 99).unwrap();
            let b = sample_path(m, 50.0, 99).unwrap();
            assert_eq!(a, b);
            assert!(a.is_simple());
            let c = sample_path(m, 50.0, 100).unwrap();
            assert_ne!(a, c);
        }
    }

    #[test]
    fn shorter_window_is_a_prefix() {
        let m = unit_poisson(3.0);
        let long = sample_path(&m, 20.0, 5).unwrap();
        let short = sample_path(&m, 7.0, 5).unwrap();
        let k = short.len();
        assert_eq!(&long.events()[..k], short.events());
        assert!(long.events()[k].time > 7.0);
    }

    #[test]
    fn deterministic_renewal_has_five_or_six_events() {
        let m = TrafficModel::new(
            ProcessFamily::Renewal {
                interarrival: InterArrival::Deterministic { period: 1.0 },
            },
            MarkLaw::Unit,
        )
        .unwrap();
        let mut firsts = Vec::new();
        for seed in 0..4000 {
            let p = sample_path(&m, 5.0, seed).unwrap();
            assert!(p.len() == 5 || p.len() == 6, "{}", p.len());
            let first = p.events()[0].time;
            assert!(first > 0.0 && first <= 1.0);
            firsts.push(first);
        }
        // Kolmogorov-Smirnov distance to U(0,1]; the 1% critical value at n=4000 is 0.0258.
        firsts.sort_by(f64::total_cmp);
        let n = firsts.len() as f64;
        let ks = firsts
            .iter()
            .enumerate()
            .map(|(i, &x)| f64::max((i as f64 + 1.0) / n - x, x - i as f64 / n))
            .fold(0.0, f64::max);
        assert!(ks < 0.0258, "ks = {ks}");
    }

    #[test]
    fn superpose_singleton_is_identity() {
        let p = sample_path(&unit_poisson(1.0), 10.0, 3).unwrap();
        assert_eq!(superpose(std::slice::from_ref(&p)).unwrap(), p);
    }

    #[test]
    fn superpose_merges_two_events() {
        let a = MarkedPath::new(
            2.0,
            vec![Event {
                time: 1.0,
                mark: 2.0,
            }],
        )
        .unwrap();
        let b = MarkedPath::new(
            2.0,
            vec![Event {
                time: 0.5,
                mark: 1.0,
            }],
        )
        .unwrap();
        let s = superpose(&[a, b]).unwrap();
        assert_eq!(
            s.events(),
            &[
                Event {
                    time: 0.5,
                    mark: 1.0
                },
                Event {
                    time: 1.0,
                    mark: 2.0
                }
            ]
        );
    }

    #[test]
    fn superpose_keeps_ties_in_input_order() {
        let a = MarkedPath::new(
            2.0,
            vec![Event {
                time: 1.0,
                mark: 2.0,
            }],
        )
        .unwrap();
        let b = MarkedPath::new(
            2.0,
            vec![Event {
                time: 1.0,
                mark: 3.0,
            }],
        )
        .unwrap();
        let s = superpose(&[a, b]).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.events()[0].mark, 2.0);
        assert_eq!(s.events()[1].mark, 3.0);
    }

    #[test]
    fn superpose_rejects_mismatched_windows() {
        let a = MarkedPath::empty(1.0).unwrap();
        let b = MarkedPath::empty(2.0).unwrap();
        assert!(matches!(superpose(&[a, b]), Err(Error::Usage(_))));
        assert!(matches!(superpose(&[]), Err(Error::Usage(_))));
    }

    #[test]
    fn lambda_of_each_family() {
        let on_off = TrafficModel::new(
            ProcessFamily::OnOff {
                switch_on_rate: 1.0,
                switch_off_rate: 3.0,
                peak_rate: 8.0,
            },
            MarkLaw::Unit,
        )
        .unwrap();
        assert!((on_off.lambda() - 2.0).abs() < 1e-15);
        let renewal = TrafficModel::new(
            ProcessFamily::Renewal {
                interarrival: InterArrival::Erlang {
                    shape: 2,
                    mean: 0.25,
                },
            },
            MarkLaw::Deterministic { value: 2.0 },
        )
        .unwrap();
        assert!((renewal.lambda() - 4.0).abs() < 1e-15);
        assert!((renewal.mean_work_rate() - 8.0).abs() < 1e-15);
        assert_eq!(renewal.poisson_rate(), None);
    }

    #[test]
    fn untilted_aggregate_sampler_matches_zero_tilt() {
        let m = unit_poisson(1.5);
        let mut r1 = rng_from_seed(3);
        let mut r2 = rng_from_seed(3);
        let (a, _) = sample_poisson_aggregate(&m, 10, 4.0, None, &mut r1).unwrap();
        let (b, mass) = sample_poisson_aggregate(
            &m,
            10,
            4.0,
            Some(TiltWindow {
                theta: 0.0,
                window: 1.0,
            }),
            &mut r2,
        )
        .unwrap();
        assert_eq!(a, b);
        assert_eq!(mass, 0.0);
    }
}
