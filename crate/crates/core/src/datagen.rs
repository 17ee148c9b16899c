//! Seeded synthetic storm data.
//!
//! A latent driver combines a slow quiet-time AR(1) process with storm events
//! that arrive as a Bernoulli process on the 5-minute grid (Poisson in the
//! limit). Each storm is a piecewise-linear pulse: a one-hour rise, then a
//! linear decay over 6 to 18 hours. The solar-wind channels see the driver
//! immediately through distinct linear and saturating maps plus noise; Dst is
//! an exponentially smoothed, sign-flipped copy; Kp responds to the driver
//! 3 or 6 hours later (drawn per storm) through `9 e / (e + 3)`, is rounded
//! to thirds and clamped to `[0, 9]`.
//!
//! Only integer RNG state and IEEE basic arithmetic (`+ - * /`, `sqrt`,
//! `round`) are used, so output is bit-identical across platforms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{MeasurementSeries, SolarQuantity, Sources, DST_CADENCE, KP_CADENCE, SOLAR_WIND_CADENCE};
use crate::rng::{derive_seed, SplitMix64};
use crate::time::Timestamp;

const STEPS_PER_HOUR: usize = 12;
const STEPS_PER_DAY: usize = 24 * STEPS_PER_HOUR;
const RISE_STEPS: usize = STEPS_PER_HOUR;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_days: u32,
    pub storm_rate_per_day: f64,
    pub noise_scale: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            n_days: 120,
            storm_rate_per_day: 0.06,
            noise_scale: 1.0,
        }
    }
}

impl SynthConfig {
    pub fn start() -> Timestamp {
        Timestamp::from_ymd_hm(2021, 1, 1, 0, 0).expect("valid date")
    }

    fn validate(&self) -> Result<()> {
        if self.n_days == 0 {
            return Err(Error::InvalidConfig("n_days must be >= 1".into()));
        }
        if !(self.storm_rate_per_day >= 0.0 && self.storm_rate_per_day.is_finite()) {
            return Err(Error::InvalidConfig("storm rate must be a finite value >= 0".into()));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::InvalidConfig("noise scale must be a finite value >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct Storm {
    onset: usize,
    amplitude: f64,
    decay_steps: usize,
    delay_steps: usize,
}

impl Storm {
    fn pulse(&self, step: usize) -> f64 {
        if step < self.onset {
            return 0.0;
        }
        let s = step - self.onset;
        if s < RISE_STEPS {
            self.amplitude * (s + 1) as f64 / RISE_STEPS as f64
        } else if s < RISE_STEPS + self.decay_steps {
            self.amplitude * (1.0 - (s - RISE_STEPS) as f64 / self.decay_steps as f64)
        } else {
            0.0
        }
    }
}

fn round_to(x: f64, steps_per_unit: f64) -> f64 {
    (x * steps_per_unit).round() / steps_per_unit
}

/// First-order autoregressive noise with unit-scale innovations.
struct Ar1 {
    value: f64,
    keep: f64,
    innovation: f64,
}

impl Ar1 {
    fn step(&mut self, rng: &mut SplitMix64) -> f64 {
        self.value = self.keep * self.value + self.innovation * rng.normal();
        self.value
    }
}

pub fn generate(config: &SynthConfig) -> Result<Sources> {
    config.validate()?;
    let steps = config.n_days as usize * STEPS_PER_DAY;
    let noise = config.noise_scale;

    let mut quiet_rng = SplitMix64::new(derive_seed(config.seed, 1));
    let mut quiet_proc = Ar1 {
        value: 0.0,
        keep: 0.995,
        innovation: 0.1 * noise,
    };
    let quiet: Vec<f64> = (0..steps).map(|_| quiet_proc.step(&mut quiet_rng)).collect();

    let mut storm_rng = SplitMix64::new(derive_seed(config.seed, 2));
    let p_onset = config.storm_rate_per_day / STEPS_PER_DAY as f64;
    let mut storms = Vec::new();
    for step in 0..steps {
        if storm_rng.bernoulli(p_onset) {
            storms.push(Storm {
                onset: step,
                amplitude: storm_rng.uniform(2.0, 8.0),
                decay_steps: 6 * STEPS_PER_HOUR + storm_rng.below(12 * STEPS_PER_HOUR + 1),
                delay_steps: if storm_rng.bernoulli(0.5) { 3 } else { 6 } * STEPS_PER_HOUR,
            });
        }
    }
    let storm_at = |step: usize| storms.iter().map(|s| s.pulse(step)).sum::<f64>();
    let storm_delayed = |step: usize| {
        storms
            .iter()
            .filter(|s| step >= s.delay_steps)
            .map(|s| s.pulse(step - s.delay_steps))
            .sum::<f64>()
    };

    // Solar wind: immediate response.
    let mut sw_rng = SplitMix64::new(derive_seed(config.seed, 3));
    let mut bx_noise = Ar1 { value: 0.0, keep: 0.98, innovation: 0.4 * noise };
    let mut by_noise = Ar1 { value: 0.0, keep: 0.98, innovation: 0.4 * noise };
    let mut solar: [Vec<Option<f64>>; 7] = std::array::from_fn(|_| Vec::with_capacity(steps));
    let mut push = |q: SolarQuantity, v: f64| solar[q as usize].push(Some(v));
    let mut storm_sw = Vec::with_capacity(steps);
    for (step, &q) in quiet.iter().enumerate() {
        let s = storm_at(step);
        storm_sw.push(s);
        let bx = 0.3 * s + 2.0 * bx_noise.step(&mut sw_rng);
        let by = 0.2 * s + 2.0 * by_noise.step(&mut sw_rng);
        let bz = -(0.5 * q + 2.5 * s) + noise * sw_rng.normal();
        let fma = (bx * bx + by * by + bz * bz).sqrt() + 1.0 + 0.3 * noise * sw_rng.normal().abs();
        let speed = 400.0 + 30.0 * q + 120.0 * s / (1.0 + s / 4.0) + 10.0 * noise * sw_rng.normal();
        let density = 5.0 + 0.8 * q + 3.0 * s + 0.5 * noise * sw_rng.normal();
        let temperature = 1.0e5 + 1.0e4 * q + 4.0e4 * s + 5.0e3 * noise * sw_rng.normal();
        push(SolarQuantity::Fma, round_to(fma.max(0.0), 100.0));
        push(SolarQuantity::Bx, round_to(bx, 100.0));
        push(SolarQuantity::By, round_to(by, 100.0));
        push(SolarQuantity::Bz, round_to(bz, 100.0));
        push(SolarQuantity::Speed, round_to(speed.max(0.0), 10.0));
        push(SolarQuantity::Density, round_to(density.max(0.0), 100.0));
        push(SolarQuantity::Temperature, round_to(temperature.max(0.0), 1.0));
    }

    // Dst: smoothed driver, negative during storms, sampled on the hour.
    let mut dst_rng = SplitMix64::new(derive_seed(config.seed, 4));
    let mut smooth = 0.0;
    let mut dst = Vec::with_capacity(steps / STEPS_PER_HOUR);
    for (step, &q) in quiet.iter().enumerate() {
        smooth = 0.97 * smooth + 0.03 * (q + storm_sw[step]);
        if step % STEPS_PER_HOUR == 0 {
            let v = -8.0 - 20.0 * smooth + 3.0 * noise * dst_rng.normal();
            dst.push(Some(round_to(v, 1.0)));
        }
    }

    // Kp: delayed saturating response on the 3-hour grid, plus a slow
    // magnetospheric state that no solar-wind channel sees.
    let mut kp_rng = SplitMix64::new(derive_seed(config.seed, 5));
    let mut hidden = Ar1 {
        value: 0.0,
        keep: 0.8,
        innovation: 0.2 * noise,
    };
    let kp_stride = 3 * STEPS_PER_HOUR;
    let mut kp = Vec::with_capacity(steps / kp_stride);
    for step in (0..steps).step_by(kp_stride) {
        let lagged_quiet = if step >= kp_stride { quiet[step - kp_stride] } else { 0.0 };
        let h = hidden.step(&mut kp_rng);
        let e = (1.0 + 0.5 * lagged_quiet + h + storm_delayed(step)).max(0.0);
        let v = 9.0 * e / (e + 3.0) + 0.45 * noise * kp_rng.normal();
        kp.push(Some(round_to(v, 3.0).clamp(0.0, 9.0)));
    }

    let start = SynthConfig::start();
    let solar = {
        let mut it = solar.into_iter();
        std::array::from_fn(|q| {
            MeasurementSeries::new(SolarQuantity::ALL[q].name(), SOLAR_WIND_CADENCE, start, it.next().unwrap())
                .expect("aligned start")
        })
    };
    Ok(Sources {
        solar,
        dst: MeasurementSeries::new("dst", DST_CADENCE, start, dst)?,
        kp: MeasurementSeries::new("kp", KP_CADENCE, start, kp)?,
    })
}
