//! Synthetic stand-in for the sensor hardware.
//!
//! Each trace follows a first-order absorption/desorption response on top of
//! a (optionally drifting) baseline:
//!
//! ```text
//! g(t) = B (1 + drift t)                                   t < t_inj
//!      + A (1 - exp(-(t - t_inj) / tau_a))                 t_inj <= t < t_des
//!      + A (1 - exp(-(t_des - t_inj) / tau_a)) exp(-(t - t_des) / tau_d)   t >= t_des
//! ```
//!
//! plus gaussian noise with standard deviation `noise_std * B`. Amplitude and
//! time constants sit at the midpoint of each class range, perturbed by a
//! per-bottle factor and a smaller per-measurement factor, then clamped to
//! the range.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{
    default_desorption_index, ClassLabel, Dataset, Measurement, Provenance, SensorTrace,
    CANONICAL_INJECTION, CANONICAL_POINTS, N_SENSORS, SAMPLE_RATE_HZ,
};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueRange {
    pub low: f64,
    pub high: f64,
}

impl ValueRange {
    pub const fn new(low: f64, high: f64) -> Self {
        Self { low, high }
    }

    /// `mid ± spread·mid`.
    pub fn around(mid: f64, spread: f64) -> Self {
        Self { low: mid * (1.0 - spread), high: mid * (1.0 + spread) }
    }

    pub fn mid(&self) -> f64 {
        0.5 * (self.low + self.high)
    }

    fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.low, self.high)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorArchetype {
    /// Conductance units.
    pub amplitude: ValueRange,
    /// Seconds.
    pub tau_absorption: ValueRange,
    /// Seconds.
    pub tau_desorption: ValueRange,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassArchetype {
    pub sensors: Vec<SensorArchetype>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub archetypes: BTreeMap<ClassLabel, ClassArchetype>,
    pub baseline: f64,
    /// Relative baseline slope per second.
    pub drift: f64,
    /// Noise standard deviation relative to the baseline level.
    pub noise_std: f64,
    /// Relative standard deviation of the shared per-bottle perturbation.
    pub bottle_jitter: f64,
    /// Relative standard deviation of the per-measurement perturbation.
    pub measurement_jitter: f64,
    pub counts: BTreeMap<ClassLabel, usize>,
    /// Bottles per wine class; batches for ethanol.
    pub bottles: BTreeMap<ClassLabel, usize>,
    pub sample_rate_hz: f64,
    pub n_points: usize,
    pub injection_index: usize,
}

/// Amplitudes per sensor and the absorption / desorption time constants of
/// each class. Classes differ in both the amplitude pattern across the array
/// and the speed of the rise, so they separate within the first second of
/// exposure.
fn default_archetypes() -> BTreeMap<ClassLabel, ClassArchetype> {
    let table: [(ClassLabel, [f64; N_SENSORS], f64, f64); 4] = [
        (ClassLabel::HQ, [6.0, 4.0, 8.0, 3.0, 5.0, 2.0], 10.0, 20.0),
        (ClassLabel::AQ, [10.0, 7.0, 9.0, 6.0, 8.0, 4.0], 8.0, 18.0),
        (ClassLabel::LQ, [18.0, 12.0, 10.0, 11.0, 14.0, 9.0], 6.0, 15.0),
        (ClassLabel::Ea, [25.0, 20.0, 6.0, 16.0, 7.0, 18.0], 4.0, 10.0),
    ];
    table
        .into_iter()
        .map(|(label, amps, tau_a, tau_d)| {
            let sensors = amps
                .iter()
                .enumerate()
                .map(|(s, &a)| {
                    let shift = 1.0 + 0.05 * s as f64;
                    SensorArchetype {
                        amplitude: ValueRange::around(a, 0.15),
                        tau_absorption: ValueRange::around(tau_a * shift, 0.1),
                        tau_desorption: ValueRange::around(tau_d * shift, 0.1),
                    }
                })
                .collect();
            (label, ClassArchetype { sensors })
        })
        .collect()
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            archetypes: default_archetypes(),
            baseline: 10.0,
            drift: 0.0,
            noise_std: 0.002,
            bottle_jitter: 0.05,
            measurement_jitter: 0.02,
            counts: [(ClassLabel::HQ, 51), (ClassLabel::AQ, 43), (ClassLabel::LQ, 141), (ClassLabel::Ea, 65)]
                .into_iter()
                .collect(),
            bottles: [(ClassLabel::HQ, 5), (ClassLabel::AQ, 4), (ClassLabel::LQ, 13), (ClassLabel::Ea, 5)]
                .into_iter()
                .collect(),
            sample_rate_hz: SAMPLE_RATE_HZ,
            n_points: CANONICAL_POINTS,
            injection_index: CANONICAL_INJECTION,
        }
    }
}

impl GeneratorConfig {
    /// Replaces the class counts (HQ, AQ, LQ, Ea order), capping the bottle
    /// count of each class at its measurement count.
    pub fn with_counts(mut self, counts: [usize; 4]) -> Self {
        for (label, n) in ClassLabel::ALL.into_iter().zip(counts) {
            self.counts.insert(label, n);
            let bottles = self.bottles.entry(label).or_insert(1);
            *bottles = (*bottles).clamp(1, n.max(1));
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(m));
        if !(self.sample_rate_hz > 0.0) {
            return err(format!("sample_rate_hz must be > 0, got {}", self.sample_rate_hz));
        }
        if self.injection_index >= self.n_points {
            return err(format!("injection_index {} must be < n_points {}", self.injection_index, self.n_points));
        }
        if !(self.baseline > 0.0) {
            return err(format!("baseline must be > 0, got {}", self.baseline));
        }
        for (name, v) in [
            ("noise_std", self.noise_std),
            ("bottle_jitter", self.bottle_jitter),
            ("measurement_jitter", self.measurement_jitter),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return err(format!("{name} must be >= 0, got {v}"));
            }
        }
        for (&label, &count) in &self.counts {
            if count == 0 {
                continue;
            }
            let bottles = self.bottles.get(&label).copied().unwrap_or(0);
            if bottles == 0 || count < bottles {
                return err(format!("{label}: {count} measurements cannot fill {bottles} bottles"));
            }
            let Some(arch) = self.archetypes.get(&label) else {
                return err(format!("{label}: no archetype"));
            };
            if arch.sensors.len() != N_SENSORS {
                return err(format!("{label}: archetype needs {N_SENSORS} sensors"));
            }
            for (s, sensor) in arch.sensors.iter().enumerate() {
                for (name, r) in [
                    ("amplitude", sensor.amplitude),
                    ("tau_absorption", sensor.tau_absorption),
                    ("tau_desorption", sensor.tau_desorption),
                ] {
                    if !(r.low <= r.high) || !(r.low >= 0.0) {
                        return err(format!("{label} sensor {}: {name} range [{}, {}]", s + 1, r.low, r.high));
                    }
                }
                if !(sensor.tau_absorption.low > 0.0 && sensor.tau_desorption.low > 0.0) {
                    return err(format!("{label} sensor {}: time constants must be > 0", s + 1));
                }
            }
        }
        Ok(())
    }
}

/// Noise-free response of one sensor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ResponseCurve {
    pub baseline: f64,
    pub drift: f64,
    pub amplitude: f64,
    pub tau_absorption: f64,
    pub tau_desorption: f64,
    pub t_injection: f64,
    pub t_desorption: f64,
}

impl ResponseCurve {
    pub fn value(&self, t: f64) -> f64 {
        let base = self.baseline * (1.0 + self.drift * t);
        let response = if t < self.t_injection {
            0.0
        } else if t < self.t_desorption {
            self.amplitude * (1.0 - (-(t - self.t_injection) / self.tau_absorption).exp())
        } else {
            self.peak() * (-(t - self.t_desorption) / self.tau_desorption).exp()
        };
        base + response
    }

    /// Response reached when absorption ends.
    pub fn peak(&self) -> f64 {
        self.amplitude * (1.0 - (-(self.t_desorption - self.t_injection) / self.tau_absorption).exp())
    }
}

/// Generates a dataset. A pure function of `config`.
pub fn generate_synthetic(config: &GeneratorConfig) -> Result<Dataset> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise = Normal::new(0.0, config.noise_std * config.baseline)
        .map_err(|e| Error::Config(format!("noise: {e}")))?;
    let rate = config.sample_rate_hz;
    let n = config.n_points;
    let injection = config.injection_index;
    let desorption = default_desorption_index(injection, n, rate);
    let t_injection = injection as f64 / rate;
    let t_desorption = desorption as f64 / rate;

    let mut measurements = Vec::new();
    let mut bottle_serial = 0usize;
    let mut batch_serial = 0usize;
    for label in ClassLabel::ALL {
        let count = config.counts.get(&label).copied().unwrap_or(0);
        if count == 0 {
            continue;
        }
        let archetype = &config.archetypes[&label];
        let n_bottles = config.bottles[&label];
        for b in 0..n_bottles {
            let bottle_id = if label.is_wine() {
                bottle_serial += 1;
                format!("B{bottle_serial:02}")
            } else {
                batch_serial += 1;
                format!("E{batch_serial:02}")
            };
            // Contiguous blocks; the first `count % n_bottles` bottles get one extra.
            let in_bottle = count / n_bottles + usize::from(b < count % n_bottles);
            let bottle_factors: Vec<[f64; 3]> = (0..N_SENSORS)
                .map(|_| std::array::from_fn(|_| jitter(&mut rng, config.bottle_jitter)))
                .collect();
            for _ in 0..in_bottle {
                let id = format!("m{:04}", measurements.len() + 1);
                let mut traces = Vec::with_capacity(N_SENSORS);
                for (s, sensor) in archetype.sensors.iter().enumerate() {
                    let [fa, fta, ftd] = bottle_factors[s];
                    let fm = jitter(&mut rng, config.measurement_jitter);
                    let curve = ResponseCurve {
                        baseline: config.baseline,
                        drift: config.drift,
                        amplitude: sensor.amplitude.clamp(sensor.amplitude.mid() * fa * fm),
                        tau_absorption: sensor.tau_absorption.clamp(sensor.tau_absorption.mid() * fta),
                        tau_desorption: sensor.tau_desorption.clamp(sensor.tau_desorption.mid() * ftd),
                        t_injection,
                        t_desorption,
                    };
                    let samples: Vec<f64> = (0..n)
                        .map(|k| {
                            let v = curve.value(k as f64 / rate);
                            if config.noise_std > 0.0 {
                                v + noise.sample(&mut rng)
                            } else {
                                v
                            }
                        })
                        .collect();
                    if let Some(k) = samples.iter().position(|&v| v <= 0.0) {
                        return Err(Error::Config(format!(
                            "{id} sensor {}: generated non-positive conductance at k={k}; lower noise_std or drift",
                            s + 1
                        )));
                    }
                    traces.push(SensorTrace { sensor_index: s + 1, samples, sample_rate_hz: rate });
                }
                measurements.push(Measurement {
                    id,
                    bottle_id: bottle_id.clone(),
                    label,
                    traces,
                    n_points: n,
                    injection_index: injection,
                    desorption_index: desorption,
                });
            }
        }
    }
    Dataset::new(measurements, Provenance::Synthetic { seed: config.seed })
}

fn jitter(rng: &mut ChaCha8Rng, rel_std: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    1.0 + rel_std * z
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(counts: [usize; 4]) -> GeneratorConfig {
        GeneratorConfig {
            bottles: ClassLabel::ALL.into_iter().map(|l| (l, 1)).collect(),
            ..GeneratorConfig::default()
        }
        .with_counts(counts)
    }

    #[test]
    fn default_config_mirrors_class_sizes() {
        let d = generate_synthetic(&GeneratorConfig::default()).unwrap();
        assert_eq!(d.len(), 300);
        let counts: Vec<usize> = d.manifest.class_counts.values().copied().collect();
        assert_eq!(counts, vec![51, 43, 141, 65]);
        let wine_bottles = d.manifest.bottles.iter().filter(|b| b.label.is_wine()).count();
        assert_eq!(wine_bottles, 22);
    }

    #[test]
    fn noiseless_traces_are_the_archetype() {
        let cfg = GeneratorConfig {
            noise_std: 0.0,
            bottle_jitter: 0.0,
            measurement_jitter: 0.0,
            ..small([1, 1, 1, 1])
        };
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, b);
        let m = &a.measurements[2];
        assert_eq!(m.label, ClassLabel::LQ);
        let arch = &cfg.archetypes[&ClassLabel::LQ].sensors[4];
        let rate = SAMPLE_RATE_HZ;
        for k in [0, 184, 185, 186, 1000, 1664, 1665, 3329] {
            let t = k as f64 / rate;
            let (t0, t1) = (185.0 / rate, 1665.0 / rate);
            let amp = arch.amplitude.mid();
            let expected = if k < 185 {
                10.0
            } else if k < 1665 {
                10.0 + amp * (1.0 - (-(t - t0) / arch.tau_absorption.mid()).exp())
            } else {
                10.0 + amp * (1.0 - (-(t1 - t0) / arch.tau_absorption.mid()).exp())
                    * (-(t - t1) / arch.tau_desorption.mid()).exp()
            };
            assert_eq!(m.traces[4].samples[k], expected, "k={k}");
        }
    }

    #[test]
    fn noiseless_phases_are_monotone() {
        let cfg = GeneratorConfig { noise_std: 0.0, ..small([2, 2, 2, 2]) };
        for m in generate_synthetic(&cfg).unwrap().measurements {
            for t in &m.traces {
                let abs = &t.samples[m.injection_index..m.desorption_index];
                let des = &t.samples[m.desorption_index..];
                assert!(abs.windows(2).all(|w| w[1] >= w[0]));
                assert!(des.windows(2).all(|w| w[1] <= w[0]));
            }
        }
    }

    #[test]
    fn seeds_change_samples_not_roster() {
        let a = generate_synthetic(&GeneratorConfig { seed: 7, ..small([3, 3, 3, 0]) }).unwrap();
        let b = generate_synthetic(&GeneratorConfig { seed: 8, ..small([3, 3, 3, 0]) }).unwrap();
        assert_eq!(a.len(), 9);
        assert_eq!(a.manifest.measurements, b.manifest.measurements);
        assert_eq!(a.manifest.bottles, b.manifest.bottles);
        assert_eq!(a.manifest.class_counts, b.manifest.class_counts);
        assert_ne!(a.measurements[0].traces[0].samples, b.measurements[0].traces[0].samples);
    }

    #[test]
    fn bottles_are_contiguous_blocks() {
        let d = generate_synthetic(&GeneratorConfig::default()).unwrap();
        let ids: Vec<&str> = d.measurements.iter().map(|m| m.bottle_id.as_str()).collect();
        let mut blocks = ids.clone();
        blocks.dedup();
        assert_eq!(blocks.len(), 27);
        assert_eq!(ids.iter().filter(|&&b| b == "B01").count(), 11);
        assert!(d.measurements.iter().filter(|m| m.label == ClassLabel::Ea).all(|m| m.bottle_id.starts_with('E')));
    }

    #[test]
    fn with_counts_caps_bottles() {
        let d = generate_synthetic(&GeneratorConfig::default().with_counts([3, 3, 3, 0])).unwrap();
        assert_eq!(d.len(), 9);
        assert_eq!(d.manifest.bottles.len(), 9);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = small([2, 1, 1, 0]);
        cfg.bottles.insert(ClassLabel::HQ, 3);
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
        let cfg = GeneratorConfig { noise_std: -1.0, ..GeneratorConfig::default() };
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
        let mut cfg = GeneratorConfig::default();
        cfg.archetypes.get_mut(&ClassLabel::AQ).unwrap().sensors[0].amplitude = ValueRange::new(3.0, 1.0);
        assert!(matches!(generate_synthetic(&cfg), Err(Error::Config(_))));
    }
}
