//! Noiseless baseband waveform synthesis and the AWGN channel.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::ModulationClass;
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

/// A complex baseband frame held as separate in-phase and quadrature rails.
#[derive(Clone, Debug, PartialEq)]
pub struct Waveform {
    pub i: Vec<f64>,
    pub q: Vec<f64>,
}

impl Waveform {
    pub fn len(&self) -> usize {
        self.i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i.is_empty()
    }

    pub fn mean_power(&self) -> f64 {
        let n = self.len() as f64;
        self.i
            .iter()
            .zip(&self.q)
            .map(|(a, b)| a * a + b * b)
            .sum::<f64>()
            / n
    }

    fn is_finite(&self) -> bool {
        self.i.iter().chain(&self.q).all(|v| v.is_finite())
    }
}

/// Complex symbol alphabet of a linear modulation, before normalization.
fn constellation(class: ModulationClass) -> Vec<(f64, f64)> {
    match class {
        ModulationClass::Bpsk => vec![(1.0, 0.0), (-1.0, 0.0)],
        ModulationClass::Qpsk => vec![
            (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
            (-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
            (-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
            (FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
        ],
        ModulationClass::Psk8 => (0..8)
            .map(|k| {
                let a = PI * k as f64 / 4.0;
                (a.cos(), a.sin())
            })
            .collect(),
        ModulationClass::Qam16 => {
            let levels = [-3.0, -1.0, 1.0, 3.0];
            let scale = 10f64.sqrt();
            levels
                .iter()
                .flat_map(|&re| levels.iter().map(move |&im| (re / scale, im / scale)))
                .collect()
        }
        ModulationClass::Pam4 => {
            let scale = 5f64.sqrt();
            [-3.0, -1.0, 1.0, 3.0]
                .iter()
                .map(|&a| (a / scale, 0.0))
                .collect()
        }
        ModulationClass::Cpfsk => unreachable!("CPFSK is not a linear constellation"),
    }
}

pub fn symbol_alphabet(class: ModulationClass) -> Option<Vec<(f64, f64)>> {
    (class != ModulationClass::Cpfsk).then(|| constellation(class))
}

/// Modulation index of the binary CPFSK waveform.
pub const CPFSK_INDEX: f64 = 0.5;

/// Synthesizes one noiseless frame: random symbols, rectangular pulses
/// (sample repetition), a random carrier phase, then scaling to unit
/// average power.
pub fn modulate_frame(
    class: ModulationClass,
    frame_len: usize,
    samples_per_symbol: usize,
    seed: u64,
) -> Result<Waveform> {
    if samples_per_symbol == 0 || frame_len == 0 || frame_len % samples_per_symbol != 0 {
        return Err(Error::invalid(format!(
            "frame_len {frame_len} is not a positive multiple of samples_per_symbol {samples_per_symbol}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let n_sym = frame_len / samples_per_symbol;
    let mut i = Vec::with_capacity(frame_len);
    let mut q = Vec::with_capacity(frame_len);

    if class == ModulationClass::Cpfsk {
        // Binary CPFSK: each symbol advances the phase by ±pi*h, spread
        // linearly across its samples so the phase stays continuous.
        let step = PI * CPFSK_INDEX / samples_per_symbol as f64;
        let mut phase = 0.0f64;
        for _ in 0..n_sym {
            let dir = if rng.random::<bool>() { 1.0 } else { -1.0 };
            for _ in 0..samples_per_symbol {
                phase += dir * step;
                i.push(phase.cos());
                q.push(phase.sin());
            }
        }
    } else {
        let points = constellation(class);
        for _ in 0..n_sym {
            let (re, im) = points[rng.random_range(0..points.len())];
            for _ in 0..samples_per_symbol {
                i.push(re);
                q.push(im);
            }
        }
    }

    let theta = rng.random_range(0.0..2.0 * PI);
    let (s, c) = theta.sin_cos();
    for (a, b) in i.iter_mut().zip(q.iter_mut()) {
        let (re, im) = (*a, *b);
        *a = re * c - im * s;
        *b = re * s + im * c;
    }

    let mut wf = Waveform { i, q };
    let scale = wf.mean_power().sqrt().recip();
    wf.i.iter_mut().chain(wf.q.iter_mut()).for_each(|v| *v *= scale);
    Ok(wf)
}

/// Noise power for a unit-power signal at the given SNR.
pub fn noise_power(snr_db: f64) -> f64 {
    10f64.powf(-snr_db / 10.0)
}

/// Adds complex white Gaussian noise of total power `10^(-snr/10)`, split
/// evenly across the two rails.
pub fn add_awgn(frame: &Waveform, snr_db: i32, seed: u64) -> Result<Waveform> {
    if !frame.is_finite() {
        return Err(Error::invalid("input frame has non-finite samples"));
    }
    let sigma = (noise_power(snr_db as f64) / 2.0).sqrt();
    let mut rng = rng_from_seed(seed);
    let mut noisy = frame.clone();
    for v in noisy.i.iter_mut().chain(noisy.q.iter_mut()) {
        let n: f64 = StandardNormal.sample(&mut rng);
        *v += sigma * n;
    }
    Ok(noisy)
}
