//! Deterministic random `H^s` fields.
//!
//! A field has coefficients `(1 + |k|^2)^{-(s + beta)/2} * zeta_k` with `zeta_k`
//! standard complex Gaussians (`E|zeta|^2 = 1`), real Gaussians on self-conjugate
//! modes. Modes are drawn shell by shell in `|k|_inf`, so two grids that share
//! a band limit produce identical low-mode content for the same seed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, MAX_DIM};
use crate::spectrum::Spectrum;

/// Default decay margin for the given torus dimension.
pub fn default_decay_margin(dim: usize) -> f64 {
    if dim == 1 {
        0.6
    } else {
        1.1
    }
}

/// Independent generator for trial `trial` of a run seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSampler {
    pub s: f64,
    pub decay_margin: f64,
    pub components: usize,
    /// Largest `|k_i|` that receives energy; `None` means `N/2 - 1`.
    pub band: Option<usize>,
    /// Overall amplitude multiplier.
    pub amplitude: f64,
}

impl FieldSampler {
    pub fn new(s: f64, decay_margin: f64, components: usize) -> Self {
        Self {
            s,
            decay_margin,
            components,
            band: None,
            amplitude: 1.0,
        }
    }

    pub fn with_band(mut self, band: usize) -> Self {
        self.band = Some(band);
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    fn validate(&self, spec: GridSpec) -> Result<usize> {
        let half_dim = spec.dim() as f64 / 2.0;
        if !(self.decay_margin > half_dim) {
            return Err(Error::InvalidParameter(format!(
                "decay margin {} must exceed n/2 = {half_dim}",
                self.decay_margin
            )));
        }
        if !(self.s >= 0.0 && self.s.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Sobolev index {} must be >= 0",
                self.s
            )));
        }
        if self.components == 0 {
            return Err(Error::InvalidParameter(
                "a field needs at least one component".into(),
            ));
        }
        let max_band = spec.size() / 2 - 1;
        let band = self.band.unwrap_or(max_band);
        if band > max_band {
            return Err(Error::InvalidParameter(format!(
                "band {band} exceeds N/2 - 1 = {max_band}"
            )));
        }
        Ok(band)
    }

    /// Standard deviation of the coefficient at wavevector `k`.
    pub fn sigma(&self, k: &[i64]) -> f64 {
        let k2: f64 = k.iter().map(|&v| (v * v) as f64).sum();
        self.amplitude * (1.0 + k2).powf(-(self.s + self.decay_margin) / 2.0)
    }

    /// `E ||f||_0^2` over the modes this sampler fills.
    pub fn expected_l2_squared(&self, spec: GridSpec) -> Result<f64> {
        let band = self.validate(spec)?;
        let mut total = 0.0;
        for_each_mode(spec.dim(), band, |k| {
            // k and -k each carry sigma^2
            let m = if k.iter().all(|&v| v == 0) { 1.0 } else { 2.0 };
            total += m * self.sigma(k).powi(2);
        });
        Ok(total * self.components as f64)
    }

    pub fn sample(&self, spec: GridSpec, rng: &mut ChaCha8Rng) -> Result<Spectrum> {
        let band = self.validate(spec)?;
        let len = spec.len();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); len * self.components];
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        for_each_mode(spec.dim(), band, |k| {
            let sigma = self.sigma(k);
            let mut idx = [0usize; MAX_DIM];
            let mut neg = [0usize; MAX_DIM];
            for axis in 0..spec.dim() {
                idx[axis] = spec.index_of_frequency(k[axis]);
                neg[axis] = spec.index_of_frequency(-k[axis]);
            }
            let j = spec.flat_index(idx);
            let jn = spec.flat_index(neg);
            for c in 0..self.components {
                let z = if j == jn {
                    Complex64::new(StandardNormal.sample(rng), 0.0)
                } else {
                    let a: f64 = StandardNormal.sample(rng);
                    let b: f64 = StandardNormal.sample(rng);
                    Complex64::new(a * inv_sqrt2, b * inv_sqrt2)
                };
                coeffs[c * len + j] = z * sigma;
                coeffs[c * len + jn] = z.conj() * sigma;
            }
        });
        Spectrum::from_coeffs(spec, self.components, coeffs)
    }

    pub fn sample_seeded(&self, spec: GridSpec, seed: u64) -> Result<Spectrum> {
        self.sample(spec, &mut ChaCha8Rng::seed_from_u64(seed))
    }
}

/// Random real field in `H^s` with the default band (all non-Nyquist modes).
pub fn random_field(
    spec: GridSpec,
    s: f64,
    seed: u64,
    decay_margin: f64,
    components: usize,
) -> Result<Spectrum> {
    FieldSampler::new(s, decay_margin, components).sample_seeded(spec, seed)
}

/// Visits one representative of each `{k, -k}` pair with `|k|_inf <= band`,
/// shell by shell, lexicographic within a shell.
fn for_each_mode(dim: usize, band: usize, mut f: impl FnMut(&[i64])) {
    let b = band as i64;
    f(&vec![0; dim]);
    for shell in 1..=b {
        match dim {
            1 => f(&[shell]),
            _ => {
                for k0 in -shell..=shell {
                    for k1 in -shell..=shell {
                        if k0.abs().max(k1.abs()) != shell {
                            continue;
                        }
                        if k0 > 0 || (k0 == 0 && k1 > 0) {
                            f(&[k0, k1]);
                        }
                    }
                }
            }
        }
    }
}
