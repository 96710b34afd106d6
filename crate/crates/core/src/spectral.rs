//! Orthonormal Haar wavelet analysis and the frequency-domain summaries used
//! as window features: per-band energies and spectral entropy.
//!
//! Odd-length inputs at any level are padded by repeating the last sample, so
//! energy is conserved exactly only when no padding is triggered.

use crate::error::{Error, Result};
use std::f64::consts::FRAC_1_SQRT_2;

/// Decomposition depth used by the feature extractor.
pub const DEFAULT_LEVELS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct DwtDecomposition {
    /// `details[0]` is level 1 (finest scale).
    pub details: Vec<Vec<f64>>,
    /// Approximation coefficients at the deepest level.
    pub approx: Vec<f64>,
}

impl DwtDecomposition {
    pub fn levels(&self) -> usize {
        self.details.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandEnergyProfile {
    /// One entry per detail level (finest first), then the approximation.
    pub energies: Vec<f64>,
    pub total: f64,
}

impl BandEnergyProfile {
    pub fn from_energies(energies: Vec<f64>) -> Self {
        let total = energies.iter().sum();
        Self { energies, total }
    }

    /// Energy of band `index` relative to the total; 0 when the profile is empty
    /// or the band does not exist.
    pub fn fraction(&self, index: usize) -> f64 {
        match self.energies.get(index) {
            Some(&e) if self.total > 0.0 => e / self.total,
            _ => 0.0,
        }
    }
}

/// Multi-level Haar analysis. `levels` is clamped to `floor(log2(len))`.
pub fn haar_dwt(signal: &[f64], levels: usize) -> Result<DwtDecomposition> {
    if signal.len() < 2 {
        return Err(Error::Size(format!(
            "Haar transform needs at least 2 samples, got {}",
            signal.len()
        )));
    }
    if levels == 0 {
        return Err(Error::Config("decomposition depth must be at least 1".into()));
    }
    if let Some(i) = signal.iter().position(|v| !v.is_finite()) {
        return Err(Error::Data {
            index: i,
            message: "non-finite sample".into(),
        });
    }
    let max_levels = usize::BITS - 1 - signal.len().leading_zeros();
    let levels = levels.min(max_levels as usize);

    let mut approx = signal.to_vec();
    let mut details = Vec::with_capacity(levels);
    for _ in 0..levels {
        if approx.len() % 2 == 1 {
            let last = *approx.last().expect("non-empty");
            approx.push(last);
        }
        let (a, d): (Vec<f64>, Vec<f64>) = approx
            .chunks_exact(2)
            .map(|p| ((p[0] + p[1]) * FRAC_1_SQRT_2, (p[0] - p[1]) * FRAC_1_SQRT_2))
            .unzip();
        details.push(d);
        approx = a;
    }
    Ok(DwtDecomposition { details, approx })
}

/// Inverse of [`haar_dwt`] for inputs whose length never required padding.
pub fn haar_idwt(decomp: &DwtDecomposition) -> Vec<f64> {
    let mut signal = decomp.approx.clone();
    for detail in decomp.details.iter().rev() {
        signal = signal
            .iter()
            .zip(detail)
            .flat_map(|(&a, &d)| [(a + d) * FRAC_1_SQRT_2, (a - d) * FRAC_1_SQRT_2])
            .collect();
    }
    signal
}

pub fn band_energies(decomp: &DwtDecomposition) -> BandEnergyProfile {
    let energy = |c: &[f64]| c.iter().map(|v| v * v).sum::<f64>();
    let energies = decomp
        .details
        .iter()
        .map(|d| energy(d))
        .chain(std::iter::once(energy(&decomp.approx)))
        .collect();
    BandEnergyProfile::from_energies(energies)
}

/// Shannon entropy (bits) of the normalised band-energy distribution.
/// A profile with zero total energy has entropy 0.
pub fn spectral_entropy(profile: &BandEnergyProfile) -> f64 {
    if profile.total <= 0.0 {
        return 0.0;
    }
    profile
        .energies
        .iter()
        .map(|&e| e / profile.total)
        .filter(|&p| p > 0.0)
        .map(|p| -p * p.log2())
        .sum::<f64>()
        .max(0.0)
}
