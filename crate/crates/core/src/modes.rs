//! Communication modes and the DoF family of metrics.
//!
//! All capacities are in bits/s/Hz with the noise power normalized to one, so
//! the mode power gains are `g_k = σ_k²` and the transmit budget is the SNR.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::channel::ChannelMatrix;
use crate::error::{invalid, Error, Result};
use crate::CMatrix;

/// Default relative rank tolerance per antenna: `dof` counts `σ_n ≥ 1e-10·max(N_r, N_t)·σ_1`.
pub const RANK_TOL_PER_ANTENNA: f64 = 1e-10;

/// Default EDoF₁ dominance threshold on power (20 dB below the strongest mode).
pub const DEFAULT_DOMINANCE: f64 = 0.01;

/// Default EDoF₃ octave step.
pub const DEFAULT_DELTA: f64 = 0.01;


/// Non-increasing, non-negative, finite singular values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularSpectrum {
    values: Vec<f64>,
    /// `max(N_r, N_t)` of the matrix the values came from; sets the default rank tolerance.
    max_dim: usize,
}

impl SingularSpectrum {
    /// Validates that `values` is already sorted descending.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let max_dim = values.len();
        Self::with_dims(values, max_dim)
    }

    pub fn with_dims(values: Vec<f64>, max_dim: usize) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("spectrum must be non-empty"));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(invalid("singular values must be finite and non-negative"));
        }
        if values.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("singular values must be sorted in non-increasing order"));
        }
        Ok(Self {
            values,
            max_dim: max_dim.max(1),
        })
    }

    /// Sorts before validating.
    pub fn from_unsorted(mut values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| v.is_nan()) {
            return Err(invalid("singular values must not be NaN"));
        }
        values.sort_by(|a, b| b.total_cmp(a));
        Self::new(values)
    }

    /// Spectrum whose squared values are the given power gains.
    pub fn from_power_gains(gains: &[f64]) -> Result<Self> {
        if gains.iter().any(|g| !g.is_finite() || *g < 0.0) {
            return Err(invalid("power gains must be finite and non-negative"));
        }
        Self::from_unsorted(gains.iter().map(|g| g.sqrt()).collect())
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max_dim(&self) -> usize {
        self.max_dim
    }

    pub fn largest(&self) -> f64 {
        self.values[0]
    }

    /// `σ_k²`, in the same order.
    pub fn power_gains(&self) -> Vec<f64> {
        self.values.iter().map(|s| s * s).collect()
    }

    pub fn default_rank_tol(&self) -> f64 {
        RANK_TOL_PER_ANTENNA * self.max_dim as f64
    }

    /// Every value multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor.is_finite() && factor > 0.0) {
            return Err(invalid(format!("scale factor must be positive, got {factor}")));
        }
        Self::with_dims(self.values.iter().map(|v| v * factor).collect(), self.max_dim)
    }

    /// Rescaled so that `Σσ² = target`.
    pub fn with_total_power(&self, target: f64) -> Result<Self> {
        let total: f64 = self.power_gains().iter().sum();
        if total == 0.0 {
            return Err(Error::ZeroSpectrum);
        }
        self.scaled((target / total).sqrt())
    }

    fn require_positive(&self) -> Result<f64> {
        let s1 = self.largest();
        if s1 > 0.0 {
            Ok(s1)
        } else {
            Err(Error::ZeroSpectrum)
        }
    }
}

/// SVD factors truncated to `min(N_r, N_t)` modes.
#[derive(Debug, Clone)]
pub struct ModeDecomposition {
    /// `N_r × K`, columns ψ_n.
    pub left: CMatrix,
    /// `N_t × K`, columns φ_n.
    pub right: CMatrix,
    pub spectrum: SingularSpectrum,
}

impl ModeDecomposition {
    pub fn n_modes(&self) -> usize {
        self.spectrum.len()
    }

    /// `Ψ·diag(σ)·Φᴴ`.
    pub fn reconstruct(&self) -> CMatrix {
        let mut scaled = self.left.clone();
        for (k, mut col) in scaled.column_iter_mut().enumerate() {
            col *= crate::C64::from(self.spectrum.values()[k]);
        }
        scaled * self.right.adjoint()
    }
}

pub fn decompose(h: &ChannelMatrix) -> Result<ModeDecomposition> {
    decompose_matrix(h.entries())
}

pub fn decompose_matrix(h: &CMatrix) -> Result<ModeDecomposition> {
    check_nonzero(h)?;
    let max_dim = h.nrows().max(h.ncols());
    let (values, left, right) = crate::linalg::svd(h)?;
    let spectrum = SingularSpectrum::with_dims(values, max_dim)?;
    Ok(ModeDecomposition { left, right, spectrum })
}

/// Singular values only; cheaper than [`decompose`].
pub fn singular_spectrum(h: &ChannelMatrix) -> Result<SingularSpectrum> {
    singular_values_of(h.entries())
}

pub fn singular_values_of(h: &CMatrix) -> Result<SingularSpectrum> {
    check_nonzero(h)?;
    let max_dim = h.nrows().max(h.ncols());
    SingularSpectrum::with_dims(crate::linalg::singular_values(h)?, max_dim)
}

fn check_nonzero(h: &CMatrix) -> Result<()> {
    if h.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(invalid("matrix entries must be finite"));
    }
    if h.iter().all(|v| v.re == 0.0 && v.im == 0.0) {
        return Err(Error::ZeroChannel);
    }
    Ok(())
}

/// Number of modes with `σ_n ≥ rank_tol·σ_1`.
pub fn dof(spectrum: &SingularSpectrum, rank_tol: f64) -> Result<usize> {
    if !(rank_tol.is_finite() && rank_tol >= 0.0) {
        return Err(invalid(format!("rank tolerance must be non-negative, got {rank_tol}")));
    }
    let s1 = spectrum.require_positive()?;
    Ok(spectrum.values().iter().filter(|&&s| s >= rank_tol * s1).count())
}

/// [`dof`] at the default tolerance `1e-10·max(N_r, N_t)`.
pub fn dof_default(spectrum: &SingularSpectrum) -> Result<usize> {
    dof(spectrum, spectrum.default_rank_tol())
}

/// Number of dominant modes: `σ_n² ≥ η·σ_1²`.
pub fn edof1(spectrum: &SingularSpectrum, dominance: f64) -> Result<usize> {
    if !(dominance > 0.0 && dominance < 1.0) {
        return Err(invalid(format!("dominance threshold must lie in (0, 1), got {dominance}")));
    }
    let s1 = spectrum.require_positive()?;
    let floor = dominance * s1 * s1;
    Ok(spectrum.values().iter().filter(|&&s| s * s >= floor).count())
}

/// Knee of `log σ_n`: the mode after which the decay bends down hardest.
///
/// Diagnostic only. Returns the number of modes up to and including the knee.
pub fn edof1_knee(spectrum: &SingularSpectrum) -> Result<usize> {
    let s1 = spectrum.require_positive()?;
    let logs: Vec<f64> = spectrum
        .values()
        .iter()
        .take_while(|&&s| s > s1 * 1e-15)
        .map(|s| s.ln())
        .collect();
    if logs.len() < 3 {
        return Ok(logs.len());
    }
    let (knee, _) = (1..logs.len() - 1)
        .map(|n| (n, logs[n - 1] - 2.0 * logs[n] + logs[n + 1]))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
    Ok(knee + 1)
}

/// Paraxial mode count of two parallel linear apertures, `L_t·L_r/(λ·d)`.
pub fn edof1_limit_linear(l_t: f64, l_r: f64, wavelength: f64, distance: f64) -> Result<f64> {
    for (name, v) in [("l_t", l_t), ("l_r", l_r), ("wavelength", wavelength), ("distance", distance)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(invalid(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(l_t * l_r / (wavelength * distance))
}

/// `(Σσ²)² / Σσ⁴`.
pub fn edof2(spectrum: &SingularSpectrum) -> Result<f64> {
    let s1 = spectrum.require_positive()?;
    // scale by σ_1 first so σ⁴ cannot under/overflow
    let (sum2, sum4) = spectrum.values().iter().fold((0.0, 0.0), |(a, b), &s| {
        let r = (s / s1) * (s / s1);
        (a + r, b + r * r)
    });
    Ok(sum2 * sum2 / sum4)
}

/// Water-filling solution over the modes of a spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerAllocation {
    /// Per-mode powers, aligned with the spectrum order.
    pub powers: Vec<f64>,
    pub water_level: f64,
    pub budget: f64,
    /// Number of modes with positive power (always a prefix of the sorted modes).
    pub active: usize,
}

impl PowerAllocation {
    /// `Σ log2(1 + p_k·g_k)` for the gains the allocation was computed with.
    pub fn capacity(&self, gains: &[f64]) -> f64 {
        self.powers.iter().zip(gains).map(|(p, g)| (p * g).ln_1p()).sum::<f64>() / LN_2
    }
}

/// Exact active-set water-filling with mode gains `σ_k²/noise`.
pub fn waterfill(spectrum: &SingularSpectrum, budget: f64, noise: f64) -> Result<PowerAllocation> {
    if !(budget.is_finite() && budget > 0.0) {
        return Err(invalid(format!("power budget must be positive, got {budget}")));
    }
    if !(noise.is_finite() && noise > 0.0) {
        return Err(invalid(format!("noise power must be positive, got {noise}")));
    }
    spectrum.require_positive()?;
    let gains: Vec<f64> = spectrum.values().iter().map(|s| s * s / noise).collect();
    waterfill_gains(&gains, budget)
}

/// Water-filling directly on descending power gains.
pub fn waterfill_gains(gains: &[f64], budget: f64) -> Result<PowerAllocation> {
    if gains.is_empty() || !(gains[0] > 0.0) {
        return Err(Error::ZeroSpectrum);
    }
    if gains.windows(2).any(|w| w[1] > w[0]) {
        return Err(invalid("gains must be sorted in non-increasing order"));
    }
    let mut inv_sum = 0.0;
    let mut best = (1, budget + 1.0 / gains[0]);
    for (k, &g) in gains.iter().enumerate() {
        if g <= 0.0 {
            break;
        }
        inv_sum += 1.0 / g;
        let level = (budget + inv_sum) / (k + 1) as f64;
        if level > 1.0 / g {
            best = (k + 1, level);
        } else {
            break;
        }
    }
    let (active, water_level) = best;
    let powers = gains
        .iter()
        .enumerate()
        .map(|(k, g)| if k < active { water_level - 1.0 / g } else { 0.0 })
        .collect();
    Ok(PowerAllocation {
        powers,
        water_level,
        budget,
        active,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapacityPolicy {
    #[default]
    Waterfilling,
    /// `snr/K` on each of the DoF modes.
    Equal,
}

/// Capacity in bits/s/Hz with unit noise and total transmit power `snr`.
pub fn capacity(spectrum: &SingularSpectrum, snr: f64, policy: CapacityPolicy) -> Result<f64> {
    if !(snr.is_finite() && snr > 0.0) {
        return Err(invalid(format!("snr must be positive, got {snr}")));
    }
    let gains = spectrum.power_gains();
    match policy {
        CapacityPolicy::Waterfilling => Ok(waterfill(spectrum, snr, 1.0)?.capacity(&gains)),
        CapacityPolicy::Equal => {
            let k = dof_default(spectrum)?;
            let p = snr / k as f64;
            Ok(gains[..k].iter().map(|g| (p * g).ln_1p()).sum::<f64>() / LN_2)
        }
    }
}

/// EDoF₃ at one SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edof3 {
    /// Richardson-extrapolated central difference of `C(snr·2^δ)` in δ.
    pub value: f64,
    /// Closed form `k·P/(P + Σ_active 1/g_j)`.
    pub envelope: f64,
    pub active_modes: usize,
    pub delta: f64,
}

/// `d/dδ C(snr·2^δ)` at `δ = 0` under water-filling.
///
/// The derivative uses central differences at steps `δ` and `δ/2`, combined
/// by Richardson extrapolation, so the truncation error is `O(δ⁴)`. The
/// stencil must not straddle a change of the active set.
pub fn edof3(spectrum: &SingularSpectrum, snr: f64, delta: f64) -> Result<Edof3> {
    if !(snr.is_finite() && snr > 0.0) {
        return Err(invalid(format!("snr must be positive, got {snr}")));
    }
    if !(delta > 0.0 && delta <= 0.05) {
        return Err(invalid(format!("delta step must lie in (0, 0.05], got {delta}")));
    }
    spectrum.require_positive()?;
    let gains = spectrum.power_gains();
    let low = waterfill_gains(&gains, snr * (-delta).exp2())?;
    let high = waterfill_gains(&gains, snr * delta.exp2())?;
    if low.active != high.active {
        return Err(Error::ActiveSetChanged {
            below: low.active,
            above: high.active,
        });
    }
    let cap = |d: f64| -> Result<f64> { Ok(waterfill_gains(&gains, snr * d.exp2())?.capacity(&gains)) };
    let wide = (high.capacity(&gains) - low.capacity(&gains)) / (2.0 * delta);
    let half = 0.5 * delta;
    let narrow = (cap(half)? - cap(-half)?) / delta;
    let value = (4.0 * narrow - wide) / 3.0;

    let here = waterfill_gains(&gains, snr)?;
    let inv_sum: f64 = gains[..here.active].iter().map(|g| 1.0 / g).sum();
    let envelope = here.active as f64 * snr / (snr + inv_sum);
    Ok(Edof3 {
        value,
        envelope,
        active_modes: here.active,
        delta,
    })
}

/// [`edof3`] that halves the step (down to `δ/1024`) until the stencil
/// fits inside one active set. If the SNR sits on a transition, falls back to
/// a second-order one-sided difference on a side that stays in one set;
/// capacity is continuously differentiable across transitions.
pub fn edof3_adaptive(spectrum: &SingularSpectrum, snr: f64, delta: f64) -> Result<Edof3> {
    let mut step = delta;
    let mut last_err = None;
    for _ in 0..=10 {
        match edof3(spectrum, snr, step) {
            Err(e @ Error::ActiveSetChanged { .. }) => {
                last_err = Some(e);
                step *= 0.5;
            }
            other => return other,
        }
    }
    let step = 2.0 * step;
    let gains = spectrum.power_gains();
    let here = waterfill_gains(&gains, snr)?;
    let active = |d: f64| -> Result<usize> { Ok(waterfill_gains(&gains, snr * d.exp2())?.active) };
    let cap = |d: f64| -> Result<f64> { Ok(waterfill_gains(&gains, snr * d.exp2())?.capacity(&gains)) };
    for dir in [1.0, -1.0] {
        let h = dir * step;
        if active(h)? == here.active && active(2.0 * h)? == here.active {
            let value = (4.0 * cap(h)? - 3.0 * cap(0.0)? - cap(2.0 * h)?) / (2.0 * h);
            let inv_sum: f64 = gains[..here.active].iter().map(|g| 1.0 / g).sum();
            return Ok(Edof3 {
                value,
                envelope: here.active as f64 * snr / (snr + inv_sum),
                active_modes: here.active,
                delta: step,
            });
        }
    }
    Err(last_err.expect("loop runs at least once"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbNoPoint {
    pub snr: f64,
    pub capacity: f64,
    /// `snr / C(snr)`.
    pub ebno: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EbNoAnalysis {
    pub policy: CapacityPolicy,
    pub points: Vec<EbNoPoint>,
    /// Limiting value as the SNR vanishes: `ln2/σ_1²` under water-filling,
    /// `ln2·K/Σσ²` for equal power over the `K` DoF modes.
    pub ebno_min: f64,
    /// Secant slope `ΔC / Δlog2(Eb/N0)` between the two lowest grid points.
    pub low_snr_slope: f64,
    /// `low_snr_slope / 2`, the quantity comparable with EDoF₂ for a complex channel.
    pub slope_per_dimension: f64,
}

pub fn ebno_analysis(spectrum: &SingularSpectrum, snr_grid: &[f64], policy: CapacityPolicy) -> Result<EbNoAnalysis> {
    if snr_grid.len() < 2 {
        return Err(invalid("Eb/N0 analysis needs at least two grid points"));
    }
    if snr_grid.iter().any(|s| !(s.is_finite() && *s > 0.0)) || snr_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("snr grid must be positive and strictly ascending"));
    }
    let s1 = spectrum.require_positive()?;
    let points = snr_grid
        .iter()
        .map(|&snr| {
            let c = capacity(spectrum, snr, policy)?;
            Ok(EbNoPoint {
                snr,
                capacity: c,
                ebno: snr / c,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ebno_min = match policy {
        CapacityPolicy::Waterfilling => LN_2 / (s1 * s1),
        CapacityPolicy::Equal => {
            let k = dof_default(spectrum)?;
            let total: f64 = spectrum.power_gains()[..k].iter().sum();
            LN_2 * k as f64 / total
        }
    };
    let (a, b) = (&points[0], &points[1]);
    let low_snr_slope = (b.capacity - a.capacity) / (b.ebno / a.ebno).log2();
    Ok(EbNoAnalysis {
        policy,
        points,
        ebno_min,
        low_snr_slope,
        slope_per_dimension: 0.5 * low_snr_slope,
    })
}

/// All four metrics for one spectrum at one SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DofMetrics {
    pub dof: usize,
    pub edof1: usize,
    pub edof2: f64,
    pub edof3: f64,
    pub snr: f64,
}

pub fn dof_metrics(spectrum: &SingularSpectrum, snr: f64, dominance: f64, rank_tol: f64, delta: f64) -> Result<DofMetrics> {
    Ok(DofMetrics {
        dof: dof(spectrum, rank_tol)?,
        edof1: edof1(spectrum, dominance)?,
        edof2: edof2(spectrum)?,
        edof3: edof3_adaptive(spectrum, snr, delta)?.value,
        snr,
    })
}
