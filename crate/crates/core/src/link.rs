//! Monte-Carlo check of the mode-multiplexed SVD transceiver over AWGN.
//!
//! Symbols `s_k` are QPSK with unit average power. The transmitter sends
//! `x = Σ_k √p_k·φ_k·s_k`, the channel adds circular Gaussian noise, and the
//! receiver projects onto `ψ_k` and rescales: `ŝ_k = ψ_kᴴ y / (√p_k·σ_k)`.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::complex_gaussian;
use crate::error::{invalid, Result};
use crate::modes::ModeDecomposition;
use crate::{CMatrix, C64};

/// Symbols per independently seeded batch.
pub const BATCH_SYMBOLS: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransmissionConfig {
    pub active_modes: usize,
    /// One power per active mode (extra entries are ignored).
    pub mode_powers: Vec<f64>,
    pub noise_power: f64,
    pub n_symbols: usize,
    pub seed: u64,
}

impl TransmissionConfig {
    pub fn validate(&self, available_modes: usize) -> Result<()> {
        if self.active_modes == 0 {
            return Err(invalid("at least one mode must be active"));
        }
        if self.active_modes > available_modes {
            return Err(invalid(format!(
                "{} active modes requested but only {available_modes} available",
                self.active_modes
            )));
        }
        if self.mode_powers.len() < self.active_modes {
            return Err(invalid("fewer mode powers than active modes"));
        }
        if self.mode_powers.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(invalid("mode powers must be finite and non-negative"));
        }
        if !(self.noise_power.is_finite() && self.noise_power >= 0.0) {
            return Err(invalid("noise power must be finite and non-negative"));
        }
        if self.n_symbols == 0 {
            return Err(invalid("n_symbols must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkReport {
    /// `1 / mean|ŝ_k − s_k|²`; infinite for a noiseless run.
    pub measured_mode_snr: Vec<f64>,
    /// `p_k·σ_k² / N0`.
    pub predicted_mode_snr: Vec<f64>,
    /// Largest `|ψ_kᴴ H φ_j|²·p_j / (p_k σ_k²)` over `k ≠ j`.
    pub cross_mode_leakage: f64,
    pub mse: Vec<f64>,
    /// Largest off-diagonal `|mean(e_k·conj(e_j))|` in units of its standard error.
    pub max_error_correlation_z: f64,
    /// Largest `|ŝ − s|` seen.
    pub max_abs_error: f64,
    /// `Σ_k log2(1 + measured SNR_k)`.
    pub throughput: f64,
    pub n_symbols: usize,
}

/// Unit-power QPSK symbol from two random bits.
pub fn qpsk<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let bits: u8 = rng.random_range(0..4);
    let re = if bits & 1 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    let im = if bits & 2 == 0 { FRAC_1_SQRT_2 } else { -FRAC_1_SQRT_2 };
    C64::new(re, im)
}

/// `K × n` symbols to `N_t × n` transmit vectors.
pub fn precode(symbols: &CMatrix, modes: &ModeDecomposition, powers: &[f64]) -> Result<CMatrix> {
    let k = symbols.nrows();
    if k == 0 || k > modes.n_modes() {
        return Err(invalid(format!("{k} symbol streams for {} modes", modes.n_modes())));
    }
    if powers.len() < k {
        return Err(invalid("fewer powers than symbol streams"));
    }
    let mut precoder = modes.right.columns(0, k).into_owned();
    for (c, mut col) in precoder.column_iter_mut().enumerate() {
        col *= C64::from(powers[c].sqrt());
    }
    Ok(precoder * symbols)
}

/// `y = H x + n` with `n ~ CN(0, noise_power·I)`.
pub fn transmit_awgn<R: Rng + ?Sized>(h: &CMatrix, x: &CMatrix, noise_power: f64, rng: &mut R) -> Result<CMatrix> {
    if h.ncols() != x.nrows() {
        return Err(invalid(format!(
            "channel has {} inputs but the signal has {} rows",
            h.ncols(),
            x.nrows()
        )));
    }
    if !(noise_power.is_finite() && noise_power >= 0.0) {
        return Err(invalid("noise power must be finite and non-negative"));
    }
    let mut y = h * x;
    if noise_power > 0.0 {
        for v in y.iter_mut() {
            *v += complex_gaussian(rng, noise_power);
        }
    }
    Ok(y)
}

/// `ŝ_k = ψ_kᴴ y / (√p_k σ_k)` for the first `k` modes.
pub fn combine(y: &CMatrix, modes: &ModeDecomposition, powers: &[f64], k: usize) -> Result<CMatrix> {
    if k == 0 || k > modes.n_modes() || powers.len() < k {
        return Err(invalid("invalid number of combined modes"));
    }
    if y.nrows() != modes.left.nrows() {
        return Err(invalid("received vectors do not match the receive dimension"));
    }
    let sigma = modes.spectrum.values();
    let mut combiner = modes.left.columns(0, k).adjoint();
    for (r, mut row) in combiner.row_iter_mut().enumerate() {
        let scale = powers[r].sqrt() * sigma[r];
        if !(scale > 0.0) {
            return Err(invalid(format!("mode {r} has zero power or gain")));
        }
        row /= C64::from(scale);
    }
    Ok(combiner * y)
}

// Per-batch accumulators. Summed in batch order so results do not depend on scheduling.
#[derive(Clone)]
struct Moments {
    err_power: Vec<f64>,
    cross: DMatrix<C64>,
    cross_sq: DMatrix<f64>,
    max_abs_error: f64,
    count: usize,
}

impl Moments {
    fn zeros(k: usize) -> Self {
        Self {
            err_power: vec![0.0; k],
            cross: DMatrix::zeros(k, k),
            cross_sq: DMatrix::zeros(k, k),
            max_abs_error: 0.0,
            count: 0,
        }
    }

    fn merge(mut self, other: &Moments) -> Self {
        for (a, b) in self.err_power.iter_mut().zip(&other.err_power) {
            *a += b;
        }
        self.cross += &other.cross;
        self.cross_sq += &other.cross_sq;
        self.max_abs_error = self.max_abs_error.max(other.max_abs_error);
        self.count += other.count;
        self
    }
}

fn batch_rng(seed: u64, batch: usize) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(batch as u64);
    rng
}

// Sent symbols and their estimates for one batch.
fn batch_signals(
    h: &CMatrix,
    modes: &ModeDecomposition,
    config: &TransmissionConfig,
    batch: usize,
    len: usize,
) -> Result<(CMatrix, CMatrix)> {
    let k = config.active_modes;
    let mut rng = batch_rng(config.seed, batch);
    let symbols = CMatrix::from_fn(k, len, |_, _| qpsk(&mut rng));
    let x = precode(&symbols, modes, &config.mode_powers)?;
    let y = transmit_awgn(h, &x, config.noise_power, &mut rng)?;
    let est = combine(&y, modes, &config.mode_powers, k)?;
    Ok((symbols, est))
}

fn run_batch(h: &CMatrix, modes: &ModeDecomposition, config: &TransmissionConfig, batch: usize, len: usize) -> Result<Moments> {
    let k = config.active_modes;
    let (symbols, est) = batch_signals(h, modes, config, batch, len)?;
    let err = est - &symbols;

    let mut m = Moments::zeros(k);
    m.count = len;
    for col in err.column_iter() {
        for a in 0..k {
            let ea = col[a];
            m.err_power[a] += ea.norm_sqr();
            m.max_abs_error = m.max_abs_error.max(ea.norm());
            for b in 0..k {
                let prod = ea * col[b].conj();
                m.cross[(a, b)] += prod;
                m.cross_sq[(a, b)] += prod.norm_sqr();
            }
        }
    }
    Ok(m)
}

/// Precode, transmit and combine `n_symbols` vectors; batches run in parallel.
pub fn run_link(h: &CMatrix, modes: &ModeDecomposition, config: &TransmissionConfig) -> Result<LinkReport> {
    config.validate(modes.n_modes())?;
    let k = config.active_modes;
    let n_batches = config.n_symbols.div_ceil(BATCH_SYMBOLS);
    let parts = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let len = BATCH_SYMBOLS.min(config.n_symbols - b * BATCH_SYMBOLS);
            run_batch(h, modes, config, b, len)
        })
        .collect::<Result<Vec<_>>>()?;
    let total = parts.iter().fold(Moments::zeros(k), Moments::merge);
    let n = total.count as f64;

    let sigma = modes.spectrum.values();
    let mse: Vec<f64> = total.err_power.iter().map(|e| e / n).collect();
    let measured_mode_snr: Vec<f64> = mse.iter().map(|e| 1.0 / e).collect();
    let predicted_mode_snr: Vec<f64> = (0..k)
        .map(|i| config.mode_powers[i] * sigma[i] * sigma[i] / config.noise_power)
        .collect();

    let mut max_z: f64 = 0.0;
    for a in 0..k {
        for b in 0..k {
            if a == b {
                continue;
            }
            let mean = total.cross[(a, b)] / n;
            let second = total.cross_sq[(a, b)] / n;
            let se = ((second - mean.norm_sqr()).max(0.0) / n).sqrt();
            if se > 0.0 {
                max_z = max_z.max(mean.norm() / se);
            }
        }
    }

    Ok(LinkReport {
        throughput: measured_mode_snr.iter().map(|s| s.ln_1p()).sum::<f64>() / std::f64::consts::LN_2,
        measured_mode_snr,
        predicted_mode_snr,
        cross_mode_leakage: cross_mode_leakage(h, modes, &config.mode_powers, k),
        mse,
        max_error_correlation_z: max_z,
        max_abs_error: total.max_abs_error,
        n_symbols: config.n_symbols,
    })
}

/// The exact symbols [`run_link`] sends and their estimates, one column per symbol vector.
pub fn trace_symbols(h: &CMatrix, modes: &ModeDecomposition, config: &TransmissionConfig) -> Result<(CMatrix, CMatrix)> {
    config.validate(modes.n_modes())?;
    let k = config.active_modes;
    let mut sent = CMatrix::zeros(k, config.n_symbols);
    let mut est = CMatrix::zeros(k, config.n_symbols);
    for b in 0..config.n_symbols.div_ceil(BATCH_SYMBOLS) {
        let start = b * BATCH_SYMBOLS;
        let len = BATCH_SYMBOLS.min(config.n_symbols - start);
        let (s, e) = batch_signals(h, modes, config, b, len)?;
        sent.columns_mut(start, len).copy_from(&s);
        est.columns_mut(start, len).copy_from(&e);
    }
    Ok((sent, est))
}

/// Power leaking between mode streams through the equivalent channel `Ψᴴ H Φ`.
pub fn cross_mode_leakage(h: &CMatrix, modes: &ModeDecomposition, powers: &[f64], k: usize) -> f64 {
    let eq = equivalent_channel(h, modes, k);
    let mut worst: f64 = 0.0;
    for a in 0..k {
        let wanted = eq[(a, a)].norm_sqr() * powers[a];
        for b in 0..k {
            if a != b && wanted > 0.0 {
                worst = worst.max(eq[(a, b)].norm_sqr() * powers[b] / wanted);
            }
        }
    }
    worst
}

/// `Ψ_kᴴ H Φ_k`, which should be `diag(σ_1..σ_k)`.
pub fn equivalent_channel(h: &CMatrix, modes: &ModeDecomposition, k: usize) -> CMatrix {
    modes.left.columns(0, k).adjoint() * h * modes.right.columns(0, k)
}
