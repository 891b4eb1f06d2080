//! Continuous-aperture modes from the Hermitian kernel of the scalar Green's function.
//!
//! For a transmit current `J(s)` on one segment and the field `E(r)` on the
//! other, the channel operator is `E(r) = ∫ g(r, s) J(s) ds`. Its squared
//! singular values are the eigenvalues of the kernel
//!
//! ```text
//! K(s, s') = ∫_rx conj(g(r, s)) g(r, s') dr
//! ```
//!
//! acting on functions of the transmit segment. Both integrals are
//! discretized with Gauss–Legendre rules (Nyström method) and the weighted
//! matrix `W^{1/2} K W^{1/2}` is diagonalized.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{CarrierConfig, ContinuousAperture, Point3};
use crate::quadrature::GaussLegendre;
use crate::{CMatrix, C64};

/// Eigenvalues below this fraction of the largest are set to zero.
pub const CLIP_RELATIVE: f64 = 1e-14;

/// Number of leading eigenvalues watched by [`converge_spectrum`].
pub const CONVERGENCE_WINDOW: usize = 20;

pub const MIN_NODES: usize = 8;
const START_NODES: usize = 64;
const MAX_NODES: usize = 4096;

/// `exp(−i·2π‖r−s‖/λ) / (4π‖r−s‖)`.
pub fn greens_scalar(field_point: &Point3, source_point: &Point3, wavelength: f64) -> Result<C64> {
    if !(wavelength.is_finite() && wavelength > 0.0) {
        return Err(invalid(format!("wavelength must be positive, got {wavelength}")));
    }
    let dist = (field_point - source_point).norm();
    if dist == 0.0 {
        return Err(Error::SingularGeometry("field and source points coincide".into()));
    }
    Ok(green_unchecked(dist, wavelength))
}

fn green_unchecked(dist: f64, wavelength: f64) -> C64 {
    C64::from_polar(1.0 / (4.0 * PI * dist), -2.0 * PI * dist / wavelength)
}

/// Quadrature-discretized kernel on the transmit segment.
#[derive(Debug, Clone)]
pub struct KernelDiscretization {
    pub tx_nodes: Vec<Point3>,
    pub tx_weights: Vec<f64>,
    /// `K(s_i, s_j)`, Hermitian by construction.
    pub kernel: CMatrix,
}

impl KernelDiscretization {
    pub fn node_count(&self) -> usize {
        self.tx_nodes.len()
    }

    /// `W^{1/2} K W^{1/2}`.
    pub fn weighted(&self) -> CMatrix {
        let sqrt_w: Vec<f64> = self.tx_weights.iter().map(|w| w.sqrt()).collect();
        let m = self.node_count();
        DMatrix::from_fn(m, m, |i, j| self.kernel[(i, j)] * (sqrt_w[i] * sqrt_w[j]))
    }

    /// `trace(K·W) = Σ_i K(s_i, s_i)·w_i`.
    pub fn weighted_trace(&self) -> f64 {
        (0..self.node_count()).map(|i| self.kernel[(i, i)].re * self.tx_weights[i]).sum()
    }

    /// `‖K − Kᴴ‖_F / ‖K‖_F`.
    pub fn hermitian_defect(&self) -> f64 {
        (&self.kernel - self.kernel.adjoint()).norm() / self.kernel.norm()
    }
}

/// Discretizes the kernel with `m_nodes` Gauss–Legendre points on each segment.
pub fn build_kernel(
    tx: &ContinuousAperture,
    rx: &ContinuousAperture,
    carrier: &CarrierConfig,
    m_nodes: usize,
) -> Result<KernelDiscretization> {
    if m_nodes < MIN_NODES {
        return Err(invalid(format!("kernel needs at least {MIN_NODES} nodes, got {m_nodes}")));
    }
    if tx.distance_to(rx) == 0.0 {
        return Err(Error::SingularGeometry("transmit and receive segments touch or overlap".into()));
    }
    let rule = GaussLegendre::new(m_nodes)?;
    let lambda = carrier.wavelength();

    let tx_nodes: Vec<Point3> = rule.nodes.iter().map(|&t| tx.point_at(t)).collect();
    let tx_weights: Vec<f64> = rule.weights.iter().map(|w| 0.5 * tx.length() * w).collect();
    let rx_nodes: Vec<Point3> = rule.nodes.iter().map(|&t| rx.point_at(t)).collect();
    let rx_weights: Vec<f64> = rule.weights.iter().map(|w| 0.5 * rx.length() * w).collect();

    // B[k, i] = sqrt(w_r,k)·g(r_k, s_i); K = Bᴴ B. Rows are independent.
    let rows: Vec<Vec<C64>> = rx_nodes
        .par_iter()
        .zip(rx_weights.par_iter())
        .map(|(r, w)| {
            let sw = w.sqrt();
            tx_nodes.iter().map(|s| green_unchecked((r - s).norm(), lambda) * sw).collect()
        })
        .collect();
    let b = DMatrix::from_fn(m_nodes, m_nodes, |k, i| rows[k][i]);
    let mut kernel = b.adjoint() * &b;
    // mirror the upper triangle so Hermiticity is exact
    for i in 0..m_nodes {
        kernel[(i, i)].im = 0.0;
        for j in i + 1..m_nodes {
            kernel[(j, i)] = kernel[(i, j)].conj();
        }
    }
    Ok(KernelDiscretization {
        tx_nodes,
        tx_weights,
        kernel,
    })
}

/// Squared continuous-aperture mode gains, non-increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSpectrum {
    pub eigenvalues: Vec<f64>,
    pub node_count: usize,
}

impl EigenSpectrum {
    pub fn largest(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(0.0)
    }

    pub fn sum(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }

    /// Singular values `σ_n = √λ_n` as a discrete-style spectrum.
    pub fn to_singular(&self) -> Result<crate::modes::SingularSpectrum> {
        crate::modes::SingularSpectrum::new(self.eigenvalues.iter().map(|l| l.sqrt()).collect())
    }

    /// CSV with header `index,eigenvalue`; indices start at 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,eigenvalue\n");
        for (n, l) in self.eigenvalues.iter().enumerate() {
            out.push_str(&format!("{},{:?}\n", n + 1, l));
        }
        out
    }
}

/// Raw (unclipped) eigenvalues of `W^{1/2} K W^{1/2}`, descending.
pub fn weighted_eigenvalues(k: &KernelDiscretization) -> Result<Vec<f64>> {
    crate::linalg::hermitian_eigenvalues(&k.weighted())
}

pub fn cap_spectrum(k: &KernelDiscretization) -> Result<EigenSpectrum> {
    let mut values = weighted_eigenvalues(k)?;
    let top = values[0];
    if !(top > 0.0) {
        return Err(Error::Decomposition(format!("largest kernel eigenvalue is {top}")));
    }
    for v in &mut values {
        if *v < CLIP_RELATIVE * top {
            *v = 0.0;
        }
    }
    Ok(EigenSpectrum {
        eigenvalues: values,
        node_count: k.node_count(),
    })
}

fn require_positive(spectrum: &EigenSpectrum) -> Result<f64> {
    let top = spectrum.largest();
    if top > 0.0 {
        Ok(top)
    } else {
        Err(Error::ZeroSpectrum)
    }
}

/// Eigenvalues with `λ_n ≥ η·λ_1`.
pub fn cap_edof1(spectrum: &EigenSpectrum, dominance: f64) -> Result<usize> {
    if !(dominance > 0.0 && dominance < 1.0) {
        return Err(invalid(format!("dominance threshold must lie in (0, 1), got {dominance}")));
    }
    let top = require_positive(spectrum)?;
    Ok(spectrum.eigenvalues.iter().filter(|&&l| l >= dominance * top).count())
}

/// `(Σλ)² / Σλ²`.
pub fn cap_edof2(spectrum: &EigenSpectrum) -> Result<f64> {
    let top = require_positive(spectrum)?;
    let (s1, s2) = spectrum.eigenvalues.iter().fold((0.0, 0.0), |(a, b), &l| {
        let r = l / top;
        (a + r, b + r * r)
    });
    Ok(s1 * s1 / s2)
}

/// Converged spectrum plus how it was reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergedSpectrum {
    pub spectrum: EigenSpectrum,
    pub m_nodes: usize,
    /// Last measured change, `max_{n≤20} |Δλ_n| / λ_1`; infinite when only one iterate ran.
    pub achieved_tol: f64,
    pub tol: f64,
}

/// Largest change among the leading [`CONVERGENCE_WINDOW`] eigenvalues,
/// relative to the largest eigenvalue.
pub fn spectrum_change(a: &EigenSpectrum, b: &EigenSpectrum) -> f64 {
    let scale = a.largest().max(b.largest());
    a.eigenvalues
        .iter()
        .zip(&b.eigenvalues)
        .take(CONVERGENCE_WINDOW)
        .map(|(x, y)| (x - y).abs() / scale)
        .fold(0.0, f64::max)
}

/// Doubles the node count from 64 until the leading eigenvalues settle within `tol`.
pub fn converge_spectrum(
    tx: &ContinuousAperture,
    rx: &ContinuousAperture,
    carrier: &CarrierConfig,
    tol: f64,
) -> Result<ConvergedSpectrum> {
    if !(tol > 0.0) {
        return Err(invalid(format!("convergence tolerance must be positive, got {tol}")));
    }
    let mut m = START_NODES;
    let mut prev = cap_spectrum(&build_kernel(tx, rx, carrier, m)?)?;
    if tol.is_infinite() {
        return Ok(ConvergedSpectrum {
            spectrum: prev,
            m_nodes: m,
            achieved_tol: f64::INFINITY,
            tol,
        });
    }
    let mut history = Vec::new();
    while m < MAX_NODES {
        m *= 2;
        let next = cap_spectrum(&build_kernel(tx, rx, carrier, m)?)?;
        let change = spectrum_change(&prev, &next);
        history.push((m, change));
        if change < tol {
            return Ok(ConvergedSpectrum {
                spectrum: next,
                m_nodes: m,
                achieved_tol: change,
                tol,
            });
        }
        prev = next;
    }
    Err(Error::NotConverged(format!(
        "tolerance {tol:e} not reached by {MAX_NODES} nodes; changes per doubling: {history:?}"
    )))
}

/// Transmit-side eigenfunctions sampled at the quadrature nodes, for the
/// leading `count` modes. Columns are orthonormal in the weighted inner product.
pub fn cap_eigenfunctions(k: &KernelDiscretization, count: usize) -> Result<(Vec<f64>, CMatrix)> {
    let (mut values, vectors) = crate::linalg::hermitian_eigen(&k.weighted())?;
    let count = count.min(values.len());
    values.truncate(count);
    let inv_sqrt_w = DVector::from_iterator(k.node_count(), k.tx_weights.iter().map(|w| C64::from(1.0 / w.sqrt())));
    let mut funcs = CMatrix::zeros(k.node_count(), count);
    for c in 0..count {
        funcs.set_column(c, &vectors.column(c).component_mul(&inv_sqrt_w));
    }
    Ok((values, funcs))
}
