//! Discrete-antenna channel synthesis.
//!
//! Entries follow the free-space scalar path gain `λ/(4πd)` with phase
//! `exp(−i·2πd/λ)`. The four models differ in which distance enters the
//! amplitude and the phase:
//!
//! | model    | amplitude       | phase                          |
//! |----------|-----------------|--------------------------------|
//! | NUSW     | per-link `d_nm` | per-link `d_nm`                |
//! | USW      | center `d_ref`  | per-link `d_nm`                |
//! | planar   | center `d_ref`  | first-order expansion around centers |
//! | i.i.d.   | unit-variance circular Gaussian, no geometry          |

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{ArrayGeometry, CarrierConfig, Point3};
use crate::{CMatrix, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelModel {
    Nusw,
    Usw,
    Planar,
    IidRayleigh,
}

impl ChannelModel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChannelModel::Nusw => "nusw",
            ChannelModel::Usw => "usw",
            ChannelModel::Planar => "planar",
            ChannelModel::IidRayleigh => "iid_rayleigh",
        }
    }
}

/// `N_r × N_t` complex gain matrix plus the model that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix {
    entries: CMatrix,
    wavelength: Option<f64>,
    model: ChannelModel,
}

impl ChannelMatrix {
    pub fn new(entries: CMatrix, wavelength: Option<f64>, model: ChannelModel) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(invalid("channel matrix must be non-empty"));
        }
        if entries.iter().any(|h| !(h.re.is_finite() && h.im.is_finite())) {
            return Err(invalid("channel entries must be finite"));
        }
        if let Some(l) = wavelength {
            if !(l.is_finite() && l > 0.0) {
                return Err(invalid(format!("wavelength must be positive, got {l}")));
            }
        }
        Ok(Self { entries, wavelength, model })
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn wavelength(&self) -> Option<f64> {
        self.wavelength
    }

    pub fn model(&self) -> ChannelModel {
        self.model
    }

    pub fn n_rx(&self) -> usize {
        self.entries.nrows()
    }

    pub fn n_tx(&self) -> usize {
        self.entries.ncols()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|h| h.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Copy rescaled so that `‖H‖_F² = N_t·N_r`.
    pub fn normalized(&self) -> Result<Self> {
        let norm = self.frobenius_norm();
        if norm == 0.0 {
            return Err(Error::ZeroChannel);
        }
        let scale = ((self.n_rx() * self.n_tx()) as f64).sqrt() / norm;
        Ok(Self {
            entries: self.entries.map(|h| h * scale),
            wavelength: self.wavelength,
            model: self.model,
        })
    }

    /// Column-major CSV: one line per transmit column, `re,im` pairs down the rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.n_rx() * self.n_tx() * 48);
        for col in self.entries.column_iter() {
            for (i, h) in col.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write!(out, "{:?},{:?}", h.re, h.im).expect("writing to a String cannot fail");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, wavelength: Option<f64>, model: ChannelModel) -> Result<Self> {
        let mut columns: Vec<Vec<C64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if !fields.len().is_multiple_of(2) {
                return Err(Error::Parse(format!("line {}: odd number of fields", lineno + 1)));
            }
            let col = fields
                .chunks(2)
                .map(|pair| Ok(C64::new(parse_f64(pair[0], lineno)?, parse_f64(pair[1], lineno)?)))
                .collect::<Result<Vec<_>>>()?;
            if let Some(first) = columns.first() {
                if first.len() != col.len() {
                    return Err(Error::Parse(format!("line {}: ragged column", lineno + 1)));
                }
            }
            columns.push(col);
        }
        let n_tx = columns.len();
        let n_rx = columns.first().map_or(0, Vec::len);
        let entries = DMatrix::from_iterator(n_rx, n_tx, columns.into_iter().flatten());
        Self::new(entries, wavelength, model)
    }

    pub fn to_envelope(&self) -> ChannelEnvelope {
        ChannelEnvelope {
            model: self.model,
            wavelength: self.wavelength,
            rows: self.n_rx(),
            cols: self.n_tx(),
            layout: "column-major".to_owned(),
            entries: self.entries.iter().map(|h| [h.re, h.im]).collect(),
        }
    }

    pub fn from_envelope(env: &ChannelEnvelope) -> Result<Self> {
        if env.layout != "column-major" {
            return Err(Error::Parse(format!("unsupported layout {:?}", env.layout)));
        }
        if env.entries.len() != env.rows * env.cols {
            return Err(Error::Parse(format!(
                "expected {} entries for a {}x{} matrix, found {}",
                env.rows * env.cols,
                env.rows,
                env.cols,
                env.entries.len()
            )));
        }
        let entries = DMatrix::from_iterator(env.rows, env.cols, env.entries.iter().map(|&[re, im]| C64::new(re, im)));
        Self::new(entries, env.wavelength, env.model)
    }
}

fn parse_f64(field: &str, lineno: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|e| Error::Parse(format!("line {}: {field:?}: {e}", lineno + 1)))
}

/// JSON form of a [`ChannelMatrix`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelEnvelope {
    pub model: ChannelModel,
    pub wavelength: Option<f64>,
    pub rows: usize,
    pub cols: usize,
    pub layout: String,
    pub entries: Vec<[f64; 2]>,
}

fn discrete_pair<'a>(tx: &'a ArrayGeometry, rx: &'a ArrayGeometry) -> Result<(&'a [Point3], &'a [Point3])> {
    match (tx.elements(), rx.elements()) {
        (Some(t), Some(r)) => Ok((t, r)),
        _ => Err(invalid("channel synthesis needs discrete arrays at both ends")),
    }
}

fn phase(distance: f64, wavelength: f64) -> C64 {
    C64::from_polar(1.0, -2.0 * PI * distance / wavelength)
}

fn reference_distance(tx: &ArrayGeometry, rx: &ArrayGeometry) -> Result<(f64, Point3, Point3)> {
    let (ct, cr) = (tx.center(), rx.center());
    let d_ref = (cr - ct).norm();
    if d_ref == 0.0 {
        return Err(Error::SingularGeometry("transmit and receive centers coincide".into()));
    }
    Ok((d_ref, ct, cr))
}

fn link_distances(t: &[Point3], r: &[Point3]) -> Result<DMatrix<f64>> {
    let d = DMatrix::from_fn(r.len(), t.len(), |n, m| (r[n] - t[m]).norm());
    if let Some(pos) = d.iter().position(|&v| v == 0.0) {
        let (n, m) = (pos % r.len(), pos / r.len());
        return Err(Error::SingularGeometry(format!("receive element {n} coincides with transmit element {m}")));
    }
    Ok(d)
}

/// Non-uniform spherical wave: `h_nm = λ/(4π d_nm)·exp(−i2π d_nm/λ)`.
pub fn los_nusw_channel(tx: &ArrayGeometry, rx: &ArrayGeometry, carrier: &CarrierConfig) -> Result<ChannelMatrix> {
    let (t, r) = discrete_pair(tx, rx)?;
    let lambda = carrier.wavelength();
    let dist = link_distances(t, r)?;
    let entries = dist.map(|d| phase(d, lambda) * (lambda / (4.0 * PI * d)));
    ChannelMatrix::new(entries, Some(lambda), ChannelModel::Nusw)
}

/// Uniform spherical wave: exact per-link phase, amplitude fixed at the center distance.
pub fn los_usw_channel(tx: &ArrayGeometry, rx: &ArrayGeometry, carrier: &CarrierConfig) -> Result<ChannelMatrix> {
    let (t, r) = discrete_pair(tx, rx)?;
    let lambda = carrier.wavelength();
    let (d_ref, _, _) = reference_distance(tx, rx)?;
    let gain = lambda / (4.0 * PI * d_ref);
    let dist = link_distances(t, r)?;
    let entries = dist.map(|d| phase(d, lambda) * gain);
    ChannelMatrix::new(entries, Some(lambda), ChannelModel::Usw)
}

/// Far-field planar wave; the outer product of a receive and a transmit phase vector.
pub fn farfield_planar_channel(tx: &ArrayGeometry, rx: &ArrayGeometry, carrier: &CarrierConfig) -> Result<ChannelMatrix> {
    let (t, r) = discrete_pair(tx, rx)?;
    let lambda = carrier.wavelength();
    let (d_ref, ct, cr) = reference_distance(tx, rx)?;
    let u = (cr - ct) / d_ref;
    let gain = lambda / (4.0 * PI * d_ref);
    let a_rx: Vec<C64> = r.iter().map(|p| phase(u.dot(&(p - cr)), lambda)).collect();
    let a_tx: Vec<C64> = t.iter().map(|p| phase(-u.dot(&(p - ct)), lambda)).collect();
    let common = phase(d_ref, lambda) * gain;
    let entries = DMatrix::from_fn(r.len(), t.len(), |n, m| common * a_rx[n] * a_tx[m]);
    ChannelMatrix::new(entries, Some(lambda), ChannelModel::Planar)
}

/// i.i.d. circularly-symmetric complex Gaussian entries with unit variance.
pub fn iid_rayleigh_channel(n_r: usize, n_t: usize, seed: u64) -> Result<ChannelMatrix> {
    if n_r == 0 || n_t == 0 {
        return Err(invalid("channel dimensions must be at least 1"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let entries = DMatrix::from_fn(n_r, n_t, |_, _| complex_gaussian(&mut rng, 1.0));
    ChannelMatrix::new(entries, None, ChannelModel::IidRayleigh)
}

/// One draw of CN(0, variance).
pub(crate) fn complex_gaussian<R: rand::Rng + ?Sized>(rng: &mut R, variance: f64) -> C64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(s * re, s * im)
}
