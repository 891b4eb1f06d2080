//! Aperture geometry and near/far-field classification.
//!
//! The canonical frame puts the transmitter center at the origin and the
//! receiver center at `(0, d, 0)`, with both linear apertures parallel to `z`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type Point3 = nalgebra::Vector3<f64>;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

const UNIT_AXIS_TOL: f64 = 1e-12;

/// Carrier frequency and the matching free-space wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CarrierConfig {
    frequency: f64,
    wavelength: f64,
}

impl CarrierConfig {
    pub fn from_frequency(frequency: f64) -> Result<Self> {
        if !(frequency.is_finite() && frequency > 0.0) {
            return Err(invalid(format!("carrier frequency must be positive, got {frequency}")));
        }
        Ok(Self {
            frequency,
            wavelength: SPEED_OF_LIGHT / frequency,
        })
    }

    pub fn from_wavelength(wavelength: f64) -> Result<Self> {
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(invalid(format!("wavelength must be positive, got {wavelength}")));
        }
        Ok(Self {
            frequency: SPEED_OF_LIGHT / wavelength,
            wavelength,
        })
    }

    /// Hz.
    pub fn frequency(&self) -> f64 {
        self.frequency
    }

    /// Meters.
    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }
}

/// A straight continuous aperture between two distinct endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuousAperture {
    start: Point3,
    end: Point3,
}

impl ContinuousAperture {
    pub fn new(start: Point3, end: Point3) -> Result<Self> {
        if !(start.iter().chain(end.iter()).all(|v| v.is_finite())) {
            return Err(invalid("segment endpoints must be finite"));
        }
        if (end - start).norm() == 0.0 {
            return Err(invalid("segment endpoints coincide"));
        }
        Ok(Self { start, end })
    }

    /// Segment of length `length` centered on `center` along the unit `axis`.
    pub fn centered(center: Point3, axis: Point3, length: f64) -> Result<Self> {
        check_unit_axis(&axis)?;
        if !(length.is_finite() && length > 0.0) {
            return Err(invalid(format!("segment length must be positive, got {length}")));
        }
        Self::new(center - 0.5 * length * axis, center + 0.5 * length * axis)
    }

    pub fn start(&self) -> Point3 {
        self.start
    }

    pub fn end(&self) -> Point3 {
        self.end
    }

    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }

    pub fn center(&self) -> Point3 {
        0.5 * (self.start + self.end)
    }

    /// Point at parameter `t ∈ [-1, 1]` (−1 at `start`, +1 at `end`).
    pub fn point_at(&self, t: f64) -> Point3 {
        self.center() + 0.5 * t * (self.end - self.start)
    }

    /// Distance between the closest points of two segments.
    pub fn distance_to(&self, other: &ContinuousAperture) -> f64 {
        segment_distance(self.start, self.end, other.start, other.end)
    }
}

/// Transmit or receive aperture: a list of antenna positions or a continuous segment.
#[derive(Debug, Clone, PartialEq)]
pub enum ArrayGeometry {
    Discrete { elements: Vec<Point3>, aperture: f64 },
    Continuous(ContinuousAperture),
}

impl ArrayGeometry {
    /// Discrete array from explicit element positions. Elements must be distinct.
    pub fn discrete(elements: Vec<Point3>) -> Result<Self> {
        if elements.is_empty() {
            return Err(invalid("a discrete array needs at least one element"));
        }
        if elements.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
            return Err(invalid("element positions must be finite"));
        }
        let mut aperture = 0.0_f64;
        for (i, a) in elements.iter().enumerate() {
            for b in &elements[i + 1..] {
                let dist = (a - b).norm();
                if dist == 0.0 {
                    return Err(invalid(format!("duplicate element at {:?}", a.as_slice())));
                }
                aperture = aperture.max(dist);
            }
        }
        Ok(ArrayGeometry::Discrete { elements, aperture })
    }

    pub fn continuous(segment: ContinuousAperture) -> Self {
        ArrayGeometry::Continuous(segment)
    }

    /// Largest pairwise element distance, or the segment length.
    pub fn aperture(&self) -> f64 {
        match self {
            ArrayGeometry::Discrete { aperture, .. } => *aperture,
            ArrayGeometry::Continuous(seg) => seg.length(),
        }
    }

    pub fn elements(&self) -> Option<&[Point3]> {
        match self {
            ArrayGeometry::Discrete { elements, .. } => Some(elements),
            ArrayGeometry::Continuous(_) => None,
        }
    }

    pub fn segment(&self) -> Option<&ContinuousAperture> {
        match self {
            ArrayGeometry::Discrete { .. } => None,
            ArrayGeometry::Continuous(seg) => Some(seg),
        }
    }

    /// Centroid of the elements, or the segment midpoint.
    pub fn center(&self) -> Point3 {
        match self {
            ArrayGeometry::Discrete { elements, .. } => {
                elements.iter().fold(Point3::zeros(), |acc, p| acc + p) / elements.len() as f64
            }
            ArrayGeometry::Continuous(seg) => seg.center(),
        }
    }

    pub fn len(&self) -> Option<usize> {
        self.elements().map(<[Point3]>::len)
    }
}

fn check_unit_axis(axis: &Point3) -> Result<()> {
    let norm = axis.norm();
    if !norm.is_finite() || (norm - 1.0).abs() > UNIT_AXIS_TOL {
        return Err(invalid(format!("axis must have unit norm, got |axis| = {norm}")));
    }
    Ok(())
}

/// Uniform linear array of `n_elements` spanning `aperture` meters along `axis`.
///
/// Element `k` sits at `center + (k/(n−1) − 1/2)·aperture·axis`; a single
/// element sits at `center` and requires a zero aperture.
pub fn build_ula(n_elements: usize, aperture: f64, center: Point3, axis: Point3) -> Result<ArrayGeometry> {
    check_unit_axis(&axis)?;
    if n_elements == 0 {
        return Err(invalid("a ULA needs at least one element"));
    }
    if !(aperture.is_finite() && aperture >= 0.0) {
        return Err(invalid(format!("aperture must be non-negative, got {aperture}")));
    }
    if n_elements == 1 {
        if aperture > 0.0 {
            return Err(invalid("a single-element array cannot span a positive aperture"));
        }
        return ArrayGeometry::discrete(vec![center]);
    }
    let last = (n_elements - 1) as f64;
    let elements = (0..n_elements)
        .map(|k| center + (k as f64 / last - 0.5) * aperture * axis)
        .collect();
    ArrayGeometry::discrete(elements)
}

/// Classic Rayleigh distance `2·A²/λ`.
pub fn rayleigh_distance(aperture: f64, wavelength: f64) -> Result<f64> {
    if !(wavelength.is_finite() && wavelength > 0.0) {
        return Err(invalid(format!("wavelength must be positive, got {wavelength}")));
    }
    if !(aperture.is_finite() && aperture >= 0.0) {
        return Err(invalid(format!("aperture must be non-negative, got {aperture}")));
    }
    Ok(2.0 * aperture * aperture / wavelength)
}

/// How a MIMO link combines its two apertures into one Rayleigh distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApertureRule {
    /// `max(A_t, A_r)`.
    #[default]
    Larger,
    /// `A_t + A_r`.
    Sum,
}

pub fn mimo_rayleigh_distance(
    tx_aperture: f64,
    rx_aperture: f64,
    wavelength: f64,
    rule: ApertureRule,
) -> Result<f64> {
    let aperture = match rule {
        ApertureRule::Larger => tx_aperture.max(rx_aperture),
        ApertureRule::Sum => tx_aperture + rx_aperture,
    };
    rayleigh_distance(aperture, wavelength)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    NearField,
    FarField,
}

/// Near field strictly inside the Rayleigh distance; the boundary itself is far field.
pub fn classify_region(link_distance: f64, aperture: f64, wavelength: f64) -> Result<Region> {
    if !(link_distance.is_finite() && link_distance > 0.0) {
        return Err(invalid(format!("link distance must be positive, got {link_distance}")));
    }
    let boundary = rayleigh_distance(aperture, wavelength)?;
    Ok(if link_distance < boundary {
        Region::NearField
    } else {
        Region::FarField
    })
}

/// Transmit array centered at the origin, receive array centered at `(0, d, 0)`,
/// both ULAs along `axis`.
pub fn canonical_ula_pair(
    n_elements: usize,
    aperture: f64,
    distance: f64,
    axis: Point3,
) -> Result<(ArrayGeometry, ArrayGeometry)> {
    if !(distance.is_finite() && distance > 0.0) {
        return Err(Error::InvalidArgument(format!("link distance must be positive, got {distance}")));
    }
    let tx = build_ula(n_elements, aperture, Point3::zeros(), axis)?;
    let rx = build_ula(n_elements, aperture, Point3::new(0.0, distance, 0.0), axis)?;
    Ok((tx, rx))
}

/// Continuous counterpart of [`canonical_ula_pair`].
pub fn canonical_segment_pair(
    aperture: f64,
    distance: f64,
    axis: Point3,
) -> Result<(ContinuousAperture, ContinuousAperture)> {
    if !(distance.is_finite() && distance > 0.0) {
        return Err(Error::InvalidArgument(format!("link distance must be positive, got {distance}")));
    }
    let tx = ContinuousAperture::centered(Point3::zeros(), axis, aperture)?;
    let rx = ContinuousAperture::centered(Point3::new(0.0, distance, 0.0), axis, aperture)?;
    Ok((tx, rx))
}

// Closest distance between segments [p1, q1] and [p2, q2].
fn segment_distance(p1: Point3, q1: Point3, p2: Point3, q2: Point3) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let c = d1.dot(&r);
    let b = d1.dot(&d2);
    let denom = a * e - b * b;

    let mut s = if denom > 1e-300 { ((b * f - c * e) / denom).clamp(0.0, 1.0) } else { 0.0 };
    let mut t = (b * s + f) / e;
    if t < 0.0 {
        t = 0.0;
        s = (-c / a).clamp(0.0, 1.0);
    } else if t > 1.0 {
        t = 1.0;
        s = ((b - c) / a).clamp(0.0, 1.0);
    }
    ((p1 + s * d1) - (p2 + t * d2)).norm()
}
