//! Far-field array factor, pattern cuts and lobe metrics.

use std::fmt::Write as _;

use num_complex::Complex;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{PhaseProfile, RisGeometry};
use crate::scalar::{amplitude_db, cis, RisFloat};

/// Largest sampling step accepted for metric extraction, in degrees.
pub const MAX_STEP_DEG: f64 = 0.1;

/// Main-lobe boundary: first local minimum at or below this level.
pub const NULL_LEVEL_DB: f64 = -10.0;

const DB_FLOOR: f64 = -300.0;

/// Far-field evaluation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FarField<T> {
    /// Specular direction `(θ_in, φ_in)` of the incident wave; `(90°, 0°)` is normal incidence.
    pub incidence: (T, T),
    /// Applies `sqrt(cosθ_inc·cosθ_ref)` per element.
    pub element_factor: bool,
}

impl<T: RisFloat> FarField<T> {
    pub fn normal_incidence(element_factor: bool) -> Self {
        Self {
            incidence: (T::FRAC_PI_2(), T::zero()),
            element_factor,
        }
    }
}

/// Array factor `Σ r_{m,n} e^{jk(m d_z (cosθ − cosθ_in) + n d_y (sinθ sinφ − sinθ_in sinφ_in))}`.
pub fn array_factor<T: RisFloat>(
    geom: &RisGeometry<T>,
    profile: &PhaseProfile<T>,
    theta: T,
    phi: T,
    far: &FarField<T>,
) -> Complex<T> {
    let (ti, pi) = far.incidence;
    let k = geom.wavenumber();
    let uz = theta.cos() - ti.cos();
    let uy = theta.sin() * phi.sin() - ti.sin() * pi.sin();
    let step_z = k * geom.spacing_z * uz;
    let step_y = k * geom.spacing_y * uy;
    let mut acc = Complex::new(T::zero(), T::zero());
    for n in 0..geom.cols_y {
        let col = profile.column(n);
        let py = step_y * T::of(n as f64);
        for (m, &r) in col.iter().enumerate() {
            acc = acc + r * cis(py + step_z * T::of(m as f64));
        }
    }
    if far.element_factor {
        let cos_inc = ti.sin() * pi.cos();
        let cos_ref = theta.sin() * phi.cos();
        if cos_inc <= T::zero() || cos_ref <= T::zero() {
            return Complex::new(T::zero(), T::zero());
        }
        acc = acc.scale((cos_inc * cos_ref).sqrt());
    }
    acc
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cut<T> {
    /// Azimuth sweep at fixed zenith.
    Azimuth { theta: T },
    /// Zenith sweep at fixed azimuth.
    Zenith { phi: T },
}

/// Angular span of a cut in degrees, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Span {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub step_deg: f64,
}

impl Span {
    pub fn new(start_deg: f64, stop_deg: f64, step_deg: f64) -> Self {
        Self {
            start_deg,
            stop_deg,
            step_deg,
        }
    }

    fn samples(&self) -> Result<Vec<f64>> {
        let Span {
            start_deg,
            stop_deg,
            step_deg,
        } = *self;
        if !(start_deg.is_finite() && stop_deg.is_finite() && step_deg.is_finite()) {
            return Err(Error::InvalidPattern("span must be finite".into()));
        }
        if !(step_deg > 0.0 && step_deg <= MAX_STEP_DEG + 1e-12) {
            return Err(Error::InvalidPattern(format!(
                "step must lie in (0, {MAX_STEP_DEG}] degrees, got {step_deg}"
            )));
        }
        if stop_deg <= start_deg {
            return Err(Error::Empty("pattern span"));
        }
        let count = ((stop_deg - start_deg) / step_deg + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|i| start_deg + i as f64 * step_deg).collect())
    }
}

/// Sampled cut normalized to a 0 dB peak.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiationPattern<T> {
    pub cut: Cut<T>,
    pub far_field: FarField<T>,
    pub geometry: RisGeometry<T>,
    pub profile: PhaseProfile<T>,
    pub angles_deg: Vec<T>,
    pub gain_db: Vec<T>,
    /// `|AF|` at the peak before normalization.
    pub peak_magnitude: T,
}

impl<T: RisFloat> RadiationPattern<T> {
    pub fn peak_magnitude_db(&self) -> T {
        amplitude_db(self.peak_magnitude, T::of(DB_FLOOR))
    }

    /// CSV with header `angle_deg,gain_db`, four decimals.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("angle_deg,gain_db\n");
        for (a, g) in self.angles_deg.iter().zip(&self.gain_db) {
            writeln!(s, "{:.4},{:.4}", a.as_f64(), g.as_f64()).expect("write to string");
        }
        s
    }
}

pub fn compute_cut<T: RisFloat>(
    geom: &RisGeometry<T>,
    profile: &PhaseProfile<T>,
    cut: Cut<T>,
    span: Span,
    far: &FarField<T>,
) -> Result<RadiationPattern<T>> {
    if profile.geometry().len() != geom.len() {
        return Err(Error::LengthMismatch {
            expected: geom.len(),
            got: profile.geometry().len(),
        });
    }
    let angles = span.samples()?;
    let mags: Vec<T> = angles
        .par_iter()
        .map(|&a| {
            let a = T::of(a).rad();
            let (theta, phi) = match cut {
                Cut::Azimuth { theta } => (theta, a),
                Cut::Zenith { phi } => (a, phi),
            };
            array_factor(geom, profile, theta, phi, far).norm()
        })
        .collect();
    let peak = mags.iter().copied().fold(T::zero(), T::max);
    let gain_db = mags
        .iter()
        .map(|&m| {
            if peak > T::zero() {
                amplitude_db(m / peak, T::of(DB_FLOOR))
            } else {
                T::of(DB_FLOOR)
            }
        })
        .collect();
    Ok(RadiationPattern {
        cut,
        far_field: *far,
        geometry: *geom,
        profile: profile.clone(),
        angles_deg: angles.into_iter().map(T::of).collect(),
        gain_db,
        peak_magnitude: peak,
    })
}

/// Normalized dB magnitudes over a zenith × azimuth grid (zenith-major).
pub fn compute_grid<T: RisFloat>(
    geom: &RisGeometry<T>,
    profile: &PhaseProfile<T>,
    zeniths: &[T],
    azimuths: &[T],
    far: &FarField<T>,
) -> Result<Vec<T>> {
    if zeniths.is_empty() || azimuths.is_empty() {
        return Err(Error::Empty("pattern grid"));
    }
    let mags: Vec<T> = (0..zeniths.len() * azimuths.len())
        .into_par_iter()
        .map(|i| {
            let (t, p) = (zeniths[i / azimuths.len()], azimuths[i % azimuths.len()]);
            array_factor(geom, profile, t, p, far).norm()
        })
        .collect();
    let peak = mags.iter().copied().fold(T::zero(), T::max);
    Ok(mags
        .into_iter()
        .map(|m| if peak > T::zero() { amplitude_db(m / peak, T::of(DB_FLOOR)) } else { T::of(DB_FLOOR) })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatternMetrics<T> {
    pub peak_angle_deg: T,
    pub beamwidth_3db_deg: T,
    /// Highest sample outside the main lobe relative to the peak; `None` if the
    /// cut has no samples outside the main lobe.
    pub sidelobe_level_db: Option<T>,
    pub peak_magnitude_db: T,
}

fn peak_index<T: RisFloat>(g: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in g.iter().enumerate() {
        if v > g[best] {
            best = i;
        }
    }
    best
}

/// Interpolated −3 dB crossing walking away from `peak` in direction `dir`.
fn crossing<T: RisFloat>(a: &[T], g: &[T], peak: usize, dir: isize) -> Option<T> {
    let level = T::of(-3.0);
    let mut i = peak;
    loop {
        let j = i as isize + dir;
        if j < 0 || j as usize >= g.len() {
            return None;
        }
        let j = j as usize;
        if g[j] <= level {
            let t = (g[i] - level) / (g[i] - g[j]);
            return Some(a[i] + (a[j] - a[i]) * t);
        }
        i = j;
    }
}

/// First local minimum at or below the null level walking away from `peak`.
fn first_null<T: RisFloat>(g: &[T], peak: usize, dir: isize) -> Option<usize> {
    let level = T::of(NULL_LEVEL_DB);
    let mut i = peak as isize + dir;
    while i >= 0 && (i as usize) < g.len() {
        let u = i as usize;
        let next = i + dir;
        let rising = next < 0 || next as usize >= g.len() || g[next as usize] >= g[u];
        if g[u] <= level && rising {
            return Some(u);
        }
        i = next;
    }
    None
}

/// Peak angle, interpolated −3 dB width and sidelobe level of a cut.
pub fn extract_metrics<T: RisFloat>(pattern: &RadiationPattern<T>) -> Result<PatternMetrics<T>> {
    let (a, g) = (&pattern.angles_deg, &pattern.gain_db);
    if g.len() < 3 {
        return Err(Error::InvalidPattern("too few samples".into()));
    }
    let p = peak_index(g);
    let left = crossing(a, g, p, -1).ok_or(Error::NoCrossing("left"))?;
    let right = crossing(a, g, p, 1).ok_or(Error::NoCrossing("right"))?;
    let lo = first_null(g, p, -1);
    let hi = first_null(g, p, 1);
    let outside = g
        .iter()
        .enumerate()
        .filter(|&(i, _)| lo.is_some_and(|l| i < l) || hi.is_some_and(|h| i > h))
        .map(|(_, &v)| v);
    let sidelobe = outside.fold(None, |acc: Option<T>, v| Some(acc.map_or(v, |a| a.max(v))));
    Ok(PatternMetrics {
        peak_angle_deg: a[p],
        beamwidth_3db_deg: right - left,
        sidelobe_level_db: sidelobe,
        peak_magnitude_db: pattern.peak_magnitude_db(),
    })
}

/// Outcome of one commanded steering angle in a scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint<T> {
    pub command_deg: T,
    pub peak_angle_deg: T,
    pub peak_magnitude_db: T,
    /// Metrics when both −3 dB crossings lie inside the cut.
    pub metrics: Option<PatternMetrics<T>>,
    /// Peak lands within tolerance of the command and the lobe drops by 3 dB
    /// on at least one side.
    pub resolvable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSummary<T> {
    pub points: Vec<ScanPoint<T>>,
    /// Angular extent covered by resolvable commands.
    pub scan_range_deg: T,
    /// Max minus min peak magnitude across commands.
    pub peak_fluctuation_db: T,
    pub mean_sidelobe_level_db: Option<T>,
}

pub fn scan_point<T: RisFloat>(pattern: &RadiationPattern<T>, command_deg: T, tolerance_deg: T) -> ScanPoint<T> {
    let p = peak_index(&pattern.gain_db);
    let peak = pattern.angles_deg[p];
    let (a, g) = (&pattern.angles_deg, &pattern.gain_db);
    let one_side = crossing(a, g, p, -1).is_some() || crossing(a, g, p, 1).is_some();
    ScanPoint {
        command_deg,
        peak_angle_deg: peak,
        peak_magnitude_db: pattern.peak_magnitude_db(),
        metrics: extract_metrics(pattern).ok(),
        resolvable: (peak - command_deg).abs() <= tolerance_deg && one_side,
    }
}

pub fn summarize_scan<T: RisFloat>(points: Vec<ScanPoint<T>>) -> ScanSummary<T> {
    let resolved: Vec<T> = points.iter().filter(|p| p.resolvable).map(|p| p.command_deg).collect();
    let scan_range_deg = match (
        resolved.iter().copied().reduce(T::min),
        resolved.iter().copied().reduce(T::max),
    ) {
        (Some(lo), Some(hi)) => hi - lo,
        _ => T::zero(),
    };
    let mags = points.iter().map(|p| p.peak_magnitude_db);
    let peak_fluctuation_db = match (mags.clone().reduce(T::max), mags.reduce(T::min)) {
        (Some(hi), Some(lo)) => hi - lo,
        _ => T::zero(),
    };
    let slls: Vec<T> = points
        .iter()
        .filter_map(|p| p.metrics.and_then(|m| m.sidelobe_level_db))
        .collect();
    let mean_sidelobe_level_db = if slls.is_empty() {
        None
    } else {
        Some(slls.iter().copied().sum::<T>() / T::of(slls.len() as f64))
    };
    ScanSummary {
        points,
        scan_range_deg,
        peak_fluctuation_db,
        mean_sidelobe_level_db,
    }
}
