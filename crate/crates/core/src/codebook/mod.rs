//! Codebook builders: the angle-based 2-D codebook, the two-step pair
//! (z-stage / y-stage plus the composed second stage) and the oversampled DFT
//! codebook.
//!
//! Codewords are stored with continuous phases; quantization to the hardware
//! states happens when a codeword is dispatched to an oracle.

mod format;

pub use format::{export_codebook, import_codebook, CodebookFormat};

use std::fmt;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::geometry::{
    kronecker_compose, steering_vector, steering_vector_y, steering_vector_z, PhaseProfile, RisGeometry,
};
use crate::scalar::{cis, RisFloat};

/// Ordered zenith and azimuth samples, in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleGrid<T> {
    zeniths: Vec<T>,
    azimuths: Vec<T>,
}

impl<T: RisFloat> AngleGrid<T> {
    pub fn new(zeniths: Vec<T>, azimuths: Vec<T>) -> Result<Self> {
        check_axis("zenith", &zeniths, T::zero(), T::PI())?;
        check_axis("azimuth", &azimuths, -T::FRAC_PI_2(), T::FRAC_PI_2())?;
        Ok(Self { zeniths, azimuths })
    }

    /// Grid from inclusive degree ranges.
    pub fn from_degrees(zeniths: (f64, f64, f64), azimuths: (f64, f64, f64)) -> Result<Self> {
        Self::new(
            degree_range(zeniths.0, zeniths.1, zeniths.2)?,
            degree_range(azimuths.0, azimuths.1, azimuths.2)?,
        )
    }

    /// Zeniths 50°–130° and azimuths −80°…+80°, 2° steps (41 × 81).
    pub fn default_grid() -> Self {
        Self::from_degrees((50.0, 130.0, 2.0), (-80.0, 80.0, 2.0)).expect("default grid is valid")
    }

    pub fn zeniths(&self) -> &[T] {
        &self.zeniths
    }

    pub fn azimuths(&self) -> &[T] {
        &self.azimuths
    }

    /// `q`.
    pub fn zenith_count(&self) -> usize {
        self.zeniths.len()
    }

    /// `p`.
    pub fn azimuth_count(&self) -> usize {
        self.azimuths.len()
    }
}

fn check_axis<T: RisFloat>(name: &str, v: &[T], lo: T, hi: T) -> Result<()> {
    if v.is_empty() {
        return Err(Error::InvalidGrid(format!("no {name} angles")));
    }
    let slack = T::epsilon() * T::of(16.0);
    for (i, &a) in v.iter().enumerate() {
        if !a.is_finite() || a < lo - slack || a > hi + slack {
            return Err(Error::InvalidGrid(format!("{name} {i} = {} rad outside [{lo}, {hi}]", a)));
        }
        if i > 0 && a <= v[i - 1] {
            return Err(Error::InvalidGrid(format!("{name} angles must be strictly increasing (index {i})")));
        }
    }
    Ok(())
}

/// Inclusive range `start, start+step, …, ≤ stop` in degrees, returned in radians.
pub fn degree_range<T: RisFloat>(start: f64, stop: f64, step: f64) -> Result<Vec<T>> {
    if !(step > 0.0) || !start.is_finite() || !stop.is_finite() || stop < start {
        return Err(Error::InvalidGrid(format!("bad range {start}:{stop}:{step}")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| T::of((start + i as f64 * step).to_radians())).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CodebookKind {
    Angle2d,
    ZStage,
    YStage,
    Composed,
    Dft,
}

impl CodebookKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Angle2d => "angle2d",
            Self::ZStage => "z-stage",
            Self::YStage => "y-stage",
            Self::Composed => "composed",
            Self::Dft => "dft",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "angle2d" => Self::Angle2d,
            "z-stage" => Self::ZStage,
            "y-stage" => Self::YStage,
            "composed" => Self::Composed,
            "dft" => Self::Dft,
            _ => return None,
        })
    }

    /// Codeword length for a geometry.
    pub fn codeword_len<T: RisFloat>(self, geom: &RisGeometry<T>) -> usize {
        match self {
            Self::ZStage => geom.rows_z,
            Self::YStage => geom.cols_y,
            _ => geom.len(),
        }
    }

    /// Whether codewords cover the full surface.
    pub fn is_full_surface(self) -> bool {
        !matches!(self, Self::ZStage | Self::YStage)
    }
}

impl fmt::Display for CodebookKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Metadata attached to a codeword.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CodewordLabel<T> {
    /// Steering direction `(θ, φ)` in radians.
    Angle { theta: T, phi: T },
    /// Zenith-only codeword of the z-stage.
    Zenith { theta: T },
    /// DFT bin pair.
    Dft { kz: usize, ky: usize },
}

impl<T: RisFloat> CodewordLabel<T> {
    /// `(θ, φ)` if the label carries a direction.
    pub fn angles(&self) -> Option<(T, T)> {
        match *self {
            Self::Angle { theta, phi } => Some((theta, phi)),
            Self::Zenith { theta } => Some((theta, T::zero())),
            Self::Dft { .. } => None,
        }
    }
}

impl<T: RisFloat> fmt::Display for CodewordLabel<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Self::Angle { theta, phi } => write!(f, "{:.2}/{:.2}", theta.deg(), phi.deg()),
            Self::Zenith { theta } => write!(f, "{:.2}/-", theta.deg()),
            Self::Dft { kz, ky } => write!(f, "dft{kz}.{ky}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Codeword<T> {
    pub label: CodewordLabel<T>,
    pub entries: Vec<Complex<T>>,
}

/// Ordered candidate configurations with their labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook<T> {
    kind: CodebookKind,
    geometry: RisGeometry<T>,
    codewords: Vec<Codeword<T>>,
}

impl<T: RisFloat> Codebook<T> {
    pub fn new(kind: CodebookKind, geometry: RisGeometry<T>, codewords: Vec<Codeword<T>>) -> Result<Self> {
        if codewords.is_empty() {
            return Err(Error::Empty("codebook"));
        }
        let want = kind.codeword_len(&geometry);
        if let Some(cw) = codewords.iter().find(|c| c.entries.len() != want) {
            return Err(Error::LengthMismatch {
                expected: want,
                got: cw.entries.len(),
            });
        }
        Ok(Self {
            kind,
            geometry,
            codewords,
        })
    }

    pub fn kind(&self) -> CodebookKind {
        self.kind
    }

    pub fn geometry(&self) -> &RisGeometry<T> {
        &self.geometry
    }

    pub fn codewords(&self) -> &[Codeword<T>] {
        &self.codewords
    }

    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// Codeword `i` as a full-surface profile; fails for z-/y-stage codebooks.
    pub fn profile(&self, i: usize) -> Result<PhaseProfile<T>> {
        if !self.kind.is_full_surface() {
            return Err(Error::LengthMismatch {
                expected: self.geometry.len(),
                got: self.kind.codeword_len(&self.geometry),
            });
        }
        PhaseProfile::new(self.geometry, self.codewords[i].entries.clone())
    }
}

/// Angle-based 2-D codebook: `[a(θ₁,φ₁), a(θ₁,φ₂), …, a(θ_q,φ_p)]`, zenith-major.
///
/// `incidence`, when given, is the specular direction `(θ_in, φ_in)` of the
/// incident wave; each codeword is then multiplied by `conj(a(θ_in, φ_in))` so
/// that it steers relative to that incidence instead of normal incidence.
pub fn build_angle_codebook<T: RisFloat>(
    geom: &RisGeometry<T>,
    grid: &AngleGrid<T>,
    incidence: Option<(T, T)>,
) -> Result<Codebook<T>> {
    let compensation = match incidence {
        Some((t, p)) => Some(steering_vector(geom, t, p)?),
        None => None,
    };
    let mut codewords = Vec::with_capacity(grid.zenith_count() * grid.azimuth_count());
    for &theta in grid.zeniths() {
        for &phi in grid.azimuths() {
            let mut entries = steering_vector(geom, theta, phi)?.into_entries();
            if let Some(comp) = &compensation {
                for (e, c) in entries.iter_mut().zip(comp.entries()) {
                    *e = *e * c.conj();
                }
            }
            codewords.push(Codeword {
                label: CodewordLabel::Angle { theta, phi },
                entries,
            });
        }
    }
    Codebook::new(CodebookKind::Angle2d, *geom, codewords)
}

/// `F_z = [a_z(θ₁), …, a_z(θ_q)]`.
pub fn build_z_codebook<T: RisFloat>(geom: &RisGeometry<T>, zeniths: &[T]) -> Result<Codebook<T>> {
    if zeniths.is_empty() {
        return Err(Error::Empty("zenith list"));
    }
    let codewords = zeniths
        .iter()
        .map(|&theta| {
            Ok(Codeword {
                label: CodewordLabel::Zenith { theta },
                entries: steering_vector_z(geom, theta)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Codebook::new(CodebookKind::ZStage, *geom, codewords)
}

/// `F_y = [a_y(θ_sel, φ₁), …, a_y(θ_sel, φ_p)]` for the zenith chosen by the first scan.
pub fn build_y_codebook<T: RisFloat>(geom: &RisGeometry<T>, theta_selected: T, azimuths: &[T]) -> Result<Codebook<T>> {
    if azimuths.is_empty() {
        return Err(Error::Empty("azimuth list"));
    }
    let codewords = azimuths
        .iter()
        .map(|&phi| {
            Ok(Codeword {
                label: CodewordLabel::Angle {
                    theta: theta_selected,
                    phi,
                },
                entries: steering_vector_y(geom, theta_selected, phi)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Codebook::new(CodebookKind::YStage, *geom, codewords)
}

/// Second-stage codebook `F̂ = F_y ⊗ a_z(θ_sel)`.
pub fn compose_second_stage<T: RisFloat>(y_stage: &Codebook<T>, a_z_selected: &[Complex<T>]) -> Result<Codebook<T>> {
    if y_stage.kind() != CodebookKind::YStage {
        return Err(Error::InvalidGrid(format!(
            "second stage needs a y-stage codebook, got {}",
            y_stage.kind()
        )));
    }
    let geom = y_stage.geometry();
    let codewords = y_stage
        .codewords()
        .iter()
        .map(|cw| {
            Ok(Codeword {
                label: cw.label,
                entries: kronecker_compose(geom, &cw.entries, a_z_selected)?.into_entries(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Codebook::new(CodebookKind::Composed, *geom, codewords)
}

/// Separable oversampled 2-D DFT codebook.
///
/// Codeword `(k_z, k_y)`, stored at index `k_z·(O_y·N) + k_y`, has element
/// phase `2π(m·k_z/(O_z·M) + n·k_y/(O_y·N))`.
pub fn build_dft_codebook<T: RisFloat>(
    geom: &RisGeometry<T>,
    oversampling_z: usize,
    oversampling_y: usize,
) -> Result<Codebook<T>> {
    if oversampling_z == 0 || oversampling_y == 0 {
        return Err(Error::InvalidGrid("oversampling factors must be >= 1".into()));
    }
    let bins_z = oversampling_z * geom.rows_z;
    let bins_y = oversampling_y * geom.cols_y;
    let mut codewords = Vec::with_capacity(bins_z * bins_y);
    for kz in 0..bins_z {
        for ky in 0..bins_y {
            let mut entries = Vec::with_capacity(geom.len());
            for n in 0..geom.cols_y {
                for m in 0..geom.rows_z {
                    // Integer phase numerators keep codeword (0, 0) exactly all-ones.
                    let fz = ((m * kz) % bins_z) as f64 / bins_z as f64;
                    let fy = ((n * ky) % bins_y) as f64 / bins_y as f64;
                    entries.push(cis(T::of(std::f64::consts::TAU * (fz + fy))));
                }
            }
            codewords.push(Codeword {
                label: CodewordLabel::Dft { kz, ky },
                entries,
            });
        }
    }
    Codebook::new(CodebookKind::Dft, *geom, codewords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn geom(m: usize, n: usize) -> RisGeometry<f64> {
        RisGeometry::half_wavelength(m, n, 0.0517).unwrap()
    }

    /// Direct evaluation of the per-element phase formula.
    fn formula(g: &RisGeometry<f64>, theta: f64, phi: f64, m: usize, n: usize) -> Complex<f64> {
        let k = 2.0 * PI / g.wavelength;
        cis(-k * (m as f64 * g.spacing_z * theta.cos() + n as f64 * g.spacing_y * theta.sin() * phi.sin()))
    }

    #[test]
    fn grid_validation() {
        assert!(AngleGrid::<f64>::new(vec![], vec![0.0]).is_err());
        assert!(AngleGrid::<f64>::new(vec![1.0, 1.0], vec![0.0]).is_err());
        assert!(AngleGrid::<f64>::new(vec![1.0], vec![2.0]).is_err());
        let g = AngleGrid::<f64>::default_grid();
        assert_eq!((g.zenith_count(), g.azimuth_count()), (41, 81));
        assert!((g.azimuths()[40]).abs() < 1e-12);
    }

    #[test]
    fn single_broadside_codeword() {
        let grid = AngleGrid::new(vec![PI / 2.0], vec![0.0]).unwrap();
        let cb = build_angle_codebook(&geom(3, 3), &grid, None).unwrap();
        assert_eq!(cb.len(), 1);
        assert!(cb.codewords()[0].entries.iter().all(|c| (c - Complex::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn angle_codebook_order_and_values() {
        let g = geom(3, 4);
        let grid = AngleGrid::from_degrees((60.0, 100.0, 20.0), (-40.0, 40.0, 20.0)).unwrap();
        let cb = build_angle_codebook(&g, &grid, None).unwrap();
        assert_eq!(cb.len(), 15);
        for (i, cw) in cb.codewords().iter().enumerate() {
            let (t, p) = (grid.zeniths()[i / 5], grid.azimuths()[i % 5]);
            assert_eq!(cw.label, CodewordLabel::Angle { theta: t, phi: p });
            for n in 0..4 {
                for m in 0..3 {
                    assert!((cw.entries[g.flat_index(m, n)] - formula(&g, t, p, m, n)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn stage_codebooks() {
        let g = geom(5, 6);
        assert!(build_z_codebook(&g, &[]).is_err());
        assert!(build_y_codebook(&g, 1.0, &[]).is_err());
        let one = build_z_codebook(&g, &[PI / 2.0]).unwrap();
        assert!(one.codewords()[0].entries.iter().all(|c| (c.re - 1.0).abs() < 1e-15));

        let zen: Vec<f64> = degree_range(50.0, 110.0, 10.0).unwrap();
        let fz = build_z_codebook(&g, &zen).unwrap();
        assert_eq!(fz.len(), 7);
        for (cw, &t) in fz.codewords().iter().zip(&zen) {
            for m in 0..5 {
                assert!((cw.entries[m] - formula(&g, t, 0.0, m, 0)).norm() < 1e-12);
            }
        }

        let az: Vec<f64> = degree_range(-30.0, 30.0, 10.0).unwrap();
        let fy = build_y_codebook(&g, 1.2, &az).unwrap();
        assert_eq!(fy.len(), 7);
        for (cw, &p) in fy.codewords().iter().zip(&az) {
            for n in 0..6 {
                assert!((cw.entries[n] - formula(&g, 1.2, p, 0, n)).norm() < 1e-12);
            }
        }
        let single = build_y_codebook(&g, PI / 2.0, &[0.0]).unwrap();
        assert!(single.codewords()[0].entries.iter().all(|c| (c.re - 1.0).abs() < 1e-15));
    }

    #[test]
    fn composed_matches_angle_codebook_row() {
        let g = geom(4, 6);
        let theta = 1.234;
        let az: Vec<f64> = degree_range(-45.0, 45.0, 10.0).unwrap();
        let fy = build_y_codebook(&g, theta, &az).unwrap();
        let az_sel = steering_vector_z(&g, theta).unwrap();
        let comp = compose_second_stage(&fy, &az_sel).unwrap();
        assert_eq!(comp.kind(), CodebookKind::Composed);
        assert_eq!(comp.len(), 10);
        let grid = AngleGrid::new(vec![theta], az.clone()).unwrap();
        let full = build_angle_codebook(&g, &grid, None).unwrap();
        for (a, b) in comp.codewords().iter().zip(full.codewords()) {
            for (x, y) in a.entries.iter().zip(&b.entries) {
                assert!((x - y).norm() < 1e-12);
            }
        }
        assert!(compose_second_stage(&fy, &az_sel[..3]).is_err());
        assert!(compose_second_stage(&full, &az_sel).is_err());
    }

    #[test]
    fn dft_unitary_at_unit_oversampling() {
        let g = geom(2, 2);
        let cb = build_dft_codebook(&g, 1, 1).unwrap();
        assert_eq!(cb.len(), 4);
        assert!(cb.codewords()[0].entries.iter().all(|c| *c == Complex::new(1.0, 0.0)));
        for (i, a) in cb.codewords().iter().enumerate() {
            for (j, b) in cb.codewords().iter().enumerate() {
                let ip: Complex<f64> = a.entries.iter().zip(&b.entries).map(|(x, y)| x.conj() * y).sum();
                let want = if i == j { 4.0 } else { 0.0 };
                assert!((ip - Complex::new(want, 0.0)).norm() < 1e-9);
            }
        }
        assert!(build_dft_codebook(&g, 0, 1).is_err());
    }

    #[test]
    fn dft_oversampled_inner_products() {
        let g = geom(4, 4);
        let cb = build_dft_codebook(&g, 2, 2).unwrap();
        assert_eq!(cb.len(), 64);
        // Brute force: <c(kz,ky), c(kz,ky+1)> = Σ_m 1 · Σ_n e^{j2π n/8}.
        for kz in 0..8 {
            for ky in 0..7 {
                let a = &cb.codewords()[kz * 8 + ky].entries;
                let b = &cb.codewords()[kz * 8 + ky + 1].entries;
                let ip: Complex<f64> = a.iter().zip(b).map(|(x, y)| x.conj() * y).sum();
                let mut want = Complex::new(0.0, 0.0);
                for _m in 0..4 {
                    for n in 0..4 {
                        want += cis(2.0 * PI * n as f64 / 8.0);
                    }
                }
                assert!((ip - want).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn incidence_compensation_optional() {
        let g = geom(3, 3);
        let grid = AngleGrid::new(vec![PI / 2.0], vec![0.3]).unwrap();
        let plain = build_angle_codebook(&g, &grid, None).unwrap();
        let normal = build_angle_codebook(&g, &grid, Some((PI / 2.0, 0.0))).unwrap();
        for (a, b) in plain.codewords()[0].entries.iter().zip(&normal.codewords()[0].entries) {
            assert!((a - b).norm() < 1e-15);
        }
        let tilted = build_angle_codebook(&g, &grid, Some((PI / 2.0, 0.3))).unwrap();
        assert!(tilted.codewords()[0].entries.iter().all(|c| (c.re - 1.0).abs() < 1e-12));
    }
}
