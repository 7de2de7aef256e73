//! Uniform planar array model of the surface.
//!
//! Elements are indexed by `(m, n)` with `m` counting along the vertical z axis
//! (`rows_z` elements) and `n` along the horizontal y axis (`cols_y` elements).
//! Element `(0, 0)` sits at the origin of the surface-local frame and element
//! `(m, n)` at `(0, n·d_y, m·d_z)`; the local x axis is the surface normal.
//!
//! Flat vectors of length `L = rows_z · cols_y` use the Kronecker order
//! `k = n·rows_z + m`, so that `a_y ⊗ a_z` lines up with the columns of the
//! coefficient matrix.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cis, wrap_pi, wrap_two_pi, RisFloat};

/// Layout of the surface: element counts, spacings and design wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RisGeometry<T> {
    pub rows_z: usize,
    pub cols_y: usize,
    pub spacing_z: T,
    pub spacing_y: T,
    pub wavelength: T,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGeometry<T> {
    rows_z: usize,
    cols_y: usize,
    wavelength: T,
    #[serde(default)]
    spacing_z: Option<T>,
    #[serde(default)]
    spacing_y: Option<T>,
}

impl<'de, T: RisFloat> Deserialize<'de> for RisGeometry<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawGeometry::<T>::deserialize(d)?;
        let half = raw.wavelength / T::of(2.0);
        RisGeometry::new(
            raw.rows_z,
            raw.cols_y,
            raw.spacing_z.unwrap_or(half),
            raw.spacing_y.unwrap_or(half),
            raw.wavelength,
        )
        .map_err(serde::de::Error::custom)
    }
}

impl<T: RisFloat> RisGeometry<T> {
    pub fn new(rows_z: usize, cols_y: usize, spacing_z: T, spacing_y: T, wavelength: T) -> Result<Self> {
        let g = Self {
            rows_z,
            cols_y,
            spacing_z,
            spacing_y,
            wavelength,
        };
        g.validate()?;
        Ok(g)
    }

    /// Half-wavelength spacing on both axes.
    pub fn half_wavelength(rows_z: usize, cols_y: usize, wavelength: T) -> Result<Self> {
        let half = wavelength / T::of(2.0);
        Self::new(rows_z, cols_y, half, half, wavelength)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows_z == 0 || self.cols_y == 0 {
            return Err(Error::InvalidGeometry(format!(
                "element counts must be positive, got {}x{}",
                self.rows_z, self.cols_y
            )));
        }
        for (name, v) in [
            ("spacing_z", self.spacing_z),
            ("spacing_y", self.spacing_y),
            ("wavelength", self.wavelength),
        ] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::InvalidGeometry(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }

    /// Total element count `L`.
    pub fn len(&self) -> usize {
        self.rows_z * self.cols_y
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn wavenumber(&self) -> T {
        T::TAU() / self.wavelength
    }

    /// Flat (Kronecker-order) index of element `(m, n)`.
    #[inline]
    pub fn flat_index(&self, m: usize, n: usize) -> usize {
        n * self.rows_z + m
    }

    /// Inverse of [`flat_index`](Self::flat_index).
    #[inline]
    pub fn element_of(&self, k: usize) -> (usize, usize) {
        (k % self.rows_z, k / self.rows_z)
    }

    /// Position of element `(m, n)` in the surface-local frame, `(x, y, z)`.
    pub fn element_local(&self, m: usize, n: usize) -> [T; 3] {
        [
            T::zero(),
            T::of(n as f64) * self.spacing_y,
            T::of(m as f64) * self.spacing_z,
        ]
    }

    /// Local `(y, z)` of the array centre; scenarios place the surface by its centre.
    pub fn centre_local(&self) -> (T, T) {
        let two = T::of(2.0);
        (
            T::of((self.cols_y - 1) as f64) * self.spacing_y / two,
            T::of((self.rows_z - 1) as f64) * self.spacing_z / two,
        )
    }

    pub fn check_index(&self, m: usize, n: usize) -> Result<()> {
        if m >= self.rows_z || n >= self.cols_y {
            return Err(Error::IndexOutOfRange {
                m,
                n,
                rows: self.rows_z,
                cols: self.cols_y,
            });
        }
        Ok(())
    }
}

/// One reflection state of the hardware unit cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(T, T)", into = "(T, T)")]
pub struct PhaseState<T: Copy> {
    pub amplitude: T,
    pub phase: T,
}

impl<T: Copy> From<(T, T)> for PhaseState<T> {
    fn from((amplitude, phase): (T, T)) -> Self {
        Self { amplitude, phase }
    }
}

impl<T: Copy> From<PhaseState<T>> for (T, T) {
    fn from(s: PhaseState<T>) -> Self {
        (s.amplitude, s.phase)
    }
}

impl<T: RisFloat> PhaseState<T> {
    pub fn coefficient(&self) -> Complex<T> {
        Complex::from_polar(self.amplitude, self.phase)
    }
}

/// The set of reflection coefficients an element can realise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase", deny_unknown_fields)]
pub enum PhaseStateSet<T: Copy> {
    Continuous,
    Discrete { states: Vec<PhaseState<T>> },
}

impl<T: RisFloat> PhaseStateSet<T> {
    pub fn continuous() -> Self {
        Self::Continuous
    }

    pub fn discrete(states: Vec<PhaseState<T>>) -> Result<Self> {
        let s = Self::Discrete { states };
        s.validate()?;
        Ok(s)
    }

    /// `{(1, 0), (1, π)}`.
    pub fn one_bit() -> Self {
        Self::k_bit(1)
    }

    /// `2^bits` unit-amplitude states uniformly spaced in phase, state 0 at phase 0.
    pub fn k_bit(bits: u32) -> Self {
        assert!((1..=8).contains(&bits), "k-bit state sets support 1..=8 bits");
        let count = 1usize << bits;
        let states = (0..count)
            .map(|i| PhaseState {
                amplitude: T::one(),
                phase: T::TAU() * T::of(i as f64) / T::of(count as f64),
            })
            .collect();
        Self::Discrete { states }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Continuous => Ok(()),
            Self::Discrete { states } => {
                if states.is_empty() {
                    return Err(Error::Empty("phase-state set"));
                }
                if states.len() < 2 {
                    return Err(Error::InvalidStates("a discrete set needs at least two states".into()));
                }
                for (i, s) in states.iter().enumerate() {
                    if !(s.amplitude >= T::zero() && s.amplitude <= T::one()) {
                        return Err(Error::InvalidStates(format!("state {i}: amplitude {} outside [0, 1]", s.amplitude)));
                    }
                    if !(s.phase >= T::zero() && s.phase < T::TAU()) {
                        return Err(Error::InvalidStates(format!("state {i}: phase {} outside [0, 2π)", s.phase)));
                    }
                }
                Ok(())
            }
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Self::Discrete { .. })
    }

    pub fn states(&self) -> &[PhaseState<T>] {
        match self {
            Self::Continuous => &[],
            Self::Discrete { states } => states,
        }
    }

    /// Bits needed to index a state; `None` for continuous sets.
    pub fn bits(&self) -> Option<u32> {
        match self {
            Self::Continuous => None,
            Self::Discrete { states } => Some(usize::BITS - (states.len() - 1).leading_zeros()),
        }
    }

    /// Coefficient used for the all-state-0 initial configuration.
    pub fn ground_coefficient(&self) -> Complex<T> {
        match self {
            Self::Continuous => Complex::new(T::one(), T::zero()),
            Self::Discrete { states } => states[0].coefficient(),
        }
    }

    /// Index of the state nearest in phase to `c`; ties go to the lower index.
    pub fn nearest_state(&self, c: Complex<T>) -> Result<usize> {
        let states = match self {
            Self::Continuous => return Err(Error::InvalidStates("continuous set has no state indices".into())),
            Self::Discrete { states } => states,
        };
        if states.is_empty() {
            return Err(Error::Empty("phase-state set"));
        }
        let phase = c.arg();
        let tie = T::epsilon() * T::of(64.0);
        let mut best = 0;
        let mut best_d = wrap_pi(phase - states[0].phase).abs();
        for (i, s) in states.iter().enumerate().skip(1) {
            let d = wrap_pi(phase - s.phase).abs();
            if d < best_d - tie {
                best = i;
                best_d = d;
            }
        }
        Ok(best)
    }
}

/// Array response of the surface toward one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector<T> {
    entries: Vec<Complex<T>>,
    geometry: RisGeometry<T>,
    angle: Option<(T, T)>,
}

impl<T: RisFloat> SteeringVector<T> {
    pub fn new(geometry: RisGeometry<T>, entries: Vec<Complex<T>>, angle: Option<(T, T)>) -> Result<Self> {
        if entries.len() != geometry.len() {
            return Err(Error::LengthMismatch {
                expected: geometry.len(),
                got: entries.len(),
            });
        }
        Ok(Self {
            entries,
            geometry,
            angle,
        })
    }

    pub fn entries(&self) -> &[Complex<T>] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<Complex<T>> {
        self.entries
    }

    pub fn geometry(&self) -> &RisGeometry<T> {
        &self.geometry
    }

    /// `(zenith, azimuth)` in radians, when known.
    pub fn angle(&self) -> Option<(T, T)> {
        self.angle
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Per-element reflection coefficients, stored column by column (`k = n·M + m`).
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseProfile<T> {
    coefficients: Vec<Complex<T>>,
    geometry: RisGeometry<T>,
}

impl<T: RisFloat> PhaseProfile<T> {
    pub fn new(geometry: RisGeometry<T>, coefficients: Vec<Complex<T>>) -> Result<Self> {
        if coefficients.len() != geometry.len() {
            return Err(Error::LengthMismatch {
                expected: geometry.len(),
                got: coefficients.len(),
            });
        }
        let limit = T::one() + T::epsilon() * T::of(64.0);
        if let Some(k) = coefficients.iter().position(|c| !(c.norm() <= limit)) {
            return Err(Error::InvalidStates(format!(
                "coefficient {k} has modulus {} > 1 (passive surface)",
                coefficients[k].norm()
            )));
        }
        Ok(Self {
            coefficients,
            geometry,
        })
    }

    pub fn uniform(geometry: RisGeometry<T>, c: Complex<T>) -> Result<Self> {
        Self::new(geometry, vec![c; geometry.len()])
    }

    /// The all-state-0 configuration (`R₀`, and the "surface off" baseline).
    pub fn ground(geometry: RisGeometry<T>, states: &PhaseStateSet<T>) -> Self {
        Self {
            coefficients: vec![states.ground_coefficient(); geometry.len()],
            geometry,
        }
    }

    /// Unit-amplitude profile from phases in Kronecker order.
    pub fn from_phases(geometry: RisGeometry<T>, phases: &[T]) -> Result<Self> {
        Self::new(geometry, phases.iter().map(|&p| cis(p)).collect())
    }

    /// Profile from per-element state indices in Kronecker order.
    pub fn from_state_indices(geometry: RisGeometry<T>, states: &PhaseStateSet<T>, indices: &[usize]) -> Result<Self> {
        let set = states.states();
        if set.is_empty() {
            return Err(Error::InvalidStates("state indices need a discrete set".into()));
        }
        let coeffs = indices
            .iter()
            .map(|&i| {
                set.get(i)
                    .map(PhaseState::coefficient)
                    .ok_or_else(|| Error::InvalidStates(format!("state index {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(geometry, coeffs)
    }

    pub fn geometry(&self) -> &RisGeometry<T> {
        &self.geometry
    }

    pub fn coefficients(&self) -> &[Complex<T>] {
        &self.coefficients
    }

    pub fn get(&self, m: usize, n: usize) -> Complex<T> {
        self.coefficients[self.geometry.flat_index(m, n)]
    }

    /// Column `n`, i.e. `r_n` with `rows_z` entries.
    pub fn column(&self, n: usize) -> &[Complex<T>] {
        let m = self.geometry.rows_z;
        &self.coefficients[n * m..(n + 1) * m]
    }

    pub fn set(&mut self, m: usize, n: usize, c: Complex<T>) -> Result<()> {
        self.geometry.check_index(m, n)?;
        if c.norm() > T::one() + T::epsilon() * T::of(64.0) {
            return Err(Error::InvalidStates("coefficient modulus exceeds 1".into()));
        }
        let k = self.geometry.flat_index(m, n);
        self.coefficients[k] = c;
        Ok(())
    }

    /// Phases in Kronecker order.
    pub fn phases(&self) -> Vec<T> {
        self.coefficients.iter().map(|c| c.arg()).collect()
    }

    /// State index per element (Kronecker order) under a discrete set.
    pub fn state_indices(&self, states: &PhaseStateSet<T>) -> Result<Vec<usize>> {
        self.coefficients.iter().map(|&c| states.nearest_state(c)).collect()
    }
}

fn check_angle<T: RisFloat>(name: &str, v: T) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteAngle(format!("{name} = {v}")))
    }
}

/// `a(θ, φ)` evaluated element by element:
/// `e^{-j(2π/λ)(m·d_z·cosθ + n·d_y·sinθ·sinφ)}` at index `n·M + m`.
pub fn steering_vector<T: RisFloat>(geom: &RisGeometry<T>, theta: T, phi: T) -> Result<SteeringVector<T>> {
    check_angle("theta", theta)?;
    check_angle("phi", phi)?;
    let k = geom.wavenumber();
    let uz = theta.cos();
    let uy = theta.sin() * phi.sin();
    let mut entries = Vec::with_capacity(geom.len());
    for n in 0..geom.cols_y {
        for m in 0..geom.rows_z {
            let [_, y, z] = geom.element_local(m, n);
            entries.push(cis(-k * (z * uz + y * uy)));
        }
    }
    SteeringVector::new(*geom, entries, Some((theta, phi)))
}

/// `a_z(θ)`: the length-`M` response of one column.
pub fn steering_vector_z<T: RisFloat>(geom: &RisGeometry<T>, theta: T) -> Result<Vec<Complex<T>>> {
    check_angle("theta", theta)?;
    let step = -geom.wavenumber() * geom.spacing_z * theta.cos();
    Ok((0..geom.rows_z).map(|m| cis(step * T::of(m as f64))).collect())
}

/// `a_y(θ, φ)`: the length-`N` response of one row.
pub fn steering_vector_y<T: RisFloat>(geom: &RisGeometry<T>, theta: T, phi: T) -> Result<Vec<Complex<T>>> {
    check_angle("theta", theta)?;
    check_angle("phi", phi)?;
    let step = -geom.wavenumber() * geom.spacing_y * theta.sin() * phi.sin();
    Ok((0..geom.cols_y).map(|n| cis(step * T::of(n as f64))).collect())
}

/// Plain Kronecker product of two vectors: entry `i·len(b) + j` is `a[i]·b[j]`.
pub fn kron<T: RisFloat>(a: &[Complex<T>], b: &[Complex<T>]) -> Vec<Complex<T>> {
    a.iter().flat_map(|&x| b.iter().map(move |&y| x * y)).collect()
}

/// `a_y ⊗ a_z` checked against the geometry.
pub fn kronecker_compose<T: RisFloat>(
    geom: &RisGeometry<T>,
    a_y: &[Complex<T>],
    a_z: &[Complex<T>],
) -> Result<SteeringVector<T>> {
    if a_y.len() != geom.cols_y {
        return Err(Error::LengthMismatch {
            expected: geom.cols_y,
            got: a_y.len(),
        });
    }
    if a_z.len() != geom.rows_z {
        return Err(Error::LengthMismatch {
            expected: geom.rows_z,
            got: a_z.len(),
        });
    }
    SteeringVector::new(*geom, kron(a_y, a_z), None)
}

/// Maps every coefficient onto the nearest discrete state.
pub fn quantize_profile<T: RisFloat>(profile: &PhaseProfile<T>, states: &PhaseStateSet<T>) -> Result<PhaseProfile<T>> {
    let set = match states {
        PhaseStateSet::Continuous => {
            return Err(Error::InvalidStates("quantization needs a discrete set".into()));
        }
        PhaseStateSet::Discrete { states } if states.is_empty() => return Err(Error::Empty("phase-state set")),
        PhaseStateSet::Discrete { states } => states,
    };
    let coefficients = profile
        .coefficients
        .iter()
        .map(|&c| states.nearest_state(c).map(|i| set[i].coefficient()))
        .collect::<Result<Vec<_>>>()?;
    Ok(PhaseProfile {
        coefficients,
        geometry: profile.geometry,
    })
}

/// Applies the state set at dispatch: quantizes discrete sets, passes continuous through.
pub fn dispatch_profile<T: RisFloat>(profile: PhaseProfile<T>, states: &PhaseStateSet<T>) -> Result<PhaseProfile<T>> {
    if states.is_discrete() {
        quantize_profile(&profile, states)
    } else {
        Ok(profile)
    }
}

/// Reshapes a steering vector into the coefficient matrix, column `n` taking
/// entries `[n·M, (n+1)·M)`.
pub fn profile_from_vector<T: RisFloat>(v: &SteeringVector<T>) -> Result<PhaseProfile<T>> {
    PhaseProfile::new(v.geometry, v.entries.clone())
}

pub fn vector_from_profile<T: RisFloat>(p: &PhaseProfile<T>) -> SteeringVector<T> {
    SteeringVector {
        entries: p.coefficients.clone(),
        geometry: p.geometry,
        angle: None,
    }
}

/// Phase in `[0, 2π)` of a coefficient; zero for a null coefficient.
pub fn phase_of<T: RisFloat>(c: Complex<T>) -> T {
    wrap_two_pi(c.arg())
}
