//! Narrowband propagation model: TX → surface → RX cascade, direct path,
//! point scatterers and measurement noise.
//!
//! The surface is placed by its centre. Its local frame has `x` along the
//! normal, `z` along `up` and `y = up × normal`; element `(m, n)` sits at
//! `centre + (n·d_y − c_y)·ŷ + (m·d_z − c_z)·ẑ`.

use num_complex::Complex;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{PhaseProfile, PhaseStateSet, RisGeometry};
use crate::oracle::{OracleError, PowerOracle};
use crate::scalar::{cis, RisFloat};
use crate::vec3::Vec3;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Reported power when the total field is exactly zero.
pub const NO_SIGNAL_DBM: f64 = -200.0;

/// Off-boresight roll-off is clamped this far below the boresight gain.
pub const ANTENNA_FLOOR_DB: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AntennaKind {
    Isotropic,
    Directional,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(serialize = "T: RisFloat", deserialize = "T: RisFloat"))]
pub struct AntennaModel<T: Copy> {
    pub kind: AntennaKind,
    #[serde(default)]
    pub boresight_gain_dbi: T,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beamwidth_3db_deg: Option<T>,
    /// Pointing direction; when absent the antenna aims at the surface centre.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boresight: Option<Vec3<T>>,
}

impl<T: RisFloat> AntennaModel<T> {
    pub fn isotropic() -> Self {
        Self {
            kind: AntennaKind::Isotropic,
            boresight_gain_dbi: T::zero(),
            beamwidth_3db_deg: None,
            boresight: None,
        }
    }

    pub fn directional(gain_dbi: T, beamwidth_deg: T) -> Self {
        Self {
            kind: AntennaKind::Directional,
            boresight_gain_dbi: gain_dbi,
            beamwidth_3db_deg: Some(beamwidth_deg),
            boresight: None,
        }
    }

    pub fn validate(&self, who: &str) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidScenario(format!("{who}.antenna: {msg}")));
        match self.kind {
            AntennaKind::Isotropic => {
                if self.boresight_gain_dbi != T::zero() {
                    return bad("isotropic antenna must have 0 dBi gain".into());
                }
                if self.beamwidth_3db_deg.is_some() {
                    return bad("isotropic antenna takes no beamwidth_3db_deg".into());
                }
            }
            AntennaKind::Directional => {
                let g = self.boresight_gain_dbi;
                if !(g.is_finite() && g >= T::zero()) {
                    return bad(format!("boresight_gain_dbi must be >= 0, got {g}"));
                }
                match self.beamwidth_3db_deg {
                    Some(bw) if bw > T::zero() && bw < T::of(180.0) => {}
                    Some(bw) => return bad(format!("beamwidth_3db_deg must lie in (0, 180), got {bw}")),
                    None => return bad("directional antenna needs beamwidth_3db_deg".into()),
                }
            }
        }
        if let Some(b) = self.boresight {
            if !(b.is_finite() && b.norm() > T::zero()) {
                return bad("boresight must be a non-zero finite vector".into());
            }
        }
        Ok(())
    }

    /// Gain in dBi at `off_axis` radians from boresight.
    pub fn gain_dbi(&self, off_axis: T) -> T {
        match self.kind {
            AntennaKind::Isotropic => T::zero(),
            AntennaKind::Directional => {
                let g0 = self.boresight_gain_dbi;
                let hpbw = self.beamwidth_3db_deg.unwrap_or(T::of(180.0)).rad();
                let x = off_axis / hpbw;
                (g0 - T::of(12.0) * x * x).max(g0 - T::of(ANTENNA_FLOOR_DB))
            }
        }
    }

    /// Linear power gain at `off_axis` radians from boresight.
    pub fn gain_linear(&self, off_axis: T) -> T {
        T::of(10.0).powf(self.gain_dbi(off_axis) / T::of(10.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(serialize = "T: RisFloat", deserialize = "T: RisFloat"))]
pub struct Terminal<T: Copy> {
    pub position: Vec3<T>,
    pub antenna: AntennaModel<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(serialize = "T: RisFloat", deserialize = "T: RisFloat"))]
pub struct Surface<T: Copy> {
    /// Centre of the element grid.
    pub position: Vec3<T>,
    pub normal: Vec3<T>,
    pub up: Vec3<T>,
    pub geometry: RisGeometry<T>,
    pub phase_states: PhaseStateSet<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(serialize = "T: RisFloat", deserialize = "T: RisFloat"))]
pub struct DirectPath<T: Copy> {
    pub present: bool,
    #[serde(default)]
    pub extra_attenuation_db: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(serialize = "T: RisFloat", deserialize = "T: RisFloat"))]
pub struct Scatterer<T: Copy> {
    pub position: Vec3<T>,
    pub amplitude_gain: T,
}

fn default_exponent<T: RisFloat>() -> T {
    T::one()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(serialize = "T: RisFloat", deserialize = "T: RisFloat"))]
pub struct Scenario<T: Copy> {
    #[serde(default)]
    pub id: String,
    pub carrier_hz: T,
    pub tx_power_dbm: T,
    pub tx: Terminal<T>,
    pub rx: Terminal<T>,
    pub ris: Surface<T>,
    pub direct_path: DirectPath<T>,
    #[serde(default)]
    pub scatterers: Vec<Scatterer<T>>,
    #[serde(default)]
    pub noise_sigma_db: T,
    #[serde(default)]
    pub rng_seed: u64,
    /// Exponent `q` of the element factor `(cosθ_inc·cosθ_ref)^(q/2)`; 0 disables it.
    #[serde(default = "default_exponent")]
    pub element_exponent: T,
}

fn invalid<V>(msg: impl Into<String>) -> Result<V> {
    Err(Error::InvalidScenario(msg.into()))
}

impl<T: RisFloat> Scenario<T> {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Self = serde_json::from_str(text).map_err(|e| Error::InvalidScenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.carrier_hz.is_finite() && self.carrier_hz > T::zero()) {
            return invalid(format!("carrier_hz must be positive, got {}", self.carrier_hz));
        }
        if !self.tx_power_dbm.is_finite() {
            return invalid("tx_power_dbm must be finite");
        }
        if !(self.noise_sigma_db.is_finite() && self.noise_sigma_db >= T::zero()) {
            return invalid(format!("noise_sigma_db must be >= 0, got {}", self.noise_sigma_db));
        }
        if !(self.element_exponent.is_finite() && self.element_exponent >= T::zero()) {
            return invalid("element_exponent must be >= 0");
        }
        let a = self.direct_path.extra_attenuation_db;
        if !(a.is_finite() && a >= T::zero()) {
            return invalid(format!("direct_path.extra_attenuation_db must be >= 0, got {a}"));
        }
        self.ris.geometry.validate().map_err(|e| Error::InvalidScenario(format!("ris.geometry: {e}")))?;
        self.ris.phase_states.validate().map_err(|e| Error::InvalidScenario(format!("ris.phase_states: {e}")))?;
        let tol = T::of(1e-6);
        let (nrm, up) = (self.ris.normal, self.ris.up);
        if !(nrm.is_finite() && up.is_finite()) {
            return invalid("ris.normal and ris.up must be finite");
        }
        if (nrm.norm() - T::one()).abs() > tol || (up.norm() - T::one()).abs() > tol {
            return invalid("ris.normal and ris.up must be unit vectors");
        }
        if nrm.dot(up).abs() > tol {
            return invalid("ris.normal and ris.up must be orthogonal");
        }
        if !self.ris.position.is_finite() {
            return invalid("ris.position must be finite");
        }
        self.tx.antenna.validate("tx")?;
        self.rx.antenna.validate("rx")?;
        for (who, t) in [("tx", &self.tx), ("rx", &self.rx)] {
            if !t.position.is_finite() {
                return invalid(format!("{who}.position must be finite"));
            }
            if (t.position - self.ris.position).dot(nrm) <= T::zero() {
                return invalid(format!("{who}.position must lie in front of the surface"));
            }
        }
        for (i, s) in self.scatterers.iter().enumerate() {
            if !s.position.is_finite() {
                return invalid(format!("scatterers[{i}].position must be finite"));
            }
            if !(s.amplitude_gain.is_finite() && s.amplitude_gain >= T::zero()) {
                return invalid(format!("scatterers[{i}].amplitude_gain must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn wavelength(&self) -> T {
        T::of(SPEED_OF_LIGHT) / self.carrier_hz
    }

    pub fn geometry(&self) -> &RisGeometry<T> {
        &self.ris.geometry
    }

    pub fn phase_states(&self) -> &PhaseStateSet<T> {
        &self.ris.phase_states
    }

    /// Unit vector along the surface-local y axis.
    pub fn y_axis(&self) -> Vec3<T> {
        self.ris.up.cross(self.ris.normal)
    }

    /// Global position of element `(m, n)`.
    pub fn element_position(&self, m: usize, n: usize) -> Vec3<T> {
        let g = &self.ris.geometry;
        let (cy, cz) = g.centre_local();
        let [_, y, z] = g.element_local(m, n);
        self.ris.position + self.y_axis().scale(y - cy) + self.ris.up.scale(z - cz)
    }

    /// Global unit vector for the local direction `(θ, φ)` (zenith from `up`,
    /// azimuth from the normal towards `y`).
    pub fn direction(&self, theta: T, phi: T) -> Vec3<T> {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        self.ris.normal.scale(st * cp) + self.y_axis().scale(st * sp) + self.ris.up.scale(ct)
    }

    /// Local `(θ, φ)` of `point` as seen from the surface centre.
    pub fn angles_of(&self, point: Vec3<T>) -> (T, T) {
        let v = point - self.ris.position;
        let r = v.norm();
        let x = v.dot(self.ris.normal);
        let y = v.dot(self.y_axis());
        let z = v.dot(self.ris.up);
        ((z / r).max(-T::one()).min(T::one()).acos(), y.atan2(x))
    }

    fn boresight(&self, t: &Terminal<T>) -> Vec3<T> {
        t.antenna.boresight.unwrap_or(self.ris.position - t.position)
    }

    fn off_axis(&self, t: &Terminal<T>, target: Vec3<T>) -> T {
        let b = self.boresight(t);
        let v = target - t.position;
        if v.norm() == T::zero() || b.norm() == T::zero() {
            T::zero()
        } else {
            b.angle_to(v)
        }
    }

    fn antenna_amplitude(&self, via: Vec3<T>, rx_from: Vec3<T>) -> T {
        let gt = self.tx.antenna.gain_linear(self.off_axis(&self.tx, via));
        let gr = self.rx.antenna.gain_linear(self.off_axis(&self.rx, rx_from));
        (gt * gr).sqrt()
    }

    /// Single-bounce term through `point` with reflection amplitude `a`, no element factor.
    fn bounce(&self, point: Vec3<T>, a: T) -> Result<Complex<T>> {
        let lambda = self.wavelength();
        let dt = (point - self.tx.position).norm();
        let dr = (self.rx.position - point).norm();
        if dt == T::zero() || dr == T::zero() {
            return Err(Error::DegenerateGeometry("scatterer coincides with a terminal".into()));
        }
        let amp = a * lambda / (T::of(4.0) * T::PI() * dt * dr) * self.antenna_amplitude(point, point);
        Ok(cis(-T::TAU() * (dt + dr) / lambda).scale(amp))
    }

    /// TX → RX free-space term including the blockage attenuation; zero if absent.
    pub fn direct_term(&self) -> Result<Complex<T>> {
        if !self.direct_path.present {
            return Ok(Complex::new(T::zero(), T::zero()));
        }
        let lambda = self.wavelength();
        let d = (self.rx.position - self.tx.position).norm();
        if d == T::zero() {
            return Err(Error::DegenerateGeometry("tx and rx coincide".into()));
        }
        let att = T::of(10.0).powf(-self.direct_path.extra_attenuation_db / T::of(20.0));
        let amp = lambda / (T::of(4.0) * T::PI() * d) * self.antenna_amplitude(self.rx.position, self.tx.position) * att;
        Ok(cis(-T::TAU() * d / lambda).scale(amp))
    }

    /// Sum of the direct path and all scatterer terms.
    pub fn fixed_term(&self) -> Result<Complex<T>> {
        let mut h = self.direct_term()?;
        for s in &self.scatterers {
            h = h + self.bounce(s.position, s.amplitude_gain)?;
        }
        Ok(h)
    }

    pub fn with_rx_position(&self, position: Vec3<T>) -> Self {
        let mut s = self.clone();
        s.rx.position = position;
        s
    }

    /// Same scenario with both terminals replaced by isotropic antennas.
    pub fn with_isotropic_antennas(&self) -> Self {
        let mut s = self.clone();
        s.tx.antenna = AntennaModel::isotropic();
        s.rx.antenna = AntennaModel::isotropic();
        s
    }
}

/// Complex cascade gain `g_{m,n}` of element `(m, n)`.
pub fn element_cascade_gain<T: RisFloat>(scenario: &Scenario<T>, m: usize, n: usize) -> Result<Complex<T>> {
    scenario.ris.geometry.check_index(m, n)?;
    let p = scenario.element_position(m, n);
    let to_tx = scenario.tx.position - p;
    let to_rx = scenario.rx.position - p;
    let (dt, dr) = (to_tx.norm(), to_rx.norm());
    if dt == T::zero() || dr == T::zero() {
        return Err(Error::DegenerateGeometry(format!("element ({m}, {n}) coincides with a terminal")));
    }
    let nrm = scenario.ris.normal;
    let cos_inc = to_tx.dot(nrm) / dt;
    let cos_ref = to_rx.dot(nrm) / dr;
    if cos_inc <= T::zero() || cos_ref <= T::zero() {
        return Ok(Complex::new(T::zero(), T::zero()));
    }
    let lambda = scenario.wavelength();
    let element = (cos_inc * cos_ref).powf(scenario.element_exponent / T::of(2.0));
    let amp = lambda / (T::of(4.0) * T::PI() * dt * dr) * scenario.antenna_amplitude(p, p) * element;
    Ok(cis(-T::TAU() * (dt + dr) / lambda).scale(amp))
}

/// Precomputed linear channel: `h(r) = fixed + Σ g_k r_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel<T> {
    geometry: RisGeometry<T>,
    gains: Vec<Complex<T>>,
    fixed: Complex<T>,
    tx_power_dbm: T,
}

impl<T: RisFloat> Channel<T> {
    pub fn new(scenario: &Scenario<T>) -> Result<Self> {
        let g = scenario.ris.geometry;
        let gains = (0..g.len())
            .map(|k| {
                let (m, n) = g.element_of(k);
                element_cascade_gain(scenario, m, n)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            geometry: g,
            gains,
            fixed: scenario.fixed_term()?,
            tx_power_dbm: scenario.tx_power_dbm,
        })
    }

    /// Per-element gains in Kronecker order.
    pub fn gains(&self) -> &[Complex<T>] {
        &self.gains
    }

    pub fn fixed(&self) -> Complex<T> {
        self.fixed
    }

    pub fn field(&self, profile: &PhaseProfile<T>) -> Result<Complex<T>> {
        let pg = profile.geometry();
        if (pg.rows_z, pg.cols_y) != (self.geometry.rows_z, self.geometry.cols_y) {
            return Err(Error::LengthMismatch {
                expected: self.gains.len(),
                got: pg.len(),
            });
        }
        Ok(self
            .gains
            .iter()
            .zip(profile.coefficients())
            .fold(self.fixed, |acc, (g, r)| acc + g * r))
    }

    pub fn power_of_field(&self, h: Complex<T>) -> Result<T> {
        let a = h.norm();
        if !a.is_finite() {
            return Err(Error::DegenerateGeometry("non-finite field".into()));
        }
        let floor = T::of(NO_SIGNAL_DBM);
        if a == T::zero() {
            return Ok(floor);
        }
        Ok((self.tx_power_dbm + T::of(20.0) * a.log10()).max(floor))
    }

    /// Noiseless received power in dBm.
    pub fn power(&self, profile: &PhaseProfile<T>) -> Result<T> {
        self.power_of_field(self.field(profile)?)
    }

    /// Noiseless received power with the surface removed.
    pub fn power_without_surface(&self) -> Result<T> {
        self.power_of_field(self.fixed)
    }
}

/// Noiseless received power of `profile` in dBm.
pub fn received_power<T: RisFloat>(scenario: &Scenario<T>, profile: &PhaseProfile<T>) -> Result<T> {
    Channel::new(scenario)?.power(profile)
}

/// Per-element conjugate phasing `r = e^{-j·arg g}`.
pub fn optimal_phase_profile<T: RisFloat>(scenario: &Scenario<T>) -> Result<PhaseProfile<T>> {
    let ch = Channel::new(scenario)?;
    let coeffs = ch
        .gains()
        .iter()
        .map(|g| if g.norm() == T::zero() { Complex::new(T::one(), T::zero()) } else { cis(-g.arg()) })
        .collect();
    PhaseProfile::new(scenario.ris.geometry, coeffs)
}

/// Simulated feedback loop: the scenario channel plus a counter and seeded noise.
#[derive(Debug, Clone)]
pub struct SimulatedOracle<T> {
    channel: Channel<T>,
    sigma_db: f64,
    rng: ChaCha8Rng,
    count: u64,
    readout_decimals: Option<usize>,
}

impl<T: RisFloat> SimulatedOracle<T> {
    pub fn new(scenario: &Scenario<T>) -> Result<Self> {
        Ok(Self {
            channel: Channel::new(scenario)?,
            sigma_db: scenario.noise_sigma_db.as_f64(),
            rng: ChaCha8Rng::seed_from_u64(scenario.rng_seed),
            count: 0,
            readout_decimals: None,
        })
    }

    /// Rounds every reading to `decimals` places, as a text readout would.
    pub fn with_readout_decimals(mut self, decimals: usize) -> Self {
        self.readout_decimals = Some(decimals);
        self
    }

    /// Reseeds the noise stream and zeroes the counter.
    pub fn reset(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.count = 0;
    }

    pub fn channel(&self) -> &Channel<T> {
        &self.channel
    }

    fn measure(&mut self, noiseless: T) -> T {
        let mut p = noiseless;
        if self.sigma_db > 0.0 {
            let n = Normal::new(0.0, self.sigma_db).expect("sigma validated");
            p = p + T::of(n.sample(&mut self.rng));
        }
        match self.readout_decimals {
            Some(d) => T::of(format!("{:.*}", d, p.as_f64()).parse::<f64>().expect("formatted float parses")),
            None => p,
        }
    }

    /// One noisy reading with the surface removed; not counted as a query.
    pub fn measure_without_surface(&mut self) -> Result<T> {
        let p = self.channel.power_without_surface()?;
        Ok(self.measure(p))
    }
}

impl<T: RisFloat> PowerOracle<T> for SimulatedOracle<T> {
    fn query(&mut self, profile: &PhaseProfile<T>) -> Result<T, OracleError> {
        self.count += 1;
        let p = self.channel.power(profile)?;
        Ok(self.measure(p))
    }

    fn query_count(&self) -> u64 {
        self.count
    }
}

pub fn make_oracle<T: RisFloat>(scenario: &Scenario<T>) -> Result<SimulatedOracle<T>> {
    SimulatedOracle::new(scenario)
}

/// Free-space LoS test scenario: isotropic terminals, continuous or given states,
/// TX on the surface normal at `tx_distance`, RX at `(θ, φ)` and `rx_distance`.
pub fn los_scenario<T: RisFloat>(
    geometry: RisGeometry<T>,
    states: PhaseStateSet<T>,
    carrier_hz: T,
    tx_distance: T,
    rx_angle: (T, T),
    rx_distance: T,
) -> Result<Scenario<T>> {
    let zero = T::zero();
    let one = T::one();
    let mut s = Scenario {
        id: "los".into(),
        carrier_hz,
        tx_power_dbm: zero,
        tx: Terminal {
            position: Vec3::new(tx_distance, zero, zero),
            antenna: AntennaModel::isotropic(),
        },
        rx: Terminal {
            position: Vec3::zero(),
            antenna: AntennaModel::isotropic(),
        },
        ris: Surface {
            position: Vec3::zero(),
            normal: Vec3::new(one, zero, zero),
            up: Vec3::new(zero, zero, one),
            geometry,
            phase_states: states,
        },
        direct_path: DirectPath {
            present: false,
            extra_attenuation_db: zero,
        },
        scatterers: Vec::new(),
        noise_sigma_db: zero,
        rng_seed: 0,
        element_exponent: one,
    };
    s.rx.position = s.direction(rx_angle.0, rx_angle.1).scale(rx_distance);
    s.validate()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::steering_vector;
    use rand::Rng;

    const F26: f64 = 2.6e9;

    fn single(d_t: f64, d_r: f64) -> Scenario<f64> {
        let lambda = SPEED_OF_LIGHT / F26;
        let g = RisGeometry::half_wavelength(1, 1, lambda).unwrap();
        let mut s = los_scenario(g, PhaseStateSet::continuous(), F26, d_t, (90f64.to_radians(), 0.0), d_r).unwrap();
        s.element_exponent = 1.0;
        s
    }

    #[test]
    fn unit_distance_gain() {
        let s = single(1.0, 1.0);
        let g = element_cascade_gain(&s, 0, 0).unwrap();
        let lambda = SPEED_OF_LIGHT / F26;
        assert!((g.norm() - lambda / (4.0 * std::f64::consts::PI)).abs() < 1e-15);
        assert!((g.norm() - 9.18e-3).abs() < 1e-5);
        let expect = crate::scalar::wrap_two_pi(-std::f64::consts::TAU * 2.0 / lambda);
        assert!((crate::geometry::phase_of(g) - expect).abs() < 1e-9);
    }

    #[test]
    fn distance_doubling_costs_12_db() {
        let a = element_cascade_gain(&single(1.0, 1.0), 0, 0).unwrap().norm();
        let b = element_cascade_gain(&single(2.0, 2.0), 0, 0).unwrap().norm();
        assert!((20.0 * (a / b).log10() - 12.041199826559248).abs() < 1e-9);
    }

    #[test]
    fn index_out_of_range() {
        assert!(matches!(
            element_cascade_gain(&single(1.0, 1.0), 1, 0),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn behind_surface_is_dark() {
        let mut s = single(1.0, 1.0);
        s.rx.position = Vec3::new(-1.0, 0.0, 0.0);
        assert_eq!(element_cascade_gain(&s, 0, 0).unwrap(), Complex::new(0.0, 0.0));
        assert!(s.validate().is_err());
    }

    #[test]
    fn floor_for_zero_field() {
        let s = single(1.0, 1.0);
        let p = PhaseProfile::uniform(s.ris.geometry, Complex::new(0.0, 0.0)).unwrap();
        assert_eq!(received_power(&s, &p).unwrap(), NO_SIGNAL_DBM);
    }

    #[test]
    fn directional_pattern() {
        let a = AntennaModel::<f64>::directional(14.8, 30.0);
        assert_eq!(a.gain_dbi(0.0), 14.8);
        assert!((a.gain_dbi(15f64.to_radians()) - 11.8).abs() < 1e-12);
        assert!((a.gain_dbi(170f64.to_radians()) - (-5.2)).abs() < 1e-12);
        assert!(AntennaModel::<f64>::directional(1.0, 180.0).validate("tx").is_err());
    }

    #[test]
    fn far_field_optimum_matches_broadside_steering() {
        let g = RisGeometry::half_wavelength(4, 4, SPEED_OF_LIGHT / 5.8e9).unwrap();
        let s = los_scenario(g, PhaseStateSet::continuous(), 5.8e9, 1e6, (90f64.to_radians(), 0.0), 1e6).unwrap();
        let opt = optimal_phase_profile(&s).unwrap();
        let r0 = opt.coefficients()[0];
        let sv = steering_vector(&g, 90f64.to_radians(), 0.0).unwrap();
        for (c, a) in opt.coefficients().iter().zip(sv.entries()) {
            let rel = (c / r0 * a.conj()).arg();
            assert!(rel.abs() < 1e-6, "{rel}");
        }
    }

    #[test]
    fn oracle_counts_and_is_repeatable() {
        let s = single(1.0, 1.0);
        let mut o = make_oracle(&s).unwrap();
        let p = PhaseProfile::ground(s.ris.geometry, &s.ris.phase_states);
        let a = o.query(&p).unwrap();
        let b = o.query(&p).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(o.query_count(), 2);
        o.reset(9);
        assert_eq!(o.query_count(), 0);
    }

    #[test]
    fn noise_statistics() {
        let mut s = single(1.0, 1.0);
        s.noise_sigma_db = 1.0;
        s.rng_seed = 42;
        let mut o = make_oracle(&s).unwrap();
        let p = PhaseProfile::ground(s.ris.geometry, &s.ris.phase_states);
        let clean = received_power(&s, &p).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|_| o.query(&p).unwrap() - clean).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((var.sqrt() - 1.0).abs() < 0.05, "{}", var.sqrt());
    }

    #[test]
    fn optimum_dominates_random_profiles() {
        let g = RisGeometry::half_wavelength(8, 8, SPEED_OF_LIGHT / 5.8e9).unwrap();
        let s = los_scenario(g, PhaseStateSet::continuous(), 5.8e9, 3.0, (70f64.to_radians(), 0.4), 2.0).unwrap();
        let ch = Channel::new(&s).unwrap();
        let best = ch.power(&optimal_phase_profile(&s).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let one_bit = PhaseStateSet::one_bit();
        for i in 0..2000 {
            let p = if i % 2 == 0 {
                let phases: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
                PhaseProfile::from_phases(g, &phases).unwrap()
            } else {
                let idx: Vec<usize> = (0..64).map(|_| rng.random_range(0..2)).collect();
                PhaseProfile::from_state_indices(g, &one_bit, &idx).unwrap()
            };
            assert!(ch.power(&p).unwrap() <= best);
        }
    }

    #[test]
    fn reciprocity() {
        let g = RisGeometry::half_wavelength(3, 5, SPEED_OF_LIGHT / F26).unwrap();
        let s = los_scenario(g, PhaseStateSet::one_bit(), F26, 2.0, (60f64.to_radians(), 0.3), 1.5).unwrap();
        let mut swapped = s.clone();
        std::mem::swap(&mut swapped.tx.position, &mut swapped.rx.position);
        let p = PhaseProfile::from_state_indices(g, &PhaseStateSet::one_bit(), &[0, 1, 1, 0, 1, 0, 0, 0, 1, 1, 0, 1, 0, 1, 1]).unwrap();
        let a = received_power(&s, &p).unwrap();
        let b = received_power(&swapped, &p).unwrap();
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn scenario_json_round_trip_and_rejects_unknown_keys() {
        let s = single(1.0, 2.0);
        let back = Scenario::<f64>::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        let mut v: serde_json::Value = serde_json::from_str(&s.to_json()).unwrap();
        v["bogus"] = 1.into();
        assert!(Scenario::<f64>::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn angles_round_trip() {
        let s = single(1.0, 1.0);
        let (t, p) = s.angles_of(s.direction(1.1, -0.4).scale(3.0));
        assert!((t - 1.1).abs() < 1e-12 && (p + 0.4).abs() < 1e-12);
    }

    #[test]
    fn single_precision_channel() {
        let lambda = (SPEED_OF_LIGHT / F26) as f32;
        let g = RisGeometry::<f32>::half_wavelength(2, 2, lambda).unwrap();
        let s = los_scenario(g, PhaseStateSet::one_bit(), 2.6e9f32, 2.0, (1.2, 0.2), 2.0).unwrap();
        let opt = optimal_phase_profile(&s).unwrap();
        let flat = PhaseProfile::ground(g, &s.ris.phase_states);
        assert!(received_power(&s, &opt).unwrap() >= received_power(&s, &flat).unwrap());
    }
}
