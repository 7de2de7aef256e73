//! Receiver sweep specifications.
//!
//! | form | points |
//! |------|--------|
//! | `here` | the scenario's own RX position |
//! | `line:ox,oy,oz:dx,dy,dz:start:stop:step` | `o + t·d̂` for `t` in the range |
//! | `polar:d0:d1:step@a1,a2,…` | distances `d0..d1` along each azimuth, angle-major |
//! | `arc:r:a0:a1:step` | radius `r` at azimuths `a0..a1` |
//! | `grid:x0,y0,z:NXxNY:cell` | cell centres, numbered `j·NX + i + 1` |
//!
//! Azimuths are degrees from the surface normal in the surface's horizontal
//! plane, measured about the surface centre. Ranges include both ends.

use std::fmt;

use super::HarnessError;
use crate::channel::Scenario;
use crate::scalar::RisFloat;
use crate::vec3::Vec3;

#[derive(Debug, Clone, PartialEq)]
pub enum SweepSpec {
    Here,
    Line {
        origin: [f64; 3],
        direction: [f64; 3],
        range: (f64, f64, f64),
    },
    Polar {
        range: (f64, f64, f64),
        angles_deg: Vec<f64>,
    },
    Arc {
        radius: f64,
        range: (f64, f64, f64),
    },
    Grid {
        corner: [f64; 3],
        nx: usize,
        ny: usize,
        cell: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint<T: Copy> {
    /// 1-based point number.
    pub index: usize,
    pub position: Vec3<T>,
    /// Sweep parameter: `t`, distance, azimuth or point number.
    pub param: T,
}

fn cfg(msg: impl Into<String>) -> HarnessError {
    HarnessError::Config(format!("sweep: {}", msg.into()))
}

fn num(s: &str) -> Result<f64, HarnessError> {
    s.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| cfg(format!("'{s}' is not a finite number")))
}

fn triple(s: &str) -> Result<[f64; 3], HarnessError> {
    let v: Vec<f64> = s.split(',').map(num).collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| cfg(format!("'{s}' must have three comma-separated values")))
}

/// Values `start, start+step, …` up to `stop` inclusive.
pub fn steps((start, stop, step): (f64, f64, f64)) -> Result<Vec<f64>, HarnessError> {
    if !(step > 0.0) || stop < start {
        return Err(cfg(format!("range {start}:{stop}:{step} needs step > 0 and stop >= start")));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

fn range(parts: &[&str]) -> Result<(f64, f64, f64), HarnessError> {
    match parts {
        [a, b, c] => {
            let r = (num(a)?, num(b)?, num(c)?);
            steps(r)?;
            Ok(r)
        }
        _ => Err(cfg("range must be start:stop:step")),
    }
}

impl SweepSpec {
    pub fn parse(s: &str) -> Result<Self, HarnessError> {
        let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
        match kind {
            "here" if rest.is_empty() => Ok(Self::Here),
            "line" => {
                let p: Vec<&str> = rest.split(':').collect();
                if p.len() != 5 {
                    return Err(cfg("line needs ox,oy,oz:dx,dy,dz:start:stop:step"));
                }
                let direction = triple(p[1])?;
                if direction.iter().map(|v| v * v).sum::<f64>() == 0.0 {
                    return Err(cfg("line direction must be non-zero"));
                }
                Ok(Self::Line {
                    origin: triple(p[0])?,
                    direction,
                    range: range(&p[2..])?,
                })
            }
            "polar" => {
                let (r, a) = rest.split_once('@').ok_or_else(|| cfg("polar needs d0:d1:step@angles"))?;
                let p: Vec<&str> = r.split(':').collect();
                let angles_deg: Vec<f64> = a.split(',').map(num).collect::<Result<_, _>>()?;
                let range = range(&p)?;
                if range.0 <= 0.0 {
                    return Err(cfg("polar distances must be positive"));
                }
                Ok(Self::Polar { range, angles_deg })
            }
            "arc" => {
                let p: Vec<&str> = rest.split(':').collect();
                if p.len() != 4 {
                    return Err(cfg("arc needs r:a0:a1:step"));
                }
                let radius = num(p[0])?;
                if radius <= 0.0 {
                    return Err(cfg("arc radius must be positive"));
                }
                Ok(Self::Arc {
                    radius,
                    range: range(&p[1..])?,
                })
            }
            "grid" => {
                let p: Vec<&str> = rest.split(':').collect();
                if p.len() != 3 {
                    return Err(cfg("grid needs x0,y0,z:NXxNY:cell"));
                }
                let (nx, ny) = p[1].split_once('x').ok_or_else(|| cfg("grid size must be NXxNY"))?;
                let parse_n = |v: &str| {
                    v.parse::<usize>()
                        .ok()
                        .filter(|&n| n > 0)
                        .ok_or_else(|| cfg(format!("'{v}' is not a positive count")))
                };
                let cell = num(p[2])?;
                if cell <= 0.0 {
                    return Err(cfg("grid cell must be positive"));
                }
                Ok(Self::Grid {
                    corner: triple(p[0])?,
                    nx: parse_n(nx)?,
                    ny: parse_n(ny)?,
                    cell,
                })
            }
            _ => Err(cfg(format!("unknown sweep '{s}'"))),
        }
    }

    /// RX positions for `scenario`, each checked to lie in front of the surface.
    pub fn points<T: RisFloat>(&self, scenario: &Scenario<T>) -> Result<Vec<SweepPoint<T>>, HarnessError> {
        let v = |a: [f64; 3]| Vec3::new(T::of(a[0]), T::of(a[1]), T::of(a[2]));
        let on_plane = |az: f64, d: f64| {
            scenario.ris.position + scenario.direction(T::FRAC_PI_2(), T::of(az).rad()).scale(T::of(d))
        };
        let mut raw: Vec<(Vec3<T>, f64)> = Vec::new();
        match self {
            Self::Here => raw.push((scenario.rx.position, 1.0)),
            Self::Line {
                origin,
                direction,
                range,
            } => {
                let d = v(*direction).normalized();
                for t in steps(*range)? {
                    raw.push((v(*origin) + d.scale(T::of(t)), t));
                }
            }
            Self::Polar { range, angles_deg } => {
                for &a in angles_deg {
                    for d in steps(*range)? {
                        raw.push((on_plane(a, d), d));
                    }
                }
            }
            Self::Arc { radius, range } => {
                for a in steps(*range)? {
                    raw.push((on_plane(a, *radius), a));
                }
            }
            Self::Grid { corner, nx, ny, cell } => {
                for j in 0..*ny {
                    for i in 0..*nx {
                        let x = corner[0] + (i as f64 + 0.5) * cell;
                        let y = corner[1] + (j as f64 + 0.5) * cell;
                        raw.push((v([x, y, corner[2]]), (j * nx + i + 1) as f64));
                    }
                }
            }
        }
        raw.into_iter()
            .enumerate()
            .map(|(i, (position, param))| {
                let moved = scenario.with_rx_position(position);
                moved
                    .validate()
                    .map_err(|e| cfg(format!("point {} of '{self}': {e}", i + 1)))?;
                Ok(SweepPoint {
                    index: i + 1,
                    position,
                    param: T::of(param),
                })
            })
            .collect()
    }
}

impl fmt::Display for SweepSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = |(a, b, c): (f64, f64, f64)| format!("{a}:{b}:{c}");
        let t = |p: [f64; 3]| format!("{},{},{}", p[0], p[1], p[2]);
        match self {
            Self::Here => write!(f, "here"),
            Self::Line {
                origin,
                direction,
                range,
            } => write!(f, "line:{}:{}:{}", t(*origin), t(*direction), r(*range)),
            Self::Polar { range, angles_deg } => {
                let a: Vec<String> = angles_deg.iter().map(|x| x.to_string()).collect();
                write!(f, "polar:{}@{}", r(*range), a.join(","))
            }
            Self::Arc { radius, range } => write!(f, "arc:{radius}:{}", r(*range)),
            Self::Grid { corner, nx, ny, cell } => write!(f, "grid:{}:{nx}x{ny}:{cell}", t(*corner)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{los_scenario, SPEED_OF_LIGHT};
    use crate::geometry::{PhaseStateSet, RisGeometry};

    fn scenario() -> Scenario<f64> {
        let g = RisGeometry::half_wavelength(4, 4, SPEED_OF_LIGHT / 5.8e9).unwrap();
        los_scenario(g, PhaseStateSet::one_bit(), 5.8e9, 5.0, (1.5, 0.2), 3.0).unwrap()
    }

    #[test]
    fn counts() {
        let s = scenario();
        let n = |spec: &str| SweepSpec::parse(spec).unwrap().points(&s).unwrap().len();
        assert_eq!(n("line:1,0,0:1,1,0:0:20:1"), 21);
        assert_eq!(n("polar:1:5:0.5@30,45,60"), 27);
        assert_eq!(n("grid:0.5,-4,0:4x7:1.2"), 28);
        assert_eq!(n("arc:2:30:60:5"), 7);
        assert_eq!(n("here"), 1);
    }

    #[test]
    fn grid_numbering_and_polar_order() {
        let s = scenario();
        let g = SweepSpec::parse("grid:1,0,0:4x7:1").unwrap().points(&s).unwrap();
        assert_eq!(g[5].param, 6.0);
        assert_eq!(g[5].position, Vec3::new(2.5, 1.5, 0.0));
        let p = SweepSpec::parse("polar:1:2:1@30,45").unwrap().points(&s).unwrap();
        let (_, phi) = s.angles_of(p[2].position);
        assert!((phi.to_degrees() - 45.0).abs() < 1e-9);
        assert_eq!(p[2].param, 1.0);
    }

    #[test]
    fn rejects_bad_specs() {
        for bad in ["", "line:1,2:1,0,0:0:1:1", "polar:1:5:0@30", "grid:0,0,0:4y7:1", "arc:-1:0:10:1", "spiral:1"] {
            assert!(SweepSpec::parse(bad).is_err(), "{bad}");
        }
        let s = scenario();
        assert!(SweepSpec::parse("line:-1,0,0:0,1,0:0:1:1").unwrap().points(&s).is_err());
    }

    #[test]
    fn display_round_trips() {
        for spec in ["line:1,0,0:1,1,0:0:20:1", "polar:1:5:0.5@30,45,60", "grid:0.5,-4,0:4x7:1.2", "arc:2:30:60:5", "here"] {
            assert_eq!(SweepSpec::parse(spec).unwrap().to_string(), spec);
        }
    }
}
