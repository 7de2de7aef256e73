//! Feedback-driven configuration searches over any [`PowerOracle`].

use std::fmt::Write as _;

use num_complex::Complex;
use thiserror::Error;

use crate::codebook::{build_y_codebook, compose_second_stage, AngleGrid, Codebook, CodewordLabel};
use crate::error::Error;
use crate::geometry::{dispatch_profile, steering_vector_z, PhaseProfile, PhaseStateSet, RisGeometry};
use crate::oracle::{OracleError, PowerOracle};
use crate::scalar::RisFloat;

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry<T> {
    /// Position of the query within the search, from 0.
    pub query_index: u64,
    pub power_dbm: T,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult<T> {
    pub best_profile: PhaseProfile<T>,
    pub best_power_dbm: T,
    /// Trace index of the winning query.
    pub best_index: usize,
    pub query_count: u64,
    pub trace: Vec<TraceEntry<T>>,
    /// `(θ, φ)` of the winning codeword, when the search is angle based.
    pub selected_angles: Option<(T, T)>,
    /// Powers of the configurations accepted by greedy search, in order.
    pub accepted_powers: Vec<T>,
}

/// A search that stopped early; `trace` holds every query answered before the failure.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("search aborted after {} queries: {source}", trace.len())]
pub struct SearchError<T> {
    pub source: OracleError,
    pub trace: Vec<TraceEntry<T>>,
}

impl<T> SearchError<T> {
    fn early(e: Error) -> Self {
        Self {
            source: OracleError::Channel(e),
            trace: Vec::new(),
        }
    }
}

/// Records queries and keeps the running maximum.
struct Tracker<T> {
    trace: Vec<TraceEntry<T>>,
    best: Option<(usize, T, PhaseProfile<T>)>,
}

impl<T: RisFloat> Tracker<T> {
    fn new() -> Self {
        Self {
            trace: Vec::new(),
            best: None,
        }
    }

    fn query<O: PowerOracle<T> + ?Sized>(
        &mut self,
        oracle: &mut O,
        profile: &PhaseProfile<T>,
        label: String,
    ) -> Result<T, SearchError<T>> {
        match oracle.query(profile) {
            Ok(p) => {
                self.trace.push(TraceEntry {
                    query_index: self.trace.len() as u64,
                    power_dbm: p,
                    label,
                });
                Ok(p)
            }
            Err(source) => Err(SearchError {
                source,
                trace: std::mem::take(&mut self.trace),
            }),
        }
    }

    fn fail(&mut self, e: Error) -> SearchError<T> {
        SearchError {
            source: OracleError::Channel(e),
            trace: std::mem::take(&mut self.trace),
        }
    }

    /// Offers the last query as the new best; `ties_win` selects `≥` over `>`.
    fn offer(&mut self, power: T, profile: &PhaseProfile<T>, ties_win: bool) -> bool {
        let idx = self.trace.len() - 1;
        let better = match &self.best {
            None => true,
            Some((_, b, _)) => power > *b || (ties_win && power == *b),
        };
        if better {
            self.best = Some((idx, power, profile.clone()));
        }
        better
    }

    fn finish(self, selected_angles: Option<(T, T)>, accepted_powers: Vec<T>) -> SearchResult<T> {
        let (best_index, best_power_dbm, best_profile) = self.best.expect("at least one query");
        SearchResult {
            best_profile,
            best_power_dbm,
            best_index,
            query_count: self.trace.len() as u64,
            trace: self.trace,
            selected_angles,
            accepted_powers,
        }
    }
}

/// Queries every full-surface codeword once, in order; earlier index wins ties.
pub fn exhaustive_search<T: RisFloat, O: PowerOracle<T> + ?Sized>(
    oracle: &mut O,
    codebook: &Codebook<T>,
    states: &PhaseStateSet<T>,
) -> Result<SearchResult<T>, SearchError<T>> {
    if !codebook.kind().is_full_surface() {
        return Err(SearchError::early(Error::InvalidGrid(format!(
            "{} codebook does not cover the whole surface",
            codebook.kind()
        ))));
    }
    let mut t = Tracker::new();
    let mut winner = None;
    for (i, cw) in codebook.codewords().iter().enumerate() {
        let profile = codebook
            .profile(i)
            .and_then(|p| dispatch_profile(p, states))
            .map_err(|e| t.fail(e))?;
        let p = t.query(oracle, &profile, cw.label.to_string())?;
        if t.offer(p, &profile, false) {
            winner = Some(cw.label);
        }
    }
    Ok(t.finish(winner.and_then(|l: CodewordLabel<T>| l.angles()), Vec::new()))
}

/// Zenith scan with identical columns, then azimuth scan with `F_y ⊗ a_z(θ_sel)`.
///
/// Issues exactly `1 + q + p` queries. Comparisons use `≥`, so later ties win.
/// The returned profile is the best of every configuration queried, including
/// the initial all-state-0 one.
pub fn two_step_search<T: RisFloat, O: PowerOracle<T> + ?Sized>(
    oracle: &mut O,
    geom: &RisGeometry<T>,
    grid: &AngleGrid<T>,
    states: &PhaseStateSet<T>,
) -> Result<SearchResult<T>, SearchError<T>> {
    let mut t = Tracker::new();
    let r0 = PhaseProfile::ground(*geom, states);
    let p0 = t.query(oracle, &r0, "init".into())?;
    t.offer(p0, &r0, true);

    let mut p_m = p0;
    let mut zenith_best: Option<(usize, T)> = None;
    for (i, &theta) in grid.zeniths().iter().enumerate() {
        let profile = steering_vector_z(geom, theta)
            .and_then(|az| {
                let coeffs: Vec<Complex<T>> = az.iter().copied().cycle().take(geom.len()).collect();
                PhaseProfile::new(*geom, coeffs)
            })
            .and_then(|p| dispatch_profile(p, states))
            .map_err(|e| t.fail(e))?;
        let p = t.query(oracle, &profile, CodewordLabel::Zenith { theta }.to_string())?;
        if p >= p_m {
            p_m = p;
        }
        t.offer(p, &profile, true);
        if zenith_best.is_none_or(|(_, b)| p >= b) {
            zenith_best = Some((i, p));
        }
    }
    let q_m = zenith_best.map(|(i, _)| i).unwrap_or(0);
    let theta_sel = grid.zeniths()[q_m];

    let composed = steering_vector_z(geom, theta_sel)
        .and_then(|az| build_y_codebook(geom, theta_sel, grid.azimuths()).and_then(|fy| compose_second_stage(&fy, &az)))
        .map_err(|e| t.fail(e))?;
    let mut azimuth_best: Option<(usize, T)> = None;
    for (j, cw) in composed.codewords().iter().enumerate() {
        let profile = composed
            .profile(j)
            .and_then(|p| dispatch_profile(p, states))
            .map_err(|e| t.fail(e))?;
        let p = t.query(oracle, &profile, cw.label.to_string())?;
        if p >= p_m {
            p_m = p;
        }
        t.offer(p, &profile, true);
        if azimuth_best.is_none_or(|(_, b)| p >= b) {
            azimuth_best = Some((j, p));
        }
    }
    let p_sel = azimuth_best.map(|(j, _)| j).unwrap_or(0);
    let angles = (theta_sel, grid.azimuths()[p_sel]);
    Ok(t.finish(Some(angles), Vec::new()))
}

/// Update granularity of [`greedy_search`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Group {
    Element,
    Column,
}

impl Group {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "element" => Some(Self::Element),
            "column" => Some(Self::Column),
            _ => None,
        }
    }
}

/// Coordinate descent over element or column groups with discrete states.
///
/// Starts from all-state-0 and visits groups in row-major order. Every state of
/// the group is tried; the best one (lower index on ties) is kept if it does not
/// lower the best power so far, otherwise the group reverts. Issues exactly
/// `sweeps · groups · |states|` queries.
pub fn greedy_search<T: RisFloat, O: PowerOracle<T> + ?Sized>(
    oracle: &mut O,
    geom: &RisGeometry<T>,
    states: &PhaseStateSet<T>,
    sweeps: usize,
    group: Group,
) -> Result<SearchResult<T>, SearchError<T>> {
    if !states.is_discrete() {
        return Err(SearchError::early(Error::InvalidStates(
            "greedy search needs a discrete state set".into(),
        )));
    }
    if sweeps == 0 {
        return Err(SearchError::early(Error::InvalidStates("sweeps must be >= 1".into())));
    }
    let coeffs: Vec<Complex<T>> = states.states().iter().map(|s| s.coefficient()).collect();
    let groups: Vec<(String, Vec<usize>)> = match group {
        Group::Element => (0..geom.rows_z)
            .flat_map(|m| (0..geom.cols_y).map(move |n| (m, n)))
            .map(|(m, n)| (format!("e{m}.{n}"), vec![geom.flat_index(m, n)]))
            .collect(),
        Group::Column => (0..geom.cols_y)
            .map(|n| (format!("c{n}"), (0..geom.rows_z).map(|m| geom.flat_index(m, n)).collect()))
            .collect(),
    };

    let mut t = Tracker::new();
    let mut current = vec![0usize; geom.len()];
    let build = |idx: &[usize]| -> PhaseProfile<T> {
        PhaseProfile::new(*geom, idx.iter().map(|&s| coeffs[s]).collect()).expect("state coefficients are passive")
    };
    let mut best_so_far: Option<T> = None;
    let mut accepted = Vec::new();
    for sweep in 0..sweeps {
        for (name, members) in &groups {
            let saved: Vec<usize> = members.iter().map(|&k| current[k]).collect();
            let mut group_best: Option<(usize, T)> = None;
            for s in 0..coeffs.len() {
                for &k in members {
                    current[k] = s;
                }
                let profile = build(&current);
                let p = t.query(oracle, &profile, format!("s{sweep}:{name}={s}"))?;
                if group_best.is_none_or(|(_, b)| p > b) {
                    group_best = Some((s, p));
                }
            }
            let (s, p) = group_best.expect("at least one state");
            if best_so_far.is_none_or(|b| p >= b) {
                for &k in members {
                    current[k] = s;
                }
                best_so_far = Some(p);
                accepted.push(p);
                let profile = build(&current);
                t.best = Some((0, p, profile));
            } else {
                for (&k, &v) in members.iter().zip(&saved) {
                    current[k] = v;
                }
            }
        }
    }
    let best_power = best_so_far.expect("at least one group");
    let best_index = t
        .trace
        .iter()
        .rposition(|e| e.power_dbm == best_power)
        .expect("best power was traced");
    if let Some(b) = t.best.as_mut() {
        b.0 = best_index;
    }
    Ok(t.finish(None, accepted))
}

/// Mean of `repeats` readings in the dB domain; the counter advances by `repeats`.
pub fn averaged_query<T: RisFloat, O: PowerOracle<T> + ?Sized>(
    oracle: &mut O,
    profile: &PhaseProfile<T>,
    repeats: usize,
) -> Result<T, OracleError> {
    if repeats == 0 {
        return Err(OracleError::Channel(Error::InvalidStates("repeats must be >= 1".into())));
    }
    if repeats == 1 {
        return oracle.query(profile);
    }
    let mut sum = T::zero();
    for _ in 0..repeats {
        sum = sum + oracle.query(profile)?;
    }
    Ok(sum / T::of(repeats as f64))
}

/// Oracle adapter answering each query with [`averaged_query`].
#[derive(Debug)]
pub struct AveragingOracle<O> {
    inner: O,
    repeats: usize,
}

impl<O> AveragingOracle<O> {
    pub fn new(inner: O, repeats: usize) -> Self {
        Self {
            inner,
            repeats: repeats.max(1),
        }
    }

    pub fn into_inner(self) -> O {
        self.inner
    }
}

impl<T: RisFloat, O: PowerOracle<T>> PowerOracle<T> for AveragingOracle<O> {
    fn query(&mut self, profile: &PhaseProfile<T>) -> Result<T, OracleError> {
        averaged_query(&mut self.inner, profile, self.repeats)
    }

    /// Counts underlying readings.
    fn query_count(&self) -> u64 {
        self.inner.query_count()
    }
}

/// Trace as CSV: header `query,power_dbm,label`, power with four decimals.
pub fn trace_csv<T: RisFloat>(trace: &[TraceEntry<T>]) -> String {
    let mut s = String::from("query,power_dbm,label\n");
    for e in trace {
        writeln!(s, "{},{:.4},{}", e.query_index, e.power_dbm.as_f64(), e.label).expect("write to string");
    }
    s
}
