//! Per-location evaluation over the sector grid.

use std::sync::Arc;

use mmwave_peb::bounds::{exact_and_approx_bounds, BoundFlag, BoundsResult};
use mmwave_peb::channel::{build_scenario, path_gain, EnvironmentConfig, LinkBudget, PathKind, System};
use mmwave_peb::geometry::{los_path_geometry, make_square_ura, steering_vector, Orientation, Vec3};
use mmwave_peb::signal::{beamformer, downlink_beam_grid, uplink_beam_grid, Sector};
use mmwave_peb::Error;
use rayon::prelude::*;

use crate::config::{ConfigError, Direction, SweepConfig};

/// Why a record carries no finite bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RecordFlag {
    Ok,
    Singular,
    Degenerate,
    NoPaths,
    Invalid,
}

impl RecordFlag {
    pub fn label(self) -> &'static str {
        match self {
            RecordFlag::Ok => "ok",
            RecordFlag::Singular => "singular",
            RecordFlag::Degenerate => "degenerate",
            RecordFlag::NoPaths => "no_paths",
            RecordFlag::Invalid => "invalid",
        }
    }
}

impl From<BoundFlag> for RecordFlag {
    fn from(f: BoundFlag) -> Self {
        match f {
            BoundFlag::Ok => RecordFlag::Ok,
            BoundFlag::Singular => RecordFlag::Singular,
            BoundFlag::Degenerate => RecordFlag::Degenerate,
        }
    }
}

/// Bounds at one UE position; angles in degrees, distances in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record {
    pub position: Vec3,
    pub n_paths: usize,
    /// LOS SNR, also reported when the LOS is blocked.
    pub snr_db: f64,
    pub peb: f64,
    pub oeb_deg: f64,
    pub peb_approx: f64,
    pub oeb_approx_deg: f64,
    pub flag: RecordFlag,
}

impl Record {
    pub fn is_finite(&self) -> bool {
        self.flag == RecordFlag::Ok
    }
}

/// Array sizes and beam count that an axis sweep may override.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArraySizes {
    pub n_bs: usize,
    pub n_ue: usize,
    pub n_beams: usize,
}

impl ArraySizes {
    pub fn from_config(cfg: &SweepConfig) -> Self {
        Self {
            n_bs: cfg.system.n_bs,
            n_ue: cfg.system.n_ue,
            n_beams: cfg.system.n_beams,
        }
    }
}

/// Arrays, pulse, budget and beamformer for one link direction.
pub fn build_system(cfg: &SweepConfig, direction: Direction, sizes: ArraySizes) -> Result<Arc<System>, ConfigError> {
    let wrap = |key: &str, e: Error| ConfigError::Invalid {
        key: key.to_string(),
        message: e.to_string(),
    };
    let s = &cfg.system;
    let lambda = s.wavelength();
    let d = s.spacing_wavelengths * lambda;
    let bs = make_square_ura(sizes.n_bs, d).map_err(|e| wrap("system.n_bs", e))?;
    let ue = make_square_ura(sizes.n_ue, d).map_err(|e| wrap("system.n_ue", e))?;
    let sector: Sector = cfg.sector.sector();
    let (tx, dirs) = match direction {
        Direction::Downlink => (&bs, downlink_beam_grid(&sector, sizes.n_beams)),
        Direction::Uplink => (&ue, uplink_beam_grid(&sector, sizes.n_beams)),
    };
    let dirs = dirs.map_err(|e| wrap("system.n_beams", e))?;
    let f = beamformer(tx, &dirs, lambda).map_err(|e| wrap("system.n_beams", e))?;
    Ok(Arc::new(System {
        bs,
        ue,
        lambda,
        pulse: s.pulse()?,
        budget: LinkBudget::from_dbm(s.es_ts_dbm, s.n0_dbm_hz, s.pilots, 1.0 / s.bandwidth_hz),
        direction: direction.link(),
        beamformer: f,
    }))
}

/// UE positions in evaluation order: radial index outer, azimuth inner.
pub fn grid_points(cfg: &SweepConfig) -> Vec<Vec3> {
    if let Some(p) = &cfg.grid.points {
        return p.iter().map(|x| Vec3::new(x[0], x[1], x[2])).collect();
    }
    let s = cfg.sector.sector();
    let nr = cfg.grid.radial_steps;
    let na = cfg.grid.azimuth_steps;
    let lin = |lo: f64, hi: f64, n: usize, i: usize| {
        if n == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    };
    let az_lo = s.center_azimuth - s.span / 2.0;
    let az_hi = s.center_azimuth + s.span / 2.0;
    let mut out = Vec::with_capacity(nr * na);
    for i in 0..nr {
        let r = lin(s.min_range, s.radius, nr, i);
        for j in 0..na {
            out.push(s.ground_point(r, lin(az_lo, az_hi, na, j)));
        }
    }
    out
}

/// `10 log10(γ |β_LOS|² ‖Fᴴ a_T‖²)`, computed whether or not the LOS is blocked.
pub fn los_reference_snr_db(system: &System, env: &EnvironmentConfig, p: &Vec3, o: Orientation) -> f64 {
    let Ok(g) = los_path_geometry(p, o) else {
        return f64::NAN;
    };
    let Ok(beta) = path_gain(PathKind::Los, system.lambda, g.d1, None, env) else {
        return f64::NAN;
    };
    let tx = match system.direction {
        mmwave_peb::channel::LinkDirection::Uplink => g.ue,
        mmwave_peb::channel::LinkDirection::Downlink => g.bs,
    };
    let a = steering_vector(system.tx_array(), tx, system.lambda);
    10.0 * (system.gamma() * beta.norm_sqr() * system.beamformer.gain(&a)).log10()
}

fn flagged(position: Vec3, n_paths: usize, snr_db: f64, flag: RecordFlag) -> Record {
    Record {
        position,
        n_paths,
        snr_db,
        peb: f64::INFINITY,
        oeb_deg: f64::INFINITY,
        peb_approx: f64::INFINITY,
        oeb_approx_deg: f64::INFINITY,
        flag,
    }
}

/// Exact and approximate bounds at one position. Never fails: problems end up
/// in the record flag.
pub fn evaluate_point(
    system: &Arc<System>,
    env: &EnvironmentConfig,
    los_blocked: bool,
    p: Vec3,
    o: Orientation,
) -> Record {
    let snr = los_reference_snr_db(system, env, &p, o);
    let scenario = match build_scenario(system.clone(), env, p, o, los_blocked) {
        Ok(s) => s,
        Err(Error::NoPaths) => return flagged(p, 0, snr, RecordFlag::NoPaths),
        Err(Error::DegenerateGeometry(_)) => return flagged(p, 0, snr, RecordFlag::Degenerate),
        Err(_) => return flagged(p, 0, snr, RecordFlag::Invalid),
    };
    let m = scenario.n_paths();
    let (exact, approx): (BoundsResult, BoundsResult) = match exact_and_approx_bounds(&scenario) {
        Ok(r) => r,
        Err(_) => return flagged(p, m, snr, RecordFlag::Invalid),
    };
    if !exact.is_finite() {
        return flagged(p, m, snr, exact.flag.into());
    }
    if !approx.is_finite() {
        return flagged(p, m, snr, approx.flag.into());
    }
    Record {
        position: p,
        n_paths: m,
        snr_db: snr,
        peb: exact.peb,
        oeb_deg: exact.oeb.to_degrees(),
        peb_approx: approx.peb,
        oeb_approx_deg: approx.oeb.to_degrees(),
        flag: RecordFlag::Ok,
    }
}

/// Grid sweep with explicit overrides; results are in grid order.
pub fn grid_sweep_with(
    cfg: &SweepConfig,
    direction: Direction,
    sizes: ArraySizes,
    o: Orientation,
) -> Result<Vec<Record>, ConfigError> {
    let system = build_system(cfg, direction, sizes)?;
    let env = cfg.environment_config(cfg.seed)?;
    let los_blocked = !cfg.scenario_kind()?.has_los();
    let points = grid_points(cfg);
    Ok(points
        .into_par_iter()
        .map(|p| evaluate_point(&system, &env, los_blocked, p, o))
        .collect())
}

/// Grid sweep for the configured direction, arrays and orientation.
pub fn grid_sweep(cfg: &SweepConfig) -> Result<Vec<Record>, ConfigError> {
    grid_sweep_with(
        cfg,
        cfg.direction,
        ArraySizes::from_config(cfg),
        cfg.orientation.orientation(),
    )
}

/// Counts of records by outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SweepSummary {
    pub total: usize,
    pub finite: usize,
    pub flagged: usize,
}

pub fn summarize(records: &[Record]) -> SweepSummary {
    let finite = records.iter().filter(|r| r.is_finite()).count();
    SweepSummary {
        total: records.len(),
        finite,
        flagged: records.len() - finite,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn grid_size_and_order() {
        let c = parse_config("[grid]\nradial_steps = 3\nazimuth_steps = 4\n").unwrap();
        let p = grid_points(&c);
        assert_eq!(p.len(), 12);
        assert!((p[0].xy().norm() - 1.0).abs() < 1e-12);
        assert!((p[11].xy().norm() - 50.0).abs() < 1e-12);
        assert!(p.iter().all(|x| x.z == -10.0));
        // first azimuth at the sector edge, 30 degrees
        assert!((p[0].y.atan2(p[0].x).to_degrees() - 30.0).abs() < 1e-9);
    }

    #[test]
    fn single_point_los_record() {
        let c = parse_config("[grid]\npoints = [[10.0, 20.0, -10.0]]\n[system]\nn_bs = 16\nn_ue = 16\n").unwrap();
        let r = grid_sweep(&c).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].flag, RecordFlag::Ok);
        assert!(r[0].peb.is_finite() && r[0].oeb_deg.is_finite());
        assert_eq!(r[0].n_paths, 1);
        // one path: approximation and exact coincide
        assert!((r[0].peb - r[0].peb_approx).abs() <= 1e-9 * r[0].peb);
    }

    #[test]
    fn bs_azimuth_equal_to_phi0_is_singular() {
        // the orientation is not identifiable from the LOS angles there
        let c = parse_config("[grid]\npoints = [[10.0, 0.0, -10.0]]\n[system]\nn_bs = 16\nn_ue = 16\n").unwrap();
        assert_eq!(grid_sweep(&c).unwrap()[0].flag, RecordFlag::Singular);
    }

    #[test]
    fn point_under_the_bs_is_flagged() {
        let c = parse_config("[grid]\npoints = [[0.0, 0.0, -10.0]]\n[system]\nn_bs = 16\nn_ue = 16\n").unwrap();
        let r = grid_sweep(&c).unwrap();
        assert_ne!(r[0].flag, RecordFlag::Ok);
        assert!(r[0].peb.is_infinite() && r[0].peb_approx.is_infinite());
    }

    #[test]
    fn nlos_without_clusters_is_flagged() {
        let c = parse_config(
            "scenario = \"nlos\"\n[environment]\nn_reflectors = 0\nn_scatterers = 0\n[grid]\npoints = [[10.0, 20.0, -10.0]]\n[system]\nn_bs = 16\nn_ue = 16\n",
        )
        .unwrap();
        let r = grid_sweep(&c).unwrap();
        assert_eq!(r[0].flag, RecordFlag::NoPaths);
        assert!(r[0].snr_db.is_finite());
    }

    #[test]
    fn totals_add_up() {
        let c =
            parse_config("[grid]\nradial_steps = 4\nazimuth_steps = 5\n[system]\nn_bs = 16\nn_ue = 16\nn_beams = 9\n")
                .unwrap();
        let r = grid_sweep(&c).unwrap();
        let s = summarize(&r);
        assert_eq!(s.total, 20);
        assert_eq!(s.finite + s.flagged, s.total);
        for x in &r {
            assert_eq!(x.peb.is_finite(), x.peb_approx.is_finite());
        }
    }
}
