//! Numbered acceptance checks, each reduced to one metric and a verdict.

use std::f64::consts::PI;
use std::fmt;

use mmwave_peb::bounds::{
    channel_parameter_vector, exact_bounds, los_closed_form, los_closed_form_2d, scaling_fit, transformation_for,
};
use mmwave_peb::channel::{build_scenario, EnvironmentConfig, LinkBudget, LinkDirection, Scenario};
use mmwave_peb::fim::{
    exact_channel_fim, factor_scan, geometric_efim, scenario_weff, single_path_crlbs, single_path_crlbs_2d,
    single_path_scalars,
};
use mmwave_peb::geometry::{AnglePair, Orientation, Vec3};
use mmwave_peb::signal::{
    correlation_matrices, downlink_beam_grid, effective_bandwidth, flat_correlations, PulseSpec, WeffConvention,
};
use mmwave_peb::{C64, SPEED_OF_LIGHT};
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cdf::{cdf, Field};
use crate::config::{Direction, SweepConfig};
use crate::oracle::{
    quadrature_correlation, quadrature_fim, random_scenario, relative_error, scaled_relative_error, seeded_rng,
    OracleOptions,
};
use crate::sweep::{build_system, grid_sweep_with, ArraySizes, Record};

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{verdict}] {:>2} {}: {}", self.id, self.name, self.detail)
    }
}

fn check(id: u8, name: &'static str, passed: bool, detail: String) -> Check {
    Check {
        id,
        name,
        passed,
        detail,
    }
}

fn random_pose(rng: &mut ChaCha8Rng) -> (Vec3, Orientation) {
    let r = rng.random_range(5.0..50.0);
    let az = rng.random_range(30f64..150.0).to_radians();
    let p = Vec3::new(r * az.cos(), r * az.sin(), -10.0);
    let o = Orientation::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5));
    (p, o)
}

fn direction_of(k: usize) -> Direction {
    if k.is_multiple_of(2) {
        Direction::Downlink
    } else {
        Direction::Uplink
    }
}

fn los_scenario(cfg: &SweepConfig, direction: Direction, p: Vec3, o: Orientation) -> Option<Scenario> {
    let sys = build_system(cfg, direction, ArraySizes::from_config(cfg)).ok()?;
    build_scenario(sys, &EnvironmentConfig::default(), p, o, false).ok()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

/// 1: analytic FIM against the quadrature oracle on random scenarios.
pub fn oracle_fim(n: usize, seed: u64) -> Check {
    const TOL: f64 = 1e-6;
    let scenarios: Vec<Scenario> = {
        let mut rng = seeded_rng(seed);
        (0..n)
            .map(|k| {
                let dir = direction_of(k).link();
                let pulse = PulseSpec::ideal_sinc(125e6).with_convention(if rng.random_bool(0.5) {
                    WeffConvention::Paper
                } else {
                    WeffConvention::Nominal
                });
                random_scenario(&mut rng, dir, pulse)
            })
            .collect()
    };
    let errs: Vec<(f64, f64)> = scenarios
        .par_iter()
        .map(|s| {
            let a = exact_channel_fim(s).expect("analytic FIM").matrix;
            let q = quadrature_fim(s, OracleOptions::default()).expect("sinc pulse");
            (scaled_relative_error(&a, &q), relative_error(&a, &q))
        })
        .collect();
    let worst = errs.iter().map(|e| e.0).fold(0.0, f64::max);
    let worst_raw = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    check(
        1,
        "FIM vs quadrature oracle",
        worst <= TOL,
        format!("{n} scenarios, max scaled rel. Frobenius {worst:.2e} (raw {worst_raw:.2e}), tol {TOL:e}"),
    )
}

/// 2: single-path closed-form CRLBs against numeric inversion of the EFIM.
pub fn single_path_closed_forms(cfg: &SweepConfig, n: usize, seed: u64) -> Check {
    const TOL: f64 = 1e-9;
    let mut rng = seeded_rng(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    let mut k = 0;
    while done < n {
        let (p, o) = random_pose(&mut rng);
        let dir = direction_of(k);
        k += 1;
        let Some(s) = los_scenario(cfg, dir, p, o) else {
            continue;
        };
        let Ok(sc) = single_path_scalars(&s, 0) else { continue };
        let g = s.gamma() * s.paths[0].beta.norm_sqr();
        let Ok(c) = single_path_crlbs(&sc, g, scenario_weff(&s).expect("pulse")) else {
            continue;
        };
        let efim = geometric_efim(&exact_channel_fim(&s).expect("FIM")).expect("EFIM");
        let Some(inv) = efim.try_inverse() else { continue };
        // [θR, θT, φR, φT, τ]
        for (v, i) in [(c.theta_r, 0), (c.theta_t, 1), (c.phi_r, 2), (c.phi_t, 3), (c.tau, 4)] {
            worst = worst.max(rel(v, inv[(i, i)]));
        }
        for (v, i, j) in [(c.cov_r, 0, 2), (c.cov_t, 1, 3)] {
            worst = worst.max((v - inv[(i, j)]).abs() / (inv[(i, i)] * inv[(j, j)]).sqrt());
        }
        done += 1;
    }
    check(
        2,
        "single-path closed-form CRLBs",
        worst <= TOL,
        format!("{n} poses, max rel. error {worst:.2e}, tol {TOL:e}"),
    )
}

fn fd_transformation(p: &Vec3, o: Orientation, clusters: &[Option<Vec3>], dir: LinkDirection) -> DMatrix<f64> {
    let n_rows = 5 + 3 * clusters.iter().flatten().count();
    let n_cols = 5 * clusters.len();
    let mut out = DMatrix::zeros(n_rows, n_cols);
    let eval = |row: usize, step: f64| {
        let mut p2 = *p;
        let mut o2 = o;
        let mut cl = clusters.to_vec();
        match row {
            0 => o2.theta0 += step,
            1 => o2.phi0 += step,
            2..=4 => p2[row - 2] += step,
            _ => {
                let target = (row - 5) / 3;
                let idx = cl
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| c.is_some())
                    .nth(target)
                    .map(|(i, _)| i)
                    .expect("cluster row");
                let mut q = cl[idx].expect("cluster");
                q[(row - 5) % 3] += step;
                cl[idx] = Some(q);
            }
        }
        channel_parameter_vector(&p2, o2, &cl, dir).expect("forward map")
    };
    for row in 0..n_rows {
        let h = if row < 2 { 1e-4 } else { 1e-3 };
        let f = [eval(row, -2.0 * h), eval(row, -h), eval(row, h), eval(row, 2.0 * h)];
        for c in 0..n_cols {
            let delay = c >= 4 * clusters.len();
            let d = |a: f64, b: f64| {
                if delay {
                    a - b
                } else {
                    mmwave_peb::geometry::wrap_angle(a - b)
                }
            };
            out[(row, c)] = (8.0 * d(f[2][c], f[1][c]) - d(f[3][c], f[0][c])) / (12.0 * h);
        }
    }
    out
}

/// 3: analytic `Υ` against finite differences of the forward map.
pub fn jacobian(n: usize, seed: u64) -> Check {
    const TOL: f64 = 1e-5;
    let mut rng = seeded_rng(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    while done < n {
        let (p, o) = random_pose(&mut rng);
        let q = Vec3::new(
            rng.random_range(-50.0..50.0),
            rng.random_range(0.0..50.0),
            rng.random_range(-9.0..5.0),
        );
        if (q - p).norm() < 2.0 || q.xy().norm() < 2.0 {
            continue;
        }
        let clusters = [None, Some(q)];
        for dir in [LinkDirection::Uplink, LinkDirection::Downlink] {
            let an = transformation_for(&p, o, &clusters, dir).expect("Υ").matrix;
            let fd = fd_transformation(&p, o, &clusters, dir);
            for c in 0..an.ncols() {
                let scale = an.column(c).amax().max(fd.column(c).amax());
                if scale > 0.0 {
                    worst = worst.max((an.column(c) - fd.column(c)).amax() / scale);
                }
            }
        }
        done += 1;
    }
    check(
        3,
        "transformation Jacobian vs finite differences",
        worst <= TOL,
        format!("{n} (p, o, q) triples, UL and DL, max column-rel. error {worst:.2e}, tol {TOL:e}"),
    )
}

/// 4: closed-form LOS SPEB/SOEB against the general pipeline, plus the planar reduction.
pub fn los_identity(cfg: &SweepConfig, n: usize, seed: u64) -> Check {
    const TOL: f64 = 1e-9;
    let mut rng = seeded_rng(seed);
    let mut worst: f64 = 0.0;
    let mut done = 0;
    let mut k = 0;
    while done < n {
        let (p, o) = random_pose(&mut rng);
        let dir = direction_of(k);
        k += 1;
        let Some(s) = los_scenario(cfg, dir, p, o) else {
            continue;
        };
        let (Ok(pipe), Ok(cf)) = (exact_bounds(&s), los_closed_form(&s)) else {
            continue;
        };
        if !pipe.is_finite() {
            continue;
        }
        worst = worst.max(rel(pipe.speb, cf.speb)).max(rel(pipe.soeb, cf.soeb));
        done += 1;
    }
    let mut planar: f64 = 0.0;
    let mut done = 0;
    while done < n {
        let r = rng.random_range(5.0..50.0);
        let az = rng.random_range(30f64..150.0).to_radians();
        let p = Vec3::new(r * az.cos(), r * az.sin(), 0.0);
        let o = Orientation::new(0.0, rng.random_range(-0.5..0.5));
        let dir = direction_of(done);
        let Some(s) = los_scenario(cfg, dir, p, o) else {
            continue;
        };
        let Some(e) = planar_pipeline(&s) else { continue };
        let Ok(cf) = los_closed_form_2d(&s) else { continue };
        planar = planar.max(rel(e.0, cf.speb)).max(rel(e.1, cf.soeb));
        done += 1;
    }
    check(
        4,
        "closed-form LOS SPEB/SOEB vs pipeline",
        worst <= TOL && planar <= TOL,
        format!("{n} poses max rel. {worst:.2e}; {n} planar poses max rel. {planar:.2e}; tol {TOL:e}"),
    )
}

/// `(SPEB, SOEB)` of a planar LOS pose from the azimuth and delay CRLBs pushed
/// through the planar Jacobian of `(φ0, p_x, p_y)`.
fn planar_pipeline(s: &Scenario) -> Option<(f64, f64)> {
    let sc = single_path_scalars(s, 0).ok()?;
    let k = s.gamma() * s.paths[0].beta.norm_sqr();
    let (phi_r, phi_t) = single_path_crlbs_2d(&sc, k).ok()?;
    let w = scenario_weff(s).ok()?;
    let tau = 1.0 / (4.0 * PI * PI * w * w * k * sc.g);
    let (phi_bs, phi_ue) = match s.direction() {
        LinkDirection::Uplink => (phi_r, phi_t),
        LinkDirection::Downlink => (phi_t, phi_r),
    };
    let p = s.p;
    let rho2 = p.x * p.x + p.y * p.y;
    let rho = rho2.sqrt();
    // columns (φ_BS, φ_UE, τ); φ_UE = φ_BS + π - φ0
    let ups = DMatrix::from_row_slice(
        3,
        3,
        &[
            0.0,
            -1.0,
            0.0,
            -p.y / rho2,
            -p.y / rho2,
            p.x / (rho * SPEED_OF_LIGHT),
            p.x / rho2,
            p.x / rho2,
            p.y / (rho * SPEED_OF_LIGHT),
        ],
    );
    let jch = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        1.0 / phi_bs,
        1.0 / phi_ue,
        1.0 / tau,
    ]));
    let inv = (&ups * jch * ups.transpose()).try_inverse()?;
    Some((inv[(1, 1)] + inv[(2, 2)], inv[(0, 0)]))
}

fn finite_values(records: &[Record], field: Field) -> Vec<f64> {
    records.iter().filter(|r| r.is_finite()).map(|r| field.of(r)).collect()
}

fn sweep(cfg: &SweepConfig, direction: Direction, o: Orientation) -> Vec<Record> {
    grid_sweep_with(cfg, direction, ArraySizes::from_config(cfg), o).expect("valid configuration")
}

/// 5: downlink LOS sector statistics.
pub fn paper_sweep(cfg: &SweepConfig) -> Check {
    let mut c = cfg.clone();
    c.scenario = "los".into();
    let r = sweep(&c, Direction::Downlink, c.orientation.orientation());
    let peb90 = cdf(&r, Field::Peb)
        .and_then(|s| s.quantile(0.9))
        .unwrap_or(f64::INFINITY);
    let max_peb = finite_values(&r, Field::Peb).into_iter().fold(0.0, f64::max);
    let max_oeb = finite_values(&r, Field::Oeb).into_iter().fold(0.0, f64::max);
    let flagged = r.iter().filter(|x| !x.is_finite()).count();
    let ok = (peb90 - 0.23).abs() <= 0.03 && max_peb <= 0.45 && max_oeb <= 1.1;
    check(
        5,
        "downlink LOS sector sweep",
        ok,
        format!(
            "PEB90 {peb90:.3} m (want 0.23 ± 0.03), max PEB {max_peb:.3} m (≤ 0.45), max OEB {max_oeb:.2} deg (≤ 1.1), {flagged}/{} flagged",
            r.len()
        ),
    )
}

pub const SCALING_SIZES: [usize; 5] = [16, 36, 64, 144, 256];

/// 6: log-log slopes against the number of receive elements.
pub fn scaling(cfg: &SweepConfig) -> Check {
    let mut c = cfg.clone();
    c.scenario = "los".into();
    // fixed-pose CRLB slopes, downlink so that N_R is the UE array
    let p = Vec3::new(10.0, 20.0, -10.0);
    let o = c.orientation.orientation();
    let mut theta_r = Vec::new();
    let mut theta_t = Vec::new();
    for n in SCALING_SIZES {
        let sizes = ArraySizes {
            n_ue: n,
            ..ArraySizes::from_config(&c)
        };
        let sys = build_system(&c, Direction::Downlink, sizes).expect("system");
        let s = build_scenario(sys, &EnvironmentConfig::default(), p, o, false).expect("scenario");
        let sc = single_path_scalars(&s, 0).expect("scalars");
        let g = s.gamma() * s.paths[0].beta.norm_sqr();
        let cr = single_path_crlbs(&sc, g, scenario_weff(&s).expect("pulse")).expect("CRLBs");
        theta_r.push((n as f64, cr.theta_r));
        theta_t.push((n as f64, cr.theta_t));
    }
    let s_r = scaling_fit(&theta_r).unwrap_or(f64::NAN);
    let s_t = scaling_fit(&theta_t).unwrap_or(f64::NAN);

    let jobs: Vec<(usize, Direction)> = SCALING_SIZES
        .iter()
        .flat_map(|n| [(*n, Direction::Uplink), (*n, Direction::Downlink)])
        .collect();
    let speb: Vec<f64> = jobs
        .iter()
        .map(|(n, d)| {
            let mut sizes = ArraySizes::from_config(&c);
            match d {
                Direction::Downlink => sizes.n_ue = *n,
                Direction::Uplink => sizes.n_bs = *n,
            }
            let r = grid_sweep_with(&c, *d, sizes, o).expect("sweep");
            cdf(&r, Field::Peb)
                .and_then(|s| s.quantile(0.9))
                .map(|x| x * x)
                .unwrap_or(f64::NAN)
        })
        .collect();
    let pts = |k: usize| -> Vec<(f64, f64)> {
        SCALING_SIZES
            .iter()
            .enumerate()
            .map(|(i, n)| (*n as f64, speb[2 * i + k]))
            .collect()
    };
    let ul = scaling_fit(&pts(0)).unwrap_or(f64::NAN);
    let dl = scaling_fit(&pts(1)).unwrap_or(f64::NAN);
    let ok = (s_r + 2.0).abs() <= 0.1 && (s_t + 1.0).abs() <= 0.1 && (dl + 1.0).abs() <= 0.15 && ul <= dl - 0.3;
    check(
        6,
        "scaling with receive elements",
        ok,
        format!(
            "CRLB(θR) {s_r:.3} (−2 ± 0.1), CRLB(θT) {s_t:.3} (−1 ± 0.1), DL SPEB90 {dl:.3} (−1 ± 0.15), UL SPEB90 {ul:.3} (≤ DL − 0.3)"
        ),
    )
}

/// Direction from the BS to the middle of the sector floor.
pub fn sector_center_direction(cfg: &SweepConfig) -> AnglePair {
    let s = cfg.sector.sector();
    let mid = s.ground_point(0.5 * (s.min_range + s.radius), s.center_azimuth);
    let (a, _) = mmwave_peb::geometry::direction_angles(&mid);
    a
}

/// 7: RX and TX factor magnitudes at 10° separation.
pub fn factors(cfg: &SweepConfig) -> Check {
    let base = sector_center_direction(cfg);
    let lambda = cfg.system.wavelength();
    let beams = downlink_beam_grid(&cfg.sector.sector(), cfg.system.n_beams).expect("beam grid");
    let sep = 10f64.to_radians();
    let d = cfg.system.spacing_wavelengths;
    let rx = factor_scan(base, sep, &[100], d, lambda, &beams).expect("scan")[0].rx_db;
    let tx = factor_scan(base, sep, &[16], d, lambda, &beams).expect("scan")[0].tx_db;
    check(
        7,
        "RX/TX factor diagnostics",
        rx < -20.0 && tx < -20.0,
        format!(
            "base ({:.1}, {:.1}) deg: RX factor at N_R = 100 {rx:.1} dB, TX factor at N_T = 16 with {} beams {tx:.1} dB (both < −20 dB)",
            base.theta.to_degrees(),
            base.phi.to_degrees(),
            beams.len()
        ),
    )
}

/// Relative slack of the `approx ≤ exact` comparison, for single-path points
/// where the two are equal up to rounding.
pub const APPROX_SLACK: f64 = 1e-9;

/// 8: approximate against exact PEB in the cluster scenario.
pub fn approximation(cfg: &SweepConfig) -> Check {
    let mut c = cfg.clone();
    c.scenario = "los+c".into();
    let r = sweep(&c, c.direction, c.orientation.orientation());
    let ok_pts: Vec<&Record> = r.iter().filter(|x| x.is_finite()).collect();
    let below = ok_pts
        .iter()
        .filter(|x| x.peb_approx <= x.peb * (1.0 + APPROX_SLACK))
        .count();
    let share = below as f64 / ok_pts.len().max(1) as f64;
    let q = |f: Field, l: f64| cdf(&r, f).and_then(|s| s.quantile(l)).unwrap_or(f64::NAN);
    let d50 = rel(q(Field::PebApprox, 0.5), q(Field::Peb, 0.5));
    let d90 = rel(q(Field::PebApprox, 0.9), q(Field::Peb, 0.9));
    let max_m = r.iter().map(|x| x.n_paths).max().unwrap_or(0);
    check(
        8,
        "approximate vs exact PEB",
        share >= 0.95 && d50 <= 0.1 && d90 <= 0.1,
        format!(
            "approx ≤ exact at {:.1}% of {} points (≥ 95%), quantile gaps 50%: {:.2}%, 90%: {:.2}% (≤ 10%), max M {max_m}",
            100.0 * share,
            ok_pts.len(),
            100.0 * d50,
            100.0 * d90
        ),
    )
}

/// 9: orientation dependence of the two link directions.
pub fn orientation(cfg: &SweepConfig) -> Check {
    let mut c = cfg.clone();
    c.scenario = "los".into();
    let zero = Orientation::default();
    let tilted = Orientation::from_degrees(10.0, 10.0);
    let dl0 = sweep(&c, Direction::Downlink, zero);
    let dl1 = sweep(&c, Direction::Downlink, tilted);
    let same = |f: fn(&Record) -> f64| {
        dl0.iter()
            .zip(&dl1)
            .filter(|(a, b)| f(a).to_bits() == f(b).to_bits())
            .count()
    };
    let peb_same = same(|r| r.peb);
    let oeb_same = same(|r| r.oeb_deg);
    let worst = |f: fn(&Record) -> f64| {
        dl0.iter()
            .zip(&dl1)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(a, b)| rel(f(a), f(b)))
            .fold(0.0, f64::max)
    };
    let q90 = |r: &[Record], f: Field| cdf(r, f).and_then(|s| s.quantile(0.9)).unwrap_or(f64::NAN);
    let q = |r: &[Record]| q90(r, Field::Peb);
    let ul0 = q(&sweep(&c, Direction::Uplink, zero));
    let ul1 = q(&sweep(&c, Direction::Uplink, tilted));
    let n = dl0.len();
    check(
        9,
        "orientation dependence",
        peb_same == n && oeb_same == n && ul1 > ul0,
        format!(
            "DL bitwise equal PEB {peb_same}/{n}, OEB {oeb_same}/{n} (max rel. change PEB {:.1e}, OEB {:.1e}; OEB90 {:.3} -> {:.3} deg); UL PEB90 {ul0:.3} -> {ul1:.3} m",
            worst(|r| r.peb),
            worst(|r| r.oeb_deg),
            q90(&dl0, Field::Oeb),
            q90(&dl1, Field::Oeb)
        ),
    )
}

/// 10: correlation diagonals and the sinc closed form against quadrature.
pub fn correlations(n_pairs: usize, seed: u64) -> Check {
    const DIAG_TOL: f64 = 1e-9;
    const QUAD_TOL: f64 = 1e-8;
    let mut rng = seeded_rng(seed);
    let mut diag: f64 = 0.0;
    let mut quad: f64 = 0.0;
    for conv in [WeffConvention::Nominal, WeffConvention::Paper] {
        let pulse = PulseSpec::ideal_sinc(125e6).with_convention(conv);
        let w = effective_bandwidth(&pulse).expect("pulse");
        let taus: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..200e-9)).collect();
        let r = correlation_matrices(&pulse, &taus).expect("correlations");
        let r2 = 4.0 * PI * PI * w * w;
        for k in 0..taus.len() {
            diag = diag
                .max((r.r0[(k, k)] - C64::new(1.0, 0.0)).norm())
                .max(r.r1[(k, k)].norm() / r2.sqrt())
                .max((r.r2[(k, k)] - C64::new(r2, 0.0)).norm() / r2);
        }
        let b = match conv {
            WeffConvention::Nominal => 125e6,
            WeffConvention::Paper => 250e6,
        };
        let pairs: Vec<f64> = (0..n_pairs / 2)
            .map(|_| rng.random_range(0.0..200e-9) - rng.random_range(0.0..200e-9))
            .collect();
        let worst = pairs
            .par_iter()
            .map(|dt| {
                let closed = flat_correlations(b, *dt);
                let mut e: f64 = 0.0;
                for order in 0..3 {
                    let q = quadrature_correlation(b, order, *dt, 60_000);
                    let scale = (PI * b).powi(order);
                    e = e.max((closed[order as usize] - q).norm() / scale);
                }
                e
            })
            .reduce(|| 0.0, f64::max);
        quad = quad.max(worst);
    }
    check(
        10,
        "signal correlation contracts",
        diag <= DIAG_TOL && quad <= QUAD_TOL,
        format!("diagonal error {diag:.1e} (tol {DIAG_TOL:e}), closed form vs quadrature {quad:.1e} over {n_pairs} delay pairs (tol {QUAD_TOL:e})"),
    )
}

/// 11: aggregate SNR constant.
pub fn snr_constant(cfg: &SweepConfig) -> Check {
    let s = &cfg.system;
    let b = LinkBudget::from_dbm(s.es_ts_dbm, s.n0_dbm_hz, s.pilots, 1.0 / s.bandwidth_hz);
    let g = b.gamma_db(s.n_bs, s.n_ue);
    check(
        11,
        "SNR constant",
        (g - 144.24).abs() <= 0.5,
        format!("10 log10(N_R N_T N_s E_s/N0) = {g:.2} dB (144.24 ± 0.5)"),
    )
}

/// Every check, in order.
pub fn run_all(cfg: &SweepConfig) -> Vec<Check> {
    let seed = cfg.seed;
    vec![
        oracle_fim(50, seed),
        single_path_closed_forms(cfg, 100, seed),
        jacobian(100, seed),
        los_identity(cfg, 100, seed),
        paper_sweep(cfg),
        scaling(cfg),
        factors(cfg),
        approximation(cfg),
        orientation(cfg),
        correlations(1000, seed),
        snr_constant(cfg),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_line() {
        let c = check(3, "x", false, "d".into());
        assert_eq!(c.to_string(), "[FAIL]  3 x: d");
    }

    #[test]
    fn sector_center_points_down_the_boresight_plane() {
        let a = sector_center_direction(&SweepConfig::default());
        assert!((a.phi - PI / 2.0).abs() < 1e-12);
        assert!(a.theta > PI / 2.0);
    }
}
