//! Pulse spectra, delay-correlation matrices, beamformers and beam grids.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::geometry::{
    direction_angles, rotation_matrix, steering_vector, AnglePair, ArrayGeometry, Orientation, Vec3,
};
use crate::{Error, Result, C64};

/// Tolerance on the unit-energy check of a pulse spectrum.
pub const ENERGY_TOL: f64 = 1e-9;

/// Relative stopping tolerance of the adaptive quadrature.
pub const QUADRATURE_TOL: f64 = 1e-10;

const MAX_ROMBERG_LEVELS: usize = 22;

/// Spectral shape of the transmitted pulse.
#[derive(Debug, Clone, PartialEq)]
pub enum PulseKind {
    /// Flat PSD `1/W` on `[-W/2, W/2]`.
    IdealSinc,
    /// Piecewise-linear PSD through `(f, |P(f)|^2)` samples sorted by frequency.
    SampledPsd(Vec<(f64, f64)>),
}

/// How the nominal bandwidth maps onto the spectrum used for delay information.
///
/// `Nominal` uses the PSD as given, so a flat pulse has `W_eff^2 = W^2/12`.
/// `Paper` stretches the spectrum to `[-W, W]` (half the density), which gives
/// `W_eff^2 = W^2/3` for the flat pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeffConvention {
    #[default]
    Nominal,
    Paper,
}

impl WeffConvention {
    fn stretch(self) -> f64 {
        match self {
            WeffConvention::Nominal => 1.0,
            WeffConvention::Paper => 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSpec {
    pub kind: PulseKind,
    /// Bandwidth `W` in Hz.
    pub bandwidth: f64,
    pub convention: WeffConvention,
}

impl PulseSpec {
    pub fn ideal_sinc(bandwidth: f64) -> Self {
        Self {
            kind: PulseKind::IdealSinc,
            bandwidth,
            convention: WeffConvention::Nominal,
        }
    }

    pub fn sampled(bandwidth: f64, samples: Vec<(f64, f64)>) -> Result<Self> {
        let p = Self {
            kind: PulseKind::SampledPsd(samples),
            bandwidth,
            convention: WeffConvention::Nominal,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_convention(mut self, convention: WeffConvention) -> Self {
        self.convention = convention;
        self
    }

    /// Checks bandwidth, sample ordering/support and unit energy.
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0) || !self.bandwidth.is_finite() {
            return Err(Error::InvalidPulse("bandwidth must be positive".into()));
        }
        if let PulseKind::SampledPsd(s) = &self.kind {
            if s.len() < 2 {
                return Err(Error::InvalidPulse("need at least two PSD samples".into()));
            }
            let half = self.bandwidth / 2.0;
            for w in s.windows(2) {
                if !(w[1].0 > w[0].0) {
                    return Err(Error::InvalidPulse("PSD frequencies must increase strictly".into()));
                }
            }
            for &(f, v) in s {
                if !f.is_finite() || !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidPulse(format!("bad PSD sample ({f}, {v})")));
                }
                if f.abs() > half * (1.0 + 1e-12) {
                    return Err(Error::InvalidPulse(format!("sample at {f} Hz outside [-W/2, W/2]")));
                }
            }
            let energy: f64 = s.windows(2).map(|w| 0.5 * (w[0].1 + w[1].1) * (w[1].0 - w[0].0)).sum();
            if (energy - 1.0).abs() > ENERGY_TOL {
                return Err(Error::InvalidPulse(format!("PSD energy {energy} is not 1")));
            }
        }
        Ok(())
    }

    /// PSD samples actually used for integration, after applying the convention.
    fn effective_samples(&self) -> Option<Vec<(f64, f64)>> {
        match &self.kind {
            PulseKind::IdealSinc => None,
            PulseKind::SampledPsd(s) => {
                let k = self.convention.stretch();
                Some(s.iter().map(|&(f, v)| (f * k, v / k)).collect())
            }
        }
    }

    /// Width of the flat spectrum used by the closed forms.
    fn flat_width(&self) -> f64 {
        self.bandwidth * self.convention.stretch()
    }
}

/// RMS bandwidth `sqrt(∫ f^2 |P(f)|^2 df)` under the pulse's convention.
pub fn effective_bandwidth(pulse: &PulseSpec) -> Result<f64> {
    pulse.validate()?;
    match pulse.effective_samples() {
        None => Ok(pulse.flat_width() / 12f64.sqrt()),
        Some(s) => Ok(psd_moment(&s, 2, 0.0).re.max(0.0).sqrt() / (2.0 * std::f64::consts::PI)),
    }
}

/// Effective bandwidth under both conventions: `(nominal, paper)`.
pub fn effective_bandwidths(pulse: &PulseSpec) -> Result<(f64, f64)> {
    let nominal = effective_bandwidth(&pulse.clone().with_convention(WeffConvention::Nominal))?;
    let paper = effective_bandwidth(&pulse.clone().with_convention(WeffConvention::Paper))?;
    Ok((nominal, paper))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalCorrelations {
    pub r0: DMatrix<C64>,
    pub r1: DMatrix<C64>,
    pub r2: DMatrix<C64>,
}

impl SignalCorrelations {
    pub fn get(&self, order: usize) -> &DMatrix<C64> {
        match order {
            0 => &self.r0,
            1 => &self.r1,
            _ => &self.r2,
        }
    }
}

/// `R_i[u, v] = ∫ (2πf)^i |P(f)|^2 exp(-j2πf(τ_v - τ_u)) df` for `i = 0, 1, 2`.
pub fn correlation_matrices(pulse: &PulseSpec, taus: &[f64]) -> Result<SignalCorrelations> {
    pulse.validate()?;
    let m = taus.len();
    if m == 0 {
        return Err(Error::invalid("need at least one delay"));
    }
    let mut r0 = DMatrix::zeros(m, m);
    let mut r1 = DMatrix::zeros(m, m);
    let mut r2 = DMatrix::zeros(m, m);
    let samples = pulse.effective_samples();
    for u in 0..m {
        for v in u..m {
            let dt = if u == v { 0.0 } else { taus[v] - taus[u] };
            let [a, b, c] = match &samples {
                None => flat_correlations(pulse.flat_width(), dt),
                Some(s) => [psd_moment(s, 0, dt), psd_moment(s, 1, dt), psd_moment(s, 2, dt)],
            };
            r0[(u, v)] = a;
            r1[(u, v)] = b;
            r2[(u, v)] = c;
            if u != v {
                r0[(v, u)] = a.conj();
                r1[(v, u)] = b.conj();
                r2[(v, u)] = c.conj();
            }
        }
    }
    if samples.is_some() {
        // drop quadrature residue from the real diagonals
        for k in 0..m {
            r0[(k, k)].im = 0.0;
            r2[(k, k)].im = 0.0;
        }
    }
    Ok(SignalCorrelations { r0, r1, r2 })
}

/// Closed-form correlations of a flat PSD of total width `b`.
pub fn flat_correlations(b: f64, dt: f64) -> [C64; 3] {
    let s = PI * b;
    let x = s * dt;
    let (r0, g, h) = if x.abs() < 0.1 {
        let x2 = x * x;
        let r0 = 1.0 - x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0 * (1.0 - x2 / 72.0)));
        let g = x * (-1.0 / 3.0 + x2 * (1.0 / 30.0 + x2 * (-1.0 / 840.0 + x2 / 45360.0)));
        let h = 1.0 / 3.0 + x2 * (-1.0 / 10.0 + x2 * (1.0 / 168.0 + x2 * (-1.0 / 6480.0 + x2 / 443520.0)));
        (r0, g, h)
    } else {
        let (sx, cx) = x.sin_cos();
        let r0 = sx / x;
        let g = (x * cx - sx) / (x * x);
        let h = sx / x + 2.0 * cx / (x * x) - 2.0 * sx / (x * x * x);
        (r0, g, h)
    };
    [C64::new(r0, 0.0), C64::new(0.0, s * g), C64::new(s * s * h, 0.0)]
}

/// `∫ (2πf)^order psd(f) exp(-j2πf dt) df` over a piecewise-linear PSD,
/// integrating each segment by Romberg-accelerated trapezoid refinement.
fn psd_moment(samples: &[(f64, f64)], order: i32, dt: f64) -> C64 {
    let mut total = C64::new(0.0, 0.0);
    for w in samples.windows(2) {
        let (f0, p0) = w[0];
        let (f1, p1) = w[1];
        let lerp = |f: f64| p0 + (p1 - p0) * (f - f0) / (f1 - f0);
        let mass = |f: f64| (2.0 * PI * f).abs().powi(order) * lerp(f);
        // convergence is judged against the integral of |integrand| so that
        // near-cancelling oscillatory segments still terminate
        let scale = 0.5 * (mass(f0) + mass(f1)) * (f1 - f0) + mass(0.5 * (f0 + f1)) * (f1 - f0);
        total += romberg(
            |f| {
                let w = 2.0 * PI * f;
                C64::from_polar(w.powi(order) * lerp(f), -w * dt)
            },
            f0,
            f1,
            scale,
        );
    }
    total
}

fn romberg(f: impl Fn(f64) -> C64, a: f64, b: f64, scale: f64) -> C64 {
    let h0 = b - a;
    let mut prev_row = vec![(f(a) + f(b)) * (0.5 * h0)];
    let mut n = 1usize;
    let mut trap = prev_row[0];
    for level in 1..MAX_ROMBERG_LEVELS {
        let h = h0 / (2 * n) as f64;
        let mut mid = C64::new(0.0, 0.0);
        for k in 0..n {
            mid += f(a + (2 * k + 1) as f64 * h);
        }
        trap = trap * 0.5 + mid * h;
        n *= 2;
        let mut row = Vec::with_capacity(level + 1);
        row.push(trap);
        let mut factor = 1.0;
        for j in 1..=level {
            factor *= 4.0;
            let r = row[j - 1] + (row[j - 1] - prev_row[j - 1]) / (factor - 1.0);
            row.push(r);
        }
        let best = row[level];
        let last = prev_row[level - 1];
        let size = best.norm().max(scale).max(f64::MIN_POSITIVE);
        if level >= 4 && (best - last).norm() <= QUADRATURE_TOL * size {
            return best;
        }
        prev_row = row;
    }
    prev_row[prev_row.len() - 1]
}

/// Transmit beamformer: one scaled steering vector per beam direction.
#[derive(Debug, Clone, PartialEq)]
pub struct Beamformer {
    /// `N_T x N_B` matrix.
    pub f: DMatrix<C64>,
    pub directions: Vec<AnglePair>,
}

impl Beamformer {
    pub fn n_beams(&self) -> usize {
        self.f.ncols()
    }

    /// `‖Fᴴ a‖²`, the beamforming gain towards a steering vector `a`.
    pub fn gain(&self, a: &DVector<C64>) -> f64 {
        self.f.ad_mul(a).norm_squared()
    }
}

/// Column `l` is `a_T(direction_l) / sqrt(N_B)`, so `tr(FᴴF) = 1`.
pub fn beamformer(geom: &ArrayGeometry, directions: &[AnglePair], lambda: f64) -> Result<Beamformer> {
    if directions.is_empty() {
        return Err(Error::invalid("beamformer needs at least one beam"));
    }
    let nb = directions.len();
    let scale = C64::new(1.0 / (nb as f64).sqrt(), 0.0);
    let cols: Vec<DVector<C64>> = directions
        .iter()
        .map(|d| steering_vector(geom, *d, lambda) * scale)
        .collect();
    Ok(Beamformer {
        f: DMatrix::from_columns(&cols),
        directions: directions.to_vec(),
    })
}

/// Circular sector served by the BS; the ground lies at `z = -height`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sector {
    pub radius: f64,
    pub height: f64,
    /// Angular span in radians.
    pub span: f64,
    /// Azimuth of the sector bisector. The default `π/2` faces the broadside
    /// of an xz-plane array.
    pub center_azimuth: f64,
    /// Smallest ground range covered by the beam grid.
    pub min_range: f64,
}

impl Default for Sector {
    fn default() -> Self {
        Self {
            radius: 50.0,
            height: 10.0,
            span: 120f64.to_radians(),
            center_azimuth: PI / 2.0,
            min_range: 1.0,
        }
    }
}

impl Sector {
    pub fn validate(&self) -> Result<()> {
        let ok = self.radius > 0.0
            && self.height > 0.0
            && self.span > 0.0
            && self.span <= 2.0 * PI
            && self.min_range >= 0.0
            && self.min_range < self.radius
            && self.center_azimuth.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("bad sector {self:?}")))
        }
    }

    /// Ground point at range `r` and azimuth `az`.
    pub fn ground_point(&self, r: f64, az: f64) -> Vec3 {
        Vec3::new(r * az.cos(), r * az.sin(), -self.height)
    }

    pub fn contains_azimuth(&self, az: f64) -> bool {
        crate::geometry::wrap_angle(az - self.center_azimuth).abs() <= self.span / 2.0 + 1e-12
    }
}

/// `(rows, cols)` of the near-square grid used for `n` beams.
pub fn grid_shape(n: usize) -> (usize, usize) {
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    (rows, cols)
}

/// Ground points of the beam grid: cell centers of a uniform
/// radius x azimuth partition of the sector, filled row by row (rows are
/// radial rings, columns are azimuth slots).
pub fn beam_ground_points(sector: &Sector, n_b: usize) -> Result<Vec<Vec3>> {
    sector.validate()?;
    if n_b == 0 {
        return Err(Error::invalid("need at least one beam"));
    }
    let (rows, cols) = grid_shape(n_b);
    let dr = (sector.radius - sector.min_range) / rows as f64;
    let daz = sector.span / cols as f64;
    let az0 = sector.center_azimuth - sector.span / 2.0;
    let mut pts = Vec::with_capacity(n_b);
    'outer: for i in 0..rows {
        for j in 0..cols {
            if pts.len() == n_b {
                break 'outer;
            }
            let r = sector.min_range + (i as f64 + 0.5) * dr;
            let az = az0 + (j as f64 + 0.5) * daz;
            pts.push(sector.ground_point(r, az));
        }
    }
    Ok(pts)
}

/// Downlink beam directions from the BS towards the ground grid.
pub fn downlink_beam_grid(sector: &Sector, n_b: usize) -> Result<Vec<AnglePair>> {
    Ok(beam_ground_points(sector, n_b)?
        .iter()
        .map(|g| direction_angles(g).0)
        .collect())
}

/// Uplink beam directions in the UE frame.
///
/// The grid is the downlink grid seen from below: local direction `-g` for each
/// ground point `g`, i.e. a virtual sector in the horizontal plane through the
/// BS. The grid is attached to the UE, so in global coordinates it turns with
/// the orientation (see [`uplink_beam_vectors_global`]) while these local
/// angles do not depend on `o`.
pub fn uplink_beam_grid(sector: &Sector, n_b: usize) -> Result<Vec<AnglePair>> {
    Ok(uplink_local_vectors(sector, n_b)?
        .iter()
        .map(|v| direction_angles(v).0)
        .collect())
}

fn uplink_local_vectors(sector: &Sector, n_b: usize) -> Result<Vec<Vec3>> {
    Ok(beam_ground_points(sector, n_b)?.into_iter().map(|g| -g).collect())
}

/// Global unit vectors of the uplink beams for UE orientation `o`.
pub fn uplink_beam_vectors_global(o: Orientation, sector: &Sector, n_b: usize) -> Result<Vec<Vec3>> {
    let r = rotation_matrix(o);
    Ok(uplink_local_vectors(sector, n_b)?
        .iter()
        .map(|v| r * v.normalize())
        .collect())
}
