//! Path gains, reflector/scatterer environments and scenario construction.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{
    los_path_geometry, nlos_path_geometry, steering_vector, wrap_angle, AnglePair, ArrayGeometry, Orientation,
    PathGeometry, Vec3,
};
use crate::signal::{Beamformer, PulseSpec, Sector};
use crate::{Error, Result, C64};

/// Angular tolerance (rad) below which two paths count as identical.
pub const DUPLICATE_ANGLE_TOL: f64 = 1e-9;
/// Delay tolerance (s) below which two paths count as identical.
pub const DUPLICATE_DELAY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PathKind {
    Los,
    Reflector,
    Scatterer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum LinkDirection {
    Uplink,
    #[default]
    Downlink,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Path {
    pub kind: PathKind,
    pub cluster: Option<Vec3>,
    pub beta: C64,
    pub geometry: PathGeometry,
}

/// Which propagation mechanisms are present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ScenarioKind {
    #[default]
    Los,
    LosReflectors,
    LosScatterers,
    LosClusters,
    Nlos,
}

impl ScenarioKind {
    pub fn has_los(self) -> bool {
        !matches!(self, ScenarioKind::Nlos)
    }

    pub fn uses_reflectors(self) -> bool {
        matches!(
            self,
            ScenarioKind::LosReflectors | ScenarioKind::LosClusters | ScenarioKind::Nlos
        )
    }

    pub fn uses_scatterers(self) -> bool {
        matches!(
            self,
            ScenarioKind::LosScatterers | ScenarioKind::LosClusters | ScenarioKind::Nlos
        )
    }

    pub fn label(self) -> &'static str {
        match self {
            ScenarioKind::Los => "los",
            ScenarioKind::LosReflectors => "los+r",
            ScenarioKind::LosScatterers => "los+s",
            ScenarioKind::LosClusters => "los+c",
            ScenarioKind::Nlos => "nlos",
        }
    }
}

impl std::str::FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "los" => Ok(ScenarioKind::Los),
            "los+r" => Ok(ScenarioKind::LosReflectors),
            "los+s" => Ok(ScenarioKind::LosScatterers),
            "los+c" => Ok(ScenarioKind::LosClusters),
            "nlos" => Ok(ScenarioKind::Nlos),
            other => Err(Error::invalid(format!("unknown scenario kind '{other}'"))),
        }
    }
}

/// Infinite plane through `point` with unit `normal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Plane {
    pub point: Vec3,
    pub normal: Vec3,
}

impl Plane {
    pub fn new(point: Vec3, normal: Vec3) -> Result<Self> {
        let n = normal.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::invalid("plane normal must be non-zero"));
        }
        Ok(Self {
            point,
            normal: normal / n,
        })
    }

    pub fn signed_distance(&self, x: &Vec3) -> f64 {
        (x - self.point).dot(&self.normal)
    }

    /// Mirror image of `x` across the plane.
    pub fn mirror(&self, x: &Vec3) -> Vec3 {
        x - 2.0 * self.signed_distance(x) * self.normal
    }
}

/// Specular bounce BS (origin) -> plane -> UE by the image method.
///
/// Returns the reflection point `q`, `d1 = |q|` and `d2 = |p - q|`.
pub fn reflect(p: &Vec3, plane: &Plane) -> Result<(Vec3, f64, f64)> {
    let origin = Vec3::zeros();
    let s_bs = plane.signed_distance(&origin);
    let s_ue = plane.signed_distance(p);
    if !(s_bs * s_ue > 0.0) {
        return Err(Error::NoReflection(
            "BS and UE are not strictly on the same side".into(),
        ));
    }
    let image = plane.mirror(&origin);
    // segment p -> image crosses the plane where the signed distance vanishes
    let s_img = plane.signed_distance(&image);
    let t = s_ue / (s_ue - s_img);
    let q = p + (image - p) * t;
    Ok((q, q.norm(), (p - q).norm()))
}

/// Finite vertical reflector: a rectangle of the plane, `half_width` either
/// side of `plane.point` horizontally and `z_min..=z_max` vertically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reflector {
    pub plane: Plane,
    pub half_width: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Reflector {
    /// Panel facing the BS at ground azimuth `azimuth`, its center `distance`
    /// away from the BS axis.
    pub fn facing_bs(azimuth: f64, distance: f64, half_width: f64, z_min: f64, z_max: f64) -> Result<Self> {
        let out = Vec3::new(azimuth.cos(), azimuth.sin(), 0.0);
        let plane = Plane::new(out * distance, -out)?;
        Ok(Self {
            plane,
            half_width,
            z_min,
            z_max,
        })
    }

    /// Reflection through the panel; fails when the specular point misses it.
    pub fn reflect(&self, p: &Vec3) -> Result<(Vec3, f64, f64)> {
        let (q, d1, d2) = reflect(p, &self.plane)?;
        let offset = q - self.plane.point;
        let horizontal = Vec3::new(offset.x, offset.y, 0.0).norm();
        if horizontal > self.half_width || q.z < self.z_min || q.z > self.z_max {
            return Err(Error::NoReflection("specular point outside the panel".into()));
        }
        Ok((q, d1, d2))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvironmentConfig {
    pub reflectors: Vec<Reflector>,
    pub scatterers: Vec<Vec3>,
    /// Radar cross section, m².
    pub sigma_rcs: f64,
    pub gamma_r: f64,
    /// Minimum cluster power relative to the LOS power.
    pub power_threshold: f64,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        Self {
            reflectors: Vec::new(),
            scatterers: Vec::new(),
            sigma_rcs: 50.0,
            gamma_r: 0.7,
            power_threshold: 0.1,
        }
    }
}

/// Layout parameters for [`EnvironmentConfig::generate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvironmentLayout {
    pub n_reflectors: usize,
    /// Distance of the reflector panels beyond the sector radius.
    pub reflector_offset: f64,
    /// Panel height above the BS (panels start at ground level).
    pub reflector_top: f64,
    pub n_scatterers: usize,
}

impl Default for EnvironmentLayout {
    fn default() -> Self {
        Self {
            n_reflectors: 5,
            reflector_offset: 2.0,
            reflector_top: 10.0,
            n_scatterers: 15,
        }
    }
}

impl EnvironmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_r > 0.0 && self.gamma_r <= 1.0) {
            return Err(Error::invalid(format!(
                "reflection coefficient {} not in (0, 1]",
                self.gamma_r
            )));
        }
        if !(self.power_threshold > 0.0 && self.power_threshold <= 1.0) {
            return Err(Error::invalid(format!(
                "power threshold {} not in (0, 1]",
                self.power_threshold
            )));
        }
        if !(self.sigma_rcs > 0.0) || !self.sigma_rcs.is_finite() {
            return Err(Error::invalid("radar cross section must be positive"));
        }
        Ok(())
    }

    /// Reflector panels equally spread along the sector edge, tiling it as a
    /// polygon, plus scatterers drawn uniformly (by area) over the sector
    /// footprint and uniformly in height between the ground and the BS.
    pub fn generate(sector: &Sector, layout: &EnvironmentLayout, seed: u64) -> Result<Self> {
        sector.validate()?;
        let mut env = Self::default();
        let n = layout.n_reflectors;
        if n > 0 {
            let slot = sector.span / n as f64;
            let distance = sector.radius + layout.reflector_offset;
            let half_width = distance * (slot / 2.0).tan();
            let az0 = sector.center_azimuth - sector.span / 2.0;
            for k in 0..n {
                let az = az0 + (k as f64 + 0.5) * slot;
                env.reflectors.push(Reflector::facing_bs(
                    az,
                    distance,
                    half_width,
                    -sector.height,
                    layout.reflector_top,
                )?);
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let az0 = sector.center_azimuth - sector.span / 2.0;
        for _ in 0..layout.n_scatterers {
            let r = sector.radius * rng.random::<f64>().sqrt();
            let az = az0 + sector.span * rng.random::<f64>();
            let z = -sector.height * rng.random::<f64>();
            env.scatterers.push(Vec3::new(r * az.cos(), r * az.sin(), z));
        }
        Ok(env)
    }

    /// Copy restricted to the mechanisms of `kind`.
    pub fn for_kind(&self, kind: ScenarioKind) -> Self {
        let mut out = self.clone();
        if !kind.uses_reflectors() {
            out.reflectors.clear();
        }
        if !kind.uses_scatterers() {
            out.scatterers.clear();
        }
        out
    }
}

/// Complex gain of one path. `d2` is ignored for LOS and required otherwise.
pub fn path_gain(kind: PathKind, lambda: f64, d1: f64, d2: Option<f64>, env: &EnvironmentConfig) -> Result<C64> {
    let positive = |d: f64| d > 0.0 && d.is_finite();
    if !positive(d1) || !positive(lambda) {
        return Err(Error::invalid("distances and wavelength must be positive"));
    }
    let base = (lambda / (4.0 * PI)).powi(2);
    let (power, length) = match kind {
        PathKind::Los => (base / (d1 * d1), d1),
        PathKind::Reflector | PathKind::Scatterer => {
            let d2 = d2
                .filter(|d| positive(*d))
                .ok_or_else(|| Error::invalid("NLOS path needs d2 > 0"))?;
            let p = if kind == PathKind::Reflector {
                base * env.gamma_r / (d1 + d2).powi(2)
            } else {
                base * env.sigma_rcs / (4.0 * PI * (d1 * d2).powi(2))
            };
            (p, d1 + d2)
        }
    };
    Ok(C64::from_polar(power.sqrt(), 2.0 * PI * length / lambda))
}

/// Energy and noise bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Symbol energy, J.
    pub es: f64,
    /// Noise PSD, W/Hz.
    pub n0: f64,
    pub n_s: usize,
}

impl LinkBudget {
    /// From `E_s/T_s` in dBm, `N0` in dBm/Hz and the symbol duration in seconds.
    pub fn from_dbm(es_over_ts_dbm: f64, n0_dbm_per_hz: f64, n_s: usize, symbol_time: f64) -> Self {
        let dbm = |x: f64| 10f64.powf(x / 10.0) * 1e-3;
        Self {
            es: dbm(es_over_ts_dbm) * symbol_time,
            n0: dbm(n0_dbm_per_hz),
            n_s,
        }
    }

    /// `γ = N_R N_T N_s E_s / N0`.
    pub fn gamma(&self, n_r: usize, n_t: usize) -> f64 {
        (n_r * n_t * self.n_s) as f64 * self.es / self.n0
    }

    pub fn gamma_db(&self, n_r: usize, n_t: usize) -> f64 {
        10.0 * self.gamma(n_r, n_t).log10()
    }
}

/// Everything that does not change from one UE pose to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct System {
    pub bs: ArrayGeometry,
    pub ue: ArrayGeometry,
    pub lambda: f64,
    pub pulse: PulseSpec,
    pub budget: LinkBudget,
    pub direction: LinkDirection,
    /// Beamformer of the transmitting array, in that array's own frame.
    pub beamformer: Beamformer,
}

impl System {
    pub fn tx_array(&self) -> &ArrayGeometry {
        match self.direction {
            LinkDirection::Uplink => &self.ue,
            LinkDirection::Downlink => &self.bs,
        }
    }

    pub fn rx_array(&self) -> &ArrayGeometry {
        match self.direction {
            LinkDirection::Uplink => &self.bs,
            LinkDirection::Downlink => &self.ue,
        }
    }

    pub fn gamma(&self) -> f64 {
        self.budget.gamma(self.rx_array().len(), self.tx_array().len())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub system: Arc<System>,
    pub p: Vec3,
    pub o: Orientation,
    /// LOS first when present.
    pub paths: Vec<Path>,
}

impl Scenario {
    /// Assembles a scenario from explicit paths, checking that they are distinct.
    pub fn new(system: Arc<System>, p: Vec3, o: Orientation, paths: Vec<Path>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::NoPaths);
        }
        if system.beamformer.f.nrows() != system.tx_array().len() {
            return Err(Error::DimensionMismatch(format!(
                "beamformer has {} rows, TX array {} elements",
                system.beamformer.f.nrows(),
                system.tx_array().len()
            )));
        }
        let s = Self { system, p, o, paths };
        s.check_distinct()?;
        Ok(s)
    }

    fn check_distinct(&self) -> Result<()> {
        for i in 0..self.paths.len() {
            for j in i + 1..self.paths.len() {
                let a = &self.paths[i].geometry;
                let b = &self.paths[j].geometry;
                let close = |x: f64, y: f64| wrap_angle(x - y).abs() < DUPLICATE_ANGLE_TOL;
                if close(a.bs.theta, b.bs.theta)
                    && close(a.bs.phi, b.bs.phi)
                    && close(a.ue.theta, b.ue.theta)
                    && close(a.ue.phi, b.ue.phi)
                    && (a.toa - b.toa).abs() < DUPLICATE_DELAY_TOL
                {
                    return Err(Error::DuplicatePaths { first: i, second: j });
                }
            }
        }
        Ok(())
    }

    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn direction(&self) -> LinkDirection {
        self.system.direction
    }

    pub fn lambda(&self) -> f64 {
        self.system.lambda
    }

    pub fn gamma(&self) -> f64 {
        self.system.gamma()
    }

    pub fn has_los(&self) -> bool {
        self.paths.first().is_some_and(|p| p.kind == PathKind::Los)
    }

    pub fn rx_angles(&self, m: usize) -> AnglePair {
        let g = &self.paths[m].geometry;
        match self.system.direction {
            LinkDirection::Uplink => g.bs,
            LinkDirection::Downlink => g.ue,
        }
    }

    pub fn tx_angles(&self, m: usize) -> AnglePair {
        let g = &self.paths[m].geometry;
        match self.system.direction {
            LinkDirection::Uplink => g.ue,
            LinkDirection::Downlink => g.bs,
        }
    }

    pub fn taus(&self) -> Vec<f64> {
        self.paths.iter().map(|p| p.geometry.toa).collect()
    }

    pub fn betas(&self) -> Vec<C64> {
        self.paths.iter().map(|p| p.beta).collect()
    }

    pub fn clusters(&self) -> Vec<Vec3> {
        self.paths.iter().filter_map(|p| p.cluster).collect()
    }

    pub fn is_degenerate(&self) -> bool {
        self.paths.iter().any(|p| p.geometry.is_degenerate())
    }

    /// `‖Fᴴ a_T‖²` for path `m`.
    pub fn beam_gain(&self, m: usize) -> f64 {
        let a: DVector<C64> = steering_vector(self.system.tx_array(), self.tx_angles(m), self.lambda());
        self.system.beamformer.gain(&a)
    }

    /// Copy with every path gain multiplied by `factor`.
    pub fn scaled_gains(&self, factor: f64) -> Self {
        let mut s = self.clone();
        for p in &mut s.paths {
            p.beta *= factor;
        }
        s
    }
}

/// Builds the path list for UE pose `(p, o)` and wraps it into a scenario.
///
/// Clusters are kept when their power reaches `power_threshold` times the LOS
/// power; the LOS power is used as reference even when `los_blocked` is set.
pub fn build_scenario(
    system: Arc<System>,
    env: &EnvironmentConfig,
    p: Vec3,
    o: Orientation,
    los_blocked: bool,
) -> Result<Scenario> {
    env.validate()?;
    let lambda = system.lambda;
    let los_geom = los_path_geometry(&p, o)?;
    let los_beta = path_gain(PathKind::Los, lambda, los_geom.d1, None, env)?;
    let floor = env.power_threshold * los_beta.norm_sqr();
    let mut paths = Vec::new();
    if !los_blocked {
        paths.push(Path {
            kind: PathKind::Los,
            cluster: None,
            beta: los_beta,
            geometry: los_geom,
        });
    }
    for r in &env.reflectors {
        let Ok((q, d1, d2)) = r.reflect(&p) else { continue };
        let beta = path_gain(PathKind::Reflector, lambda, d1, Some(d2), env)?;
        if beta.norm_sqr() >= floor {
            paths.push(Path {
                kind: PathKind::Reflector,
                cluster: Some(q),
                beta,
                geometry: nlos_path_geometry(&p, o, &q)?,
            });
        }
    }
    for q in &env.scatterers {
        let w = p - q;
        if !(q.norm() > 0.0) || !(w.norm() > 0.0) {
            continue;
        }
        let beta = path_gain(PathKind::Scatterer, lambda, q.norm(), Some(w.norm()), env)?;
        if beta.norm_sqr() >= floor {
            paths.push(Path {
                kind: PathKind::Scatterer,
                cluster: Some(*q),
                beta,
                geometry: nlos_path_geometry(&p, o, q)?,
            });
        }
    }
    Scenario::new(system, p, o, paths)
}

/// `10 log10(γ |β_1|² G)` of the LOS path.
pub fn los_snr_db(s: &Scenario) -> Result<f64> {
    if !s.has_los() {
        return Err(Error::LosAbsent);
    }
    Ok(10.0 * (s.gamma() * s.paths[0].beta.norm_sqr() * s.beam_gain(0)).log10())
}
