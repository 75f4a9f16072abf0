//! From channel information to position and orientation bounds.
//!
//! Location parameters are ordered `[θ0, φ0, p_x, p_y, p_z, q_(1), q_(2), ...]`
//! where one cluster position follows for every non-LOS path, in path order.

use nalgebra::{DMatrix, Matrix3, Vector3};

use crate::channel::{LinkDirection, Scenario};
use crate::fim::{
    approx_from_exact, exact_channel_fim, geometric_efim, scenario_weff, single_path_crlbs, single_path_crlbs_2d,
    single_path_scalars, PathFim,
};
use crate::geometry::{rotation_dphi0, rotation_dtheta0, rotation_matrix, to_ue_frame, Orientation, Vec3};
use crate::linalg::{scaled_condition, schur_keep, select, sym_inverse, symmetrize};
use crate::{Error, Result, SPEED_OF_LIGHT};

/// Which end of the link an angle belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Bs,
    Ue,
}

/// Column of `Υ` for `block` (0..5 = θ_R, θ_T, φ_R, φ_T, τ) of path `m`.
fn column(block: usize, m: usize, n_paths: usize) -> usize {
    block * n_paths + m
}

/// Which side the RX/TX angles sit on.
fn sides(direction: LinkDirection) -> (Side, Side) {
    match direction {
        LinkDirection::Uplink => (Side::Bs, Side::Ue),
        LinkDirection::Downlink => (Side::Ue, Side::Bs),
    }
}

/// `∂θ/∂u` and `∂φ/∂u` of the spherical angles of `u`.
fn angle_gradients(u: &Vec3) -> Result<(Vec3, Vec3)> {
    let rho2 = u.x * u.x + u.y * u.y;
    let r2 = u.norm_squared();
    let rho = rho2.sqrt();
    if !(rho > crate::geometry::AZIMUTH_DEGENERACY_TOL * r2.sqrt()) {
        return Err(Error::DegenerateGeometry("azimuth undefined on the z-axis".into()));
    }
    let d_theta = Vec3::new(u.x * u.z, u.y * u.z, -rho2) / (r2 * rho);
    let d_phi = Vec3::new(-u.y, u.x, 0.0) / rho2;
    Ok((d_theta, d_phi))
}

fn add_column(m: &mut DMatrix<f64>, row0: usize, col: usize, g: &Vec3) {
    for k in 0..3 {
        m[(row0 + k, col)] += g[k];
    }
}

/// Jacobian `Υ = ∂φ_CHᵀ/∂φ_L` with its per-path blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformationMatrix {
    /// `(5 + 3 K) x 5M`, `K` the number of paths with a cluster.
    pub matrix: DMatrix<f64>,
    pub n_paths: usize,
    /// First row of each path's cluster block, `None` for LOS.
    pub cluster_rows: Vec<Option<usize>>,
}

impl TransformationMatrix {
    pub fn path_columns(&self, m: usize) -> Vec<usize> {
        (0..5).map(|b| column(b, m, self.n_paths)).collect()
    }

    /// `Ῡ_m`: rows of `o` and `p`, columns of path `m`.
    pub fn bar(&self, m: usize) -> DMatrix<f64> {
        select(&self.matrix, &[0, 1, 2, 3, 4], &self.path_columns(m))
    }

    /// `Ῡ̿_m`: rows of `q_m`, columns of path `m`.
    pub fn bar_bar(&self, m: usize) -> Option<DMatrix<f64>> {
        self.cluster_rows[m].map(|r| select(&self.matrix, &[r, r + 1, r + 2], &self.path_columns(m)))
    }

    pub fn n_location_params(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Analytic `Υ` of a scenario.
pub fn transformation_matrix(s: &Scenario) -> Result<TransformationMatrix> {
    let clusters: Vec<Option<Vec3>> = s.paths.iter().map(|p| p.cluster).collect();
    transformation_for(&s.p, s.o, &clusters, s.direction())
}

/// `Υ` for an explicit pose; `clusters[m]` is `None` for the LOS path.
pub fn transformation_for(
    p: &Vec3,
    o: Orientation,
    clusters: &[Option<Vec3>],
    direction: LinkDirection,
) -> Result<TransformationMatrix> {
    let m_paths = clusters.len();
    if m_paths == 0 {
        return Err(Error::NoPaths);
    }
    let mut cluster_rows = Vec::with_capacity(m_paths);
    let mut next = 5;
    for c in clusters {
        if c.is_some() {
            cluster_rows.push(Some(next));
            next += 3;
        } else {
            cluster_rows.push(None);
        }
    }
    let mut ups = DMatrix::zeros(next, 5 * m_paths);
    let r = rotation_matrix(o);
    let dr_t = rotation_dtheta0(o);
    let dr_p = rotation_dphi0(o);
    let (rx_side, _) = sides(direction);

    for (m, cluster) in clusters.iter().enumerate() {
        // vector seen from the UE (before rotation) and from the BS
        let (v, bs_vec) = match cluster {
            None => (*p, *p),
            Some(q) => (p - q, *q),
        };
        let u = to_ue_frame(&v, o);
        let (bs_dt, bs_dp) = angle_gradients(&bs_vec)?;
        let (ue_dt, ue_dp) = angle_gradients(&u)?;

        // UE angles: u = -Rᵀv
        let ue_dt_v = -(r * ue_dt);
        let ue_dp_v = -(r * ue_dp);
        let du_dt0 = -(dr_t.transpose() * v);
        let du_dp0 = -(dr_p.transpose() * v);

        let ue_theta_o = [ue_dt.dot(&du_dt0), ue_dt.dot(&du_dp0)];
        let ue_phi_o = [ue_dp.dot(&du_dt0), ue_dp.dot(&du_dp0)];

        let cl_row = cluster_rows[m];

        let angle_cols = |side: Side| -> (usize, usize) {
            if side == rx_side {
                (column(0, m, m_paths), column(2, m, m_paths))
            } else {
                (column(1, m, m_paths), column(3, m, m_paths))
            }
        };

        // BS angles
        let (ct, cp) = angle_cols(Side::Bs);
        match cl_row {
            None => {
                add_column(&mut ups, 2, ct, &bs_dt);
                add_column(&mut ups, 2, cp, &bs_dp);
            }
            Some(row) => {
                add_column(&mut ups, row, ct, &bs_dt);
                add_column(&mut ups, row, cp, &bs_dp);
            }
        }

        // UE angles
        let (ct, cp) = angle_cols(Side::Ue);
        add_column(&mut ups, 2, ct, &ue_dt_v);
        add_column(&mut ups, 2, cp, &ue_dp_v);
        if let Some(row) = cl_row {
            add_column(&mut ups, row, ct, &(-ue_dt_v));
            add_column(&mut ups, row, cp, &(-ue_dp_v));
        }
        ups[(0, ct)] = ue_theta_o[0];
        ups[(1, ct)] = ue_theta_o[1];
        ups[(0, cp)] = ue_phi_o[0];
        ups[(1, cp)] = ue_phi_o[1];

        // delay
        let ctau = column(4, m, m_paths);
        let c = SPEED_OF_LIGHT;
        add_column(&mut ups, 2, ctau, &(v.normalize() / c));
        if let (Some(row), Some(q)) = (cl_row, cluster) {
            add_column(&mut ups, row, ctau, &((q.normalize() - v.normalize()) / c));
        }
    }
    Ok(TransformationMatrix {
        matrix: ups,
        n_paths: m_paths,
        cluster_rows,
    })
}

/// Channel parameters `[θ_R, θ_T, φ_R, φ_T, τ]` (block-major over paths) as a
/// function of the pose and clusters; the forward map that `Υ` differentiates.
pub fn channel_parameter_vector(
    p: &Vec3,
    o: Orientation,
    clusters: &[Option<Vec3>],
    direction: LinkDirection,
) -> Result<Vec<f64>> {
    let n = clusters.len();
    let mut out = vec![0.0; 5 * n];
    for (m, c) in clusters.iter().enumerate() {
        let g = match c {
            None => crate::geometry::los_path_geometry(p, o)?,
            Some(q) => crate::geometry::nlos_path_geometry(p, o, q)?,
        };
        let (rx, tx) = match direction {
            LinkDirection::Uplink => (g.bs, g.ue),
            LinkDirection::Downlink => (g.ue, g.bs),
        };
        out[column(0, m, n)] = rx.theta;
        out[column(1, m, n)] = tx.theta;
        out[column(2, m, n)] = rx.phi;
        out[column(3, m, n)] = tx.phi;
        out[column(4, m, n)] = g.toa;
    }
    Ok(out)
}

/// `Υ J Υᵀ` with its `Ψ / Φ / Ω` partition.
#[derive(Debug, Clone, PartialEq)]
pub struct LocationFim {
    pub matrix: DMatrix<f64>,
}

impl LocationFim {
    pub fn psi(&self) -> DMatrix<f64> {
        self.matrix.view((0, 0), (5, 5)).into_owned()
    }

    pub fn phi(&self) -> DMatrix<f64> {
        let k = self.matrix.ncols() - 5;
        self.matrix.view((0, 5), (5, k)).into_owned()
    }

    pub fn omega(&self) -> DMatrix<f64> {
        let k = self.matrix.ncols() - 5;
        self.matrix.view((5, 5), (k, k)).into_owned()
    }
}

pub fn location_fim(channel_efim: &DMatrix<f64>, upsilon: &TransformationMatrix) -> Result<LocationFim> {
    let u = &upsilon.matrix;
    if channel_efim.nrows() != u.ncols() || channel_efim.ncols() != u.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "channel EFIM is {}x{}, Υ has {} columns",
            channel_efim.nrows(),
            channel_efim.ncols(),
            u.ncols()
        )));
    }
    Ok(LocationFim {
        matrix: symmetrize(&(u * channel_efim * u.transpose())),
    })
}

/// `Ψ - Φ Ω⁻¹ Φᵀ`.
pub fn position_orientation_efim(loc: &LocationFim) -> Result<DMatrix<f64>> {
    schur_keep(&loc.matrix, &[0, 1, 2, 3, 4], "cluster block")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundFlag {
    Ok,
    /// Some information matrix failed the condition screen.
    Singular,
    /// An azimuth is undefined (direction on the z-axis).
    Degenerate,
}

impl BoundFlag {
    pub fn label(self) -> &'static str {
        match self {
            BoundFlag::Ok => "ok",
            BoundFlag::Singular => "singular",
            BoundFlag::Degenerate => "degenerate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundsResult {
    /// Meters.
    pub peb: f64,
    /// Radians.
    pub oeb: f64,
    pub speb: f64,
    pub soeb: f64,
    /// Variances of `p_x, p_y, p_z`.
    pub position_variances: [f64; 3],
    /// Variances of `θ0, φ0`.
    pub orientation_variances: [f64; 2],
    /// Scaled condition number of the matrix that was inverted last.
    pub condition: f64,
    pub flag: BoundFlag,
}

impl BoundsResult {
    pub fn unbounded(flag: BoundFlag, condition: f64) -> Self {
        Self {
            peb: f64::INFINITY,
            oeb: f64::INFINITY,
            speb: f64::INFINITY,
            soeb: f64::INFINITY,
            position_variances: [f64::INFINITY; 3],
            orientation_variances: [f64::INFINITY; 2],
            condition,
            flag,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.flag == BoundFlag::Ok
    }

    fn from_variances(orientation: [f64; 2], position: [f64; 3], condition: f64) -> Self {
        let soeb = orientation[0] + orientation[1];
        let speb = position.iter().sum::<f64>();
        Self {
            peb: speb.sqrt(),
            oeb: soeb.sqrt(),
            speb,
            soeb,
            position_variances: position,
            orientation_variances: orientation,
            condition,
            flag: BoundFlag::Ok,
        }
    }

    /// Turns an error from the pipeline into a flagged result; other errors pass.
    pub fn from_error(e: Error) -> Result<Self> {
        match e {
            Error::Singular { condition, .. } => Ok(Self::unbounded(BoundFlag::Singular, condition)),
            Error::DegenerateGeometry(_) => Ok(Self::unbounded(BoundFlag::Degenerate, f64::INFINITY)),
            other => Err(other),
        }
    }
}

/// SPEB/SOEB from the inverse of a 5x5 `(o, p)` EFIM.
pub fn peb_oeb(efim_op: &DMatrix<f64>) -> BoundsResult {
    if efim_op.shape() != (5, 5) {
        return BoundsResult::unbounded(BoundFlag::Singular, f64::INFINITY);
    }
    let condition = scaled_condition(efim_op);
    match sym_inverse(efim_op, "position/orientation EFIM") {
        Ok(inv) => {
            let d = |i: usize| inv[(i, i)];
            if (0..5).any(|i| !(d(i) >= 0.0)) {
                return BoundsResult::unbounded(BoundFlag::Singular, condition);
            }
            BoundsResult::from_variances([d(0), d(1)], [d(2), d(3), d(4)], condition)
        }
        Err(Error::Singular { condition, .. }) => BoundsResult::unbounded(BoundFlag::Singular, condition),
        Err(_) => BoundsResult::unbounded(BoundFlag::Singular, condition),
    }
}

/// Full exact pipeline: channel FIM, gain elimination, `Υ`, cluster elimination.
pub fn exact_efim_op(s: &Scenario) -> Result<DMatrix<f64>> {
    let fim = exact_channel_fim(s)?;
    let je = geometric_efim(&fim)?;
    let ups = transformation_matrix(s)?;
    position_orientation_efim(&location_fim(&je, &ups)?)
}

/// Exact PEB/OEB; singular or degenerate locations come back flagged.
pub fn exact_bounds(s: &Scenario) -> Result<BoundsResult> {
    match exact_efim_op(s) {
        Ok(j) => Ok(peb_oeb(&j)),
        Err(e) => BoundsResult::from_error(e),
    }
}

/// The three terms of the approximate EFIM: path information, gain
/// uncertainty and cluster uncertainty; the EFIM is `info - gains - clusters`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApproxTerms {
    pub information: DMatrix<f64>,
    pub gain_uncertainty: DMatrix<f64>,
    pub cluster_uncertainty: DMatrix<f64>,
}

impl ApproxTerms {
    pub fn efim(&self) -> DMatrix<f64> {
        symmetrize(&(&self.information - &self.gain_uncertainty - &self.cluster_uncertainty))
    }
}

/// Contribution of a single path, `J_(o,p)^(m)`.
pub fn path_efim_op(pf: &PathFim, ups: &TransformationMatrix) -> Result<DMatrix<f64>> {
    let t = path_terms(pf, ups)?;
    Ok(t.efim())
}

fn path_terms(pf: &PathFim, ups: &TransformationMatrix) -> Result<ApproxTerms> {
    let m = pf.path;
    let bar = ups.bar(m);
    let lam = pf.lambda();
    let pi = pf.pi();
    let xi_inv = sym_inverse(&pf.xi(), "path gain block")?;
    let information = &bar * &lam * bar.transpose();
    let gain_uncertainty = &bar * &pi * &xi_inv * pi.transpose() * bar.transpose();
    let cluster_uncertainty = match ups.bar_bar(m) {
        None => DMatrix::zeros(5, 5),
        Some(bb) => {
            let lam_e = symmetrize(&(&lam - &pi * &xi_inv * pi.transpose()));
            let cross = &bar * &lam_e * bb.transpose();
            let inner = symmetrize(&(&bb * &lam_e * bb.transpose()));
            let inner_inv = sym_inverse(&inner, "cluster block")?;
            &cross * inner_inv * cross.transpose()
        }
    };
    Ok(ApproxTerms {
        information,
        gain_uncertainty,
        cluster_uncertainty,
    })
}

/// Approximate EFIM of `(o, p)` from per-path FIMs, summed path by path.
pub fn approx_position_orientation_efim(paths: &[PathFim], ups: &TransformationMatrix) -> Result<ApproxTerms> {
    let mut total = ApproxTerms {
        information: DMatrix::zeros(5, 5),
        gain_uncertainty: DMatrix::zeros(5, 5),
        cluster_uncertainty: DMatrix::zeros(5, 5),
    };
    for pf in paths {
        let t = path_terms(pf, ups)?;
        total.information += t.information;
        total.gain_uncertainty += t.gain_uncertainty;
        total.cluster_uncertainty += t.cluster_uncertainty;
    }
    Ok(total)
}

/// Exact and approximate bounds of one scenario from a single FIM evaluation.
pub fn exact_and_approx_bounds(s: &Scenario) -> Result<(BoundsResult, BoundsResult)> {
    let ups = match transformation_matrix(s) {
        Ok(u) => u,
        Err(e) => {
            let r = BoundsResult::from_error(e)?;
            return Ok((r, r));
        }
    };
    let fim = exact_channel_fim(s)?;
    let exact = match geometric_efim(&fim)
        .and_then(|je| location_fim(&je, &ups))
        .and_then(|l| position_orientation_efim(&l))
    {
        Ok(j) => peb_oeb(&j),
        Err(e) => BoundsResult::from_error(e)?,
    };
    let approx = match approx_position_orientation_efim(&approx_from_exact(&fim), &ups) {
        Ok(t) => peb_oeb(&t.efim()),
        Err(e) => BoundsResult::from_error(e)?,
    };
    Ok((exact, approx))
}

/// Partial derivatives of the orientation with respect to the LOS angles,
/// holding the other three angles fixed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationPartials {
    pub dphi0_dtheta_bs: f64,
    pub dphi0_dphi_bs: f64,
    pub dphi0_dtheta_ue: f64,
    pub dphi0_dphi_ue: f64,
    pub dtheta0_dtheta_bs: f64,
    pub dtheta0_dphi_bs: f64,
    pub dtheta0_dtheta_ue: f64,
    pub dtheta0_dphi_ue: f64,
}

/// Derivatives of `(θ0, φ0)` as implicit functions of `(θ_BS, φ_BS, θ_UE, φ_UE)`.
pub fn orientation_partials(
    theta_bs: f64,
    phi_bs: f64,
    theta_ue: f64,
    phi_ue: f64,
    o: Orientation,
) -> Result<OrientationPartials> {
    let delta = o.phi0 - phi_bs;
    let (sd, cd) = delta.sin_cos();
    let (stb, ctb) = theta_bs.sin_cos();
    let (stu, ctu) = theta_ue.sin_cos();
    let (spu, cpu) = phi_ue.sin_cos();
    let (st0, ct0) = o.theta0.sin_cos();
    let den = ct0 * stb * sd + st0 * ctb;
    if sd.abs() < 1e-12 || stb.abs() < 1e-12 || den.abs() < 1e-12 {
        return Err(Error::DegenerateGeometry(
            "orientation not locally identifiable from LOS angles".into(),
        ));
    }
    let dphi0_dtheta_bs = (ctb / stb) * (cd / sd);
    let dphi0_dphi_bs = 1.0;
    let dphi0_dtheta_ue = cpu * ctu / (stb * sd);
    let dphi0_dphi_ue = -spu * stu / (stb * sd);
    let k = -st0 * stb * cd / den;
    Ok(OrientationPartials {
        dphi0_dtheta_bs,
        dphi0_dphi_bs,
        dphi0_dtheta_ue,
        dphi0_dphi_ue,
        dtheta0_dtheta_bs: k * dphi0_dtheta_bs - (st0 * ctb * sd + ct0 * stb) / den,
        dtheta0_dphi_bs: 0.0,
        dtheta0_dtheta_ue: k * dphi0_dtheta_ue - stu / den,
        dtheta0_dphi_ue: k * dphi0_dphi_ue,
    })
}

/// Weights of the LOS SOEB: `b1..b6` multiply `CRLB(θ_BS)`, `CRLB(φ_BS)`,
/// `σ(θ_BS, φ_BS)`, `CRLB(θ_UE)`, `CRLB(φ_UE)`, `σ(θ_UE, φ_UE)`.
pub fn soeb_weights(d: &OrientationPartials) -> [f64; 6] {
    let tb = [d.dtheta0_dtheta_bs, d.dphi0_dtheta_bs];
    let pb = [d.dtheta0_dphi_bs, d.dphi0_dphi_bs];
    let tu = [d.dtheta0_dtheta_ue, d.dphi0_dtheta_ue];
    let pu = [d.dtheta0_dphi_ue, d.dphi0_dphi_ue];
    let dot = |a: [f64; 2], b: [f64; 2]| a[0] * b[0] + a[1] * b[1];
    [
        dot(tb, tb),
        dot(pb, pb),
        2.0 * dot(tb, pb),
        dot(tu, tu),
        dot(pu, pu),
        2.0 * dot(tu, pu),
    ]
}

/// BS/UE view of the single-path bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LosAngleBounds {
    pub theta_bs: f64,
    pub phi_bs: f64,
    pub cov_bs: f64,
    pub theta_ue: f64,
    pub phi_ue: f64,
    pub cov_ue: f64,
    pub tau: f64,
}

pub fn los_angle_bounds(s: &Scenario) -> Result<LosAngleBounds> {
    if s.n_paths() != 1 || !s.has_los() {
        return Err(Error::invalid("closed form needs a single LOS path"));
    }
    let sc = single_path_scalars(s, 0)?;
    let k = s.gamma() * s.paths[0].beta.norm_sqr();
    let c = single_path_crlbs(&sc, k, scenario_weff(s)?)?;
    Ok(match s.direction() {
        LinkDirection::Uplink => LosAngleBounds {
            theta_bs: c.theta_r,
            phi_bs: c.phi_r,
            cov_bs: c.cov_r,
            theta_ue: c.theta_t,
            phi_ue: c.phi_t,
            cov_ue: c.cov_t,
            tau: c.tau,
        },
        LinkDirection::Downlink => LosAngleBounds {
            theta_bs: c.theta_t,
            phi_bs: c.phi_t,
            cov_bs: c.cov_t,
            theta_ue: c.theta_r,
            phi_ue: c.phi_r,
            cov_ue: c.cov_r,
            tau: c.tau,
        },
    })
}

/// Closed-form LOS PEB/OEB.
pub fn los_closed_form(s: &Scenario) -> Result<BoundsResult> {
    let b = los_angle_bounds(s)?;
    let g = &s.paths[0].geometry;
    if g.is_degenerate() {
        return Err(Error::DegenerateGeometry("LOS azimuth undefined".into()));
    }
    let d2 = s.p.norm_squared();
    let c = SPEED_OF_LIGHT;
    let st = g.bs.theta.sin();
    let position = closed_form_position_variances(&s.p, &b);
    let speb = d2 * b.theta_bs + d2 * st * st * b.phi_bs + c * c * b.tau;
    let d = orientation_partials(g.bs.theta, g.bs.phi, g.ue.theta, g.ue.phi, s.o)?;
    let w = soeb_weights(&d);
    let soeb =
        w[0] * b.theta_bs + w[1] * b.phi_bs + w[2] * b.cov_bs + w[3] * b.theta_ue + w[4] * b.phi_ue + w[5] * b.cov_ue;
    let var_theta0 = d.dtheta0_dtheta_bs.powi(2) * b.theta_bs
        + d.dtheta0_dtheta_ue.powi(2) * b.theta_ue
        + d.dtheta0_dphi_ue.powi(2) * b.phi_ue
        + 2.0 * d.dtheta0_dtheta_bs * d.dtheta0_dphi_bs * b.cov_bs
        + 2.0 * d.dtheta0_dtheta_ue * d.dtheta0_dphi_ue * b.cov_ue;
    let mut r = BoundsResult::from_variances([var_theta0, soeb - var_theta0], position, 0.0);
    r.speb = speb;
    r.soeb = soeb;
    r.peb = speb.sqrt();
    r.oeb = soeb.sqrt();
    Ok(r)
}

fn closed_form_position_variances(p: &Vec3, b: &LosAngleBounds) -> [f64; 3] {
    // p = cτ (cosφ sinθ, sinφ sinθ, cosθ) with (θ, φ) the BS angles
    let d = p.norm();
    let rho = p.xy().norm();
    let e_r = p / d;
    let e_t = Vec3::new(p.x * p.z / (d * rho), p.y * p.z / (d * rho), -rho / d);
    let e_p = Vec3::new(-p.y / rho, p.x / rho, 0.0);
    let c = SPEED_OF_LIGHT;
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let gt = d * e_t[k];
        let gp = rho * e_p[k];
        let gr = c * e_r[k];
        *o = gt * gt * b.theta_bs + gp * gp * b.phi_bs + 2.0 * gt * gp * b.cov_bs + gr * gr * b.tau;
    }
    out
}

/// Planar LOS bounds with elevation terms dropped.
pub fn los_closed_form_2d(s: &Scenario) -> Result<BoundsResult> {
    if s.n_paths() != 1 || !s.has_los() {
        return Err(Error::invalid("closed form needs a single LOS path"));
    }
    let sc = single_path_scalars(s, 0)?;
    let k = s.gamma() * s.paths[0].beta.norm_sqr();
    let (phi_r, phi_t) = single_path_crlbs_2d(&sc, k)?;
    let tau = single_path_crlbs(&sc, k, scenario_weff(s)?)
        .map(|c| c.tau)
        .or_else(|_| {
            let w = scenario_weff(s)?;
            Ok::<f64, Error>(1.0 / (4.0 * std::f64::consts::PI.powi(2) * w * w * k * sc.g))
        })?;
    let (phi_bs, phi_ue) = match s.direction() {
        LinkDirection::Uplink => (phi_r, phi_t),
        LinkDirection::Downlink => (phi_t, phi_r),
    };
    let c = SPEED_OF_LIGHT;
    let soeb = phi_bs + phi_ue;
    let speb = c * c * tau + s.p.norm_squared() * phi_bs;
    let mut r = BoundsResult::from_variances([0.0, soeb], [speb, 0.0, 0.0], 0.0);
    r.speb = speb;
    r.soeb = soeb;
    Ok(r)
}

/// Least-squares slope of `ln(variance)` against `ln(N)`.
pub fn scaling_fit(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 4 {
        return Err(Error::InsufficientPoints {
            needed: 4,
            got: points.len(),
        });
    }
    if points.iter().any(|(n, v)| !(*n > 0.0) || !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::invalid("scaling fit needs positive finite values"));
    }
    let xs: Vec<f64> = points.iter().map(|(n, _)| n.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|(_, v)| v.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if !(sxx > 0.0) {
        return Err(Error::invalid("scaling fit needs distinct sizes"));
    }
    Ok(sxy / sxx)
}

/// Rotation of a UE-frame vector into the global frame.
pub fn ue_to_global(o: Orientation, v: &Vector3<f64>) -> Vector3<f64> {
    let r: Matrix3<f64> = rotation_matrix(o);
    r * v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{build_scenario, EnvironmentConfig, LinkBudget, Path, PathKind, System};
    use crate::fim::approx_channel_fim;
    use crate::geometry::{los_path_geometry, make_ura, nlos_path_geometry, wrap_angle};
    use crate::signal::{beamformer, downlink_beam_grid, uplink_beam_grid, PulseSpec, Sector, WeffConvention};
    use crate::C64;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;
    use std::sync::Arc;

    const LAMBDA: f64 = SPEED_OF_LIGHT / 38e9;
    const W: f64 = 125e6;

    fn system(n: usize, direction: LinkDirection, nb: usize) -> Arc<System> {
        let bs = make_ura(n, n, LAMBDA / 2.0).unwrap();
        let ue = make_ura(n, n, LAMBDA / 2.0).unwrap();
        let sector = Sector::default();
        let (tx, dirs) = match direction {
            LinkDirection::Downlink => (&bs, downlink_beam_grid(&sector, nb).unwrap()),
            LinkDirection::Uplink => (&ue, uplink_beam_grid(&sector, nb).unwrap()),
        };
        let bf = beamformer(tx, &dirs, LAMBDA).unwrap();
        Arc::new(System {
            bs,
            ue,
            lambda: LAMBDA,
            pulse: PulseSpec::ideal_sinc(W).with_convention(WeffConvention::Paper),
            budget: LinkBudget::from_dbm(0.0, -170.0, 16, 1.0 / W),
            direction,
            beamformer: bf,
        })
    }

    fn los(sys: Arc<System>, p: Vec3, o: Orientation) -> Scenario {
        build_scenario(sys, &EnvironmentConfig::default(), p, o, false).unwrap()
    }

    fn with_clusters(sys: Arc<System>, p: Vec3, o: Orientation, qs: &[Vec3], los_present: bool) -> Scenario {
        let mut paths = Vec::new();
        if los_present {
            let g = los_path_geometry(&p, o).unwrap();
            paths.push(Path {
                kind: PathKind::Los,
                cluster: None,
                beta: C64::from_polar(LAMBDA / (4.0 * PI * g.d1), 0.4),
                geometry: g,
            });
        }
        for (i, q) in qs.iter().enumerate() {
            let g = nlos_path_geometry(&p, o, q).unwrap();
            paths.push(Path {
                kind: PathKind::Scatterer,
                cluster: Some(*q),
                beta: C64::from_polar(0.7 * LAMBDA / (4.0 * PI * g.length()), 1.0 + i as f64),
                geometry: g,
            });
        }
        Scenario::new(sys, p, o, paths).unwrap()
    }

    fn fd_jacobian(p: &Vec3, o: Orientation, clusters: &[Option<Vec3>], dir: LinkDirection) -> DMatrix<f64> {
        let base = transformation_for(p, o, clusters, dir).unwrap();
        let rows = base.matrix.nrows();
        let cols = base.matrix.ncols();
        let h = 1e-6;
        let mut out = DMatrix::zeros(rows, cols);
        let eval = |row: usize, step: f64| {
            let mut o2 = o;
            let mut p2 = *p;
            let mut cl = clusters.to_vec();
            match row {
                0 => o2.theta0 += step,
                1 => o2.phi0 += step,
                2..=4 => p2[row - 2] += step,
                _ => {
                    let r = row - 5;
                    let idx = base
                        .cluster_rows
                        .iter()
                        .position(|c| *c == Some(5 + 3 * (r / 3)))
                        .unwrap();
                    let mut q = cl[idx].unwrap();
                    q[r % 3] += step;
                    cl[idx] = Some(q);
                }
            }
            channel_parameter_vector(&p2, o2, &cl, dir).unwrap()
        };
        for row in 0..rows {
            let plus = eval(row, h);
            let minus = eval(row, -h);
            for c in 0..cols {
                let is_delay = c >= 4 * clusters.len();
                let diff = if is_delay {
                    plus[c] - minus[c]
                } else {
                    wrap_angle(plus[c] - minus[c])
                };
                out[(row, c)] = diff / (2.0 * h);
            }
        }
        out
    }

    #[test]
    fn los_jacobian_examples() {
        let p = Vec3::new(10.0, 0.0, -10.0);
        let u = transformation_for(&p, Orientation::default(), &[None], LinkDirection::Uplink).unwrap();
        // uplink: φ_R is the BS azimuth, column 2
        assert_relative_eq!(u.matrix[(2, 2)], 0.0, epsilon = 1e-15);
        assert_relative_eq!(u.matrix[(3, 2)], 0.1, epsilon = 1e-15);
        assert_relative_eq!(u.matrix[(4, 2)], 0.0, epsilon = 1e-15);
        let tau_grad = Vec3::new(u.matrix[(2, 4)], u.matrix[(3, 4)], u.matrix[(4, 4)]);
        assert_relative_eq!(tau_grad * SPEED_OF_LIGHT, p.normalize(), epsilon = 1e-14);
        // BS angles do not depend on the orientation, delay neither
        for c in [0, 2, 4] {
            assert_eq!(u.matrix[(0, c)], 0.0);
            assert_eq!(u.matrix[(1, c)], 0.0);
        }
        assert!(transformation_for(
            &Vec3::new(0.0, 0.0, -10.0),
            Orientation::default(),
            &[None],
            LinkDirection::Uplink
        )
        .is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = Vec3::new(-12.0, 27.0, -10.0);
        let o = Orientation::new(0.3, -0.5);
        let clusters = [
            None,
            Some(Vec3::new(8.0, 35.0, -4.0)),
            Some(Vec3::new(-30.0, 20.0, -7.0)),
        ];
        for dir in [LinkDirection::Uplink, LinkDirection::Downlink] {
            let an = transformation_for(&p, o, &clusters, dir).unwrap().matrix;
            let fd = fd_jacobian(&p, o, &clusters, dir);
            for i in 0..an.nrows() {
                for j in 0..an.ncols() {
                    let (a, f) = (an[(i, j)], fd[(i, j)]);
                    let tol = 1e-5 * a.abs().max(f.abs()).max(1e-3 * an.column(j).amax());
                    assert!((a - f).abs() <= tol, "({i},{j}) {a} vs {f} dir {dir:?}");
                }
            }
        }
    }

    #[test]
    fn cluster_blocks_follow_path_order() {
        let p = Vec3::new(-12.0, 27.0, -10.0);
        let clusters = [
            Some(Vec3::new(8.0, 35.0, -4.0)),
            None,
            Some(Vec3::new(-3.0, 20.0, -7.0)),
        ];
        let u = transformation_for(&p, Orientation::default(), &clusters, LinkDirection::Downlink).unwrap();
        assert_eq!(u.cluster_rows, vec![Some(5), None, Some(8)]);
        assert_eq!(u.n_location_params(), 11);
        // the LOS path has no cluster rows
        for r in 5..11 {
            for c in u.path_columns(1) {
                assert_eq!(u.matrix[(r, c)], 0.0);
            }
        }
        assert!(u.bar_bar(1).is_none());
        assert_eq!(u.bar_bar(0).unwrap().shape(), (3, 5));
    }

    #[test]
    fn diagonal_efim_bounds() {
        let j = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 4.0, 5.0, 8.0, 10.0]));
        let b = peb_oeb(&j);
        assert_relative_eq!(b.soeb, 0.5 + 0.25, max_relative = 1e-14);
        assert_relative_eq!(b.speb, 0.2 + 0.125 + 0.1, max_relative = 1e-14);
        assert_relative_eq!(b.peb, b.speb.sqrt());
        let sing = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 4.0, 5.0, 0.0, 10.0]));
        let b = peb_oeb(&sing);
        assert_eq!(b.flag, BoundFlag::Singular);
        assert!(b.peb.is_infinite());
    }

    #[test]
    fn location_fim_partition() {
        let p = Vec3::new(5.0, 20.0, -10.0);
        let s = with_clusters(
            system(3, LinkDirection::Downlink, 4),
            p,
            Orientation::default(),
            &[],
            true,
        );
        let fim = exact_channel_fim(&s).unwrap();
        let je = geometric_efim(&fim).unwrap();
        let u = transformation_matrix(&s).unwrap();
        let l = location_fim(&je, &u).unwrap();
        assert_eq!(l.matrix.shape(), (5, 5));
        assert_eq!(l.omega().shape(), (0, 0));
        assert_eq!(position_orientation_efim(&l).unwrap(), l.psi());
        assert!(location_fim(&DMatrix::identity(3, 3), &u).is_err());
    }

    #[test]
    fn schur_matches_full_inverse() {
        let p = Vec3::new(5.0, 20.0, -10.0);
        let o = Orientation::new(0.1, 0.2);
        let s = with_clusters(
            system(4, LinkDirection::Downlink, 9),
            p,
            o,
            &[Vec3::new(-10.0, 15.0, -3.0)],
            true,
        );
        let fim = exact_channel_fim(&s).unwrap();
        let je = geometric_efim(&fim).unwrap();
        let u = transformation_matrix(&s).unwrap();
        let l = location_fim(&je, &u).unwrap();
        let reduced = position_orientation_efim(&l).unwrap();
        let full_inv = sym_inverse(&l.matrix, "t").unwrap();
        let block = select(&full_inv, &[0, 1, 2, 3, 4], &[0, 1, 2, 3, 4]);
        let red_inv = sym_inverse(&reduced, "t").unwrap();
        assert!((&red_inv - &block).norm() <= 1e-9 * block.norm());
    }

    #[test]
    fn closed_form_equals_pipeline() {
        for dir in [LinkDirection::Uplink, LinkDirection::Downlink] {
            let sys = system(6, dir, 9);
            for (p, o) in [
                (Vec3::new(7.0, 22.0, -10.0), Orientation::new(0.2, 0.3)),
                (Vec3::new(-25.0, 30.0, -10.0), Orientation::new(0.05, -0.4)),
            ] {
                let s = los(sys.clone(), p, o);
                let pipe = exact_bounds(&s).unwrap();
                let cf = los_closed_form(&s).unwrap();
                assert_relative_eq!(pipe.speb, cf.speb, max_relative = 1e-9);
                assert_relative_eq!(pipe.soeb, cf.soeb, max_relative = 1e-9);
                for k in 0..3 {
                    assert_relative_eq!(
                        pipe.position_variances[k],
                        cf.position_variances[k],
                        max_relative = 1e-8
                    );
                }
            }
        }
    }

    #[test]
    fn orientation_partials_match_inverse_jacobian() {
        let p = Vec3::new(-9.0, 24.0, -10.0);
        let o = Orientation::new(0.25, 0.6);
        let u = transformation_for(&p, o, &[None], LinkDirection::Uplink)
            .unwrap()
            .matrix;
        // Υ is square for one LOS path; its inverse holds ∂(o, p)/∂(channel)
        let inv = u.clone().try_inverse().unwrap().transpose();
        let g = los_path_geometry(&p, o).unwrap();
        let d = orientation_partials(g.bs.theta, g.bs.phi, g.ue.theta, g.ue.phi, o).unwrap();
        // uplink columns: θ_BS, θ_UE, φ_BS, φ_UE, τ -> rows of inv
        let tol = 1e-9;
        assert_relative_eq!(inv[(0, 0)], d.dtheta0_dtheta_bs, epsilon = tol);
        assert_relative_eq!(inv[(1, 0)], d.dphi0_dtheta_bs, epsilon = tol);
        assert_relative_eq!(inv[(0, 1)], d.dtheta0_dtheta_ue, epsilon = tol);
        assert_relative_eq!(inv[(1, 1)], d.dphi0_dtheta_ue, epsilon = tol);
        assert_relative_eq!(inv[(0, 2)], d.dtheta0_dphi_bs, epsilon = tol);
        assert_relative_eq!(inv[(1, 2)], d.dphi0_dphi_bs, epsilon = tol);
        assert_relative_eq!(inv[(0, 3)], d.dtheta0_dphi_ue, epsilon = tol);
        assert_relative_eq!(inv[(1, 3)], d.dphi0_dphi_ue, epsilon = tol);
    }

    #[test]
    fn planar_closed_form_matches_planar_pipeline() {
        // BS and UE in one horizontal plane; three unknowns (φ0, p_x, p_y)
        let p = Vec3::new(12.0, 30.0, 0.0);
        let o = Orientation::new(0.0, 0.3);
        let sys = system(6, LinkDirection::Downlink, 9);
        let s = los(sys, p, o);
        let cf = los_closed_form_2d(&s).unwrap();
        let sc = single_path_scalars(&s, 0).unwrap();
        let k = s.gamma() * s.paths[0].beta.norm_sqr();
        let (phi_r, phi_t) = single_path_crlbs_2d(&sc, k).unwrap();
        let w = scenario_weff(&s).unwrap();
        let tau = 1.0 / (4.0 * PI * PI * w * w * k * sc.g);
        // downlink: φ_BS = φ_T, φ_UE = φ_R
        let rho2 = p.x * p.x + p.y * p.y;
        let grad_phi = [-p.y / rho2, p.x / rho2];
        let grad_tau = [
            p.x / (rho2.sqrt() * SPEED_OF_LIGHT),
            p.y / (rho2.sqrt() * SPEED_OF_LIGHT),
        ];
        // rows (φ0, px, py), columns (φ_BS, φ_UE, τ); φ_UE = φ_BS + π - φ0
        let ups = DMatrix::from_row_slice(
            3,
            3,
            &[
                0.0,
                -1.0,
                0.0, //
                grad_phi[0],
                grad_phi[0],
                grad_tau[0], //
                grad_phi[1],
                grad_phi[1],
                grad_tau[1],
            ],
        );
        let jch = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0 / phi_t, 1.0 / phi_r, 1.0 / tau]));
        let jl = &ups * jch * ups.transpose();
        let inv = jl.try_inverse().unwrap();
        assert_relative_eq!(inv[(0, 0)], cf.soeb, max_relative = 1e-9);
        assert_relative_eq!(inv[(1, 1)] + inv[(2, 2)], cf.speb, max_relative = 1e-9);
    }

    #[test]
    fn approx_is_sum_of_paths() {
        let p = Vec3::new(5.0, 20.0, -10.0);
        let o = Orientation::new(0.1, 0.2);
        let qs = [Vec3::new(-10.0, 15.0, -3.0), Vec3::new(14.0, 32.0, -6.0)];
        let s = with_clusters(system(4, LinkDirection::Downlink, 9), p, o, &qs, true);
        let pf = approx_channel_fim(&s).unwrap();
        let u = transformation_matrix(&s).unwrap();
        let total = approx_position_orientation_efim(&pf, &u).unwrap().efim();
        let mut sum = DMatrix::zeros(5, 5);
        for f in &pf {
            sum += path_efim_op(f, &u).unwrap();
        }
        assert!((&total - &sum).norm() <= 1e-10 * sum.norm());

        // one LOS path: the approximation is exact
        let s1 = with_clusters(system(4, LinkDirection::Downlink, 9), p, o, &[], true);
        let pf1 = approx_channel_fim(&s1).unwrap();
        let u1 = transformation_matrix(&s1).unwrap();
        let a = approx_position_orientation_efim(&pf1, &u1).unwrap();
        assert_eq!(a.cluster_uncertainty, DMatrix::zeros(5, 5));
        let e = exact_efim_op(&s1).unwrap();
        assert!((a.efim() - &e).norm() <= 1e-9 * e.norm());
    }

    #[test]
    fn nlos_needs_three_paths() {
        let p = Vec3::new(5.0, 20.0, -10.0);
        let o = Orientation::default();
        let sys = system(4, LinkDirection::Downlink, 9);
        let two = with_clusters(
            sys.clone(),
            p,
            o,
            &[Vec3::new(-10.0, 15.0, -3.0), Vec3::new(14.0, 32.0, -6.0)],
            false,
        );
        assert_eq!(exact_bounds(&two).unwrap().flag, BoundFlag::Singular);
    }

    #[test]
    fn scaling_fit_examples() {
        let pts: Vec<(f64, f64)> = [16.0, 36.0, 64.0, 144.0].iter().map(|n| (*n, 3.0 / n)).collect();
        assert_relative_eq!(scaling_fit(&pts).unwrap(), -1.0, epsilon = 1e-6);
        assert!(matches!(
            scaling_fit(&pts[..3]),
            Err(Error::InsufficientPoints { needed: 4, got: 3 })
        ));
        assert!(scaling_fit(&[(1.0, 1.0), (2.0, 0.0), (3.0, 1.0), (4.0, 1.0)]).is_err());
    }

    #[test]
    fn peb_grows_along_a_ray() {
        let sys = system(6, LinkDirection::Downlink, 9);
        let dir = Vec3::new(0.3, 1.0, -0.4).normalize();
        let mut last = 0.0;
        for d in [10.0, 20.0, 30.0, 40.0] {
            let s = los(sys.clone(), dir * d, Orientation::default());
            let b = los_closed_form(&s).unwrap();
            assert!(b.peb > last);
            last = b.peb;
        }
    }

    #[test]
    fn zero_orientation_oeb_is_link_symmetric() {
        let p = Vec3::new(7.0, 22.0, -10.0);
        let o = Orientation::default();
        // identical arrays and beam directions on both ends, mirrored
        let ul = system(5, LinkDirection::Uplink, 9);
        let dl = system(5, LinkDirection::Downlink, 9);
        let a = exact_bounds(&los(ul, p, o)).unwrap();
        let b = exact_bounds(&los(dl, p, o)).unwrap();
        assert!(a.is_finite() && b.is_finite());
        assert!(a.oeb > 0.0 && b.oeb > 0.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn known_clusters_only_add_information(
            qx in -30.0..30.0f64, qy in 5.0..45.0f64, qz in -9.0..-1.0f64
        ) {
            let p = Vec3::new(5.0, 20.0, -10.0);
            let o = Orientation::new(0.1, 0.2);
            let q = Vec3::new(qx, qy, qz);
            prop_assume!((p - q).norm() > 2.0);
            let sys = system(4, LinkDirection::Downlink, 9);
            let s = with_clusters(sys, p, o, &[q], true);
            let pf = approx_channel_fim(&s).unwrap();
            let u = transformation_matrix(&s).unwrap();
            let only_los = path_efim_op(&pf[0], &u).unwrap();
            let t = path_terms(&pf[1], &u).unwrap();
            let with_known = &only_los + (&t.information - &t.gain_uncertainty);
            let a = peb_oeb(&only_los);
            let b = peb_oeb(&with_known);
            prop_assert!(b.speb <= a.speb * (1.0 + 1e-9));
            prop_assert!(b.soeb <= a.soeb * (1.0 + 1e-9));
        }
    }
}
