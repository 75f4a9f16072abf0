//! Fisher information of the channel parameters.
//!
//! Parameters are ordered block by block,
//! `[θ_R(1..M), θ_T(1..M), φ_R(1..M), φ_T(1..M), τ(1..M), β_R(1..M), β_I(1..M)]`,
//! and every `M x M` sub-block has the Hadamard form
//! `γ Re{ (RX factor) ⊙ (TX factor)ᵀ ⊙ (signal factor) }`.

use std::fmt;
use std::io::Write;

use nalgebra::{ComplexField, DMatrix, DVector};

use crate::channel::Scenario;
use crate::geometry::{steering_vector, wavenumber_dphi, wavenumber_dtheta, AnglePair, ArrayGeometry};
use crate::linalg::{schur_keep, select, sym_inverse};
use crate::signal::{beamformer, correlation_matrices, effective_bandwidth, Beamformer, SignalCorrelations};
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamBlock {
    ThetaR,
    ThetaT,
    PhiR,
    PhiT,
    Tau,
    BetaR,
    BetaI,
}

impl ParamBlock {
    pub const ALL: [ParamBlock; 7] = [
        ParamBlock::ThetaR,
        ParamBlock::ThetaT,
        ParamBlock::PhiR,
        ParamBlock::PhiT,
        ParamBlock::Tau,
        ParamBlock::BetaR,
        ParamBlock::BetaI,
    ];

    /// Angles and delay, the channel parameters of interest.
    pub const GEOMETRIC: [ParamBlock; 5] = [
        ParamBlock::ThetaR,
        ParamBlock::ThetaT,
        ParamBlock::PhiR,
        ParamBlock::PhiT,
        ParamBlock::Tau,
    ];

    pub fn position(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ParamBlock::ThetaR => "theta_r",
            ParamBlock::ThetaT => "theta_t",
            ParamBlock::PhiR => "phi_r",
            ParamBlock::PhiT => "phi_t",
            ParamBlock::Tau => "tau",
            ParamBlock::BetaR => "beta_r",
            ParamBlock::BetaI => "beta_i",
        }
    }

    /// Which RX matrix the derivative touches: 0 = A, 1 = K, 2 = P.
    fn rx_kind(self) -> usize {
        match self {
            ParamBlock::ThetaR => 1,
            ParamBlock::PhiR => 2,
            _ => 0,
        }
    }

    fn tx_kind(self) -> usize {
        match self {
            ParamBlock::ThetaT => 1,
            ParamBlock::PhiT => 2,
            _ => 0,
        }
    }

    /// Scalar multiplying the derivative of path `m`'s contribution.
    fn gain(self, beta: C64) -> C64 {
        let j = C64::new(0.0, 1.0);
        match self {
            ParamBlock::ThetaR | ParamBlock::PhiR => -j * beta,
            ParamBlock::ThetaT | ParamBlock::PhiT => j * beta,
            ParamBlock::Tau => beta,
            ParamBlock::BetaR => C64::new(1.0, 0.0),
            ParamBlock::BetaI => j,
        }
    }
}

/// One entry of the channel parameter vector; `path` is zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamIndex {
    pub block: ParamBlock,
    pub path: usize,
}

impl ParamIndex {
    pub fn new(block: ParamBlock, path: usize) -> Self {
        Self { block, path }
    }

    /// Row/column in a FIM over `n_paths` paths.
    pub fn offset(&self, n_paths: usize) -> usize {
        self.block.position() * n_paths + self.path
    }
}

impl fmt::Display for ParamIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.block.name(), self.path + 1)
    }
}

/// Per-path derivative data of one array.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeMatrices {
    /// Diagonals of `K̃_m`, one per path.
    pub ktilde: Vec<DVector<f64>>,
    /// Diagonals of `P̃_m`.
    pub ptilde: Vec<DVector<f64>>,
    /// Steering vectors `[a_1 .. a_M]`.
    pub a: DMatrix<C64>,
    /// `[K̃_1 a_1 .. K̃_M a_M]`.
    pub k: DMatrix<C64>,
    /// `[P̃_1 a_1 .. P̃_M a_M]`.
    pub p: DMatrix<C64>,
    /// Diagonal of `B`.
    pub b: DVector<C64>,
}

pub fn derivative_matrices(
    geom: &ArrayGeometry,
    angles: &[AnglePair],
    lambda: f64,
    betas: &[C64],
) -> Result<DerivativeMatrices> {
    if angles.len() != betas.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} angle pairs but {} gains",
            angles.len(),
            betas.len()
        )));
    }
    let n = geom.len();
    let m = angles.len();
    let mut out = DerivativeMatrices {
        ktilde: Vec::with_capacity(m),
        ptilde: Vec::with_capacity(m),
        a: DMatrix::zeros(n, m),
        k: DMatrix::zeros(n, m),
        p: DMatrix::zeros(n, m),
        b: DVector::from_column_slice(betas),
    };
    for (col, ang) in angles.iter().enumerate() {
        let a = steering_vector(geom, *ang, lambda);
        let kt = geom.project(&wavenumber_dtheta(*ang, lambda));
        let pt = geom.project(&wavenumber_dphi(*ang, lambda));
        for i in 0..n {
            out.a[(i, col)] = a[i];
            out.k[(i, col)] = a[i] * kt[i];
            out.p[(i, col)] = a[i] * pt[i];
        }
        out.ktilde.push(kt);
        out.ptilde.push(pt);
    }
    Ok(out)
}

/// Labeled `7M x 7M` Fisher information matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelFim {
    pub matrix: DMatrix<f64>,
    pub labels: Vec<ParamIndex>,
    pub gamma: f64,
    pub n_paths: usize,
}

impl ChannelFim {
    pub fn index(&self, block: ParamBlock, path: usize) -> usize {
        ParamIndex::new(block, path).offset(self.n_paths)
    }

    pub fn get(&self, a: ParamIndex, b: ParamIndex) -> f64 {
        self.matrix[(a.offset(self.n_paths), b.offset(self.n_paths))]
    }

    /// Indices of the given blocks for every path, block-major.
    pub fn indices_of(&self, blocks: &[ParamBlock]) -> Vec<ParamIndex> {
        blocks
            .iter()
            .flat_map(|b| (0..self.n_paths).map(move |m| ParamIndex::new(*b, m)))
            .collect()
    }

    /// Row/column labels followed by the matrix, comma separated.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "param")?;
        for l in &self.labels {
            write!(w, ",{l}")?;
        }
        writeln!(w)?;
        for (i, l) in self.labels.iter().enumerate() {
            write!(w, "{l}")?;
            for j in 0..self.labels.len() {
                write!(w, ",{:e}", self.matrix[(i, j)])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn labels_for(n_paths: usize) -> Vec<ParamIndex> {
    ParamBlock::ALL
        .iter()
        .flat_map(|b| (0..n_paths).map(move |m| ParamIndex::new(*b, m)))
        .collect()
}

/// RX and TX ingredients of the Hadamard products.
struct Factors {
    /// `[A_R, K_R, P_R]`, each `N_R x M`.
    rx: [DMatrix<C64>; 3],
    /// `[FᴴA_T, FᴴK_T, FᴴP_T]`, each `N_B x M`.
    tx: [DMatrix<C64>; 3],
    betas: Vec<C64>,
}

impl Factors {
    fn new(rx: DerivativeMatrices, tx: DerivativeMatrices, f: &Beamformer) -> Self {
        let fh = f.f.adjoint();
        Self {
            tx: [&fh * &tx.a, &fh * &tx.k, &fh * &tx.p],
            betas: rx.b.iter().cloned().collect(),
            rx: [rx.a, rx.k, rx.p],
        }
    }

    fn from_scenario(s: &Scenario) -> Result<Self> {
        let sys = &s.system;
        let betas = s.betas();
        let m = s.n_paths();
        let rx_angles: Vec<AnglePair> = (0..m).map(|i| s.rx_angles(i)).collect();
        let tx_angles: Vec<AnglePair> = (0..m).map(|i| s.tx_angles(i)).collect();
        let rx = derivative_matrices(sys.rx_array(), &rx_angles, sys.lambda, &betas)?;
        let tx = derivative_matrices(sys.tx_array(), &tx_angles, sys.lambda, &betas)?;
        Ok(Self::new(rx, tx, &sys.beamformer))
    }
}

/// Signal factor `S_XY` for paths `u`, `v`.
fn signal_factor(x: ParamBlock, y: ParamBlock, r: &SignalCorrelations, u: usize, v: usize) -> C64 {
    let j = C64::new(0.0, 1.0);
    match (x == ParamBlock::Tau, y == ParamBlock::Tau) {
        (false, false) => r.r0[(u, v)],
        (true, false) => j * r.r1[(u, v)],
        (false, true) => -j * r.r1[(u, v)],
        (true, true) => r.r2[(u, v)],
    }
}

fn assemble(f: &Factors, r: &SignalCorrelations, gamma: f64) -> DMatrix<f64> {
    let m = f.betas.len();
    let mut j = DMatrix::zeros(7 * m, 7 * m);
    for (bi, &x) in ParamBlock::ALL.iter().enumerate() {
        for &y in &ParamBlock::ALL[bi..] {
            let (rxx, rxy) = (&f.rx[x.rx_kind()], &f.rx[y.rx_kind()]);
            let (txx, txy) = (&f.tx[x.tx_kind()], &f.tx[y.tx_kind()]);
            for u in 0..m {
                for v in 0..m {
                    let rx = rxx.column(u).dotc(&rxy.column(v));
                    let tx = txy.column(v).dotc(&txx.column(u));
                    let g = x.gain(f.betas[u]).conj() * y.gain(f.betas[v]);
                    let val = gamma * (g * rx * tx * signal_factor(x, y, r, u, v)).re;
                    let (row, col) = (x.position() * m + u, y.position() * m + v);
                    j[(row, col)] = val;
                    j[(col, row)] = val;
                }
            }
        }
    }
    j
}

/// Exact channel-parameter FIM of a scenario.
pub fn exact_channel_fim(s: &Scenario) -> Result<ChannelFim> {
    let factors = Factors::from_scenario(s)?;
    let r = correlation_matrices(&s.system.pulse, &s.taus())?;
    let gamma = s.gamma();
    Ok(ChannelFim {
        matrix: assemble(&factors, &r, gamma),
        labels: labels_for(s.n_paths()),
        gamma,
        n_paths: s.n_paths(),
    })
}

/// EFIM of the parameters in `keep` (in that order), all others eliminated.
pub fn efim(fim: &ChannelFim, keep: &[ParamIndex]) -> Result<DMatrix<f64>> {
    let idx: Vec<usize> = keep.iter().map(|k| k.offset(fim.n_paths)).collect();
    if idx.iter().any(|i| *i >= fim.matrix.nrows()) {
        return Err(Error::DimensionMismatch("parameter index beyond FIM size".into()));
    }
    schur_keep(&fim.matrix, &idx, "channel EFIM")
}

/// EFIM over `[θ_R, θ_T, φ_R, φ_T, τ]` (each for all paths) with the gains removed.
pub fn geometric_efim(fim: &ChannelFim) -> Result<DMatrix<f64>> {
    efim(fim, &fim.indices_of(&ParamBlock::GEOMETRIC))
}

/// Spatial scalars of a single path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePathScalars {
    pub g: f64,
    pub r_theta: f64,
    pub r_phi: f64,
    pub x_theta_phi: f64,
    pub t_theta: f64,
    pub t_phi: f64,
    pub v_theta: C64,
    pub v_phi: C64,
    pub y_prime: f64,
    pub l_theta: f64,
    pub l_phi: f64,
    pub y_theta_phi: f64,
    pub zeta1: f64,
    pub zeta2: f64,
}

/// Scalars of path `m` of a scenario, ignoring all other paths.
pub fn single_path_scalars(s: &Scenario, m: usize) -> Result<SinglePathScalars> {
    if m >= s.n_paths() {
        return Err(Error::invalid(format!("path {m} out of range")));
    }
    let sys = &s.system;
    let rx = derivative_matrices(sys.rx_array(), &[s.rx_angles(m)], sys.lambda, &[s.paths[m].beta])?;
    let tx = derivative_matrices(sys.tx_array(), &[s.tx_angles(m)], sys.lambda, &[s.paths[m].beta])?;
    Ok(scalars_from(&rx, &tx, &sys.beamformer))
}

pub fn scalars_from(rx: &DerivativeMatrices, tx: &DerivativeMatrices, f: &Beamformer) -> SinglePathScalars {
    let ka = rx.k.column(0);
    let pa = rx.p.column(0);
    let fh = f.f.adjoint();
    let fa = &fh * tx.a.column(0);
    let fk = &fh * tx.k.column(0);
    let fp = &fh * tx.p.column(0);

    let g = fa.norm_squared();
    let r_theta = ka.norm_squared();
    let r_phi = pa.norm_squared();
    let x_theta_phi = ka.dotc(&pa).re;
    let t_theta = fk.norm_squared();
    let t_phi = fp.norm_squared();
    let v_theta = fk.dotc(&fa);
    let v_phi = fp.dotc(&fa);
    let y_prime = fp.dotc(&fk).re;
    let l_theta = g * t_theta - v_theta.norm_sqr();
    let l_phi = g * t_phi - v_phi.norm_sqr();
    let y_theta_phi = g * y_prime - (v_phi * v_theta.conj()).re;
    SinglePathScalars {
        g,
        r_theta,
        r_phi,
        x_theta_phi,
        t_theta,
        t_phi,
        v_theta,
        v_phi,
        y_prime,
        l_theta,
        l_phi,
        y_theta_phi,
        zeta1: r_theta * r_phi - x_theta_phi * x_theta_phi,
        zeta2: l_theta * l_phi - y_theta_phi * y_theta_phi,
    }
}

/// Closed-form single-path bounds, plus the angle covariances at each end.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinglePathCrlbs {
    pub theta_r: f64,
    pub phi_r: f64,
    pub theta_t: f64,
    pub phi_t: f64,
    pub tau: f64,
    /// Covariance of `(θ_R, φ_R)`.
    pub cov_r: f64,
    /// Covariance of `(θ_T, φ_T)`.
    pub cov_t: f64,
}

/// `gamma_beta2` is `γ|β|²`; `weff` the effective bandwidth in Hz.
pub fn single_path_crlbs(s: &SinglePathScalars, gamma_beta2: f64, weff: f64) -> Result<SinglePathCrlbs> {
    let cond = |num: f64, den: f64| {
        if !(den > 0.0) || !(den > 1e-12 * num) {
            Err(Error::singular("single-path angle information", f64::INFINITY))
        } else {
            Ok(())
        }
    };
    cond(s.r_theta * s.r_phi, s.zeta1)?;
    cond(s.l_theta * s.l_phi, s.zeta2)?;
    if !(s.g > 0.0) || !(gamma_beta2 > 0.0) || !(weff > 0.0) {
        return Err(Error::singular("single-path gain", f64::INFINITY));
    }
    let k = gamma_beta2;
    Ok(SinglePathCrlbs {
        theta_r: s.r_phi / (k * s.zeta1 * s.g),
        phi_r: s.r_theta / (k * s.zeta1 * s.g),
        theta_t: s.g * s.l_phi / (k * s.zeta2),
        phi_t: s.g * s.l_theta / (k * s.zeta2),
        tau: 1.0 / (4.0 * std::f64::consts::PI.powi(2) * weff * weff * k * s.g),
        cov_r: -s.x_theta_phi / (k * s.g * s.zeta1),
        cov_t: -s.g * s.y_theta_phi / (k * s.zeta2),
    })
}

/// Azimuth bounds with the elevation coupling dropped: `(CRLB(φ_R), CRLB(φ_T))`.
pub fn single_path_crlbs_2d(s: &SinglePathScalars, gamma_beta2: f64) -> Result<(f64, f64)> {
    if !(s.r_phi * s.g > 0.0) || !(s.l_phi > 0.0) || !(gamma_beta2 > 0.0) {
        return Err(Error::singular("planar azimuth information", f64::INFINITY));
    }
    Ok((1.0 / (gamma_beta2 * s.r_phi * s.g), s.g / (gamma_beta2 * s.l_phi)))
}

/// Single-path EFIM over `(θ_R, θ_T, φ_R, φ_T, τ)` assembled from the scalars.
pub fn single_path_efim(s: &SinglePathScalars, gamma_beta2: f64, weff: f64) -> DMatrix<f64> {
    let k = gamma_beta2;
    let mut j = DMatrix::zeros(5, 5);
    j[(0, 0)] = k * s.r_theta * s.g;
    j[(0, 2)] = k * s.x_theta_phi * s.g;
    j[(2, 0)] = j[(0, 2)];
    j[(2, 2)] = k * s.r_phi * s.g;
    j[(1, 1)] = k * s.l_theta / s.g;
    j[(1, 3)] = k * s.y_theta_phi / s.g;
    j[(3, 1)] = j[(1, 3)];
    j[(3, 3)] = k * s.l_phi / s.g;
    j[(4, 4)] = k * 4.0 * std::f64::consts::PI.powi(2) * s.g * weff * weff;
    j
}

/// Effective bandwidth of the scenario's pulse.
pub fn scenario_weff(s: &Scenario) -> Result<f64> {
    effective_bandwidth(&s.system.pulse)
}

/// FIM of one path with all cross-path terms dropped, ordered
/// `[θ_R, θ_T, φ_R, φ_T, τ, β_R, β_I]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathFim {
    pub path: usize,
    pub matrix: DMatrix<f64>,
}

impl PathFim {
    /// `Λ`: the 5x5 block of angles and delay.
    pub fn lambda(&self) -> DMatrix<f64> {
        self.matrix.view((0, 0), (5, 5)).into_owned()
    }

    /// `Π`: 5x2 coupling to the gain.
    pub fn pi(&self) -> DMatrix<f64> {
        self.matrix.view((0, 5), (5, 2)).into_owned()
    }

    /// `Ξ`: 2x2 gain block.
    pub fn xi(&self) -> DMatrix<f64> {
        self.matrix.view((5, 5), (2, 2)).into_owned()
    }

    /// `Λ - Π Ξ⁻¹ Πᵀ`.
    pub fn efim(&self) -> Result<DMatrix<f64>> {
        schur_keep(&self.matrix, &[0, 1, 2, 3, 4], "path gain block")
    }
}

/// Block-diagonal approximation: one 7x7 FIM per path.
pub fn approx_channel_fim(s: &Scenario) -> Result<Vec<PathFim>> {
    let full = exact_channel_fim(s)?;
    Ok(approx_from_exact(&full))
}

pub fn approx_from_exact(full: &ChannelFim) -> Vec<PathFim> {
    (0..full.n_paths)
        .map(|m| {
            let idx: Vec<usize> = ParamBlock::ALL.iter().map(|b| full.index(*b, m)).collect();
            PathFim {
                path: m,
                matrix: select(&full.matrix, &idx, &idx),
            }
        })
        .collect()
}

/// The approximate FIM laid out in the full `7M x 7M` ordering.
pub fn approx_as_full(full: &ChannelFim) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(full.matrix.nrows(), full.matrix.ncols());
    for pf in approx_from_exact(full) {
        for (a, ba) in ParamBlock::ALL.iter().enumerate() {
            for (b, bb) in ParamBlock::ALL.iter().enumerate() {
                out[(full.index(*ba, pf.path), full.index(*bb, pf.path))] = pf.matrix[(a, b)];
            }
        }
    }
    out
}

/// Off-diagonal to diagonal Frobenius ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdDiagnostic {
    pub delta: f64,
    pub diag_norm: f64,
    pub offdiag_norm: f64,
}

impl AdDiagnostic {
    pub fn delta_db(&self) -> f64 {
        10.0 * self.delta.log10()
    }
}

pub fn ad_ratio<T: ComplexField<RealField = f64>>(m: &DMatrix<T>) -> Result<AdDiagnostic> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(
            "almost-diagonal ratio needs a square matrix".into(),
        ));
    }
    let mut diag = 0.0;
    let mut off = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = m[(i, j)].clone().modulus_squared();
            if i == j {
                diag += v;
            } else {
                off += v;
            }
        }
    }
    if !(diag > 0.0) {
        return Err(Error::invalid("matrix has a zero diagonal"));
    }
    let (diag_norm, offdiag_norm) = (diag.sqrt(), off.sqrt());
    Ok(AdDiagnostic {
        delta: offdiag_norm / diag_norm,
        diag_norm,
        offdiag_norm,
    })
}

/// One row of a factor scan, magnitudes in dB (`20 log10` of the ratio).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorRow {
    pub n: usize,
    pub rx_db: f64,
    pub tx_db: f64,
}

/// RX factor `|a_uᴴ a_v|` and TX factor `|a_uᴴ F Fᴴ a_v| / max(G_u, G_v)` for
/// two directions `base` and `base + (separation, separation)`, over square
/// URAs of the given sizes. The beam grid is re-evaluated for every size.
pub fn factor_scan(
    base: AnglePair,
    separation: f64,
    sizes: &[usize],
    spacing_wavelengths: f64,
    lambda: f64,
    beams: &[AnglePair],
) -> Result<Vec<FactorRow>> {
    let other = AnglePair::new(base.theta + separation, base.phi + separation);
    let db = |x: f64| 20.0 * x.log10();
    let mut rows = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let geom = crate::geometry::make_square_ura(n, spacing_wavelengths * lambda)?;
        let au = steering_vector(&geom, base, lambda);
        let av = steering_vector(&geom, other, lambda);
        let rx = au.dotc(&av).norm() / au.norm_squared();
        let bf = beamformer(&geom, beams, lambda)?;
        let fu = bf.f.ad_mul(&au);
        let fv = bf.f.ad_mul(&av);
        let peak = fu.norm_squared().max(fv.norm_squared());
        let tx = if peak > 0.0 { fu.dotc(&fv).norm() / peak } else { 0.0 };
        rows.push(FactorRow {
            n,
            rx_db: db(rx),
            tx_db: db(tx),
        });
    }
    Ok(rows)
}

/// Inverse of a channel EFIM, with the usual condition screening.
pub fn crlb_matrix(efim: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    sym_inverse(efim, "channel EFIM")
}
