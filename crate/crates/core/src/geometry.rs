//! Array geometries, steering vectors, the UE rotation and the spherical
//! relations between a pose and the angles/delays of each path.
//!
//! Conventions: elevation `theta` is measured from +z, azimuth `phi` from +x
//! towards +y with the full four-quadrant range `(-pi, pi]`. The BS sits at the
//! origin with zero orientation; UE angles are expressed in the rotated UE frame.

use std::f64::consts::PI;

use nalgebra::{DVector, Matrix3, Matrix3xX, Vector3};

use crate::{Error, Result, C64, SPEED_OF_LIGHT};

pub type Vec3 = Vector3<f64>;

/// Relative threshold on `hypot(x, y) / |v|` below which the azimuth is undefined.
pub const AZIMUTH_DEGENERACY_TOL: f64 = 1e-12;

/// Antenna element positions (meters) relative to the array centroid.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    elements: Matrix3xX<f64>,
}

impl ArrayGeometry {
    /// Builds an array from arbitrary positions, shifting them so that the
    /// centroid sits at the local origin.
    pub fn from_positions(positions: &[Vec3]) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::invalid("array needs at least one element"));
        }
        if positions.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::invalid("non-finite element position"));
        }
        let mean = positions.iter().sum::<Vec3>() / positions.len() as f64;
        let elements = Matrix3xX::from_columns(&positions.iter().map(|p| p - mean).collect::<Vec<_>>());
        Ok(Self { elements })
    }

    /// 3 x N matrix of element coordinates.
    pub fn elements(&self) -> &Matrix3xX<f64> {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.ncols() == 0
    }

    pub fn element(&self, n: usize) -> Vec3 {
        self.elements.column(n).into_owned()
    }

    /// Projection of every element onto `v`: the vector `Δᵀ v`.
    pub fn project(&self, v: &Vec3) -> DVector<f64> {
        self.elements.tr_mul(v)
    }
}

/// Uniform rectangular array in the xz-plane, `n_x * n_z` elements.
///
/// Element `k = ix * n_z + iz` sits at `((ix - (n_x-1)/2) d, 0, (iz - (n_z-1)/2) d)`
/// (x-major: the z index runs fastest).
pub fn make_ura(n_x: usize, n_z: usize, spacing: f64) -> Result<ArrayGeometry> {
    if n_x == 0 || n_z == 0 {
        return Err(Error::invalid("URA dimensions must be positive"));
    }
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::invalid("URA spacing must be positive"));
    }
    let cx = (n_x as f64 - 1.0) / 2.0;
    let cz = (n_z as f64 - 1.0) / 2.0;
    let mut cols = Vec::with_capacity(n_x * n_z);
    for ix in 0..n_x {
        for iz in 0..n_z {
            cols.push(Vec3::new((ix as f64 - cx) * spacing, 0.0, (iz as f64 - cz) * spacing));
        }
    }
    Ok(ArrayGeometry {
        elements: Matrix3xX::from_columns(&cols),
    })
}

/// Square URA with `n` elements; `n` must be a perfect square.
pub fn make_square_ura(n: usize, spacing: f64) -> Result<ArrayGeometry> {
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n || n == 0 {
        return Err(Error::invalid(format!("{n} elements is not a square URA")));
    }
    make_ura(side, side, spacing)
}

/// Uniform linear array on the x-axis, centered at the origin.
pub fn make_ula(n: usize, spacing: f64) -> Result<ArrayGeometry> {
    if n == 0 {
        return Err(Error::invalid("ULA needs at least one element"));
    }
    if !(spacing > 0.0) || !spacing.is_finite() {
        return Err(Error::invalid("ULA spacing must be positive"));
    }
    let c = (n as f64 - 1.0) / 2.0;
    let cols: Vec<Vec3> = (0..n).map(|k| Vec3::new((k as f64 - c) * spacing, 0.0, 0.0)).collect();
    Ok(ArrayGeometry {
        elements: Matrix3xX::from_columns(&cols),
    })
}

/// UE orientation: `theta0` about the rotated -x' axis, `phi0` about z.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Orientation {
    pub theta0: f64,
    pub phi0: f64,
}

impl Orientation {
    pub fn new(theta0: f64, phi0: f64) -> Self {
        Self { theta0, phi0 }
    }

    pub fn from_degrees(theta0: f64, phi0: f64) -> Self {
        Self::new(theta0.to_radians(), phi0.to_radians())
    }
}

/// Elevation (from +z) and azimuth of a direction.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AnglePair {
    pub theta: f64,
    pub phi: f64,
}

impl AnglePair {
    pub fn new(theta: f64, phi: f64) -> Self {
        Self { theta, phi }
    }

    pub fn from_degrees(theta: f64, phi: f64) -> Self {
        Self::new(theta.to_radians(), phi.to_radians())
    }

    /// Unit vector pointing in this direction.
    pub fn unit_vector(&self) -> Vec3 {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vec3::new(cp * st, sp * st, ct)
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Spherical angles of `v`. The boolean is `true` when the azimuth is undefined
/// (`v` on the z-axis); in that case `phi = 0`.
pub fn direction_angles(v: &Vec3) -> (AnglePair, bool) {
    let norm = v.norm();
    let rho = v.x.hypot(v.y);
    let theta = (v.z / norm).clamp(-1.0, 1.0).acos();
    if rho <= AZIMUTH_DEGENERACY_TOL * norm {
        (AnglePair::new(theta, 0.0), true)
    } else {
        (AnglePair::new(theta, v.y.atan2(v.x)), false)
    }
}

/// Wavenumber vector `(2π/λ)[cosφ sinθ, sinφ sinθ, cosθ]`.
pub fn wavenumber(angles: AnglePair, lambda: f64) -> Vec3 {
    angles.unit_vector() * (2.0 * PI / lambda)
}

/// `∂k/∂θ`.
pub fn wavenumber_dtheta(angles: AnglePair, lambda: f64) -> Vec3 {
    let (st, ct) = angles.theta.sin_cos();
    let (sp, cp) = angles.phi.sin_cos();
    Vec3::new(cp * ct, sp * ct, -st) * (2.0 * PI / lambda)
}

/// `∂k/∂φ`.
pub fn wavenumber_dphi(angles: AnglePair, lambda: f64) -> Vec3 {
    let st = angles.theta.sin();
    let (sp, cp) = angles.phi.sin_cos();
    Vec3::new(-sp * st, cp * st, 0.0) * (2.0 * PI / lambda)
}

/// Unit-norm array response `exp(-j Δᵀ k) / sqrt(N)`.
pub fn steering_vector(geom: &ArrayGeometry, angles: AnglePair, lambda: f64) -> DVector<C64> {
    let k = wavenumber(angles, lambda);
    let scale = 1.0 / (geom.len() as f64).sqrt();
    geom.project(&k).map(|phase| C64::from_polar(scale, -phase))
}

/// `R(θ0, φ0) = R_z(φ0) R_{-x'}(θ0)`.
pub fn rotation_matrix(o: Orientation) -> Matrix3<f64> {
    let (st, ct) = o.theta0.sin_cos();
    let (sp, cp) = o.phi0.sin_cos();
    Matrix3::new(
        cp,
        -sp * ct,
        -sp * st, //
        sp,
        cp * ct,
        cp * st, //
        0.0,
        -st,
        ct,
    )
}

/// `∂R/∂θ0`.
pub fn rotation_dtheta0(o: Orientation) -> Matrix3<f64> {
    let (st, ct) = o.theta0.sin_cos();
    let (sp, cp) = o.phi0.sin_cos();
    Matrix3::new(
        0.0,
        sp * st,
        -sp * ct, //
        0.0,
        -cp * st,
        cp * ct, //
        0.0,
        -ct,
        -st,
    )
}

/// `∂R/∂φ0`.
pub fn rotation_dphi0(o: Orientation) -> Matrix3<f64> {
    let (st, ct) = o.theta0.sin_cos();
    let (sp, cp) = o.phi0.sin_cos();
    Matrix3::new(
        -sp,
        -cp * ct,
        -cp * st, //
        cp,
        -sp * ct,
        -sp * st, //
        0.0,
        0.0,
        0.0,
    )
}

/// Angles and delay of one path, seen from both ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathGeometry {
    /// Departure/arrival direction at the BS (global frame).
    pub bs: AnglePair,
    /// Direction towards the previous hop, in the UE frame.
    pub ue: AnglePair,
    /// Time of arrival, seconds.
    pub toa: f64,
    /// LOS: BS-UE distance. NLOS: BS-cluster distance.
    pub d1: f64,
    /// NLOS only: cluster-UE distance.
    pub d2: Option<f64>,
    pub bs_degenerate: bool,
    pub ue_degenerate: bool,
}

impl PathGeometry {
    pub fn is_degenerate(&self) -> bool {
        self.bs_degenerate || self.ue_degenerate
    }

    /// Total travelled distance.
    pub fn length(&self) -> f64 {
        self.d1 + self.d2.unwrap_or(0.0)
    }
}

/// UE-frame vector `-Rᵀ v` of a global displacement `v` arriving at the UE.
pub fn to_ue_frame(v: &Vec3, o: Orientation) -> Vec3 {
    -(rotation_matrix(o).transpose() * v)
}

pub fn los_path_geometry(p: &Vec3, o: Orientation) -> Result<PathGeometry> {
    let d = p.norm();
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::invalid("UE position must be non-zero and finite"));
    }
    let (bs, bs_degenerate) = direction_angles(p);
    let (ue, ue_degenerate) = direction_angles(&to_ue_frame(p, o));
    Ok(PathGeometry {
        bs,
        ue,
        toa: d / SPEED_OF_LIGHT,
        d1: d,
        d2: None,
        bs_degenerate,
        ue_degenerate,
    })
}

/// Single-bounce path via cluster `q`: BS angles from `q`, UE angles from
/// `w = p - q`, delay `(|q| + |w|)/c`.
pub fn nlos_path_geometry(p: &Vec3, o: Orientation, q: &Vec3) -> Result<PathGeometry> {
    let w = p - q;
    let d1 = q.norm();
    let d2 = w.norm();
    if !(d1 > 0.0) || !(d2 > 0.0) || !d1.is_finite() || !d2.is_finite() {
        return Err(Error::invalid("cluster must differ from both BS and UE"));
    }
    let (bs, bs_degenerate) = direction_angles(q);
    let (ue, ue_degenerate) = direction_angles(&to_ue_frame(&w, o));
    Ok(PathGeometry {
        bs,
        ue,
        toa: (d1 + d2) / SPEED_OF_LIGHT,
        d1,
        d2: Some(d2),
        bs_degenerate,
        ue_degenerate,
    })
}
