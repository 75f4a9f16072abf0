//! Brute-force references: FIMs from numerically differentiated received
//! signals integrated over frequency, and correlation integrals by quadrature.

use std::f64::consts::PI;
use std::sync::Arc;

use mmwave_peb::channel::{LinkBudget, LinkDirection, Path, PathKind, Scenario, System};
use mmwave_peb::geometry::{make_square_ura, AnglePair, ArrayGeometry, Orientation, PathGeometry, Vec3};
use mmwave_peb::signal::{beamformer, PulseKind, PulseSpec, WeffConvention};
use mmwave_peb::C64;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Quadrature and step settings of [`quadrature_fim`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOptions {
    /// Simpson intervals over the occupied band (rounded up to even).
    pub intervals: usize,
    /// Step for angles, radians.
    pub angle_step: f64,
    /// Delay step as a phase excursion at the band edge.
    pub delay_phase_step: f64,
    /// Gain step relative to `|β|`.
    pub gain_step: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            intervals: 20_000,
            angle_step: 1e-3,
            delay_phase_step: 1e-3,
            gain_step: 1e-3,
        }
    }
}

fn simpson_weights(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let x = (0..=n).map(|i| a + h * i as f64).collect();
    let w = (0..=n)
        .map(|i| {
            let c = if i == 0 || i == n {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * h / 3.0
        })
        .collect();
    (x, w)
}

/// Width of the flat spectrum a sinc pulse occupies under its convention.
fn occupied_width(pulse: &PulseSpec) -> Option<f64> {
    match pulse.kind {
        PulseKind::IdealSinc => Some(match pulse.convention {
            WeffConvention::Nominal => pulse.bandwidth,
            WeffConvention::Paper => 2.0 * pulse.bandwidth,
        }),
        PulseKind::SampledPsd(_) => None,
    }
}

fn response(geom: &ArrayGeometry, theta: f64, phi: f64, lambda: f64) -> DVector<C64> {
    let k = 2.0 * PI / lambda;
    let u = Vec3::new(phi.cos() * theta.sin(), phi.sin() * theta.sin(), theta.cos());
    let s = 1.0 / (geom.len() as f64).sqrt();
    DVector::from_iterator(
        geom.len(),
        (0..geom.len()).map(|n| C64::from_polar(s, -k * geom.element(n).dot(&u))),
    )
}

/// Noise-free received samples of one path over all beams, without the delay
/// phase: `β a_R (a_Tᴴ f_ℓ)` stacked over `ℓ`. `x = [θR, θT, φR, φT, βR, βI]`.
fn path_samples(sys: &System, x: [f64; 6]) -> DVector<C64> {
    let a_r = response(sys.rx_array(), x[0], x[2], sys.lambda);
    let a_t = response(sys.tx_array(), x[1], x[3], sys.lambda);
    let beta = C64::new(x[4], x[5]);
    let f = &sys.beamformer.f;
    let (nr, nb) = (a_r.len(), f.ncols());
    let mut out = DVector::zeros(nr * nb);
    for l in 0..nb {
        let c = beta * a_t.dotc(&f.column(l));
        for i in 0..nr {
            out[l * nr + i] = a_r[i] * c;
        }
    }
    out
}

fn five_point<T>(h: f64, f: impl Fn(f64) -> T) -> T
where
    T: std::ops::Sub<Output = T> + std::ops::Add<Output = T> + std::ops::Mul<C64, Output = T>,
{
    (f(-2.0 * h) - f(2.0 * h) + (f(h) - f(-h)) * C64::new(8.0, 0.0)) * C64::new(1.0 / (12.0 * h), 0.0)
}

/// FIM of the channel parameters, ordered block-major as
/// `[θR, θT, φR, φT, τ, βR, βI]` over the paths, from
/// `γ Re Σ_ℓ ∫ |P(f)|² (∂μ_ℓ/∂x_k)ᴴ (∂μ_ℓ/∂x_l) df`.
///
/// Only sinc pulses are supported; the derivative of each path's samples is
/// taken numerically, and the frequency integral by composite Simpson.
pub fn quadrature_fim(s: &Scenario, opts: OracleOptions) -> Option<DMatrix<f64>> {
    let sys = &s.system;
    let b = occupied_width(&sys.pulse)?;
    let m = s.n_paths();
    let taus = s.taus();
    // Each derivative is a sample vector times one of two scalar spectra per
    // path: the delay phase itself or its delay derivative.
    let mut vecs: Vec<Vec<(DVector<C64>, usize)>> = vec![Vec::new(); 7 * m];
    let h_tau = opts.delay_phase_step / (PI * b);
    for p in 0..m {
        let rx = s.rx_angles(p);
        let tx = s.tx_angles(p);
        let beta = s.paths[p].beta;
        let x0 = [rx.theta, tx.theta, rx.phi, tx.phi, beta.re, beta.im];
        let steps = [
            opts.angle_step,
            opts.angle_step,
            opts.angle_step,
            opts.angle_step,
            opts.gain_step * beta.norm(),
            opts.gain_step * beta.norm(),
        ];
        // (block position, index into x)
        for (block, k) in [(0, 0), (1, 1), (2, 2), (3, 3), (5, 4), (6, 5)] {
            let d = five_point(steps[k], |e| {
                let mut x = x0;
                x[k] += e;
                path_samples(sys, x)
            });
            vecs[block * m + p].push((d, 2 * p));
        }
        vecs[4 * m + p].push((path_samples(sys, x0), 2 * p + 1));
    }
    let (freqs, weights) = simpson_weights(opts.intervals, -b / 2.0, b / 2.0);
    let psd = 1.0 / b;
    let nf = 2 * m;
    let mut ints = DMatrix::<C64>::zeros(nf, nf);
    let mut g = vec![C64::new(0.0, 0.0); nf];
    for (f, w) in freqs.iter().zip(&weights) {
        let phase = |t: f64| C64::from_polar(1.0, -2.0 * PI * f * t);
        for p in 0..m {
            g[2 * p] = phase(taus[p]);
            g[2 * p + 1] = five_point(h_tau, |e| phase(taus[p] + e));
        }
        for i in 0..nf {
            for j in 0..nf {
                ints[(i, j)] += g[i].conj() * g[j] * (w * psd);
            }
        }
    }
    let n = 7 * m;
    let gamma = s.gamma();
    let mut j = DMatrix::zeros(n, n);
    for k in 0..n {
        for l in k..n {
            let mut acc = C64::new(0.0, 0.0);
            for (vk, gk) in &vecs[k] {
                for (vl, gl) in &vecs[l] {
                    acc += vk.dotc(vl) * ints[(*gk, *gl)];
                }
            }
            j[(k, l)] = gamma * acc.re;
            j[(l, k)] = j[(k, l)];
        }
    }
    Some(j)
}

/// `‖D(A - B)D‖_F / ‖DBD‖_F` with `D = diag(B)^{-1/2}`, which puts every
/// parameter on the same footing regardless of units.
pub fn scaled_relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let d: Vec<f64> = (0..b.nrows()).map(|i| 1.0 / b[(i, i)].abs().sqrt()).collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..b.nrows() {
        for j in 0..b.ncols() {
            let s = d[i] * d[j];
            num += ((a[(i, j)] - b[(i, j)]) * s).powi(2);
            den += (b[(i, j)] * s).powi(2);
        }
    }
    (num / den).sqrt()
}

/// Plain relative Frobenius error `‖A - B‖_F / ‖B‖_F`.
pub fn relative_error(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// `∫ (2πf)^order |P(f)|² exp(-j2πf dt) df` for a flat PSD of width `b`, by
/// composite Simpson with `intervals` panels.
pub fn quadrature_correlation(b: f64, order: i32, dt: f64, intervals: usize) -> C64 {
    let (freqs, weights) = simpson_weights(intervals, -b / 2.0, b / 2.0);
    freqs
        .iter()
        .zip(&weights)
        .map(|(f, w)| {
            let om = 2.0 * PI * f;
            C64::from_polar(om.powi(order) * w / b, -om * dt)
        })
        .sum()
}

/// A small random scenario with arbitrary (not necessarily physical) path
/// parameters: 1 or 2 paths, 4 or 16 elements per array, 1 to 6 beams.
pub fn random_scenario(rng: &mut ChaCha8Rng, direction: LinkDirection, pulse: PulseSpec) -> Scenario {
    let lambda = mmwave_peb::SPEED_OF_LIGHT / 38e9;
    let pick = |rng: &mut ChaCha8Rng| if rng.random_bool(0.5) { 4 } else { 16 };
    let n_bs = pick(rng);
    let n_ue = pick(rng);
    let bs = make_square_ura(n_bs, lambda / 2.0).expect("square size");
    let ue = make_square_ura(n_ue, lambda / 2.0).expect("square size");
    let angle = |rng: &mut ChaCha8Rng| AnglePair::new(rng.random_range(0.2..PI - 0.2), rng.random_range(-PI..PI));
    let n_b = rng.random_range(1..=6);
    let dirs: Vec<AnglePair> = (0..n_b).map(|_| angle(rng)).collect();
    let tx = match direction {
        LinkDirection::Uplink => &ue,
        LinkDirection::Downlink => &bs,
    };
    let f = beamformer(tx, &dirs, lambda).expect("beams");
    let system = Arc::new(System {
        bs,
        ue,
        lambda,
        pulse,
        budget: LinkBudget::from_dbm(0.0, -170.0, 16, 1.0 / 125e6),
        direction,
        beamformer: f,
    });
    let m = rng.random_range(1..=2);
    let paths = (0..m)
        .map(|i| {
            let g = PathGeometry {
                bs: angle(rng),
                ue: angle(rng),
                toa: rng.random_range(0.0..200e-9),
                d1: 10.0,
                d2: None,
                bs_degenerate: false,
                ue_degenerate: false,
            };
            let beta = C64::from_polar(rng.random_range(1e-6..1e-4), rng.random_range(-PI..PI));
            Path {
                kind: if i == 0 { PathKind::Los } else { PathKind::Scatterer },
                cluster: None,
                beta,
                geometry: g,
            }
        })
        .collect();
    Scenario::new(system, Vec3::new(10.0, 0.0, -10.0), Orientation::default(), paths).expect("distinct paths")
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use mmwave_peb::fim::exact_channel_fim;
    use mmwave_peb::signal::flat_correlations;

    #[test]
    fn simpson_is_exact_on_cubics() {
        let (x, w) = simpson_weights(4, -1.0, 2.0);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * (x * x * x - x)).sum();
        assert!((s - (4.0 - 2.0 - 0.25 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn correlation_quadrature_matches_closed_form() {
        let b = 125e6;
        for dt in [0.0, 3e-9, -40e-9] {
            let c = flat_correlations(b, dt);
            for order in 0..3 {
                let q = quadrature_correlation(b, order, dt, 4000);
                let scale = (PI * b).powi(order);
                assert!((q - c[order as usize]).norm() < 1e-9 * scale, "{order} {dt}");
            }
        }
    }

    #[test]
    fn oracle_agrees_on_one_scenario() {
        let mut rng = seeded_rng(3);
        let s = random_scenario(&mut rng, LinkDirection::Downlink, PulseSpec::ideal_sinc(125e6));
        let opts = OracleOptions {
            intervals: 4000,
            ..Default::default()
        };
        let q = quadrature_fim(&s, opts).unwrap();
        let e = exact_channel_fim(&s).unwrap().matrix;
        assert!(scaled_relative_error(&e, &q) < 1e-6);
    }
}
