//! Quantile tables along one configuration axis, for both link directions.

use mmwave_peb::bounds::scaling_fit;
use mmwave_peb::geometry::Orientation;
use rayon::prelude::*;

use crate::cdf::{cdf, Field};
use crate::config::{Axis, ConfigError, Direction, SweepConfig};
use crate::sweep::{grid_sweep_with, ArraySizes, Record};

pub const AXIS_QUANTILE: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisRow {
    pub value: f64,
    pub peb90_ul: f64,
    pub peb90_dl: f64,
    pub oeb90_ul: f64,
    pub oeb90_dl: f64,
}

/// Log-log slopes of the squared quantiles against the axis value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Slopes {
    pub speb_ul: f64,
    pub speb_dl: f64,
    pub soeb_ul: f64,
    pub soeb_dl: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxisTable {
    pub axis: Axis,
    pub rows: Vec<AxisRow>,
    pub slopes: Option<Slopes>,
}

/// Sizes and orientation for `direction` at axis value `v`.
pub fn axis_point(cfg: &SweepConfig, axis: Axis, direction: Direction, v: f64) -> (ArraySizes, Orientation) {
    let mut sizes = ArraySizes::from_config(cfg);
    let mut o = cfg.orientation.orientation();
    let n = v.round() as usize;
    match (axis, direction) {
        (Axis::None, _) => {}
        (Axis::Beams, _) => sizes.n_beams = n,
        (Axis::ReceiveElements, Direction::Downlink) | (Axis::TransmitElements, Direction::Uplink) => sizes.n_ue = n,
        (Axis::ReceiveElements, Direction::Uplink) | (Axis::TransmitElements, Direction::Downlink) => sizes.n_bs = n,
        (Axis::Orientation, _) => o = Orientation::from_degrees(v, v),
    }
    (sizes, o)
}

fn quantile_or_inf(records: &[Record], field: Field) -> f64 {
    cdf(records, field)
        .and_then(|c| c.quantile(AXIS_QUANTILE))
        .unwrap_or(f64::INFINITY)
}

pub fn axis_sweep(cfg: &SweepConfig) -> Result<AxisTable, ConfigError> {
    let axis = cfg.sweep.axis;
    let values: Vec<f64> = if axis == Axis::None {
        vec![0.0]
    } else {
        cfg.sweep.values.clone()
    };
    let jobs: Vec<(f64, Direction)> = values
        .iter()
        .flat_map(|v| [(*v, Direction::Uplink), (*v, Direction::Downlink)])
        .collect();
    let results: Vec<Result<(f64, f64), ConfigError>> = jobs
        .par_iter()
        .map(|(v, d)| {
            let (sizes, o) = axis_point(cfg, axis, *d, *v);
            let r = grid_sweep_with(cfg, *d, sizes, o)?;
            Ok((quantile_or_inf(&r, Field::Peb), quantile_or_inf(&r, Field::Oeb)))
        })
        .collect();
    let mut rows = Vec::with_capacity(values.len());
    for (k, v) in values.iter().enumerate() {
        let (peb_ul, oeb_ul) = results[2 * k].as_ref().map_err(clone_err)?;
        let (peb_dl, oeb_dl) = results[2 * k + 1].as_ref().map_err(clone_err)?;
        rows.push(AxisRow {
            value: *v,
            peb90_ul: *peb_ul,
            peb90_dl: *peb_dl,
            oeb90_ul: *oeb_ul,
            oeb90_dl: *oeb_dl,
        });
    }
    let slopes = match axis {
        Axis::ReceiveElements | Axis::TransmitElements if rows.len() >= 4 => {
            let fit = |f: fn(&AxisRow) -> f64| {
                let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.value, f(r).powi(2))).collect();
                scaling_fit(&pts).unwrap_or(f64::NAN)
            };
            Some(Slopes {
                speb_ul: fit(|r| r.peb90_ul),
                speb_dl: fit(|r| r.peb90_dl),
                soeb_ul: fit(|r| r.oeb90_ul),
                soeb_dl: fit(|r| r.oeb90_dl),
            })
        }
        _ => None,
    };
    Ok(AxisTable { axis, rows, slopes })
}

fn clone_err(e: &ConfigError) -> ConfigError {
    ConfigError::Invalid {
        key: "sweep".into(),
        message: e.to_string(),
    }
}
