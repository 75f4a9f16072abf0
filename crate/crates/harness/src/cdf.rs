//! Empirical CDFs over sweep records.

use crate::sweep::Record;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CdfError {
    #[error("no finite values to build a CDF from ({infinite} infinite)")]
    AllInfinite { infinite: usize },
    #[error("quantile level {0} outside [0, 1]")]
    Level(String),
}

/// Which record column a CDF is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Field {
    Peb,
    Oeb,
    PebApprox,
    OebApprox,
}

impl Field {
    pub fn of(self, r: &Record) -> f64 {
        match self {
            Field::Peb => r.peb,
            Field::Oeb => r.oeb_deg,
            Field::PebApprox => r.peb_approx,
            Field::OebApprox => r.oeb_approx_deg,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Field::Peb => "peb_m",
            Field::Oeb => "oeb_deg",
            Field::PebApprox => "peb_approx_m",
            Field::OebApprox => "oeb_approx_deg",
        }
    }
}

impl std::str::FromStr for Field {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "peb" | "peb_m" => Ok(Field::Peb),
            "oeb" | "oeb_deg" => Ok(Field::Oeb),
            "peb_approx" | "peb_approx_m" => Ok(Field::PebApprox),
            "oeb_approx" | "oeb_approx_deg" => Ok(Field::OebApprox),
            other => Err(format!("unknown field `{other}`")),
        }
    }
}

/// Sorted finite values; non-finite inputs are only counted.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfSeries {
    values: Vec<f64>,
    infinite: usize,
}

impl CdfSeries {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Result<Self, CdfError> {
        let mut finite = Vec::new();
        let mut infinite = 0;
        for v in values {
            if v.is_finite() {
                finite.push(v);
            } else {
                infinite += 1;
            }
        }
        if finite.is_empty() {
            return Err(CdfError::AllInfinite { infinite });
        }
        finite.sort_by(f64::total_cmp);
        Ok(Self {
            values: finite,
            infinite,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn infinite_count(&self) -> usize {
        self.infinite
    }

    /// Share of all inputs that were not finite.
    pub fn infinite_fraction(&self) -> f64 {
        self.infinite as f64 / (self.infinite + self.values.len()) as f64
    }

    /// Linear interpolation between order statistics at `h = (n - 1) q`.
    pub fn quantile(&self, q: f64) -> Result<f64, CdfError> {
        if !(0.0..=1.0).contains(&q) {
            return Err(CdfError::Level(q.to_string()));
        }
        let n = self.values.len();
        let h = (n - 1) as f64 * q;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        let t = h - lo as f64;
        Ok(self.values[lo] + t * (self.values[hi] - self.values[lo]))
    }

    /// `(value, level)` pairs with level `(i + 1) / n`.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let n = self.values.len() as f64;
        self.values
            .iter()
            .enumerate()
            .map(|(i, v)| (*v, (i + 1) as f64 / n))
            .collect()
    }
}

pub fn cdf(records: &[Record], field: Field) -> Result<CdfSeries, CdfError> {
    CdfSeries::from_values(
        records
            .iter()
            .map(|r| if r.is_finite() { field.of(r) } else { f64::INFINITY }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn interpolation_convention() {
        let c = CdfSeries::from_values([4.0, 2.0, 1.0, 3.0]).unwrap();
        assert_eq!(c.quantile(0.5).unwrap(), 2.5);
        assert_eq!(c.quantile(0.0).unwrap(), 1.0);
        assert_eq!(c.quantile(1.0).unwrap(), 4.0);
        assert!(c.quantile(1.5).is_err());
    }

    #[test]
    fn single_value() {
        let c = CdfSeries::from_values([7.0]).unwrap();
        for q in [0.0, 0.3, 0.9, 1.0] {
            assert_eq!(c.quantile(q).unwrap(), 7.0);
        }
    }

    #[test]
    fn infinite_values_are_counted() {
        let c = CdfSeries::from_values([1.0, f64::INFINITY, 2.0, f64::NAN]).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.infinite_count(), 2);
        assert_eq!(c.infinite_fraction(), 0.5);
        assert_eq!(
            CdfSeries::from_values([f64::INFINITY]).unwrap_err(),
            CdfError::AllInfinite { infinite: 1 }
        );
    }

    proptest! {
        #[test]
        fn quantiles_monotone(v in proptest::collection::vec(-1e3..1e3f64, 1..50), a in 0.0..1.0f64, b in 0.0..1.0f64) {
            let c = CdfSeries::from_values(v).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(c.quantile(lo).unwrap() <= c.quantile(hi).unwrap());
            let pts = c.points();
            prop_assert!(pts.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 < w[1].1));
        }
    }
}
