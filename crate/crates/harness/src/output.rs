//! CSV emission with `#` metadata lines.

use std::io::Write;
use std::path::Path;

use crate::axis::AxisTable;
use crate::cdf::CdfSeries;
use crate::config::SweepConfig;
use crate::sweep::Record;

pub const TOOL_VERSION: &str = concat!("peb ", env!("CARGO_PKG_VERSION"));

pub const RECORD_COLUMNS: [&str; 10] = [
    "x",
    "y",
    "z",
    "M",
    "snr_db",
    "peb_m",
    "oeb_deg",
    "peb_approx_m",
    "oeb_approx_deg",
    "flag",
];
pub const CDF_COLUMNS: [&str; 2] = ["value", "cdf"];
pub const AXIS_COLUMNS: [&str; 5] = ["axis_value", "peb90_ul", "peb90_dl", "oeb90_ul", "oeb90_dl"];

/// Metadata lines; the first one carries the tool version.
pub fn metadata(cfg: &SweepConfig, extra: &[(&str, String)]) -> Vec<String> {
    let mut lines = vec![
        format!("# tool: {TOOL_VERSION}"),
        format!("# seed: {}", cfg.seed),
        format!("# config_sha256: {}", cfg.hash()),
        format!("# direction: {}", cfg.direction.label()),
        format!("# scenario: {}", cfg.scenario),
    ];
    for (k, v) in extra {
        lines.push(format!("# {k}: {v}"));
    }
    lines
}

fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x}")
    }
}

fn write_table<W: Write>(mut w: W, meta: &[String], header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
    for line in meta {
        writeln!(w, "{line}")?;
    }
    let mut csv = csv::Writer::from_writer(w);
    csv.write_record(header)?;
    for r in rows {
        csv.write_record(r)?;
    }
    csv.flush()?;
    Ok(())
}

pub fn write_records<W: Write>(w: W, meta: &[String], records: &[Record]) -> std::io::Result<()> {
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            vec![
                num(r.position.x),
                num(r.position.y),
                num(r.position.z),
                r.n_paths.to_string(),
                num(r.snr_db),
                num(r.peb),
                num(r.oeb_deg),
                num(r.peb_approx),
                num(r.oeb_approx_deg),
                r.flag.label().to_string(),
            ]
        })
        .collect();
    write_table(w, meta, &RECORD_COLUMNS, &rows)
}

pub fn write_cdf<W: Write>(w: W, meta: &[String], series: &CdfSeries) -> std::io::Result<()> {
    let rows: Vec<Vec<String>> = series.points().iter().map(|(v, q)| vec![num(*v), num(*q)]).collect();
    write_table(w, meta, &CDF_COLUMNS, &rows)
}

pub fn write_axis<W: Write>(w: W, meta: &[String], table: &AxisTable) -> std::io::Result<()> {
    let rows: Vec<Vec<String>> = table
        .rows
        .iter()
        .map(|r| {
            vec![
                num(r.value),
                num(r.peb90_ul),
                num(r.peb90_dl),
                num(r.oeb90_ul),
                num(r.oeb90_dl),
            ]
        })
        .collect();
    write_table(w, meta, &AXIS_COLUMNS, &rows)
}

/// Opens `path` for writing, or stdout when `path` is `None` or `-`.
pub fn sink(path: Option<&Path>) -> std::io::Result<Box<dyn Write>> {
    match path {
        Some(p) if p != Path::new("-") => Ok(Box::new(std::io::BufWriter::new(std::fs::File::create(p)?))),
        _ => Ok(Box::new(std::io::stdout().lock())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sweep::RecordFlag;
    use mmwave_peb::geometry::Vec3;

    #[test]
    fn record_layout() {
        let cfg = SweepConfig::default();
        let r = Record {
            position: Vec3::new(1.0, 2.0, -10.0),
            n_paths: 1,
            snr_db: 40.5,
            peb: 0.25,
            oeb_deg: 0.5,
            peb_approx: 0.25,
            oeb_approx_deg: 0.5,
            flag: RecordFlag::Ok,
        };
        let mut bad = r;
        bad.peb = f64::INFINITY;
        bad.flag = RecordFlag::Singular;
        let mut buf = Vec::new();
        write_records(&mut buf, &metadata(&cfg, &[]), &[r, bad]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0].starts_with("# tool: peb"));
        assert!(lines[2].starts_with("# config_sha256: "));
        assert_eq!(
            lines[5],
            "x,y,z,M,snr_db,peb_m,oeb_deg,peb_approx_m,oeb_approx_deg,flag"
        );
        assert_eq!(lines[6], "1,2,-10,1,40.5,0.25,0.5,0.25,0.5,ok");
        assert!(lines[7].contains(",inf,") && lines[7].ends_with("singular"));
    }

    #[test]
    fn cdf_layout() {
        let s = CdfSeries::from_values([2.0, 1.0]).unwrap();
        let mut buf = Vec::new();
        write_cdf(&mut buf, &[], &s).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "value,cdf\n1,0.5\n2,1\n");
    }
}
