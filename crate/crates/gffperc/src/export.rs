//! CSV writers for the command outputs.
//!
//! Cells are plain numbers or bare identifiers, so no quoting is needed.
//! Floats use the shortest representation that round-trips, which keeps
//! reruns byte-identical.

use crate::analytic::SeriesResult;
use crate::coarse::{BoxTag, Interface};
use crate::gff::FieldSample;
use crate::observables::{DecayCurve, ThetaCurve};
use crate::potential::{BoxCapacityFit, EquilibriumMeasure};
use crate::{Error, Result};
use std::io::{BufRead, Write};

pub const DECAY_COLUMNS: &[&str] = &["N", "count", "freq", "wilson_lo", "wilson_hi"];
pub const EXTENSION_COLUMNS: &[&str] = &["Re_z", "Im_z", "N_max", "Re_val", "Im_val", "stderr", "certificate_flag"];
pub const THETA_COLUMNS: &[&str] = &["side", "h", "theta", "stderr", "wilson_lo", "wilson_hi"];
pub const CAPACITY_COLUMNS: &[&str] = &["L", "cap", "cap_over_scale"];

fn coords(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("{prefix}{j}")).collect()
}

fn row<W: Write>(w: &mut W, cells: &[String]) -> Result<()> {
    writeln!(w, "{}", cells.join(","))?;
    Ok(())
}

fn header<W: Write>(w: &mut W, cols: &[&str]) -> Result<()> {
    writeln!(w, "{}", cols.join(","))?;
    Ok(())
}

macro_rules! cells {
    ($($x:expr),* $(,)?) => { [$($x.to_string()),*] };
}

pub fn write_decay<W: Write>(mut w: W, curve: &DecayCurve) -> Result<()> {
    header(&mut w, DECAY_COLUMNS)?;
    for r in &curve.rows {
        row(&mut w, &cells![r.n, r.count, r.freq, r.wilson_lo, r.wilson_hi])?;
    }
    Ok(())
}

pub fn write_extension<W: Write>(mut w: W, results: &[SeriesResult]) -> Result<()> {
    header(&mut w, EXTENSION_COLUMNS)?;
    for r in results {
        let v = r.value();
        row(&mut w, &cells![r.z.re, r.z.im, r.n_max, v.value.re, v.value.im, v.stderr, u8::from(r.certificate.available)])?;
    }
    Ok(())
}

pub fn write_theta<W: Write>(mut w: W, curves: &[ThetaCurve]) -> Result<()> {
    header(&mut w, THETA_COLUMNS)?;
    for c in curves {
        for p in &c.points {
            row(&mut w, &cells![c.side, p.h, p.theta, p.stderr, p.wilson_lo, p.wilson_hi])?;
        }
    }
    Ok(())
}

pub fn write_capacity<W: Write>(mut w: W, fit: &BoxCapacityFit, d: usize) -> Result<()> {
    header(&mut w, CAPACITY_COLUMNS)?;
    for (&l, &c) in fit.scales.iter().zip(&fit.capacities) {
        row(&mut w, &cells![l, c, c / (l as f64).powi(d as i32 - 2)])?;
    }
    Ok(())
}

/// Columns `x1..xd, weight`.
pub fn write_measure<W: Write>(mut w: W, m: &EquilibriumMeasure, d: usize) -> Result<()> {
    let mut cols = coords("x", d);
    cols.push("weight".into());
    row(&mut w, &cols)?;
    for (p, wt) in m.points.iter().zip(&m.weights) {
        let mut r: Vec<String> = p.iter().map(i64::to_string).collect();
        r.push(wt.to_string());
        row(&mut w, &r)?;
    }
    Ok(())
}

/// Columns `x1..xd, g` for canonical displacements `x1 ≥ … ≥ xd ≥ 0`.
pub fn write_green<W: Write>(mut w: W, entries: &[(Vec<u32>, f64)], d: usize) -> Result<()> {
    let mut cols = coords("x", d);
    cols.push("g".into());
    row(&mut w, &cols)?;
    for (k, v) in entries {
        let mut r: Vec<String> = k.iter().map(u32::to_string).collect();
        r.push(v.to_string());
        row(&mut w, &r)?;
    }
    Ok(())
}

/// Columns `x1..xd, phi` in row-major order of the domain.
pub fn write_field<W: Write>(mut w: W, phi: &FieldSample) -> Result<()> {
    let d = phi.domain.dim();
    let mut cols = coords("x", d);
    cols.push("phi".into());
    row(&mut w, &cols)?;
    let mut x = vec![0i64; d];
    for (i, v) in phi.values.iter().enumerate() {
        phi.domain.point_into(i, &mut x);
        let mut r: Vec<String> = x.iter().map(i64::to_string).collect();
        r.push(v.to_string());
        row(&mut w, &r)?;
    }
    Ok(())
}

/// Columns `scale, a1..ad, tag` with tag `B` or `VB`.
pub fn write_interface_boxes<W: Write>(mut w: W, iface: &Interface) -> Result<()> {
    let mut cols = vec!["scale".to_string()];
    cols.extend(coords("a", iface.schedule.d));
    cols.push("tag".into());
    row(&mut w, &cols)?;
    for b in &iface.boxes {
        let mut r = vec![b.scale.to_string()];
        r.extend(b.anchor.iter().map(i64::to_string));
        r.push(match b.tag {
            BoxTag::B => "B".into(),
            BoxTag::VB => "VB".into(),
        });
        row(&mut w, &r)?;
    }
    Ok(())
}

/// Reads a table written above, rejecting a header other than `expected`.
pub fn read_table<R: BufRead>(r: R, expected: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut lines = r.lines();
    let head = lines.next().ok_or_else(|| Error::Config("empty CSV".into()))??;
    let got: Vec<&str> = head.split(',').collect();
    if got != expected {
        return Err(Error::Config(format!("CSV header {got:?} does not match {expected:?}")));
    }
    let mut out = Vec::new();
    for line in lines {
        let line = line?;
        let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(str::parse).collect();
        let vals = vals.map_err(|e| Error::Config(format!("bad CSV row {line:?}: {e}")))?;
        if vals.len() != expected.len() {
            return Err(Error::Config(format!("row {line:?} has {} cells, expected {}", vals.len(), expected.len())));
        }
        out.push(vals);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observables::{DecayRow, ThetaPoint};

    #[test]
    fn decay_table_round_trips_through_the_reader() {
        let curve = DecayCurve {
            h: -1.0,
            samples: 10,
            rows: vec![
                DecayRow { n: 1, count: 3, freq: 0.3, stderr: 0.1, wilson_lo: 0.1, wilson_hi: 0.6 },
                DecayRow { n: 2, count: 0, freq: 0.0, stderr: 0.0, wilson_lo: 0.0, wilson_hi: 0.27753 },
            ],
            infinite: 7,
            overflow: 0,
            mc_fallbacks: 0,
            rate_fit: None,
            volume: vec![],
            volume_fit: None,
        };
        let mut buf = Vec::new();
        write_decay(&mut buf, &curve).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("N,count,freq,wilson_lo,wilson_hi\n1,3,0.3,0.1,0.6\n"));
        let t = read_table(buf.as_slice(), DECAY_COLUMNS).unwrap();
        assert_eq!(t, vec![vec![1.0, 3.0, 0.3, 0.1, 0.6], vec![2.0, 0.0, 0.0, 0.0, 0.27753]]);
        assert!(read_table(buf.as_slice(), THETA_COLUMNS).is_err());
    }

    #[test]
    fn theta_rows_follow_sides_then_heights() {
        let p = |h: f64, t: f64| ThetaPoint { h, theta: t, stderr: 0.0, wilson_lo: t, wilson_hi: t };
        let curves = vec![
            ThetaCurve { side: 9, samples: 1, points: vec![p(0.0, 1.0), p(1.0, 0.0)] },
            ThetaCurve { side: 11, samples: 1, points: vec![p(0.0, 1.0)] },
        ];
        let mut buf = Vec::new();
        write_theta(&mut buf, &curves).unwrap();
        let t = read_table(buf.as_slice(), THETA_COLUMNS).unwrap();
        assert_eq!(t.iter().map(|r| (r[0], r[1])).collect::<Vec<_>>(), vec![(9.0, 0.0), (9.0, 1.0), (11.0, 0.0)]);
    }

    #[test]
    fn malformed_rows_are_rejected() {
        assert!(read_table("N,count,freq,wilson_lo,wilson_hi\n1,2,3\n".as_bytes(), DECAY_COLUMNS).is_err());
        assert!(read_table("N,count,freq,wilson_lo,wilson_hi\n1,x,3,4,5\n".as_bytes(), DECAY_COLUMNS).is_err());
        assert!(read_table("".as_bytes(), DECAY_COLUMNS).is_err());
    }
}
