//! Tidy CSV and JSON emission for result rows.
//!
//! Floats are written with 17 significant digits in scientific notation,
//! which round-trips every `f64`. Empty cells mark values a row does not
//! have: a check that does not apply, or metrics of a failed row.

use std::io::Write;

use super::config::ExperimentKind;
use super::run::ResultRow;
use crate::error::{Error, Result};

/// Formats a float with 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Column names for a kind, in emission order.
pub fn header(kind: ExperimentKind) -> Vec<&'static str> {
    let mut cols = vec![
        "experiment",
        "kind",
        "prior",
        "noise_var",
        "seed",
        "a",
        "rule",
        "a_hat",
    ];
    cols.extend_from_slice(kind.metric_names());
    cols.extend_from_slice(kind.flag_names());
    cols.push("error");
    cols
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Writes `rows`, all of one kind, as CSV. `meta`, when given, is written
/// first as a `# `-prefixed comment line.
pub fn write_csv<W: Write>(
    mut out: W,
    kind: ExperimentKind,
    rows: &[ResultRow],
    meta: Option<&str>,
) -> Result<()> {
    if let Some(m) = meta {
        writeln!(out, "# {m}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(kind)).map_err(csv_err)?;
    let n_metrics = kind.metric_names().len();
    let n_flags = kind.flag_names().len();
    for r in rows {
        let mut rec: Vec<String> = vec![
            r.experiment.clone(),
            r.kind.name().into(),
            r.prior.clone(),
            format_float(r.noise_var),
            r.seed.to_string(),
            format_float(r.a),
            r.rule.clone().unwrap_or_default(),
            r.a_hat.map(format_float).unwrap_or_default(),
        ];
        rec.extend((0..n_metrics).map(|i| {
            r.metrics
                .get(i)
                .map(|&v| format_float(v))
                .unwrap_or_default()
        }));
        rec.extend(
            (0..n_flags).map(|i| match r.flags.get(i).copied().flatten() {
                Some(b) => b.to_string(),
                None => String::new(),
            }),
        );
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `rows` as a pretty-printed JSON array.
pub fn write_json<W: Write>(mut out: W, rows: &[ResultRow]) -> Result<()> {
    serde_json::to_writer_pretty(&mut out, rows).map_err(|e| Error::Io(e.to_string()))?;
    writeln!(out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(error: Option<&str>) -> ResultRow {
        ResultRow {
            experiment: "t".into(),
            kind: ExperimentKind::Tradeoff,
            prior: "mixture(0.5,-1,0.5;0.5,1,0.5)".into(),
            noise_var: 1.0,
            seed: 3,
            a: 0.1,
            rule: None,
            a_hat: None,
            metrics: if error.is_some() {
                vec![]
            } else {
                vec![1.0, 0.5, 0.5, 1.0, 1e-17]
            },
            flags: if error.is_some() {
                vec![]
            } else {
                vec![Some(true)]
            },
            error: error.map(String::from),
        }
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_csv(
            &mut buf,
            ExperimentKind::Tradeoff,
            &[row(None), row(Some("boom"))],
            Some("meta"),
        )
        .unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "# meta");
        assert_eq!(lines[1], "experiment,kind,prior,noise_var,seed,a,rule,a_hat,rho,fisher_y,fisher_x_given_y,snr,residual,tradeoff_holds,error");
        assert_eq!(
            lines[2],
            "t,tradeoff,\"mixture(0.5,-1,0.5;0.5,1,0.5)\",1.0000000000000000e0,3,1.0000000000000001e-1,,,1.0000000000000000e0,5.0000000000000000e-1,5.0000000000000000e-1,1.0000000000000000e0,1.0000000000000001e-17,true,"
        );
        assert!(lines[3].ends_with(",,,,,,,boom"));
    }

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-300, -7.25e12] {
            assert_eq!(format_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_has_named_columns() {
        let mut buf = Vec::new();
        write_json(&mut buf, &[row(None)]).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v[0]["rho"], 1.0);
        assert_eq!(v[0]["tradeoff_holds"], true);
        assert!(v[0]["error"].is_null());
    }
}
