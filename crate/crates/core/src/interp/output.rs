//! Trace serialization: CSV with 17 significant digits, or JSON lines with
//! a trailing metadata object.

use std::io::{self, Write};

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use super::Trace;
use crate::state::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceFormat {
    #[default]
    Csv,
    Jsonl,
}

impl std::str::FromStr for TraceFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "csv" => Ok(TraceFormat::Csv),
            "jsonl" => Ok(TraceFormat::Jsonl),
            other => Err(format!("unknown format `{other}` (expected csv or jsonl)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum SinkError {
    #[error("write failed: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

/// `printf("%.17g", x)`: enough digits to round-trip any double.
pub fn format_g17(x: f64) -> String {
    const P: i32 = 17;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("exponent digits");
    if exp < -4 || exp >= P {
        let mant = strip_zeros(mant);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mant}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (P - 1 - exp) as usize, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Real(x) => format_g17(*x),
        Value::Int(n) => n.to_string(),
        Value::Bool(b) => b.to_string(),
        Value::Complex(z) => {
            let sign = if z.im.is_sign_negative() { '-' } else { '+' };
            format!("{}{sign}{}i", format_g17(z.re), format_g17(z.im.abs()))
        }
        other => serde_json::to_string(other).unwrap_or_default(),
    }
}

fn json_value(v: &Value) -> serde_json::Value {
    match v {
        Value::Real(x) if x.is_finite() => json!(x),
        Value::Real(x) => json!(format_g17(*x)),
        Value::Int(n) => json!(n),
        Value::Bool(b) => json!(b),
        other => serde_json::to_value(other).unwrap_or(serde_json::Value::Null),
    }
}

struct Counting<'a> {
    inner: &'a mut dyn Write,
    bytes: u64,
}

impl Write for Counting<'_> {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        let n = self.inner.write(buf)?;
        self.bytes += n as u64;
        Ok(n)
    }

    fn flush(&mut self) -> io::Result<()> {
        self.inner.flush()
    }
}

/// Writes `trace` to `sink` and returns the number of bytes written.
pub fn write_trace(trace: &Trace, format: TraceFormat, sink: &mut dyn Write) -> Result<u64, SinkError> {
    let mut out = Counting { inner: sink, bytes: 0 };
    match format {
        TraceFormat::Csv => {
            let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
            let mut header = vec!["step".to_string(), "time".to_string()];
            header.extend(trace.observables.iter().cloned());
            w.write_record(&header)?;
            for row in &trace.rows {
                let mut rec = vec![row.step.to_string(), format_g17(row.time)];
                rec.extend(row.values.iter().map(csv_cell));
                w.write_record(&rec)?;
            }
            w.flush()?;
        }
        TraceFormat::Jsonl => {
            for row in &trace.rows {
                let mut values = serde_json::Map::new();
                for (name, v) in trace.observables.iter().zip(&row.values) {
                    values.insert(name.clone(), json_value(v));
                }
                let mut obj = json!({ "step": row.step, "time": row.time, "values": values });
                if let Some(s) = &row.state {
                    obj["state"] = serde_json::to_value(s)?;
                }
                serde_json::to_writer(&mut out, &obj)?;
                out.write_all(b"\n")?;
            }
            let meta = json!({
                "metadata": true,
                "model": trace.model_name,
                "config": trace.config,
                "steps": trace.steps,
                "terminationReason": trace.termination_reason,
            });
            serde_json::to_writer(&mut out, &meta)?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;
    Ok(out.bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::{run, RunConfig};
    use crate::quantum::build_bundled;
    use std::collections::BTreeMap;

    #[test]
    fn g17_matches_c_printf() {
        let cases = [
            (0.1, "0.10000000000000001"),
            (1.0, "1"),
            (2.5, "2.5"),
            (-3.0, "-3"),
            (1e-7, "9.9999999999999995e-08"),
            (123456789.0, "123456789"),
            (1e17, "1e+17"),
            (1e16, "10000000000000000"),
            (0.0001, "0.0001"),
            (f64::NAN, "nan"),
            (f64::NEG_INFINITY, "-inf"),
        ];
        for (x, want) in cases {
            assert_eq!(format_g17(x), want, "{x:e}");
        }
    }

    #[test]
    fn g17_round_trips() {
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, -1.602e-19, f64::MAX, f64::MIN_POSITIVE] {
            assert_eq!(format_g17(x).parse::<f64>().unwrap(), x);
        }
    }

    fn counter_trace(steps: u64) -> crate::interp::Trace {
        let b = build_bundled("counter", &BTreeMap::new()).unwrap();
        let cfg = RunConfig {
            max_steps: steps,
            ..RunConfig::for_model(&b.model)
        };
        run(&b.model, &b.init, &cfg).unwrap()
    }

    #[test]
    fn csv_has_header_plus_one_line_per_row() {
        let t = counter_trace(2);
        let mut buf = Vec::new();
        let n = write_trace(&t, TraceFormat::Csv, &mut buf).unwrap();
        assert_eq!(n as usize, buf.len());
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "step,time,n\n0,0,0\n1,1,1\n2,2,2\n");
    }

    #[test]
    fn csv_without_observables_is_step_and_time() {
        let mut t = counter_trace(1);
        t.observables.clear();
        t.rows.iter_mut().for_each(|r| r.values.clear());
        t.rows.clear();
        let mut buf = Vec::new();
        write_trace(&t, TraceFormat::Csv, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "step,time\n");
    }

    #[test]
    fn jsonl_ends_with_metadata() {
        let t = counter_trace(3);
        let mut buf = Vec::new();
        write_trace(&t, TraceFormat::Jsonl, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), t.rows.len() + 1);
        let meta: serde_json::Value = serde_json::from_str(lines.last().unwrap()).unwrap();
        assert_eq!(meta["terminationReason"]["kind"], "MaxSteps");
    }
}
