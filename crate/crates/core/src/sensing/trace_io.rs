use super::heterodyne::TimeTrace;
use crate::error::{Error, Result};
use crate::io::fmt_f64;

const HEADER: &str = "sample_rate_hz,start_time_s,units";

pub fn trace_to_csv(trace: &TimeTrace) -> String {
    let mut out = String::with_capacity(trace.len() * 24 + 64);
    out.push_str(HEADER);
    out.push('\n');
    out.push_str(&format!("{},{},V\n", fmt_f64(trace.sample_rate()), fmt_f64(trace.start_time)));
    for v in &trace.samples {
        out.push_str(&fmt_f64(*v));
        out.push('\n');
    }
    out
}

pub fn trace_from_csv(text: &str) -> Result<TimeTrace> {
    let fail = |line: usize, message: String| Error::Format {
        what: "trace",
        line,
        message,
    };
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == HEADER => {}
        _ => return Err(fail(1, format!("expected header `{HEADER}`"))),
    }
    let (_, meta) = lines.next().ok_or_else(|| fail(2, "missing metadata line".into()))?;
    let fields: Vec<&str> = meta.split(',').map(str::trim).collect();
    if fields.len() != 3 {
        return Err(fail(2, "expected sample_rate_hz,start_time_s,units".into()));
    }
    let rate: f64 = fields[0]
        .parse()
        .map_err(|_| fail(2, format!("bad sample rate `{}`", fields[0])))?;
    let start: f64 = fields[1]
        .parse()
        .map_err(|_| fail(2, format!("bad start time `{}`", fields[1])))?;
    if fields[2] != "V" {
        return Err(fail(2, format!("unsupported units `{}`", fields[2])));
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(fail(2, "sample rate must be positive".into()));
    }
    let mut samples = Vec::new();
    for (k, line) in lines {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        samples.push(
            line.parse::<f64>()
                .map_err(|_| fail(k + 1, format!("bad sample `{line}`")))?,
        );
    }
    TimeTrace::new(samples, 1.0 / rate, start)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let t = TimeTrace::new(vec![1.5e-7, -3.25, 0.0, 1.0 / 3.0], 1e-5, 0.125).unwrap();
        let back = trace_from_csv(&trace_to_csv(&t)).unwrap();
        assert_eq!(back.samples, t.samples);
        assert_eq!(back.start_time, t.start_time);
        assert!((back.dt - t.dt).abs() < 1e-20);
    }

    #[test]
    fn bad_header_rejected() {
        assert!(trace_from_csv("t,v\n1,2\n").is_err());
        assert!(matches!(
            trace_from_csv("sample_rate_hz,start_time_s,units\n100,0,V\n1\nx\n"),
            Err(Error::Format { line: 4, .. })
        ));
    }
}
