//! Plain-text trace files.
//!
//! ```text
//! # rssbound-trace
//! # version: 1
//! # sample_rate_hz: 10
//! # kind: uniform-quantized
//! # step_db: 1
//! # units: dB
//! # seed: 42
//! # num_samples: 300
//! index,value
//! 0,-53.5
//! ```
//!
//! Values use Rust's shortest round-trip formatting, so export followed by
//! import reproduces every sample bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::{RssTrace, TraceKind};

const MAGIC: &str = "# rssbound-trace";
const VERSION: u32 = 1;

pub fn render_trace(trace: &RssTrace) -> String {
    let mut s = String::new();
    let units = match trace.kind {
        TraceKind::OneBit => "symbols",
        _ => "dB",
    };
    writeln!(s, "{MAGIC}").unwrap();
    writeln!(s, "# version: {VERSION}").unwrap();
    writeln!(s, "# sample_rate_hz: {}", trace.acquisition.sample_rate).unwrap();
    writeln!(s, "# kind: {}", trace.kind.name()).unwrap();
    if let TraceKind::UniformQuantized { step } = trace.kind {
        writeln!(s, "# step_db: {step}").unwrap();
    }
    writeln!(s, "# units: {units}").unwrap();
    match trace.seed {
        Some(seed) => writeln!(s, "# seed: {seed}").unwrap(),
        None => writeln!(s, "# seed: none").unwrap(),
    }
    if let Some(v) = trace.noise_variance {
        writeln!(s, "# noise_variance_db2: {v}").unwrap();
    }
    writeln!(s, "# num_samples: {}", trace.len()).unwrap();
    s.push_str("index,value\n");
    for (i, v) in trace.samples.iter().enumerate() {
        writeln!(s, "{i},{v}").unwrap();
    }
    s
}

pub fn export_trace(trace: &RssTrace, path: &Path) -> Result<()> {
    std::fs::write(path, render_trace(trace)).map_err(|e| Error::io(path, e))
}

pub fn import_trace(path: &Path) -> Result<RssTrace> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_trace(&text, path)
}

pub fn parse_trace(text: &str, path: &Path) -> Result<RssTrace> {
    let err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        message: if line > 0 {
            format!("line {line}: {message}")
        } else {
            message
        },
    };
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    match lines.next() {
        Some((_, l)) if l.trim_end() == MAGIC => {}
        _ => return Err(err(1, format!("missing `{MAGIC}` header"))),
    }

    let mut header = BTreeMap::new();
    let mut column_line = None;
    for (n, l) in lines.by_ref() {
        if let Some(rest) = l.strip_prefix('#') {
            let (k, v) = rest
                .split_once(':')
                .ok_or_else(|| err(n, format!("malformed header line `{l}`")))?;
            header.insert(k.trim().to_string(), v.trim().to_string());
        } else {
            column_line = Some((n, l));
            break;
        }
    }
    match column_line {
        Some((_, l)) if l.trim() == "index,value" => {}
        Some((n, _)) => return Err(err(n, "expected column header `index,value`".into())),
        None => return Err(err(0, "missing column header".into())),
    }

    let get = |key: &str| {
        header
            .get(key)
            .ok_or_else(|| err(0, format!("header is missing `{key}`")))
    };
    let version: u32 = get("version")?
        .parse()
        .map_err(|_| err(0, "bad version".into()))?;
    if version != VERSION {
        return Err(err(0, format!("unsupported trace version {version}")));
    }
    let fs: f64 = get("sample_rate_hz")?
        .parse()
        .map_err(|_| err(0, "bad sample_rate_hz".into()))?;
    let n: usize = get("num_samples")?
        .parse()
        .map_err(|_| err(0, "bad num_samples".into()))?;
    let kind = match get("kind")?.as_str() {
        "continuous-power" => TraceKind::ContinuousPower,
        "one-bit" => TraceKind::OneBit,
        "uniform-quantized" => TraceKind::UniformQuantized {
            step: get("step_db")?
                .parse()
                .map_err(|_| err(0, "bad step_db".into()))?,
        },
        other => return Err(err(0, format!("unknown trace kind `{other}`"))),
    };
    let seed = match header.get("seed").map(String::as_str) {
        None | Some("none") => None,
        Some(s) => Some(s.parse().map_err(|_| err(0, format!("bad seed `{s}`")))?),
    };
    let noise_variance = match header.get("noise_variance_db2") {
        None => None,
        Some(s) => Some(s.parse().map_err(|_| err(0, "bad noise_variance_db2".into()))?),
    };

    let mut samples = Vec::with_capacity(n);
    for (line, l) in lines {
        if l.trim().is_empty() {
            continue;
        }
        let (i, v) = l
            .split_once(',')
            .ok_or_else(|| err(line, format!("expected `index,value`, got `{l}`")))?;
        let i: usize = i
            .trim()
            .parse()
            .map_err(|_| err(line, format!("non-numeric index `{i}`")))?;
        if i != samples.len() {
            return Err(err(line, format!("index {i} out of order, expected {}", samples.len())));
        }
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| err(line, format!("non-numeric value `{v}`")))?;
        samples.push(v);
    }
    if samples.len() != n {
        return Err(err(
            0,
            format!("header declares {n} samples but {} rows were found", samples.len()),
        ));
    }
    let mut trace = RssTrace::new(samples, fs, kind)?;
    trace.seed = seed;
    trace.noise_variance = noise_variance;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{quantize, synthesize_received_power, AcquisitionSpec, QuantizerSpec, SinusoidParams};

    fn synthetic() -> RssTrace {
        let p = SinusoidParams::with_rate_hz(0.1, -54.2, 0.25, 0.3, 0.4).unwrap();
        synthesize_received_power(&p, &AcquisitionSpec::new(10.0, 300).unwrap(), 42).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        for t in [
            synthetic(),
            quantize(&synthetic(), &QuantizerSpec::uniform(1.0, 0.0).unwrap()).unwrap(),
            quantize(&synthetic(), &QuantizerSpec::one_bit(-54.2)).unwrap(),
        ] {
            export_trace(&t, &path).unwrap();
            let back = import_trace(&path).unwrap();
            assert_eq!(back, t);
            for (a, b) in t.samples.iter().zip(&back.samples) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }

    #[test]
    fn truncated_file_reports_row_count() {
        let text = render_trace(&synthetic());
        let cut: String = text.lines().take(100).map(|l| format!("{l}\n")).collect();
        let e = parse_trace(&cut, Path::new("t.csv")).unwrap_err();
        assert!(e.to_string().contains("declares 300 samples"), "{e}");
    }

    #[test]
    fn one_bit_alphabet_checked_on_import() {
        let text = "# rssbound-trace\n# version: 1\n# sample_rate_hz: 10\n# kind: one-bit\n# units: symbols\n# num_samples: 2\nindex,value\n0,1\n1,0.5\n";
        let e = parse_trace(text, Path::new("t.csv")).unwrap_err();
        assert!(e.to_string().contains("0.5"), "{e}");
    }

    #[test]
    fn non_numeric_row() {
        let text = "# rssbound-trace\n# version: 1\n# sample_rate_hz: 10\n# kind: continuous-power\n# units: dB\n# num_samples: 2\nindex,value\n0,1\n1,abc\n";
        let e = parse_trace(text, Path::new("t.csv")).unwrap_err();
        assert!(e.to_string().contains("line 9"), "{e}");
    }
}
