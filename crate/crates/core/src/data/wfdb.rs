//! WFDB header (`.hea`) and format-16 signal (`.dat`) reading and writing.
//!
//! Format 16 stores each sample as a 16-bit little-endian two's-complement
//! integer, frames interleaved by signal. Physical value is
//! `(raw − baseline) / gain` in the signal's units (mV for PTB-XL).

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Raw value WFDB reserves for "no sample".
pub const INVALID_SAMPLE: i16 = i16::MIN;

#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub file_name: String,
    pub format: u16,
    /// ADC units per physical unit.
    pub gain: f64,
    pub baseline: i32,
    pub units: String,
    pub adc_resolution: u32,
    pub adc_zero: i32,
    pub initial_value: i32,
    pub checksum: i32,
    pub block_size: u32,
    pub description: String,
}

impl SignalSpec {
    /// Format-16 signal in mV with zero baseline.
    pub fn format16(file_name: &str, gain: f64, description: &str) -> Self {
        SignalSpec {
            file_name: file_name.to_string(),
            format: 16,
            gain,
            baseline: 0,
            units: "mV".into(),
            adc_resolution: 16,
            adc_zero: 0,
            initial_value: 0,
            checksum: 0,
            block_size: 0,
            description: description.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WfdbHeader {
    pub record_name: String,
    pub n_signals: usize,
    pub sampling_rate: f64,
    pub n_samples: usize,
    pub signals: Vec<SignalSpec>,
}

impl WfdbHeader {
    pub fn lead_names(&self) -> Vec<&str> {
        self.signals.iter().map(|s| s.description.as_str()).collect()
    }

    /// Expected `.dat` size in bytes (`None` if it overflows).
    pub fn data_len(&self) -> Option<usize> {
        self.n_samples.checked_mul(self.n_signals)?.checked_mul(2)
    }
}

fn perr(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| perr(line, format!("invalid {what} {field:?}")))
}

/// Parses `gain[(baseline)][/units]`.
fn parse_gain(line: usize, field: &str) -> Result<(f64, Option<i32>, Option<String>)> {
    let (gb, units) = match field.split_once('/') {
        Some((g, u)) => (g, Some(u.to_string())),
        None => (field, None),
    };
    let (gain, baseline) = match gb.split_once('(') {
        Some((g, rest)) => {
            let b = rest
                .strip_suffix(')')
                .ok_or_else(|| perr(line, format!("unterminated baseline in {field:?}")))?;
            (g, Some(num::<i32>(line, b, "baseline")?))
        }
        None => (gb, None),
    };
    let gain: f64 = num(line, gain, "gain")?;
    Ok((gain, baseline, units))
}

fn parse_signal_line(line_no: usize, line: &str) -> Result<SignalSpec> {
    let mut fields = line.split_whitespace();
    let file_name = fields
        .next()
        .ok_or_else(|| perr(line_no, "empty signal specification"))?
        .to_string();
    let fmt_field = fields
        .next()
        .ok_or_else(|| perr(line_no, "signal specification lacks a storage format"))?;
    // Format may carry `xSPF`, `:skew` and `+offset` suffixes; only the base matters here.
    let base_fmt = fmt_field
        .split(|c| c == 'x' || c == ':' || c == '+')
        .next()
        .unwrap_or_default();
    let format: u16 = num(line_no, base_fmt, "storage format")?;
    if format != 16 {
        return Err(Error::UnsupportedFormat(format));
    }
    let (gain, baseline, units) = match fields.next() {
        Some(f) => parse_gain(line_no, f)?,
        None => (200.0, None, None),
    };
    // A WFDB gain of zero means "uncalibrated"; it cannot be turned into physical units.
    if !(gain.is_finite() && gain > 0.0) {
        return Err(perr(line_no, format!("gain must be positive, got {gain}")));
    }
    let adc_resolution = match fields.next() {
        Some(f) => num(line_no, f, "ADC resolution")?,
        None => 12,
    };
    let adc_zero = match fields.next() {
        Some(f) => num(line_no, f, "ADC zero")?,
        None => 0,
    };
    let initial_value = match fields.next() {
        Some(f) => num(line_no, f, "initial value")?,
        None => adc_zero,
    };
    let checksum = match fields.next() {
        Some(f) => num(line_no, f, "checksum")?,
        None => 0,
    };
    let block_size = match fields.next() {
        Some(f) => num(line_no, f, "block size")?,
        None => 0,
    };
    let description = fields.collect::<Vec<_>>().join(" ");
    Ok(SignalSpec {
        file_name,
        format,
        gain,
        baseline: baseline.unwrap_or(adc_zero),
        units: units.unwrap_or_else(|| "mV".into()),
        adc_resolution,
        adc_zero,
        initial_value,
        checksum,
        block_size,
        description,
    })
}

pub fn parse_wfdb_header(bytes: &[u8]) -> Result<WfdbHeader> {
    let text = std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        perr(line, "header is not valid text")
    })?;
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (rec_line, record) = lines.next().ok_or_else(|| perr(1, "empty header"))?;
    let mut fields = record.split_whitespace();
    let name_field = fields.next().ok_or_else(|| perr(rec_line, "missing record name"))?;
    if name_field.contains('/') {
        return Err(perr(rec_line, "multi-segment records are not supported"));
    }
    let n_signals: usize = num(
        rec_line,
        fields.next().ok_or_else(|| perr(rec_line, "missing signal count"))?,
        "signal count",
    )?;
    let sampling_rate = match fields.next() {
        Some(f) => {
            let base = f.split(['/', '(']).next().unwrap_or_default();
            num::<f64>(rec_line, base, "sampling frequency")?
        }
        None => 250.0,
    };
    if !(sampling_rate.is_finite() && sampling_rate > 0.0) {
        return Err(perr(rec_line, format!("sampling frequency must be positive, got {sampling_rate}")));
    }
    let n_samples: usize = match fields.next() {
        Some(f) => num(rec_line, f, "sample count")?,
        None => return Err(perr(rec_line, "missing sample count")),
    };

    let mut signals = Vec::with_capacity(n_signals.min(64));
    for _ in 0..n_signals {
        let (ln, l) = lines
            .next()
            .ok_or_else(|| perr(text.lines().count() + 1, format!("expected {n_signals} signal lines, found {}", signals.len())))?;
        signals.push(parse_signal_line(ln, l)?);
    }
    Ok(WfdbHeader {
        record_name: name_field.to_string(),
        n_signals,
        sampling_rate,
        n_samples,
        signals,
    })
}

pub fn write_wfdb_header(h: &WfdbHeader) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} {} {} {}", h.record_name, h.n_signals, h.sampling_rate, h.n_samples);
    for s in &h.signals {
        let _ = writeln!(
            out,
            "{} {} {}({})/{} {} {} {} {} {} {}",
            s.file_name,
            s.format,
            s.gain,
            s.baseline,
            s.units,
            s.adc_resolution,
            s.adc_zero,
            s.initial_value,
            s.checksum,
            s.block_size,
            s.description
        );
    }
    out
}

fn check_layout(bytes: &[u8], header: &WfdbHeader) -> Result<()> {
    if header.signals.len() != header.n_signals {
        return Err(Error::Validation(format!(
            "header declares {} signals but describes {}",
            header.n_signals,
            header.signals.len()
        )));
    }
    if let Some(s) = header.signals.iter().find(|s| s.format != 16) {
        return Err(Error::UnsupportedFormat(s.format));
    }
    let expected = header
        .data_len()
        .ok_or_else(|| Error::Validation("header sample count overflows".into()))?;
    if bytes.len() != expected {
        return Err(Error::Truncation {
            expected,
            actual: bytes.len(),
        });
    }
    Ok(())
}

/// Raw ADC samples, frame-major (`[n_samples × n_signals]`).
pub fn parse_raw_samples(bytes: &[u8], header: &WfdbHeader) -> Result<Vec<i16>> {
    check_layout(bytes, header)?;
    let n = header.n_signals.max(1);
    bytes
        .chunks_exact(2)
        .enumerate()
        .map(|(i, c)| {
            let v = i16::from_le_bytes([c[0], c[1]]);
            if v == INVALID_SAMPLE {
                Err(Error::InvalidSample {
                    frame: i / n,
                    signal: i % n,
                })
            } else {
                Ok(v)
            }
        })
        .collect()
}

/// Physical signal `[n_samples × n_signals]`, row-major, in the signal units.
pub fn parse_wfdb_signal(bytes: &[u8], header: &WfdbHeader) -> Result<Vec<f32>> {
    let raw = parse_raw_samples(bytes, header)?;
    let n = header.n_signals;
    Ok(raw
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let s = &header.signals[i % n];
            ((v as f64 - s.baseline as f64) / s.gain) as f32
        })
        .collect())
}

pub fn encode_format16(samples: &[i16]) -> Vec<u8> {
    samples.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Header for a 12-lead PTB-XL-style low-resolution record.
pub fn ptbxl_header(record_name: &str, n_samples: usize, gain: f64) -> WfdbHeader {
    const LEADS: [&str; 12] = ["I", "II", "III", "AVR", "AVL", "AVF", "V1", "V2", "V3", "V4", "V5", "V6"];
    let dat = format!("{record_name}.dat");
    WfdbHeader {
        record_name: record_name.to_string(),
        n_signals: 12,
        sampling_rate: 100.0,
        n_samples,
        signals: LEADS.iter().map(|l| SignalSpec::format16(&dat, gain, l)).collect(),
    }
}

/// Reads `<base>.hea` and `<base>.dat`.
pub fn read_record(base: &Path) -> Result<(WfdbHeader, Vec<f32>)> {
    let hea = base.with_extension("hea");
    let header = parse_wfdb_header(&std::fs::read(&hea).map_err(|e| Error::io(&hea, e))?)?;
    let dat = base.with_extension("dat");
    let bytes = std::fs::read(&dat).map_err(|e| Error::io(&dat, e))?;
    let signal = parse_wfdb_signal(&bytes, &header)?;
    Ok((header, signal))
}

/// Writes `<base>.hea` and `<base>.dat` from raw frame-major samples.
pub fn write_record(base: &Path, header: &WfdbHeader, raw: &[i16]) -> Result<()> {
    if raw.len() != header.n_samples * header.n_signals {
        return Err(Error::dim(format!(
            "{} raw samples for a {}×{} record",
            raw.len(),
            header.n_samples,
            header.n_signals
        )));
    }
    if let Some(dir) = base.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let hea = base.with_extension("hea");
    std::fs::write(&hea, write_wfdb_header(header)).map_err(|e| Error::io(&hea, e))?;
    let dat = base.with_extension("dat");
    std::fs::write(&dat, encode_format16(raw)).map_err(|e| Error::io(&dat, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PTBXL_STYLE: &str = "00001_lr 12 100 1000\n\
        00001_lr.dat 16 1000.0(0)/mV 16 0 -119 1508 0 I\n\
        00001_lr.dat 16 1000.0(0)/mV 16 0 -55 723 0 II\n\
        00001_lr.dat 16 1000.0(0)/mV 16 0 64 64758 0 III\n\
        00001_lr.dat 16 1000.0(0)/mV 16 0 86 64423 0 AVR\n\
        00001_lr.dat 16 1000.0(0)/mV 16 0 -91 1211 0 AVL\n\
        00001_lr.dat 16 1000.0(0)/mV 16 0 4 7 0 AVF\n\
        00001_lr.dat 16 1000.0(0)/mV 16 0 -69 63827 0 V1\n\
        00001_lr.dat 16 1000.0(0)/mV 16 0 -31 6999 0 V2\n\
        00001_lr.dat 16 1000.0(0)/mV 16 0 0 63759 0 V3\n\
        00001_lr.dat 16 1000.0(0)/mV 16 0 -26 61447 0 V4\n\
        00001_lr.dat 16 1000.0(0)/mV 16 0 -39 64979 0 V5\n\
        00001_lr.dat 16 1000.0(0)/mV 16 0 -79 832 0 V6\n";

    #[test]
    fn parses_ptbxl_layout() {
        let h = parse_wfdb_header(PTBXL_STYLE.as_bytes()).unwrap();
        assert_eq!((h.n_signals, h.sampling_rate, h.n_samples), (12, 100.0, 1000));
        assert_eq!(h.signals[0].gain, 1000.0);
        assert_eq!(h.signals[0].baseline, 0);
        assert_eq!(h.signals[0].initial_value, -119);
        assert_eq!(h.lead_names()[11], "V6");
    }

    #[test]
    fn header_round_trip() {
        let h = ptbxl_header("00042_lr", 1000, 1000.0);
        assert_eq!(parse_wfdb_header(write_wfdb_header(&h).as_bytes()).unwrap(), h);
    }

    #[test]
    fn header_errors() {
        assert!(matches!(parse_wfdb_header(b""), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_wfdb_header(b"rec 1 100 10\nrec.dat 212 200 12 0 0 0 0 I\n"), Err(Error::UnsupportedFormat(212))));
        assert!(matches!(parse_wfdb_header(b"rec x 100 10\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_wfdb_header(b"# c\nrec 2 100 10\nrec.dat 16 200 16 0 0 0 0 I\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_wfdb_header(b"rec 1 100 10\nrec.dat 16 abc 16 0 0 0 0 I\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_wfdb_header(b"rec 1 100 10\nrec.dat 16 0 16 0 0 0 0 I\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_wfdb_header(&[0xff, 0xfe]), Err(Error::Parse { .. })));
    }

    #[test]
    fn physical_units() {
        let mut h = ptbxl_header("r", 2, 1000.0);
        h.signals[1].baseline = 10;
        let mut raw = vec![0i16; 24];
        raw[0] = 1000;
        raw[1] = 1010;
        raw[12] = -500;
        let mv = parse_wfdb_signal(&encode_format16(&raw), &h).unwrap();
        assert_eq!(mv[0], 1.0);
        assert_eq!(mv[1], 1.0);
        assert_eq!(mv[12], -0.5);
        assert_eq!(mv[2], 0.0);
    }

    #[test]
    fn signal_errors() {
        let h = ptbxl_header("r", 2, 1000.0);
        let bytes = encode_format16(&[0; 24]);
        assert!(matches!(
            parse_wfdb_signal(&bytes[..47], &h),
            Err(Error::Truncation { expected: 48, actual: 47 })
        ));
        let mut raw = vec![0i16; 24];
        raw[13] = INVALID_SAMPLE;
        assert!(matches!(
            parse_wfdb_signal(&encode_format16(&raw), &h),
            Err(Error::InvalidSample { frame: 1, signal: 1 })
        ));
    }
}
