//! Touchstone v1 and CSV ingestion of tabulated S-parameter data.
//!
//! Only v1 files are accepted (v2 keyword lines are rejected, not
//! mis-parsed) and only S-parameters; Y/Z/G/H parameter types are
//! refused with an error naming the offending line. Frequencies are
//! stored internally in Hz and values in rectangular complex form
//! regardless of the file's unit and format.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Complex value encoding of a Touchstone data column pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ValueFormat {
    /// Real and imaginary part.
    Ri,
    /// Linear magnitude and angle in degrees.
    Ma,
    /// Magnitude in dB (20·log10) and angle in degrees.
    Db,
}

impl ValueFormat {
    fn decode(self, first: f64, second: f64) -> Complex64 {
        match self {
            ValueFormat::Ri => Complex64::new(first, second),
            ValueFormat::Ma => Complex64::from_polar(first, second.to_radians()),
            ValueFormat::Db => Complex64::from_polar(10f64.powf(first / 20.0), second.to_radians()),
        }
    }

    fn encode(self, value: Complex64) -> (f64, f64) {
        match self {
            ValueFormat::Ri => (value.re, value.im),
            ValueFormat::Ma => (value.norm(), value.arg().to_degrees()),
            ValueFormat::Db => (20.0 * value.norm().log10(), value.arg().to_degrees()),
        }
    }

    fn label(self) -> &'static str {
        match self {
            ValueFormat::Ri => "RI",
            ValueFormat::Ma => "MA",
            ValueFormat::Db => "DB",
        }
    }
}

/// Frequency unit of a Touchstone option line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FreqUnit {
    Hz,
    KHz,
    MHz,
    GHz,
}

impl FreqUnit {
    /// Multiplier converting a value in this unit to Hz.
    pub fn scale(self) -> f64 {
        match self {
            FreqUnit::Hz => 1.0,
            FreqUnit::KHz => 1e3,
            FreqUnit::MHz => 1e6,
            FreqUnit::GHz => 1e9,
        }
    }

    fn label(self) -> &'static str {
        match self {
            FreqUnit::Hz => "HZ",
            FreqUnit::KHz => "KHZ",
            FreqUnit::MHz => "MHZ",
            FreqUnit::GHz => "GHZ",
        }
    }
}

/// Tabulated P-port passband S-parameters on an ascending frequency grid.
///
/// Construction validates the grid (non-empty, strictly increasing,
/// positive, finite), the matrices (square, uniform port count, finite
/// entries) and the reference impedance. Instances are immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkData {
    freqs_hz: Vec<f64>,
    s: Vec<DMatrix<Complex64>>,
    z_ref_ohm: f64,
}

impl NetworkData {
    pub fn new(freqs_hz: Vec<f64>, s: Vec<DMatrix<Complex64>>, z_ref_ohm: f64) -> Result<Self> {
        if freqs_hz.is_empty() {
            return Err(Error::validation(
                "network must contain at least one frequency point",
            ));
        }
        if freqs_hz.len() != s.len() {
            return Err(Error::validation(format!(
                "frequency count {} does not match S-matrix count {}",
                freqs_hz.len(),
                s.len()
            )));
        }
        for (i, &f) in freqs_hz.iter().enumerate() {
            if !f.is_finite() || f <= 0.0 {
                return Err(Error::validation(format!(
                    "frequency {f} at index {i} is not strictly positive"
                )));
            }
            if i > 0 && f <= freqs_hz[i - 1] {
                return Err(Error::validation(format!(
                    "frequencies must be strictly increasing: {f} at index {i} follows {}",
                    freqs_hz[i - 1]
                )));
            }
        }
        let ports = s[0].nrows();
        if ports == 0 {
            return Err(Error::validation("port count must be positive"));
        }
        for (i, m) in s.iter().enumerate() {
            if m.nrows() != ports || m.ncols() != ports {
                return Err(Error::validation(format!(
                    "S matrix at index {i} is {}x{}, expected {ports}x{ports}",
                    m.nrows(),
                    m.ncols()
                )));
            }
            if m.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
                return Err(Error::validation(format!(
                    "non-finite S value at frequency index {i}"
                )));
            }
        }
        if !z_ref_ohm.is_finite() || z_ref_ohm <= 0.0 {
            return Err(Error::validation(format!(
                "reference impedance {z_ref_ohm} must be positive and finite"
            )));
        }
        Ok(NetworkData {
            freqs_hz,
            s,
            z_ref_ohm,
        })
    }

    pub fn len(&self) -> usize {
        self.freqs_hz.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn port_count(&self) -> usize {
        self.s[0].nrows()
    }

    pub fn freqs_hz(&self) -> &[f64] {
        &self.freqs_hz
    }

    pub fn s_matrices(&self) -> &[DMatrix<Complex64>] {
        &self.s
    }

    pub fn z_ref_ohm(&self) -> f64 {
        self.z_ref_ohm
    }

    pub fn f_min_hz(&self) -> f64 {
        self.freqs_hz[0]
    }

    pub fn f_max_hz(&self) -> f64 {
        *self.freqs_hz.last().unwrap()
    }
}

#[derive(Debug, Clone, Copy)]
struct OptionLine {
    unit: FreqUnit,
    format: ValueFormat,
    z_ref_ohm: f64,
}

impl Default for OptionLine {
    fn default() -> Self {
        // Touchstone v1 default: # GHZ S MA R 50
        OptionLine {
            unit: FreqUnit::GHz,
            format: ValueFormat::Ma,
            z_ref_ohm: 50.0,
        }
    }
}

fn parse_option_line(rest: &str, line_no: usize) -> Result<OptionLine> {
    let mut opt = OptionLine::default();
    let mut tokens = rest.split_whitespace();
    while let Some(tok) = tokens.next() {
        match tok.to_ascii_uppercase().as_str() {
            "HZ" => opt.unit = FreqUnit::Hz,
            "KHZ" => opt.unit = FreqUnit::KHz,
            "MHZ" => opt.unit = FreqUnit::MHz,
            "GHZ" => opt.unit = FreqUnit::GHz,
            "RI" => opt.format = ValueFormat::Ri,
            "MA" => opt.format = ValueFormat::Ma,
            "DB" => opt.format = ValueFormat::Db,
            "S" => {}
            p @ ("Y" | "Z" | "G" | "H") => {
                return Err(Error::parse(
                    line_no,
                    format!("unsupported parameter type `{p}` (only S-parameters are accepted)"),
                ));
            }
            "R" => {
                let value = tokens.next().ok_or_else(|| {
                    Error::parse(line_no, "option line `R` is missing an impedance value")
                })?;
                let z: f64 = value.parse().map_err(|_| {
                    Error::parse(line_no, format!("invalid reference impedance `{value}`"))
                })?;
                if !z.is_finite() || z <= 0.0 {
                    return Err(Error::parse(
                        line_no,
                        format!("reference impedance {z} must be positive"),
                    ));
                }
                opt.z_ref_ohm = z;
            }
            other => {
                return Err(Error::parse(
                    line_no,
                    format!("malformed option line: unexpected token `{other}`"),
                ));
            }
        }
    }
    Ok(opt)
}

/// Position of the `idx`-th value pair within the S matrix.
///
/// Touchstone v1 stores two-port data as S11 S21 S12 S22; every other
/// port count is row-major.
fn pair_position(idx: usize, ports: usize) -> (usize, usize) {
    if ports == 2 {
        [(0, 0), (1, 0), (0, 1), (1, 1)][idx]
    } else {
        (idx / ports, idx % ports)
    }
}

/// Parse Touchstone v1 text into validated [`NetworkData`].
///
/// The port count cannot be inferred from wrapped data lines, so it
/// must be supplied: callers reading from a file derive it from the
/// `.sNp` extension (see [`ports_from_extension`]) and pass it here.
pub fn parse_touchstone(text: &str, port_count_hint: Option<usize>) -> Result<NetworkData> {
    let ports = port_count_hint.ok_or_else(|| {
        Error::validation(
            "port count is required to parse Touchstone data; derive it from the .sNp file \
             extension or supply it explicitly",
        )
    })?;
    if ports == 0 {
        return Err(Error::validation("port count must be positive"));
    }

    let mut option: Option<OptionLine> = None;
    let mut seen_data = false;
    let mut values: Vec<f64> = Vec::new();
    let mut value_lines: Vec<usize> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let body = match raw.find('!') {
            Some(pos) => &raw[..pos],
            None => raw,
        }
        .trim();
        if body.is_empty() {
            continue;
        }
        if body.starts_with('[') {
            return Err(Error::parse(
                line_no,
                format!("Touchstone v2 keyword `{body}` is not supported (v1 only)"),
            ));
        }
        if let Some(rest) = body.strip_prefix('#') {
            if seen_data {
                return Err(Error::parse(line_no, "option line appears after data"));
            }
            if option.is_some() {
                return Err(Error::parse(line_no, "duplicate option line"));
            }
            option = Some(parse_option_line(rest, line_no)?);
            continue;
        }
        seen_data = true;
        for tok in body.split_whitespace() {
            // finiteness is checked on decoded values: -inf dB is the
            // DB encoding of a zero magnitude and must pass through
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::parse(line_no, format!("invalid number `{tok}`")))?;
            values.push(v);
            value_lines.push(line_no);
        }
    }

    let opt = option.unwrap_or_default();
    if values.is_empty() {
        return Err(Error::validation("no data records found"));
    }
    let record = 1 + 2 * ports * ports;
    if !values.len().is_multiple_of(record) {
        let first_bad = value_lines[values.len() - values.len() % record];
        return Err(Error::parse(
            first_bad,
            format!(
                "incomplete record: {ports}-port data needs {record} values per frequency, \
                 {} values left over",
                values.len() % record
            ),
        ));
    }

    let count = values.len() / record;
    let mut freqs = Vec::with_capacity(count);
    let mut mats = Vec::with_capacity(count);
    for (chunk, lines) in values.chunks(record).zip(value_lines.chunks(record)) {
        let f_hz = chunk[0] * opt.unit.scale();
        if !f_hz.is_finite() {
            return Err(Error::parse(
                lines[0],
                format!("non-finite frequency `{}`", chunk[0]),
            ));
        }
        if let Some(&prev) = freqs.last() {
            if f_hz <= prev {
                return Err(Error::parse(
                    lines[0],
                    format!("non-monotonic frequency: {f_hz} Hz follows {prev} Hz"),
                ));
            }
        }
        freqs.push(f_hz);
        let mut m = DMatrix::zeros(ports, ports);
        for (pair_idx, pair) in chunk[1..].chunks_exact(2).enumerate() {
            let (i, j) = pair_position(pair_idx, ports);
            let value = opt.format.decode(pair[0], pair[1]);
            if !value.re.is_finite() || !value.im.is_finite() {
                return Err(Error::parse(
                    lines[1 + 2 * pair_idx],
                    format!("non-finite S value ({}, {})", pair[0], pair[1]),
                ));
            }
            m[(i, j)] = value;
        }
        mats.push(m);
    }
    NetworkData::new(freqs, mats, opt.z_ref_ohm)
}

/// Port count implied by a `.sNp` file extension, if any.
pub fn ports_from_extension(path: &std::path::Path) -> Option<usize> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    let digits = ext.strip_prefix('s')?.strip_suffix('p')?;
    digits.parse().ok().filter(|&n| n > 0)
}

/// Render [`NetworkData`] as Touchstone v1 text.
///
/// Values are printed with `f64`'s shortest round-trippable
/// representation, so an RI round-trip reproduces the network exactly.
pub fn write_touchstone(net: &NetworkData, format: ValueFormat, unit: FreqUnit) -> String {
    let ports = net.port_count();
    let mut out = String::new();
    let _ = writeln!(out, "! {ports}-port S-parameter data, {} points", net.len());
    let _ = writeln!(
        out,
        "# {} S {} R {}",
        unit.label(),
        format.label(),
        net.z_ref_ohm()
    );
    for (f_hz, m) in net.freqs_hz().iter().zip(net.s_matrices()) {
        let _ = write!(out, "{}", f_hz / unit.scale());
        if ports <= 2 {
            for pair_idx in 0..ports * ports {
                let (i, j) = pair_position(pair_idx, ports);
                let (a, b) = format.encode(m[(i, j)]);
                let _ = write!(out, " {a} {b}");
            }
            out.push('\n');
        } else {
            // one matrix row per line, frequency on the first
            for i in 0..ports {
                for j in 0..ports {
                    let (a, b) = format.encode(m[(i, j)]);
                    let _ = write!(out, " {a} {b}");
                }
                out.push('\n');
                if i < ports - 1 {
                    out.push(' ');
                }
            }
        }
    }
    out
}

fn csv_headers(ports: usize) -> Vec<String> {
    let mut headers = vec!["freq_hz".to_string()];
    for i in 1..=ports {
        for j in 1..=ports {
            headers.push(format!("re_s{i}{j}"));
            headers.push(format!("im_s{i}{j}"));
        }
    }
    headers
}

fn csv_line(err: &csv::Error) -> usize {
    err.position().map_or(0, |p| p.line() as usize)
}

/// Parse the CSV interchange format (`freq_hz,re_s11,im_s11,...`,
/// row-major port pairs) into validated [`NetworkData`].
///
/// The reference impedance is not part of the CSV schema; the caller
/// supplies it (50 Ω is the conventional choice).
pub fn read_csv(text: &str, z_ref_ohm: f64) -> Result<NetworkData> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| Error::parse(csv_line(&e), e.to_string()))?
        .clone();

    let pairs = (headers.len().saturating_sub(1)) / 2;
    let ports = (pairs as f64).sqrt().round() as usize;
    if headers.is_empty() || ports == 0 || 1 + 2 * ports * ports != headers.len() {
        return Err(Error::parse(
            1,
            format!(
                "header must be `freq_hz` followed by re/im column pairs for a square port \
                 matrix, found {} columns",
                headers.len()
            ),
        ));
    }
    let expected = csv_headers(ports);
    for (found, want) in headers.iter().zip(&expected) {
        if found != want {
            return Err(Error::parse(
                1,
                format!("missing or misnamed column: expected `{want}`, found `{found}`"),
            ));
        }
    }

    let mut freqs = Vec::new();
    let mut mats = Vec::new();
    for (row_idx, record) in reader.records().enumerate() {
        let line_no = row_idx + 2;
        let record = record.map_err(|e| Error::parse(csv_line(&e), e.to_string()))?;
        if record.len() != expected.len() {
            return Err(Error::parse(
                line_no,
                format!(
                    "ragged row: expected {} fields, found {}",
                    expected.len(),
                    record.len()
                ),
            ));
        }
        let mut fields = record.iter().map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| Error::parse(line_no, format!("invalid number `{tok}`")))
        });
        let freq = fields.next().unwrap()?;
        freqs.push(freq);
        let mut m = DMatrix::zeros(ports, ports);
        for i in 0..ports {
            for j in 0..ports {
                let re = fields.next().unwrap()?;
                let im = fields.next().unwrap()?;
                m[(i, j)] = Complex64::new(re, im);
            }
        }
        mats.push(m);
    }
    NetworkData::new(freqs, mats, z_ref_ohm)
}

/// Render [`NetworkData`] as the CSV interchange format.
pub fn write_csv(net: &NetworkData) -> String {
    let ports = net.port_count();
    let mut out = String::new();
    out.push_str(&csv_headers(ports).join(","));
    out.push('\n');
    for (f_hz, m) in net.freqs_hz().iter().zip(net.s_matrices()) {
        let _ = write!(out, "{f_hz}");
        for i in 0..ports {
            for j in 0..ports {
                let c = m[(i, j)];
                let _ = write!(out, ",{},{}", c.re, c.im);
            }
        }
        out.push('\n');
    }
    out
}
