//! Reader for the UEA & UCR repository `.ts` format (classification subset).
//!
//! A file is a block of `@` directives followed by `@data`, then one series
//! per line: dimensions separated by `:`, values by `,`, the class label last.
//! `?` marks a missing value. Lines starting with `#` are comments.

use std::fmt::Write as _;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TsHeader {
    pub problem_name: String,
    pub univariate: bool,
    /// Declared length for equal-length problems.
    pub series_length: Option<usize>,
    pub has_timestamps: bool,
    pub has_missing: bool,
    /// Labels in `@classLabel` order; this order defines one-hot indices.
    pub class_labels: Vec<String>,
}

impl TsHeader {
    pub fn label_index(&self, label: &str) -> Option<usize> {
        self.class_labels.iter().position(|l| l == label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SourceFile {
    TrainFile,
    TestFile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    /// One value sequence per dimension; all of equal length, NaN = missing.
    pub channels: Vec<Vec<f64>>,
    pub label: String,
    pub source_file: SourceFile,
}

impl RawSeries {
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }
}

#[derive(Default)]
struct HeaderBuilder {
    problem_name: Option<String>,
    univariate: Option<bool>,
    dimensions: Option<usize>,
    equal_length: Option<bool>,
    series_length: Option<usize>,
    has_timestamps: bool,
    has_missing: bool,
    class_labels: Option<Vec<String>>,
}

fn parse_bool(line: usize, directive: &str, v: Option<&str>) -> Result<bool> {
    match v.map(str::to_ascii_lowercase).as_deref() {
        Some("true") => Ok(true),
        Some("false") => Ok(false),
        _ => Err(Error::ts(line, format!("malformed directive {directive}: expected true or false"))),
    }
}

fn parse_count(line: usize, directive: &str, v: Option<&str>) -> Result<usize> {
    v.and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::ts(line, format!("malformed directive {directive}: expected a count")))
}

impl HeaderBuilder {
    fn directive(&mut self, line: usize, text: &str) -> Result<()> {
        let mut parts = text.split_whitespace();
        let name = parts.next().unwrap_or("@").to_ascii_lowercase();
        let first = parts.next();
        match name.as_str() {
            "@problemname" => {
                let v = first.ok_or_else(|| Error::ts(line, "malformed directive @problemName"))?;
                self.problem_name = Some(v.to_string());
            }
            "@timestamps" => self.has_timestamps = parse_bool(line, &name, first)?,
            "@missing" => self.has_missing = parse_bool(line, &name, first)?,
            "@univariate" => self.univariate = Some(parse_bool(line, &name, first)?),
            "@dimensions" | "@dimension" => self.dimensions = Some(parse_count(line, &name, first)?),
            "@equallength" => self.equal_length = Some(parse_bool(line, &name, first)?),
            "@serieslength" => self.series_length = Some(parse_count(line, &name, first)?),
            "@classlabel" => {
                if !parse_bool(line, &name, first)? {
                    return Err(Error::ts(line, "problems without class labels are not supported"));
                }
                let labels: Vec<String> = parts.map(str::to_string).collect();
                if labels.is_empty() {
                    return Err(Error::ts(line, "malformed directive @classLabel: no labels declared"));
                }
                self.class_labels = Some(labels);
            }
            "@targetlabel" => {
                return Err(Error::ts(line, "regression problems are not supported"));
            }
            other => log::warn!("line {line}: ignoring unknown directive {other}"),
        }
        Ok(())
    }

    fn finish(self, line: usize) -> Result<TsHeader> {
        if self.has_timestamps {
            return Err(Error::ts(line, "timestamped series are not supported"));
        }
        let class_labels = self
            .class_labels
            .ok_or_else(|| Error::ts(line, "missing @classLabel directive"))?;
        let equal_length = self.equal_length.unwrap_or(self.series_length.is_some());
        let univariate = self
            .univariate
            .unwrap_or_else(|| self.dimensions == Some(1));
        Ok(TsHeader {
            problem_name: self.problem_name.unwrap_or_default(),
            univariate,
            series_length: if equal_length { self.series_length } else { None },
            has_timestamps: false,
            has_missing: self.has_missing,
            class_labels,
        })
    }
}

fn parse_value(line: usize, token: &str) -> Result<f64> {
    let token = token.trim();
    if token == "?" || token.eq_ignore_ascii_case("nan") {
        return Ok(f64::NAN);
    }
    token
        .parse::<f64>()
        .map_err(|_| Error::ts(line, format!("invalid value {token:?}")))
}

/// Parses a complete `.ts` file. Every data line yields one series tagged with
/// `source`.
pub fn parse_ts_file(text: &str, source: SourceFile) -> Result<(TsHeader, Vec<RawSeries>)> {
    let mut builder = HeaderBuilder::default();
    let mut header: Option<TsHeader> = None;
    let mut expected_dims: Option<usize> = None;
    let mut series = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some(hdr) = header.as_ref() else {
            if !line.starts_with('@') {
                return Err(Error::ts(line_no, "data before @data"));
            }
            if line.to_ascii_lowercase().starts_with("@data") {
                expected_dims = match (builder.univariate, builder.dimensions) {
                    (Some(true), _) => Some(1),
                    (_, d) => d,
                };
                header = Some(std::mem::take(&mut builder).finish(line_no)?);
            } else {
                builder.directive(line_no, line)?;
            }
            continue;
        };

        let mut tokens: Vec<&str> = line.split(':').collect();
        let label = tokens.pop().unwrap_or_default().trim();
        if tokens.is_empty() {
            return Err(Error::ts(line_no, "data line has no dimensions"));
        }
        if hdr.label_index(label).is_none() {
            return Err(Error::ts(line_no, format!("unknown class label {label:?}")));
        }
        match expected_dims {
            Some(d) if d != tokens.len() => {
                return Err(Error::ts(
                    line_no,
                    format!("expected {d} dimensions, found {}", tokens.len()),
                ));
            }
            None => expected_dims = Some(tokens.len()),
            _ => {}
        }
        let mut channels = tokens
            .iter()
            .map(|dim| {
                if dim.trim().is_empty() {
                    return Err(Error::ts(line_no, "empty dimension"));
                }
                dim.split(',').map(|t| parse_value(line_no, t)).collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        // dimensions of unequal length are padded at the end with NaN
        let len = channels.iter().map(Vec::len).max().unwrap_or(0);
        for ch in &mut channels {
            ch.resize(len, f64::NAN);
        }
        if let Some(expected) = hdr.series_length {
            if len != expected {
                return Err(Error::ts(
                    line_no,
                    format!("series length {len} differs from declared @seriesLength {expected}"),
                ));
            }
        }
        series.push(RawSeries { channels, label: label.to_string(), source_file: source });
    }

    let header = header.ok_or_else(|| Error::ts(text.lines().count(), "missing @data section"))?;
    Ok((header, series))
}

/// Concatenates train-file and test-file series into the master pool,
/// train first, each in file order.
pub fn merge_train_test(train: Vec<RawSeries>, test: Vec<RawSeries>) -> Result<Vec<RawSeries>> {
    let channels = train.first().or(test.first()).map(RawSeries::n_channels);
    if let Some(c) = channels {
        if let Some(bad) = train.iter().chain(&test).find(|s| s.n_channels() != c) {
            return Err(Error::Shape(format!(
                "train and test files disagree on channel count ({c} vs {})",
                bad.n_channels()
            )));
        }
    }
    let mut out = train;
    out.extend(test);
    Ok(out)
}

/// Serialises series back to `.ts` text. Values are written with Rust's
/// shortest round-trip formatting, so re-parsing is exact.
pub fn write_ts_file(header: &TsHeader, series: &[RawSeries]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "@problemName {}", header.problem_name);
    let _ = writeln!(out, "@timeStamps false");
    let _ = writeln!(out, "@missing {}", header.has_missing);
    let _ = writeln!(out, "@univariate {}", header.univariate);
    let _ = writeln!(out, "@equalLength {}", header.series_length.is_some());
    if let Some(n) = header.series_length {
        let _ = writeln!(out, "@seriesLength {n}");
    }
    let _ = writeln!(out, "@classLabel true {}", header.class_labels.join(" "));
    out.push_str("@data\n");
    for s in series {
        for ch in &s.channels {
            for (i, v) in ch.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                if v.is_nan() {
                    out.push('?');
                } else {
                    let _ = write!(out, "{v:?}");
                }
            }
            out.push(':');
        }
        out.push_str(&s.label);
        out.push('\n');
    }
    out
}
