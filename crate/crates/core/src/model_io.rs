//! The `BOBURL 1` model file.
//!
//! ```text
//! BOBURL 1
//! dropout 0.75
//! layer <out> <in>
//! <out lines of <in> space-separated weights>
//! <one line of <out> biases>
//! ... (three layers)
//! ```
//!
//! Reals are written in the shortest decimal form that parses back to the
//! same `f64`, so a save/load round trip is bit-exact.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{DenseLayer, MlpModel, DEFAULT_DIMS};

pub const MAGIC: &str = "BOBURL";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Accept any composable layer chain instead of only 512→256→256→2.
    pub allow_any_dims: bool,
}

pub fn to_string(model: &MlpModel) -> String {
    let mut out = String::with_capacity(model.num_parameters() * 22);
    let _ = writeln!(out, "{MAGIC} {VERSION}");
    let _ = writeln!(out, "dropout {}", model.dropout_ratio());
    for layer in model.layers() {
        let _ = writeln!(out, "layer {} {}", layer.out_dim(), layer.in_dim());
        if layer.in_dim() > 0 {
            for row in layer.weights().chunks_exact(layer.in_dim()) {
                write_reals(&mut out, row);
            }
        }
        write_reals(&mut out, layer.bias());
    }
    out
}

fn write_reals(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{v}");
    }
    out.push('\n');
}

/// Writes the model atomically: a temporary file in the destination
/// directory is renamed over `path` once fully written.
pub fn save(model: &MlpModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::file(dir, e))?;
    tmp.write_all(to_string(model).as_bytes())
        .and_then(|_| tmp.as_file().sync_all())
        .map_err(|e| Error::file(path, e))?;
    tmp.persist(path).map_err(|e| Error::file(path, e.error))?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>, options: LoadOptions) -> Result<MlpModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
    from_str(&text, options)
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((i, line)) => {
                self.last = i + 1;
                Ok((i + 1, line.trim_end_matches('\r')))
            }
            None => Err(Error::parse(self.last + 1, format!("unexpected end of file, expected {what}"))),
        }
    }
}

fn parse_reals(lineno: usize, line: &str, expected: usize) -> Result<Vec<f64>> {
    let values = line
        .split_ascii_whitespace()
        .map(|tok| match tok.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::parse(lineno, format!("malformed real {tok:?}"))),
        })
        .collect::<Result<Vec<_>>>()?;
    if values.len() != expected {
        return Err(Error::parse(
            lineno,
            format!("expected {expected} values, found {}", values.len()),
        ));
    }
    Ok(values)
}

fn parse_layer(lines: &mut Lines<'_>) -> Result<DenseLayer> {
    let (lineno, header) = lines.next("a `layer <out> <in>` header")?;
    let dims: Vec<&str> = header.split_ascii_whitespace().collect();
    let (out_dim, in_dim) = match dims.as_slice() {
        ["layer", out, inp] => match (out.parse::<usize>(), inp.parse::<usize>()) {
            (Ok(o), Ok(i)) if o > 0 && i > 0 => (o, i),
            _ => return Err(Error::parse(lineno, "layer dimensions must be positive integers")),
        },
        _ => return Err(Error::parse(lineno, "expected `layer <out> <in>`")),
    };
    let weight_count = out_dim
        .checked_mul(in_dim)
        .filter(|&n| n <= 1 << 28)
        .ok_or_else(|| Error::parse(lineno, "layer is too large"))?;
    let mut weights = Vec::with_capacity(weight_count);
    for _ in 0..out_dim {
        let (n, line) = lines.next("a weight row")?;
        weights.extend(parse_reals(n, line, in_dim)?);
    }
    let (n, line) = lines.next("a bias row")?;
    let bias = parse_reals(n, line, out_dim)?;
    DenseLayer::from_parts(out_dim, in_dim, weights, bias)
}

pub fn from_str(text: &str, options: LoadOptions) -> Result<MlpModel> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let (_, magic) = lines.next("the `BOBURL 1` header")?;
    match magic.strip_prefix(MAGIC).and_then(|rest| rest.strip_prefix(' ')) {
        Some(version) if version == VERSION.to_string() => {}
        Some(version) => {
            return Err(Error::Format(format!(
                "unsupported model version {version:?}; this build reads version {VERSION}"
            )))
        }
        None => return Err(Error::Format(format!("not a model file: missing `{MAGIC} {VERSION}` header"))),
    }

    let (lineno, dropout_line) = lines.next("a `dropout <ratio>` line")?;
    let dropout = match dropout_line.split_ascii_whitespace().collect::<Vec<_>>().as_slice() {
        ["dropout", value] => value
            .parse::<f64>()
            .map_err(|_| Error::parse(lineno, format!("malformed dropout ratio {value:?}")))?,
        _ => return Err(Error::parse(lineno, "expected `dropout <ratio>`")),
    };

    let l1 = parse_layer(&mut lines)?;
    let l2 = parse_layer(&mut lines)?;
    let l3 = parse_layer(&mut lines)?;
    for (n, rest) in lines.inner.by_ref() {
        if !rest.trim().is_empty() {
            return Err(Error::parse(n + 1, "trailing content after the last layer"));
        }
    }

    let model = MlpModel::from_layers([l1, l2, l3], dropout)?;
    if !options.allow_any_dims && model.dims() != DEFAULT_DIMS {
        let dims = model.dims();
        let at = (0..4).find(|&i| dims[i] != DEFAULT_DIMS[i]).unwrap_or(0);
        return Err(Error::DimensionMismatch {
            context: "model layer widths",
            expected: DEFAULT_DIMS[at],
            found: dims[at],
        });
    }
    Ok(model)
}
