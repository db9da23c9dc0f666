//! Line-oriented model file.
//!
//! ```text
//! asmnn-model 1
//! input_format 8 8 unsigned
//! weight_format 8 6 signed
//! layers 2
//! layer 0 784 64 sigmoid 1
//! layer 1 64 10 sigmoid 1-3-5-7
//! weights 0
//! <out_dim lines of in_dim raw integers>
//! bias 0
//! <one line of out_dim raw integers>
//! ...
//! end
//! ```
//!
//! Writing is canonical, so `write(parse(text)) == text` for any file this
//! module produced.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fixedpoint::QFormat;
use crate::nn::model::{Layer, NetworkModel};

pub const MODEL_MAGIC: &str = "asmnn-model";
pub const MODEL_VERSION: u32 = 1;

fn push_ints(out: &mut String, values: &[i32]) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        first = false;
        write!(out, "{v}").unwrap();
    }
    out.push('\n');
}

fn push_format(out: &mut String, key: &str, f: QFormat) {
    writeln!(
        out,
        "{key} {} {} {}",
        f.total_bits(),
        f.fraction_bits(),
        if f.is_signed() { "signed" } else { "unsigned" }
    )
    .unwrap();
}

pub fn model_to_string(model: &NetworkModel) -> String {
    let mut out = String::new();
    writeln!(out, "{MODEL_MAGIC} {MODEL_VERSION}").unwrap();
    push_format(&mut out, "input_format", model.input_format);
    push_format(&mut out, "weight_format", model.weight_format);
    writeln!(out, "layers {}", model.layers.len()).unwrap();
    for (i, l) in model.layers.iter().enumerate() {
        writeln!(
            out,
            "layer {i} {} {} {} {}",
            l.in_dim, l.out_dim, l.activation, l.arithmetic
        )
        .unwrap();
    }
    for (i, l) in model.layers.iter().enumerate() {
        writeln!(out, "weights {i}").unwrap();
        for row in l.weights.chunks(l.in_dim) {
            push_ints(&mut out, row);
        }
        writeln!(out, "bias {i}").unwrap();
        push_ints(&mut out, &l.bias);
    }
    out.push_str("end\n");
    out
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next_line(&mut self) -> Result<(usize, &'a str)> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok((i + 1, l))
            }
            None => Err(Error::parse(self.last + 1, "unexpected end of file")),
        }
    }

    /// Next line split on whitespace, first token required to be `key`.
    fn keyed(&mut self, key: &str) -> Result<(usize, Vec<&'a str>)> {
        let (n, line) = self.next_line()?;
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some(k) if k == key => Ok((n, tokens.collect())),
            other => Err(Error::parse(
                n,
                format!("expected {key:?}, found {other:?}"),
            )),
        }
    }
}

fn parse_num<T: std::str::FromStr>(line: usize, token: &str) -> Result<T> {
    token
        .parse()
        .map_err(|_| Error::parse(line, format!("bad number {token:?}")))
}

fn parse_format(line: usize, tokens: &[&str]) -> Result<QFormat> {
    if tokens.len() != 3 {
        return Err(Error::parse(
            line,
            "format needs <bits> <fraction> <signed|unsigned>",
        ));
    }
    let signed = match tokens[2] {
        "signed" => true,
        "unsigned" => false,
        other => return Err(Error::parse(line, format!("bad signedness {other:?}"))),
    };
    QFormat::new(
        parse_num(line, tokens[0])?,
        parse_num(line, tokens[1])?,
        signed,
    )
}

fn parse_row(line: usize, text: &str, expected: usize) -> Result<Vec<i32>> {
    let row = text
        .split_whitespace()
        .map(|t| parse_num(line, t))
        .collect::<Result<Vec<i32>>>()?;
    if row.len() != expected {
        return Err(Error::parse(
            line,
            format!("expected {expected} values, found {}", row.len()),
        ));
    }
    Ok(row)
}

pub fn model_from_str(text: &str) -> Result<NetworkModel> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        last: 0,
    };
    let (n, header) = lines.keyed(MODEL_MAGIC)?;
    match header.as_slice() {
        [v] if parse_num::<u32>(n, v)? == MODEL_VERSION => {}
        _ => {
            return Err(Error::parse(
                n,
                format!("unsupported model version {header:?}"),
            ))
        }
    }
    let (n, t) = lines.keyed("input_format")?;
    let input_format = parse_format(n, &t)?;
    let (n, t) = lines.keyed("weight_format")?;
    let weight_format = parse_format(n, &t)?;
    let (n, t) = lines.keyed("layers")?;
    let count: usize = match t.as_slice() {
        [c] => parse_num(n, c)?,
        _ => return Err(Error::parse(n, "expected layer count")),
    };
    let mut layers = Vec::with_capacity(count);
    for i in 0..count {
        let (n, t) = lines.keyed("layer")?;
        if t.len() != 5 || parse_num::<usize>(n, t[0])? != i {
            return Err(Error::parse(
                n,
                format!("expected `layer {i} <in> <out> <activation> <arithmetic>`"),
            ));
        }
        let mut layer = Layer::zeros(parse_num(n, t[1])?, parse_num(n, t[2])?);
        layer.activation = t[3]
            .parse()
            .map_err(|e: Error| Error::parse(n, e.to_string()))?;
        layer.arithmetic = t[4]
            .parse()
            .map_err(|e: Error| Error::parse(n, e.to_string()))?;
        layers.push(layer);
    }
    for (i, layer) in layers.iter_mut().enumerate() {
        let (n, t) = lines.keyed("weights")?;
        if t.len() != 1 || parse_num::<usize>(n, t[0])? != i {
            return Err(Error::parse(n, format!("expected `weights {i}`")));
        }
        layer.weights.clear();
        for _ in 0..layer.out_dim {
            let (n, row) = lines.next_line()?;
            layer.weights.extend(parse_row(n, row, layer.in_dim)?);
        }
        let (n, t) = lines.keyed("bias")?;
        if t.len() != 1 || parse_num::<usize>(n, t[0])? != i {
            return Err(Error::parse(n, format!("expected `bias {i}`")));
        }
        let (n, row) = lines.next_line()?;
        layer.bias = parse_row(n, row, layer.out_dim)?;
    }
    let (n, t) = lines.keyed("end")?;
    if !t.is_empty() {
        return Err(Error::parse(n, "trailing tokens after end"));
    }
    if let Ok((n, extra)) = lines.next_line() {
        if !extra.trim().is_empty() {
            return Err(Error::parse(n, "content after end"));
        }
    }
    NetworkModel::new(input_format, weight_format, layers)
}

pub fn save_model(model: &NetworkModel, path: &Path) -> Result<()> {
    fs::write(path, model_to_string(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<NetworkModel> {
    model_from_str(&fs::read_to_string(path)?)
}
