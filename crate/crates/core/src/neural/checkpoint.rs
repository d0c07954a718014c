//! Flat text checkpoints of named tensors.
//!
//! ```text
//! # meta <key> <value>
//! # tensor <name> <rows> <cols>
//! <row 0, comma separated>
//! ...
//! ```
//!
//! Values are written with shortest round-trip formatting, so a write/read cycle is
//! lossless.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use super::dense::{Activation, DenseLayer, DenseNet};
use super::set_encoder::SetEncoder;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    meta: Vec<(String, String)>,
    tensors: Vec<(String, DMatrix<f64>)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_meta(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        assert!(!key.contains(char::is_whitespace), "meta keys are single tokens");
        match self.meta.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.meta.push((key.to_string(), value)),
        }
    }

    pub fn meta(&self, key: &str) -> Result<&str> {
        self.meta
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
            .ok_or_else(|| Error::invalid(format!("checkpoint has no meta key '{key}'")))
    }

    pub fn meta_parse<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.meta(key)?;
        raw.parse()
            .map_err(|_| Error::invalid(format!("checkpoint meta '{key}' has bad value '{raw}'")))
    }

    pub fn push_tensor(&mut self, name: &str, value: DMatrix<f64>) {
        assert!(!name.contains(char::is_whitespace), "tensor names are single tokens");
        self.tensors.push((name.to_string(), value));
    }

    pub fn tensor(&self, name: &str) -> Result<&DMatrix<f64>> {
        self.tensors
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| Error::invalid(format!("checkpoint has no tensor '{name}'")))
    }

    pub fn tensor_names(&self) -> impl Iterator<Item = &str> {
        self.tensors.iter().map(|(n, _)| n.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            out.push_str(&format!("# meta {k} {v}\n"));
        }
        for (name, t) in &self.tensors {
            out.push_str(&format!("# tensor {name} {} {}\n", t.nrows(), t.ncols()));
            for row in t.row_iter() {
                let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
        }
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut ck = Checkpoint::new();
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        while let Some((ln, line)) = lines.next() {
            if line.trim().is_empty() {
                continue;
            }
            let Some(header) = line.strip_prefix("# ") else {
                return Err(err(ln, "expected a `# meta` or `# tensor` header".into()));
            };
            let toks: Vec<&str> = header.splitn(3, ' ').collect();
            match toks.as_slice() {
                ["meta", key, value] => ck.set_meta(key, value),
                ["meta", key] => ck.set_meta(key, ""),
                ["tensor", ..] => {
                    let spec: Vec<&str> = header.split_whitespace().skip(1).collect();
                    let [name, rows, cols] = spec.as_slice() else {
                        return Err(err(ln, "expected `# tensor name rows cols`".into()));
                    };
                    let rows: usize = rows.parse().map_err(|_| err(ln, format!("bad row count '{rows}'")))?;
                    let cols: usize = cols.parse().map_err(|_| err(ln, format!("bad column count '{cols}'")))?;
                    let mut data = Vec::with_capacity(rows * cols);
                    for _ in 0..rows {
                        let (rl, row) = lines
                            .next()
                            .ok_or_else(|| err(ln, format!("tensor '{name}' is truncated")))?;
                        let vals = if cols == 0 {
                            Vec::new()
                        } else {
                            row.split(',')
                                .map(|c| c.trim().parse::<f64>().map_err(|_| err(rl, format!("bad value '{c}'"))))
                                .collect::<Result<Vec<f64>>>()?
                        };
                        if vals.len() != cols {
                            return Err(err(rl, format!("expected {cols} values, found {}", vals.len())));
                        }
                        data.extend(vals);
                    }
                    ck.push_tensor(name, DMatrix::from_row_slice(rows, cols, &data));
                }
                _ => return Err(err(ln, format!("unknown header '{line}'"))),
            }
        }
        Ok(ck)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn put_dense(&mut self, prefix: &str, net: &DenseNet) {
        self.set_meta(&format!("{prefix}.layers"), net.layers().len());
        for (i, l) in net.layers().iter().enumerate() {
            self.set_meta(&format!("{prefix}.{i}.activation"), l.activation.name());
            self.push_tensor(&format!("{prefix}.{i}.weight"), l.weight.clone());
            self.push_tensor(
                &format!("{prefix}.{i}.bias"),
                DMatrix::from_column_slice(l.bias.len(), 1, l.bias.as_slice()),
            );
        }
    }

    pub fn get_dense(&self, prefix: &str) -> Result<DenseNet> {
        let count: usize = self.meta_parse(&format!("{prefix}.layers"))?;
        let layers = (0..count)
            .map(|i| {
                let bias = self.tensor(&format!("{prefix}.{i}.bias"))?;
                if bias.ncols() != 1 {
                    return Err(Error::invalid(format!("{prefix}.{i}.bias is not a column")));
                }
                Ok(DenseLayer {
                    weight: self.tensor(&format!("{prefix}.{i}.weight"))?.clone(),
                    bias: DVector::from_column_slice(bias.as_slice()),
                    activation: Activation::from_name(self.meta(&format!("{prefix}.{i}.activation"))?)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        DenseNet::new(layers)
    }

    pub fn put_set_encoder(&mut self, prefix: &str, enc: &SetEncoder) {
        self.put_dense(&format!("{prefix}.inner"), &enc.inner);
        self.put_dense(&format!("{prefix}.outer"), &enc.outer);
    }

    pub fn get_set_encoder(&self, prefix: &str) -> Result<SetEncoder> {
        SetEncoder::new(
            self.get_dense(&format!("{prefix}.inner"))?,
            self.get_dense(&format!("{prefix}.outer"))?,
        )
    }
}
