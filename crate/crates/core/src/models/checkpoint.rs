//! Text checkpoint container.
//!
//! ```text
//! reintel-checkpoint 1
//! config <key> = <value>            (zero or more)
//! tensor <name> <d1>x<d2>...        (one header per tensor)
//! <value> <value> ...               (16 hex digits each: IEEE-754 bits, row-major)
//! end
//! ```
//!
//! Values are stored as raw bit patterns, so a save/load cycle is exact and
//! equal parameters always produce identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use super::params::Parameters;
use crate::error::{Error, Result};

pub const MAGIC: &str = "reintel-checkpoint 1";

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Checkpoint {
    pub config: Vec<(String, String)>,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_params<P: Parameters>(config: Vec<(String, String)>, params: &P) -> Self {
        let tensors = params
            .tensors()
            .into_iter()
            .map(|(name, t)| NamedTensor {
                name,
                shape: t.shape(),
                data: t.data().to_vec(),
            })
            .collect();
        Checkpoint { config, tensors }
    }

    pub fn config_value(&self, key: &str) -> Option<&str> {
        self.config.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    /// Copies stored tensors into `params`, which must have the same names
    /// and shapes in the same order.
    pub fn load_into<P: Parameters>(&self, params: &mut P) -> Result<()> {
        let mut slots = params.tensors_mut();
        if slots.len() != self.tensors.len() {
            return Err(Error::Config(format!(
                "checkpoint holds {} tensors, model has {}",
                self.tensors.len(),
                slots.len()
            )));
        }
        for ((name, slot), stored) in slots.iter_mut().zip(&self.tensors) {
            if *name != stored.name || slot.shape() != stored.shape {
                return Err(Error::Config(format!(
                    "checkpoint tensor {} {:?} does not match model tensor {} {:?}",
                    stored.name,
                    stored.shape,
                    name,
                    slot.shape()
                )));
            }
            slot.data_mut().copy_from_slice(&stored.data);
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(MAGIC);
        out.push('\n');
        for (k, v) in &self.config {
            let _ = writeln!(out, "config {k} = {v}");
        }
        for t in &self.tensors {
            let shape: Vec<String> = t.shape.iter().map(|d| d.to_string()).collect();
            let _ = writeln!(out, "tensor {} {}", t.name, shape.join("x"));
            let vals: Vec<String> = t.data.iter().map(|v| format!("{:016x}", v.to_bits())).collect();
            out.push_str(&vals.join(" "));
            out.push('\n');
        }
        out.push_str("end\n");
        out
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, l)) if l == MAGIC => {}
            _ => return Err(Error::parse(path, 1, format!("expected header {MAGIC:?}"))),
        }
        let mut ck = Checkpoint::default();
        let mut ended = false;
        while let Some((i, line)) = lines.next() {
            let lineno = i + 1;
            if let Some(rest) = line.strip_prefix("config ") {
                let (k, v) = rest
                    .split_once(" = ")
                    .ok_or_else(|| Error::parse(path, lineno, "malformed config line"))?;
                ck.config.push((k.to_string(), v.to_string()));
            } else if let Some(rest) = line.strip_prefix("tensor ") {
                let (name, shape) = rest
                    .rsplit_once(' ')
                    .ok_or_else(|| Error::parse(path, lineno, "malformed tensor header"))?;
                let shape: Vec<usize> = shape
                    .split('x')
                    .map(|d| d.parse())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::parse(path, lineno, format!("bad shape {shape:?}")))?;
                let expected: usize = shape.iter().product();
                let (_, body) = lines
                    .next()
                    .ok_or_else(|| Error::parse(path, lineno + 1, "missing tensor values"))?;
                let data: Vec<f64> = body
                    .split_whitespace()
                    .map(|h| u64::from_str_radix(h, 16).map(f64::from_bits))
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| Error::parse(path, lineno + 1, "bad hex value"))?;
                if data.len() != expected {
                    return Err(Error::parse(
                        path,
                        lineno + 1,
                        format!("tensor {name} has {} values, shape needs {expected}", data.len()),
                    ));
                }
                ck.tensors.push(NamedTensor {
                    name: name.to_string(),
                    shape,
                    data,
                });
            } else if line == "end" {
                ended = true;
                break;
            } else {
                return Err(Error::parse(path, lineno, format!("unexpected line {line:?}")));
            }
        }
        if !ended {
            return Err(Error::parse(path, text.lines().count(), "truncated checkpoint"));
        }
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }
}
