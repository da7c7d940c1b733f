//! Named parameter storage and the text checkpoint container.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::{numel, Result, Tensor, TensorError};

pub const CHECKPOINT_HEADER: &str = "LPFC-CHECKPOINT v1";

/// Index of a parameter inside its [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Plain-data parameter set. `Send + Sync`, so a trained model can be shared
/// read-only across threads while each thread builds its own graph.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
    by_name: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, shape: &[usize], values: Vec<f64>) -> ParamId {
        let name = name.into();
        assert_eq!(values.len(), numel(shape), "parameter `{name}` size");
        assert!(!self.by_name.contains_key(&name), "duplicate parameter `{name}`");
        let id = self.params.len();
        self.by_name.insert(name.clone(), id);
        self.params.push(Param {
            name,
            shape: shape.to_vec(),
            values,
        });
        ParamId(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.by_name.get(name).map(|&i| &self.params[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.values.len()).sum()
    }

    /// Creates one leaf tensor per parameter. With `trainable` the leaves
    /// collect gradients; otherwise they are constants.
    pub fn bind(&self, trainable: bool) -> ParamBinding {
        let tensors = self
            .params
            .iter()
            .map(|p| {
                if trainable {
                    Tensor::parameter(p.values.clone(), &p.shape)
                } else {
                    Tensor::new(p.values.clone(), &p.shape)
                }
                .expect("stored shape is consistent")
            })
            .collect();
        ParamBinding { tensors }
    }

    /// Writes every parameter prefixed by `prefix` (e.g. `"subnet0."`).
    pub fn write_entries(&self, prefix: &str, out: &mut String) {
        for p in &self.params {
            let dims: Vec<String> = p.shape.iter().map(|d| d.to_string()).collect();
            let _ = writeln!(out, "param {prefix}{} {} {}", p.name, p.shape.len(), dims.join(" "));
            let vals: Vec<String> = p.values.iter().map(|v| format!("{v:?}")).collect();
            let _ = writeln!(out, "{}", vals.join(" "));
        }
    }

    /// Overwrites values from `entries` (name → param); every local
    /// parameter must be present with a matching shape.
    pub fn load_entries(&mut self, prefix: &str, entries: &HashMap<String, Param>) -> Result<()> {
        for p in &mut self.params {
            let key = format!("{prefix}{}", p.name);
            let src = entries
                .get(&key)
                .ok_or_else(|| TensorError::Checkpoint(format!("missing parameter `{key}`")))?;
            if src.shape != p.shape {
                return Err(TensorError::Checkpoint(format!(
                    "parameter `{key}` has shape {:?}, expected {:?}",
                    src.shape, p.shape
                )));
            }
            p.values.clone_from(&src.values);
        }
        Ok(())
    }
}

/// Leaf tensors for one forward pass over a [`ParamStore`].
pub struct ParamBinding {
    tensors: Vec<Tensor>,
}

impl ParamBinding {
    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }
}

/// Serializes `(prefix, store)` groups into the checkpoint text format.
pub fn write_checkpoint<W: Write>(mut w: W, groups: &[(&str, &ParamStore)]) -> std::io::Result<()> {
    let mut body = String::new();
    let _ = writeln!(body, "{CHECKPOINT_HEADER}");
    for (prefix, store) in groups {
        store.write_entries(prefix, &mut body);
    }
    body.push_str("end\n");
    w.write_all(body.as_bytes())
}

/// Parses a checkpoint into name → parameter.
pub fn read_checkpoint<R: BufRead>(r: R) -> Result<HashMap<String, Param>> {
    let err = |line: usize, msg: &str| TensorError::Checkpoint(format!("line {line}: {msg}"));
    let mut lines = r.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim() == CHECKPOINT_HEADER => {}
        _ => return Err(err(1, "missing or unsupported header")),
    }
    let mut out = HashMap::new();
    loop {
        let Some((i, line)) = lines.next() else {
            return Err(err(0, "truncated checkpoint (no `end`)"));
        };
        let line = line.map_err(|e| err(i + 1, &e.to_string()))?;
        let line = line.trim();
        if line == "end" {
            return Ok(out);
        }
        let mut toks = line.split_whitespace();
        if toks.next() != Some("param") {
            return Err(err(i + 1, "expected `param`"));
        }
        let name = toks.next().ok_or_else(|| err(i + 1, "missing name"))?.to_string();
        let ndim: usize = toks
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| err(i + 1, "bad rank"))?;
        let shape: Vec<usize> = toks.map(|t| t.parse().map_err(|_| err(i + 1, "bad dimension"))).collect::<Result<_>>()?;
        if shape.len() != ndim {
            return Err(err(i + 1, "rank does not match dimensions"));
        }
        let (j, vline) = lines.next().ok_or_else(|| err(i + 2, "missing values"))?;
        let vline = vline.map_err(|e| err(j + 1, &e.to_string()))?;
        let values: Vec<f64> = vline
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| err(j + 1, "non-numeric value")))
            .collect::<Result<_>>()?;
        if values.len() != numel(&shape) {
            return Err(err(j + 1, "value count does not match shape"));
        }
        out.insert(name.clone(), Param { name, shape, values });
    }
}
