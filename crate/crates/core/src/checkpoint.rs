//! The "AVSYN001" container used for model checkpoints and latent pairs.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! b"AVSYN001"
//! u32 field count
//! repeated: u16 key length, key (UTF-8), u32 value length, value (UTF-8)
//! f32 tensor values, row-major, in declaration order
//! ```
//!
//! The `floats` header field records how many f32 values follow; readers
//! reject files whose tensor block is shorter or longer than that.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::nn::{Activation, DenseLayer, DenseNet, Tensor2};

pub const MAGIC: &[u8; 8] = b"AVSYN001";
const FLOATS_FIELD: &str = "floats";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    ImageVae,
    MelodyVae,
    Translator,
    Pairs,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::ImageVae => "image_vae",
            ModelKind::MelodyVae => "melody_vae",
            ModelKind::Translator => "translator",
            ModelKind::Pairs => "pairs",
        }
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "image_vae" => ModelKind::ImageVae,
            "melody_vae" => ModelKind::MelodyVae,
            "translator" => ModelKind::Translator,
            "pairs" => ModelKind::Pairs,
            other => return Err(Error::mismatch("kind", format!("unknown model kind `{other}`"))),
        })
    }
}

/// Ordered header fields plus a flat f32 tensor block.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    fields: Vec<(String, String)>,
    floats: Vec<f32>,
}

/// Sequential reader over a checkpoint's tensor block.
pub struct TensorReader<'a> {
    floats: &'a [f32],
    pos: usize,
}

impl<'a> TensorReader<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [f32]> {
        if self.floats.len() - self.pos < n {
            return Err(Error::CheckpointParse(format!(
                "tensor block ends after {} values, {} more needed",
                self.floats.len(),
                n - (self.floats.len() - self.pos)
            )));
        }
        let s = &self.floats[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn finish(self) -> Result<()> {
        if self.pos != self.floats.len() {
            return Err(Error::CheckpointParse(format!(
                "{} unread tensor values",
                self.floats.len() - self.pos
            )));
        }
        Ok(())
    }
}

impl Checkpoint {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            fields: vec![("kind".into(), kind.as_str().into())],
            floats: Vec::new(),
        }
    }

    pub fn kind(&self) -> Result<ModelKind> {
        self.require("kind")?.parse()
    }

    /// Fails with a field-level mismatch unless the kind is `want`.
    pub fn expect_kind(&self, want: ModelKind) -> Result<()> {
        let got = self.kind()?;
        if got != want {
            return Err(Error::mismatch(
                "kind",
                format!("expected {}, found {}", want.as_str(), got.as_str()),
            ));
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        let value = value.to_string();
        match self.fields.iter_mut().find(|(k, _)| k == key) {
            Some(slot) => slot.1 = value,
            None => self.fields.push((key.to_string(), value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    pub fn fields(&self) -> &[(String, String)] {
        &self.fields
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::mismatch(key, "field missing from header"))
    }

    pub fn parse_field<V: FromStr>(&self, key: &str) -> Result<V> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::mismatch(key, format!("cannot parse `{raw}`")))
    }

    pub fn push_floats(&mut self, values: &[f32]) {
        self.floats.extend_from_slice(values);
    }

    pub fn floats(&self) -> &[f32] {
        &self.floats
    }

    pub fn reader(&self) -> TensorReader<'_> {
        TensorReader {
            floats: &self.floats,
            pos: 0,
        }
    }

    /// Record `net`'s layer layout under `name` and append its weights and
    /// biases, layer by layer.
    pub fn push_net(&mut self, name: &str, net: &DenseNet<f32>) {
        self.set(name, layer_spec(net));
        for layer in net.layers() {
            self.floats.extend_from_slice(layer.weight.data());
            self.floats.extend_from_slice(&layer.bias);
        }
    }

    /// Rebuild the network declared under `name` from the next tensors.
    pub fn read_net(&self, name: &str, reader: &mut TensorReader<'_>) -> Result<DenseNet<f32>> {
        let spec = parse_layer_spec(name, self.require(name)?)?;
        let mut layers = Vec::with_capacity(spec.len());
        for (input, output, act) in spec {
            let weight = Tensor2::new(output, input, reader.take(input * output)?.to_vec())?;
            let bias = reader.take(output)?.to_vec();
            layers.push(DenseLayer::new(weight, bias, act)?);
        }
        DenseNet::new(layers).map_err(|e| Error::mismatch(name, e.to_string()))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut fields = self.fields.clone();
        fields.retain(|(k, _)| k != FLOATS_FIELD);
        fields.push((FLOATS_FIELD.into(), self.floats.len().to_string()));

        let mut out = Vec::with_capacity(64 + self.floats.len() * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(fields.len() as u32).to_le_bytes());
        for (k, v) in &fields {
            out.extend_from_slice(&(k.len() as u16).to_le_bytes());
            out.extend_from_slice(k.as_bytes());
            out.extend_from_slice(&(v.len() as u32).to_le_bytes());
            out.extend_from_slice(v.as_bytes());
        }
        for f in &self.floats {
            out.extend_from_slice(&f.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let parse = |m: String| Error::CheckpointParse(m);
        if bytes.len() < MAGIC.len() || &bytes[..MAGIC.len()] != MAGIC {
            return Err(parse("missing AVSYN001 magic".into()));
        }
        let mut pos = MAGIC.len();
        let mut take = |n: usize| -> Result<&[u8]> {
            if bytes.len() - pos < n {
                return Err(parse(format!("truncated header at byte {pos}")));
            }
            let s = &bytes[pos..pos + n];
            pos += n;
            Ok(s)
        };
        let count = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes"));
        let mut fields = Vec::new();
        for _ in 0..count {
            let klen = u16::from_le_bytes(take(2)?.try_into().expect("2 bytes")) as usize;
            let key = String::from_utf8(take(klen)?.to_vec()).map_err(|_| parse("header key is not UTF-8".into()))?;
            let vlen = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
            let value =
                String::from_utf8(take(vlen)?.to_vec()).map_err(|_| parse("header value is not UTF-8".into()))?;
            fields.push((key, value));
        }
        let declared: usize = fields
            .iter()
            .find(|(k, _)| k == FLOATS_FIELD)
            .ok_or_else(|| parse("header lacks the `floats` field".into()))?
            .1
            .parse()
            .map_err(|_| parse("`floats` is not a count".into()))?;
        let block = &bytes[pos..];
        if block.len() != declared * 4 {
            return Err(parse(format!(
                "tensor block holds {} bytes, header declares {} floats ({} bytes)",
                block.len(),
                declared,
                declared * 4
            )));
        }
        let floats = block
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        fields.retain(|(k, _)| k != FLOATS_FIELD);
        let ckpt = Self { fields, floats };
        ckpt.kind()?;
        Ok(ckpt)
    }

    pub fn read_file(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    pub fn write_file(&self, path: &Path) -> Result<String> {
        let bytes = self.to_bytes();
        std::fs::write(path, &bytes).map_err(|e| Error::io(path, e))?;
        Ok(identity(&bytes))
    }
}

/// Short content hash naming a checkpoint: first 16 hex digits of SHA-256.
pub fn identity(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(16);
    for b in &digest[..8] {
        write!(s, "{b:02x}").expect("writing to String");
    }
    s
}

/// `"12288x512:tanh,512x64:identity"`: `in x out : activation` per layer.
pub fn layer_spec(net: &DenseNet<f32>) -> String {
    net.layers()
        .iter()
        .map(|l| format!("{}x{}:{}", l.in_dim(), l.out_dim(), l.activation.name()))
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_layer_spec(field: &str, spec: &str) -> Result<Vec<(usize, usize, Activation)>> {
    let bad = || Error::mismatch(field, format!("malformed layer spec `{spec}`"));
    spec.split(',')
        .map(|layer| {
            let (dims, act) = layer.split_once(':').ok_or_else(bad)?;
            let (i, o) = dims.split_once('x').ok_or_else(bad)?;
            Ok((
                i.parse().map_err(|_| bad())?,
                o.parse().map_err(|_| bad())?,
                Activation::parse(act).ok_or_else(bad)?,
            ))
        })
        .collect()
}
