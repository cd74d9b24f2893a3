//! Versioned JSON container for spectra and fields: metadata plus flat
//! coefficient arrays, bulk data as little-endian base64.  Loading a
//! spectrum rebuilds it from its key and verifies the stored eigenvalues
//! bit-for-bit, so a container can never smuggle in a stale eigenbasis.

use std::collections::BTreeMap;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Grid, GridField};
use crate::operator::{build_box_stokes, ModalField, SlipStokesSpectrum, SpectrumKey};

pub const CONTAINER_FORMAT: &str = "stokeslab-container";
pub const CONTAINER_VERSION: u32 = 1;

/// One bulk array: scalar `f64-le` or interleaved complex `c128-le`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Base64Array {
    pub dtype: String,
    pub len: usize,
    pub data: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Container {
    pub format: String,
    pub version: u32,
    pub kind: String,
    pub metadata: serde_json::Value,
    pub arrays: BTreeMap<String, Base64Array>,
}

impl Container {
    fn new(kind: &str, metadata: serde_json::Value) -> Self {
        Self {
            format: CONTAINER_FORMAT.into(),
            version: CONTAINER_VERSION,
            kind: kind.into(),
            metadata,
            arrays: BTreeMap::new(),
        }
    }

    fn check(&self, kind: &str) -> Result<()> {
        if self.format != CONTAINER_FORMAT {
            return Err(Error::Format(format!("unknown container format {:?}", self.format)));
        }
        if self.version != CONTAINER_VERSION {
            return Err(Error::Format(format!(
                "container version {} unsupported (expected {CONTAINER_VERSION})",
                self.version
            )));
        }
        if self.kind != kind {
            return Err(Error::Format(format!(
                "container holds {:?}, expected {kind:?}",
                self.kind
            )));
        }
        Ok(())
    }

    fn array(&self, name: &str) -> Result<&Base64Array> {
        self.arrays
            .get(name)
            .ok_or_else(|| Error::Format(format!("container missing array {name:?}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("container is plain data")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("bad container JSON: {e}")))
    }
}

pub fn encode_f64s(values: &[f64]) -> Base64Array {
    let mut bytes = Vec::with_capacity(values.len() * 8);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    Base64Array { dtype: "f64-le".into(), len: values.len(), data: B64.encode(bytes) }
}

pub fn decode_f64s(arr: &Base64Array) -> Result<Vec<f64>> {
    if arr.dtype != "f64-le" {
        return Err(Error::Format(format!("expected f64-le array, got {:?}", arr.dtype)));
    }
    let bytes = B64
        .decode(&arr.data)
        .map_err(|e| Error::Format(format!("bad base64 payload: {e}")))?;
    if bytes.len() != arr.len * 8 {
        return Err(Error::Format(format!(
            "array length {} does not match payload of {} bytes",
            arr.len,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect())
}

pub fn encode_complex(values: &[Complex64]) -> Base64Array {
    let mut bytes = Vec::with_capacity(values.len() * 16);
    for v in values {
        bytes.extend_from_slice(&v.re.to_le_bytes());
        bytes.extend_from_slice(&v.im.to_le_bytes());
    }
    Base64Array { dtype: "c128-le".into(), len: values.len(), data: B64.encode(bytes) }
}

pub fn decode_complex(arr: &Base64Array) -> Result<Vec<Complex64>> {
    if arr.dtype != "c128-le" {
        return Err(Error::Format(format!("expected c128-le array, got {:?}", arr.dtype)));
    }
    let bytes = B64
        .decode(&arr.data)
        .map_err(|e| Error::Format(format!("bad base64 payload: {e}")))?;
    if bytes.len() != arr.len * 16 {
        return Err(Error::Format(format!(
            "array length {} does not match payload of {} bytes",
            arr.len,
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
            )
        })
        .collect())
}

/// Spectrum container: the construction key plus the eigenvalue list for
/// verification on load.
pub fn spectrum_to_container(spec: &SlipStokesSpectrum) -> Container {
    let mut c = Container::new(
        "spectrum",
        serde_json::to_value(spec.key()).expect("key is plain data"),
    );
    let eigs: Vec<f64> = spec.modes().iter().map(|m| m.eigenvalue).collect();
    c.arrays.insert("eigenvalues".into(), encode_f64s(&eigs));
    c
}

pub fn spectrum_from_container(c: &Container) -> Result<SlipStokesSpectrum> {
    c.check("spectrum")?;
    let key: SpectrumKey = serde_json::from_value(c.metadata.clone())
        .map_err(|e| Error::Format(format!("bad spectrum key: {e}")))?;
    let spec = build_box_stokes(key.dim, key.k_max, key.m, key.len)?;
    let stored = decode_f64s(c.array("eigenvalues")?)?;
    let rebuilt: Vec<f64> = spec.modes().iter().map(|m| m.eigenvalue).collect();
    if stored != rebuilt {
        return Err(Error::Format(
            "stored eigenvalues disagree with the rebuilt spectrum".into(),
        ));
    }
    Ok(spec)
}

pub fn modal_to_container(f: &ModalField) -> Container {
    let mut c = Container::new(
        "modal-field",
        serde_json::to_value(f.key).expect("key is plain data"),
    );
    c.arrays.insert("coeffs".into(), encode_complex(&f.coeffs));
    c
}

pub fn modal_from_container(c: &Container) -> Result<ModalField> {
    c.check("modal-field")?;
    let key: SpectrumKey = serde_json::from_value(c.metadata.clone())
        .map_err(|e| Error::Format(format!("bad spectrum key: {e}")))?;
    let coeffs = decode_complex(c.array("coeffs")?)?;
    Ok(ModalField { key, coeffs })
}

pub fn grid_field_to_container(f: &GridField) -> Container {
    let meta = serde_json::json!({ "grid": f.grid, "comps": f.comps });
    let mut c = Container::new("grid-field", meta);
    c.arrays.insert("data".into(), encode_complex(&f.data));
    c
}

pub fn grid_field_from_container(c: &Container) -> Result<GridField> {
    c.check("grid-field")?;
    let grid: Grid = serde_json::from_value(c.metadata["grid"].clone())
        .map_err(|e| Error::Format(format!("bad grid metadata: {e}")))?;
    let comps = c.metadata["comps"]
        .as_u64()
        .ok_or_else(|| Error::Format("missing component count".into()))? as usize;
    let grid = Grid::new(grid.dim, grid.m, grid.len)?;
    let data = decode_complex(c.array("data")?)?;
    if data.len() != comps * grid.n_points() {
        return Err(Error::Format(format!(
            "payload of {} values does not fill {} components on {} points",
            data.len(),
            comps,
            grid.n_points()
        )));
    }
    Ok(GridField { grid, comps, data })
}

/// Fixed-width scientific float used by every CSV writer; 17 significant
/// digits round-trip f64 exactly.
pub fn csv_float(x: f64) -> String {
    format!("{x:.17e}")
}
