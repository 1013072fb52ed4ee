//! Parameter archive.
//!
//! Layout:
//!
//! ```text
//! eulernet-params v1\n
//! <header length in bytes>\n
//! <JSON header: format_version, config, field_vocab, manifest>
//! <payload: little-endian f64, row-major, manifest order>
//! ```

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::params::{EmbeddingTable, EulerLayerParams, FieldModulus, ModelParams, OutputHead};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "eulernet-params";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: [usize; 2],
    /// Byte offset into the payload.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchiveHeader {
    pub format_version: u32,
    pub config: ModelConfig,
    pub field_vocab: Vec<usize>,
    pub manifest: Vec<ManifestEntry>,
}

impl ArchiveHeader {
    pub fn parameter_count(&self) -> usize {
        self.manifest.iter().map(|e| e.shape[0] * e.shape[1]).sum()
    }
}

pub fn encode_params(params: &ModelParams) -> Vec<u8> {
    let mut manifest = Vec::new();
    let mut payload = Vec::with_capacity(params.parameter_count() * 8);
    for (name, a) in params.tensors() {
        manifest.push(ManifestEntry {
            name,
            shape: [a.nrows(), a.ncols()],
            offset: payload.len(),
        });
        for v in a.iter() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let header = ArchiveHeader {
        format_version: FORMAT_VERSION,
        config: params.config.clone(),
        field_vocab: params.embedding.field_vocab(),
        manifest,
    };
    let header = serde_json::to_vec(&header).expect("header serializes");
    let mut out = format!("{MAGIC} v{FORMAT_VERSION}\n{}\n", header.len()).into_bytes();
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    out
}

fn read_line<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a str> {
    let rest = &bytes[*pos..];
    let end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Archive("truncated header".into()))?;
    *pos += end + 1;
    std::str::from_utf8(&rest[..end]).map_err(|_| Error::Archive("header is not UTF-8".into()))
}

pub fn decode_header(bytes: &[u8]) -> Result<(ArchiveHeader, usize)> {
    let mut pos = 0;
    let magic = read_line(bytes, &mut pos)?;
    let version = magic
        .strip_prefix(MAGIC)
        .and_then(|s| s.trim().strip_prefix('v'))
        .and_then(|s| s.parse::<u32>().ok())
        .ok_or_else(|| Error::Archive(format!("not a parameter archive (magic `{magic}`)")))?;
    if version != FORMAT_VERSION {
        return Err(Error::Archive(format!(
            "format version {version} is not supported (expected {FORMAT_VERSION})"
        )));
    }
    let len: usize = read_line(bytes, &mut pos)?
        .parse()
        .map_err(|_| Error::Archive("bad header length".into()))?;
    if bytes.len() < pos + len {
        return Err(Error::Archive("truncated header".into()));
    }
    let header: ArchiveHeader =
        serde_json::from_slice(&bytes[pos..pos + len]).map_err(|e| Error::Archive(format!("bad header: {e}")))?;
    if header.format_version != version {
        return Err(Error::Archive("header version disagrees with magic line".into()));
    }
    Ok((header, pos + len))
}

pub fn decode_params(bytes: &[u8]) -> Result<ModelParams> {
    let (header, start) = decode_header(bytes)?;
    let payload = &bytes[start..];
    let expected = header.parameter_count() * 8;
    if payload.len() != expected {
        return Err(Error::Archive(format!(
            "payload has {} bytes, manifest declares {expected}",
            payload.len()
        )));
    }
    header.config.validate()?;
    let d = header.config.embed_dim;
    let vocab: usize = header.field_vocab.iter().sum();

    // Template with the shapes the config implies; manifest must match it.
    let mut params = ModelParams {
        config: header.config.clone(),
        embedding: EmbeddingTable::new(Array2::zeros((vocab, d)), &header.field_vocab)?,
        modulus: FieldModulus {
            mu: Array2::zeros((header.config.num_fields, d)),
        },
        layers: (0..header.config.layer_widths.len())
            .map(|l| {
                let orders = Array2::zeros((header.config.layer_widths[l], header.config.layer_input(l)));
                EulerLayerParams::from_orders(orders, d, header.config.normalization)
            })
            .collect(),
        head: OutputHead {
            w: Array2::zeros((header.config.output_width(), d)),
        },
    };
    let names: Vec<(String, [usize; 2])> = params
        .tensors()
        .into_iter()
        .map(|(n, a)| (n, [a.nrows(), a.ncols()]))
        .collect();
    if names.len() != header.manifest.len() {
        return Err(Error::shape(
            "archive manifest entries",
            names.len(),
            header.manifest.len(),
        ));
    }
    let mut offset = 0;
    for ((name, shape), entry) in names.iter().zip(&header.manifest) {
        if *name != entry.name || *shape != entry.shape || entry.offset != offset {
            return Err(Error::shape(
                "archive manifest",
                (name, shape, offset),
                (&entry.name, entry.shape, entry.offset),
            ));
        }
        offset += shape[0] * shape[1] * 8;
    }
    for (dst, entry) in params.tensors_mut().into_iter().zip(&header.manifest) {
        let bytes = &payload[entry.offset..entry.offset + dst.len() * 8];
        for (v, chunk) in dst.iter_mut().zip(bytes.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    Ok(params)
}

pub fn save_params(params: &ModelParams, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_params(params)).map_err(|e| Error::io(path, e))
}

pub fn load_params(path: impl AsRef<Path>) -> Result<ModelParams> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_params(&bytes)
}

/// Loads an archive and checks it against the model configuration the caller
/// expects.
pub fn load_params_for(path: impl AsRef<Path>, config: &ModelConfig) -> Result<ModelParams> {
    let params = load_params(path)?;
    check_config(&params.config, config)?;
    Ok(params)
}

pub fn check_config(archived: &ModelConfig, expected: &ModelConfig) -> Result<()> {
    let pairs = [
        ("num_fields", archived.num_fields, expected.num_fields),
        ("embed_dim", archived.embed_dim, expected.embed_dim),
    ];
    for (what, got, want) in pairs {
        if got != want {
            return Err(Error::shape(format!("archive {what}"), want, got));
        }
    }
    if archived.layer_widths != expected.layer_widths {
        return Err(Error::shape(
            "archive layer_widths",
            &expected.layer_widths,
            &archived.layer_widths,
        ));
    }
    if archived.normalization != expected.normalization {
        return Err(Error::shape(
            "archive normalization",
            expected.normalization,
            archived.normalization,
        ));
    }
    if archived.mode != expected.mode {
        return Err(Error::shape("archive mode", expected.mode, archived.mode));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    fn params() -> ModelParams {
        let config = ModelConfig::new(3, 4, vec![3, 2]).with_normalization(true);
        init_params(&config, &[3, 2, 4], 17).unwrap()
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let p = params();
        let q = decode_params(&encode_params(&p)).unwrap();
        assert_eq!(p.config, q.config);
        for ((na, a), (nb, b)) in p.tensors().into_iter().zip(q.tensors()) {
            assert_eq!(na, nb);
            assert!(a.iter().zip(b.iter()).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
        assert_eq!(p.embedding.field_vocab(), q.embedding.field_vocab());
    }

    #[test]
    fn truncated_archive_is_rejected() {
        let bytes = encode_params(&params());
        for cut in [0, 10, 30, bytes.len() / 2, bytes.len() - 1] {
            assert!(decode_params(&bytes[..cut]).is_err(), "cut at {cut}");
        }
    }

    #[test]
    fn version_mismatch_is_rejected() {
        let mut bytes = encode_params(&params());
        let pos = bytes.iter().position(|&b| b == b'1').unwrap();
        bytes[pos] = b'9';
        let err = decode_params(&bytes).unwrap_err();
        assert!(err.to_string().contains("version 9"), "{err}");
    }

    #[test]
    fn config_mismatch_names_shape() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.bin");
        let config = ModelConfig::new(7, 4, vec![7]);
        save_params(&init_params(&config, &[2; 7], 1).unwrap(), &path).unwrap();
        let other = ModelConfig::new(8, 4, vec![7]);
        let err = load_params_for(&path, &other).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }), "{err}");
        assert!(err.to_string().contains("num_fields"));
        assert!(load_params_for(&path, &config).is_ok());
    }

    #[test]
    fn manifest_counts_every_parameter() {
        let p = params();
        let (header, _) = decode_header(&encode_params(&p)).unwrap();
        assert_eq!(header.parameter_count(), p.parameter_count());
    }
}
