//! Versioned model bundle serialization.

use std::collections::HashMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use sha2::{Digest, Sha256};

use crate::classifier::{ErrorMode, SvmModel};
use crate::config::PipelineConfig;
use crate::ded::{DedModel, Hypothesis, Layer};
use crate::diffusion::{DiffusionEmbedding, NystromReference};
use crate::error::{Result, VadError};
use crate::features::Standardizer;
use crate::pipeline::{BundleMetadata, ModelBundle};
use crate::Real;

/// Writes through a temp file in the destination directory, then renames.
pub fn write_atomic<F>(path: &Path, write: F) -> Result<()>
where
    F: FnOnce(&mut File) -> std::io::Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| VadError::io(dir, e))?;
    write(tmp.as_file_mut()).map_err(|e| VadError::io(path, e))?;
    tmp.as_file_mut().flush().map_err(|e| VadError::io(path, e))?;
    tmp.persist(path).map_err(|e| VadError::io(path, e.error))?;
    Ok(())
}

/// Current bundle format version.
pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"DVAD";
const SECTIONS: [&str; 9] = [
    "metadata",
    "config",
    "standardizer",
    "ded0",
    "ded1",
    "svm_realtime",
    "svm_batch",
    "embedding0",
    "embedding1",
];

#[derive(Default)]
struct Encoder(Vec<u8>);

impl Encoder {
    fn u64(&mut self, v: u64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }

    fn bytes(&mut self, b: &[u8]) {
        self.u64(b.len() as u64);
        self.0.extend_from_slice(b);
    }

    fn floats<T: Real>(&mut self, dims: &[usize], values: impl Iterator<Item = T>) {
        self.u64(dims.len() as u64);
        for &d in dims {
            self.u64(d as u64);
        }
        for v in values {
            self.f64(v.as_f64());
        }
    }

    fn array1<T: Real>(&mut self, a: &Array1<T>) {
        self.floats(&[a.len()], a.iter().copied());
    }

    fn array2<T: Real>(&mut self, a: &Array2<T>) {
        self.floats(&[a.nrows(), a.ncols()], a.iter().copied());
    }

    fn vec<T: Real>(&mut self, v: &[T]) {
        self.floats(&[v.len()], v.iter().copied());
    }
}

struct Decoder<'a> {
    data: &'a [u8],
    pos: usize,
    section: &'static str,
}

impl<'a> Decoder<'a> {
    fn new(data: &'a [u8], section: &'static str) -> Self {
        Self { data, pos: 0, section }
    }

    fn corrupt(&self, what: &str) -> VadError {
        VadError::CorruptBundle(format!("section {}: {what}", self.section))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.data.len()).ok_or_else(|| self.corrupt("truncated"))?;
        let out = &self.data[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| self.corrupt("size overflow"))
    }

    fn bytes(&mut self) -> Result<&'a [u8]> {
        let n = self.usize()?;
        self.take(n)
    }

    fn string(&mut self) -> Result<String> {
        let b = self.bytes()?;
        String::from_utf8(b.to_vec()).map_err(|_| self.corrupt("invalid utf-8"))
    }

    fn floats<T: Real>(&mut self, rank: usize) -> Result<(Vec<usize>, Vec<T>)> {
        let r = self.usize()?;
        if r != rank {
            return Err(self.corrupt(&format!("expected rank {rank}, found {r}")));
        }
        let dims: Vec<usize> = (0..rank).map(|_| self.usize()).collect::<Result<_>>()?;
        let count = dims
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .filter(|&c| c.checked_mul(8).is_some_and(|b| b <= self.data.len() - self.pos))
            .ok_or_else(|| self.corrupt("array larger than section"))?;
        let raw = self.take(count * 8)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8 bytes"))))
            .collect();
        Ok((dims, values))
    }

    fn array1<T: Real>(&mut self) -> Result<Array1<T>> {
        Ok(Array1::from(self.floats(1)?.1))
    }

    fn vec<T: Real>(&mut self) -> Result<Vec<T>> {
        Ok(self.floats(1)?.1)
    }

    fn array2<T: Real>(&mut self) -> Result<Array2<T>> {
        let (dims, values) = self.floats(2)?;
        Array2::from_shape_vec((dims[0], dims[1]), values).map_err(|_| self.corrupt("bad array shape"))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.data.len() {
            return Err(self.corrupt("trailing bytes"));
        }
        Ok(())
    }
}

fn encode_ded<T: Real>(e: &mut Encoder, m: &DedModel<T>) {
    e.u64(m.hypothesis.label() as u64);
    for layers in [&m.encoder, &m.decoder] {
        e.u64(layers.len() as u64);
        for l in layers {
            e.array2(&l.weights);
            e.array1(&l.biases);
        }
    }
}

fn decode_ded<T: Real>(d: &mut Decoder<'_>) -> Result<DedModel<T>> {
    let hyp = d.u64()?;
    if hyp > 1 {
        return Err(d.corrupt("hypothesis tag"));
    }
    let mut halves = Vec::with_capacity(2);
    for _ in 0..2 {
        let n = d.usize()?;
        let layers = (0..n)
            .map(|_| {
                Ok(Layer {
                    weights: d.array2()?,
                    biases: d.array1()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        halves.push(layers);
    }
    let decoder = halves.pop().expect("two halves");
    let encoder = halves.pop().expect("two halves");
    let model = DedModel {
        encoder,
        decoder,
        hypothesis: Hypothesis::from_label(hyp as u8),
    };
    model.validate().map_err(|e| d.corrupt(&e.to_string()))?;
    Ok(model)
}

fn encode_svm<T: Real>(e: &mut Encoder, s: &SvmModel<T>) {
    e.bytes(s.mode.as_str().as_bytes());
    e.vec(&s.weights);
    e.f64(s.bias.as_f64());
}

fn decode_svm<T: Real>(d: &mut Decoder<'_>, expect: ErrorMode) -> Result<SvmModel<T>> {
    let mode = ErrorMode::parse(&d.string()?).ok_or_else(|| d.corrupt("unknown mode"))?;
    if mode != expect {
        return Err(VadError::ModeMismatch {
            expected: expect.as_str().into(),
            found: mode.as_str().into(),
        });
    }
    let weights: Vec<T> = d.vec()?;
    if weights.len() != mode.dim() {
        return Err(d.corrupt("weight count does not match mode"));
    }
    let bias = T::lit(f64::from_le_bytes(d.take(8)?.try_into().expect("8 bytes")));
    Ok(SvmModel { weights, bias, mode })
}

fn encode_embedding<T: Real>(e: &mut Encoder, m: &DiffusionEmbedding<T>) {
    e.vec(&m.eigenvalues);
    e.array2(&m.right);
    e.vec(&m.psi_scale);
    e.array2(&m.coords);
    e.array2(&m.softmax);
    e.array2(&m.reference.points);
    e.vec(&m.reference.local_scales);
    e.vec(&m.reference.degrees);
    e.u64(m.reference.k as u64);
}

fn decode_embedding<T: Real>(d: &mut Decoder<'_>) -> Result<DiffusionEmbedding<T>> {
    let m = DiffusionEmbedding {
        eigenvalues: d.vec()?,
        right: d.array2()?,
        psi_scale: d.vec()?,
        coords: d.array2()?,
        softmax: d.array2()?,
        reference: NystromReference {
            points: d.array2()?,
            local_scales: d.vec()?,
            degrees: d.vec()?,
            k: d.usize()?,
        },
    };
    let n = m.reference.points.nrows();
    if m.eigenvalues.len() < 2
        || m.right.dim() != (n, m.eigenvalues.len())
        || m.reference.local_scales.len() != n
        || m.reference.degrees.len() != n
        || m.coords.ncols() != m.eigenvalues.len() - 1
        || m.psi_scale.len() != m.coords.ncols()
        || m.softmax.dim() != m.coords.dim()
    {
        return Err(d.corrupt("inconsistent embedding dimensions"));
    }
    Ok(m)
}

fn encode_metadata(m: &BundleMetadata) -> String {
    format!(
        "crate_version = {}\nconfig_hash = {}\nseed = {}\nded0_train_rows = {}\nded1_train_rows = {}\nded0_train_hash = {}\nded1_train_hash = {}\nclassifier_rows = {}\n",
        m.crate_version,
        m.config_hash,
        m.seed,
        m.ded_train_rows[0],
        m.ded_train_rows[1],
        m.ded_train_hash[0],
        m.ded_train_hash[1],
        m.classifier_rows
    )
}

fn decode_metadata(text: &str) -> Result<BundleMetadata> {
    let map: HashMap<&str, &str> = text
        .lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim(), v.trim()))
        .collect();
    let get = |k: &str| {
        map.get(k)
            .copied()
            .ok_or_else(|| VadError::CorruptBundle(format!("metadata lacks {k}")))
    };
    let num = |k: &str| -> Result<u64> {
        get(k)?
            .parse()
            .map_err(|_| VadError::CorruptBundle(format!("metadata {k} is not a number")))
    };
    Ok(BundleMetadata {
        crate_version: get("crate_version")?.to_string(),
        config_hash: get("config_hash")?.to_string(),
        seed: num("seed")?,
        ded_train_rows: [num("ded0_train_rows")? as usize, num("ded1_train_rows")? as usize],
        ded_train_hash: [get("ded0_train_hash")?.to_string(), get("ded1_train_hash")?.to_string()],
        classifier_rows: num("classifier_rows")? as usize,
    })
}

/// Serializes a bundle into the `DVAD` container format.
pub fn encode_bundle<T: Real>(b: &ModelBundle<T>) -> Vec<u8> {
    let mut sections: Vec<Vec<u8>> = Vec::with_capacity(SECTIONS.len());
    sections.push(encode_metadata(&b.metadata).into_bytes());
    sections.push(b.config.serialize().into_bytes());
    let mut e = Encoder::default();
    let s = &b.standardizer;
    e.array1(&s.mu);
    e.array1(&s.sigma);
    e.array1(&s.range_lo);
    e.array1(&s.range_hi);
    e.bytes(&s.degenerate.iter().map(|&d| d as u8).collect::<Vec<_>>());
    sections.push(e.0);
    for m in &b.ded {
        let mut e = Encoder::default();
        encode_ded(&mut e, m);
        sections.push(e.0);
    }
    for s in [&b.svm_realtime, &b.svm_batch] {
        let mut e = Encoder::default();
        encode_svm(&mut e, s);
        sections.push(e.0);
    }
    for m in &b.embeddings {
        let mut e = Encoder::default();
        encode_embedding(&mut e, m);
        sections.push(e.0);
    }
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(sections.len() as u32).to_le_bytes());
    for (name, payload) in SECTIONS.iter().zip(&sections) {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
        out.extend_from_slice(&crc32fast::hash(payload).to_le_bytes());
        out.extend_from_slice(payload);
    }
    out
}

/// Parses and validates a `DVAD` container.
pub fn decode_bundle<T: Real>(data: &[u8]) -> Result<ModelBundle<T>> {
    if data.len() < 12 || &data[..4] != MAGIC {
        return Err(VadError::NotABundle);
    }
    let version = u32::from_le_bytes(data[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(VadError::UnsupportedVersion {
            found: version,
            supported: FORMAT_VERSION,
        });
    }
    let count = u32::from_le_bytes(data[8..12].try_into().expect("4 bytes")) as usize;
    let mut pos = 12;
    let mut payloads: HashMap<String, &[u8]> = HashMap::new();
    let truncated = || VadError::CorruptBundle("truncated section header".into());
    for _ in 0..count {
        let name_len = u16::from_le_bytes(data.get(pos..pos + 2).ok_or_else(truncated)?.try_into().expect("2 bytes")) as usize;
        pos += 2;
        let name = std::str::from_utf8(data.get(pos..pos + name_len).ok_or_else(truncated)?)
            .map_err(|_| VadError::CorruptBundle("section name is not utf-8".into()))?
            .to_string();
        pos += name_len;
        let len = u64::from_le_bytes(data.get(pos..pos + 8).ok_or_else(truncated)?.try_into().expect("8 bytes"));
        let crc = u32::from_le_bytes(data.get(pos + 8..pos + 12).ok_or_else(truncated)?.try_into().expect("4 bytes"));
        pos += 12;
        let len = usize::try_from(len).map_err(|_| truncated())?;
        let end = pos.checked_add(len).filter(|&e| e <= data.len()).ok_or_else(|| {
            VadError::CorruptBundle(format!("section {name} extends past end of file"))
        })?;
        let payload = &data[pos..end];
        if crc32fast::hash(payload) != crc {
            return Err(VadError::CorruptBundle(format!("checksum mismatch in section {name}")));
        }
        pos = end;
        payloads.insert(name, payload);
    }
    if pos != data.len() {
        return Err(VadError::CorruptBundle("trailing bytes after last section".into()));
    }
    let section = |name: &'static str| -> Result<Decoder<'_>> {
        payloads
            .get(name)
            .map(|p| Decoder::new(p, name))
            .ok_or_else(|| VadError::CorruptBundle(format!("missing section {name}")))
    };
    let text = |name: &'static str| -> Result<String> {
        String::from_utf8(section(name)?.data.to_vec())
            .map_err(|_| VadError::CorruptBundle(format!("section {name} is not utf-8")))
    };
    let metadata = decode_metadata(&text("metadata")?)?;
    let config = PipelineConfig::parse(&text("config")?)
        .map_err(|e| VadError::CorruptBundle(format!("stored config invalid: {e}")))?;
    if config.hash() != metadata.config_hash {
        return Err(VadError::CorruptBundle("config hash does not match metadata".into()));
    }

    let mut d = section("standardizer")?;
    let mu: Array1<T> = d.array1()?;
    let sigma = d.array1()?;
    let range_lo = d.array1()?;
    let range_hi = d.array1()?;
    let degenerate: Vec<bool> = d.bytes()?.iter().map(|&b| b != 0).collect();
    d.finish()?;
    let dim = mu.len();
    if [sigma.len(), range_lo.len(), range_hi.len(), degenerate.len()].iter().any(|&l| l != dim)
        || dim != config.feature_dim()
    {
        return Err(VadError::CorruptBundle("standardizer dimensions disagree with config".into()));
    }
    let standardizer = Standardizer {
        mu,
        sigma,
        range_lo,
        range_hi,
        degenerate,
    };

    let mut ded = Vec::with_capacity(2);
    for (h, name) in ["ded0", "ded1"].into_iter().enumerate() {
        let mut d = section(name)?;
        let m: DedModel<T> = decode_ded(&mut d)?;
        d.finish()?;
        if m.hypothesis.label() as usize != h || m.architecture() != config.ded.architecture {
            return Err(VadError::CorruptBundle(format!("{name} does not match the stored config")));
        }
        ded.push(m);
    }
    let mut d = section("svm_realtime")?;
    let svm_realtime = decode_svm(&mut d, ErrorMode::Realtime)?;
    d.finish()?;
    let mut d = section("svm_batch")?;
    let svm_batch = decode_svm(&mut d, ErrorMode::Batch)?;
    d.finish()?;
    let mut embeddings = Vec::with_capacity(2);
    for name in ["embedding0", "embedding1"] {
        let mut d = section(name)?;
        let m: DiffusionEmbedding<T> = decode_embedding(&mut d)?;
        d.finish()?;
        if m.reference.points.ncols() != dim || m.dim() != config.diffusion.dim {
            return Err(VadError::CorruptBundle(format!("{name} does not match the stored config")));
        }
        embeddings.push(m);
    }
    let ded: [DedModel<T>; 2] = ded.try_into().expect("two models");
    let embeddings: [DiffusionEmbedding<T>; 2] = embeddings.try_into().expect("two embeddings");
    Ok(ModelBundle {
        config,
        standardizer,
        ded,
        svm_realtime,
        svm_batch,
        embeddings,
        metadata,
    })
}

pub fn save_bundle<T: Real>(bundle: &ModelBundle<T>, path: &Path) -> Result<()> {
    let bytes = encode_bundle(bundle);
    write_atomic(path, |f| f.write_all(&bytes))
}

pub fn load_bundle<T: Real>(path: &Path) -> Result<ModelBundle<T>> {
    let data = std::fs::read(path).map_err(|e| VadError::io(path, e))?;
    decode_bundle(&data)
}

/// Hex SHA-256 of the encoded bundle.
pub fn bundle_hash<T: Real>(bundle: &ModelBundle<T>) -> String {
    crate::config::hex(&Sha256::digest(encode_bundle(bundle)))
}
