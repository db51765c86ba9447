//! Versioned binary checkpoint: model architecture + parameters, latent
//! code tables, optimizer moments, iteration counter, and the RNG position
//! needed to resume training bit-exactly.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "ARTSDFCK" | u32 version
//! category str | variant str
//! u32 point_freqs | u32 view_freqs
//! u32 shape_dim | u32 appearance_dim | u32 articulation_dim
//! geometry net | u8 has_deform [deform net] | appearance net
//! codebook (shape, appearance, articulation tables)
//! u32 n_optim | per entry: name str, u64 step, m f64s, v f64s
//! u64 iteration | u64 seed | u128 rng_word_pos
//! config blob str (flat key = value text)
//! ```
//!
//! Every network is stored as its layer specification plus the flat f64
//! parameter array, so a loaded checkpoint needs no out-of-band knowledge.

use std::collections::BTreeMap;
use std::path::Path;

use crate::autodiff::adam::OptimState;
use crate::autodiff::mlp::{Activation, MlpSpec};
use crate::error::{Error, Result};
use crate::fields::{CodeBook, FieldModel, LatentCode, NetBlock, Variant};
use crate::io::bin::{BinReader, BinWriter};

const MAGIC: &[u8; 8] = b"ARTSDFCK";
const VERSION: u32 = 1;

/// A complete training state.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Scene category this model was trained on.
    pub category: String,
    pub model: FieldModel,
    pub codes: CodeBook,
    /// Optimizer moments per parameter block, keyed by block name.
    pub optim: BTreeMap<String, OptimState>,
    /// Completed training iterations.
    pub iteration: u64,
    /// Seed the training RNG was created with.
    pub seed: u64,
    /// Stream position of the training RNG, for exact resume.
    pub rng_word_pos: u128,
    /// Resolved training configuration, `key = value` text.
    pub config_text: String,
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    let mut w = BinWriter::new();
    w.bytes(MAGIC);
    w.u32(VERSION);
    w.str(&ckpt.category);
    w.str(ckpt.model.variant.as_str());
    w.u32(ckpt.model.point_freqs as u32);
    w.u32(ckpt.model.view_freqs as u32);
    w.u32(ckpt.model.shape_dim as u32);
    w.u32(ckpt.model.appearance_dim as u32);
    w.u32(ckpt.model.articulation_dim as u32);
    write_net(&mut w, &ckpt.model.geometry);
    match &ckpt.model.deform {
        Some(net) => {
            w.u8(1);
            write_net(&mut w, net);
        }
        None => w.u8(0),
    }
    write_net(&mut w, &ckpt.model.appearance);
    write_codebook(&mut w, &ckpt.codes);
    w.u32(ckpt.optim.len() as u32);
    for (name, st) in &ckpt.optim {
        w.str(name);
        w.u64(st.step);
        w.f64_slice(&st.m);
        w.f64_slice(&st.v);
    }
    w.u64(ckpt.iteration);
    w.u64(ckpt.seed);
    w.u128(ckpt.rng_word_pos);
    w.str(&ckpt.config_text);
    std::fs::write(path, w.into_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = BinReader::new(&bytes, path);
    if r.take(8)? != MAGIC {
        return Err(Error::BadMagic {
            what: "checkpoint".into(),
            path: path.to_path_buf(),
        });
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::VersionMismatch {
            what: "checkpoint".into(),
            found: version.to_string(),
            expected: VERSION.to_string(),
        });
    }
    let category = r.str()?;
    let variant = Variant::parse(&r.str()?)?;
    let point_freqs = r.u32()? as usize;
    let view_freqs = r.u32()? as usize;
    let shape_dim = r.u32()? as usize;
    let appearance_dim = r.u32()? as usize;
    let articulation_dim = r.u32()? as usize;
    let geometry = read_net(&mut r, path)?;
    let deform = if r.u8()? == 1 {
        Some(read_net(&mut r, path)?)
    } else {
        None
    };
    let appearance = read_net(&mut r, path)?;
    if variant.has_deform() != deform.is_some() {
        return Err(Error::parse(
            path,
            format!("variant {variant:?} disagrees with deform-net presence"),
        ));
    }
    let codes = read_codebook(&mut r)?;
    let n_optim = r.u32()? as usize;
    let mut optim = BTreeMap::new();
    for _ in 0..n_optim {
        let name = r.str()?;
        let step = r.u64()?;
        let m = r.f64_slice()?;
        let v = r.f64_slice()?;
        optim.insert(name, OptimState { m, v, step });
    }
    let iteration = r.u64()?;
    let seed = r.u64()?;
    let rng_word_pos = r.u128()?;
    let config_text = r.str()?;
    r.expect_end()?;
    Ok(Checkpoint {
        category,
        model: FieldModel {
            variant,
            point_freqs,
            view_freqs,
            shape_dim,
            appearance_dim,
            articulation_dim,
            geometry,
            deform,
            appearance,
        },
        codes,
        optim,
        iteration,
        seed,
        rng_word_pos,
        config_text,
    })
}

fn write_activation(w: &mut BinWriter, a: Activation) {
    match a {
        Activation::Identity => w.u8(0),
        Activation::Relu => w.u8(1),
        Activation::Tanh => w.u8(2),
        Activation::Softplus { beta } => {
            w.u8(3);
            w.f64(beta);
        }
    }
}

fn read_activation(r: &mut BinReader, path: &Path) -> Result<Activation> {
    Ok(match r.u8()? {
        0 => Activation::Identity,
        1 => Activation::Relu,
        2 => Activation::Tanh,
        3 => Activation::Softplus { beta: r.f64()? },
        tag => return Err(Error::parse(path, format!("unknown activation tag {tag}"))),
    })
}

fn write_net(w: &mut BinWriter, net: &NetBlock) {
    w.u32(net.spec.input_dim as u32);
    w.u32(net.spec.output_dim as u32);
    w.usize_slice(&net.spec.hidden);
    write_activation(w, net.spec.hidden_activation);
    write_activation(w, net.spec.output_activation);
    match net.spec.skip_at {
        Some(i) => {
            w.u8(1);
            w.u32(i as u32);
        }
        None => w.u8(0),
    }
    w.f64_slice(&net.params);
}

fn read_net(r: &mut BinReader, path: &Path) -> Result<NetBlock> {
    let input_dim = r.u32()? as usize;
    let output_dim = r.u32()? as usize;
    let hidden = r.usize_slice()?;
    let hidden_activation = read_activation(r, path)?;
    let output_activation = read_activation(r, path)?;
    let skip_at = if r.u8()? == 1 {
        Some(r.u32()? as usize)
    } else {
        None
    };
    let spec = MlpSpec {
        input_dim,
        hidden,
        output_dim,
        hidden_activation,
        output_activation,
        skip_at,
    };
    spec.validate()?;
    let params = r.f64_slice()?;
    if params.len() != spec.param_count() {
        return Err(Error::parse(
            path,
            format!(
                "network stores {} parameters, spec wants {}",
                params.len(),
                spec.param_count()
            ),
        ));
    }
    Ok(NetBlock { spec, params })
}

pub(crate) fn write_codebook(w: &mut BinWriter, codes: &CodeBook) {
    for table in [&codes.shape, &codes.appearance, &codes.articulation] {
        w.u32(table.len() as u32);
        for (id, code) in table {
            w.str(id);
            w.f64_slice(&code.0);
        }
    }
}

pub(crate) fn read_codebook(r: &mut BinReader) -> Result<CodeBook> {
    let mut tables = Vec::with_capacity(3);
    for _ in 0..3 {
        let n = r.u32()? as usize;
        let mut table = BTreeMap::new();
        for _ in 0..n {
            let id = r.str()?;
            let code = LatentCode(r.f64_slice()?);
            table.insert(id, code);
        }
        tables.push(table);
    }
    let articulation = tables.pop().unwrap();
    let appearance = tables.pop().unwrap();
    let shape = tables.pop().unwrap();
    Ok(CodeBook {
        shape,
        appearance,
        articulation,
    })
}
