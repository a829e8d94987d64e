//! Portable chain dumps: a JSON manifest plus a binary file of canonical
//! block encodings.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::chain::{Block, GenesisConfig};
use crate::codec::{Canonical, DecodeError, Decoder, Encoder};
use crate::params::ProtocolParams;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const BLOCKS_FILE: &str = "blocks.bin";
const MAGIC: &[u8; 8] = b"RRRCHN01";

#[derive(Debug, Error)]
pub enum DumpError {
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest: {0}")]
    Manifest(#[from] serde_json::Error),
    #[error("block file: {0}")]
    Decode(#[from] DecodeError),
    #[error("block file has a bad header")]
    BadMagic,
    #[error("manifest lists {manifest} blocks, file holds {file}")]
    CountMismatch { manifest: usize, file: usize },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct Manifest {
    genesis: GenesisConfig,
    params: ProtocolParams,
    blocks: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChainDump {
    pub genesis: GenesisConfig,
    pub params: ProtocolParams,
    pub blocks: Vec<Block>,
}

impl ChainDump {
    pub fn encode_blocks(blocks: &[Block]) -> Vec<u8> {
        let mut e = Encoder::new();
        e.fixed(MAGIC);
        e.u32(blocks.len() as u32);
        for b in blocks {
            e.bytes(&b.to_bytes());
        }
        e.finish()
    }

    pub fn decode_blocks(bytes: &[u8]) -> Result<Vec<Block>, DumpError> {
        let mut d = Decoder::new(bytes);
        if &d.array::<8>()? != MAGIC {
            return Err(DumpError::BadMagic);
        }
        let n = d.u32()?;
        let mut out = Vec::with_capacity(n as usize);
        for _ in 0..n {
            out.push(Block::from_bytes(&d.bytes()?)?);
        }
        d.finish()?;
        Ok(out)
    }

    pub fn save(&self, dir: &Path) -> Result<(), DumpError> {
        fs::create_dir_all(dir)?;
        let manifest = Manifest {
            genesis: self.genesis.clone(),
            params: self.params.clone(),
            blocks: self.blocks.len(),
        };
        fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
        fs::write(dir.join(BLOCKS_FILE), Self::encode_blocks(&self.blocks))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, DumpError> {
        let manifest: Manifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
        let blocks = Self::decode_blocks(&fs::read(dir.join(BLOCKS_FILE))?)?;
        if blocks.len() != manifest.blocks {
            return Err(DumpError::CountMismatch {
                manifest: manifest.blocks,
                file: blocks.len(),
            });
        }
        Ok(ChainDump {
            genesis: manifest.genesis,
            params: manifest.params,
            blocks,
        })
    }
}
