use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::tx::{read_tx, serialize_tx, Transaction};
use super::wire::{put_u32, put_u64, put_varint, Reader};
use super::CodecError;
use crate::hash::{sha256d, sha256d_pair, BlockHash, Hash256};

pub const HEADER_LEN: usize = 32 + 32 + 4 + 32 + 8;

/// Proof-of-work threshold, a 256-bit big-endian integer.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Target(pub [u8; 32]);

impl Target {
    /// Every hash meets this target.
    pub const MAX: Target = Target([0xFF; 32]);

    /// Target with `zero_bits` leading zero bits and all remaining bits set.
    pub fn with_leading_zeros(zero_bits: u32) -> Target {
        let mut out = [0xFFu8; 32];
        for (i, byte) in out.iter_mut().enumerate() {
            let start = i as u32 * 8;
            if zero_bits >= start + 8 {
                *byte = 0;
            } else if zero_bits > start {
                *byte = 0xFF >> (zero_bits - start);
            }
        }
        Target(out)
    }

    pub fn is_met_by(&self, hash: &Hash256) -> bool {
        hash.0 <= self.0
    }

    /// Expected number of hashes per block: 2^256 / (target + 1).
    pub fn work(&self) -> BigUint {
        let target = BigUint::from_bytes_be(&self.0);
        (BigUint::from(1u8) << 256u32) / (target + 1u8)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }
}

impl fmt::Debug for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Target({})", self.to_hex())
    }
}

impl FromStr for Target {
    type Err = hex::FromHexError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut out = [0u8; 32];
        hex::decode_to_slice(s, &mut out)?;
        Ok(Target(out))
    }
}

impl Serialize for Target {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for Target {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct BlockHeader {
    pub prev_block_hash: BlockHash,
    pub merkle_root: Hash256,
    pub timestamp: u32,
    pub target: Target,
    pub nonce: u64,
}

impl BlockHeader {
    pub fn serialize(&self) -> [u8; HEADER_LEN] {
        let mut out = Vec::with_capacity(HEADER_LEN);
        out.extend_from_slice(&self.prev_block_hash.0);
        out.extend_from_slice(&self.merkle_root.0);
        put_u32(&mut out, self.timestamp);
        out.extend_from_slice(&self.target.0);
        put_u64(&mut out, self.nonce);
        out.try_into().expect("fixed header length")
    }

    fn read(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(BlockHeader {
            prev_block_hash: Hash256(r.array()?),
            merkle_root: Hash256(r.array()?),
            timestamp: r.u32()?,
            target: Target(r.array()?),
            nonce: r.u64()?,
        })
    }

    pub fn hash(&self) -> BlockHash {
        sha256d(&self.serialize())
    }

    pub fn meets_target(&self) -> bool {
        self.target.is_met_by(&self.hash())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Block {
    pub header: BlockHeader,
    pub transactions: Vec<Transaction>,
}

impl Block {
    pub fn hash(&self) -> BlockHash {
        self.header.hash()
    }

    pub fn compute_merkle_root(&self) -> Result<Hash256, CodecError> {
        let txids: Vec<_> = self.transactions.iter().map(Transaction::txid).collect();
        merkle_root(&txids)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(serialize_block(self))
    }

    pub fn from_hex(s: &str) -> Result<Self, CodecError> {
        let bytes = hex::decode(s.trim()).map_err(|_| CodecError::BadHex)?;
        deserialize_block(&bytes)
    }
}

pub fn serialize_block(block: &Block) -> Vec<u8> {
    let mut out = block.header.serialize().to_vec();
    put_varint(&mut out, block.transactions.len() as u64);
    for tx in &block.transactions {
        out.extend_from_slice(&serialize_tx(tx));
    }
    out
}

pub fn deserialize_block(bytes: &[u8]) -> Result<Block, CodecError> {
    let mut r = Reader::new(bytes);
    let header = BlockHeader::read(&mut r)?;
    let n = r.varint()?;
    let mut transactions = Vec::with_capacity(n.min(1024) as usize);
    for _ in 0..n {
        transactions.push(read_tx(&mut r)?);
    }
    r.finish()?;
    Ok(Block { header, transactions })
}

/// Bitcoin-style merkle root: pairwise double-SHA-256, duplicating the last
/// element of odd-length layers.
pub fn merkle_root(hashes: &[Hash256]) -> Result<Hash256, CodecError> {
    if hashes.is_empty() {
        return Err(CodecError::EmptyList);
    }
    let mut layer = hashes.to_vec();
    while layer.len() > 1 {
        if layer.len() % 2 == 1 {
            layer.push(*layer.last().expect("nonempty"));
        }
        layer = layer.chunks(2).map(|pair| sha256d_pair(&pair[0], &pair[1])).collect();
    }
    Ok(layer[0])
}
