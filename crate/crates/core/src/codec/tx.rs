use serde::{Deserialize, Serialize};

use super::nvalue::{decode_nvalue, NValueMode};
use super::wire::{put_bytes, put_u32, put_u64, put_varint, Reader};
use super::CodecError;
use crate::hash::{sha256d, Hash256, Txid};
use crate::keys::{PublicKey, PUBLIC_KEY_LEN};

/// The only accepted transaction format version.
pub const TX_VERSION: u32 = 1944;

const OP_CHECKSIG: u8 = 0xAC;
const MAX_SIG_PUSH: usize = 75;

/// Reference to an output of an earlier transaction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OutPoint {
    pub txid: Txid,
    pub vout: u32,
}

impl OutPoint {
    /// The coinbase-style null reference.
    pub const NULL: OutPoint = OutPoint { txid: Hash256::ZERO, vout: u32::MAX };

    pub fn new(txid: Txid, vout: u32) -> Self {
        OutPoint { txid, vout }
    }

    pub fn is_null(&self) -> bool {
        *self == Self::NULL
    }
}

/// P2PK spending evidence: a signature and the key it verifies under.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ScriptSig {
    pub signature: Vec<u8>,
    pub public_key: PublicKey,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TxIn {
    pub prev_out: OutPoint,
    /// Absent only for null inputs and coins moved under law-enforcement authority.
    pub script_sig: Option<ScriptSig>,
    pub sequence: u32,
}

impl TxIn {
    pub fn new(prev_out: OutPoint) -> Self {
        TxIn { prev_out, script_sig: None, sequence: u32::MAX }
    }
}

/// An output. `value` carries one of the three modes; the script is always
/// pay-to-pubkey, so only the key is stored.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TxOut {
    pub value: u64,
    pub pubkey: PublicKey,
}

impl TxOut {
    pub fn new(mode: NValueMode, pubkey: PublicKey) -> Result<Self, CodecError> {
        Ok(TxOut { value: mode.encode()?, pubkey })
    }

    pub fn mode(&self) -> Result<NValueMode, CodecError> {
        decode_nvalue(self.value)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Transaction {
    pub version: u32,
    pub inputs: Vec<TxIn>,
    pub outputs: Vec<TxOut>,
    pub lock_time: u32,
}

impl Transaction {
    pub fn new(inputs: Vec<TxIn>, outputs: Vec<TxOut>) -> Self {
        Transaction { version: TX_VERSION, inputs, outputs, lock_time: 0 }
    }

    pub fn txid(&self) -> Txid {
        sha256d(&serialize_tx(self))
    }

    pub fn digest(&self) -> Hash256 {
        tx_digest(self)
    }

    /// True for the null-input forms used by coinbase and genesis transactions.
    pub fn has_null_input(&self) -> bool {
        self.inputs.iter().any(|i| i.prev_out.is_null())
    }

    pub fn to_hex(&self) -> String {
        hex::encode(serialize_tx(self))
    }

    pub fn from_hex(s: &str) -> Result<Self, CodecError> {
        let bytes = hex::decode(s.trim()).map_err(|_| CodecError::BadHex)?;
        deserialize_tx(&bytes)
    }
}

fn put_script_sig(out: &mut Vec<u8>, sig: Option<&ScriptSig>) {
    match sig {
        None => put_varint(out, 0),
        Some(s) => {
            let mut script = Vec::with_capacity(2 + s.signature.len() + PUBLIC_KEY_LEN);
            script.push(s.signature.len() as u8);
            script.extend_from_slice(&s.signature);
            script.push(PUBLIC_KEY_LEN as u8);
            script.extend_from_slice(&s.public_key.0);
            put_bytes(out, &script);
        }
    }
}

fn parse_script_sig(script: &[u8]) -> Result<Option<ScriptSig>, CodecError> {
    if script.is_empty() {
        return Ok(None);
    }
    let mut r = Reader::new(script);
    let sig_len = r.u8()? as usize;
    if sig_len == 0 || sig_len > MAX_SIG_PUSH {
        return Err(CodecError::BadScript);
    }
    let signature = r.take(sig_len).map_err(|_| CodecError::BadScript)?.to_vec();
    if r.u8().map_err(|_| CodecError::BadScript)? as usize != PUBLIC_KEY_LEN {
        return Err(CodecError::BadScript);
    }
    let key = r.take(PUBLIC_KEY_LEN).map_err(|_| CodecError::BadScript)?;
    let public_key = PublicKey::from_slice(key).ok_or(CodecError::BadScript)?;
    r.finish().map_err(|_| CodecError::BadScript)?;
    Ok(Some(ScriptSig { signature, public_key }))
}

fn put_script_pubkey(out: &mut Vec<u8>, key: &PublicKey) {
    put_varint(out, (PUBLIC_KEY_LEN + 2) as u64);
    out.push(PUBLIC_KEY_LEN as u8);
    out.extend_from_slice(&key.0);
    out.push(OP_CHECKSIG);
}

fn parse_script_pubkey(script: &[u8]) -> Result<PublicKey, CodecError> {
    match script {
        [len, key @ .., OP_CHECKSIG] if *len as usize == PUBLIC_KEY_LEN => {
            PublicKey::from_slice(key).ok_or(CodecError::BadScript)
        }
        _ => Err(CodecError::BadScript),
    }
}

fn write_tx(out: &mut Vec<u8>, tx: &Transaction, with_sigs: bool) {
    put_u32(out, tx.version);
    put_varint(out, tx.inputs.len() as u64);
    for input in &tx.inputs {
        out.extend_from_slice(&input.prev_out.txid.0);
        put_u32(out, input.prev_out.vout);
        put_script_sig(out, if with_sigs { input.script_sig.as_ref() } else { None });
        put_u32(out, input.sequence);
    }
    put_varint(out, tx.outputs.len() as u64);
    for output in &tx.outputs {
        put_u64(out, output.value);
        put_script_pubkey(out, &output.pubkey);
    }
    put_u32(out, tx.lock_time);
}

pub fn serialize_tx(tx: &Transaction) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + tx.inputs.len() * 150 + tx.outputs.len() * 44);
    write_tx(&mut out, tx, true);
    out
}

pub(crate) fn read_tx(r: &mut Reader<'_>) -> Result<Transaction, CodecError> {
    let version = r.u32()?;
    if version != TX_VERSION {
        return Err(CodecError::BadVersion(version));
    }
    let n_in = r.varint()?;
    let mut inputs = Vec::with_capacity(n_in.min(1024) as usize);
    for _ in 0..n_in {
        let txid = Hash256(r.array()?);
        let vout = r.u32()?;
        let script_sig = parse_script_sig(r.bytes()?)?;
        let sequence = r.u32()?;
        inputs.push(TxIn { prev_out: OutPoint { txid, vout }, script_sig, sequence });
    }
    let n_out = r.varint()?;
    let mut outputs = Vec::with_capacity(n_out.min(1024) as usize);
    for _ in 0..n_out {
        let value = r.u64()?;
        let pubkey = parse_script_pubkey(r.bytes()?)?;
        outputs.push(TxOut { value, pubkey });
    }
    let lock_time = r.u32()?;
    Ok(Transaction { version, inputs, outputs, lock_time })
}

pub fn deserialize_tx(bytes: &[u8]) -> Result<Transaction, CodecError> {
    let mut r = Reader::new(bytes);
    let tx = read_tx(&mut r)?;
    r.finish()?;
    Ok(tx)
}

/// Signing digest: double-SHA-256 of the serialization with every script
/// signature replaced by an empty script.
pub fn tx_digest(tx: &Transaction) -> Hash256 {
    let mut out = Vec::with_capacity(16 + tx.inputs.len() * 41 + tx.outputs.len() * 44);
    write_tx(&mut out, tx, false);
    sha256d(&out)
}
