use std::fs;
use std::path::Path;

use mcoin_core::{KeyPair, PublicKey, SignatureScheme};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeyFile {
    pub scheme: SignatureScheme,
    /// Secret key, lowercase hex.
    pub private: String,
    pub public: PublicKey,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl KeyFile {
    pub fn new(key: &KeyPair, label: Option<String>) -> Self {
        KeyFile {
            scheme: SignatureScheme::default(),
            private: hex::encode(key.secret_bytes()),
            public: key.public(),
            label,
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(&serde_json::to_value(self).expect("serializable"))
            .expect("serializable");
        text.push('\n');
        fs::write(path, text).map_err(CliError::io(path))
    }

    /// Reads a key file and checks the public key against the secret.
    pub fn load(path: &Path) -> Result<KeyPair, CliError> {
        let bad = |reason: String| CliError::BadKeyFile { path: path.to_path_buf(), reason };
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        let file: KeyFile = serde_json::from_str(&text).map_err(|e| bad(e.to_string()))?;
        let secret: [u8; 32] = hex::decode(&file.private)
            .ok()
            .and_then(|b| b.try_into().ok())
            .ok_or_else(|| bad("private key is not 32 bytes of hex".into()))?;
        let key = KeyPair::from_secret_bytes(&secret).map_err(|_| bad("private key out of range".into()))?;
        if key.public() != file.public {
            return Err(bad("public key does not match private key".into()));
        }
        Ok(key)
    }
}
