//! Header lines stamped on every emitted file.

use sha2::{Digest, Sha256};
use std::io::Write;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub scenario_sha256: String,
    pub seed: u64,
    pub version: String,
}

impl Provenance {
    pub fn new(scenario_sha256: impl Into<String>, seed: u64) -> Self {
        Self {
            scenario_sha256: scenario_sha256.into(),
            seed,
            version: TOOL_VERSION.to_string(),
        }
    }

    /// `#`-prefixed lines; CSV readers in this crate skip them.
    pub fn write_header<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "# edgeshed {}", self.version)?;
        writeln!(out, "# scenario_sha256 {}", self.scenario_sha256)?;
        writeln!(out, "# seed {}", self.seed)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_shape() {
        let mut buf = Vec::new();
        Provenance::new(sha256_hex(b"x"), 9).write_header(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().all(|l| l.starts_with('#')));
        assert!(text.contains("seed 9"));
    }
}
