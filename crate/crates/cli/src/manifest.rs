//! Run provenance attached to every output.

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub inputs: Vec<FileDigest>,
    pub config_digest: Option<String>,
    pub seeds: Vec<u64>,
    pub tool_version: String,
    /// The only field that changes between identical runs.
    pub timestamp: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.into(),
            inputs: Vec::new(),
            config_digest: None,
            seeds: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    pub fn input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(bytes),
        });
    }

    /// Footer for text output; every line starts with `# `.
    pub fn render(&self) -> String {
        let mut out = String::from("# run manifest\n");
        out.push_str(&format!("# command: {}\n", self.command));
        for f in &self.inputs {
            out.push_str(&format!("# input: {} sha256={}\n", f.path, f.sha256));
        }
        if let Some(d) = &self.config_digest {
            out.push_str(&format!("# config sha256: {d}\n"));
        }
        if !self.seeds.is_empty() {
            let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
            out.push_str(&format!("# seeds: {}\n", seeds.join(", ")));
        }
        out.push_str(&format!("# version: {}\n", self.tool_version));
        out.push_str(&format!("# timestamp: {}\n", self.timestamp));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_of_known_string() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn footer_lines_are_comments() {
        let mut m = RunManifest::new("check");
        m.input(Path::new("g.dag"), b"dag {}");
        m.seeds.push(3);
        assert!(m.render().lines().all(|l| l.starts_with("# ")));
    }
}
