use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use qg_core::scene::serialize_scene;
use qg_core::SceneSystem;

/// Summary of one invocation. Printed (text or JSON); never written next to
/// the outputs, so output files stay bit-identical across runs.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    /// SHA-256 of the canonical re-serialization of the parsed scene.
    pub scene_digest: Option<String>,
    pub seed: u64,
    pub threads: usize,
    /// Seconds.
    pub wall_time: f64,
    pub outputs: Vec<String>,
    pub warnings: Vec<String>,
    pub summary: serde_json::Value,
}

impl RunReport {
    pub fn to_text(&self, body: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "qg {} (seed {}, {} thread(s), {:.2}s)", self.command, self.seed, self.threads, self.wall_time);
        if let Some(d) = &self.scene_digest {
            let _ = writeln!(s, "scene sha256 {d}");
        }
        s.push_str(body);
        if !body.ends_with('\n') && !body.is_empty() {
            s.push('\n');
        }
        for o in &self.outputs {
            let _ = writeln!(s, "wrote {o}");
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

/// Whitespace-insensitive digest: hashes the canonical serialization.
pub fn scene_digest(scene: &SceneSystem) -> String {
    hex::encode(Sha256::digest(serialize_scene(scene).as_bytes()))
}

pub(crate) fn display(p: &Path) -> String {
    p.display().to_string()
}
