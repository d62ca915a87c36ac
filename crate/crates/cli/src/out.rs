//! Output-directory handling with atomic writes (temp file + rename).

use std::path::{Path, PathBuf};

use sqzforge_core::Result;

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<OutDir> {
        std::fs::create_dir_all(root)?;
        Ok(OutDir { root: root.to_path_buf() })
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        let final_path = self.root.join(name);
        let tmp = self.root.join(format!(".{name}.tmp"));
        std::fs::write(&tmp, contents)?;
        std::fs::rename(&tmp, &final_path)?;
        Ok(final_path)
    }
}

/// Stable float formatting for reports (shortest round-trip form).
pub fn fnum(v: f64) -> String {
    format!("{v}")
}
