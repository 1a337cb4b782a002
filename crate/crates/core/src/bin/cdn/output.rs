use std::io::Write;
use std::path::Path;

use cdn_core::{CdnError, Result};

/// Writes `text` to `path` through a sibling temporary file and a rename,
/// or to standard output when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    let Some(path) = path else {
        let mut out = std::io::stdout().lock();
        return out
            .write_all(text.as_bytes())
            .and_then(|_| out.flush())
            .map_err(|e| CdnError::Io { path: "<stdout>".into(), source: e });
    };
    let io = |e| CdnError::Io { path: path.to_path_buf(), source: e };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => std::path::PathBuf::from("."),
    };
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    std::fs::write(&tmp, text).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        io(e)
    })
}
