//! Report assembly: CSV rendering with a fixed numeric format so repeated
//! runs are byte-identical, plus atomic file writes.

use std::io;
use std::path::Path;

use crate::C64;

/// 17 significant digits: enough to round-trip any f64.
pub fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn fmt_c(z: C64) -> String {
    format!("{},{}", fmt_f(z.re), fmt_f(z.im))
}

pub fn fmt_bool(b: bool) -> String {
    if b { "true" } else { "false" }.to_string()
}

/// Write `content` to `path` via a temporary file and rename, refusing to
/// overwrite an existing file unless `force` is set.
pub fn write_atomic(path: &Path, content: &str, force: bool) -> io::Result<()> {
    if path.exists() && !force {
        return Err(io::Error::new(
            io::ErrorKind::AlreadyExists,
            format!("{} exists; pass --force to overwrite", path.display()),
        ));
    }
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, content)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.0, 1.0, -3.5e-7, std::f64::consts::PI, 1.0 / 3.0] {
            let s = fmt_f(x);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, x, "{s}");
        }
    }

    #[test]
    fn atomic_write_respects_force() {
        let dir = std::env::temp_dir().join(format!("oscillax-report-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("out.csv");
        write_atomic(&path, "a,b\n", false).unwrap();
        assert!(write_atomic(&path, "c,d\n", false).is_err());
        write_atomic(&path, "c,d\n", true).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "c,d\n");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
