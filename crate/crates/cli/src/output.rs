//! CSV formatting and all-or-nothing file output.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

/// Fixed notation with 12 significant digits.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return format!("{:.11}", 0.0);
    }
    let mag = v.abs().log10().floor() as i32;
    let decimals = (11 - mag).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // Rounding can carry into a new leading digit, e.g. 9.99…→10.0.
    let digits = s.bytes().filter(u8::is_ascii_digit).skip_while(|&b| b == b'0').count();
    if digits > 12 && decimals > 0 {
        let d = decimals - 1;
        return format!("{v:.d$}");
    }
    s
}

pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self { text: header.join(",") + "\n" }
    }

    pub fn row(&mut self, fields: &[Field]) {
        let cells: Vec<String> = fields
            .iter()
            .map(|f| match f {
                Field::Num(v) => fmt_num(*v),
                Field::Int(i) => i.to_string(),
            })
            .collect();
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn into_string(self) -> String {
        self.text
    }
}

pub enum Field {
    Num(f64),
    Int(u64),
}

pub use Field::{Int, Num};

/// Sidecar JSON describing one invocation. Everything needed for a replay
/// is inside: the resolved config and the flags that affect formatting.
#[derive(Serialize)]
pub struct RunManifest {
    pub command: &'static str,
    pub artifact_version: &'static str,
    pub seed: u64,
    pub flags: Flags,
    pub outputs: Vec<String>,
    pub config_toml: String,
    pub results: Value,
}

#[derive(Clone, Copy, Serialize)]
pub struct Flags {
    pub paper_scale: bool,
    pub flux_axis: bool,
}

/// Files computed in memory, written together once everything succeeded.
#[derive(Default)]
pub struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    pub fn add(&mut self, name: String, contents: String) {
        self.files.push((name, contents));
    }

    pub fn names(&self) -> Vec<String> {
        self.files.iter().map(|f| f.0.clone()).collect()
    }

    /// Writes every file to a temporary name first, then renames them into
    /// place. A failure removes whatever temporaries were created.
    pub fn commit(self, dir: &Path) -> io::Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut staged: Vec<(PathBuf, PathBuf)> = Vec::with_capacity(self.files.len());
        let result = (|| {
            for (name, contents) in &self.files {
                let tmp = dir.join(format!(".{name}.tmp"));
                fs::write(&tmp, contents)?;
                staged.push((tmp, dir.join(name)));
            }
            for (tmp, dest) in &staged {
                fs::rename(tmp, dest)?;
            }
            Ok(())
        })();
        if let Err(e) = result {
            for (tmp, _) in &staged {
                let _ = fs::remove_file(tmp);
            }
            return Err(e);
        }
        Ok(staged.into_iter().map(|s| s.1).collect())
    }
}
