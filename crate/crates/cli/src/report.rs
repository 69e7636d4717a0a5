//! Summary tables over result directories.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use heatbv_core::limits::Verdict;

/// Every `verdict.json` below `dir`, in path order.
fn verdict_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let entries = fs::read_dir(&d).with_context(|| format!("reading {}", d.display()))?;
        for entry in entries {
            let path = entry?.path();
            if path.is_dir() {
                stack.push(path);
            } else if path.file_name().is_some_and(|n| n == "verdict.json") {
                found.push(path);
            }
        }
    }
    found.sort();
    Ok(found)
}

pub fn collect(dir: &Path) -> Result<Vec<Verdict>> {
    let mut all = Vec::new();
    for file in verdict_files(dir)? {
        let text =
            fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
        let verdicts: Vec<Verdict> =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", file.display()))?;
        all.extend(verdicts);
    }
    all.sort_by(|a, b| a.scenario.cmp(&b.scenario));
    Ok(all)
}

pub fn table(verdicts: &[Verdict]) -> String {
    let width = verdicts
        .iter()
        .map(|v| v.scenario.len())
        .max()
        .unwrap_or(0)
        .max(8);
    let mut out = format!(
        "{:<width$}  {:>15}  {:>15}  {:>10}  {:>9}  result\n",
        "scenario", "estimate", "target", "rel_err", "tolerance"
    );
    for v in verdicts {
        out.push_str(&format!(
            "{:<width$}  {:>15.9}  {:>15.9}  {:>10.3e}  {:>9.2e}  {}\n",
            v.scenario,
            v.limit_estimate,
            v.target,
            v.rel_err,
            v.tolerance,
            if v.pass { "pass" } else { "FAIL" }
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_and_recursive() {
        let dir = tempfile::tempdir().unwrap();
        let write = |sub: &str, v: &[Verdict]| {
            let d = dir.path().join(sub);
            fs::create_dir_all(&d).unwrap();
            fs::write(d.join("verdict.json"), serde_json::to_string(v).unwrap()).unwrap();
        };
        write("b", &[Verdict::new("zeta", 1.0, 1.0, 0.01)]);
        write("a/nested", &[Verdict::new("alpha", 2.0, 1.0, 0.01)]);
        let all = collect(dir.path()).unwrap();
        assert_eq!(
            all.iter().map(|v| v.scenario.as_str()).collect::<Vec<_>>(),
            ["alpha", "zeta"]
        );
        assert!(!all[0].pass && all[1].pass);
        assert_eq!(table(&all).lines().count(), 3);
    }

    #[test]
    fn empty_directory() {
        let dir = tempfile::tempdir().unwrap();
        assert!(collect(dir.path()).unwrap().is_empty());
    }
}
