// SPDX-License-Identifier: Apache-2.0

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::CliError;
use crate::output::{OutDir, Stamp, Summary};
use crate::ReportArgs;

struct Line {
    source: String,
    summary: Summary,
}

#[derive(Serialize)]
struct Record<'a> {
    source: &'a str,
    test: &'a str,
    statistic: f64,
    target: f64,
    std_error: Option<f64>,
    z: Option<f64>,
    pass: bool,
}

fn read(dir: &Path) -> Result<Vec<Summary>, CliError> {
    let path = dir.join("summary.csv");
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(&path)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    reader
        .deserialize()
        .map(|r| r.map_err(|e: csv::Error| CliError::Data(format!("{}: {e}", path.display()))))
        .collect()
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |v| format!("{v:.4e}"))
}

pub fn run(args: &ReportArgs) -> Result<bool, CliError> {
    let mut lines = Vec::new();
    for dir in &args.inputs {
        let source = dir.display().to_string();
        lines.extend(read(dir)?.into_iter().map(|summary| Line { source: source.clone(), summary }));
    }
    if lines.is_empty() {
        return Err(CliError::Data("no summary records found".into()));
    }
    let passed = lines.iter().all(|l| l.summary.pass);

    let width = lines.iter().map(|l| l.source.len() + l.summary.test.len() + 1).max().unwrap_or(4).max(4);
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{:<width$}  {:>11}  {:>11}  {:>11}  {:>7}  result",
        "test", "statistic", "target", "std_error", "z"
    );
    for l in &lines {
        let s = &l.summary;
        let _ = writeln!(
            text,
            "{:<width$}  {:>11}  {:>11}  {:>11}  {:>7}  {}",
            format!("{}:{}", l.source, s.test),
            cell(Some(s.statistic)),
            cell(Some(s.target)),
            cell(s.std_error),
            s.z.map_or_else(|| "-".into(), |z| format!("{z:+.2}")),
            if s.pass { "PASS" } else { "FAIL" }
        );
    }
    let failed = lines.iter().filter(|l| !l.summary.pass).count();
    let _ = writeln!(text, "{} records, {} failed", lines.len(), failed);
    print!("{text}");

    let root: PathBuf = args.out.clone().unwrap_or_else(|| args.inputs[0].clone());
    let sources: Vec<String> = args.inputs.iter().map(|p| p.display().to_string()).collect();
    let mut out = OutDir::create(&root, Stamp::new("report", &sources, 0))?;
    out.csv(
        "report.csv",
        lines.iter().map(|l| Record {
            source: &l.source,
            test: &l.summary.test,
            statistic: l.summary.statistic,
            target: l.summary.target,
            std_error: l.summary.std_error,
            z: l.summary.z,
            pass: l.summary.pass,
        }),
    )?;
    let path = root.join("report.txt");
    std::fs::write(&path, &text).map_err(|e| CliError::io(&path, e))?;
    Ok(passed)
}
