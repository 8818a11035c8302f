//! Vetting records from a file or from the terminal.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use gm_core::mask::FeatureClass;
use gm_core::pipeline::CaptureResult;
use gm_core::vetting::{default_record, ClassVerdict, Verdict, VettingRecord};

use crate::failure::{Failure, ResultExt};

/// Records keyed by capture id. Duplicate ids are an error.
pub fn load_vet_file(path: &Path) -> Result<BTreeMap<String, VettingRecord>, Failure> {
    let text = std::fs::read_to_string(path).input(&format!("cannot read {}", path.display()))?;
    let records: Vec<VettingRecord> =
        serde_json::from_str(&text).input(&format!("malformed vetting file {}", path.display()))?;
    let mut by_id = BTreeMap::new();
    for r in records {
        let id = r.capture_id.clone();
        if by_id.insert(id.clone(), r).is_some() {
            return Err(Failure::input(format!(
                "vetting file lists capture {id} twice"
            )));
        }
    }
    Ok(by_id)
}

/// Records for every result: from `file` where present, else AGREE-all.
/// File entries naming no processed capture are an error.
pub fn records_from_file(
    results: &[CaptureResult],
    mut file: BTreeMap<String, VettingRecord>,
) -> Result<Vec<VettingRecord>, Failure> {
    let out: Vec<VettingRecord> = results
        .iter()
        .map(|r| {
            let id = r.capture_id.to_string();
            file.remove(&id)
                .unwrap_or_else(|| default_record(id, &r.detections))
        })
        .collect();
    if let Some(id) = file.keys().next() {
        return Err(Failure::input(format!(
            "vetting file names unknown capture {id}"
        )));
    }
    Ok(out)
}

fn prompt(input: &mut dyn BufRead, out: &mut dyn Write, text: &str) -> Result<String, Failure> {
    write!(out, "{text}").environment("stdout")?;
    out.flush().environment("stdout")?;
    let mut line = String::new();
    if input.read_line(&mut line).environment("stdin")? == 0 {
        return Err(Failure::input("vetting aborted: end of input"));
    }
    Ok(line.trim().to_string())
}

/// `a`, `d` or `m`, optionally followed by rejected 0-based indices: `a 0,2`.
/// Empty input means `a`.
pub fn parse_class_answer(line: &str, count: usize) -> Option<(Verdict, Vec<usize>)> {
    let mut parts = line.splitn(2, char::is_whitespace);
    let verdict = match parts.next().unwrap_or("").to_ascii_lowercase().as_str() {
        "" | "a" | "agree" => Verdict::Agree,
        "d" | "discard" => Verdict::Discard,
        "m" | "missing" => Verdict::Missing,
        _ => return None,
    };
    let rest = parts.next().unwrap_or("").trim();
    let mut rejected = Vec::new();
    for tok in rest.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        let i: usize = tok.parse().ok()?;
        if i >= count {
            return None;
        }
        rejected.push(i);
    }
    if verdict == Verdict::Discard && !rejected.is_empty() {
        return None;
    }
    Some((verdict, rejected))
}

pub fn interactive_record(
    result: &CaptureResult,
    input: &mut dyn BufRead,
    out: &mut dyn Write,
) -> Result<VettingRecord, Failure> {
    let id = result.capture_id.to_string();
    writeln!(out, "capture {id} at t={:.2}s", result.timestamp).environment("stdout")?;
    let mut verdicts = Vec::new();
    for (&class, list) in result.detections.iter().filter(|(_, l)| !l.is_empty()) {
        for (i, inst) in list.iter().enumerate() {
            let width = inst
                .width_m
                .map(|w| format!(", width {w:.2} m"))
                .unwrap_or_default();
            writeln!(
                out,
                "  {class} #{i}: {:.6}, {:.6}{width}",
                inst.location.latitude(),
                inst.location.longitude()
            )
            .environment("stdout")?;
        }
        let text = format!(
            "  {class} ({} found) [a]gree / [d]iscard / [m]issing, optional rejected indices: ",
            list.len()
        );
        loop {
            let line = prompt(input, out, &text)?;
            match parse_class_answer(&line, list.len()) {
                Some((v, rejected)) => {
                    verdicts.push(ClassVerdict::new(class, v).rejecting(rejected));
                    break;
                }
                None => writeln!(out, "  not understood").environment("stdout")?,
            }
        }
    }
    let mut width_accepted = true;
    if result.sidewalk.is_some() {
        let line = prompt(input, out, "  accept sidewalk width? [Y/n]: ")?;
        width_accepted = !line.eq_ignore_ascii_case("n") && !line.eq_ignore_ascii_case("no");
    }
    loop {
        let line = prompt(
            input,
            out,
            "  classes missed entirely (comma list, blank for none): ",
        )?;
        let names: Result<Vec<FeatureClass>, _> = line
            .split(',')
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .map(str::parse)
            .collect();
        match names {
            Ok(classes) if classes.iter().all(|c| c.is_mappable()) => {
                for c in classes {
                    if !verdicts.iter().any(|v| v.class == c) {
                        verdicts.push(ClassVerdict::new(c, Verdict::Missing));
                    }
                }
                break;
            }
            _ => writeln!(out, "  unknown class").environment("stdout")?,
        }
    }
    Ok(VettingRecord {
        capture_id: id,
        verdicts,
        completed: true,
        width_accepted,
    })
}
