//! Pulse-sequence file format: plain text, one pulse per row,
//! `index,label,duration_ns,duration_au` with durations at 17 significant
//! digits so a read-back reproduces the sequence bit for bit.

use anyhow::{bail, Context, Result};
use std::io::Write;
use std::path::Path;

use nonholo_core::rydberg::AU_TIME_S;
use nonholo_core::{PulseLabel, PulseSequence};

pub const HEADER: &str = "# nonholo-ctl v1";

pub fn write_sequence(path: &Path, seq: &PulseSequence) -> Result<()> {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    out.push_str("# index,label,duration_ns,duration_au\n");
    for (k, (label, tau)) in seq.pulses().enumerate() {
        let ns = tau * AU_TIME_S * 1e9;
        out.push_str(&format!("{k},{label},{ns:.16e},{tau:.16e}\n"));
    }
    let mut f = std::fs::File::create(path)
        .with_context(|| format!("cannot create sequence file {}", path.display()))?;
    f.write_all(out.as_bytes())
        .with_context(|| format!("cannot write sequence file {}", path.display()))?;
    Ok(())
}

pub fn read_sequence(path: &Path) -> Result<PulseSequence> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read sequence file {}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(first) if first.trim() == HEADER => {}
        Some(first) => bail!("unrecognized sequence file header {first:?}"),
        None => bail!("empty sequence file"),
    }
    let mut durations = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            bail!(
                "sequence file line {}: expected 4 comma-separated fields, got {}",
                lineno + 2,
                fields.len()
            );
        }
        let index: usize = fields[0]
            .parse()
            .with_context(|| format!("sequence file line {}: bad index", lineno + 2))?;
        if index != durations.len() {
            bail!(
                "sequence file line {}: index {index} out of order (expected {})",
                lineno + 2,
                durations.len()
            );
        }
        let expected = if index.is_multiple_of(2) {
            PulseLabel::A
        } else {
            PulseLabel::B
        };
        if fields[1] != expected.to_string() {
            bail!(
                "sequence file line {}: label {} does not alternate (expected {expected})",
                lineno + 2,
                fields[1]
            );
        }
        let tau: f64 = fields[3]
            .parse()
            .with_context(|| format!("sequence file line {}: bad duration_au", lineno + 2))?;
        durations.push(tau);
    }
    if durations.is_empty() {
        bail!("sequence file contains no pulses");
    }
    PulseSequence::from_durations(durations).context("invalid durations in sequence file")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.csv");
        let seq = PulseSequence::from_durations(vec![
            0.1234567890123456e7,
            std::f64::consts::PI * 1e6,
            1.0 / 3.0 * 1e-3,
            7.0e6,
        ])
        .unwrap();
        write_sequence(&path, &seq).unwrap();
        let back = read_sequence(&path).unwrap();
        assert_eq!(seq.durations(), back.durations());
    }

    #[test]
    fn truncated_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.csv");
        std::fs::write(&path, format!("{HEADER}\n0,A,1.0")).unwrap();
        assert!(read_sequence(&path).is_err());
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.csv");
        std::fs::write(&path, "# other v9\n0,A,1.0,1.0\n").unwrap();
        assert!(read_sequence(&path).is_err());
    }
}
