//! Plain-text tables for potentials and cylinder masses.
//!
//! ```text
//! # comment
//! depth 2
//! 1 1 0.5
//! 1 2 -0.25
//! ```
//!
//! Each data line lists the symbols of a word followed by its value. Values
//! are written in shortest round-trip form, so `write` then `parse` is exact.
//! A mass table uses the header `masses` and lists every admissible word up
//! to its longest length.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::measures::TabulatedMeasure;
use crate::potentials::LocallyConstantPotential;
use crate::sft::TransitionSystem;

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn parse_entry(line: usize, body: &str) -> Result<(Vec<usize>, f64)> {
    let fields: Vec<&str> = body.split_whitespace().collect();
    if fields.len() < 2 {
        return Err(Error::Parse { line, message: "expected symbols followed by a value".into() });
    }
    let (syms, val) = fields.split_at(fields.len() - 1);
    let word = syms
        .iter()
        .map(|s| s.parse::<usize>().map_err(|_| Error::Parse { line, message: format!("bad symbol '{s}'") }))
        .collect::<Result<Vec<_>>>()?;
    let value = val[0].parse::<f64>().map_err(|_| Error::Parse { line, message: format!("bad value '{}'", val[0]) })?;
    Ok((word, value))
}

/// Reads a potential table over `ts`.
pub fn parse_potential(ts: &TransitionSystem, text: &str) -> Result<LocallyConstantPotential> {
    let mut lines = data_lines(text);
    let (hl, header) = lines.next().ok_or(Error::Parse { line: 1, message: "empty potential table".into() })?;
    let depth = header
        .strip_prefix("depth")
        .and_then(|d| d.trim().parse::<usize>().ok())
        .ok_or_else(|| Error::Parse { line: hl, message: "expected header 'depth <d>'".into() })?;
    let mut entries = Vec::new();
    for (line, body) in lines {
        let (w, v) = parse_entry(line, body)?;
        if w.len() != depth || w.iter().any(|&s| s == 0 || s > ts.k()) {
            return Err(Error::Parse { line, message: format!("word {w:?} is not a {depth}-word over 1..={}", ts.k()) });
        }
        entries.push((w, v));
    }
    LocallyConstantPotential::from_table(ts, depth, entries)
}

/// Writes a potential table, words in lexicographic order.
pub fn write_potential(phi: &LocallyConstantPotential) -> String {
    let mut out = format!("depth {}\n", phi.depth());
    for (w, v) in phi.entries() {
        for s in &w {
            let _ = write!(out, "{s} ");
        }
        let _ = writeln!(out, "{v:?}");
    }
    out
}

/// Reads a mass table; additivity is validated by [`TabulatedMeasure::new`].
pub fn parse_measure(ts: &TransitionSystem, text: &str) -> Result<TabulatedMeasure> {
    let mut lines = data_lines(text);
    let (hl, header) = lines.next().ok_or(Error::Parse { line: 1, message: "empty mass table".into() })?;
    if header != "masses" {
        return Err(Error::Parse { line: hl, message: "expected header 'masses'".into() });
    }
    let mut entries = Vec::new();
    for (line, body) in lines {
        let (w, v) = parse_entry(line, body)?;
        if w.iter().any(|&s| s == 0 || s > ts.k()) {
            return Err(Error::Parse { line, message: format!("symbol out of range in {w:?}") });
        }
        entries.push((w, v));
    }
    TabulatedMeasure::new(ts, entries)
}

pub fn write_measure(mu: &TabulatedMeasure) -> String {
    let mut out = String::from("masses\n");
    for (w, m) in mu.entries() {
        for s in &w {
            let _ = write!(out, "{s} ");
        }
        let _ = writeln!(out, "{m:?}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measures::{CylinderMeasure, MarkovMeasure};
    use proptest::prelude::*;

    #[test]
    fn parses_with_comments() {
        let ts = TransitionSystem::golden_mean();
        let text = "# golden mean\ndepth 2\n1 1 0.5 # loop\n1 2 -0.25\n\n2 1 1e-3\n";
        let phi = parse_potential(&ts, text).unwrap();
        assert_eq!(phi.value(&[1, 2]), -0.25);
        assert_eq!(phi.value(&[2, 1]), 1e-3);
    }

    #[test]
    fn rejects_bad_tables() {
        let ts = TransitionSystem::golden_mean();
        assert!(matches!(parse_potential(&ts, "depth 2\n1 1 x\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_potential(&ts, "deep 2\n"), Err(Error::Parse { line: 1, .. })));
        assert!(matches!(parse_potential(&ts, "depth 2\n1 1 0\n1 2 0\n"), Err(Error::InvalidPotential(_))));
        assert!(matches!(parse_potential(&ts, "depth 1\n3 0\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn measure_round_trip_and_corruption() {
        let b = MarkovMeasure::bernoulli(&[0.3, 0.7]).unwrap();
        let tab = TabulatedMeasure::from_oracle(&b, 3).unwrap();
        let text = write_measure(&tab);
        let back = parse_measure(b.system(), &text).unwrap();
        assert_eq!(back.entries(), tab.entries());
        let bad = text.replace("1 1 1 ", "1 1 1 0.5 #");
        let err = parse_measure(b.system(), &bad).unwrap_err();
        assert!(err.to_string().contains("additivity"), "{err}");
        assert_eq!(back.mass(&[2, 1, 2, 2]), tab.mass(&[2, 1, 2, 2]));
    }

    proptest! {
        #[test]
        fn potential_round_trip_is_bit_exact(vals in proptest::collection::vec(-1e300f64..1e300, 9)) {
            let ts = TransitionSystem::full_shift(3);
            let phi = LocallyConstantPotential::from_fn(&ts, 2, |w| vals[(w[0] - 1) * 3 + w[1] - 1]).unwrap();
            let back = parse_potential(&ts, &write_potential(&phi)).unwrap();
            for (w, v) in phi.entries() {
                prop_assert_eq!(back.value(&w).to_bits(), v.to_bits());
            }
        }
    }
}
