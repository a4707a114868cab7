//! Reads lines on stdin and prints `verdict<TAB>score<TAB>converted` per line.

use std::io::{self, BufRead, Write};

use hatelab_core::encoding::{detect_encoding, zawgyi_to_unicode};

fn main() -> io::Result<()> {
    let stdin = io::stdin();
    let mut out = io::BufWriter::new(io::stdout().lock());
    for line in stdin.lock().lines() {
        let line = line?;
        let verdict = detect_encoding(&line);
        writeln!(out, "{:?}\t{:.3}\t{}", verdict.label, verdict.score, zawgyi_to_unicode(&line))?;
    }
    Ok(())
}
