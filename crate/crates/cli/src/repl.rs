use std::collections::HashMap;
use std::io::{BufRead, Write};

use blobgraph::engine::Database;

use crate::output::{self, Format};
use crate::CliError;

const HELP: &str = "statements end with `;`. commands: :stats  :explain <query>  :help  :quit";

fn stats(db: &Database, out: &mut impl Write) -> std::io::Result<()> {
    let g = db.graph().stats();
    writeln!(out, "nodes\t{}", g.node_count)?;
    writeln!(out, "relationships\t{}", g.rel_count)?;
    for (l, c) in &g.label_counts {
        writeln!(out, "label {l}\t{c}")?;
    }
    for (t, c) in &g.rel_type_counts {
        writeln!(out, "type {t}\t{c}")?;
    }
    writeln!(out, "blobs\t{}", db.blobs().ids().len())?;
    writeln!(out, "cached semantic values\t{}", db.extraction().cache_len())?;
    for (key, secs) in db.speeds().snapshot() {
        writeln!(out, "speed {key}\t{:.6} s/row", secs)?;
    }
    Ok(())
}

/// Reads statements until `:quit` or end of input. Statement errors are
/// reported and the session continues; only I/O failures end it.
pub fn run(db: &Database, input: impl BufRead, out: &mut impl Write, format: Format) -> Result<(), CliError> {
    let params = HashMap::new();
    let mut pending = String::new();
    for line in input.lines() {
        let line = line?;
        let trimmed = line.trim();
        if pending.is_empty() && trimmed.starts_with(':') {
            let (cmd, rest) = trimmed.split_once(char::is_whitespace).unwrap_or((trimmed, ""));
            match cmd {
                ":quit" | ":q" => break,
                ":help" => writeln!(out, "{HELP}")?,
                ":stats" => stats(db, out)?,
                ":explain" => match db.explain(rest.trim().trim_end_matches(';')) {
                    Ok(p) => write!(out, "{p}")?,
                    Err(e) => writeln!(out, "error: {e}")?,
                },
                other => writeln!(out, "unknown command {other}; {HELP}")?,
            }
            out.flush()?;
            continue;
        }
        pending.push_str(&line);
        pending.push('\n');
        let mut statements = crate::split_statements(&pending);
        // The tail is incomplete until a terminating `;` arrives.
        let complete = pending.trim_end().ends_with(';');
        let keep = if complete { None } else { statements.pop() };
        for s in statements {
            match db.query(&s, &params) {
                Ok(r) => output::write_result(out, &r, db.blobs(), format)?,
                Err(e) => writeln!(out, "error: {}", e.to_string().replace('\n', " "))?,
            }
        }
        pending = keep.map(|k| k + "\n").unwrap_or_default();
        out.flush()?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use blobgraph::engine::Config;

    use super::*;

    #[test]
    fn session_runs_statements_and_commands() {
        let db = Database::in_memory(Config::default()).unwrap();
        let script = "CREATE (:T {v: 1});\nCREATE (:T\n {v: 2});\nMATCH (n:T)\n  WHERE n.v = 2 RETURN n.v;\n:stats\nbogus;\n:quit\nCREATE (:T {v: 3});\n";
        let mut out = Vec::new();
        run(&db, script.as_bytes(), &mut out, Format::Tsv).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.contains("n.v\n2\n"), "{text}");
        assert!(text.contains("nodes\t2"), "{text}");
        assert!(text.contains("error:"), "{text}");
        assert_eq!(db.graph().node_count(), 2);
    }
}
