//! CSV artifact assembly: `#`-prefixed metadata lines, a column header, then
//! data rows. The metadata block carries every setting needed to rerun the
//! job, and nothing volatile, so equal configurations produce byte-identical
//! files.

use std::fmt::Display;
use std::io::Write as _;
use std::path::Path;

use crate::CliError;

pub struct Artifact {
    meta: Vec<(String, String)>,
    columns: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Artifact {
    pub fn new(command: &str, columns: &[&'static str]) -> Self {
        let mut art = Artifact {
            meta: Vec::new(),
            columns: columns.to_vec(),
            rows: Vec::new(),
        };
        art.meta("tool", format!("l1pred {}", env!("CARGO_PKG_VERSION")));
        art.meta("command", command);
        art
    }

    pub fn meta(&mut self, key: &str, value: impl Display) {
        let value = value.to_string();
        debug_assert!(!key.contains('\n') && !value.contains('\n'));
        self.meta.push((key.to_string(), value));
    }

    pub fn row(&mut self, cells: Vec<String>) {
        assert_eq!(cells.len(), self.columns.len(), "row width mismatch");
        self.rows.push(cells);
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.meta {
            out.push_str("# ");
            out.push_str(k);
            out.push_str(": ");
            out.push_str(v);
            out.push('\n');
        }
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&escape(cell));
            }
            out.push('\n');
        }
        out
    }

    /// Writes to `out`, or stdout when no path is given.
    pub fn write(&self, out: Option<&Path>) -> Result<(), CliError> {
        let text = self.render();
        match out {
            Some(path) => std::fs::write(path, text).map_err(|e| {
                CliError::Config(format!("cannot write {}: {e}", path.display()))
            }),
            None => std::io::stdout()
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Config(format!("cannot write to stdout: {e}"))),
        }
    }
}

/// Standard CSV quoting, applied only when a cell needs it.
fn escape(cell: &str) -> String {
    if cell.contains([',', '"', '\n']) {
        format!("\"{}\"", cell.replace('"', "\"\""))
    } else {
        cell.to_string()
    }
}

/// Shortest round-trip decimal form; deterministic for a given bit pattern.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// Numbers for the human-facing report: rounded to 12 significant digits so
/// a value like 0.3 - 1.0 prints as -0.7, not a 17-digit neighbor.
pub fn num_short(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let rounded: f64 = format!("{v:.11e}").parse().unwrap();
    format!("{rounded}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_meta_then_header_then_rows() {
        let mut art = Artifact::new("risk-curve", &["c", "risk"]);
        art.meta("seed", 17);
        art.row(vec![num(1.0), num(1.0625)]);
        let text = art.render();
        assert_eq!(
            text,
            format!(
                "# tool: l1pred {}\n# command: risk-curve\n# seed: 17\nc,risk\n1,1.0625\n",
                env!("CARGO_PKG_VERSION")
            )
        );
    }

    #[test]
    fn short_numbers_shed_representation_residue() {
        assert_eq!(num_short(0.3 - 1.0), "-0.7");
        assert_eq!(num_short(0.1 + 0.2), "0.3");
        assert_eq!(num_short(1.3), "1.3");
        assert_eq!(num_short(0.0), "0");
        assert_eq!(num_short(1234.5), "1234.5");
    }

    #[test]
    fn empty_std_err_renders_as_empty_field() {
        assert_eq!(opt_num(None), "");
        assert_eq!(opt_num(Some(0.25)), "0.25");
    }

    #[test]
    fn cells_with_commas_or_quotes_are_quoted() {
        let mut art = Artifact::new("uniform", &["x_law", "c"]);
        art.row(vec!["uniball:d=1,m=1".into(), num(1.0)]);
        art.row(vec!["say \"hi\"".into(), num(2.0)]);
        let text = art.render();
        assert!(text.contains("\"uniball:d=1,m=1\",1\n"), "{text}");
        assert!(text.contains("\"say \"\"hi\"\"\",2\n"), "{text}");
    }
}
