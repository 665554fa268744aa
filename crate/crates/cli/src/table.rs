use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use anyhow::Context;

/// Rows of already formatted cells under a fixed header.
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table { header: header.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, gnuplot: bool) -> String {
        let sep = if gnuplot { " " } else { "," };
        let mut s = String::new();
        if gnuplot {
            s.push_str("# ");
        }
        s.push_str(&self.header.join(sep));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = if gnuplot {
                // gnuplot splits on whitespace, so cells must not contain any
                row.iter().map(|c| c.replace(char::is_whitespace, "_")).collect()
            } else {
                row.clone()
            };
            let _ = writeln!(s, "{}", cells.join(sep));
        }
        s
    }

    pub fn emit(&self, out: Option<&Path>, gnuplot: bool) -> anyhow::Result<()> {
        write_output(out, &self.render(gnuplot))
    }
}

pub fn write_output(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("{}: cannot write", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).context("cannot write to stdout")?;
            stdout.flush().context("cannot write to stdout")
        }
    }
}

pub fn nj(v: f64) -> String {
    format!("{v:.6}")
}
