use std::fmt::Write;

/// 15 significant digits in scientific notation.
pub fn num(x: f64) -> String {
    format!("{x:.14e}")
}

/// CSV text with a `# ` preamble recording the artifact version, the command
/// and every resolved parameter.
#[derive(Debug, Clone, Default)]
pub struct CsvDoc {
    text: String,
}

impl CsvDoc {
    pub fn new(command: &str, params: &[(&str, String)]) -> Self {
        let mut text = format!("# splitnoise {}\n# command = {command}\n", crate::VERSION);
        for (k, v) in params {
            let _ = writeln!(text, "# {k} = {v}");
        }
        CsvDoc { text }
    }

    pub fn comment(&mut self, line: &str) {
        let _ = writeln!(self.text, "# {line}");
    }

    pub fn header(&mut self, cols: &[&str]) {
        self.text.push_str(&cols.join(","));
        self.text.push('\n');
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn blank(&mut self) {
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

/// Parameter lists are recorded with Rust's shortest round-trip formatting.
pub fn list(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}
