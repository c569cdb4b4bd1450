use clap::ValueEnum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

pub struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Table { headers: headers.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.headers.len());
        self.rows.push(cells);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => std::iter::once(&self.headers)
                .chain(&self.rows)
                .map(|r| r.join(",") + "\n")
                .collect(),
            _ => {
                let widths: Vec<usize> = (0..self.headers.len())
                    .map(|c| std::iter::once(&self.headers).chain(&self.rows).map(|r| r[c].len()).max().unwrap_or(0))
                    .collect();
                let line = |r: &[String]| {
                    let cells: Vec<String> = r.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect();
                    cells.join("  ").trim_end().to_string() + "\n"
                };
                let rule = widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("  ") + "\n";
                let mut out = line(&self.headers);
                out.push_str(&rule);
                for r in &self.rows {
                    out.push_str(&line(r));
                }
                out
            }
        }
    }
}

pub fn num(v: f64) -> String {
    format!("{v:.6}")
}

pub fn sci(v: f64) -> String {
    format!("{v:.3e}")
}
