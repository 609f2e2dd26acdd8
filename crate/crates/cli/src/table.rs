use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

/// A small comma-separated table with a header row. Cells never contain
/// commas or newlines; writers sanitize free text with [`cell`].
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableError(pub String);

impl std::fmt::Display for TableError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for TableError {}

/// Free text made safe for a cell.
pub fn cell(text: &str) -> String {
    text.replace([',', '\n', '\r'], ";")
}

/// Sample mean and standard error (zero for a single value).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn parse(text: &str, origin: &str) -> Result<Self, TableError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| TableError(format!("{origin}: empty file")))?
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(str::to_string).collect();
            if row.len() != header.len() {
                return Err(TableError(format!(
                    "{origin}: line {}: {} fields, header has {}",
                    i + 2,
                    row.len(),
                    header.len()
                )));
            }
            rows.push(row);
        }
        Ok(Self { header, rows })
    }

    pub fn read(path: &Path) -> Result<Self, TableError> {
        let text = std::fs::read_to_string(path).map_err(|e| TableError(format!("{}: {e}", path.display())))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }

    /// Sorts rows by `metric` descending (numerically), ties broken by the
    /// `variant` column ascending and then by the full row.
    pub fn rank(&mut self, metric: &str) -> Result<(), TableError> {
        let m = self
            .column(metric)
            .ok_or_else(|| TableError(format!("no column named {metric:?}")))?;
        let v = self.column("variant");
        let num = |s: &str| s.parse::<f64>().unwrap_or(f64::NEG_INFINITY);
        self.rows.sort_by(|a, b| {
            num(&b[m])
                .partial_cmp(&num(&a[m]))
                .unwrap_or(Ordering::Equal)
                .then_with(|| v.map_or(Ordering::Equal, |v| a[v].cmp(&b[v])))
                .then_with(|| a.cmp(b))
        });
        Ok(())
    }
}

/// Metric a summary is ranked by when none is requested.
pub fn default_metric(header: &[String]) -> Option<&str> {
    ["final_reachability_mean", "feature_gap_mean"]
        .into_iter()
        .find(|m| header.iter().any(|h| h == m))
        .or_else(|| header.iter().find(|h| h.ends_with("_mean")).map(String::as_str))
}

/// Merges summaries with identical columns into one ranked table.
pub fn compare(tables: &[(String, Table)], metric: Option<&str>) -> Result<Table, TableError> {
    let (first_name, first) = tables
        .first()
        .ok_or_else(|| TableError("compare needs at least one summary".into()))?;
    let mut merged = Table {
        header: first.header.clone(),
        rows: Vec::new(),
    };
    for (name, table) in tables {
        if table.header != first.header {
            let offending = table
                .header
                .iter()
                .zip(&first.header)
                .find(|(a, b)| a != b)
                .map(|(a, _)| a.clone())
                .or_else(|| first.header.get(table.header.len()).cloned())
                .or_else(|| table.header.get(first.header.len()).cloned())
                .unwrap_or_default();
            return Err(TableError(format!(
                "{name}: column {offending:?} does not match the schema of {first_name}"
            )));
        }
        merged.rows.extend(table.rows.iter().cloned());
    }
    let metric = match metric {
        Some(m) => m.to_string(),
        None => default_metric(&merged.header)
            .ok_or_else(|| TableError("no metric column to rank by".into()))?
            .to_string(),
    };
    merged.rank(&metric)?;
    Ok(merged)
}
