use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// One sample per line, comma-separated reals. Returns the d×n feature matrix.
pub fn load_csv_features(path: &Path) -> Result<DenseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(File::open(path).map_err(|e| Error::from(e).context(path.display()))?);
    let mut samples: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let values = record
            .iter()
            .map(|field| {
                field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    Error::Data(format!(
                        "{}: record {}: {field:?} is not a finite number",
                        path.display(),
                        line + 1
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        samples.push(values);
    }
    let n = samples.len();
    let d = samples.first().map_or(0, Vec::len);
    if n == 0 || d == 0 {
        return Err(Error::Data(format!("{}: no samples", path.display())));
    }
    let mut m = DenseMatrix::zeros(d, n);
    for (i, s) in samples.iter().enumerate() {
        m.set_column(i, s);
    }
    Ok(m)
}

/// Integer class ids, one per line.
pub fn load_class_ids(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::from(e).context(path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.trim().parse::<usize>().map_err(|_| {
                Error::Data(format!(
                    "{}: line {}: {:?} is not a class id",
                    path.display(),
                    i + 1,
                    l.trim()
                ))
            })
        })
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let offset = e.position().map_or(0, |p| p.byte());
    Error::format(offset, format!("{}: {e}", path.display()))
}
