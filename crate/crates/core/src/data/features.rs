//! Feature matrices as headered CSV: `label,f0,f1,...` with labels `+1`/`-1`.

use std::io::{Read, Write};

use super::Matrix;
use crate::{Error, Result};

pub fn read_features<R: Read>(input: R) -> Result<(Matrix, Vec<i8>)> {
    let mut reader = csv::Reader::from_reader(input);
    let header = reader.headers()?.clone();
    if header.get(0) != Some("label") {
        return Err(Error::InvalidArgument("feature CSV must start with a label column".into()));
    }
    let dim = header.len() - 1;
    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let bad = |what: &str| Error::InvalidArgument(format!("row {}: {what}", line + 1));
        let label: i8 = record[0].trim().parse().map_err(|_| bad("label is not an integer"))?;
        if label != 1 && label != -1 {
            return Err(bad("label must be +1 or -1"));
        }
        labels.push(label);
        for field in record.iter().skip(1) {
            data.push(field.trim().parse::<f64>().map_err(|_| bad("feature is not a number"))?);
        }
    }
    Ok((Matrix::from_vec(labels.len(), dim, data)?, labels))
}

pub fn write_features<W: Write>(out: W, features: &Matrix, labels: &[i8]) -> Result<()> {
    if labels.len() != features.rows() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} feature rows",
            labels.len(),
            features.rows()
        )));
    }
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["label".to_string()];
    header.extend((0..features.cols()).map(|k| format!("f{k}")));
    w.write_record(&header)?;
    for (i, &y) in labels.iter().enumerate() {
        let mut rec = vec![y.to_string()];
        rec.extend(features.row(i).iter().map(|v| v.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
