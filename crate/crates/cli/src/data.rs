//! Sequence files: CSV with input columns `u0, u1, …` followed by output
//! columns `y0, y1, …`, one row per time step.

use std::path::Path;

use esn_lrofr::persistence::write_atomic;
use nalgebra::DMatrix;

use crate::failure::{Category, Context, Failure, Outcome};

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub inputs: Option<DMatrix<f64>>,
    pub outputs: DMatrix<f64>,
}

impl Sequence {
    pub fn len(&self) -> usize {
        self.outputs.nrows()
    }
}

pub fn write(path: &Path, seq: &Sequence) -> Outcome<()> {
    let n_in = seq.inputs.as_ref().map_or(0, DMatrix::ncols);
    let n_out = seq.outputs.ncols();
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = (0..n_in)
        .map(|i| format!("u{i}"))
        .chain((0..n_out).map(|i| format!("y{i}")))
        .collect();
    w.write_record(&header)?;
    for k in 0..seq.len() {
        let mut row = Vec::with_capacity(n_in + n_out);
        if let Some(u) = &seq.inputs {
            row.extend(u.row(k).iter().map(f64::to_string));
        }
        row.extend(seq.outputs.row(k).iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::msg(Category::Io, e))?;
    write_atomic(path, &bytes).ctx(format!("writing {}", path.display()))
}

pub fn read(path: &Path) -> Outcome<Sequence> {
    let mut r = csv::Reader::from_path(path).ctx(format!("reading {}", path.display()))?;
    let header = r.headers()?.clone();
    let mut n_in = 0;
    let mut n_out = 0;
    for (j, name) in header.iter().enumerate() {
        let expected_u = format!("u{n_in}");
        let expected_y = format!("y{n_out}");
        if n_out == 0 && name == expected_u {
            n_in += 1;
        } else if name == expected_y {
            n_out += 1;
        } else {
            return Err(Failure::msg(
                Category::Data,
                format!("{}: column {j} is `{name}`, expected `{expected_u}` or `{expected_y}`", path.display()),
            ));
        }
    }
    if n_out == 0 {
        return Err(Failure::msg(Category::Data, format!("{}: no output columns", path.display())));
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (line, record) in r.records().enumerate() {
        let record = record?;
        for field in record.iter() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Failure::msg(Category::Data, format!("{}: row {}: `{field}` is not a number", path.display(), line + 1))
            })?;
            if !v.is_finite() {
                return Err(Failure::msg(Category::Data, format!("{}: row {}: non-finite value", path.display(), line + 1)));
            }
            values.push(v);
        }
        rows += 1;
    }
    let all = DMatrix::from_row_slice(rows, n_in + n_out, &values);
    Ok(Sequence {
        inputs: (n_in > 0).then(|| all.columns(0, n_in).into_owned()),
        outputs: all.columns(n_in, n_out).into_owned(),
    })
}
