//! Text formats: matrix JSON and spectrum, series and table CSV.
//!
//! Matrix JSON is `{"n": int, "re": [[...]], "im": [[...]]}` with `im`
//! optional. Spectrum CSV has header `theta,block_row,block_col,re,im` and one
//! line per grid point per entry. Floats are written with 17 significant
//! digits so that a write-read cycle is bit exact.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CMat, HermMat};
use crate::scalar::{cplx, Cplx};
use crate::spectrum::{grid_theta, SpectrumGrid};

/// Matrix in JSON form; `n` is omitted for non-square matrices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatrixJson {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixJson {
    pub fn from_cmat(m: &CMat<f64>) -> Self {
        let re = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].re).collect()).collect();
        let has_im = m.iter().any(|z| z.im != 0.0);
        let im = has_im.then(|| (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)].im).collect()).collect());
        Self { n: (m.nrows() == m.ncols()).then_some(m.nrows()), re, im }
    }

    pub fn from_real(m: &DMatrix<f64>) -> Self {
        Self::from_cmat(&m.map(|v| cplx(v, 0.0)))
    }

    pub fn to_cmat(&self) -> Result<CMat<f64>> {
        let rows = self.re.len();
        let cols = self.re.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::Parse("matrix has no entries".into()));
        }
        if let Some((i, _)) = self.re.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(Error::Parse(format!("row {i} of \"re\" has the wrong length")));
        }
        if let Some(n) = self.n {
            if n != rows || n != cols {
                return Err(Error::Parse(format!("\"n\" = {n} but \"re\" is {rows}x{cols}")));
            }
        }
        if let Some(im) = &self.im {
            if im.len() != rows || im.iter().any(|r| r.len() != cols) {
                return Err(Error::Parse("\"im\" and \"re\" shapes differ".into()));
            }
        }
        Ok(CMat::from_fn(rows, cols, |i, j| {
            cplx(self.re[i][j], self.im.as_ref().map_or(0.0, |im| im[i][j]))
        }))
    }

    pub fn to_herm(&self) -> Result<HermMat<f64>> {
        HermMat::new(self.to_cmat()?)
    }

    pub fn to_real(&self) -> Result<DMatrix<f64>> {
        if self.im.as_ref().is_some_and(|im| im.iter().flatten().any(|v| *v != 0.0)) {
            return Err(Error::Parse("expected a real matrix".into()));
        }
        Ok(self.to_cmat()?.map(|z| z.re))
    }
}

/// Spectrum in JSON form: block size and one matrix per grid point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumJson {
    pub m: usize,
    pub values: Vec<MatrixJson>,
}

impl SpectrumJson {
    pub fn from_grid(phi: &SpectrumGrid<f64>) -> Self {
        Self { m: phi.block_dim(), values: phi.values().iter().map(MatrixJson::from_cmat).collect() }
    }

    pub fn to_grid(&self) -> Result<SpectrumGrid<f64>> {
        let values = self.values.iter().map(MatrixJson::to_cmat).collect::<Result<Vec<_>>>()?;
        SpectrumGrid::new(self.m, values)
    }
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(e: csv::Error) -> Error {
    match e.position() {
        Some(p) => Error::Parse(format!("line {}: {e}", p.line())),
        None => Error::Parse(e.to_string()),
    }
}

fn parse_field(s: &str, line: u64, field: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}, field {}: cannot parse {s:?} as a number", field + 1)))
}

/// Writes a spectrum as CSV.
pub fn write_spectrum_csv<W: Write>(w: W, phi: &SpectrumGrid<f64>) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["theta", "block_row", "block_col", "re", "im"]).map_err(csv_err)?;
    let m = phi.block_dim();
    for (k, v) in phi.values().iter().enumerate() {
        let th = fmt17(phi.theta(k));
        for i in 0..m {
            for j in 0..m {
                wr.write_record([th.clone(), i.to_string(), j.to_string(), fmt17(v[(i, j)].re), fmt17(v[(i, j)].im)])
                    .map_err(csv_err)?;
            }
        }
    }
    wr.flush().map_err(|e| Error::Io(e.to_string()))
}

/// Reads a spectrum written by [`write_spectrum_csv`]. Grid points must
/// appear in increasing order and match `-π + 2πk/G`.
pub fn read_spectrum_csv<R: Read>(r: R) -> Result<SpectrumGrid<f64>> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(r);
    let headers = rd.headers().map_err(csv_err)?.clone();
    let want = ["theta", "block_row", "block_col", "re", "im"];
    if headers.len() != 5 || headers.iter().zip(want).any(|(a, b)| a != b) {
        return Err(Error::Parse(format!("line 1: expected header {}", want.join(","))));
    }
    let mut rows: Vec<(u64, f64, usize, usize, f64, f64)> = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let theta = parse_field(&rec[0], line, 0)?;
        let bi = rec[1].parse::<usize>().map_err(|_| Error::Parse(format!("line {line}, field 2: bad block row")))?;
        let bj = rec[2].parse::<usize>().map_err(|_| Error::Parse(format!("line {line}, field 3: bad block column")))?;
        rows.push((line, theta, bi, bj, parse_field(&rec[3], line, 3)?, parse_field(&rec[4], line, 4)?));
    }
    if rows.is_empty() {
        return Err(Error::Parse("spectrum file has no data rows".into()));
    }
    let m = rows.iter().map(|r| r.2.max(r.3)).max().unwrap_or(0) + 1;
    if !rows.len().is_multiple_of(m * m) {
        return Err(Error::Parse(format!("{} data rows is not a multiple of {}", rows.len(), m * m)));
    }
    let g = rows.len() / (m * m);
    let mut values = vec![CMat::zeros(m, m); g];
    for (idx, &(line, theta, i, j, re, im)) in rows.iter().enumerate() {
        let k = idx / (m * m);
        let expect = grid_theta::<f64>(g, k);
        if (theta - expect).abs() > 1e-9 {
            return Err(Error::Parse(format!("line {line}: theta {theta} does not match grid point {k} ({expect})")));
        }
        values[k][(i, j)] = cplx(re, im);
    }
    SpectrumGrid::new(m, values)
}

fn numeric_rows<R: Read>(r: R) -> Result<Vec<Vec<f64>>> {
    let mut rd = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(r);
    let mut out = Vec::new();
    for (n, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(n as u64 + 1, |p| p.line());
        let fields: Vec<&str> = rec.iter().filter(|f| !f.is_empty()).collect();
        if fields.is_empty() {
            continue;
        }
        // a leading non-numeric row is a header
        if out.is_empty() && n == 0 && fields.iter().any(|f| f.parse::<f64>().is_err()) {
            continue;
        }
        out.push(fields.iter().enumerate().map(|(i, f)| parse_field(f, line, i)).collect::<Result<Vec<_>>>()?);
    }
    Ok(out)
}

/// Reads a real table; all rows must have equal length.
pub fn read_matrix_csv<R: Read>(r: R) -> Result<DMatrix<f64>> {
    let rows = numeric_rows(r)?;
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err(Error::Parse("table has no data".into()));
    }
    if let Some((i, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
        return Err(Error::Parse(format!("data row {} has {} fields, expected {cols}", i + 1, rows[i].len())));
    }
    Ok(DMatrix::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

/// Reads a real vector given one value per line or as a single row.
pub fn read_vector_csv<R: Read>(r: R) -> Result<DVector<f64>> {
    let rows = numeric_rows(r)?;
    let v: Vec<f64> = rows.into_iter().flatten().collect();
    if v.is_empty() {
        return Err(Error::Parse("vector has no data".into()));
    }
    Ok(DVector::from_vec(v))
}

/// Reads a real time series, one `m`-vector per row.
pub fn read_series_csv<R: Read>(r: R) -> Result<Vec<DVector<Cplx<f64>>>> {
    let m = read_matrix_csv(r)?;
    Ok(m.row_iter().map(|row| DVector::from_iterator(row.len(), row.iter().map(|v| cplx(*v, 0.0)))).collect())
}

/// Writes a real table with an optional header.
pub fn write_matrix_csv<W: Write>(w: W, header: Option<&[&str]>, m: &DMatrix<f64>) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    if let Some(h) = header {
        wr.write_record(h).map_err(csv_err)?;
    }
    for row in m.row_iter() {
        wr.write_record(row.iter().map(|v| fmt17(*v))).map_err(csv_err)?;
    }
    wr.flush().map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_json_round_trip() {
        let m = CMat::from_fn(2, 2, |i, j| cplx(0.1 + i as f64 / 3.0, if i == j { 0.0 } else { 1e-17 + j as f64 }));
        let s = serde_json::to_string(&MatrixJson::from_cmat(&m)).unwrap();
        let back: MatrixJson = serde_json::from_str(&s).unwrap();
        assert_eq!(back.to_cmat().unwrap(), m);
        let real: MatrixJson = serde_json::from_str(r#"{"n":1,"re":[[2.5]]}"#).unwrap();
        assert_eq!(real.to_cmat().unwrap()[(0, 0)], cplx(2.5, 0.0));
        let bad: MatrixJson = serde_json::from_str(r#"{"n":2,"re":[[1.0,2.0]]}"#).unwrap();
        assert!(bad.to_cmat().is_err());
    }

    #[test]
    fn spectrum_csv_round_trip() {
        let phi = SpectrumGrid::from_fn(2, 8, |t: f64| {
            CMat::from_fn(2, 2, |i, j| if i == j { cplx(2.0 + t.cos() / 7.0, 0.0) } else if i < j { cplx(0.1, t.sin() / 3.0) } else { cplx(0.1, -t.sin() / 3.0) })
        })
        .unwrap();
        let mut buf = Vec::new();
        write_spectrum_csv(&mut buf, &phi).unwrap();
        let back = read_spectrum_csv(buf.as_slice()).unwrap();
        assert_eq!(back.values(), phi.values());
    }

    #[test]
    fn csv_diagnostics() {
        let e = read_matrix_csv("1,2\n3,x\n".as_bytes()).unwrap_err();
        assert!(e.to_string().contains("line 2"), "{e}");
        let v = read_vector_csv("value\n0.5\n0.25\n0.25\n".as_bytes()).unwrap();
        assert_eq!(v.len(), 3);
    }
}
