use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Named rows of a dense vector table.
#[derive(Clone, Debug, PartialEq)]
pub struct NodeVectors {
    names: Vec<String>,
    index: HashMap<String, usize>,
    dim: usize,
    data: Vec<f64>,
}

impl NodeVectors {
    pub fn new(names: Vec<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != names.len() * dim {
            return Err(Error::DimensionMismatch(names.len() * dim, data.len()));
        }
        let index = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        Ok(NodeVectors { names, index, dim, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.index.get(name).map(|&i| self.row(i))
    }
}

/// Text format: `<count> <dim>` header, then `<name> <d values>` per line.
pub fn write_text(path: &Path, v: &NodeVectors) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(w, "{} {}", v.len(), v.dim).map_err(io)?;
    for (i, name) in v.names.iter().enumerate() {
        write!(w, "{name}").map_err(io)?;
        for x in v.row(i) {
            write!(w, " {x}").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn read_text(path: &Path) -> Result<NodeVectors> {
    let reader = BufReader::new(File::open(path).map_err(|e| Error::io(path, e))?);
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut lines = reader.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(1, "missing header".into()))?
        .map_err(|e| Error::io(path, e))?;
    let nums: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse().map_err(|_| parse_err(1, format!("bad header field '{t}'"))))
        .collect::<Result<_>>()?;
    let [count, dim] = nums[..] else {
        return Err(parse_err(1, "header must be '<count> <dim>'".into()));
    };
    let mut names = Vec::with_capacity(count);
    let mut data = Vec::with_capacity(count * dim);
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut toks = line.split_whitespace();
        let name = toks.next().expect("non-empty line");
        let row: Vec<f64> = toks
            .map(|t| t.parse().map_err(|_| parse_err(i + 2, format!("bad value '{t}'"))))
            .collect::<Result<_>>()?;
        if row.len() != dim {
            return Err(parse_err(i + 2, format!("expected {dim} values, got {}", row.len())));
        }
        names.push(name.to_string());
        data.extend(row);
    }
    if names.len() != count {
        return Err(parse_err(1, format!("header says {count} rows, file has {}", names.len())));
    }
    NodeVectors::new(names, dim, data)
}

/// Raw little-endian f32 rows in `bin`; `idx` holds `<count> <dim>` and one
/// name per line in row order.
pub fn write_binary(bin: &Path, idx: &Path, v: &NodeVectors) -> Result<()> {
    let mut w = BufWriter::new(File::create(bin).map_err(|e| Error::io(bin, e))?);
    for x in &v.data {
        w.write_all(&(*x as f32).to_le_bytes()).map_err(|e| Error::io(bin, e))?;
    }
    w.flush().map_err(|e| Error::io(bin, e))?;
    let mut text = format!("{} {}\n", v.len(), v.dim);
    for n in &v.names {
        text.push_str(n);
        text.push('\n');
    }
    std::fs::write(idx, text).map_err(|e| Error::io(idx, e))
}

pub fn read_binary(bin: &Path, idx: &Path) -> Result<NodeVectors> {
    let text = std::fs::read_to_string(idx).map_err(|e| Error::io(idx, e))?;
    let mut lines = text.lines();
    let header: Vec<usize> = lines
        .next()
        .unwrap_or("")
        .split_whitespace()
        .filter_map(|t| t.parse().ok())
        .collect();
    let [count, dim] = header[..] else {
        return Err(Error::Parse {
            path: idx.to_path_buf(),
            line: 1,
            message: "header must be '<count> <dim>'".into(),
        });
    };
    let names: Vec<String> = lines.map(str::to_string).collect();
    if names.len() != count {
        return Err(Error::DimensionMismatch(count, names.len()));
    }
    let mut bytes = Vec::new();
    File::open(bin)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(bin, e))?;
    if bytes.len() != count * dim * 4 {
        return Err(Error::DimensionMismatch(count * dim * 4, bytes.len()));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    NodeVectors::new(names, dim, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> NodeVectors {
        NodeVectors::new(
            vec!["a".into(), "b".into()],
            3,
            vec![0.1, -2.5, 1e-7, 3.0, 0.0, -0.333333333333],
        )
        .unwrap()
    }

    #[test]
    fn text_roundtrip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.txt");
        write_text(&p, &sample()).unwrap();
        assert!(std::fs::read_to_string(&p).unwrap().starts_with("2 3\na 0.1 -2.5"));
        assert_eq!(read_text(&p).unwrap(), sample());
    }

    #[test]
    fn binary_roundtrip_f32() {
        let dir = tempfile::tempdir().unwrap();
        let (b, i) = (dir.path().join("e.bin"), dir.path().join("e.idx"));
        write_binary(&b, &i, &sample()).unwrap();
        assert_eq!(std::fs::metadata(&b).unwrap().len(), 24);
        let back = read_binary(&b, &i).unwrap();
        assert_eq!(back.names(), sample().names());
        for (x, y) in back.data.iter().zip(&sample().data) {
            assert!((x - y).abs() <= 1e-7 * y.abs().max(1e-7));
        }
    }

    #[test]
    fn malformed_text_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.txt");
        std::fs::write(&p, "1 2\nx 1.0\n").unwrap();
        match read_text(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(read_text(&dir.path().join("missing")).is_err());
    }
}
