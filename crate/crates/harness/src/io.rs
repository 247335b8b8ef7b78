//! Binary tensor and chain files.
//!
//! Tensor: `TRT1\n`, an ASCII line `n d1 .. dn\n`, then the entries as
//! little-endian f64 in first-index-fastest order.
//! Chain: `TRC1\n`, an ASCII line `n R0 .. Rn d1 .. dn\n`, then every core in
//! order with the same encoding.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use tensor_ring::{DenseTensor, TRChain, TRCore};

use crate::error::{HarnessError, Result};

pub const TENSOR_MAGIC: &str = "TRT1";
pub const CHAIN_MAGIC: &str = "TRC1";

fn write_values(w: &mut impl Write, values: &[f64]) -> Result<()> {
    for v in values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

fn read_values(r: &mut impl Read, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => {
            HarnessError::Format(format!("expected {count} values, data is truncated"))
        }
        _ => HarnessError::Io(e),
    })?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}

fn read_line(r: &mut impl BufRead) -> Result<String> {
    let mut line = Vec::new();
    r.read_until(b'\n', &mut line)?;
    if line.last() != Some(&b'\n') {
        return Err(HarnessError::Format("header line is not terminated".into()));
    }
    line.pop();
    String::from_utf8(line).map_err(|_| HarnessError::Format("header is not ASCII".into()))
}

fn parse_header(line: &str) -> Result<Vec<usize>> {
    line.split_ascii_whitespace()
        .map(|tok| {
            tok.parse::<usize>()
                .map_err(|_| HarnessError::Format(format!("bad header field {tok:?}")))
        })
        .collect()
}

fn expect_end(r: &mut impl Read) -> Result<()> {
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(HarnessError::Format("trailing bytes after data".into()));
    }
    Ok(())
}

pub fn write_tensor(w: &mut impl Write, t: &DenseTensor) -> Result<()> {
    let dims: Vec<String> = t.dims().iter().map(usize::to_string).collect();
    writeln!(w, "{TENSOR_MAGIC}")?;
    writeln!(w, "{} {}", t.order(), dims.join(" "))?;
    write_values(w, t.data())
}

pub fn read_tensor(r: &mut impl BufRead) -> Result<DenseTensor> {
    if read_line(r)? != TENSOR_MAGIC {
        return Err(HarnessError::Format("missing TRT1 magic".into()));
    }
    let header = parse_header(&read_line(r)?)?;
    let (&n, dims) = header
        .split_first()
        .ok_or_else(|| HarnessError::Format("empty tensor header".into()))?;
    if n == 0 || dims.len() != n {
        return Err(HarnessError::Format(format!(
            "header declares order {n} but lists {} dims",
            dims.len()
        )));
    }
    let shape = tensor_ring::Shape::new(dims.to_vec())?;
    let data = read_values(r, shape.len())?;
    expect_end(r)?;
    Ok(DenseTensor::new(shape, data)?)
}

pub fn save_tensor(path: impl AsRef<Path>, t: &DenseTensor) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_tensor(&mut w, t)?;
    w.flush()?;
    Ok(())
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<DenseTensor> {
    read_tensor(&mut BufReader::new(File::open(path)?))
}

pub fn write_chain(w: &mut impl Write, chain: &TRChain) -> Result<()> {
    let mut fields = vec![chain.order().to_string()];
    fields.extend(chain.ranks().iter().map(usize::to_string));
    fields.extend(chain.dims().iter().map(usize::to_string));
    writeln!(w, "{CHAIN_MAGIC}")?;
    writeln!(w, "{}", fields.join(" "))?;
    for core in chain.cores() {
        write_values(w, core.data())?;
    }
    Ok(())
}

pub fn read_chain(r: &mut impl BufRead) -> Result<TRChain> {
    if read_line(r)? != CHAIN_MAGIC {
        return Err(HarnessError::Format("missing TRC1 magic".into()));
    }
    let header = parse_header(&read_line(r)?)?;
    let (&n, rest) = header
        .split_first()
        .ok_or_else(|| HarnessError::Format("empty chain header".into()))?;
    if n == 0 || rest.len() != 2 * n + 1 {
        return Err(HarnessError::Format(format!(
            "chain header for {n} cores needs {} fields, got {}",
            2 * n + 1,
            rest.len()
        )));
    }
    let (ranks, dims) = rest.split_at(n + 1);
    tensor_ring::model::check_rank_vector(dims, ranks)?;
    let mut cores = Vec::with_capacity(n);
    for k in 0..n {
        let len = ranks[k]
            .checked_mul(dims[k])
            .and_then(|v| v.checked_mul(ranks[k + 1]))
            .ok_or_else(|| HarnessError::Format("core size overflows".into()))?;
        let data = read_values(r, len)?;
        cores.push(TRCore::from_parts(ranks[k], dims[k], ranks[k + 1], data)?);
    }
    expect_end(r)?;
    Ok(TRChain::new(cores)?)
}

pub fn save_chain(path: impl AsRef<Path>, chain: &TRChain) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_chain(&mut w, chain)?;
    w.flush()?;
    Ok(())
}

pub fn load_chain(path: impl AsRef<Path>) -> Result<TRChain> {
    read_chain(&mut BufReader::new(File::open(path)?))
}
