//! CSV formats: `t,x1,…,xd` for sampled paths, `t,dx1,…,dxd` for jump
//! paths, and `a11,…,add` columns appended for lifts.
//!
//! A jump-path file starts with a row at `t = 0` holding the start value;
//! a final all-zero row marks the horizon when the last jump is earlier.

use std::io::{Read, Write};

use super::lift::{BaseKind, Level2Lift};
use super::path::{Interpretation, JumpPath, SampledPath};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum AnyPath {
    Jump(JumpPath),
    Sampled(SampledPath),
}

impl AnyPath {
    pub fn dim(&self) -> usize {
        match self {
            AnyPath::Jump(p) => p.dim(),
            AnyPath::Sampled(p) => p.dim(),
        }
    }
}

fn header(prefix: &str, dim: usize) -> Vec<String> {
    std::iter::once("t".to_string()).chain((1..=dim).map(|i| format!("{prefix}{i}"))).collect()
}

fn area_header(dim: usize) -> Vec<String> {
    (1..=dim).flat_map(|i| (1..=dim).map(move |j| format!("a{i}{j}"))).collect()
}

fn fmt(x: f64) -> String {
    // Shortest representation that round-trips.
    format!("{x:?}")
}

pub fn write_sampled_csv<W: Write>(path: &SampledPath, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header("x", path.dim()))?;
    for k in 0..path.len() {
        let row = std::iter::once(path.times()[k]).chain(path.value(k).iter().copied()).map(fmt);
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_jump_csv<W: Write>(path: &JumpPath, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = path.dim();
    w.write_record(header("dx", d))?;
    w.write_record(std::iter::once(0.0).chain(path.start().iter().copied()).map(fmt))?;
    for k in 0..path.num_jumps() {
        w.write_record(std::iter::once(path.jump_times()[k]).chain(path.increment(k).iter().copied()).map(fmt))?;
    }
    if path.jump_times().last().is_none_or(|&t| t < path.horizon()) {
        w.write_record(std::iter::once(path.horizon()).chain(std::iter::repeat_n(0.0, d)).map(fmt))?;
    }
    w.flush()?;
    Ok(())
}

/// Writes the lift in the format of its base path with the running
/// second level appended. Jump-based lifts write increments between
/// consecutive grid rows (the first row holds the start value).
pub fn write_lift_csv<W: Write>(lift: &Level2Lift, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let d = lift.dim();
    let prefix = match lift.base_kind() {
        BaseKind::Jump => "dx",
        BaseKind::Sampled => "x",
    };
    let mut head = header(prefix, d);
    head.extend(area_header(d));
    w.write_record(head)?;
    for k in 0..lift.len() {
        let first: Vec<f64> = match (lift.base_kind(), k) {
            (BaseKind::Jump, 0) | (BaseKind::Sampled, _) => lift.value(k).to_vec(),
            (BaseKind::Jump, _) => lift.increment(k - 1, k),
        };
        let running = lift.running(k);
        let row = std::iter::once(lift.times()[k]).chain(first).chain(running.as_slice().iter().copied()).map(fmt);
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads either path format, dispatching on the header (`x…` or `dx…`).
/// Extra `a..` columns are ignored. Sampled paths are read with the given
/// interpretation.
pub fn read_path_csv<R: Read>(input: R, interpretation: Interpretation) -> Result<AnyPath> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let head = r.headers()?.clone();
    if head.get(0) != Some("t") {
        return Err(Error::InvalidPath("first column must be `t`".into()));
    }
    let is_jump = head.get(1).is_some_and(|h| h.starts_with("dx"));
    let prefix = if is_jump { "dx" } else { "x" };
    let dim = head.iter().skip(1).take_while(|h| h.starts_with(prefix) && !h.starts_with('a')).count();
    if dim == 0 {
        return Err(Error::InvalidPath("no coordinate columns".into()));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .ok_or_else(|| Error::InvalidPath(format!("missing column {i}")))?
                .parse::<f64>()
                .map_err(|e| Error::InvalidPath(format!("column {i}: {e}")))
        };
        times.push(parse(0)?);
        for i in 1..=dim {
            values.push(parse(i)?);
        }
    }
    if times.is_empty() {
        return Err(Error::InvalidPath("empty path file".into()));
    }
    if !is_jump {
        return Ok(AnyPath::Sampled(SampledPath::from_flat(dim, times, values, interpretation)?));
    }
    if times[0] != 0.0 {
        return Err(Error::InvalidPath("jump-path file must start with a t = 0 row".into()));
    }
    let start = values[..dim].to_vec();
    let horizon = *times.last().expect("non-empty");
    let mut jt = Vec::new();
    let mut inc = Vec::new();
    for k in 1..times.len() {
        let row = &values[k * dim..(k + 1) * dim];
        if row.iter().all(|&x| x == 0.0) {
            continue;
        }
        jt.push(times[k]);
        inc.extend_from_slice(row);
    }
    let horizon = if horizon > 0.0 { horizon } else { 1.0 };
    Ok(AnyPath::Jump(JumpPath::from_flat(start, jt, inc, horizon)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor_path::{ito_lift_jump, strato_lift_linear};

    #[test]
    fn jump_csv_round_trip() {
        let p = JumpPath::new(vec![0.5, 0.0], vec![0.1, 0.7], vec![vec![1.0, 0.0], vec![0.0, -1.0]], 2.0).unwrap();
        let mut buf = Vec::new();
        write_jump_csv(&p, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,dx1,dx2\n0.0,0.5,0.0\n"));
        assert_eq!(read_path_csv(&buf[..], Interpretation::GridSamples).unwrap(), AnyPath::Jump(p));
    }

    #[test]
    fn sampled_csv_round_trip() {
        let s =
            SampledPath::uniform(2, 0.1, vec![0.0, 0.0, 0.3, 1.0 / 3.0, -2.0, 1e-300], Interpretation::PiecewiseLinear)
                .unwrap();
        let mut buf = Vec::new();
        write_sampled_csv(&s, &mut buf).unwrap();
        assert_eq!(read_path_csv(&buf[..], Interpretation::PiecewiseLinear).unwrap(), AnyPath::Sampled(s));
    }

    #[test]
    fn lift_columns() {
        let s = SampledPath::uniform(1, 1.0, vec![0.0, 1.0, 0.0], Interpretation::PiecewiseLinear).unwrap();
        let mut buf = Vec::new();
        write_lift_csv(&strato_lift_linear(&s), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,x1,a11");
        assert_eq!(text.lines().nth(2).unwrap(), "1.0,1.0,0.5");
        // Lift files read back as their base path.
        assert_eq!(read_path_csv(&buf[..], Interpretation::PiecewiseLinear).unwrap(), AnyPath::Sampled(s));

        let p = JumpPath::new(vec![0.0, 0.0], vec![0.3, 0.6], vec![vec![1.0, 0.0], vec![0.0, 1.0]], 1.0).unwrap();
        let mut buf = Vec::new();
        write_lift_csv(&ito_lift_jump(&p), &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,dx1,dx2,a11,a12,a21,a22");
        assert_eq!(text.lines().nth(3).unwrap(), "0.6,0.0,1.0,0.0,1.0,0.0,0.0");
        assert_eq!(read_path_csv(&buf[..], Interpretation::GridSamples).unwrap(), AnyPath::Jump(p));
    }

    #[test]
    fn malformed_files() {
        assert!(read_path_csv("x,y\n1,2\n".as_bytes(), Interpretation::GridSamples).is_err());
        assert!(read_path_csv("t,x1\n".as_bytes(), Interpretation::GridSamples).is_err());
        assert!(read_path_csv("t,x1\n0,abc\n".as_bytes(), Interpretation::GridSamples).is_err());
    }
}
