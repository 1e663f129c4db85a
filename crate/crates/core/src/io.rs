//! CSV tables for point sets and polylines.
//!
//! Point sets use the header `x1,…,xn`. Polyline sets use
//! `branch_id,x1,…,xn`; a closed polyline is written with its first vertex
//! repeated at the end, and read back as closed.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::{Point, Polyline};

fn coord_header(n: usize) -> impl Iterator<Item = String> {
    (1..=n).map(|i| format!("x{i}"))
}

pub fn write_points<W: Write>(w: W, points: &[Point]) -> Result<()> {
    let n = points.first().map_or(0, |p| p.len());
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(coord_header(n))?;
    for p in points {
        wr.write_record(p.iter().map(|v| v.to_string()))?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_points<R: Read>(r: R) -> Result<Vec<Point>> {
    let mut rd = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        out.push(parse_row(&rec, 0, line)?);
    }
    Ok(out)
}

fn parse_row(rec: &csv::StringRecord, skip: usize, line: usize) -> Result<Point> {
    let vals = rec
        .iter()
        .skip(skip)
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::schema(format!("row {}", line + 1), e.to_string()))?;
    Ok(Point::from_vec(vals))
}

pub fn write_polylines<W: Write>(w: W, lines: &[Polyline]) -> Result<()> {
    let n = lines.iter().find_map(Polyline::dim).unwrap_or(0);
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(std::iter::once("branch_id".to_string()).chain(coord_header(n)))?;
    for (id, line) in lines.iter().enumerate() {
        let mut verts: Vec<&Point> = line.vertices().iter().collect();
        if line.is_closed() && verts.len() > 2 {
            verts.push(&line.vertices()[0]);
        }
        for v in verts {
            wr.write_record(std::iter::once(id.to_string()).chain(v.iter().map(|c| c.to_string())))?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Reads either a polyline table (`branch_id,x1,…`) or a bare point table
/// (`x1,…`, read as one polyline).
pub fn read_polylines<R: Read>(r: R) -> Result<Vec<Polyline>> {
    let mut rd = csv::Reader::from_reader(r);
    let with_id = rd.headers()?.get(0).is_some_and(|h| h.trim() == "branch_id");
    let mut groups: Vec<(String, Vec<Point>)> = Vec::new();
    for (line, rec) in rd.records().enumerate() {
        let rec = rec?;
        let id = if with_id { rec.get(0).unwrap_or("").trim().to_string() } else { String::new() };
        let p = parse_row(&rec, usize::from(with_id), line)?;
        match groups.last_mut() {
            Some((last, pts)) if *last == id => pts.push(p),
            _ => groups.push((id, vec![p])),
        }
    }
    groups
        .into_iter()
        .map(|(_, pts)| {
            let closed = pts.len() > 3 && pts.first() == pts.last();
            Polyline::new(pts, closed)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::point;

    #[test]
    fn polyline_round_trip_keeps_closedness() {
        let sq = Polyline::new(
            vec![point(&[0.0, 0.0]), point(&[1.0, 0.0]), point(&[1.0, 1.0]), point(&[0.0, 1.0])],
            true,
        )
        .unwrap();
        let seg = Polyline::new(vec![point(&[0.0, 0.0]), point(&[0.5, 0.25])], false).unwrap();
        let mut buf = Vec::new();
        write_polylines(&mut buf, &[sq.clone(), seg.clone()]).unwrap();
        let back = read_polylines(buf.as_slice()).unwrap();
        assert_eq!(back, vec![sq, seg]);
    }

    #[test]
    fn points_round_trip() {
        let pts = vec![point(&[0.1, -2.0, 3.5]), point(&[1e-17, 0.0, 7.0])];
        let mut buf = Vec::new();
        write_points(&mut buf, &pts).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("x1,x2,x3\n"));
        assert_eq!(read_points(buf.as_slice()).unwrap(), pts);
    }
}
