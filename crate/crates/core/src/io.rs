//! Text formats for meshes, fields, tables, run summaries and manifests.
//!
//! Numbers are written with Rust's shortest round-trip `f64` formatting, so
//! every file re-imports to bit-identical values.
//!
//! Mesh files:
//!
//! ```text
//! mesh dim=2 nodes=9 cells=8 facets=8
//! n 0 0
//! ...
//! c 0 1 4
//! ...
//! f 0 1 dirichlet
//! ```
//!
//! Fields are CSV with a header row: `node,u1[,u2]` for P1 displacements,
//! `cell,s11[,s22,s12]` (dim 2) or `cell,s11,s22,s33,s12,s13,s23` for P0
//! tensors, `dof,value` for load vectors.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mesh::{FacetTag, FieldP0, FieldP1, LoadVector, Mesh};
use crate::tensor::{num_components, SymTensor};

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("line {line}: {msg}"))
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|e| parse_err(line, format!("bad number '{s}': {e}")))
}

fn parse_usize(s: &str, line: usize) -> Result<usize> {
    s.trim().parse::<usize>().map_err(|e| parse_err(line, format!("bad index '{s}': {e}")))
}

pub fn write_mesh<W: Write>(mesh: &Mesh, mut w: W) -> Result<()> {
    let d = mesh.dim();
    writeln!(
        w,
        "mesh dim={} nodes={} cells={} facets={}",
        d,
        mesh.num_nodes(),
        mesh.num_cells(),
        mesh.num_facets()
    )?;
    for n in 0..mesh.num_nodes() {
        let xs: Vec<String> = mesh.coord(n).iter().map(|v| v.to_string()).collect();
        writeln!(w, "n {}", xs.join(" "))?;
    }
    for c in 0..mesh.num_cells() {
        let ns: Vec<String> = mesh.cell_nodes(c).iter().map(|v| v.to_string()).collect();
        writeln!(w, "c {}", ns.join(" "))?;
    }
    for f in 0..mesh.num_facets() {
        let ns: Vec<String> = mesh.facet_nodes(f).iter().map(|v| v.to_string()).collect();
        let tag = match mesh.facet_tag(f) {
            FacetTag::Dirichlet => "dirichlet",
            FacetTag::Neumann => "neumann",
        };
        writeln!(w, "f {} {}", ns.join(" "), tag)?;
    }
    Ok(())
}

pub fn read_mesh<R: Read>(r: R) -> Result<Mesh> {
    let mut lines = BufReader::new(r).lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| parse_err(1, "empty mesh file"))?;
    let header = header?;
    let mut fields = header.split_whitespace();
    if fields.next() != Some("mesh") {
        return Err(parse_err(1, "expected 'mesh' header"));
    }
    let mut counts = BTreeMap::new();
    for kv in fields {
        let (k, v) = kv.split_once('=').ok_or_else(|| parse_err(1, format!("bad header entry '{kv}'")))?;
        counts.insert(k.to_string(), parse_usize(v, 1)?);
    }
    let get = |k: &str| counts.get(k).copied().ok_or_else(|| parse_err(1, format!("missing '{k}'")));
    let (dim, nn, nc, nf) = (get("dim")?, get("nodes")?, get("cells")?, get("facets")?);
    if !(dim == 1 || dim == 2) {
        return Err(parse_err(1, format!("unsupported dimension {dim}")));
    }
    let mut coords = Vec::with_capacity(nn * dim);
    let mut cells = Vec::with_capacity(nc * (dim + 1));
    let mut facets = Vec::with_capacity(nf * dim);
    let mut tags = Vec::with_capacity(nf);
    for (i, line) in lines {
        let line = line?;
        let ln = i + 1;
        let mut parts = line.split_whitespace();
        match parts.next() {
            None => continue,
            Some("n") => {
                let xs: Vec<&str> = parts.collect();
                if xs.len() != dim {
                    return Err(parse_err(ln, "wrong number of coordinates"));
                }
                for x in xs {
                    coords.push(parse_f64(x, ln)?);
                }
            }
            Some("c") => {
                let xs: Vec<&str> = parts.collect();
                if xs.len() != dim + 1 {
                    return Err(parse_err(ln, "wrong number of cell nodes"));
                }
                for x in xs {
                    cells.push(parse_usize(x, ln)?);
                }
            }
            Some("f") => {
                let xs: Vec<&str> = parts.collect();
                if xs.len() != dim + 1 {
                    return Err(parse_err(ln, "wrong number of facet entries"));
                }
                for x in &xs[..dim] {
                    facets.push(parse_usize(x, ln)?);
                }
                tags.push(match xs[dim] {
                    "dirichlet" => FacetTag::Dirichlet,
                    "neumann" => FacetTag::Neumann,
                    t => return Err(parse_err(ln, format!("unknown facet tag '{t}'"))),
                });
            }
            Some(t) => return Err(parse_err(ln, format!("unknown record '{t}'"))),
        }
    }
    if coords.len() != nn * dim || cells.len() != nc * (dim + 1) || tags.len() != nf {
        return Err(Error::Parse("record counts do not match the header".into()));
    }
    Mesh::from_parts(dim, coords, cells, facets, tags)
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

fn csv_err(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

/// Writes a numeric table with a header row.
pub fn write_table<W: Write>(w: W, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(header).map_err(csv_err)?;
    for row in rows {
        wr.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Writes a table of preformatted cells with a header row.
pub fn write_records<W: Write>(w: W, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut wr = csv_writer(w);
    wr.write_record(header).map_err(csv_err)?;
    for row in rows {
        wr.write_record(row).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads a numeric table, returning the header and rows.
pub fn read_table<R: Read>(r: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rd = csv::ReaderBuilder::new().has_headers(true).from_reader(r);
    let header: Vec<String> = rd.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        rows.push(rec.iter().map(|s| parse_f64(s, i + 2)).collect::<Result<Vec<_>>>()?);
    }
    Ok((header, rows))
}

const TENSOR_LABELS: [&[&str]; 3] = [
    &["s11"],
    &["s11", "s22", "s12"],
    &["s11", "s22", "s33", "s12", "s13", "s23"],
];

pub fn write_field_p1<W: Write>(w: W, u: &FieldP1) -> Result<()> {
    let d = u.dim;
    let mut header = vec!["node"];
    header.extend(["u1", "u2"][..d].iter());
    let rows: Vec<Vec<f64>> = u
        .data
        .chunks(d)
        .enumerate()
        .map(|(n, c)| std::iter::once(n as f64).chain(c.iter().copied()).collect())
        .collect();
    write_table(w, &header, &rows)
}

pub fn read_field_p1<R: Read>(r: R) -> Result<FieldP1> {
    let (header, rows) = read_table(r)?;
    let d = header.len().saturating_sub(1);
    if !(d == 1 || d == 2) || header[0] != "node" {
        return Err(Error::Parse("P1 field header must be node,u1[,u2]".into()));
    }
    let mut data = Vec::with_capacity(rows.len() * d);
    for (n, row) in rows.iter().enumerate() {
        if row.len() != d + 1 || row[0] != n as f64 {
            return Err(parse_err(n + 2, "rows must list nodes in order"));
        }
        data.extend_from_slice(&row[1..]);
    }
    Ok(FieldP1 { dim: d, data })
}

pub fn write_field_p0<W: Write>(w: W, s: &FieldP0) -> Result<()> {
    let d = s.data.first().map_or(1, |t| t.dim());
    let mut header = vec!["cell"];
    header.extend(TENSOR_LABELS[d - 1].iter());
    let rows: Vec<Vec<f64>> = s
        .data
        .iter()
        .enumerate()
        .map(|(c, t)| std::iter::once(c as f64).chain(t.components().iter().copied()).collect())
        .collect();
    write_table(w, &header, &rows)
}

pub fn read_field_p0<R: Read>(r: R) -> Result<FieldP0> {
    let (header, rows) = read_table(r)?;
    let nc = header.len().saturating_sub(1);
    let dim = (1..=3)
        .find(|&d| num_components(d) == nc)
        .ok_or_else(|| Error::Parse(format!("{nc} tensor components do not match any dimension")))?;
    let data = rows
        .iter()
        .enumerate()
        .map(|(c, row)| {
            if row.len() != nc + 1 || row[0] != c as f64 {
                return Err(parse_err(c + 2, "rows must list cells in order"));
            }
            SymTensor::from_components(dim, &row[1..])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FieldP0 { data })
}

pub fn write_load<W: Write>(w: W, l: &LoadVector) -> Result<()> {
    let rows: Vec<Vec<f64>> = l.data.iter().enumerate().map(|(i, v)| vec![i as f64, *v]).collect();
    write_table(w, &["dof", "value"], &rows)
}

pub fn read_load<R: Read>(r: R) -> Result<LoadVector> {
    let (_, rows) = read_table(r)?;
    Ok(LoadVector {
        data: rows.iter().map(|r| r.get(1).copied().unwrap_or(f64::NAN)).collect(),
    })
}

/// Ordered `key = value` record.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Summary {
    entries: Vec<(String, String)>,
}

impl Summary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: impl std::fmt::Display) -> &mut Self {
        let v = value.to_string();
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = v,
            None => self.entries.push((key.to_string(), v)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        for (k, v) in &self.entries {
            writeln!(w, "{k} = {v}")?;
        }
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self> {
        let mut s = Summary::new();
        for (i, line) in BufReader::new(r).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once(" = ")
                .ok_or_else(|| parse_err(i + 1, "expected 'key = value'"))?;
            s.set(k.trim(), v.trim());
        }
        Ok(s)
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if let Ok(rel) = path.strip_prefix(root) {
            out.push(rel.to_path_buf());
        }
    }
    Ok(())
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Writes `manifest.txt` listing every other file below `dir` with its SHA-256,
/// sorted by relative path.
pub fn write_manifest(dir: &Path) -> Result<PathBuf> {
    let mut files = Vec::new();
    collect_files(dir, dir, &mut files)?;
    files.retain(|p| p != Path::new("manifest.txt"));
    files.sort();
    let mut text = String::new();
    for f in &files {
        let name = f.to_string_lossy().replace('\\', "/");
        text.push_str(&format!("{}  {}\n", sha256_file(&dir.join(f))?, name));
    }
    let path = dir.join("manifest.txt");
    fs::write(&path, text)?;
    Ok(path)
}

/// Creates `path`'s parent directories and opens it for writing.
pub fn create(path: &Path) -> Result<fs::File> {
    if let Some(p) = path.parent() {
        fs::create_dir_all(p)?;
    }
    Ok(fs::File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{DirichletRule, Side};

    #[test]
    fn mesh_round_trip() {
        for mesh in [
            Mesh::rect(3, 2, &DirichletRule::new(&[Side::Left, Side::Top])).unwrap(),
            Mesh::interval(5, &DirichletRule::new(&[Side::Left])).unwrap(),
        ] {
            let mut buf = Vec::new();
            write_mesh(&mesh, &mut buf).unwrap();
            let back = read_mesh(buf.as_slice()).unwrap();
            assert_eq!(back.coords(), mesh.coords());
            assert_eq!(back.cells(), mesh.cells());
            assert_eq!(back.num_facets(), mesh.num_facets());
            for f in 0..mesh.num_facets() {
                assert_eq!(back.facet_nodes(f), mesh.facet_nodes(f));
                assert_eq!(back.facet_tag(f), mesh.facet_tag(f));
            }
        }
    }

    #[test]
    fn fields_round_trip_bitwise() {
        let mesh = Mesh::rect(3, 3, &DirichletRule::all()).unwrap();
        let u = FieldP1::interpolate(&mesh, |x| [(x[0] * 7.1).sin() / 3.0, 1e-300 * x[1] + 0.1]);
        let mut buf = Vec::new();
        write_field_p1(&mut buf, &u).unwrap();
        assert_eq!(read_field_p1(buf.as_slice()).unwrap(), u);
        let s = FieldP0 {
            data: (0..mesh.num_cells())
                .map(|c| SymTensor::from_components(2, &[c as f64 / 3.0, -1.0 / 7.0, f64::MIN_POSITIVE]).unwrap())
                .collect(),
        };
        let mut buf = Vec::new();
        write_field_p0(&mut buf, &s).unwrap();
        assert_eq!(read_field_p0(buf.as_slice()).unwrap(), s);
        let l = LoadVector {
            data: vec![0.1, 0.2, 1.0 / 3.0],
        };
        let mut buf = Vec::new();
        write_load(&mut buf, &l).unwrap();
        assert_eq!(read_load(buf.as_slice()).unwrap(), l);
    }

    #[test]
    fn malformed_inputs_rejected() {
        assert!(read_mesh("mesh dim=2 nodes=1 cells=0 facets=0\nn 0\n".as_bytes()).is_err());
        assert!(read_mesh("grid\n".as_bytes()).is_err());
        assert!(read_field_p1("node,u1\n1,0.5\n".as_bytes()).is_err());
        assert!(read_field_p0("cell,a,b\n0,1,2\n".as_bytes()).is_err());
        assert!(read_table("a,b\n1,x\n".as_bytes()).is_err());
    }

    #[test]
    fn summary_round_trip() {
        let mut s = Summary::new();
        s.set("scheme", "implicit").set("lambda", 1e-3).set("scheme", "explicit");
        let mut buf = Vec::new();
        s.write(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "scheme = explicit\nlambda = 0.001\n");
        assert_eq!(Summary::read(buf.as_slice()).unwrap(), s);
    }

    #[test]
    fn manifest_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("a.csv"), "x\n1\n").unwrap();
        fs::create_dir_all(dir.path().join("sub")).unwrap();
        fs::write(dir.path().join("sub/b.txt"), "hello").unwrap();
        let m1 = fs::read_to_string(write_manifest(dir.path()).unwrap()).unwrap();
        let m2 = fs::read_to_string(write_manifest(dir.path()).unwrap()).unwrap();
        assert_eq!(m1, m2);
        assert!(m1.contains("  a.csv\n") && m1.contains("  sub/b.txt\n"));
        assert!(m1.lines().all(|l| l.split("  ").next().unwrap().len() == 64));
    }
}
