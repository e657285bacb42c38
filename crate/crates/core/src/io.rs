//! Serialization: the binary snapshot store, CSV field dumps and the CSV
//! tables written by the command-line driver.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use crate::diagnostics::EnergyTrace;
use crate::error::{Error, Result};
use crate::field::Field;
use crate::mesh::{Bounds, Mesh};
use crate::pod::{PodBasis, SnapshotSet, Variable};

pub const STORE_MAGIC: &[u8; 6] = b"QGROM1";
pub const STORE_VERSION: u32 = 1;

/// Byte length of a store with the given header.
pub fn store_len(nx: usize, ny: usize, n_snapshots: usize, lifting: bool) -> usize {
    let cells = nx * ny;
    let header = STORE_MAGIC.len() + 4 * 4 + 2;
    header + if lifting { 8 * cells } else { 0 } + n_snapshots * 8 * (cells + 1)
}

fn dim(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::Format(format!("{what} {v} does not fit in 32 bits")))
}

/// Write `set` in the little-endian store layout: magic, version, `nx`,
/// `ny`, snapshot count, variable tag, lifting flag, the lifting field if
/// present, then `(time, values)` per snapshot.
pub fn write_store(mut w: impl Write, set: &SnapshotSet) -> Result<()> {
    let mesh = set.mesh();
    w.write_all(STORE_MAGIC)?;
    for v in [
        STORE_VERSION,
        dim(mesh.nx(), "nx")?,
        dim(mesh.ny(), "ny")?,
        dim(set.len(), "snapshot count")?,
    ] {
        w.write_all(&v.to_le_bytes())?;
    }
    w.write_all(&[set.variable().tag(), u8::from(set.lifting().is_some())])?;
    let mut put = |values: &[f64]| -> Result<()> {
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    };
    if let Some(l) = set.lifting() {
        put(l.values())?;
    }
    for (i, &t) in set.times().iter().enumerate() {
        put(&[t])?;
        put(set.values(i))?;
    }
    Ok(())
}

/// Read a store written by [`write_store`]; the mesh spans `bounds`.
pub fn read_store(mut r: impl Read, bounds: Bounds) -> Result<SnapshotSet> {
    let mut magic = [0u8; 6];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != STORE_MAGIC {
        return Err(Error::Format("not a snapshot store (bad magic)".into()));
    }
    let mut u32s = [0u32; 4];
    for v in &mut u32s {
        let mut b = [0u8; 4];
        r.read_exact(&mut b).map_err(truncated)?;
        *v = u32::from_le_bytes(b);
    }
    let [version, nx, ny, n] = u32s;
    if version != STORE_VERSION {
        return Err(Error::Format(format!("unsupported store version {version}")));
    }
    let mut flags = [0u8; 2];
    r.read_exact(&mut flags).map_err(truncated)?;
    let variable = Variable::from_tag(flags[0])
        .ok_or_else(|| Error::Format(format!("unknown variable tag {}", flags[0])))?;
    let has_lifting = match flags[1] {
        0 => false,
        1 => true,
        f => return Err(Error::Format(format!("bad lifting flag {f}"))),
    };
    let mesh = Arc::new(
        Mesh::new(nx as usize, ny as usize, bounds)
            .map_err(|e| Error::Format(format!("bad mesh in store header: {e}")))?,
    );
    let cells = mesh.n_cells();
    let mut take = |count: usize| -> Result<Vec<f64>> {
        let mut buf = vec![0u8; 8 * count];
        r.read_exact(&mut buf).map_err(truncated)?;
        Ok(buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    };
    let lifting = if has_lifting {
        Some(Field::new(Arc::clone(&mesh), take(cells)?)?)
    } else {
        None
    };
    let mut set = SnapshotSet::new(Arc::clone(&mesh), variable);
    for _ in 0..n {
        let t = take(1)?[0];
        set.push(t, take(cells)?)
            .map_err(|e| Error::Format(format!("bad snapshot: {e}")))?;
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Format("trailing bytes after the last snapshot".into()));
    }
    set.set_lifting(lifting)?;
    Ok(set)
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Format("store is truncated".into())
    } else {
        Error::Io(e)
    }
}

pub fn save_store(path: impl AsRef<Path>, set: &SnapshotSet) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_store(&mut w, set)?;
    w.flush()?;
    Ok(())
}

pub fn load_store(path: impl AsRef<Path>, bounds: Bounds) -> Result<SnapshotSet> {
    read_store(BufReader::new(File::open(path)?), bounds)
}

/// Modes as a store with variable tag `Mode`, mode `i` at "time" `i + 1`,
/// and the basis lifting (if any) in the lifting slot.
pub fn basis_to_store(basis: &PodBasis) -> Result<SnapshotSet> {
    let mut set = SnapshotSet::new(Arc::clone(basis.mesh()), Variable::Mode);
    for (i, m) in basis.modes().iter().enumerate() {
        set.push_field((i + 1) as f64, m)?;
    }
    set.set_lifting(basis.lifting().cloned())?;
    Ok(set)
}

/// Inverse of [`basis_to_store`].
pub fn store_to_basis(set: &SnapshotSet, eigenvalues: Vec<f64>, variable: Variable) -> Result<PodBasis> {
    PodBasis::from_parts(set.fields().collect(), eigenvalues, variable, set.lifting().cloned())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Format(format!("{other:?}")),
    }
}

fn csv_writer(path: impl AsRef<Path>) -> Result<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(csv_err)
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// `x,y,value` per cell in row-major order.
pub fn write_field_dump(field: &Field, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["x", "y", "value"]).map_err(csv_err)?;
    for (c, v) in field.mesh().cell_centroids().iter().zip(field.values()) {
        w.write_record([format_f64(c[0]), format_f64(c[1]), format_f64(*v)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Read a field dump, recovering the uniform mesh from the cell centroids.
pub fn read_field_dump(path: impl AsRef<Path>) -> Result<Field> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut values = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        if rec.len() != 3 {
            return Err(Error::Format(format!("expected 3 columns, found {}", rec.len())));
        }
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse()
                .map_err(|_| Error::Format(format!("not a number: '{}'", &rec[i])))
        };
        xs.push(num(0)?);
        ys.push(num(1)?);
        values.push(num(2)?);
    }
    if values.is_empty() {
        return Err(Error::Format("field dump has no rows".into()));
    }
    let nx = 1 + xs.iter().skip(1).take_while(|&&x| x > xs[0]).count();
    if values.len() % nx != 0 {
        return Err(Error::Format("rows do not form a rectangular mesh".into()));
    }
    let ny = values.len() / nx;
    let dx = if nx > 1 { xs[1] - xs[0] } else { 2.0 * xs[0].abs().max(1.0) };
    let dy = if ny > 1 { ys[nx] - ys[0] } else { 2.0 * ys[0].abs().max(1.0) };
    let bounds = Bounds::new(
        xs[0] - 0.5 * dx,
        xs[0] + (nx as f64 - 0.5) * dx,
        ys[0] - 0.5 * dy,
        ys[0] + (ny as f64 - 0.5) * dy,
    );
    let mesh = Arc::new(Mesh::new(nx, ny, bounds).map_err(|e| Error::Format(e.to_string()))?);
    for (k, c) in mesh.cell_centroids().iter().enumerate() {
        let tol = 1e-9 * (dx.abs() + dy.abs());
        if (c[0] - xs[k]).abs() > tol || (c[1] - ys[k]).abs() > tol {
            return Err(Error::Format(format!("row {} is off the uniform mesh", k + 1)));
        }
    }
    Field::new(mesh, values)
}

/// `time,E`
pub fn write_energy_csv(trace: &EnergyTrace, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["time", "E"]).map_err(csv_err)?;
    for &(t, e) in trace.samples() {
        w.write_record([format_f64(t), format_f64(e)]).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `index,lambda,cumulative` with 1-based indices.
pub fn write_eigenvalues_csv(table: &[(usize, f64, f64)], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["index", "lambda", "cumulative"]).map_err(csv_err)?;
    for &(i, l, c) in table {
        w.write_record([i.to_string(), format_f64(l), format_f64(c)])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Read back the eigenvalue column of [`write_eigenvalues_csv`].
pub fn read_eigenvalues_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_err)?;
            rec.get(1)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| Error::Format("bad eigenvalue row".into()))
        })
        .collect()
}

/// `time,beta_1..,gamma_1..`
pub fn write_coefficients_csv(
    times: &[f64],
    beta: &[Vec<f64>],
    gamma: &[Vec<f64>],
    path: impl AsRef<Path>,
) -> Result<()> {
    if times.len() != beta.len() || times.len() != gamma.len() {
        return Err(Error::invalid("coefficient columns have different lengths"));
    }
    let nq = beta.first().map_or(0, Vec::len);
    let np = gamma.first().map_or(0, Vec::len);
    let mut w = csv_writer(path)?;
    let header: Vec<String> = std::iter::once("time".to_string())
        .chain((1..=nq).map(|i| format!("beta_{i}")))
        .chain((1..=np).map(|i| format!("gamma_{i}")))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for ((t, b), g) in times.iter().zip(beta).zip(gamma) {
        let row: Vec<String> = std::iter::once(*t)
            .chain(b.iter().copied())
            .chain(g.iter().copied())
            .map(format_f64)
            .collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// One line of the benchmark report.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub model: String,
    pub n_q: usize,
    pub n_psi: usize,
    pub alpha: f64,
    pub energy_fraction_q: f64,
    pub epsilon: f64,
    pub gyre_count: usize,
    pub online_seconds: f64,
    pub fom_seconds: f64,
    pub speedup: f64,
}

pub const REPORT_HEADER: [&str; 10] = [
    "model",
    "N_q",
    "N_psi",
    "alpha",
    "energy_fraction_q",
    "epsilon",
    "gyre_count",
    "online_seconds",
    "fom_seconds",
    "speedup",
];

pub fn write_report_csv(rows: &[ReportRow], path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(REPORT_HEADER).map_err(csv_err)?;
    for r in rows {
        w.write_record([
            r.model.clone(),
            r.n_q.to_string(),
            r.n_psi.to_string(),
            format_f64(r.alpha),
            format_f64(r.energy_fraction_q),
            format_f64(r.epsilon),
            r.gyre_count.to_string(),
            format!("{:.6}", r.online_seconds),
            format!("{:.6}", r.fom_seconds),
            format!("{:.6}", r.speedup),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_set(lifting: bool) -> SnapshotSet {
        let mesh = Arc::new(Mesh::new(3, 2, Bounds::basin()).unwrap());
        let mut set = SnapshotSet::new(Arc::clone(&mesh), Variable::Q);
        for k in 0..4 {
            let values = (0..6).map(|i| (i as f64 + 0.1) * (k as f64 - 1.3).powi(3)).collect();
            set.push(10.0 + 0.1 * (k + 1) as f64, values).unwrap();
        }
        if lifting {
            let l = Field::from_fn(mesh, |x, y| x - y / 3.0);
            set.set_lifting(Some(l)).unwrap();
        }
        set
    }

    #[test]
    fn store_round_trip_is_exact() {
        for lifting in [false, true] {
            let set = sample_set(lifting);
            let mut bytes = Vec::new();
            write_store(&mut bytes, &set).unwrap();
            assert_eq!(bytes.len(), store_len(3, 2, 4, lifting));
            assert_eq!(&bytes[..6], b"QGROM1");
            let back = read_store(bytes.as_slice(), Bounds::basin()).unwrap();
            assert_eq!(back, set);
        }
    }

    #[test]
    fn store_rejects_corruption() {
        let mut bytes = Vec::new();
        write_store(&mut bytes, &sample_set(true)).unwrap();

        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_store(bad.as_slice(), Bounds::basin()), Err(Error::Format(_))));

        let mut bad = bytes.clone();
        bad[6] = 2;
        assert!(matches!(read_store(bad.as_slice(), Bounds::basin()), Err(Error::Format(_))));

        let short = &bytes[..bytes.len() - 3];
        assert!(matches!(read_store(short, Bounds::basin()), Err(Error::Format(_))));

        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(read_store(long.as_slice(), Bounds::basin()), Err(Error::Format(_))));
    }

    #[test]
    fn field_dump_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let mesh = Arc::new(Mesh::new(4, 8, Bounds::basin()).unwrap());
        let f = Field::from_fn(mesh, |x, y| (7.0 * x).sin() / 3.0 + y.exp() * 1e-7);
        write_field_dump(&f, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4 * 8 + 1);
        assert_eq!(text.lines().next().unwrap(), "x,y,value");
        let back = read_field_dump(&path).unwrap();
        assert_eq!(back.values(), f.values());
        assert_eq!(back.mesh().nx(), 4);
        assert_eq!(back.mesh().ny(), 8);
    }

    #[test]
    fn zero_field_dump() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("z.csv");
        let mesh = Arc::new(Mesh::new(2, 2, Bounds::basin()).unwrap());
        write_field_dump(&Field::zeros(mesh), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let rows: Vec<&str> = text.lines().skip(1).collect();
        assert_eq!(rows.len(), 4);
        for r in rows {
            let v: f64 = r.rsplit(',').next().unwrap().parse().unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(format_f64(v).parse::<f64>().unwrap(), v);
        }
    }
}
