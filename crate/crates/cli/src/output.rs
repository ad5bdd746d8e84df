//! Artifact writers: JSON with 17 significant digits per float and CSV
//! files whose first line is a versioned comment naming the columns.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use sphere_equilibrium::sphere::SpherePoint;

use crate::error::CliError;

pub const POINTS_HEADER: &str =
    "# speq points v1: x,y,z, chordal distance to each source (dist_1..dist_m), nearest";
pub const PROFILE_HEADER: &str =
    "# speq density_profile v1: cap, xi = <x, a_cap>, chord |x - a_cap|, weighted potential U + Q, standard error, in_support";

/// Pretty JSON whose floats are printed as `d.dddddddddddddddde±x`
/// (17 significant digits).
struct SignificantDigits<'a>(PrettyFormatter<'a>);

impl Formatter for SignificantDigits<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_array(writer)
    }
    fn end_array<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array(writer)
    }
    fn begin_array_value<W: ?Sized + Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_array_value(writer, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_array_value(writer)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object(writer)
    }
    fn end_object<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object(writer)
    }
    fn begin_object_key<W: ?Sized + Write>(
        &mut self,
        writer: &mut W,
        first: bool,
    ) -> io::Result<()> {
        self.0.begin_object_key(writer, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.begin_object_value(writer)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, writer: &mut W) -> io::Result<()> {
        self.0.end_object_value(writer)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, SignificantDigits(PrettyFormatter::new()));
    value.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Output directory, created on demand.
pub struct OutputDir(PathBuf);

impl OutputDir {
    pub fn new(path: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(path)?;
        Ok(Self(path.to_path_buf()))
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, to_json(value)?)?;
        Ok(path)
    }

    /// CSV with a versioned comment line before the column header.
    pub fn write_csv(
        &self,
        name: &str,
        comment: &str,
        header: &[String],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut file = BufWriter::new(File::create(&path)?);
        writeln!(file, "{comment}")?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(path)
    }
}

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Reads the `x,y,z` columns of a points CSV (comment lines start with `#`).
pub fn read_points(path: &Path) -> Result<Vec<SpherePoint>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_path(path)?;
    let mut out = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let coords: Result<Vec<f64>, _> = record
            .iter()
            .take(3)
            .map(|f| f.trim().parse::<f64>())
            .collect();
        let coords = coords
            .map_err(|e| CliError::Config(format!("{}: row {}: {e}", path.display(), line + 1)))?;
        if coords.len() != 3 {
            return Err(CliError::Config(format!(
                "{}: row {} has fewer than 3 columns",
                path.display(),
                line + 1
            )));
        }
        out.push(SpherePoint::new(coords)?);
    }
    Ok(out)
}
