//! CSV artifacts. Floats are written in shortest round-trip form, so every
//! table survives parse → emit → parse unchanged.

use qmaxent::{DemoRow, RayProfile, ScanProfile};

use crate::CliError;

/// Shortest round-trip decimal; exponent form for very small or large
/// magnitudes.
pub fn fmt_f64(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e16).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn parse_f64(s: &str, column: &str) -> Result<f64, CliError> {
    s.trim()
        .parse()
        .map_err(|_| CliError::input(format!("column {column}: cannot parse {s:?} as a number")))
}

fn numbered(prefix: &str, count: usize) -> impl Iterator<Item = String> + '_ {
    (1..=count).map(move |i| format!("{prefix}{i}"))
}

/// Count of leading header fields of the form `<prefix><1..>`.
fn count_numbered(header: &[String], prefix: &str) -> usize {
    header
        .iter()
        .enumerate()
        .take_while(|(i, h)| **h == format!("{prefix}{}", i + 1))
        .count()
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String, CliError> {
    let bytes = w.into_inner().map_err(|e| CliError::input(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::input(e.to_string()))
}

fn read_all(text: &str) -> Result<(Vec<String>, Vec<csv::StringRecord>), CliError> {
    let mut r = csv::ReaderBuilder::new().from_reader(text.as_bytes());
    let header = r.headers()?.iter().map(str::to_string).collect();
    let records = r.records().collect::<Result<Vec<_>, _>>()?;
    Ok((header, records))
}

fn expect_column(header: &[String], at: usize, name: &str) -> Result<(), CliError> {
    match header.get(at) {
        Some(h) if h == name => Ok(()),
        other => Err(CliError::input(format!("expected column {name:?} at position {at}, found {other:?}"))),
    }
}

// ---------------------------------------------------------------------------
// Profiles: parameter, m1..mk, eig1..eign, path, gap
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileRow {
    /// Present when the table carries a leading `series` column.
    pub series: Option<String>,
    pub parameter: f64,
    pub m: Vec<f64>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
    pub path: String,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProfileTable {
    pub series: bool,
    pub k: usize,
    pub n: usize,
    /// Name of the last column (`adjacent_gap` for boundary scans).
    pub gap_column: String,
    pub rows: Vec<ProfileRow>,
}

impl ProfileTable {
    /// Boundary samples with the trace distance to the next sample.
    pub fn from_scan(profile: &ScanProfile, obs_dim: usize, k: usize) -> Self {
        let gaps = profile.adjacent_gaps();
        let rows = profile
            .samples
            .iter()
            .zip(gaps)
            .map(|(s, gap)| ProfileRow {
                series: None,
                parameter: s.parameter,
                m: s.m.coords.clone(),
                eigenvalues: s.state.eigenvalues().to_vec(),
                path: s.path.to_string(),
                gap,
            })
            .collect();
        Self {
            series: false,
            k,
            n: obs_dim,
            gap_column: "adjacent_gap".into(),
            rows,
        }
    }

    /// Solved ray samples with the trace distance to `Ψ(target)`.
    pub fn ray_rows(ray: &RayProfile, series: Option<&str>) -> Vec<ProfileRow> {
        ray.samples
            .iter()
            .filter_map(|s| {
                let state = s.state.as_ref()?;
                Some(ProfileRow {
                    series: series.map(str::to_string),
                    parameter: s.t,
                    m: s.m.coords.clone(),
                    eigenvalues: state.eigenvalues().to_vec(),
                    path: s.path.map(|p| p.to_string()).unwrap_or_default(),
                    gap: qmaxent::trace_distance(state, &ray.target_state),
                })
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = Vec::new();
        if self.series {
            header.push("series".into());
        }
        header.push("parameter".into());
        header.extend(numbered("m", self.k));
        header.extend(numbered("eig", self.n));
        header.push("path".into());
        header.push(self.gap_column.clone());
        w.write_record(&header)?;
        for r in &self.rows {
            if r.m.len() != self.k || r.eigenvalues.len() != self.n || r.series.is_some() != self.series {
                return Err(CliError::input("profile row does not match the table layout"));
            }
            let mut rec: Vec<String> = Vec::with_capacity(header.len());
            if let Some(s) = &r.series {
                rec.push(s.clone());
            }
            rec.push(fmt_f64(r.parameter));
            rec.extend(r.m.iter().map(|&x| fmt_f64(x)));
            rec.extend(r.eigenvalues.iter().map(|&x| fmt_f64(x)));
            rec.push(r.path.clone());
            rec.push(fmt_f64(r.gap));
            w.write_record(&rec)?;
        }
        finish(w)
    }

    pub fn from_csv(text: &str) -> Result<Self, CliError> {
        let (header, records) = read_all(text)?;
        let series = header.first().is_some_and(|h| h == "series");
        let off = usize::from(series);
        expect_column(&header, off, "parameter")?;
        let k = count_numbered(&header[off + 1..], "m");
        let n = count_numbered(&header[off + 1 + k..], "eig");
        let p = off + 1 + k + n;
        expect_column(&header, p, "path")?;
        if header.len() != p + 2 {
            return Err(CliError::input("profile header must end with path and a gap column"));
        }
        let gap_column = header[p + 1].clone();
        let rows = records
            .iter()
            .map(|rec| {
                let f = |i: usize| parse_f64(&rec[i], &header[i]);
                Ok(ProfileRow {
                    series: series.then(|| rec[0].to_string()),
                    parameter: f(off)?,
                    m: (off + 1..off + 1 + k).map(f).collect::<Result<_, _>>()?,
                    eigenvalues: (off + 1 + k..p).map(f).collect::<Result<_, _>>()?,
                    path: rec[p].to_string(),
                    gap: f(p + 1)?,
                })
            })
            .collect::<Result<_, CliError>>()?;
        Ok(Self {
            series,
            k,
            n,
            gap_column,
            rows,
        })
    }
}

// ---------------------------------------------------------------------------
// Planar curves: curve, index, phi, m1..mk
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct CurveRow {
    pub curve: String,
    pub index: usize,
    /// Normal angle.
    pub phi: f64,
    pub m: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CurveTable {
    pub k: usize,
    pub rows: Vec<CurveRow>,
}

impl CurveTable {
    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = vec!["curve".into(), "index".into(), "phi".into()];
        header.extend(numbered("m", self.k));
        w.write_record(&header)?;
        for r in &self.rows {
            if r.m.len() != self.k {
                return Err(CliError::input("curve row does not match the table layout"));
            }
            let mut rec = vec![r.curve.clone(), r.index.to_string(), fmt_f64(r.phi)];
            rec.extend(r.m.iter().map(|&x| fmt_f64(x)));
            w.write_record(&rec)?;
        }
        finish(w)
    }

    pub fn from_csv(text: &str) -> Result<Self, CliError> {
        let (header, records) = read_all(text)?;
        for (i, name) in ["curve", "index", "phi"].iter().enumerate() {
            expect_column(&header, i, name)?;
        }
        let k = count_numbered(&header[3..], "m");
        if header.len() != 3 + k {
            return Err(CliError::input("unexpected trailing curve columns"));
        }
        let rows = records
            .iter()
            .map(|rec| {
                let index = rec[1]
                    .trim()
                    .parse()
                    .map_err(|_| CliError::input(format!("column index: cannot parse {:?}", &rec[1])))?;
                Ok(CurveRow {
                    curve: rec[0].to_string(),
                    index,
                    phi: parse_f64(&rec[2], "phi")?,
                    m: (3..3 + k).map(|i| parse_f64(&rec[i], &header[i])).collect::<Result<_, _>>()?,
                })
            })
            .collect::<Result<_, CliError>>()?;
        Ok(Self { k, rows })
    }
}

// ---------------------------------------------------------------------------
// Estimation demo: shots, y1..yk, m1..mk, eig1..eign, path, distance
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct DemoCsvRow {
    pub shots: u64,
    pub sample_mean: Vec<f64>,
    pub m: Vec<f64>,
    pub eigenvalues: Vec<f64>,
    pub path: String,
    pub distance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DemoTable {
    pub k: usize,
    pub n: usize,
    pub rows: Vec<DemoCsvRow>,
}

impl DemoTable {
    pub fn from_rows(rows: &[DemoRow], k: usize, n: usize) -> Self {
        Self {
            k,
            n,
            rows: rows
                .iter()
                .map(|r| DemoCsvRow {
                    shots: r.shots,
                    sample_mean: r.sample_mean.coords.clone(),
                    m: r.m_n.coords.clone(),
                    eigenvalues: r.state.eigenvalues().to_vec(),
                    path: r.path.to_string(),
                    distance: r.distance,
                })
                .collect(),
        }
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = vec!["shots".into()];
        header.extend(numbered("y", self.k));
        header.extend(numbered("m", self.k));
        header.extend(numbered("eig", self.n));
        header.push("path".into());
        header.push("distance".into());
        w.write_record(&header)?;
        for r in &self.rows {
            if r.sample_mean.len() != self.k || r.m.len() != self.k || r.eigenvalues.len() != self.n {
                return Err(CliError::input("demo row does not match the table layout"));
            }
            let mut rec = vec![r.shots.to_string()];
            rec.extend(r.sample_mean.iter().map(|&x| fmt_f64(x)));
            rec.extend(r.m.iter().map(|&x| fmt_f64(x)));
            rec.extend(r.eigenvalues.iter().map(|&x| fmt_f64(x)));
            rec.push(r.path.clone());
            rec.push(fmt_f64(r.distance));
            w.write_record(&rec)?;
        }
        finish(w)
    }

    pub fn from_csv(text: &str) -> Result<Self, CliError> {
        let (header, records) = read_all(text)?;
        expect_column(&header, 0, "shots")?;
        let k = count_numbered(&header[1..], "y");
        if count_numbered(&header[1 + k..], "m") != k {
            return Err(CliError::input("demo table needs as many m columns as y columns"));
        }
        let n = count_numbered(&header[1 + 2 * k..], "eig");
        let p = 1 + 2 * k + n;
        expect_column(&header, p, "path")?;
        expect_column(&header, p + 1, "distance")?;
        let rows = records
            .iter()
            .map(|rec| {
                let f = |i: usize| parse_f64(&rec[i], &header[i]);
                Ok(DemoCsvRow {
                    shots: rec[0]
                        .trim()
                        .parse()
                        .map_err(|_| CliError::input(format!("column shots: cannot parse {:?}", &rec[0])))?,
                    sample_mean: (1..1 + k).map(f).collect::<Result<_, _>>()?,
                    m: (1 + k..1 + 2 * k).map(f).collect::<Result<_, _>>()?,
                    eigenvalues: (1 + 2 * k..p).map(f).collect::<Result<_, _>>()?,
                    path: rec[p].to_string(),
                    distance: f(p + 1)?,
                })
            })
            .collect::<Result<_, CliError>>()?;
        Ok(Self { k, n, rows })
    }
}
