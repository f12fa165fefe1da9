//! Uniformly sampled, named multi-channel signal record.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries<T> {
    t0: T,
    dt: T,
    names: Vec<String>,
    data: Vec<Vec<T>>,
}

impl<T: Real> TimeSeries<T> {
    /// An empty record; channels are added with [`Self::push_channel`].
    pub fn new(t0: T, dt: T) -> Result<Self> {
        if !(dt > T::zero() && dt.is_finite() && t0.is_finite()) {
            return Err(Error::Series(format!(
                "dt must be positive and finite, got {dt}"
            )));
        }
        Ok(Self {
            t0,
            dt,
            names: Vec::new(),
            data: Vec::new(),
        })
    }

    pub fn with_channel(t0: T, dt: T, name: &str, values: Vec<T>) -> Result<Self> {
        let mut ts = Self::new(t0, dt)?;
        ts.push_channel(name, values)?;
        Ok(ts)
    }

    pub fn push_channel(&mut self, name: &str, values: Vec<T>) -> Result<()> {
        if name == "t" || self.names.iter().any(|n| n == name) {
            return Err(Error::Series(format!("duplicate channel name `{name}`")));
        }
        if values.is_empty() {
            return Err(Error::Series(format!("channel `{name}` is empty")));
        }
        if let Some(first) = self.data.first() {
            if first.len() != values.len() {
                return Err(Error::Alignment {
                    left: first.len(),
                    right: values.len(),
                });
            }
        }
        self.names.push(name.to_string());
        self.data.push(values);
        Ok(())
    }

    pub fn t0(&self) -> T {
        self.t0
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn time(&self, k: usize) -> T {
        self.t0 + self.dt * T::from_usize_lossy(k)
    }

    pub fn times(&self) -> Vec<T> {
        (0..self.len()).map(|k| self.time(k)).collect()
    }

    pub fn channel(&self, name: &str) -> Result<&[T]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| self.data[i].as_slice())
            .ok_or_else(|| Error::UnknownChannel(name.to_string()))
    }

    pub fn channel_mut(&mut self, name: &str) -> Result<&mut Vec<T>> {
        match self.names.iter().position(|n| n == name) {
            Some(i) => Ok(&mut self.data[i]),
            None => Err(Error::UnknownChannel(name.to_string())),
        }
    }

    pub fn has_channel(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    /// Shifts the time axis.
    pub fn with_t0(mut self, t0: T) -> Self {
        self.t0 = t0;
        self
    }

    /// Writes CSV: optional `# ` comment lines, a header `t,<channels>`,
    /// then one row per sample in round-trip exact scientific notation.
    pub fn write_csv<W: Write>(&self, mut out: W, comments: &[String]) -> Result<()> {
        writeln!(out, "# t0={:e}", self.t0)?;
        writeln!(out, "# dt={:e}", self.dt)?;
        for c in comments {
            writeln!(out, "# {c}")?;
        }
        let prec = T::round_trip_digits() - 1;
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend(self.names.iter().cloned());
        w.write_record(&header)?;
        let mut row = Vec::with_capacity(self.names.len() + 1);
        for k in 0..self.len() {
            row.clear();
            row.push(format!("{:.*e}", prec, self.time(k)));
            for ch in &self.data {
                row.push(format!("{:.*e}", prec, ch[k]));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path, comments: &[String]) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file), comments)
    }

    /// Reads CSV written by [`Self::write_csv`]. The `t0`/`dt` comment
    /// lines, when present, give the exact time base; otherwise it is
    /// inferred from the first two rows.
    pub fn read_csv<R: Read>(mut input: R) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let mut t0 = None;
        let mut dt = None;
        for line in text.lines().take_while(|l| l.starts_with('#')) {
            let body = line.trim_start_matches('#').trim();
            if let Some((k, v)) = body.split_once('=') {
                match k.trim() {
                    "t0" => t0 = v.trim().parse::<T>().ok(),
                    "dt" => dt = v.trim().parse::<T>().ok(),
                    _ => {}
                }
            }
        }
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let header = rdr.headers()?.clone();
        if header.get(0) != Some("t") {
            return Err(Error::Series("first CSV column must be `t`".into()));
        }
        let ncols = header.len();
        let mut cols: Vec<Vec<T>> = vec![Vec::new(); ncols];
        for rec in rdr.records() {
            let rec = rec?;
            for (i, field) in rec.iter().enumerate() {
                let v: T = field
                    .trim()
                    .parse()
                    .map_err(|_| Error::Series(format!("bad number `{field}`")))?;
                cols[i].push(v);
            }
        }
        let base = t0.zip(dt);
        Self::assemble(header.iter().map(str::to_string).collect(), cols, base)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    fn assemble(header: Vec<String>, mut cols: Vec<Vec<T>>, base: Option<(T, T)>) -> Result<Self> {
        let times = cols.remove(0);
        let (t0, dt) = match base {
            Some(b) => b,
            None => match times.as_slice() {
                [a, b, ..] => (*a, *b - *a),
                [a] => (*a, T::one()),
                [] => return Err(Error::Series("CSV has no rows".into())),
            },
        };
        let mut ts = Self::new(t0, dt)?;
        for (name, col) in header.into_iter().skip(1).zip(cols) {
            ts.push_channel(&name, col)?;
        }
        Ok(ts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_construction() {
        assert!(TimeSeries::<f64>::new(0.0, 0.0).is_err());
        let mut ts = TimeSeries::with_channel(0.0, 1.0, "a", vec![1.0, 2.0]).unwrap();
        assert!(ts.push_channel("a", vec![0.0, 0.0]).is_err());
        assert!(matches!(
            ts.push_channel("b", vec![0.0]),
            Err(Error::Alignment { .. })
        ));
        assert!(ts.push_channel("t", vec![0.0, 0.0]).is_err());
        assert!(matches!(ts.channel("zz"), Err(Error::UnknownChannel(_))));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let mut ts =
            TimeSeries::with_channel(1e-4, 1e-4 / 3.0, "V_out", vec![0.1, 1.0 / 3.0, -2e-300])
                .unwrap();
        ts.push_channel("d", vec![0.5, f64::MIN_POSITIVE, 1e300])
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        ts.save_csv(&path, &["seed=7".into()]).unwrap();
        let back = TimeSeries::<f64>::load_csv(&path).unwrap();
        assert_eq!(back, ts);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("# seed=7"));
        assert!(text.lines().any(|l| l == "t,V_out,d"));
    }
}
