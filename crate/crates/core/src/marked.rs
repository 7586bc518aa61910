//! Text persistence for marked configurations `(γ, σ)`.
//!
//! ```text
//! # qgibbs marked configurations
//! version 1
//! dimension 2
//! spin_dim 1
//! lower 0 0
//! upper 10 10
//! origin 5 5
//! radius 1
//! format decimal
//! records 1
//! record <seed> <points>
//! x_1 .. x_n | s_1 .. s_m
//! ```

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::numfmt::{format_f64, NumberFormat};
use crate::spin::SpinField;
use crate::window::{parse_row, Configuration, Provenance, Window};

#[derive(Debug, Clone, PartialEq)]
pub struct MarkedRecord {
    pub seed: u64,
    /// Point coordinates, row-major.
    pub coords: Vec<f64>,
    /// Spins, row-major.
    pub spins: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarkedSet {
    pub window: Window,
    pub spin_dim: usize,
    pub radius: f64,
    pub format: NumberFormat,
    pub records: Vec<MarkedRecord>,
}

impl MarkedSet {
    pub fn new(window: Window, spin_dim: usize, radius: f64, format: NumberFormat) -> Self {
        Self {
            window,
            spin_dim,
            radius,
            format,
            records: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.window.dim()
    }

    pub fn push(&mut self, seed: u64, config: &Configuration, spins: &SpinField) -> Result<()> {
        if config.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: config.dim(),
                context: "record point dimension",
            });
        }
        if spins.dim() != self.spin_dim || spins.len() != config.len() {
            return Err(Error::DimensionMismatch {
                expected: self.spin_dim,
                found: spins.dim(),
                context: "record spin dimension",
            });
        }
        self.records.push(MarkedRecord {
            seed,
            coords: config.coords().to_vec(),
            spins: spins.values().to_vec(),
        });
        Ok(())
    }

    /// The record as a configuration on the set's window.
    pub fn configuration(&self, k: usize) -> Result<Configuration> {
        let r = &self.records[k];
        Configuration::new(
            self.window.clone(),
            r.coords.clone(),
            Provenance {
                sampler: "marked".into(),
                seed: r.seed,
                process: None,
            },
        )
    }

    pub fn spins(&self, k: usize) -> Result<SpinField> {
        SpinField::new(self.spin_dim, self.records[k].spins.clone())
    }
}

pub fn save_marked<W: Write>(set: &MarkedSet, mut out: W) -> Result<()> {
    let fmt = set.format;
    let join = |v: &[f64]| v.iter().map(|x| format_f64(*x, fmt)).collect::<Vec<_>>().join(" ");
    let (n, m) = (set.dim(), set.spin_dim);
    let mut s = String::new();
    writeln!(s, "# qgibbs marked configurations").unwrap();
    writeln!(s, "version 1").unwrap();
    writeln!(s, "dimension {n}").unwrap();
    writeln!(s, "spin_dim {m}").unwrap();
    writeln!(s, "lower {}", join(&set.window.bounds.lower)).unwrap();
    writeln!(s, "upper {}", join(&set.window.bounds.upper)).unwrap();
    writeln!(s, "origin {}", join(&set.window.origin)).unwrap();
    writeln!(s, "radius {}", format_f64(set.radius, fmt)).unwrap();
    writeln!(
        s,
        "format {}",
        match fmt {
            NumberFormat::Decimal => "decimal",
            NumberFormat::Hex => "hex",
        }
    )
    .unwrap();
    writeln!(s, "records {}", set.records.len()).unwrap();
    for r in &set.records {
        let count = r.coords.len() / n;
        if r.coords.len() != count * n || r.spins.len() != count * m {
            return Err(Error::Domain("record arrays do not match the declared dimensions".into()));
        }
        writeln!(s, "record {} {count}", r.seed).unwrap();
        for i in 0..count {
            writeln!(
                s,
                "{} | {}",
                join(&r.coords[i * n..(i + 1) * n]),
                join(&r.spins[i * m..(i + 1) * m])
            )
            .unwrap();
        }
    }
    out.write_all(s.as_bytes())?;
    Ok(())
}

struct Lines<'a> {
    inner: Box<dyn Iterator<Item = (usize, std::io::Result<String>)> + 'a>,
}

impl Lines<'_> {
    fn next(&mut self, what: &str) -> Result<(usize, String)> {
        let (no, line) = self
            .inner
            .next()
            .ok_or_else(|| Error::parse(0, format!("unexpected end of file, expected {what}")))?;
        Ok((no, line?))
    }

    fn field(&mut self, key: &str) -> Result<(usize, String)> {
        let (no, line) = self.next(key)?;
        let rest = line
            .strip_prefix(key)
            .and_then(|r| r.strip_prefix(' '))
            .ok_or_else(|| Error::parse(no, format!("expected `{key}`")))?;
        Ok((no, rest.to_string()))
    }
}

pub fn load_marked<R: BufRead>(input: R) -> Result<MarkedSet> {
    let mut reader = Lines {
        inner: Box::new(
            input
                .lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l))
                .filter(|(_, l)| l.as_ref().map_or(true, |s| !s.starts_with('#'))),
        ),
    };
    let (no, version) = reader.field("version")?;
    if version != "1" {
        return Err(Error::parse(no, format!("unsupported version {version}")));
    }
    let count_of = |(no, s): (usize, String), what: &str| -> Result<usize> {
        s.parse().map_err(|_| Error::parse(no, format!("bad {what}")))
    };
    let n = count_of(reader.field("dimension")?, "dimension")?;
    let m = count_of(reader.field("spin_dim")?, "spin dimension")?;
    if n == 0 || m == 0 {
        return Err(Error::parse(0, "dimensions must be positive"));
    }
    let vector = |(no, s): (usize, String), len: usize| -> Result<Vec<f64>> {
        let v = parse_row(&s).ok_or_else(|| Error::parse(no, "bad number"))?;
        if v.len() != len {
            return Err(Error::parse(no, format!("expected {len} values, got {}", v.len())));
        }
        Ok(v)
    };
    let lower = vector(reader.field("lower")?, n)?;
    let upper = vector(reader.field("upper")?, n)?;
    let origin = vector(reader.field("origin")?, n)?;
    let radius = vector(reader.field("radius")?, 1)?[0];
    let (no, fmt) = reader.field("format")?;
    let format = match fmt.as_str() {
        "decimal" => NumberFormat::Decimal,
        "hex" => NumberFormat::Hex,
        other => return Err(Error::parse(no, format!("unknown number format `{other}`"))),
    };
    let total = count_of(reader.field("records")?, "record count")?;
    let window = Window::with_origin(lower, upper, origin)?;
    let mut set = MarkedSet::new(window, m, radius, format);
    for _ in 0..total {
        let (no, head) = reader.field("record")?;
        let mut parts = head.split(' ');
        let (Some(seed), Some(points), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse(no, "expected `record <seed> <points>`"));
        };
        let seed: u64 = seed.parse().map_err(|_| Error::parse(no, "bad seed"))?;
        let points: usize = points.parse().map_err(|_| Error::parse(no, "bad point count"))?;
        let mut coords = Vec::with_capacity(points * n);
        let mut spins = Vec::with_capacity(points * m);
        for _ in 0..points {
            let (no, row) = reader.next("a record row")?;
            let (x, s) = row
                .split_once(" | ")
                .ok_or_else(|| Error::parse(no, "expected `coordinates | spins`"))?;
            let x = parse_row(x).ok_or_else(|| Error::parse(no, "bad coordinate"))?;
            let s = parse_row(s).ok_or_else(|| Error::parse(no, "bad spin value"))?;
            if x.len() != n {
                return Err(Error::parse(no, format!("expected {n} coordinates, got {}", x.len())));
            }
            if s.len() != m {
                return Err(Error::parse(no, format!("expected {m} spin components, got {}", s.len())));
            }
            coords.extend(x);
            spins.extend(s);
        }
        set.records.push(MarkedRecord { seed, coords, spins });
    }
    if let Some((no, _)) = reader.inner.next() {
        return Err(Error::parse(no, "trailing content after the last record"));
    }
    Ok(set)
}

/// [`load_marked`], refusing files whose dimensions differ from the caller's.
pub fn load_marked_expecting<R: BufRead>(input: R, dim: usize, spin_dim: usize) -> Result<MarkedSet> {
    let set = load_marked(input)?;
    if set.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            found: set.dim(),
            context: "marked file point dimension",
        });
    }
    if set.spin_dim != spin_dim {
        return Err(Error::DimensionMismatch {
            expected: spin_dim,
            found: set.spin_dim,
            context: "marked file spin dimension",
        });
    }
    Ok(set)
}
