use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::NetworkArch;

/// Cached per-sample input norms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleNorms {
    pub l1: f64,
    pub l2: f64,
    pub linf: f64,
}

impl SampleNorms {
    pub fn of(x: &[f64]) -> Self {
        let mut l1 = 0.0;
        let mut sq = 0.0;
        let mut linf: f64 = 0.0;
        for &v in x {
            l1 += v.abs();
            sq += v * v;
            linf = linf.max(v.abs());
        }
        SampleNorms {
            l1,
            l2: sq.sqrt(),
            linf,
        }
    }

    pub fn l2_squared(&self) -> f64 {
        self.l2 * self.l2
    }
}

/// `N` input/target pairs stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    input_dim: usize,
    output_dim: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    norms: Vec<SampleNorms>,
}

impl Dataset {
    pub fn from_flat(
        inputs: Vec<f64>,
        targets: Vec<f64>,
        input_dim: usize,
        output_dim: usize,
    ) -> Result<Self> {
        if input_dim == 0 || output_dim == 0 {
            return Err(Error::InvalidArgument("dataset dimensions must be positive".into()));
        }
        if inputs.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if !inputs.len().is_multiple_of(input_dim) {
            return Err(Error::DimensionMismatch {
                context: "dataset inputs",
                expected: input_dim,
                actual: inputs.len() % input_dim,
            });
        }
        let n = inputs.len() / input_dim;
        if targets.len() != n * output_dim {
            return Err(Error::DimensionMismatch {
                context: "dataset targets",
                expected: n * output_dim,
                actual: targets.len(),
            });
        }
        if inputs.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset"));
        }
        let norms = inputs.chunks_exact(input_dim).map(SampleNorms::of).collect();
        Ok(Dataset {
            input_dim,
            output_dim,
            inputs,
            targets,
            norms,
        })
    }

    pub fn from_rows(xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<Self> {
        let d = xs.first().map(Vec::len).ok_or(Error::EmptyDataset)?;
        let m = ys.first().map(Vec::len).unwrap_or(0);
        if xs.len() != ys.len() {
            return Err(Error::DimensionMismatch {
                context: "dataset rows",
                expected: xs.len(),
                actual: ys.len(),
            });
        }
        let mut inputs = Vec::with_capacity(xs.len() * d);
        let mut targets = Vec::with_capacity(ys.len() * m);
        for (x, y) in xs.iter().zip(ys) {
            if x.len() != d {
                return Err(Error::DimensionMismatch {
                    context: "dataset input row",
                    expected: d,
                    actual: x.len(),
                });
            }
            if y.len() != m {
                return Err(Error::DimensionMismatch {
                    context: "dataset target row",
                    expected: m,
                    actual: y.len(),
                });
            }
            inputs.extend_from_slice(x);
            targets.extend_from_slice(y);
        }
        Dataset::from_flat(inputs, targets, d, m)
    }

    pub fn len(&self) -> usize {
        self.norms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.norms.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn x(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.input_dim..(i + 1) * self.input_dim]
    }

    pub fn y(&self, i: usize) -> &[f64] {
        &self.targets[i * self.output_dim..(i + 1) * self.output_dim]
    }

    pub fn norms(&self, i: usize) -> &SampleNorms {
        &self.norms[i]
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn samples(&self) -> impl Iterator<Item = (&[f64], &[f64], &SampleNorms)> + '_ {
        self.inputs
            .chunks_exact(self.input_dim)
            .zip(self.targets.chunks_exact(self.output_dim))
            .zip(&self.norms)
            .map(|((x, y), n)| (x, y, n))
    }

    /// Single-sample dataset holding sample `i`.
    pub fn sample(&self, i: usize) -> Dataset {
        Dataset {
            input_dim: self.input_dim,
            output_dim: self.output_dim,
            inputs: self.x(i).to_vec(),
            targets: self.y(i).to_vec(),
            norms: vec![self.norms[i]],
        }
    }

    /// True when every input vector is exactly zero.
    pub fn all_inputs_zero(&self) -> bool {
        self.inputs.iter().all(|&v| v == 0.0)
    }

    /// Returns a copy with every input multiplied by `c`.
    pub fn scale_inputs(&self, c: f64) -> Result<Dataset> {
        Dataset::from_flat(
            self.inputs.iter().map(|v| v * c).collect(),
            self.targets.clone(),
            self.input_dim,
            self.output_dim,
        )
    }

    pub(crate) fn check(&self, arch: &NetworkArch) -> Result<()> {
        if self.input_dim != arch.input_dim() {
            return Err(Error::DimensionMismatch {
                context: "dataset input dimension",
                expected: arch.input_dim(),
                actual: self.input_dim,
            });
        }
        if self.output_dim != arch.output_dim() {
            return Err(Error::DimensionMismatch {
                context: "dataset output dimension",
                expected: arch.output_dim(),
                actual: self.output_dim,
            });
        }
        Ok(())
    }

    /// Reads `x_1,...,x_d,y_1,...,y_m` rows. The header is required; columns
    /// whose name starts with `x` are inputs and those starting with `y` are
    /// targets, inputs first.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
        let mut d = 0;
        let mut m = 0;
        for (col, name) in headers.iter().enumerate() {
            match name.chars().next().map(|c| c.to_ascii_lowercase()) {
                Some('x') if m == 0 => d += 1,
                Some('y') => m += 1,
                _ => {
                    return Err(Error::Csv(format!(
                        "header column {} (`{name}`): expected x_* columns followed by y_* columns",
                        col + 1
                    )))
                }
            }
        }
        if d == 0 || m == 0 {
            return Err(Error::Csv(
                "header must name at least one x_* and one y_* column".into(),
            ));
        }
        let mut inputs = Vec::new();
        let mut targets = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Csv(e.to_string()))?;
            if rec.len() != d + m {
                return Err(Error::Csv(format!(
                    "row {}: expected {} fields, found {}",
                    row + 2,
                    d + m,
                    rec.len()
                )));
            }
            for (col, field) in rec.iter().enumerate() {
                let v: f64 = field.parse().map_err(|_| {
                    Error::Csv(format!("row {}, column {}: `{field}` is not a number", row + 2, col + 1))
                })?;
                if col < d {
                    inputs.push(v);
                } else {
                    targets.push(v);
                }
            }
        }
        Dataset::from_flat(inputs, targets, d, m)
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Dataset::read_csv(std::io::BufReader::new(file))
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<String> = (1..=self.input_dim)
            .map(|j| format!("x_{j}"))
            .chain((1..=self.output_dim).map(|j| format!("y_{j}")))
            .collect();
        w.write_record(&header).map_err(|e| Error::Csv(e.to_string()))?;
        for (x, y, _) in self.samples() {
            let row: Vec<String> = x.iter().chain(y).map(|v| format_f64(*v)).collect();
            w.write_record(&row).map_err(|e| Error::Csv(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Csv(e.to_string()))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}
