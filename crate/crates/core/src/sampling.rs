//! Gaussian input sampling and measurement-system assembly.
//!
//! A [`SampleSet`] holds i.i.d. standard Gaussian realizations, a subset of
//! which carry derivative data. [`assemble`] turns a sample set plus a QoI
//! evaluator into a [`MeasurementSystem`]: the standard kind has one value
//! row per sample; the gradient-enhanced kind appends `d` derivative rows
//! after the value row of every flagged sample. With weights applied, column
//! `j` is scaled by the gradient-normalization weight of its multi-index so
//! the derivative-augmented columns have unit expected squared norm.
//!
//! Assembly parallelizes over samples; the result is immutable afterwards.
//!
//! # CSV layouts
//!
//! Both types serialize to single-table CSV for external cross-checking.
//!
//! * `SampleSet`: header `dim,seed,sample,with_gradient,xi1..xid`; one row
//!   per sample, the metadata columns repeated.
//! * `MeasurementSystem`: header
//!   `dim,order,kind,weights_applied,n_samples,sample,role,rhs,a0..a{P-1}`;
//!   one row per matrix row, `role` is `value` or `d1..dd`, and the first
//!   five columns repeat the system metadata.

use nalgebra::{DMatrix, DVector};

use crate::basis::Basis;
use crate::error::{Error, Result};
use crate::exec;
use crate::rng::{self, Stream};

/// Realized input points with per-sample derivative flags.
#[derive(Debug, Clone)]
pub struct SampleSet {
    points: DMatrix<f64>,
    with_gradient: Vec<bool>,
    seed: u64,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dimension(&self) -> usize {
        self.points.ncols()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        self.points.row(i).iter().copied().collect()
    }

    pub fn has_gradient(&self, i: usize) -> bool {
        self.with_gradient[i]
    }

    pub fn gradient_count(&self) -> usize {
        self.with_gradient.iter().filter(|&&f| f).count()
    }

    pub fn flags(&self) -> &[bool] {
        &self.with_gradient
    }
}

/// Draws `n` standard Gaussian samples in dimension `d`; exactly
/// `round(gradient_fraction * n)` of them are flagged for derivative data
/// (chosen by a seeded shuffle). Reproducible from `seed`.
pub fn draw_samples(d: usize, n: usize, gradient_fraction: f64, seed: u64) -> Result<SampleSet> {
    if d == 0 || n == 0 {
        return Err(Error::InvalidArgument(
            "sample set needs d >= 1 and n >= 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&gradient_fraction) {
        return Err(Error::InvalidArgument(format!(
            "gradient fraction {gradient_fraction} outside [0, 1]"
        )));
    }
    let mut point_rng = rng::stream_rng(seed, Stream::SamplePoints, 0);
    let points = DMatrix::from_fn(n, d, |_, _| rng::standard_normal(&mut point_rng));

    let n_g = (gradient_fraction * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    let mut flag_rng = rng::stream_rng(seed, Stream::GradientFlags, 0);
    // Fisher-Yates; the first n_g slots of the shuffle get the flags.
    for i in (1..n).rev() {
        let j = rand::Rng::random_range(&mut flag_rng, 0..=i);
        order.swap(i, j);
    }
    let mut with_gradient = vec![false; n];
    for &idx in order.iter().take(n_g) {
        with_gradient[idx] = true;
    }
    Ok(SampleSet {
        points,
        with_gradient,
        seed,
    })
}

/// Which rows a system carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SystemKind {
    /// One value row per sample.
    Standard,
    /// Value row plus `d` derivative rows for each gradient-flagged sample.
    GradientEnhanced,
}

impl SystemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SystemKind::Standard => "standard",
            SystemKind::GradientEnhanced => "gradient-enhanced",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(SystemKind::Standard),
            "gradient-enhanced" => Ok(SystemKind::GradientEnhanced),
            other => Err(Error::Format {
                what: "system kind",
                reason: format!("unknown kind {other:?}"),
            }),
        }
    }
}

/// Role of a matrix row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowRole {
    Value,
    /// Partial derivative along dimension `k` (0-based).
    Partial(usize),
}

impl RowRole {
    pub fn label(&self) -> String {
        match self {
            RowRole::Value => "value".to_string(),
            RowRole::Partial(k) => format!("d{}", k + 1),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        if s == "value" {
            return Ok(RowRole::Value);
        }
        s.strip_prefix('d')
            .and_then(|rest| rest.parse::<usize>().ok())
            .filter(|&k| k >= 1)
            .map(|k| RowRole::Partial(k - 1))
            .ok_or(Error::Format {
                what: "row role",
                reason: format!("unknown role {s:?}"),
            })
    }
}

/// Bookkeeping for one matrix row: which sample produced it and what it
/// measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowMapEntry {
    pub sample: usize,
    pub role: RowRole,
}

/// An assembled measurement matrix with its right-hand side.
#[derive(Debug, Clone)]
pub struct MeasurementSystem {
    matrix: DMatrix<f64>,
    rhs: DVector<f64>,
    kind: SystemKind,
    weights_applied: bool,
    row_map: Vec<RowMapEntry>,
    n_samples: usize,
    dimension: usize,
    order: usize,
}

impl MeasurementSystem {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.rhs
    }

    pub fn kind(&self) -> SystemKind {
        self.kind
    }

    pub fn weights_applied(&self) -> bool {
        self.weights_applied
    }

    pub fn row_map(&self) -> &[RowMapEntry] {
        &self.row_map
    }

    /// Number of distinct samples behind the rows (not the row count).
    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn rows(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn columns(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Keeps only the first `count` columns. Used when a study retains a
    /// prefix of a large basis; row structure and rhs are unchanged.
    pub fn retain_columns(&mut self, count: usize) {
        if count < self.matrix.ncols() {
            self.matrix = DMatrix::from_fn(self.matrix.nrows(), count, |i, j| self.matrix[(i, j)]);
        }
    }
}

/// Supplies QoI values (and derivatives for flagged samples) during
/// assembly. `sample` identifies the sample for error attribution and for
/// deriving per-sample noise streams.
pub trait QoiEvaluator: Sync {
    /// Returns `u(xi)` and, when `with_gradient` is set, all `d` partial
    /// derivatives.
    fn evaluate(
        &self,
        sample: usize,
        xi: &[f64],
        with_gradient: bool,
    ) -> Result<(f64, Option<Vec<f64>>)>;
}

impl<F> QoiEvaluator for F
where
    F: Fn(usize, &[f64], bool) -> Result<(f64, Option<Vec<f64>>)> + Sync,
{
    fn evaluate(
        &self,
        sample: usize,
        xi: &[f64],
        with_gradient: bool,
    ) -> Result<(f64, Option<Vec<f64>>)> {
        self(sample, xi, with_gradient)
    }
}

struct SampleBlock {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    roles: Vec<RowRole>,
}

/// Assembles the measurement system for `basis` over `samples`.
///
/// The right-hand side stacks, per sample, the value observation followed by
/// its derivative observations. Evaluator failures carry the sample id;
/// non-finite matrix or rhs entries are rejected.
pub fn assemble(
    basis: &Basis,
    samples: &SampleSet,
    evaluator: &dyn QoiEvaluator,
    kind: SystemKind,
    apply_weights: bool,
) -> Result<MeasurementSystem> {
    if samples.dimension() != basis.dimension() {
        return Err(Error::DimensionMismatch {
            expected: basis.dimension(),
            got: samples.dimension(),
        });
    }
    let d = basis.dimension();
    let p_cols = basis.cardinality();
    let weights = if apply_weights {
        Some(basis.gradient_weights())
    } else {
        None
    };

    let blocks: Vec<SampleBlock> = exec::try_map_indices(samples.len(), |i| {
        let xi = samples.point(i);
        let wants_gradient = kind == SystemKind::GradientEnhanced && samples.has_gradient(i);
        let (value, gradient) = evaluator.evaluate(i, &xi, wants_gradient)?;
        if !value.is_finite() {
            return Err(Error::NonFinite {
                what: "QoI value",
                sample: i,
            });
        }
        let mut rows = Vec::with_capacity(if wants_gradient { d + 1 } else { 1 });
        let mut rhs = Vec::with_capacity(rows.capacity());
        let mut roles = Vec::with_capacity(rows.capacity());

        let mut value_row = basis.row_values(&xi)?;
        if let Some(w) = &weights {
            for (entry, wj) in value_row.iter_mut().zip(w) {
                *entry *= wj;
            }
        }
        if value_row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "basis row",
                sample: i,
            });
        }
        rows.push(value_row);
        rhs.push(value);
        roles.push(RowRole::Value);

        if wants_gradient {
            let gradient = gradient.ok_or_else(|| Error::Evaluator {
                sample: i,
                reason: "evaluator returned no gradient for a flagged sample".into(),
            })?;
            if gradient.len() != d {
                return Err(Error::Evaluator {
                    sample: i,
                    reason: format!("gradient length {} != dimension {d}", gradient.len()),
                });
            }
            for (k, g) in gradient.iter().enumerate() {
                if !g.is_finite() {
                    return Err(Error::NonFinite {
                        what: "QoI derivative",
                        sample: i,
                    });
                }
                let mut row = basis.row_partials(&xi, k)?;
                if let Some(w) = &weights {
                    for (entry, wj) in row.iter_mut().zip(w) {
                        *entry *= wj;
                    }
                }
                if row.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite {
                        what: "basis derivative row",
                        sample: i,
                    });
                }
                rows.push(row);
                rhs.push(*g);
                roles.push(RowRole::Partial(k));
            }
        }
        Ok(SampleBlock { rows, rhs, roles })
    })?;

    let total_rows: usize = blocks.iter().map(|b| b.rows.len()).sum();
    let mut matrix = DMatrix::<f64>::zeros(total_rows, p_cols);
    let mut rhs = DVector::<f64>::zeros(total_rows);
    let mut row_map = Vec::with_capacity(total_rows);
    let mut r = 0;
    for (i, block) in blocks.iter().enumerate() {
        for ((row, &b), &role) in block.rows.iter().zip(&block.rhs).zip(&block.roles) {
            for (j, &v) in row.iter().enumerate() {
                matrix[(r, j)] = v;
            }
            rhs[r] = b;
            row_map.push(RowMapEntry { sample: i, role });
            r += 1;
        }
    }

    Ok(MeasurementSystem {
        matrix,
        rhs,
        kind,
        weights_applied: apply_weights,
        row_map,
        n_samples: samples.len(),
        dimension: d,
        order: basis.order(),
    })
}

/// Gramian `M = (1/N) A^T A`, normalized by the number of distinct samples
/// `N` (each sample contributes a whole row block). Symmetrized to remove
/// accumulation roundoff.
pub fn gramian(system: &MeasurementSystem) -> DMatrix<f64> {
    let a = system.matrix();
    let mut m = a.transpose() * a / system.n_samples() as f64;
    let p = m.ncols();
    for i in 0..p {
        for j in (i + 1)..p {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
    m
}

// --- CSV serialization ---------------------------------------------------

impl SampleSet {
    pub fn to_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let d = self.dimension();
        let mut header = vec![
            "dim".to_string(),
            "seed".to_string(),
            "sample".to_string(),
            "with_gradient".to_string(),
        ];
        header.extend((1..=d).map(|k| format!("xi{k}")));
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut record = vec![
                d.to_string(),
                self.seed.to_string(),
                i.to_string(),
                (self.with_gradient[i] as u8).to_string(),
            ];
            record.extend(self.points.row(i).iter().map(|v| format_float(*v)));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 5 || &header[0] != "dim" {
            return Err(Error::Format {
                what: "sample set CSV",
                reason: "expected header dim,seed,sample,with_gradient,xi1..".into(),
            });
        }
        let d = header.len() - 4;
        let mut rows: Vec<(bool, Vec<f64>)> = Vec::new();
        let mut seed = 0u64;
        for record in r.records() {
            let record = record?;
            seed = parse_field(&record, 1, "seed")?;
            let flag: u8 = parse_field(&record, 3, "with_gradient")?;
            let mut xi = Vec::with_capacity(d);
            for k in 0..d {
                xi.push(parse_field(&record, 4 + k, "coordinate")?);
            }
            rows.push((flag != 0, xi));
        }
        if rows.is_empty() {
            return Err(Error::Format {
                what: "sample set CSV",
                reason: "no data rows".into(),
            });
        }
        let points = DMatrix::from_fn(rows.len(), d, |i, j| rows[i].1[j]);
        Ok(SampleSet {
            points,
            with_gradient: rows.iter().map(|r| r.0).collect(),
            seed,
        })
    }
}

impl MeasurementSystem {
    pub fn to_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let p = self.columns();
        let mut header = vec![
            "dim".to_string(),
            "order".to_string(),
            "kind".to_string(),
            "weights_applied".to_string(),
            "n_samples".to_string(),
            "sample".to_string(),
            "role".to_string(),
            "rhs".to_string(),
        ];
        header.extend((0..p).map(|j| format!("a{j}")));
        w.write_record(&header)?;
        for r in 0..self.rows() {
            let entry = self.row_map[r];
            let mut record = vec![
                self.dimension.to_string(),
                self.order.to_string(),
                self.kind.as_str().to_string(),
                (self.weights_applied as u8).to_string(),
                self.n_samples.to_string(),
                entry.sample.to_string(),
                entry.role.label(),
                format_float(self.rhs[r]),
            ];
            record.extend(self.matrix.row(r).iter().map(|v| format_float(*v)));
            w.write_record(&record)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header = r.headers()?.clone();
        if header.len() < 9 || &header[0] != "dim" || &header[7] != "rhs" {
            return Err(Error::Format {
                what: "measurement system CSV",
                reason: "expected header dim,order,kind,weights_applied,n_samples,sample,role,rhs,a0..".into(),
            });
        }
        let p = header.len() - 8;
        let mut dimension = 0usize;
        let mut order = 0usize;
        let mut kind = SystemKind::Standard;
        let mut weights_applied = false;
        let mut n_samples = 0usize;
        let mut rows: Vec<(RowMapEntry, f64, Vec<f64>)> = Vec::new();
        for record in r.records() {
            let record = record?;
            dimension = parse_field(&record, 0, "dim")?;
            order = parse_field(&record, 1, "order")?;
            kind = SystemKind::parse(&record[2])?;
            let w: u8 = parse_field(&record, 3, "weights_applied")?;
            weights_applied = w != 0;
            n_samples = parse_field(&record, 4, "n_samples")?;
            let sample = parse_field(&record, 5, "sample")?;
            let role = RowRole::parse(&record[6])?;
            let rhs = parse_field(&record, 7, "rhs")?;
            let mut row = Vec::with_capacity(p);
            for j in 0..p {
                row.push(parse_field(&record, 8 + j, "matrix entry")?);
            }
            rows.push((RowMapEntry { sample, role }, rhs, row));
        }
        if rows.is_empty() {
            return Err(Error::Format {
                what: "measurement system CSV",
                reason: "no data rows".into(),
            });
        }
        let matrix = DMatrix::from_fn(rows.len(), p, |i, j| rows[i].2[j]);
        let rhs = DVector::from_fn(rows.len(), |i, _| rows[i].1);
        Ok(MeasurementSystem {
            matrix,
            rhs,
            kind,
            weights_applied,
            row_map: rows.iter().map(|r| r.0).collect(),
            n_samples,
            dimension,
            order,
        })
    }
}

/// Shortest round-trip decimal representation.
fn format_float(v: f64) -> String {
    let mut s = format!("{v}");
    if !s.contains(['.', 'e', 'E']) && !s.contains("inf") && !s.contains("NaN") {
        s.push_str(".0");
    }
    s
}

fn parse_field<T: std::str::FromStr>(
    record: &csv::StringRecord,
    idx: usize,
    what: &'static str,
) -> Result<T> {
    record
        .get(idx)
        .and_then(|s| s.parse::<T>().ok())
        .ok_or(Error::Format {
            what: "CSV field",
            reason: format!("cannot parse {what} at column {idx}"),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::enumerate_basis;
    use approx::assert_abs_diff_eq;

    fn constant_evaluator() -> impl QoiEvaluator {
        |_: usize, xi: &[f64], with_gradient: bool| {
            let value = xi.iter().sum::<f64>();
            let gradient = with_gradient.then(|| vec![1.0; xi.len()]);
            Ok((value, gradient))
        }
    }

    #[test]
    fn draw_samples_flags_and_determinism() {
        let s = draw_samples(2, 5, 1.0, 7).unwrap();
        assert_eq!(s.len(), 5);
        assert_eq!(s.gradient_count(), 5);

        let s = draw_samples(2, 10, 0.2, 7).unwrap();
        assert_eq!(s.gradient_count(), 2);

        let a = draw_samples(3, 20, 0.5, 99).unwrap();
        let b = draw_samples(3, 20, 0.5, 99).unwrap();
        assert_eq!(a.points, b.points);
        assert_eq!(a.with_gradient, b.with_gradient);
    }

    #[test]
    fn samples_look_gaussian() {
        let s = draw_samples(4, 20_000, 0.0, 3).unwrap();
        let n = s.len() as f64;
        for j in 0..4 {
            let col = s.points.column(j);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            assert!(mean.abs() < 0.03, "mean {mean}");
            assert!((var - 1.0).abs() < 0.05, "var {var}");
        }
    }

    #[test]
    fn standard_row_count_is_sample_count() {
        let basis = enumerate_basis(3, 2).unwrap();
        let samples = draw_samples(3, 17, 0.4, 5).unwrap();
        let sys = assemble(
            &basis,
            &samples,
            &constant_evaluator(),
            SystemKind::Standard,
            false,
        )
        .unwrap();
        assert_eq!(sys.rows(), 17);
        assert_eq!(sys.columns(), basis.cardinality());
        assert!(sys.row_map().iter().all(|e| e.role == RowRole::Value));
    }

    #[test]
    fn gradient_row_arithmetic() {
        // N_e = 3 unflagged + N_g = 2 flagged with d = 4: R = 3 + 2 * 5 = 13.
        let basis = enumerate_basis(4, 1).unwrap();
        let mut samples = draw_samples(4, 5, 0.0, 11).unwrap();
        samples.with_gradient = vec![true, false, true, false, false];
        let sys = assemble(
            &basis,
            &samples,
            &constant_evaluator(),
            SystemKind::GradientEnhanced,
            true,
        )
        .unwrap();
        assert_eq!(sys.rows(), 13);
        assert_eq!(sys.n_samples(), 5);
    }

    #[test]
    fn hand_computed_weighted_block() {
        // d = 1, p = 1, one flagged sample at xi = 0.3, weights on:
        // value row (psi0, w1 psi1) = (1, 0.3/sqrt(2)), derivative row
        // (0, w1) = (0, 1/sqrt(2)).
        let basis = enumerate_basis(1, 1).unwrap();
        let mut samples = draw_samples(1, 1, 1.0, 0).unwrap();
        samples.points[(0, 0)] = 0.3;
        let sys = assemble(
            &basis,
            &samples,
            &constant_evaluator(),
            SystemKind::GradientEnhanced,
            true,
        )
        .unwrap();
        let inv_sqrt2 = 1.0 / 2.0f64.sqrt();
        assert_eq!(sys.rows(), 2);
        assert_abs_diff_eq!(sys.matrix()[(0, 0)], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sys.matrix()[(0, 1)], 0.3 * inv_sqrt2, epsilon = 1e-15);
        assert_abs_diff_eq!(sys.matrix()[(1, 0)], 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(sys.matrix()[(1, 1)], inv_sqrt2, epsilon = 1e-15);
        // rhs stacks u then du: u = 0.3, du = 1.
        assert_abs_diff_eq!(sys.rhs()[0], 0.3, epsilon = 1e-15);
        assert_abs_diff_eq!(sys.rhs()[1], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn evaluator_failures_carry_sample_id() {
        let basis = enumerate_basis(2, 1).unwrap();
        let samples = draw_samples(2, 4, 0.0, 1).unwrap();
        let failing = |i: usize, _: &[f64], _: bool| -> Result<(f64, Option<Vec<f64>>)> {
            if i == 2 {
                Err(Error::Evaluator {
                    sample: i,
                    reason: "synthetic".into(),
                })
            } else {
                Ok((1.0, None))
            }
        };
        let err = assemble(&basis, &samples, &failing, SystemKind::Standard, false).unwrap_err();
        assert!(matches!(err, Error::Evaluator { sample: 2, .. }));

        let non_finite = |_: usize, _: &[f64], _: bool| -> Result<(f64, Option<Vec<f64>>)> {
            Ok((f64::NAN, None))
        };
        let err =
            assemble(&basis, &samples, &non_finite, SystemKind::Standard, false).unwrap_err();
        assert!(matches!(err, Error::NonFinite { sample: 0, .. }));
    }

    #[test]
    fn standard_matrix_is_submatrix_of_gradient_enhanced() {
        // Up to column weighting, the value rows of the gradient-enhanced
        // system reproduce the standard matrix on the same samples.
        let basis = enumerate_basis(3, 2).unwrap();
        let samples = draw_samples(3, 9, 1.0, 23).unwrap();
        let std_sys = assemble(
            &basis,
            &samples,
            &constant_evaluator(),
            SystemKind::Standard,
            false,
        )
        .unwrap();
        let grad_sys = assemble(
            &basis,
            &samples,
            &constant_evaluator(),
            SystemKind::GradientEnhanced,
            true,
        )
        .unwrap();
        let weights = basis.gradient_weights();
        let mut value_row = 0;
        for (r, entry) in grad_sys.row_map().iter().enumerate() {
            if entry.role == RowRole::Value {
                for j in 0..basis.cardinality() {
                    assert_abs_diff_eq!(
                        grad_sys.matrix()[(r, j)],
                        std_sys.matrix()[(value_row, j)] * weights[j],
                        epsilon = 1e-14
                    );
                }
                value_row += 1;
            }
        }
        assert_eq!(value_row, samples.len());
    }

    #[test]
    fn gramian_expectation_is_identity() {
        // Lemma-based Monte Carlo oracle: weighted gradient-enhanced columns
        // have unit expected squared norm and orthogonal cross terms.
        let basis = enumerate_basis(2, 2).unwrap();
        let samples = draw_samples(2, 50_000, 1.0, 1234).unwrap();
        let sys = assemble(
            &basis,
            &samples,
            &constant_evaluator(),
            SystemKind::GradientEnhanced,
            true,
        )
        .unwrap();
        let m = gramian(&sys);
        for i in 0..basis.cardinality() {
            for j in 0..basis.cardinality() {
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (m[(i, j)] - expected).abs() < 0.02,
                    "M[{i},{j}] = {}",
                    m[(i, j)]
                );
            }
        }
    }

    #[test]
    fn gramian_uses_sample_count_not_rows() {
        let basis = enumerate_basis(2, 1).unwrap();
        let samples = draw_samples(2, 40, 1.0, 8).unwrap();
        let sys = assemble(
            &basis,
            &samples,
            &constant_evaluator(),
            SystemKind::GradientEnhanced,
            true,
        )
        .unwrap();
        assert_eq!(sys.rows(), 40 * 3);
        let m = gramian(&sys);
        let a = sys.matrix();
        let direct = a.transpose() * a / 40.0;
        assert_abs_diff_eq!((m - direct).norm(), 0.0, epsilon = 1e-10);
    }

    #[test]
    fn csv_round_trips() {
        let basis = enumerate_basis(2, 2).unwrap();
        let samples = draw_samples(2, 6, 0.5, 77).unwrap();
        let sys = assemble(
            &basis,
            &samples,
            &constant_evaluator(),
            SystemKind::GradientEnhanced,
            true,
        )
        .unwrap();

        let mut buf = Vec::new();
        samples.to_csv(&mut buf).unwrap();
        let back = SampleSet::from_csv(buf.as_slice()).unwrap();
        assert_eq!(back.points, samples.points);
        assert_eq!(back.with_gradient, samples.with_gradient);
        assert_eq!(back.seed, samples.seed);

        let mut buf = Vec::new();
        sys.to_csv(&mut buf).unwrap();
        let back = MeasurementSystem::from_csv(buf.as_slice()).unwrap();
        assert_eq!(back.matrix, sys.matrix);
        assert_eq!(back.rhs, sys.rhs);
        assert_eq!(back.kind, sys.kind);
        assert_eq!(back.weights_applied, sys.weights_applied);
        assert_eq!(back.row_map, sys.row_map);
        assert_eq!(back.n_samples, sys.n_samples);
    }
}
