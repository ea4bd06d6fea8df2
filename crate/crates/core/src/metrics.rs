//! Rate–fidelity curves and Bjøntegaard deltas.
//!
//! Both deltas use the classic construction: a least-squares cubic per curve,
//! integrated analytically over the overlap of the two curves' domains.
//! BD-rate fits `ln(rate)` against fidelity and reports a percentage;
//! BD-quality fits fidelity against `ln(rate)` and reports fidelity
//! percentage points (0.02 fidelity = 2.0 points).

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::EncodeOutcome;
use crate::error::{Error, Result};

pub const MIN_BD_POINTS: usize = 4;
pub const RD_CSV_HEADER: [&str; 4] = ["label", "lambda", "rate_bits", "fidelity"];
pub const BD_CSV_HEADER: &str = "anchor,test,bd_rate_pct,bd_quality_pts";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RdPoint {
    pub rate: f64,
    pub fidelity: f64,
}

impl RdPoint {
    pub fn new(rate: f64, fidelity: f64) -> Result<Self> {
        if !(rate.is_finite() && rate > 0.0) {
            return Err(Error::InvalidParameter(format!("rate {rate} must be positive")));
        }
        if !(0.0..=1.0).contains(&fidelity) {
            return Err(Error::InvalidParameter(format!("fidelity {fidelity} outside [0, 1]")));
        }
        Ok(RdPoint { rate, fidelity })
    }
}

/// Points sorted by strictly increasing rate.
#[derive(Clone, Debug, PartialEq)]
pub struct RdCurve {
    label: String,
    points: Vec<RdPoint>,
}

impl RdCurve {
    /// Sorts by rate; equal rates are rejected.
    pub fn new(label: impl Into<String>, mut points: Vec<RdPoint>) -> Result<Self> {
        for p in &points {
            RdPoint::new(p.rate, p.fidelity)?;
        }
        points.sort_by(|a, b| a.rate.total_cmp(&b.rate));
        if let Some(w) = points.windows(2).find(|w| w[0].rate == w[1].rate) {
            return Err(Error::InvalidParameter(format!(
                "duplicate rate {} in curve",
                w[0].rate
            )));
        }
        Ok(RdCurve {
            label: label.into(),
            points,
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn points(&self) -> &[RdPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Fidelity linearly interpolated in rate; `None` outside the curve's rate range.
    pub fn fidelity_at(&self, rate: f64) -> Option<f64> {
        let first = self.points.first()?;
        let last = self.points.last()?;
        if rate < first.rate || rate > last.rate {
            return None;
        }
        let i = self.points.partition_point(|p| p.rate < rate);
        let hi = self.points[i];
        if hi.rate == rate || i == 0 {
            return Some(hi.fidelity);
        }
        let lo = self.points[i - 1];
        let t = (rate - lo.rate) / (hi.rate - lo.rate);
        Some(lo.fidelity + t * (hi.fidelity - lo.fidelity))
    }

    /// Whether the curve reaches at least `point.fidelity - tol` at no more
    /// than `point.rate`, either at one of its points or by interpolation.
    pub fn covers(&self, point: &RdPoint, tol: f64) -> bool {
        let floor = point.fidelity - tol;
        self.points.iter().any(|q| q.rate <= point.rate && q.fidelity >= floor)
            || self.fidelity_at(point.rate).is_some_and(|f| f >= floor)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BdVariant {
    /// Least-squares cubic over all points.
    #[default]
    Classic,
}

/// `c0 + c1 u + c2 u² + c3 u³` with `u = (x − center) / scale`.
#[derive(Clone, Copy, Debug)]
struct Cubic {
    center: f64,
    scale: f64,
    coef: [f64; 4],
}

impl Cubic {
    fn fit(x: &[f64], y: &[f64]) -> Result<Cubic> {
        let mut distinct = x.to_vec();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        if distinct.len() < 4 {
            return Err(Error::SingularFit);
        }
        let center = x.iter().sum::<f64>() / x.len() as f64;
        let scale = x.iter().map(|v| (v - center).abs()).fold(0.0, f64::max);
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::SingularFit);
        }
        let mut a = [[0.0; 5]; 4];
        for (&xi, &yi) in x.iter().zip(y) {
            let u = (xi - center) / scale;
            let v = [1.0, u, u * u, u * u * u];
            for r in 0..4 {
                for c in 0..4 {
                    a[r][c] += v[r] * v[c];
                }
                a[r][4] += v[r] * yi;
            }
        }
        let coef = solve4(a)?;
        Ok(Cubic { center, scale, coef })
    }

    fn integral(&self, lo: f64, hi: f64) -> f64 {
        let [c0, c1, c2, c3] = self.coef;
        let antiderivative = |x: f64| {
            let u = (x - self.center) / self.scale;
            self.scale * u * (c0 + u * (c1 / 2.0 + u * (c2 / 3.0 + u * c3 / 4.0)))
        };
        antiderivative(hi) - antiderivative(lo)
    }
}

/// Gaussian elimination with partial pivoting on an augmented 4×5 system.
fn solve4(mut a: [[f64; 5]; 4]) -> Result<[f64; 4]> {
    let norm = a
        .iter()
        .map(|r| r[..4].iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    for col in 0..4 {
        let pivot = (col..4)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap_or(col);
        if a[pivot][col].abs() <= 1e-12 * norm {
            return Err(Error::SingularFit);
        }
        a.swap(col, pivot);
        let pivot_row = a[col];
        for row in a.iter_mut().skip(col + 1) {
            let f = row[col] / pivot_row[col];
            for (v, p) in row.iter_mut().zip(&pivot_row).skip(col) {
                *v -= f * p;
            }
        }
    }
    let mut x = [0.0; 4];
    for row in (0..4).rev() {
        let tail: f64 = (row + 1..4).map(|k| a[row][k] * x[k]).sum();
        x[row] = (a[row][4] - tail) / a[row][row];
    }
    Ok(x)
}

/// Mean of `fit(test) − fit(anchor)` over the overlap of the x ranges.
fn mean_fit_difference(anchor: (&[f64], &[f64]), test: (&[f64], &[f64])) -> Result<f64> {
    for xs in [anchor.0, test.0] {
        if xs.len() < MIN_BD_POINTS {
            return Err(Error::InsufficientPoints {
                needed: MIN_BD_POINTS,
                got: xs.len(),
            });
        }
    }
    let range = |xs: &[f64]| {
        xs.iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)))
    };
    let (alo, ahi) = range(anchor.0);
    let (tlo, thi) = range(test.0);
    let (lo, hi) = (alo.max(tlo), ahi.min(thi));
    if hi <= lo {
        return Err(Error::NoOverlap);
    }
    let fa = Cubic::fit(anchor.0, anchor.1)?;
    let ft = Cubic::fit(test.0, test.1)?;
    let mean = (ft.integral(lo, hi) - fa.integral(lo, hi)) / (hi - lo);
    if !mean.is_finite() {
        return Err(Error::NonFinite("BD integral".into()));
    }
    Ok(mean)
}

fn columns(curve: &RdCurve) -> (Vec<f64>, Vec<f64>) {
    curve.points.iter().map(|p| (p.fidelity, p.rate.ln())).unzip()
}

/// Average bitrate change of `test` against `anchor` at equal fidelity, in
/// percent; negative is a saving.
pub fn bd_rate(anchor: &RdCurve, test: &RdCurve) -> Result<f64> {
    let (af, ar) = columns(anchor);
    let (tf, tr) = columns(test);
    let mean = mean_fit_difference((&af, &ar), (&tf, &tr))?;
    Ok((mean.exp() - 1.0) * 100.0)
}

/// Average fidelity change of `test` against `anchor` at equal rate, in
/// fidelity percentage points.
pub fn bd_quality(anchor: &RdCurve, test: &RdCurve) -> Result<f64> {
    let (af, ar) = columns(anchor);
    let (tf, tr) = columns(test);
    Ok(mean_fit_difference((&ar, &af), (&tr, &tf))? * 100.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BdReport {
    pub anchor: String,
    pub test: String,
    pub variant: BdVariant,
    pub bd_rate_pct: f64,
    pub bd_quality_pts: f64,
}

pub fn bd_report(anchor: &RdCurve, test: &RdCurve, variant: BdVariant) -> Result<BdReport> {
    let BdVariant::Classic = variant;
    Ok(BdReport {
        anchor: anchor.label.clone(),
        test: test.label.clone(),
        variant,
        bd_rate_pct: bd_rate(anchor, test)?,
        bd_quality_pts: bd_quality(anchor, test)?,
    })
}

impl BdReport {
    pub fn csv_row(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let _ = w.write_record([
            self.anchor.as_str(),
            self.test.as_str(),
            &self.bd_rate_pct.to_string(),
            &self.bd_quality_pts.to_string(),
        ]);
        String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "anchor: {}", self.anchor);
        let _ = writeln!(out, "test: {}", self.test);
        let _ = writeln!(out, "variant: classic");
        let _ = writeln!(out, "bd_rate_pct: {:.4}", self.bd_rate_pct);
        let _ = writeln!(out, "bd_quality_pts: {:.4}", self.bd_quality_pts);
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DropReason {
    Duplicate,
    /// Another kept point has at least the fidelity at no more rate.
    Dominated,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DroppedPoint {
    pub lambda: f64,
    pub point: RdPoint,
    pub reason: DropReason,
}

/// Keeps the points that are strictly increasing in both rate and
/// fidelity, reporting the rest; each point is tagged with its λ.
pub fn pareto_curve(label: &str, mut pts: Vec<(f64, RdPoint)>) -> Result<(RdCurve, Vec<DroppedPoint>)> {
    for (_, p) in &pts {
        RdPoint::new(p.rate, p.fidelity)?;
    }
    // equal rates: best fidelity first, so the others are dominated
    pts.sort_by(|a, b| {
        a.1.rate
            .total_cmp(&b.1.rate)
            .then(b.1.fidelity.total_cmp(&a.1.fidelity))
    });
    let mut kept: Vec<(f64, RdPoint)> = Vec::new();
    let mut dropped = Vec::new();
    for (lambda, p) in pts {
        let reason = if kept.iter().any(|(_, k)| *k == p) {
            Some(DropReason::Duplicate)
        } else if kept.last().is_some_and(|(_, k)| k.fidelity >= p.fidelity) {
            Some(DropReason::Dominated)
        } else {
            None
        };
        match reason {
            Some(reason) => dropped.push(DroppedPoint {
                lambda,
                point: p,
                reason,
            }),
            None => kept.push((lambda, p)),
        }
    }
    let curve = RdCurve::new(label, kept.into_iter().map(|(_, p)| p).collect())?;
    Ok((curve, dropped))
}

pub fn sweep_to_curve(results: &[(f64, EncodeOutcome)], label: &str) -> Result<(RdCurve, Vec<DroppedPoint>)> {
    let pts = results
        .iter()
        .map(|(l, o)| RdPoint::new(o.total_rate, o.fidelity).map(|p| (*l, p)))
        .collect::<Result<_>>()?;
    pareto_curve(label, pts)
}

/// One line of the RD CSV; `lambda` is empty for baselines that have none.
#[derive(Clone, Debug, PartialEq)]
pub struct RdRow {
    pub label: String,
    pub lambda: Option<f64>,
    pub rate_bits: f64,
    pub fidelity: f64,
}

pub fn rd_csv_string(rows: &[RdRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let _ = w.write_record(RD_CSV_HEADER);
    for r in rows {
        let lambda = r.lambda.map(|l| l.to_string()).unwrap_or_default();
        let _ = w.write_record([
            r.label.as_str(),
            &lambda,
            &r.rate_bits.to_string(),
            &r.fidelity.to_string(),
        ]);
    }
    String::from_utf8(w.into_inner().unwrap_or_default()).unwrap_or_default()
}

pub fn write_rd_csv(path: &Path, rows: &[RdRow]) -> Result<()> {
    std::fs::write(path, rd_csv_string(rows)).map_err(|e| Error::io(path, e))
}

pub fn parse_rd_csv(text: &str, path: &Path) -> Result<Vec<RdRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| Error::parse(path, 1, e.to_string()))?;
    if headers.iter().ne(RD_CSV_HEADER) {
        return Err(Error::parse(
            path,
            1,
            format!("missing header `{}`", RD_CSV_HEADER.join(",")),
        ));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::parse(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line());
        let num = |i: usize, what: &str| -> Result<f64> {
            record[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::parse(path, line, format!("bad {what} `{}`", &record[i])))
        };
        let lambda = if record[1].trim().is_empty() {
            None
        } else {
            Some(num(1, "lambda")?)
        };
        let rate_bits = num(2, "rate_bits")?;
        let fidelity = num(3, "fidelity")?;
        RdPoint::new(rate_bits, fidelity).map_err(|e| Error::parse(path, line, e.to_string()))?;
        rows.push(RdRow {
            label: record[0].to_string(),
            lambda,
            rate_bits,
            fidelity,
        });
    }
    Ok(rows)
}

pub fn load_rd_csv(path: &Path) -> Result<Vec<RdRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_rd_csv(&text, path)
}

/// One Pareto-pruned curve per label, in order of first appearance; rows
/// without λ are tagged NaN in the drop log.
pub fn curves_from_rows(rows: &[RdRow]) -> Result<Vec<(RdCurve, Vec<DroppedPoint>)>> {
    let mut labels: Vec<&str> = Vec::new();
    for r in rows {
        if !labels.contains(&r.label.as_str()) {
            labels.push(&r.label);
        }
    }
    labels
        .into_iter()
        .map(|label| {
            let points = rows
                .iter()
                .filter(|r| r.label == label)
                .map(|r| {
                    (
                        r.lambda.unwrap_or(f64::NAN),
                        RdPoint {
                            rate: r.rate_bits,
                            fidelity: r.fidelity,
                        },
                    )
                })
                .collect();
            pareto_curve(label, points)
        })
        .collect()
}
