//! Cross-modal retrieval metrics: cosine ranking, average precision, PR
//! curves, per-category AP and top-1 confusion matrices.
//!
//! Scores are computed in the embedding scalar type; every metric is
//! reported as `f64`.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{dot, Tensor};

/// Points on the recall grid of [`prc`].
pub const PRC_POINTS: usize = 101;

/// `u·v / (‖u‖‖v‖)`, or 0 when either vector is zero.
pub fn cosine<T: Scalar>(u: &[T], v: &[T]) -> T {
    let nu = dot(u, u).sqrt();
    let nv = dot(v, v).sqrt();
    if nu == T::zero() || nv == T::zero() {
        return T::zero();
    }
    let c = dot(u, v) / (nu * nv);
    c.max(-T::one()).min(T::one())
}

/// Average precision of a ranked relevance list, or `None` when nothing is
/// relevant.
pub fn average_precision(relevant: &[bool]) -> Option<f64> {
    let total = relevant.iter().filter(|&&r| r).count();
    if total == 0 {
        return None;
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (k, &rel) in relevant.iter().enumerate() {
        if rel {
            hits += 1;
            sum += hits as f64 / (k + 1) as f64;
        }
    }
    Some(sum / total as f64)
}

/// Gallery indices ordered by descending cosine to `query`, ties by
/// ascending index, with their scores.
pub fn rank<T: Scalar>(query: &[T], gallery: &Tensor<T>) -> Vec<(usize, T)> {
    let mut scored: Vec<(usize, T)> = (0..gallery.rows())
        .map(|g| (g, cosine(query, gallery.row(g))))
        .collect();
    scored.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    scored
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Direction {
    #[serde(rename = "audio2visual")]
    AudioToVisual,
    #[serde(rename = "visual2audio")]
    VisualToAudio,
}

impl Direction {
    pub const ALL: [Direction; 2] = [Direction::AudioToVisual, Direction::VisualToAudio];

    pub fn name(self) -> &'static str {
        match self {
            Direction::AudioToVisual => "audio2visual",
            Direction::VisualToAudio => "visual2audio",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Full ranking of the gallery for one query.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedRetrieval {
    pub query: usize,
    pub query_label: usize,
    pub direction: Direction,
    pub ranking: Vec<usize>,
    pub scores: Vec<f64>,
    /// `relevant[k]` is whether `ranking[k]` shares the query's class.
    pub relevant: Vec<bool>,
    /// Class of the top-ranked gallery item.
    pub top1_label: Option<usize>,
}

impl RankedRetrieval {
    pub fn average_precision(&self) -> Option<f64> {
        average_precision(&self.relevant)
    }
}

/// Ranks the gallery for every query. With `exclude_self`, query `i` is
/// dropped from its own ranking (same-set retrieval only).
pub fn retrieve<T: Scalar>(
    queries: &Tensor<T>,
    query_labels: &[usize],
    gallery: &Tensor<T>,
    gallery_labels: &[usize],
    direction: Direction,
    exclude_self: bool,
) -> Result<Vec<RankedRetrieval>> {
    if queries.cols() != gallery.cols() {
        return Err(Error::Dimension {
            op: "retrieve",
            lhs: queries.shape(),
            rhs: gallery.shape(),
        });
    }
    if queries.rows() != query_labels.len() || gallery.rows() != gallery_labels.len() {
        return Err(Error::Validation(
            "labels not aligned with embeddings".into(),
        ));
    }
    if queries.rows() == 0 || gallery.rows() == 0 {
        return Err(Error::Empty { op: "retrieve" });
    }
    Ok((0..queries.rows())
        .map(|q| {
            let label = query_labels[q];
            let ranked: Vec<(usize, T)> = rank(queries.row(q), gallery)
                .into_iter()
                .filter(|&(g, _)| !(exclude_self && g == q))
                .collect();
            RankedRetrieval {
                query: q,
                query_label: label,
                direction,
                relevant: ranked
                    .iter()
                    .map(|&(g, _)| gallery_labels[g] == label)
                    .collect(),
                top1_label: ranked.first().map(|&(g, _)| gallery_labels[g]),
                scores: ranked.iter().map(|&(_, s)| s.to_f64_lossy()).collect(),
                ranking: ranked.into_iter().map(|(g, _)| g).collect(),
            }
        })
        .collect())
}

/// Mean AP over the queries that have at least one relevant item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanAp {
    pub map: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

pub fn mean_ap(retrievals: &[RankedRetrieval]) -> MeanAp {
    let mut sum = 0.0;
    let mut evaluated = 0;
    let mut skipped = 0;
    for r in retrievals {
        match r.average_precision() {
            Some(ap) => {
                sum += ap;
                evaluated += 1;
            }
            None => skipped += 1,
        }
    }
    MeanAp {
        map: if evaluated == 0 {
            0.0
        } else {
            sum / evaluated as f64
        },
        evaluated,
        skipped,
    }
}

/// Interpolated precision on an evenly spaced 101-point recall grid,
/// averaged over queries with at least one relevant item.
pub fn prc(retrievals: &[RankedRetrieval]) -> Vec<(f64, f64)> {
    let grid: Vec<f64> = (0..PRC_POINTS)
        .map(|i| i as f64 / (PRC_POINTS - 1) as f64)
        .collect();
    let mut acc = vec![0.0; PRC_POINTS];
    let mut count = 0usize;
    for r in retrievals {
        let total = r.relevant.iter().filter(|&&x| x).count();
        if total == 0 {
            continue;
        }
        count += 1;
        let mut hits = 0usize;
        let mut points = Vec::with_capacity(r.relevant.len());
        for (k, &rel) in r.relevant.iter().enumerate() {
            if rel {
                hits += 1;
            }
            points.push((hits as f64 / total as f64, hits as f64 / (k + 1) as f64));
        }
        // Running max from the tail gives max precision at recall >= r.
        let mut best = vec![0.0; points.len()];
        let mut running: f64 = 0.0;
        for i in (0..points.len()).rev() {
            running = running.max(points[i].1);
            best[i] = running;
        }
        let mut p = 0;
        for (g, &level) in grid.iter().enumerate() {
            while p < points.len() && points[p].0 < level - 1e-12 {
                p += 1;
            }
            if p < points.len() {
                acc[g] += best[p];
            }
        }
    }
    grid.into_iter()
        .zip(acc)
        .map(|(r, s)| (r, if count == 0 { 0.0 } else { s / count as f64 }))
        .collect()
}

/// Trapezoidal area under a PR curve.
pub fn prc_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// `classes × classes` counts: row is the query's class, column the class of
/// its top-1 result.
pub fn confusion(retrievals: &[RankedRetrieval], classes: usize) -> Result<Vec<Vec<usize>>> {
    let mut m = vec![vec![0usize; classes]; classes];
    for r in retrievals {
        let Some(top) = r.top1_label else { continue };
        if r.query_label >= classes || top >= classes {
            return Err(Error::Validation(format!(
                "label out of range for {classes} classes at query {}",
                r.query
            )));
        }
        m[r.query_label][top] += 1;
    }
    Ok(m)
}

/// Mean AP of the queries of each class; `None` for classes with no
/// evaluable query.
pub fn per_category_ap(retrievals: &[RankedRetrieval], classes: usize) -> Vec<Option<f64>> {
    let mut sums = vec![0.0; classes];
    let mut counts = vec![0usize; classes];
    for r in retrievals {
        if let (Some(ap), true) = (r.average_precision(), r.query_label < classes) {
            sums[r.query_label] += ap;
            counts[r.query_label] += 1;
        }
    }
    sums.into_iter()
        .zip(counts)
        .map(|(s, n)| (n > 0).then(|| s / n as f64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DirectionReport {
    pub direction: Direction,
    pub map: f64,
    pub queries: usize,
    pub skipped: usize,
    pub per_category_ap: Vec<Option<f64>>,
    pub prc: Vec<(f64, f64)>,
    pub confusion: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub audio2visual: DirectionReport,
    pub visual2audio: DirectionReport,
    pub average: f64,
}

impl EvalReport {
    pub fn direction(&self, d: Direction) -> &DirectionReport {
        match d {
            Direction::AudioToVisual => &self.audio2visual,
            Direction::VisualToAudio => &self.visual2audio,
        }
    }
}

pub fn evaluate_direction(
    retrievals: &[RankedRetrieval],
    direction: Direction,
    classes: usize,
) -> Result<DirectionReport> {
    let m = mean_ap(retrievals);
    Ok(DirectionReport {
        direction,
        map: m.map,
        queries: retrievals.len(),
        skipped: m.skipped,
        per_category_ap: per_category_ap(retrievals, classes),
        prc: prc(retrievals),
        confusion: confusion(retrievals, classes)?,
    })
}

/// Both retrieval directions between paired audio and visual embeddings.
/// The paired counterpart stays in the gallery.
pub fn evaluate_embeddings<T: Scalar>(
    audio: &Tensor<T>,
    visual: &Tensor<T>,
    labels: &[usize],
    classes: usize,
) -> Result<EvalReport> {
    let a2v = retrieve(
        audio,
        labels,
        visual,
        labels,
        Direction::AudioToVisual,
        false,
    )?;
    let v2a = retrieve(
        visual,
        labels,
        audio,
        labels,
        Direction::VisualToAudio,
        false,
    )?;
    let audio2visual = evaluate_direction(&a2v, Direction::AudioToVisual, classes)?;
    let visual2audio = evaluate_direction(&v2a, Direction::VisualToAudio, classes)?;
    let average = (audio2visual.map + visual2audio.map) / 2.0;
    Ok(EvalReport {
        audio2visual,
        visual2audio,
        average,
    })
}
