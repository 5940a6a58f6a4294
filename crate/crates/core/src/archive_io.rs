//! Versioned JSON artifacts: prediction matrices, solution archives and
//! reference fronts.
//!
//! Every archive is written together with a `<file>.plot.csv` table holding
//! one `cost,predicted_acc,true_acc` row per solution. Run timings go to a
//! separate `<file>.timing.json` so the archive itself stays byte-stable.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{Provenance, ReferenceFront};
use crate::model::{
    evaluate_assignment, CostMatrix, Matrix, ObjectivePoint, PredictionMatrix, SolutionArchive,
};

pub const FORMAT_VERSION: u32 = 1;
pub const PREDICTIONS_FORMAT: &str = "llm-assign/predictions";
pub const ARCHIVE_FORMAT: &str = "llm-assign/archive";
pub const REFERENCE_FORMAT: &str = "llm-assign/reference";

/// `path` with `suffix` appended to its file name.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name: OsString = path.file_name().map(OsString::from).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

pub fn plot_path(archive_path: &Path) -> PathBuf {
    sibling(archive_path, ".plot.csv")
}

pub fn timing_path(archive_path: &Path) -> PathBuf {
    sibling(archive_path, ".timing.json")
}

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format: String,
    format_version: u32,
    #[serde(flatten)]
    body: T,
}

fn write_document<T: Serialize>(path: &Path, format: &str, body: &T) -> Result<()> {
    #[derive(Serialize)]
    struct Ref<'a, T> {
        format: &'a str,
        format_version: u32,
        #[serde(flatten)]
        body: &'a T,
    }
    let doc = Ref {
        format,
        format_version: FORMAT_VERSION,
        body,
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("document serialization cannot fail");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn read_document<T: DeserializeOwned>(path: &Path, format: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let malformed = |message: String| Error::Format {
        path: path.into(),
        message,
    };
    let doc: Envelope<T> = serde_json::from_str(&text).map_err(|e| malformed(e.to_string()))?;
    if doc.format != format || doc.format_version != FORMAT_VERSION {
        return Err(malformed(format!(
            "expected {format} v{FORMAT_VERSION}, found {} v{}",
            doc.format, doc.format_version
        )));
    }
    Ok(doc.body)
}

/// Predicted correctness probabilities for a subset of a dataset's queries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionDocument {
    /// Dataset query id of each matrix row.
    pub query_ids: Vec<usize>,
    pub values: PredictionMatrix,
}

impl PredictionDocument {
    pub fn new(query_ids: Vec<usize>, values: PredictionMatrix) -> Result<Self> {
        if query_ids.len() != values.rows() {
            return Err(Error::Shape(format!(
                "{} query ids for {} prediction rows",
                query_ids.len(),
                values.rows()
            )));
        }
        Ok(PredictionDocument { query_ids, values })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_document(path, PREDICTIONS_FORMAT, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let doc: PredictionDocument = read_document(path, PREDICTIONS_FORMAT)?;
        PredictionMatrix::new(doc.values.clone().into_inner()).map_err(|e| Error::Format {
            path: path.into(),
            message: e.to_string(),
        })?;
        PredictionDocument::new(doc.query_ids, doc.values).map_err(|e| Error::Format {
            path: path.into(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool_version: String,
    pub algorithm: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub query_ids: Vec<usize>,
    pub llm_count: usize,
}

impl RunMetadata {
    pub fn new(
        algorithm: &str,
        seed: Option<u64>,
        config: serde_json::Value,
        query_ids: Vec<usize>,
        llm_count: usize,
    ) -> Self {
        RunMetadata {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            algorithm: algorithm.to_string(),
            seed,
            config,
            query_ids,
            llm_count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchivedSolution {
    pub assignment: Vec<usize>,
    pub predicted: ObjectivePoint,
    /// Objectives under the ground-truth labels, when available.
    #[serde(rename = "true")]
    pub truth: Option<ObjectivePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub cost: f64,
    pub predicted_acc: f64,
    pub true_acc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArchiveDocument {
    pub metadata: RunMetadata,
    pub solutions: Vec<ArchivedSolution>,
    pub plot: Vec<PlotRow>,
}

impl ArchiveDocument {
    /// Describes `archive`; `labels` adds true objectives against the same costs.
    pub fn from_archive(
        archive: &SolutionArchive,
        metadata: RunMetadata,
        costs: &CostMatrix,
        labels: Option<&Matrix>,
    ) -> Result<Self> {
        let mut solutions = Vec::with_capacity(archive.len());
        for s in archive.members() {
            let truth = labels
                .map(|l| evaluate_assignment(s.assignment(), costs, l))
                .transpose()?;
            solutions.push(ArchivedSolution {
                assignment: s.assignment().to_vec(),
                predicted: s.objectives(),
                truth,
            });
        }
        let plot = solutions
            .iter()
            .map(|s| PlotRow {
                cost: s.predicted.cost,
                predicted_acc: s.predicted.accuracy,
                true_acc: s.truth.map(|t| t.accuracy),
            })
            .collect();
        Ok(ArchiveDocument {
            metadata,
            solutions,
            plot,
        })
    }

    pub fn predicted_points(&self) -> Vec<ObjectivePoint> {
        self.solutions.iter().map(|s| s.predicted).collect()
    }

    /// True objectives of every solution, if all were recorded.
    pub fn true_points(&self) -> Option<Vec<ObjectivePoint>> {
        self.solutions.iter().map(|s| s.truth).collect()
    }

    /// Writes the document and its plot table.
    pub fn write(&self, path: &Path) -> Result<()> {
        write_document(path, ARCHIVE_FORMAT, self)?;
        let plot = plot_path(path);
        let mut w = csv::Writer::from_path(&plot).map_err(|e| plot_error(&plot, e))?;
        w.write_record(["cost", "predicted_acc", "true_acc"])
            .map_err(|e| plot_error(&plot, e))?;
        for r in &self.plot {
            let true_acc = r.true_acc.map(|v| v.to_string()).unwrap_or_default();
            w.write_record([r.cost.to_string(), r.predicted_acc.to_string(), true_acc])
                .map_err(|e| plot_error(&plot, e))?;
        }
        w.flush().map_err(|e| Error::io(&plot, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let doc: ArchiveDocument = read_document(path, ARCHIVE_FORMAT)?;
        if doc.plot.len() != doc.solutions.len() {
            return Err(Error::Format {
                path: path.into(),
                message: "plot table and solution list differ in length".into(),
            });
        }
        Ok(doc)
    }
}

fn plot_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format {
            path: path.into(),
            message: format!("{other:?}"),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDocument {
    pub query_ids: Vec<usize>,
    pub provenance: Provenance,
    pub points: Vec<ObjectivePoint>,
}

impl ReferenceDocument {
    pub fn new(query_ids: Vec<usize>, front: &ReferenceFront) -> Self {
        ReferenceDocument {
            query_ids,
            provenance: front.provenance(),
            points: front.points().to_vec(),
        }
    }

    pub fn front(&self) -> ReferenceFront {
        ReferenceFront::new(&self.points, self.provenance)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_document(path, REFERENCE_FORMAT, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        read_document(path, REFERENCE_FORMAT)
    }
}

/// Wall-clock duration of the run that produced an archive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

impl Timing {
    pub fn write(&self, archive_path: &Path) -> Result<()> {
        let path = timing_path(archive_path);
        let text = serde_json::to_string(self).expect("timing serialization cannot fail");
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    /// `None` when no timing file accompanies the archive.
    pub fn read(archive_path: &Path) -> Result<Option<Self>> {
        let path = timing_path(archive_path);
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| Error::Format {
                path,
                message: e.to_string(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::incremental_front;
    use crate::model::{LabelMatrix, Solution};

    fn costs() -> CostMatrix {
        CostMatrix::new(Matrix::from_rows(&[vec![0.1, 0.7], vec![0.3, 1.9]]).unwrap()).unwrap()
    }

    fn preds() -> PredictionMatrix {
        PredictionMatrix::new(Matrix::from_rows(&[vec![0.15, 0.85], vec![0.3, 1.0 / 3.0]]).unwrap())
            .unwrap()
    }

    #[test]
    fn sibling_names() {
        assert_eq!(
            plot_path(Path::new("out/a.json")),
            Path::new("out/a.json.plot.csv")
        );
        assert_eq!(timing_path(Path::new("a")), Path::new("a.timing.json"));
    }

    #[test]
    fn single_solution_archive() {
        let (c, p) = (costs(), preds());
        let mut archive = SolutionArchive::new();
        archive.insert(Solution::new(vec![0, 0], &c, &p).unwrap());
        let meta = RunMetadata::new("optllm", None, serde_json::json!({}), vec![4, 9], 2);
        let doc = ArchiveDocument::from_archive(&archive, meta, &c, None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.json");
        doc.write(&path).unwrap();
        let table = fs::read_to_string(plot_path(&path)).unwrap();
        assert_eq!(table.lines().count(), 2);
        assert_eq!(ArchiveDocument::read(&path).unwrap().solutions.len(), 1);
    }

    #[test]
    fn archive_round_trip_is_exact() {
        let (c, p) = (costs(), preds());
        let labels =
            LabelMatrix::new(Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap())
                .unwrap();
        let mut archive = SolutionArchive::new();
        for a in [vec![0, 0], vec![1, 0], vec![1, 1], vec![0, 1]] {
            archive.insert(Solution::new(a, &c, &p).unwrap());
        }
        let meta = RunMetadata::new(
            "nsga2",
            Some(7),
            serde_json::json!({"pop": 4}),
            vec![0, 1],
            2,
        );
        let doc = ArchiveDocument::from_archive(&archive, meta, &c, Some(&labels)).unwrap();
        assert_eq!(doc.plot.len(), archive.len());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.json");
        doc.write(&path).unwrap();
        let back = ArchiveDocument::read(&path).unwrap();
        assert_eq!(back, doc);
        for (s, m) in back.solutions.iter().zip(archive.members()) {
            assert_eq!(s.predicted.cost.to_bits(), m.cost().to_bits());
            assert_eq!(s.predicted.accuracy.to_bits(), m.accuracy().to_bits());
        }
        assert!(back.true_points().is_some());
        let rows = fs::read_to_string(plot_path(&path))
            .unwrap()
            .lines()
            .count();
        assert_eq!(rows, archive.len() + 1);
    }

    #[test]
    fn predictions_and_reference_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        let doc = PredictionDocument::new(vec![3, 1], preds()).unwrap();
        doc.write(&path).unwrap();
        assert_eq!(PredictionDocument::read(&path).unwrap(), doc);
        assert!(PredictionDocument::new(vec![1], preds()).is_err());

        let labels =
            LabelMatrix::new(Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap())
                .unwrap();
        let front = incremental_front(&costs(), &labels).unwrap();
        let rdoc = ReferenceDocument::new(vec![0, 1], &front);
        let rpath = dir.path().join("r.json");
        rdoc.write(&rpath).unwrap();
        let back = ReferenceDocument::read(&rpath).unwrap();
        assert_eq!(back.front(), front);
    }

    #[test]
    fn wrong_format_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        PredictionDocument::new(vec![0, 1], preds())
            .unwrap()
            .write(&path)
            .unwrap();
        assert!(matches!(
            ArchiveDocument::read(&path),
            Err(Error::Format { .. })
        ));
        let text = fs::read_to_string(&path).unwrap().replace("0.85", "1.5");
        fs::write(&path, text).unwrap();
        assert!(matches!(
            PredictionDocument::read(&path),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn timing_sidecar() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.json");
        assert_eq!(Timing::read(&path).unwrap(), None);
        Timing { wall_seconds: 0.25 }.write(&path).unwrap();
        assert_eq!(
            Timing::read(&path).unwrap(),
            Some(Timing { wall_seconds: 0.25 })
        );
    }
}
