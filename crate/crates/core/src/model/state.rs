use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Array4, ArrayView2, ArrayView4, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::encoder::{Encoder, EncoderConfig};
use super::heads::{ProjectionConfig, ProjectionHead, RegressionHead, RegressionHeadConfig};
use super::layers::{join, Module, Slot, SlotMut};
use crate::error::{Error, Result};
use crate::skeleton::{SkeletonGraph, SkeletonSequence};

/// Which representation inference compares against references.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadMode {
    #[default]
    WithProjection,
    EncoderOnly,
}

impl HeadMode {
    pub fn name(self) -> &'static str {
        match self {
            HeadMode::WithProjection => "with_projection",
            HeadMode::EncoderOnly => "encoder_only",
        }
    }
}

impl fmt::Display for HeadMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HeadMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "with_projection" => Ok(HeadMode::WithProjection),
            "encoder_only" => Ok(HeadMode::EncoderOnly),
            _ => Err(Error::Usage(format!("unknown head mode `{s}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub enum Head {
    Projection(ProjectionHead),
    Regression(RegressionHead),
}

/// Serializable description of a head's architecture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HeadSpec {
    Projection(ProjectionConfig),
    Regression(RegressionHeadConfig),
}

impl Head {
    pub fn spec(&self, freeze_encoder: bool) -> HeadSpec {
        match self {
            Head::Projection(p) => HeadSpec::Projection(p.config()),
            Head::Regression(r) => HeadSpec::Regression(RegressionHeadConfig {
                in_dim: r.in_dim(),
                hidden_dim: r.hidden_dim(),
                freeze_encoder,
            }),
        }
    }
}

impl Module for Head {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        match self {
            Head::Projection(p) => p.visit(prefix, f),
            Head::Regression(r) => r.visit(prefix, f),
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, SlotMut<'_>)) {
        match self {
            Head::Projection(p) => p.visit_mut(prefix, f),
            Head::Regression(r) => r.visit_mut(prefix, f),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingMeta {
    pub epoch: usize,
    pub source_dataset: String,
    pub seed: u64,
    pub freeze_encoder: bool,
}

/// Encoder, head, the graph they were built for and training metadata.
#[derive(Debug, Clone)]
pub struct ModelState {
    pub encoder: Encoder,
    pub head: Head,
    pub graph: SkeletonGraph,
    pub meta: TrainingMeta,
}

impl ModelState {
    /// Freshly initialized encoder and projection head.
    pub fn new(encoder: EncoderConfig, projection: ProjectionConfig, graph: SkeletonGraph, seed: u64) -> Result<Self> {
        if projection.in_dim != encoder.embedding_dim {
            return Err(Error::Argument(format!(
                "projection input {} differs from embedding_dim {}",
                projection.in_dim, encoder.embedding_dim
            )));
        }
        Self::from_spec(encoder, &HeadSpec::Projection(projection), graph, seed)
    }

    pub fn from_spec(encoder: EncoderConfig, head: &HeadSpec, graph: SkeletonGraph, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = Encoder::new(encoder, &graph, &mut rng)?;
        let head = match head {
            HeadSpec::Projection(c) => Head::Projection(ProjectionHead::new(*c, &mut rng)?),
            HeadSpec::Regression(c) => Head::Regression(RegressionHead::new(*c, &mut rng)?),
        };
        Ok(ModelState {
            encoder,
            head,
            graph,
            meta: TrainingMeta {
                seed,
                ..TrainingMeta::default()
            },
        })
    }

    pub fn encoder_config(&self) -> &EncoderConfig {
        self.encoder.config()
    }

    pub fn projection_config(&self) -> Option<ProjectionConfig> {
        match &self.head {
            Head::Projection(p) => Some(p.config()),
            Head::Regression(_) => None,
        }
    }

    pub fn head_spec(&self) -> HeadSpec {
        self.head.spec(self.meta.freeze_encoder)
    }

    pub fn projection_head(&self) -> Result<&ProjectionHead> {
        match &self.head {
            Head::Projection(p) => Ok(p),
            Head::Regression(_) => Err(Error::Argument("model carries a regression head, not a projection head".into())),
        }
    }

    /// `f`: inference-mode embeddings of `B x T x J x C` views.
    pub fn encode(&self, views: ArrayView4<'_, f64>) -> Result<Array2<f64>> {
        self.encoder.forward(views)
    }

    /// `g`: the projection head applied to embeddings.
    pub fn project(&self, embeddings: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.projection_head()?.forward(embeddings)
    }

    pub fn represent(&self, views: ArrayView4<'_, f64>, mode: HeadMode) -> Result<Array2<f64>> {
        let e = self.encode(views)?;
        match mode {
            HeadMode::EncoderOnly => Ok(e),
            HeadMode::WithProjection => self.project(e.view()),
        }
    }

    /// Representations of many sequences, computed in chunks.
    pub fn represent_sequences(&self, sequences: &[&SkeletonSequence], mode: HeadMode) -> Result<Array2<f64>> {
        let width = match mode {
            HeadMode::EncoderOnly => self.encoder.embedding_dim(),
            HeadMode::WithProjection => self.projection_head()?.config().out_dim,
        };
        let mut out = Array2::zeros((sequences.len(), width));
        for (chunk_idx, chunk) in sequences.chunks(INFERENCE_CHUNK).enumerate() {
            let reps = self.represent(stack_sequences(chunk)?.view(), mode)?;
            out.slice_mut(ndarray::s![chunk_idx * INFERENCE_CHUNK..chunk_idx * INFERENCE_CHUNK + chunk.len(), ..])
                .assign(&reps);
        }
        Ok(out)
    }

    /// Regression-head predictions on the model's internal scale.
    pub fn regress(&self, views: ArrayView4<'_, f64>) -> Result<Array1<f64>> {
        match &self.head {
            Head::Regression(r) => r.forward(self.encode(views)?.view()),
            Head::Projection(_) => Err(Error::Argument("model carries a projection head, not a regression head".into())),
        }
    }

    /// Trainable scalars in encoder and head.
    pub fn count_parameters(&self) -> usize {
        self.parameter_count()
    }

    pub fn is_finite(&self) -> bool {
        let mut finite = true;
        self.visit("", &mut |_, slot| {
            let t = match slot {
                Slot::Param(p) => &p.value,
                Slot::Buffer(b) => b,
            };
            finite &= t.iter().all(|v| v.is_finite());
        });
        finite
    }

    pub fn ensure_graph(&self, graph: &SkeletonGraph) -> Result<()> {
        if &self.graph != graph {
            return Err(Error::GraphMismatch(format!(
                "model was built for {} joints / {} edges, data has {} joints / {} edges",
                self.graph.joint_count(),
                self.graph.edges().len(),
                graph.joint_count(),
                graph.edges().len()
            )));
        }
        Ok(())
    }
}

impl Module for ModelState {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, Slot<'_>)) {
        self.encoder.visit(&join(prefix, "encoder"), f);
        self.head.visit(&join(prefix, "head"), f);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, SlotMut<'_>)) {
        self.encoder.visit_mut(&join(prefix, "encoder"), f);
        self.head.visit_mut(&join(prefix, "head"), f);
    }
}

const INFERENCE_CHUNK: usize = 64;

/// Stacks equal-shaped sequences into a `B x T x J x C` batch.
pub fn stack_sequences(sequences: &[&SkeletonSequence]) -> Result<Array4<f64>> {
    let first = sequences
        .first()
        .ok_or_else(|| Error::Argument("no sequences to stack".into()))?;
    let (t, j, c) = first.frames().dim();
    let mut out = Array4::zeros((sequences.len(), t, j, c));
    for (s, mut dst) in sequences.iter().zip(out.axis_iter_mut(Axis(0))) {
        if s.frames().dim() != (t, j, c) {
            return Err(Error::Shape(format!(
                "sequence shape {:?} differs from {:?}; resample to a common length first",
                s.frames().dim(),
                (t, j, c)
            )));
        }
        dst.assign(&s.frames());
    }
    Ok(out)
}
