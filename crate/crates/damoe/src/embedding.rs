use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::tensor::{Matrix, Tensor};

/// Names of the four default restoration tasks, in index order.
pub const DEFAULT_TASKS: [&str; 4] = ["sr", "derain", "denoise", "dejpeg"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TaskId(usize);

impl TaskId {
    pub fn new(index: usize, tasks: usize) -> Result<Self> {
        if index < tasks {
            Ok(Self(index))
        } else {
            Err(Error::Task { task: index, tasks })
        }
    }

    /// Looks up one of the default task names.
    pub fn from_name(name: &str) -> Result<Self> {
        DEFAULT_TASKS
            .iter()
            .position(|&t| t.eq_ignore_ascii_case(name))
            .map(Self)
            .ok_or_else(|| Error::TaskName(name.to_string()))
    }

    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match DEFAULT_TASKS.get(self.0) {
            Some(name) => f.write_str(name),
            None => write!(f, "task{}", self.0),
        }
    }
}

/// One learnable length-C vector per task; rows of an `N x C` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEmbedding {
    pub vectors: Matrix,
}

impl TaskEmbedding {
    pub fn zeros(tasks: usize, channels: usize) -> Self {
        Self {
            vectors: Matrix::zeros(tasks, channels),
        }
    }

    pub fn random(tasks: usize, channels: usize, std: f64, rng: &mut impl Rng) -> Self {
        Self {
            vectors: Matrix::random_normal(tasks, channels, std, rng),
        }
    }

    pub fn tasks(&self) -> usize {
        self.vectors.rows
    }

    pub fn channels(&self) -> usize {
        self.vectors.cols
    }

    pub fn vector(&self, task: TaskId) -> &[f64] {
        let c = self.channels();
        &self.vectors.data[task.index() * c..(task.index() + 1) * c]
    }

    pub fn negated(&self) -> Self {
        Self {
            vectors: Matrix {
                data: self.vectors.data.iter().map(|v| -v).collect(),
                ..self.vectors.clone()
            },
        }
    }
}

/// Broadcast-adds the task's vector over every pixel of a `C x H x W` map.
pub fn add_task_embedding(features: &Tensor, emb: &TaskEmbedding, task: TaskId) -> Result<Tensor> {
    let (c, h, w) = features.chw()?;
    check_len("task embedding", emb.channels(), c)?;
    if task.index() >= emb.tasks() {
        return Err(Error::Task {
            task: task.index(),
            tasks: emb.tasks(),
        });
    }
    let v = emb.vector(task);
    let mut out = features.clone();
    for (k, plane) in out.data_mut().chunks_exact_mut(h * w).enumerate() {
        for x in plane {
            *x += v[k];
        }
    }
    Ok(out)
}
