use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::embedding::TaskId;
use crate::error::{Error, Result};

/// Top-1 expert selection counts per task.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingHistogram {
    tasks: usize,
    experts: usize,
    counts: Vec<u64>,
}

impl RoutingHistogram {
    pub fn new(tasks: usize, experts: usize) -> Self {
        Self {
            tasks,
            experts,
            counts: vec![0; tasks * experts],
        }
    }

    pub fn tasks(&self) -> usize {
        self.tasks
    }

    pub fn experts(&self) -> usize {
        self.experts
    }

    pub fn record(&mut self, task: TaskId, selections: &[usize]) {
        for &e in selections {
            self.counts[task.index() * self.experts + e] += 1;
        }
    }

    pub fn count(&self, task: TaskId, expert: usize) -> u64 {
        self.counts[task.index() * self.experts + expert]
    }

    pub fn row(&self, task: TaskId) -> &[u64] {
        &self.counts[task.index() * self.experts..(task.index() + 1) * self.experts]
    }

    pub fn row_sum(&self, task: TaskId) -> u64 {
        self.row(task).iter().sum()
    }

    /// Adds another histogram's counts; order of merges does not matter.
    pub fn merge(&mut self, other: &RoutingHistogram) -> Result<()> {
        if (self.tasks, self.experts) != (other.tasks, other.experts) {
            return Err(Error::Dimension(format!(
                "merging {}x{} routing histogram into {}x{}",
                other.tasks, other.experts, self.tasks, self.experts
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    /// `task,expert,count` rows for every cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("task,expert,count\n");
        for t in 0..self.tasks {
            let task = TaskId::new(t, self.tasks).expect("in range");
            for e in 0..self.experts {
                writeln!(out, "{task},{e},{}", self.count(task, e)).expect("string write");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(i: usize) -> TaskId {
        TaskId::new(i, 4).unwrap()
    }

    #[test]
    fn counts_and_csv() {
        let mut h = RoutingHistogram::new(4, 3);
        h.record(t(0), &[1, 1, 2]);
        h.record(t(3), &[0]);
        assert_eq!(h.row(t(0)), &[0, 2, 1]);
        assert_eq!(h.row_sum(t(0)), 3);
        let csv = h.to_csv();
        assert!(csv.starts_with("task,expert,count\nsr,0,0\nsr,1,2\n"));
        assert!(csv.contains("dejpeg,0,1"));
        assert_eq!(csv.lines().count(), 13);
    }

    #[test]
    fn merge_is_associative() {
        let mut a = RoutingHistogram::new(4, 2);
        let mut b = a.clone();
        let mut c = a.clone();
        a.record(t(0), &[0, 1]);
        b.record(t(1), &[1]);
        c.record(t(0), &[1]);
        let mut left = a.clone();
        left.merge(&b).unwrap();
        left.merge(&c).unwrap();
        let mut bc = b.clone();
        bc.merge(&c).unwrap();
        let mut right = a.clone();
        right.merge(&bc).unwrap();
        assert_eq!(left, right);
        assert!(a.merge(&RoutingHistogram::new(4, 3)).is_err());
    }
}
