//! Numeric design tables with named columns and a binary label.

use nalgebra::DMatrix;

/// Rows are observations, columns are named numeric features.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub x: DMatrix<f64>,
    pub y: Vec<bool>,
}

impl Dataset {
    pub fn new(names: Vec<String>, x: DMatrix<f64>, y: Vec<bool>) -> Self {
        assert_eq!(names.len(), x.ncols(), "one name per column");
        assert_eq!(y.len(), x.nrows(), "one label per row");
        Self { names, x, y }
    }

    pub fn nrows(&self) -> usize {
        self.x.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.x.ncols()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let x = self.x.select_rows(rows);
        let y = rows.iter().map(|&r| self.y[r]).collect();
        Self {
            names: self.names.clone(),
            x,
            y,
        }
    }

    pub fn select_columns(&self, cols: &[usize]) -> Self {
        Self {
            names: cols.iter().map(|&c| self.names[c].clone()).collect(),
            x: self.x.select_columns(cols),
            y: self.y.clone(),
        }
    }

    pub fn labels_f64(&self) -> Vec<f64> {
        self.y.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }

    pub fn positive_count(&self) -> usize {
        self.y.iter().filter(|b| **b).count()
    }
}
