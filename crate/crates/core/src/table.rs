//! Column-major data tables that kernels iterate over.

use crate::model::ModelError;

#[derive(Debug, Clone, PartialEq)]
struct Column<T> {
    name: String,
    values: Vec<T>,
}

/// Homogeneous records of named real fields and named integer index fields.
///
/// Every column has exactly [`len`](DataTable::len) entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DataTable {
    len: usize,
    reals: Vec<Column<f64>>,
    indices: Vec<Column<usize>>,
}

impl DataTable {
    /// A table with `len` records and no columns yet.
    pub fn new(len: usize) -> Self {
        DataTable { len, reals: Vec::new(), indices: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Adds a real column, replacing any column of the same name.
    pub fn with_real(mut self, name: &str, values: Vec<f64>) -> Result<Self, ModelError> {
        self.check_len(name, values.len())?;
        self.reals.retain(|c| c.name != name);
        self.reals.push(Column { name: name.to_string(), values });
        Ok(self)
    }

    /// Adds an integer index column, replacing any column of the same name.
    pub fn with_index(mut self, name: &str, values: Vec<usize>) -> Result<Self, ModelError> {
        self.check_len(name, values.len())?;
        self.indices.retain(|c| c.name != name);
        self.indices.push(Column { name: name.to_string(), values });
        Ok(self)
    }

    fn check_len(&self, name: &str, got: usize) -> Result<(), ModelError> {
        if got != self.len {
            return Err(ModelError::LengthMismatch {
                what: format!("column `{name}`"),
                expected: self.len,
                got,
            });
        }
        Ok(())
    }

    pub fn real_id(&self, name: &str) -> Option<usize> {
        self.reals.iter().position(|c| c.name == name)
    }

    pub fn index_id(&self, name: &str) -> Option<usize> {
        self.indices.iter().position(|c| c.name == name)
    }

    pub fn real(&self, name: &str) -> Option<&[f64]> {
        self.real_id(name).map(|i| self.reals[i].values.as_slice())
    }

    pub fn index(&self, name: &str) -> Option<&[usize]> {
        self.index_id(name).map(|i| self.indices[i].values.as_slice())
    }

    pub(crate) fn real_at(&self, col: usize, record: usize) -> f64 {
        self.reals[col].values[record]
    }

    pub(crate) fn index_at(&self, col: usize, record: usize) -> usize {
        self.indices[col].values[record]
    }

    pub(crate) fn index_column(&self, col: usize) -> &[usize] {
        &self.indices[col].values
    }

    /// Names of the real columns, in insertion order.
    pub fn real_names(&self) -> impl Iterator<Item = &str> {
        self.reals.iter().map(|c| c.name.as_str())
    }

    /// Names of the index columns, in insertion order.
    pub fn index_names(&self) -> impl Iterator<Item = &str> {
        self.indices.iter().map(|c| c.name.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ragged_column_rejected() {
        let err = DataTable::new(3).with_real("a", vec![1.0, 2.0]).unwrap_err();
        assert!(matches!(err, ModelError::LengthMismatch { expected: 3, got: 2, .. }));
    }

    #[test]
    fn lookup_by_name() {
        let t = DataTable::new(2)
            .with_real("g", vec![1.0, 2.0])
            .unwrap()
            .with_index("i", vec![0, 1])
            .unwrap();
        assert_eq!(t.real("g"), Some(&[1.0, 2.0][..]));
        assert_eq!(t.index("i"), Some(&[0, 1][..]));
        assert!(t.real("i").is_none());
        assert_eq!(t.real_at(0, 1), 2.0);
    }
}
