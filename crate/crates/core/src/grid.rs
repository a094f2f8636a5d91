//! Dense per-user storage indexed by (user index k, cell l).

use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

/// A K×L array with one entry per user, `grid[(k, l)]` is the k-th user of cell l.
#[derive(Debug, Clone, PartialEq)]
pub struct UserGrid<T> {
    users: usize,
    cells: usize,
    data: Vec<T>,
}

impl<T: Clone> UserGrid<T> {
    pub fn filled(users: usize, cells: usize, value: T) -> Self {
        Self { users, cells, data: alloc::vec![value; users * cells] }
    }
}

impl<T> UserGrid<T> {
    pub fn from_fn(users: usize, cells: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(users * cells);
        for k in 0..users {
            for l in 0..cells {
                data.push(f(k, l));
            }
        }
        Self { users, cells, data }
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn cells(&self) -> usize {
        self.cells
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row-major over (k, l): all cells of user index 0 first.
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Iterates `((k, l), value)` in row-major order.
    pub fn indexed(&self) -> impl Iterator<Item = ((usize, usize), &T)> {
        let cells = self.cells;
        self.data.iter().enumerate().map(move |(i, v)| ((i / cells, i % cells), v))
    }

    pub fn map<U>(&self, mut f: impl FnMut(&T) -> U) -> UserGrid<U> {
        UserGrid { users: self.users, cells: self.cells, data: self.data.iter().map(&mut f).collect() }
    }

    pub fn same_shape<U>(&self, other: &UserGrid<U>) -> bool {
        self.users == other.users && self.cells == other.cells
    }
}

impl<T> Index<(usize, usize)> for UserGrid<T> {
    type Output = T;

    #[inline]
    fn index(&self, (k, l): (usize, usize)) -> &T {
        debug_assert!(k < self.users && l < self.cells);
        &self.data[k * self.cells + l]
    }
}

impl<T> IndexMut<(usize, usize)> for UserGrid<T> {
    #[inline]
    fn index_mut(&mut self, (k, l): (usize, usize)) -> &mut T {
        debug_assert!(k < self.users && l < self.cells);
        &mut self.data[k * self.cells + l]
    }
}

impl UserGrid<f64> {
    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_layout() {
        let g = UserGrid::from_fn(2, 3, |k, l| 10 * k + l);
        assert_eq!(g.as_slice(), &[0, 1, 2, 10, 11, 12]);
        assert_eq!(g[(1, 2)], 12);
        let idx: alloc::vec::Vec<_> = g.indexed().map(|(i, _)| i).collect();
        assert_eq!(idx[4], (1, 1));
    }
}
