use super::ProxError;

/// Ordered index groups over `{0, ..., n-1}`, possibly overlapping.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupStructure {
    n: usize,
    groups: Vec<Vec<usize>>,
}

impl GroupStructure {
    /// Every group must be non-empty with strictly increasing indices below `n`.
    pub fn new(n: usize, groups: Vec<Vec<usize>>) -> Result<Self, ProxError> {
        for (j, g) in groups.iter().enumerate() {
            if g.is_empty() {
                return Err(ProxError::EmptyGroups(j));
            }
            if let Some(&bad) = g.iter().find(|&&i| i >= n) {
                return Err(ProxError::IndexOutOfRange {
                    group: j,
                    index: bad,
                    n,
                });
            }
            if g.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ProxError::UnsortedGroup(j));
            }
        }
        Ok(GroupStructure { n, groups })
    }

    /// Consecutive disjoint blocks of `size` (the last one may be shorter).
    pub fn contiguous(n: usize, size: usize) -> Result<Self, ProxError> {
        if size == 0 {
            return Err(ProxError::EmptyGroups(0));
        }
        let groups = (0..n)
            .step_by(size)
            .map(|s| (s..(s + size).min(n)).collect())
            .collect();
        GroupStructure::new(n, groups)
    }

    /// No groups at all over `n` coordinates.
    pub fn empty(n: usize) -> Self {
        GroupStructure {
            n,
            groups: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn iter(&self) -> impl Iterator<Item = &[usize]> {
        self.groups.iter().map(|g| g.as_slice())
    }

    /// Total number of (group, index) memberships.
    pub fn total_members(&self) -> usize {
        self.groups.iter().map(|g| g.len()).sum()
    }

    /// How many groups contain each coordinate.
    pub fn coverage(&self) -> Vec<usize> {
        let mut cover = vec![0usize; self.n];
        for g in &self.groups {
            for &i in g {
                cover[i] += 1;
            }
        }
        cover
    }

    pub fn max_coverage(&self) -> usize {
        self.coverage().into_iter().max().unwrap_or(0)
    }

    /// True iff no index appears in two groups.
    pub fn disjoint(&self) -> bool {
        self.coverage().into_iter().all(|c| c <= 1)
    }

    /// Coordinates that belong to no group.
    pub fn uncovered(&self) -> Vec<usize> {
        self.coverage()
            .into_iter()
            .enumerate()
            .filter_map(|(i, c)| (c == 0).then_some(i))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        assert_eq!(
            GroupStructure::new(3, vec![vec![0], vec![]]),
            Err(ProxError::EmptyGroups(1))
        );
        assert_eq!(
            GroupStructure::new(3, vec![vec![0, 3]]),
            Err(ProxError::IndexOutOfRange {
                group: 0,
                index: 3,
                n: 3
            })
        );
        assert_eq!(
            GroupStructure::new(3, vec![vec![1, 1]]),
            Err(ProxError::UnsortedGroup(0))
        );
        assert_eq!(
            GroupStructure::new(3, vec![vec![2, 1]]),
            Err(ProxError::UnsortedGroup(0))
        );
    }

    #[test]
    fn disjoint_and_coverage() {
        let g = GroupStructure::new(5, vec![vec![0, 1, 2], vec![2, 3]]).unwrap();
        assert!(!g.disjoint());
        assert_eq!(g.coverage(), vec![1, 1, 2, 1, 0]);
        assert_eq!(g.max_coverage(), 2);
        assert_eq!(g.uncovered(), vec![4]);
        let c = GroupStructure::contiguous(7, 3).unwrap();
        assert!(c.disjoint());
        assert_eq!(c.groups(), &[vec![0, 1, 2], vec![3, 4, 5], vec![6]]);
        assert_eq!(GroupStructure::empty(4).max_coverage(), 0);
    }
}
