//! Lexicographic enumeration of small subsets.

/// All subsets of `{0, …, n−1}` with at most `k` elements, as sorted vectors in
/// lexicographic order (`∅, {0}, {0,1}, …, {0,2}, …, {1}, …`).
#[derive(Debug, Clone)]
pub struct Subsets {
    n: usize,
    k: usize,
    cur: Vec<usize>,
    started: bool,
    done: bool,
}

impl Subsets {
    pub fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            k,
            cur: Vec::with_capacity(k),
            started: false,
            done: false,
        }
    }
}

impl Iterator for Subsets {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(Vec::new());
        }
        let next = self.cur.last().map_or(0, |&l| l + 1);
        if self.cur.len() < self.k && next < self.n {
            self.cur.push(next);
            return Some(self.cur.clone());
        }
        while let Some(x) = self.cur.pop() {
            if x + 1 < self.n {
                self.cur.push(x + 1);
                return Some(self.cur.clone());
            }
        }
        self.done = true;
        None
    }
}

/// `Σ_{s ≤ k} C(n, s)`, saturating.
pub fn count_up_to(n: usize, k: usize) -> u128 {
    let mut total: u128 = 0;
    let mut binom: u128 = 1;
    for s in 0..=k.min(n) {
        total = total.saturating_add(binom);
        binom = binom.saturating_mul((n - s) as u128) / (s as u128 + 1);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn order_and_count() {
        let all: Vec<Vec<usize>> = Subsets::new(3, 2).collect();
        assert_eq!(
            all,
            vec![vec![], vec![0], vec![0, 1], vec![0, 2], vec![1], vec![1, 2], vec![2]]
        );
        for n in 0..8 {
            for k in 0..5 {
                assert_eq!(Subsets::new(n, k).count() as u128, count_up_to(n, k));
            }
        }
        assert_eq!(Subsets::new(0, 3).collect::<Vec<_>>(), vec![Vec::<usize>::new()]);
    }
}
