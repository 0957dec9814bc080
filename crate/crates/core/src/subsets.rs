//! Fixed-size subset enumeration in lexicographic order.

use std::ops::ControlFlow;

/// Calls `visit` with every `k`-subset of `pool`, in lexicographic order of
/// positions. With `pool` sorted ascending this is lexicographic order over
/// node ids. Stops early when `visit` breaks.
pub fn for_each_subset<T: Copy, F>(pool: &[T], k: usize, mut visit: F) -> ControlFlow<()>
where
    F: FnMut(&[T]) -> ControlFlow<()>,
{
    let n = pool.len();
    if k > n {
        return ControlFlow::Continue(());
    }
    let mut idx: Vec<usize> = (0..k).collect();
    let mut buf: Vec<T> = idx.iter().map(|&i| pool[i]).collect();
    loop {
        visit(&buf)?;
        // advance the rightmost index that still has room
        let mut pos = k;
        loop {
            if pos == 0 {
                return ControlFlow::Continue(());
            }
            pos -= 1;
            if idx[pos] < n - k + pos {
                break;
            }
        }
        idx[pos] += 1;
        for t in (pos + 1)..k {
            idx[t] = idx[t - 1] + 1;
        }
        for t in pos..k {
            buf[t] = pool[idx[t]];
        }
    }
}

/// `C(n, k)` saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for t in 0..k {
        acc = acc * (n - t) as u128 / (t + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collect(pool: &[usize], k: usize) -> Vec<Vec<usize>> {
        let mut out = Vec::new();
        let _ = for_each_subset(pool, k, |s| {
            out.push(s.to_vec());
            ControlFlow::Continue(())
        });
        out
    }

    #[test]
    fn order_and_counts() {
        assert_eq!(collect(&[1, 2, 3], 2), vec![vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(collect(&[4, 5], 0), vec![Vec::<usize>::new()]);
        assert!(collect(&[4, 5], 3).is_empty());
        for n in 0..8 {
            for k in 0..=n {
                let pool: Vec<usize> = (0..n).collect();
                let all = collect(&pool, k);
                assert_eq!(all.len() as u64, binomial(n, k));
                let mut sorted = all.clone();
                sorted.sort();
                assert_eq!(sorted, all);
            }
        }
    }

    #[test]
    fn early_stop() {
        let mut seen = 0;
        let flow = for_each_subset(&[0, 1, 2, 3], 2, |_| {
            seen += 1;
            if seen == 3 {
                ControlFlow::Break(())
            } else {
                ControlFlow::Continue(())
            }
        });
        assert_eq!(flow, ControlFlow::Break(()));
        assert_eq!(seen, 3);
    }
}
