use rand::seq::SliceRandom;

use crate::seed;
use crate::{Error, Result};

/// Disjoint train and test indices into a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Stratified split. Each class sends `round(test_fraction * n_class)`
/// samples to test. When that leaves the total short of
/// `round(test_fraction * n)` (small classes), the remainder is taken one at a
/// time from the largest classes that can spare a sample without emptying
/// their training share.
pub fn split(labels: &[usize], test_fraction: f64, seed: u64) -> Result<Split> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::Config("test fraction must lie in [0, 1)".into()));
    }
    let classes = labels.iter().max().map_or(0, |&m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let mut rng = seed::rng(seed);
    for members in by_class.iter_mut() {
        members.shuffle(&mut rng);
    }

    let mut n_test: Vec<usize> = by_class
        .iter()
        .map(|m| {
            let want = (test_fraction * m.len() as f64).round() as usize;
            want.min(m.len().saturating_sub(1))
        })
        .collect();
    let target = (test_fraction * labels.len() as f64).round() as usize;
    if by_class.iter().any(|m| !m.is_empty() && m.len() < 10) {
        log::warn!("stratified split: some classes have fewer than 10 samples");
    }
    let mut total: usize = n_test.iter().sum();
    while total < target {
        // class with the most spare training samples; ties go to the lowest id
        let pick = (0..classes)
            .filter(|&c| by_class[c].len() > n_test[c])
            .max_by_key(|&c| (by_class[c].len() - n_test[c], std::cmp::Reverse(c)));
        let Some(c) = pick else { break };
        if by_class[c].len() - n_test[c] == 1 {
            log::warn!("stratified split: class {c} has no training samples left");
        }
        n_test[c] += 1;
        total += 1;
    }

    let mut train = Vec::with_capacity(labels.len() - total);
    let mut test = Vec::with_capacity(total);
    for (members, &k) in by_class.iter().zip(&n_test) {
        test.extend_from_slice(&members[..k]);
        train.extend_from_slice(&members[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split { train, test })
}
