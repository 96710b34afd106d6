use super::{LabeledDataset, SplitTag};
use crate::error::{Error, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Requested train/val/test sizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitCounts {
    pub train: usize,
    pub val: usize,
    pub test: usize,
}

impl SplitCounts {
    pub const fn new(train: usize, val: usize, test: usize) -> Self {
        Self { train, val, test }
    }

    pub fn total(&self) -> usize {
        self.train + self.val + self.test
    }

    fn as_array(&self) -> [usize; 3] {
        [self.train, self.val, self.test]
    }
}

impl Default for SplitCounts {
    fn default() -> Self {
        Self::new(700, 300, 300)
    }
}

/// Per-split positive counts by largest remainder, so each split's positive
/// count is within one of `size * n_pos / n`.
fn allocate_positives(counts: [usize; 3], n_pos: usize, n: usize) -> [usize; 3] {
    let total: usize = counts.iter().sum();
    let target = (2 * total * n_pos + n) / (2 * n);
    let mut pos = [0usize; 3];
    let mut rems = [(0usize, 0usize); 3];
    for s in 0..3 {
        pos[s] = counts[s] * n_pos / n;
        rems[s] = (counts[s] * n_pos % n, s);
    }
    let mut extra = target.saturating_sub(pos.iter().sum());
    rems.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(rem, s) in &rems {
        if extra == 0 {
            break;
        }
        if rem > 0 {
            pos[s] += 1;
            extra -= 1;
        }
    }
    pos
}

fn shuffled_class_indices(labels: &[u8], rng: &mut ChaCha8Rng) -> [Vec<usize>; 2] {
    let mut classes = [Vec::new(), Vec::new()];
    for (i, &y) in labels.iter().enumerate() {
        classes[usize::from(y)].push(i);
    }
    for c in &mut classes {
        c.shuffle(rng);
    }
    classes
}

/// Assigns stratified train/val/test tags; rows beyond the requested counts
/// stay unassigned.
pub fn split_train_val_test(data: &LabeledDataset, counts: SplitCounts, seed: u64) -> Result<LabeledDataset> {
    let n = data.len();
    if counts.total() > n {
        return Err(Error::Size(format!(
            "split counts {}+{}+{} exceed {n} rows",
            counts.train, counts.val, counts.test
        )));
    }
    let mut out = data.clone();
    if n == 0 {
        return Ok(out);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let [neg, pos] = shuffled_class_indices(data.labels(), &mut rng);
    let sizes = counts.as_array();
    let pos_alloc = allocate_positives(sizes, pos.len(), n);

    let mut tags = vec![SplitTag::Unassigned; n];
    let (mut pi, mut ni) = (0, 0);
    for (s, tag) in SplitTag::EVALUATED.iter().enumerate() {
        for &i in &pos[pi..pi + pos_alloc[s]] {
            tags[i] = *tag;
        }
        pi += pos_alloc[s];
        let n_neg = sizes[s] - pos_alloc[s];
        for &i in &neg[ni..ni + n_neg] {
            tags[i] = *tag;
        }
        ni += n_neg;
    }
    out.set_splits(tags);
    Ok(out)
}

/// Fold index per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    pub folds: Vec<usize>,
}

impl FoldAssignment {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.folds.len()).filter(|&i| self.folds[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.folds {
            sizes[f] += 1;
        }
        sizes
    }
}

/// Stratified k-fold over all rows of `data`.
pub fn stratified_kfold(data: &LabeledDataset, k: usize, seed: u64) -> Result<FoldAssignment> {
    stratified_kfold_labels(data.labels(), k, seed)
}

/// Deals each class's shuffled rows round-robin, continuing the fold cursor
/// across classes so fold sizes differ by at most one.
pub fn stratified_kfold_labels(labels: &[u8], k: usize, seed: u64) -> Result<FoldAssignment> {
    let n = labels.len();
    if k < 2 {
        return Err(Error::Config(format!("fold count must be at least 2, got {k}")));
    }
    if k > n {
        return Err(Error::Size(format!("{k} folds requested for {n} rows")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = shuffled_class_indices(labels, &mut rng);
    if classes.iter().any(Vec::is_empty) {
        return Err(Error::Size("stratified folds need both classes present".into()));
    }
    let mut folds = vec![0; n];
    for (pos, &i) in classes.iter().flatten().enumerate() {
        folds[i] = pos % k;
    }
    Ok(FoldAssignment { k, folds })
}
