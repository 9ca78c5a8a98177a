//! Length-bucketed batching. Rallies of identical length share a batch, so
//! decoder inputs line up without padding and short batches never dilute
//! the step count.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

/// Groups rally indices by identical length and chunks each group into
/// batches of at most `batch_size`. Order is deterministic: groups by
/// ascending length, indices ascending within a group.
pub fn length_batches(lengths: &[usize], batch_size: usize) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch size must be at least 1");
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by_key(|&i| (lengths[i], i));
    chunk_groups(&order, lengths, batch_size)
}

/// Like [`length_batches`] but shuffles the order within each length group
/// and then the order of the batches themselves. Used once per epoch.
pub fn shuffled_batches(
    lengths: &[usize],
    batch_size: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<usize>> {
    assert!(batch_size >= 1, "batch size must be at least 1");
    let mut order: Vec<usize> = (0..lengths.len()).collect();
    order.sort_by_key(|&i| (lengths[i], i));

    let mut batches = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && lengths[order[end]] == lengths[order[start]] {
            end += 1;
        }
        let group = &mut order[start..end];
        group.shuffle(rng);
        for chunk in group.chunks(batch_size) {
            batches.push(chunk.to_vec());
        }
        start = end;
    }
    batches.shuffle(rng);
    batches
}

fn chunk_groups(order: &[usize], lengths: &[usize], batch_size: usize) -> Vec<Vec<usize>> {
    let mut batches = Vec::new();
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && lengths[order[end]] == lengths[order[start]] {
            end += 1;
        }
        for chunk in order[start..end].chunks(batch_size) {
            batches.push(chunk.to_vec());
        }
        start = end;
    }
    batches
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;

    const LENGTHS: [usize; 10] = [7, 5, 9, 5, 7, 7, 5, 9, 5, 7];

    fn assert_partition(batches: &[Vec<usize>], n: usize, batch_size: usize) {
        let mut seen = vec![false; n];
        for batch in batches {
            assert!(!batch.is_empty());
            assert!(batch.len() <= batch_size);
            let first = LENGTHS[batch[0]];
            for &i in batch {
                assert_eq!(LENGTHS[i], first, "mixed lengths in one batch");
                assert!(!seen[i], "index {i} appears twice");
                seen[i] = true;
            }
        }
        assert!(seen.iter().all(|&s| s), "some index never batched");
    }

    #[test]
    fn deterministic_batches_cover_every_rally_once() {
        let batches = length_batches(&LENGTHS, 3);
        assert_partition(&batches, LENGTHS.len(), 3);
        assert_eq!(batches, length_batches(&LENGTHS, 3));
    }

    #[test]
    fn shuffled_batches_still_partition_by_length() {
        let mut rng = seeds::stream(7, "batches/0");
        let batches = shuffled_batches(&LENGTHS, 3, &mut rng);
        assert_partition(&batches, LENGTHS.len(), 3);
    }

    #[test]
    fn same_stream_reproduces_the_same_shuffle() {
        let a = shuffled_batches(&LENGTHS, 3, &mut seeds::stream(7, "batches/4"));
        let b = shuffled_batches(&LENGTHS, 3, &mut seeds::stream(7, "batches/4"));
        assert_eq!(a, b);
    }

    #[test]
    fn different_epoch_streams_differ() {
        let a = shuffled_batches(&LENGTHS, 3, &mut seeds::stream(7, "batches/0"));
        let b = shuffled_batches(&LENGTHS, 3, &mut seeds::stream(7, "batches/1"));
        assert_ne!(a, b);
    }

    #[test]
    fn oversized_batch_size_keeps_groups_whole() {
        let batches = length_batches(&LENGTHS, 64);
        assert_eq!(batches.len(), 3);
        assert_partition(&batches, LENGTHS.len(), 64);
    }
}
