use rand::Rng;

/// Randomized response on a bin index: with probability `xi` the bin is
/// replaced by one drawn uniformly from all `bin_count` bins (the original
/// included), otherwise it is reported unchanged.
pub fn randomized_response<R: Rng + ?Sized>(
    bin_index: usize,
    bin_count: usize,
    xi: f64,
    rng: &mut R,
) -> usize {
    debug_assert!(bin_index < bin_count);
    if rng.random::<f64>() < xi {
        rng.random_range(0..bin_count)
    } else {
        bin_index
    }
}
