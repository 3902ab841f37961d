//! Closed-form parameter, operation and memory counts.

use super::network::{NetworkKind, NetworkSpec};

/// Trainable parameters of a sinogram network (the image network is not
/// included). Each module holds `f0: c_in -> c_out` and `f1: c_out -> c_out`,
/// each with a per-channel bias; GLM kernels have `S` taps, CNN kernels `S²`.
pub fn count_params(spec: &NetworkSpec) -> u64 {
    let taps = kernel_taps(spec.kind, spec.kernel_size);
    spec.channel_map()
        .into_iter()
        .map(|(ci, co)| {
            let (ci, co) = (ci as u64, co as u64);
            (ci * co * taps + co) + (co * co * taps + co)
        })
        .sum()
}

fn kernel_taps(kind: NetworkKind, s: usize) -> u64 {
    match kind {
        NetworkKind::Glm => s as u64,
        NetworkKind::Cnn => (s * s) as u64,
    }
}

/// Multiply-accumulate count of one module on an `n x p` sinogram.
///
/// GLM: `n p S c_in c_out + 3n + n p S c_out²` (two line convolutions plus
/// aggregation over two neighbours and a self loop).
/// CNN: `n p S² c_in c_out + n p S² c_out²`.
pub fn complexity_estimate(kind: NetworkKind, n: u64, p: u64, s: u64, c_in: u64, c_out: u64) -> u64 {
    match kind {
        NetworkKind::Glm => n * p * s * c_in * c_out + 3 * n + n * p * s * c_out * c_out,
        NetworkKind::Cnn => n * p * s * s * c_in * c_out + n * p * s * s * c_out * c_out,
    }
}

/// Sum of [`complexity_estimate`] over the modules of `spec`.
pub fn network_complexity(spec: &NetworkSpec, n: u64, p: u64) -> u64 {
    spec.channel_map()
        .into_iter()
        .map(|(ci, co)| complexity_estimate(spec.kind, n, p, spec.kernel_size as u64, ci as u64, co as u64))
        .sum()
}

/// Analytic per-sample training memory in bytes: cached activations and their
/// gradients, parameters with Adam moments and gradient, plus the sparse
/// propagation matrix for GLM.
pub fn memory_estimate(spec: &NetworkSpec, n: usize, p: usize) -> u64 {
    const F64: u64 = 8;
    let plane = (n * p) as u64;
    // Per module: input, z0, z1 (and the aggregated tensor for GLM), each
    // mirrored by a gradient buffer of the same size.
    let per_module_tensors = match spec.kind {
        NetworkKind::Glm => |ci: u64, co: u64| ci + 3 * co,
        NetworkKind::Cnn => |ci: u64, co: u64| ci + 2 * co,
    };
    let activations: u64 = spec
        .channel_map()
        .into_iter()
        .map(|(ci, co)| 2 * per_module_tensors(ci as u64, co as u64) * plane)
        .sum();
    let params = 4 * count_params(spec);
    let graph = match spec.kind {
        // Self loop plus two neighbours per node: column index and value each.
        NetworkKind::Glm => 3 * n as u64 * 2 + (n as u64 + 1),
        NetworkKind::Cnn => 0,
    };
    (activations + params + graph) * F64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_instance() {
        assert_eq!(complexity_estimate(NetworkKind::Glm, 1, 1, 1, 1, 1), 5);
        assert_eq!(complexity_estimate(NetworkKind::Cnn, 1, 1, 1, 1, 1), 2);
    }

    #[test]
    fn dataset_scale_glm_module() {
        assert_eq!(complexity_estimate(NetworkKind::Glm, 3600, 956, 7, 1, 16), 6_552_817_200);
    }

    #[test]
    fn ratio_is_kernel_size() {
        let (n, p, s, c) = (90, 96, 7, 16);
        let glm = complexity_estimate(NetworkKind::Glm, n, p, s, c, c) - 3 * n;
        let cnn = complexity_estimate(NetworkKind::Cnn, n, p, s, c, c);
        assert_eq!(cnn, s * glm);
    }

    #[test]
    fn memory_grows_with_channels() {
        let small = memory_estimate(&NetworkSpec::standard(NetworkKind::Glm, 4), 90, 96);
        let large = memory_estimate(&NetworkSpec::standard(NetworkKind::Glm, 64), 90, 96);
        assert!(large > small);
    }
}
