use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Per-node random stream. The stream depends only on the master seed and the node's
/// name, so adding or removing other nodes never perturbs it.
pub type NodeRng = ChaCha8Rng;

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, node_name: &str) -> u64 {
    splitmix64(master ^ splitmix64(fnv1a(node_name.as_bytes())))
}

pub fn node_rng(master: u64, node_name: &str) -> NodeRng {
    NodeRng::seed_from_u64(derive_seed(master, node_name))
}
