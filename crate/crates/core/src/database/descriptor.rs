use serde::{Deserialize, Serialize};

use crate::util::fnv1a64_seeded;

const ORDER_SEED: u64 = 0x9e37_79b9_7f4a_7c15;
const VALUE_SEED: u64 = 0xc2b2_ae3d_27d4_eb4f;

/// Behaviour coordinates of a program, both in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub complexity: f64,
    pub diversity: f64,
}

/// Maps program text to grid coordinates.
pub trait DescriptorFn: Send + Sync {
    fn describe(&self, code: &str) -> Descriptor;
}

/// Length-based complexity plus a one-coordinate MinHash over character
/// trigrams. Programs sharing most trigrams tend to share the minimum and
/// so land on the same diversity coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrigramDescriptor {
    /// Code length (in chars) at which complexity saturates.
    pub length_scale: usize,
}

impl Default for TrigramDescriptor {
    fn default() -> Self {
        Self { length_scale: 8000 }
    }
}

impl DescriptorFn for TrigramDescriptor {
    fn describe(&self, code: &str) -> Descriptor {
        descriptor(code, self.length_scale)
    }
}

pub fn descriptor(code: &str, length_scale: usize) -> Descriptor {
    let chars: Vec<char> = code.chars().collect();
    let complexity = (chars.len() as f64 / length_scale.max(1) as f64).min(1.0);
    let diversity = min_trigram(&chars)
        .map(|gram| fnv1a64_seeded(VALUE_SEED, gram.as_bytes()) as f64 / 2f64.powi(64))
        .map_or(0.0, |d| d.min(1.0));
    Descriptor { complexity, diversity }
}

fn min_trigram(chars: &[char]) -> Option<String> {
    if chars.is_empty() {
        return None;
    }
    let width = chars.len().min(3);
    chars
        .windows(width)
        .map(|w| w.iter().collect::<String>())
        .min_by_key(|g| (fnv1a64_seeded(ORDER_SEED, g.as_bytes()), g.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_code_same_descriptor() {
        let code = "def f(x):\n    return x * 2\n";
        assert_eq!(descriptor(code, 8000), descriptor(code, 8000));
    }

    #[test]
    fn empty_code() {
        assert_eq!(descriptor("", 8000), Descriptor { complexity: 0.0, diversity: 0.0 });
    }

    #[test]
    fn complexity_saturates() {
        assert_eq!(descriptor(&"x".repeat(100), 50).complexity, 1.0);
        assert_eq!(descriptor(&"x".repeat(25), 50).complexity, 0.5);
    }

    #[test]
    fn short_code_uses_whole_text() {
        let d = descriptor("ab", 10);
        assert!(d.diversity > 0.0 && d.diversity <= 1.0);
    }
}
