use serde::{Deserialize, Serialize};

use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::model::SelfReducible;
use crate::oracle::{Count, ExactCounter};

/// Every bit string of length `n` is a solution.
#[derive(Debug, Clone, Copy, Default)]
pub struct AllBits;

/// `free` remaining positions; `dead` marks a reduction by a prefix longer
/// than the instance, whose solution set is empty.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AllBitsInstance {
    pub free: usize,
    pub dead: bool,
}

impl AllBitsInstance {
    pub fn new(n: usize) -> Self {
        Self {
            free: n,
            dead: false,
        }
    }
}

impl SelfReducible for AllBits {
    type Instance = AllBitsInstance;

    fn name(&self) -> &'static str {
        "all-bitstrings"
    }

    fn solution_length(&self, x: &AllBitsInstance) -> usize {
        if x.dead {
            0
        } else {
            x.free
        }
    }

    fn reduce(&self, x: &AllBitsInstance, prefix: &BitString) -> AllBitsInstance {
        if x.dead || prefix.len() > x.free {
            AllBitsInstance {
                free: 0,
                dead: true,
            }
        } else {
            AllBitsInstance::new(x.free - prefix.len())
        }
    }

    fn reduce_bit(&self, x: &AllBitsInstance, _bit: bool) -> AllBitsInstance {
        if x.dead || x.free == 0 {
            AllBitsInstance {
                free: 0,
                dead: true,
            }
        } else {
            AllBitsInstance::new(x.free - 1)
        }
    }

    fn accepts_empty(&self, x: &AllBitsInstance) -> bool {
        !x.dead && x.free == 0
    }

    fn is_solution(&self, x: &AllBitsInstance, w: &BitString) -> bool {
        !x.dead && w.len() == x.free
    }

    fn encoded_size(&self, _x: &AllBitsInstance) -> usize {
        1
    }
}

/// Closed form `2^free`.
#[derive(Debug, Clone, Copy, Default)]
pub struct AllBitsCounter;

impl ExactCounter<AllBitsInstance> for AllBitsCounter {
    fn count(&self, x: &AllBitsInstance) -> Result<Count> {
        if x.dead {
            return Ok(0);
        }
        if x.free >= 128 {
            return Err(Error::BudgetExceeded {
                what: "all-bitstrings count",
                needed: u128::MAX,
                limit: u128::MAX,
            });
        }
        Ok(1u128 << x.free)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_count_of_reductions() {
        let x = AllBitsInstance::new(6);
        for len in 0..=6usize {
            let w = BitString::from_index(0, len);
            let r = AllBits.reduce(&x, &w);
            assert_eq!(AllBitsCounter.count(&r).unwrap(), 1u128 << (6 - len));
        }
        let too_long = BitString::from_index(0, 7);
        assert_eq!(AllBitsCounter.count(&AllBits.reduce(&x, &too_long)).unwrap(), 0);
    }
}
