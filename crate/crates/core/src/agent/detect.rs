use crate::control::ShedConditionTable;
use crate::sfr::FrequencySample;

/// True iff the last `consecutive` successive differences are strictly negative.
pub fn detect_event<'a, I>(recent: I, consecutive: usize) -> bool
where
    I: IntoIterator<Item = &'a FrequencySample>,
    I::IntoIter: DoubleEndedIterator,
{
    let mut it = recent.into_iter().rev();
    let Some(mut later) = it.next() else { return false };
    let mut drops = 0;
    for earlier in it {
        if later.f < earlier.f {
            drops += 1;
            if drops == consecutive {
                return true;
            }
        } else {
            return false;
        }
        later = earlier;
    }
    false
}

/// One step of the condition count: returns the new hit count and whether
/// it exceeds `n_required`.
pub fn check_condition(
    table: &ShedConditionTable,
    f_hz: f64,
    rocof_hz_per_s: f64,
    hits: usize,
    n_required: usize,
) -> (usize, bool) {
    let hits = hits + usize::from(table.is_satisfied(f_hz, rocof_hz_per_s));
    (hits, hits > n_required)
}

/// Counts condition hits over a fixed number of post-onset samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConditionChecker {
    pub window: usize,
    pub n_required: usize,
    pub seen: usize,
    pub hits: usize,
}

impl ConditionChecker {
    pub fn new(window: usize, n_required: usize) -> Self {
        Self { window, n_required, seen: 0, hits: 0 }
    }

    /// Samples without a ROCOF figure count toward the window but never hit.
    pub fn observe(&mut self, table: &ShedConditionTable, f_hz: f64, rocof: Option<f64>) {
        if self.is_complete() {
            return;
        }
        self.seen += 1;
        if let Some(r) = rocof {
            self.hits = check_condition(table, f_hz, r, self.hits, self.n_required).0;
        }
    }

    pub fn is_complete(&self) -> bool {
        self.seen >= self.window
    }

    pub fn shed_needed(&self) -> bool {
        self.hits > self.n_required
    }
}
