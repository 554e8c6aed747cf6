//! Stage A: derive coalition-size statistics from auction history, search
//! for the best feasible coalition structure over the available servers of a
//! rack, and assign servers to coalitions with a leader each.
//!
//! Servers in a rack are homogeneous, so structures are described purely by
//! counts: an entry `[n, m, v]` stands for `m` coalitions of `n` servers
//! whose history is worth `v`. A structure is feasible when the selected
//! entries cover the available servers exactly.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Micro, Server, ServerId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CoalitionError {
    #[error("k = {k} exceeds N = {n}")]
    DomainError { n: u32, k: u32 },
    #[error("server {0} reports a history window of {1} slots, expected {2}")]
    WindowMismatch(ServerId, usize, usize),
    #[error("no feasible coalition structure covers {0} servers")]
    Infeasible(u32),
    #[error("structure covers {structure} servers but {available} are available")]
    CoverageMismatch { structure: u32, available: u32 },
}

/// One history-derived triplet: `multiplicity` coalitions of `size` servers
/// with average value `value` per sale occurrence. Serializes as the
/// listing-style `[size, multiplicity, value]` array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "(u32, u32, Micro)", from = "(u32, u32, Micro)")]
pub struct PcsEntry {
    pub size: u32,
    pub multiplicity: u32,
    pub value: Micro,
}

impl From<PcsEntry> for (u32, u32, Micro) {
    fn from(e: PcsEntry) -> Self {
        (e.size, e.multiplicity, e.value)
    }
}

impl From<(u32, u32, Micro)> for PcsEntry {
    fn from((size, multiplicity, value): (u32, u32, Micro)) -> Self {
        PcsEntry { size, multiplicity, value }
    }
}

impl PcsEntry {
    /// Servers consumed when the entry is selected whole.
    pub fn servers(&self) -> u32 {
        self.size * self.multiplicity
    }
}

/// A selection of PCS entries covering the available servers exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoalitionStructure {
    /// Indices into the PCS list the structure was built from.
    pub indices: Vec<usize>,
    pub entries: Vec<PcsEntry>,
    pub total_value: Micro,
    pub servers_covered: u32,
}

impl CoalitionStructure {
    fn from_selection(list: &[PcsEntry], indices: Vec<usize>) -> CoalitionStructure {
        let entries: Vec<PcsEntry> = indices.iter().map(|&i| list[i]).collect();
        CoalitionStructure {
            total_value: entries.iter().map(|e| e.value).sum(),
            servers_covered: entries.iter().map(|e| e.servers()).sum(),
            indices,
            entries,
        }
    }

    /// Coalition sizes in assignment order, one element per coalition.
    pub fn coalition_sizes(&self) -> impl Iterator<Item = u32> + '_ {
        self.entries
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.size, e.multiplicity as usize))
    }
}

/// One formed coalition: its members and the elected leader.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoalitionSpec {
    pub members: Vec<ServerId>,
    pub leader: ServerId,
    pub size: u32,
}

/// Partition of the available servers into coalitions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoalitionAssignment {
    pub coalitions: Vec<CoalitionSpec>,
}

/// Number of partitions of `n` distinguishable agents into exactly `k`
/// non-empty coalitions, computed exactly.
pub fn stirling_second_kind(n: u32, k: u32) -> Result<BigUint, CoalitionError> {
    if k > n {
        return Err(CoalitionError::DomainError { n, k });
    }
    // S(i, j) = j * S(i-1, j) + S(i-1, j-1); row-by-row over j <= k.
    let width = k as usize + 1;
    let mut row = vec![BigUint::zero(); width];
    row[0] = BigUint::one();
    for i in 1..=n as usize {
        let mut next = vec![BigUint::zero(); width];
        for j in 1..=k.min(i as u32) as usize {
            next[j] = &row[j] * BigUint::from(j) + &row[j - 1];
        }
        row = next;
    }
    Ok(row[k as usize].clone())
}

/// Total number of partitions of `n` agents: the sum of the Stirling
/// numbers over all coalition counts.
pub fn bell_number(n: u32) -> BigUint {
    (0..=n)
        .map(|k| stirling_second_kind(n, k).expect("k <= n"))
        .sum()
}

/// Fold server reports into the available-server count and the PCS list.
///
/// `multiplicity` is the total number of set participation bits for the
/// size across all available servers; `value` is the total reported value
/// divided by the number of sale occurrences (set bits / size), rounded
/// half up. Entries whose value rounds to zero are dropped and the list is
/// ordered by size, then multiplicity.
pub fn aggregate_history(
    reports: &[Server],
) -> Result<(u32, Vec<PcsEntry>), CoalitionError> {
    let mut window: Option<usize> = None;
    for server in reports {
        for bits in server.participation.values() {
            match window {
                None => window = Some(bits.len()),
                Some(w) if w != bits.len() => {
                    return Err(CoalitionError::WindowMismatch(
                        server.server_id,
                        bits.len(),
                        w,
                    ))
                }
                Some(_) => {}
            }
        }
    }

    let available = reports.iter().filter(|s| s.available).count() as u32;
    let mut bits_per_size: BTreeMap<u32, u64> = BTreeMap::new();
    let mut value_per_size: BTreeMap<u32, Micro> = BTreeMap::new();
    for server in reports.iter().filter(|s| s.available) {
        for (&size, bits) in &server.participation {
            let set = bits.iter().filter(|&&b| b).count() as u64;
            if set > 0 {
                *bits_per_size.entry(size).or_insert(0) += set;
            }
        }
        for (&size, &value) in &server.value_history {
            *value_per_size.entry(size).or_insert(Micro::ZERO) += value;
        }
    }

    let mut list = Vec::new();
    for (&size, &bits) in &bits_per_size {
        let total = value_per_size.get(&size).copied().unwrap_or(Micro::ZERO);
        // One sale occurrence sets one bit on each of the coalition's
        // `size` members, so occurrences = bits / size.
        let occurrences = (bits / size as u64).max(1) as i64;
        let value = total.div_round_half_up(occurrences);
        if value > Micro::ZERO {
            list.push(PcsEntry { size, multiplicity: bits as u32, value });
        }
    }
    list.sort_by_key(|e| (e.size, e.multiplicity));
    Ok((available, list))
}

/// Result of a bounded feasibility enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibleSet {
    pub structures: Vec<CoalitionStructure>,
    /// Set when the enumeration stopped at the cap before exhausting the
    /// search space.
    pub truncated: bool,
}

/// Enumerate every subset of entries whose server counts sum to exactly
/// `available`. Complete up to `cap` structures; the independent oracle for
/// [`optimal_structure`].
pub fn enumerate_feasible(list: &[PcsEntry], available: u32, cap: usize) -> FeasibleSet {
    let mut out = FeasibleSet { structures: Vec::new(), truncated: false };
    let mut selection = Vec::new();
    fn recurse(
        list: &[PcsEntry],
        index: usize,
        remaining: u32,
        selection: &mut Vec<usize>,
        out: &mut FeasibleSet,
        cap: usize,
    ) {
        if out.truncated {
            return;
        }
        if remaining == 0 {
            if out.structures.len() >= cap {
                out.truncated = true;
                return;
            }
            out.structures.push(CoalitionStructure::from_selection(list, selection.clone()));
            return;
        }
        if index >= list.len() {
            return;
        }
        let servers = list[index].servers();
        if servers <= remaining && servers > 0 {
            selection.push(index);
            recurse(list, index + 1, remaining - servers, selection, out, cap);
            selection.pop();
        }
        recurse(list, index + 1, remaining, selection, out, cap);
    }
    recurse(list, 0, available, &mut selection, &mut out, cap);
    out
}

/// Search counters exposed so tests can bound the work instead of timing it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SearchStats {
    /// Distinct (entry index, remaining servers) cells evaluated.
    pub cells_visited: u64,
}

/// Highest-value feasible structure via exact dynamic programming over
/// (entry index, servers still to cover). Ties select the lexicographically
/// smallest index set, which the DP realizes by preferring inclusion.
pub fn optimal_structure(
    list: &[PcsEntry],
    available: u32,
) -> Result<CoalitionStructure, CoalitionError> {
    optimal_structure_with_stats(list, available).0
}

pub fn optimal_structure_with_stats(
    list: &[PcsEntry],
    available: u32,
) -> (Result<CoalitionStructure, CoalitionError>, SearchStats) {
    let mut stats = SearchStats::default();
    // memo[(index, remaining)] = best achievable value from here, or None
    // when no completion is feasible.
    let mut memo: BTreeMap<(usize, u32), Option<Micro>> = BTreeMap::new();

    fn best(
        list: &[PcsEntry],
        index: usize,
        remaining: u32,
        memo: &mut BTreeMap<(usize, u32), Option<Micro>>,
        stats: &mut SearchStats,
    ) -> Option<Micro> {
        if remaining == 0 {
            return Some(Micro::ZERO);
        }
        if index >= list.len() {
            return None;
        }
        if let Some(&cached) = memo.get(&(index, remaining)) {
            return cached;
        }
        stats.cells_visited += 1;
        let servers = list[index].servers();
        let take = if servers > 0 && servers <= remaining {
            best(list, index + 1, remaining - servers, memo, stats)
                .map(|v| v + list[index].value)
        } else {
            None
        };
        let skip = best(list, index + 1, remaining, memo, stats);
        let result = match (take, skip) {
            (Some(t), Some(s)) => Some(if t >= s { t } else { s }),
            (Some(t), None) => Some(t),
            (None, s) => s,
        };
        memo.insert((index, remaining), result);
        result
    }

    let total = match best(list, 0, available, &mut memo, &mut stats) {
        Some(v) => v,
        None => return (Err(CoalitionError::Infeasible(available)), stats),
    };

    // Reconstruct, preferring inclusion on value ties so the selected index
    // set is lexicographically smallest.
    let mut indices = Vec::new();
    let mut index = 0;
    let mut remaining = available;
    let mut value = total;
    while remaining > 0 {
        let servers = list[index].servers();
        let take = if servers > 0 && servers <= remaining {
            best(list, index + 1, remaining - servers, &mut memo, &mut stats)
                .map(|v| v + list[index].value)
        } else {
            None
        };
        if take == Some(value) {
            indices.push(index);
            value = value - list[index].value;
            remaining -= servers;
        }
        index += 1;
    }
    (Ok(CoalitionStructure::from_selection(list, indices)), stats)
}

/// Equal-size fallback used when history is empty or infeasible: coalitions
/// of `size` covering all available servers, remainder as singletons.
pub fn bootstrap_structure(available: u32, size: u32) -> CoalitionStructure {
    let size = size.max(1);
    let mut entries = Vec::new();
    let full = available / size;
    let remainder = available % size;
    if full > 0 {
        entries.push(PcsEntry { size, multiplicity: full, value: Micro::ZERO });
    }
    if remainder > 0 {
        entries.push(PcsEntry { size: 1, multiplicity: remainder, value: Micro::ZERO });
    }
    CoalitionStructure {
        indices: (0..entries.len()).collect(),
        total_value: Micro::ZERO,
        servers_covered: available,
        entries,
    }
}

/// Fill the structure's coalitions with the available servers and elect each
/// coalition's leader.
///
/// For every selected entry, the still-unassigned servers are ranked by
/// their value for that coalition size (ties by lowest id) and taken in rank
/// order. The leader is the member with the largest total value over all
/// sizes, ties again by lowest id.
pub fn assign_and_elect(
    structure: &CoalitionStructure,
    servers: &[Server],
) -> Result<CoalitionAssignment, CoalitionError> {
    let available: Vec<&Server> = servers.iter().filter(|s| s.available).collect();
    if structure.servers_covered != available.len() as u32 {
        return Err(CoalitionError::CoverageMismatch {
            structure: structure.servers_covered,
            available: available.len() as u32,
        });
    }

    let mut unassigned: Vec<&Server> = available;
    let mut coalitions = Vec::new();
    for entry in &structure.entries {
        unassigned.sort_by(|a, b| {
            b.value_for_size(entry.size)
                .cmp(&a.value_for_size(entry.size))
                .then(a.server_id.cmp(&b.server_id))
        });
        for _ in 0..entry.multiplicity {
            let members: Vec<&Server> = unassigned.drain(..entry.size as usize).collect();
            let leader = members
                .iter()
                .max_by(|a, b| {
                    a.total_value()
                        .cmp(&b.total_value())
                        .then(b.server_id.cmp(&a.server_id))
                })
                .expect("coalition sizes are positive")
                .server_id;
            coalitions.push(CoalitionSpec {
                members: members.iter().map(|s| s.server_id).collect(),
                leader,
                size: entry.size,
            });
        }
    }
    Ok(CoalitionAssignment { coalitions })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RackId;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn entry(size: u32, multiplicity: u32, units: i64) -> PcsEntry {
        PcsEntry { size, multiplicity, value: Micro::units(units) }
    }

    #[test]
    fn stirling_small_tables() {
        let row = |n: u32| -> Vec<u64> {
            (1..=n)
                .map(|k| {
                    stirling_second_kind(n, k)
                        .unwrap()
                        .try_into()
                        .expect("fits u64")
                })
                .collect()
        };
        assert_eq!(row(4), vec![1, 7, 6, 1]);
        assert_eq!(row(5), vec![1, 15, 25, 10, 1]);
        assert_eq!(row(6), vec![1, 31, 90, 65, 15, 1]);
        for n in 1..=20 {
            assert_eq!(stirling_second_kind(n, 1).unwrap(), BigUint::one());
        }
        assert_eq!(stirling_second_kind(5, 3).unwrap(), BigUint::from(25u32));
    }

    #[test]
    fn stirling_domain_error() {
        assert_eq!(
            stirling_second_kind(3, 4),
            Err(CoalitionError::DomainError { n: 3, k: 4 })
        );
    }

    #[test]
    fn stirling_40_14_exact() {
        // Exact value; cross-checked against the inclusion-exclusion formula
        // in the acceptance suite.
        let v = stirling_second_kind(40, 14).unwrap();
        assert_eq!(v.to_string(), "35859872255621803491428539542239680");
    }

    #[test]
    fn bell_numbers() {
        assert_eq!(bell_number(0), BigUint::one());
        assert_eq!(bell_number(4), BigUint::from(15u32)); // 1+7+6+1
        assert_eq!(bell_number(6), BigUint::from(203u32)); // 1+31+90+65+15+1
        assert_eq!(bell_number(8), BigUint::from(4140u32));
    }

    #[test]
    fn bell_is_sum_of_stirling() {
        for n in 0..=25u32 {
            let sum: BigUint = (0..=n)
                .map(|k| stirling_second_kind(n, k).unwrap())
                .sum();
            assert_eq!(sum, bell_number(n), "n = {n}");
        }
    }

    fn server_with(
        id: u32,
        available: bool,
        history: &[(u32, i64, Vec<bool>)],
    ) -> Server {
        let mut server = Server::new(ServerId(id), RackId(0));
        server.available = available;
        for (size, units, bits) in history {
            server.value_history.insert(*size, Micro::units(*units));
            server.participation.insert(*size, bits.clone());
        }
        server
    }

    #[test]
    fn aggregate_empty_when_nobody_available() {
        let servers = vec![
            server_with(0, false, &[(2, 10, vec![true, false])]),
            server_with(1, false, &[]),
        ];
        let (available, list) = aggregate_history(&servers).unwrap();
        assert_eq!(available, 0);
        assert!(list.is_empty());
    }

    #[test]
    fn aggregate_counts_set_bits() {
        let bits = vec![true, true, false, true];
        let servers = vec![
            server_with(0, true, &[(1, 6, bits.clone())]),
            server_with(1, true, &[(1, 3, bits)]),
        ];
        let (available, list) = aggregate_history(&servers).unwrap();
        assert_eq!(available, 2);
        assert_eq!(list.len(), 1);
        assert_eq!(list[0].size, 1);
        assert_eq!(list[0].multiplicity, 6);
        // 6 occurrences of size-1 coalitions worth 9 units in total.
        assert_eq!(list[0].value, Micro(1_500_000));
    }

    #[test]
    fn aggregate_value_matches_hand_sum() {
        // Two servers in one size-3 coalition that sold in two slots:
        // each member logs two set bits, so occurrences = 6 bits / 3.
        let bits = vec![true, true, false, false];
        let servers = vec![
            server_with(0, true, &[(3, 500, bits.clone())]),
            server_with(1, true, &[(3, 312, bits.clone())]),
            server_with(2, true, &[(3, 0, bits)]),
            server_with(3, true, &[]),
        ];
        let (available, list) = aggregate_history(&servers).unwrap();
        assert_eq!(available, 4);
        assert_eq!(list.len(), 1);
        let entry = &list[0];
        assert_eq!((entry.size, entry.multiplicity), (3, 6));
        // Hand sum: (500 + 312 + 0) units over 6/3 = 2 occurrences.
        assert_eq!(entry.value, Micro::units(812).div_round_half_up(2));
    }

    #[test]
    fn aggregate_rejects_window_mismatch() {
        let servers = vec![
            server_with(0, true, &[(1, 5, vec![true, false])]),
            server_with(1, true, &[(1, 5, vec![true])]),
        ];
        assert!(matches!(
            aggregate_history(&servers),
            Err(CoalitionError::WindowMismatch(..))
        ));
    }

    #[test]
    fn aggregate_drops_zero_value_sizes() {
        let servers = vec![server_with(0, true, &[(2, 0, vec![true, true])])];
        let (_, list) = aggregate_history(&servers).unwrap();
        assert!(list.is_empty());
    }

    #[test]
    fn pcs_list_serializes_as_triplet_arrays() {
        let list = vec![entry(1, 4, 35), entry(2, 3, 78)];
        let json = serde_json::to_string(&list).unwrap();
        assert_eq!(json, "[[1,4,35000000],[2,3,78000000]]");
        let back: Vec<PcsEntry> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, list);
    }

    // The worked sixteen-server example: g alone covers all sixteen, while
    // a+c+d combine 1*4 + 2*3 + 3*2 = 16.
    fn sixteen_server_list() -> Vec<PcsEntry> {
        vec![
            entry(1, 4, 35),   // a
            entry(1, 15, 682), // b
            entry(2, 3, 78),   // c
            entry(3, 2, 502),  // d
            entry(3, 4, 812),  // e
            entry(16, 1, 751), // f (sixteen servers, worth 751)
            entry(16, 2, 740), // g'
        ]
    }

    #[test]
    fn enumerate_finds_known_structures() {
        let list = sixteen_server_list();
        let result = enumerate_feasible(&list, 16, 10_000);
        assert!(!result.truncated);
        let values: Vec<(Vec<usize>, Micro)> = result
            .structures
            .iter()
            .map(|s| (s.indices.clone(), s.total_value))
            .collect();
        // {f} alone.
        assert!(values.contains(&(vec![5], Micro::units(751))));
        // {a, c, d} = 35 + 78 + 502.
        assert!(values.contains(&(vec![0, 2, 3], Micro::units(615))));
        // {a, e} = 1*4 + 3*4 = 16 servers, 35 + 812.
        assert!(values.contains(&(vec![0, 4], Micro::units(847))));
        // {a, b} would need 4 + 15 = 19 servers: infeasible.
        assert!(!values.iter().any(|(idx, _)| idx == &vec![0, 1]));
        for s in &result.structures {
            assert_eq!(s.servers_covered, 16);
        }
    }

    #[test]
    fn enumerate_empty_list() {
        let result = enumerate_feasible(&[], 0, 100);
        assert_eq!(result.structures.len(), 1);
        assert_eq!(result.structures[0].total_value, Micro::ZERO);
        assert!(result.structures[0].indices.is_empty());

        let none = enumerate_feasible(&[], 5, 100);
        assert!(none.structures.is_empty());
    }

    #[test]
    fn enumerate_two_entry_cover() {
        let list = vec![entry(2, 2, 100), entry(4, 3, 300)];
        let result = enumerate_feasible(&list, 16, 100);
        assert_eq!(result.structures.len(), 1);
        assert_eq!(result.structures[0].indices, vec![0, 1]);
        assert_eq!(result.structures[0].total_value, Micro::units(400));
    }

    #[test]
    fn enumerate_respects_cap() {
        // Ten singleton entries, N = 0 would give 1 structure; use entries
        // that all fit to explode the count.
        let list: Vec<PcsEntry> = (0..10).map(|_| entry(1, 1, 1)).collect();
        let result = enumerate_feasible(&list, 5, 10);
        assert!(result.truncated);
        assert_eq!(result.structures.len(), 10);
    }

    #[test]
    fn optimal_picks_largest_value() {
        let list = sixteen_server_list();
        let best = optimal_structure(&list, 16).unwrap();
        // {a, e} at 847 beats {f} at 751 and {a, c, d} at 615.
        assert_eq!(best.indices, vec![0, 4]);
        assert_eq!(best.total_value, Micro::units(847));
    }

    #[test]
    fn optimal_single_choice() {
        let list = vec![entry(4, 2, 10)];
        let best = optimal_structure(&list, 8).unwrap();
        assert_eq!(best.indices, vec![0]);
    }

    #[test]
    fn optimal_reports_infeasible() {
        let list = vec![entry(3, 1, 10)];
        assert_eq!(
            optimal_structure(&list, 5),
            Err(CoalitionError::Infeasible(5))
        );
        assert_eq!(optimal_structure(&[], 1), Err(CoalitionError::Infeasible(1)));
    }

    #[test]
    fn optimal_tie_break_prefers_earlier_indices() {
        let list = vec![entry(2, 1, 5), entry(1, 2, 5), entry(2, 1, 5)];
        // {0} and {2} both cover 2 servers at value 5, as does {1}.
        let best = optimal_structure(&list, 2).unwrap();
        assert_eq!(best.indices, vec![0]);
    }

    #[test]
    fn optimal_matches_enumeration_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..100 {
            let len = rng.gen_range(0..=12);
            let list: Vec<PcsEntry> = (0..len)
                .map(|_| PcsEntry {
                    size: rng.gen_range(1..=8),
                    multiplicity: rng.gen_range(1..=4),
                    value: Micro::units(rng.gen_range(1..=500)),
                })
                .collect();
            let available = rng.gen_range(0..=48);
            let oracle = enumerate_feasible(&list, available, 1_000_000);
            assert!(!oracle.truncated);
            match optimal_structure(&list, available) {
                Ok(best) => {
                    let max = oracle
                        .structures
                        .iter()
                        .map(|s| s.total_value)
                        .max()
                        .expect("feasible set non-empty when optimal succeeds");
                    assert_eq!(best.total_value, max);
                    assert_eq!(best.servers_covered, available);
                }
                Err(CoalitionError::Infeasible(_)) => {
                    assert!(oracle.structures.is_empty());
                }
                Err(other) => panic!("unexpected error {other:?}"),
            }
        }
    }

    #[test]
    fn dp_work_is_bounded_by_list_times_servers() {
        let list: Vec<PcsEntry> = (1..=40)
            .map(|size| PcsEntry { size, multiplicity: 1, value: Micro::units(size as i64) })
            .collect();
        let (result, stats) = optimal_structure_with_stats(&list, 40);
        assert!(result.is_ok());
        let bound = (list.len() as u64) * 41;
        assert!(
            stats.cells_visited <= bound,
            "visited {} cells, bound {bound}",
            stats.cells_visited
        );
    }

    #[test]
    fn bootstrap_covers_everyone() {
        let structure = bootstrap_structure(48, 4);
        assert_eq!(structure.servers_covered, 48);
        assert_eq!(structure.entries.len(), 1);
        assert_eq!(structure.entries[0].multiplicity, 12);

        let ragged = bootstrap_structure(10, 4);
        assert_eq!(ragged.servers_covered, 10);
        assert_eq!(ragged.entries[0], PcsEntry { size: 4, multiplicity: 2, value: Micro::ZERO });
        assert_eq!(ragged.entries[1], PcsEntry { size: 1, multiplicity: 2, value: Micro::ZERO });
    }

    #[test]
    fn assign_single_coalition_elects_best_total() {
        let servers = vec![
            server_with(0, true, &[(3, 5, vec![true])]),
            server_with(1, true, &[(3, 9, vec![true])]),
            server_with(2, true, &[(3, 7, vec![true])]),
        ];
        let structure = CoalitionStructure {
            indices: vec![0],
            entries: vec![entry(3, 1, 21)],
            total_value: Micro::units(21),
            servers_covered: 3,
        };
        let assignment = assign_and_elect(&structure, &servers).unwrap();
        assert_eq!(assignment.coalitions.len(), 1);
        let coalition = &assignment.coalitions[0];
        assert_eq!(coalition.size, 3);
        assert_eq!(coalition.leader, ServerId(1));
        let mut members = coalition.members.clone();
        members.sort();
        assert_eq!(members, vec![ServerId(0), ServerId(1), ServerId(2)]);
    }

    #[test]
    fn assign_ranks_by_size_value() {
        let servers = vec![
            server_with(0, true, &[(2, 9, vec![true])]),
            server_with(1, true, &[(2, 5, vec![true])]),
            server_with(2, true, &[(2, 7, vec![true])]),
            server_with(3, true, &[(2, 7, vec![true])]),
        ];
        let structure = CoalitionStructure {
            indices: vec![0],
            entries: vec![entry(2, 2, 1)],
            total_value: Micro::units(1),
            servers_covered: 4,
        };
        let assignment = assign_and_elect(&structure, &servers).unwrap();
        assert_eq!(assignment.coalitions.len(), 2);
        // Top pair: values 9 and 7 (lowest id between the tied 7s).
        assert_eq!(assignment.coalitions[0].members, vec![ServerId(0), ServerId(2)]);
        assert_eq!(assignment.coalitions[1].members, vec![ServerId(3), ServerId(1)]);

        // Oracle: no pairing has a higher summed rank weight than taking the
        // two best-valued servers first.
        let ranks: Vec<i64> = vec![9, 5, 7, 7];
        let chosen: i64 = assignment.coalitions[0]
            .members
            .iter()
            .map(|m| ranks[m.0 as usize])
            .sum();
        for a in 0..4 {
            for b in (a + 1)..4 {
                assert!(ranks[a] + ranks[b] <= chosen);
            }
        }
    }

    #[test]
    fn leader_tie_goes_to_lower_id() {
        let servers = vec![
            server_with(4, true, &[(2, 6, vec![true])]),
            server_with(2, true, &[(2, 6, vec![true])]),
        ];
        let structure = CoalitionStructure {
            indices: vec![0],
            entries: vec![entry(2, 1, 1)],
            total_value: Micro::units(1),
            servers_covered: 2,
        };
        let assignment = assign_and_elect(&structure, &servers).unwrap();
        assert_eq!(assignment.coalitions[0].leader, ServerId(2));
    }

    #[test]
    fn assign_rejects_coverage_mismatch() {
        let servers = vec![server_with(0, true, &[])];
        let structure = CoalitionStructure {
            indices: vec![0],
            entries: vec![entry(2, 1, 1)],
            total_value: Micro::units(1),
            servers_covered: 2,
        };
        assert!(matches!(
            assign_and_elect(&structure, &servers),
            Err(CoalitionError::CoverageMismatch { .. })
        ));
    }

    proptest! {
        #[test]
        fn every_feasible_structure_covers_exactly(
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let len = rng.gen_range(0..=8);
            let list: Vec<PcsEntry> = (0..len)
                .map(|_| PcsEntry {
                    size: rng.gen_range(1..=6),
                    multiplicity: rng.gen_range(1..=3),
                    value: Micro::units(rng.gen_range(1..=100)),
                })
                .collect();
            let available = rng.gen_range(0..=24);
            let result = enumerate_feasible(&list, available, 100_000);
            for s in &result.structures {
                let sum: u32 = s.entries.iter().map(|e| e.servers()).sum();
                prop_assert_eq!(sum, available);
                let value: Micro = s.entries.iter().map(|e| e.value).sum();
                prop_assert_eq!(value, s.total_value);
            }
        }

        #[test]
        fn assignment_partitions_available_servers(seed in any::<u64>()) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..=24u32);
            let servers: Vec<Server> = (0..n)
                .map(|i| {
                    let mut s = Server::new(ServerId(i), RackId(0));
                    s.value_history.insert(2, Micro::units(rng.gen_range(0..50)));
                    s
                })
                .collect();
            let structure = bootstrap_structure(n, rng.gen_range(1..=5));
            let assignment = assign_and_elect(&structure, &servers).unwrap();
            let mut seen: Vec<ServerId> = assignment
                .coalitions
                .iter()
                .flat_map(|c| c.members.iter().copied())
                .collect();
            seen.sort();
            let mut expected: Vec<ServerId> =
                servers.iter().map(|s| s.server_id).collect();
            expected.sort();
            prop_assert_eq!(seen, expected);
            for c in &assignment.coalitions {
                prop_assert!(c.members.contains(&c.leader));
                prop_assert_eq!(c.members.len() as u32, c.size);
            }
        }
    }
}
