//! Domain types shared by every stage of the simulator: services, slots,
//! servers, bundles, packages and the scenario configuration.
//!
//! All monetary amounts are fixed-point [`Micro`] units (1e-6 of a currency
//! unit per vCPU per slot) and all capacities are integer vCPUs, so revenue
//! comparisons and conservation sums are exact on every platform.

use std::collections::BTreeMap;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Sub};
use std::str::FromStr;

use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("malformed identifier {0:?}")]
    BadIdentifier(String),
    #[error("package part for service {0} is not a contiguous run of slots")]
    NonContiguousRun(ServiceId),
    #[error("package part for service {0} has inconsistent quantities")]
    InconsistentQuantity(ServiceId),
    #[error("package contains bundles for more than one client")]
    MixedClients,
}

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident, $prefix:literal) => {
        $(#[$doc])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}{}", $prefix, self.0)
            }
        }

        impl FromStr for $name {
            type Err = ModelError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                s.strip_prefix($prefix)
                    .and_then(|rest| rest.parse::<u32>().ok())
                    .map($name)
                    .ok_or_else(|| ModelError::BadIdentifier(s.to_string()))
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
                ser.collect_str(self)
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
                let s = String::deserialize(de)?;
                s.parse().map_err(D::Error::custom)
            }
        }
    };
}

id_type!(
    /// A server inside a rack.
    ServerId,
    "s"
);
id_type!(
    /// A rack of homogeneous servers.
    RackId,
    "r"
);
id_type!(
    /// A coalition of servers jointly offering services.
    CoalitionId,
    "k"
);
id_type!(
    /// A client requesting reservations.
    ClientId,
    "c"
);
id_type!(
    /// A service type.
    ServiceId,
    "sv"
);

/// Fixed-point money: micro-units per vCPU per slot.
///
/// Integer arithmetic keeps winner selection and revenue sums exact; ties
/// never depend on floating-point rounding.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Micro(pub i64);

impl Micro {
    pub const ZERO: Micro = Micro(0);
    /// One whole currency unit.
    pub const UNIT: Micro = Micro(1_000_000);

    pub fn units(n: i64) -> Micro {
        Micro(n * 1_000_000)
    }

    /// Multiply by a non-negative quantity (vCPUs, slots).
    pub fn times(self, qty: u64) -> Micro {
        Micro(self.0 * qty as i64)
    }

    /// Fixed-point division, round half up. `div` must be positive.
    pub fn div_round_half_up(self, div: i64) -> Micro {
        assert!(div > 0, "division by non-positive quantity");
        if self.0 >= 0 {
            Micro((self.0 + div / 2) / div)
        } else {
            Micro(-((-self.0 + div / 2 - 1) / div + i64::from((-self.0) % div > div / 2)))
        }
    }

    pub fn as_f64_units(self) -> f64 {
        self.0 as f64 / 1e6
    }
}

impl Add for Micro {
    type Output = Micro;
    fn add(self, rhs: Micro) -> Micro {
        Micro(self.0 + rhs.0)
    }
}

impl AddAssign for Micro {
    fn add_assign(&mut self, rhs: Micro) {
        self.0 += rhs.0;
    }
}

impl Sub for Micro {
    type Output = Micro;
    fn sub(self, rhs: Micro) -> Micro {
        Micro(self.0 - rhs.0)
    }
}

impl Sum for Micro {
    fn sum<I: Iterator<Item = Micro>>(iter: I) -> Micro {
        Micro(iter.map(|m| m.0).sum())
    }
}

impl fmt::Display for Micro {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let abs = self.0.unsigned_abs();
        write!(f, "{}{}.{:06}", sign, abs / 1_000_000, abs % 1_000_000)
    }
}

/// Ordinal of an allocation slot within an auction window of `kappa` slots.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SlotIndex(pub u32);

impl fmt::Display for SlotIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A service type described by a small set of attributes. The first
/// attribute is always the vCPU count / coalition size.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceType {
    pub service_id: ServiceId,
    /// Ordered `(attribute_id, value_id)` pairs; attribute ids unique.
    pub attributes: Vec<(String, String)>,
}

impl ServiceType {
    pub fn validate(&self) -> Result<(), String> {
        if self.attributes.is_empty() {
            return Err(format!("service {} has no attributes", self.service_id));
        }
        let mut seen = std::collections::BTreeSet::new();
        for (attr, _) in &self.attributes {
            if !seen.insert(attr) {
                return Err(format!(
                    "service {} repeats attribute {attr:?}",
                    self.service_id
                ));
            }
        }
        Ok(())
    }
}

/// A server's report to its rack leader: availability plus the value and
/// participation history used to derive the coalition-size statistics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Server {
    pub server_id: ServerId,
    pub rack_id: RackId,
    /// Free for the upcoming window (no standing commitments).
    pub available: bool,
    /// Total value earned from successful coalitions, keyed by coalition size.
    pub value_history: BTreeMap<u32, Micro>,
    /// Per coalition size, one bit per slot of the history window: set when
    /// the server took part in a successful coalition of that size.
    pub participation: BTreeMap<u32, Vec<bool>>,
}

impl Server {
    pub fn new(server_id: ServerId, rack_id: RackId) -> Server {
        Server {
            server_id,
            rack_id,
            available: true,
            value_history: BTreeMap::new(),
            participation: BTreeMap::new(),
        }
    }

    /// Sum of values over all coalition sizes; the leader-election score.
    pub fn total_value(&self) -> Micro {
        self.value_history.values().copied().sum()
    }

    pub fn value_for_size(&self, size: u32) -> Micro {
        self.value_history.get(&size).copied().unwrap_or(Micro::ZERO)
    }
}

/// Quantity of one service requested in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Demand {
    pub service_id: ServiceId,
    pub vcpus: u32,
}

/// Services requested by one client in one slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReservationBundle {
    pub client_id: ClientId,
    pub slot: SlotIndex,
    pub demands: Vec<Demand>,
}

/// Quantity and ask price of one service offered in one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Offer {
    pub service_id: ServiceId,
    pub vcpus: u32,
    /// Ask per vCPU per slot; equals the coalition's consensus price.
    pub ask: Micro,
}

/// Services offered by one coalition in one slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvertisedBundle {
    pub coalition_id: CoalitionId,
    pub slot: SlotIndex,
    pub offers: Vec<Offer>,
}

/// A client's reservations across slots, one bundle per slot.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Package {
    pub client_id: ClientId,
    pub parts: Vec<ReservationBundle>,
}

/// One requested service over a contiguous run of slots, derived from the
/// per-slot bundles of a [`Package`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RequestedRun {
    pub client_id: ClientId,
    pub service_id: ServiceId,
    pub start: SlotIndex,
    pub length: u32,
    pub vcpus: u32,
}

impl RequestedRun {
    pub fn slots(&self) -> impl Iterator<Item = SlotIndex> {
        (self.start.0..self.start.0 + self.length).map(SlotIndex)
    }

    pub fn covers(&self, slot: SlotIndex) -> bool {
        slot.0 >= self.start.0 && slot.0 < self.start.0 + self.length
    }
}

impl Package {
    /// Group the per-slot demands by service and check that each service's
    /// slots form one contiguous run with a constant quantity.
    pub fn requested_runs(&self) -> Result<Vec<RequestedRun>, ModelError> {
        for part in &self.parts {
            if part.client_id != self.client_id {
                return Err(ModelError::MixedClients);
            }
        }
        let mut per_service: BTreeMap<ServiceId, Vec<(SlotIndex, u32)>> = BTreeMap::new();
        for part in &self.parts {
            for demand in &part.demands {
                per_service
                    .entry(demand.service_id)
                    .or_default()
                    .push((part.slot, demand.vcpus));
            }
        }
        let mut runs = Vec::with_capacity(per_service.len());
        for (service_id, mut slots) in per_service {
            slots.sort();
            let vcpus = slots[0].1;
            for (i, &(slot, q)) in slots.iter().enumerate() {
                if slot.0 != slots[0].0 .0 + i as u32 {
                    return Err(ModelError::NonContiguousRun(service_id));
                }
                if q != vcpus {
                    return Err(ModelError::InconsistentQuantity(service_id));
                }
            }
            runs.push(RequestedRun {
                client_id: self.client_id,
                service_id,
                start: slots[0].0,
                length: slots.len() as u32,
                vcpus,
            });
        }
        Ok(runs)
    }
}

/// Inclusive integer interval, serialized as a 2-element array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange(pub [u32; 2]);

impl IntRange {
    pub fn lo(&self) -> u32 {
        self.0[0]
    }

    pub fn hi(&self) -> u32 {
        self.0[1]
    }

    pub fn contains(&self, v: u32) -> bool {
        v >= self.lo() && v <= self.hi()
    }

    fn check(&self, name: &str, violations: &mut Vec<String>) {
        if self.lo() > self.hi() {
            violations.push(format!(
                "{name}: interval bounds inverted [{}, {}]",
                self.lo(),
                self.hi()
            ));
        }
    }
}

/// Inclusive fixed-point interval, serialized as a 2-element array of
/// micro-unit integers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MicroRange(pub [Micro; 2]);

impl MicroRange {
    pub fn lo(&self) -> Micro {
        self.0[0]
    }

    pub fn hi(&self) -> Micro {
        self.0[1]
    }

    fn check(&self, name: &str, violations: &mut Vec<String>) {
        if self.lo() > self.hi() {
            violations.push(format!(
                "{name}: interval bounds inverted [{}, {}]",
                self.lo(),
                self.hi()
            ));
        }
    }
}

fn default_coalitions() -> IntRange {
    IntRange([200, 250])
}
fn default_clients() -> IntRange {
    IntRange([200, 250])
}
fn default_services() -> IntRange {
    IntRange([10, 20])
}
fn default_bidders() -> IntRange {
    IntRange([0, 4])
}
fn default_offered_vcpus() -> IntRange {
    IntRange([60, 90])
}
fn default_services_per_coalition() -> IntRange {
    IntRange([1, 1])
}
fn default_run_lengths() -> IntRange {
    IntRange([1, 50])
}
fn default_services_per_package() -> IntRange {
    IntRange([1, 3])
}
fn default_requested_vcpus() -> IntRange {
    IntRange([60, 85])
}
fn default_kappa() -> u32 {
    50
}
fn default_increment() -> Micro {
    Micro::UNIT
}
fn default_price_cap() -> MicroRange {
    MicroRange([Micro::units(6), Micro::units(14)])
}
fn default_member_cost() -> MicroRange {
    MicroRange([Micro::UNIT, Micro(1_200_000)])
}
fn default_proposal_margin() -> MicroRange {
    MicroRange([Micro::ZERO, Micro(100_000)])
}
fn default_history_window() -> u32 {
    20
}
fn default_server_capacity() -> u32 {
    100
}
fn default_bootstrap_size() -> u32 {
    4
}

/// Simulation configuration: every sampled quantity as an inclusive range
/// plus the fixed auction parameters. Unknown JSON keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Number of coalitions offering services (sets the server population).
    #[serde(default = "default_coalitions")]
    pub coalitions: IntRange,
    /// Number of clients requesting reservations.
    #[serde(default = "default_clients")]
    pub clients: IntRange,
    /// Number of distinct service types.
    #[serde(default = "default_services")]
    pub services: IntRange,
    /// Clients bidding for one service in one slot.
    #[serde(default = "default_bidders")]
    pub bidders_per_service_slot: IntRange,
    /// Capacity offered for one service in one slot, in vCPUs.
    #[serde(default = "default_offered_vcpus")]
    pub offered_vcpus: IntRange,
    /// Distinct services advertised by one coalition.
    #[serde(default = "default_services_per_coalition")]
    pub services_per_coalition: IntRange,
    /// Consecutive slots a service is offered in.
    #[serde(default = "default_run_lengths")]
    pub offered_run_lengths: IntRange,
    /// Services in one requested package.
    #[serde(default = "default_services_per_package")]
    pub services_per_package: IntRange,
    /// Consecutive slots of a requested service.
    #[serde(default = "default_run_lengths")]
    pub requested_run_lengths: IntRange,
    /// Quantity requested for one service, in vCPUs.
    #[serde(default = "default_requested_vcpus")]
    pub requested_vcpus: IntRange,
    /// Slots per auction window (kappa).
    #[serde(default = "default_kappa")]
    pub slots_per_auction: u32,
    /// Clock price increment per tick.
    #[serde(default = "default_increment")]
    pub price_increment: Micro,
    /// A client's private price cap per requested service.
    #[serde(default = "default_price_cap")]
    pub client_price_cap: MicroRange,
    /// A server's internal cost per unit of service.
    #[serde(default = "default_member_cost")]
    pub member_cost: MicroRange,
    /// Margin above the cost floor a member proposes during consensus.
    #[serde(default = "default_proposal_margin")]
    pub proposal_margin: MicroRange,
    /// Sliding history window, in slots.
    #[serde(default = "default_history_window")]
    pub history_window: u32,
    /// Per-server vCPU capacity ceiling.
    #[serde(default = "default_server_capacity")]
    pub server_capacity: u32,
    /// Coalition size used when no usable history exists.
    #[serde(default = "default_bootstrap_size")]
    pub bootstrap_size: u32,
    /// Fraction of overbid cost charged back to the bidder; reported only.
    #[serde(default)]
    pub overbid_penalty_rate: f64,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            coalitions: default_coalitions(),
            clients: default_clients(),
            services: default_services(),
            bidders_per_service_slot: default_bidders(),
            offered_vcpus: default_offered_vcpus(),
            services_per_coalition: default_services_per_coalition(),
            offered_run_lengths: default_run_lengths(),
            services_per_package: default_services_per_package(),
            requested_run_lengths: default_run_lengths(),
            requested_vcpus: default_requested_vcpus(),
            slots_per_auction: default_kappa(),
            price_increment: default_increment(),
            client_price_cap: default_price_cap(),
            member_cost: default_member_cost(),
            proposal_margin: default_proposal_margin(),
            history_window: default_history_window(),
            server_capacity: default_server_capacity(),
            bootstrap_size: default_bootstrap_size(),
            overbid_penalty_rate: 0.0,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    /// Total validation: returns every violated invariant, never panics.
    pub fn validate(&self) -> Result<(), Vec<String>> {
        let mut violations = Vec::new();
        self.coalitions.check("coalitions", &mut violations);
        self.clients.check("clients", &mut violations);
        self.services.check("services", &mut violations);
        self.bidders_per_service_slot
            .check("bidders_per_service_slot", &mut violations);
        self.offered_vcpus.check("offered_vcpus", &mut violations);
        self.services_per_coalition
            .check("services_per_coalition", &mut violations);
        self.offered_run_lengths
            .check("offered_run_lengths", &mut violations);
        self.services_per_package
            .check("services_per_package", &mut violations);
        self.requested_run_lengths
            .check("requested_run_lengths", &mut violations);
        self.requested_vcpus.check("requested_vcpus", &mut violations);
        self.client_price_cap.check("client_price_cap", &mut violations);
        self.member_cost.check("member_cost", &mut violations);
        self.proposal_margin.check("proposal_margin", &mut violations);

        if self.slots_per_auction < 1 {
            violations.push("slots_per_auction: κ ≥ 1 violated".to_string());
        }
        if self.price_increment <= Micro::ZERO {
            violations.push("price_increment: I > 0 violated".to_string());
        }
        if self.services.lo() < 1 && self.services.lo() <= self.services.hi() {
            violations.push("services: at least one service type required".to_string());
        }
        if self.server_capacity < 1 {
            violations.push("server_capacity: must be positive".to_string());
        }
        if self.bootstrap_size < 1 {
            violations.push("bootstrap_size: must be positive".to_string());
        }
        if self.offered_vcpus.lo() <= self.offered_vcpus.hi()
            && self.offered_vcpus.hi() > self.server_capacity
        {
            violations.push(format!(
                "offered_vcpus: upper bound {} exceeds server capacity {}",
                self.offered_vcpus.hi(),
                self.server_capacity
            ));
        }
        for (name, range) in [
            ("offered_vcpus", &self.offered_vcpus),
            ("requested_vcpus", &self.requested_vcpus),
        ] {
            if range.lo() < 1 && range.lo() <= range.hi() {
                violations.push(format!("{name}: quantities are strictly positive"));
            }
        }
        if self.member_cost.lo() < Micro::ZERO {
            violations.push("member_cost: costs are non-negative".to_string());
        }
        if self.proposal_margin.lo() < Micro::ZERO {
            violations.push("proposal_margin: margins are non-negative".to_string());
        }
        for (name, range) in [
            ("offered_run_lengths", &self.offered_run_lengths),
            ("requested_run_lengths", &self.requested_run_lengths),
        ] {
            if range.lo() <= range.hi() {
                if range.lo() < 1 {
                    violations.push(format!("{name}: run lengths start at 1"));
                }
                if range.hi() > self.slots_per_auction && self.slots_per_auction >= 1 {
                    violations.push(format!(
                        "{name}: upper bound {} exceeds κ = {}",
                        range.hi(),
                        self.slots_per_auction
                    ));
                }
            }
        }
        if self.overbid_penalty_rate < 0.0 || !self.overbid_penalty_rate.is_finite() {
            violations.push("overbid_penalty_rate: must be a non-negative number".to_string());
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn id_display_and_parse() {
        assert_eq!(ServerId(12).to_string(), "s12");
        assert_eq!("s12".parse::<ServerId>().unwrap(), ServerId(12));
        assert_eq!("sv3".parse::<ServiceId>().unwrap(), ServiceId(3));
        assert!("x9".parse::<ClientId>().is_err());
        assert!("c".parse::<ClientId>().is_err());
    }

    #[test]
    fn micro_arithmetic() {
        assert_eq!(Micro::units(3).times(5), Micro::units(15));
        assert_eq!(Micro(7_000_000).div_round_half_up(5), Micro(1_400_000));
        assert_eq!(Micro(3).div_round_half_up(2), Micro(2)); // 1.5 -> 2
        assert_eq!(Micro(5).div_round_half_up(4), Micro(1)); // 1.25 -> 1
        assert_eq!(Micro::units(2).to_string(), "2.000000");
        assert_eq!(Micro(1_400_000).to_string(), "1.400000");
        assert_eq!(Micro(-1_500_000).to_string(), "-1.500000");
    }

    #[test]
    fn service_type_attribute_invariants() {
        let ok = ServiceType {
            service_id: ServiceId(1),
            attributes: vec![("vcpus".into(), "4".into()), ("arch".into(), "64-bit".into())],
        };
        assert!(ok.validate().is_ok());
        let empty = ServiceType { service_id: ServiceId(1), attributes: vec![] };
        assert!(empty.validate().is_err());
        let dup = ServiceType {
            service_id: ServiceId(1),
            attributes: vec![("vcpus".into(), "4".into()), ("vcpus".into(), "8".into())],
        };
        assert!(dup.validate().is_err());
    }

    #[test]
    fn package_runs_grouping() {
        let package = Package {
            client_id: ClientId(1),
            parts: vec![
                ReservationBundle {
                    client_id: ClientId(1),
                    slot: SlotIndex(3),
                    demands: vec![Demand { service_id: ServiceId(0), vcpus: 70 }],
                },
                ReservationBundle {
                    client_id: ClientId(1),
                    slot: SlotIndex(4),
                    demands: vec![Demand { service_id: ServiceId(0), vcpus: 70 }],
                },
            ],
        };
        let runs = package.requested_runs().unwrap();
        assert_eq!(
            runs,
            vec![RequestedRun {
                client_id: ClientId(1),
                service_id: ServiceId(0),
                start: SlotIndex(3),
                length: 2,
                vcpus: 70,
            }]
        );
    }

    #[test]
    fn package_rejects_gaps_and_mixed_quantities() {
        let gap = Package {
            client_id: ClientId(1),
            parts: vec![
                ReservationBundle {
                    client_id: ClientId(1),
                    slot: SlotIndex(0),
                    demands: vec![Demand { service_id: ServiceId(0), vcpus: 10 }],
                },
                ReservationBundle {
                    client_id: ClientId(1),
                    slot: SlotIndex(2),
                    demands: vec![Demand { service_id: ServiceId(0), vcpus: 10 }],
                },
            ],
        };
        assert!(matches!(gap.requested_runs(), Err(ModelError::NonContiguousRun(_))));

        let uneven = Package {
            client_id: ClientId(1),
            parts: vec![
                ReservationBundle {
                    client_id: ClientId(1),
                    slot: SlotIndex(0),
                    demands: vec![Demand { service_id: ServiceId(0), vcpus: 10 }],
                },
                ReservationBundle {
                    client_id: ClientId(1),
                    slot: SlotIndex(1),
                    demands: vec![Demand { service_id: ServiceId(0), vcpus: 20 }],
                },
            ],
        };
        assert!(matches!(uneven.requested_runs(), Err(ModelError::InconsistentQuantity(_))));
    }

    #[test]
    fn default_config_is_valid() {
        let config = ScenarioConfig::default();
        assert!(config.validate().is_ok());
    }

    #[test]
    fn kappa_zero_is_a_violation() {
        let config = ScenarioConfig { slots_per_auction: 0, ..ScenarioConfig::default() };
        let violations = config.validate().unwrap_err();
        assert!(violations.iter().any(|v| v.contains("κ ≥ 1")), "{violations:?}");
    }

    #[test]
    fn inverted_interval_is_a_violation() {
        let config = ScenarioConfig {
            offered_vcpus: IntRange([90, 60]),
            ..ScenarioConfig::default()
        };
        let violations = config.validate().unwrap_err();
        assert!(
            violations.iter().any(|v| v.contains("interval bounds inverted")),
            "{violations:?}"
        );
    }

    #[test]
    fn unknown_config_keys_rejected() {
        let json = r#"{"slots_per_auction": 50, "bogus_key": 1}"#;
        assert!(serde_json::from_str::<ScenarioConfig>(json).is_err());
    }

    #[test]
    fn zero_quantities_are_violations() {
        let config = ScenarioConfig {
            offered_vcpus: IntRange([0, 90]),
            ..ScenarioConfig::default()
        };
        let violations = config.validate().unwrap_err();
        assert!(violations.iter().any(|v| v.contains("strictly positive")));
    }

    #[test]
    fn server_json_round_trip() {
        let mut server = Server::new(ServerId(3), RackId(1));
        server.available = false;
        server.value_history.insert(4, Micro::units(12));
        server.participation.insert(4, vec![true, false, true]);
        let json = serde_json::to_string(&server).unwrap();
        let back: Server = serde_json::from_str(&json).unwrap();
        assert_eq!(server, back);
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let config: ScenarioConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(config, ScenarioConfig::default());
    }

    fn arb_config() -> impl Strategy<Value = ScenarioConfig> {
        (
            (0u32..300, 0u32..300),
            (1u32..60, 1i64..5_000_000),
            (0i64..8_000_000, 0i64..8_000_000),
            any::<u64>(),
        )
            .prop_map(|((a, b), (kappa, incr), (cap_lo, cost_lo), seed)| ScenarioConfig {
                coalitions: IntRange([a.min(b), a.max(b)]),
                clients: IntRange([a, b]),
                slots_per_auction: kappa,
                price_increment: Micro(incr),
                client_price_cap: MicroRange([Micro(cap_lo), Micro(cap_lo + 1_000_000)]),
                member_cost: MicroRange([Micro(cost_lo), Micro(cost_lo + 500_000)]),
                offered_run_lengths: IntRange([1, kappa]),
                requested_run_lengths: IntRange([1, kappa]),
                seed,
                ..ScenarioConfig::default()
            })
    }

    proptest! {
        #[test]
        fn config_json_round_trip(config in arb_config()) {
            let json = serde_json::to_string(&config).unwrap();
            let back: ScenarioConfig = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(config, back);
        }

        #[test]
        fn package_json_round_trip(
            client in 0u32..50,
            start in 0u32..40,
            len in 1u32..8,
            vcpus in 1u32..100,
        ) {
            let parts = (start..start + len)
                .map(|slot| ReservationBundle {
                    client_id: ClientId(client),
                    slot: SlotIndex(slot),
                    demands: vec![Demand { service_id: ServiceId(2), vcpus }],
                })
                .collect();
            let package = Package { client_id: ClientId(client), parts };
            let json = serde_json::to_string(&package).unwrap();
            let back: Package = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(&package, &back);
            prop_assert_eq!(back.requested_runs().unwrap().len(), 1);
        }
    }
}
