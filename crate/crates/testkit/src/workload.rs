//! Randomized rental workloads.

use rand::Rng;
use rentchain_core::{Address, Payload};

use crate::oracle::{replay_log, Event, LeaseView};
use crate::{plate, LICENSE};

#[derive(Debug, Clone, Copy)]
pub struct WorkloadParams {
    pub vehicles: usize,
    pub clients: usize,
    pub days: u64,
    /// Non-tick actions attempted between consecutive day ticks, at most.
    pub actions_per_day: usize,
    pub max_amount: u64,
}

/// A sender index (into the client list) and the action it attempts.
#[derive(Debug, Clone)]
pub struct Step {
    pub client: Option<usize>,
    pub payload: Payload,
}

pub fn random_schedule<R: Rng>(rng: &mut R, p: WorkloadParams) -> Vec<Step> {
    let mut steps = Vec::new();
    for _ in 0..p.days {
        for _ in 0..rng.gen_range(0..=p.actions_per_day) {
            let client = rng.gen_range(0..p.clients);
            let vehicle_id = plate(rng.gen_range(0..p.vehicles));
            let payload = match rng.gen_range(0..10) {
                0..=3 => Payload::RentCar {
                    vehicle_id,
                    license_id: LICENSE.into(),
                    deposit: rng.gen_range(0..=p.max_amount),
                },
                4..=6 => Payload::AddFunds {
                    vehicle_id,
                    amount: rng.gen_range(0..=p.max_amount),
                },
                _ => Payload::ReturnCar { vehicle_id },
            };
            steps.push(Step {
                client: Some(client),
                payload,
            });
        }
        steps.push(Step {
            client: None,
            payload: Payload::AdvanceDay {},
        });
    }
    steps
}

/// Oracle event for a contract step; `None` for admin ticks resolves to `Day`.
pub fn to_event(step: &Step, clients: &[Address]) -> Event {
    match (&step.payload, step.client) {
        (Payload::AdvanceDay {}, _) => Event::Day,
        (
            Payload::RentCar {
                vehicle_id, deposit, ..
            },
            Some(c),
        ) => Event::Rent {
            vehicle: vehicle_id.clone(),
            client: clients[c],
            deposit: *deposit,
        },
        (Payload::AddFunds { vehicle_id, amount }, Some(c)) => Event::Fund {
            vehicle: vehicle_id.clone(),
            client: clients[c],
            amount: *amount,
        },
        (Payload::ReturnCar { vehicle_id }, Some(c)) => Event::Return {
            vehicle: vehicle_id.clone(),
            client: clients[c],
        },
        (other, _) => panic!("no oracle event for {other:?}"),
    }
}

/// Drives the contract engine through signed transactions.
pub struct Harness {
    pub actors: crate::Actors,
    pub state: rentchain_core::WorldState,
    pub prices: std::collections::BTreeMap<String, u64>,
    pub height: u64,
}

impl Harness {
    /// A registry with one license and `prices.len()` vehicles.
    pub fn new(n_clients: usize, client_balance: u64, surcharge_fee: u64, prices: &[u64]) -> Self {
        let actors = crate::Actors::new(n_clients);
        let genesis = actors.genesis(client_balance, surcharge_fee);
        let mut h = Harness {
            state: rentchain_core::WorldState::from_genesis(&genesis),
            actors,
            prices: prices.iter().enumerate().map(|(i, p)| (plate(i), *p)).collect(),
            height: 1,
        };
        let admin = h.actors.admin.clone();
        let owner = h.actors.owner.clone();
        h.submit(
            &admin,
            Payload::AddLicense {
                license_id: LICENSE.into(),
            },
        )
        .expect("license");
        for (id, price) in h.prices.clone() {
            h.submit(
                &owner,
                Payload::AddVehicle {
                    vehicle_id: id,
                    daily_price: price,
                },
            )
            .expect("vehicle");
        }
        h
    }

    pub fn client_addresses(&self) -> Vec<Address> {
        self.actors.clients.iter().map(|k| k.address()).collect()
    }

    pub fn submit(&mut self, key: &rentchain_core::KeyPair, payload: Payload) -> Result<(), rentchain_core::TxError> {
        let nonce = self.state.account(&key.address()).nonce + 1;
        let tx = rentchain_core::Transaction::signed(key, nonce, payload);
        self.height += 1;
        self.state.apply_transaction(&tx, self.height)
    }

    pub fn run_step(&mut self, step: &Step) -> Result<(), rentchain_core::TxError> {
        let key = match step.client {
            Some(c) => self.actors.clients[c].clone(),
            None => self.actors.admin.clone(),
        };
        self.submit(&key, step.payload.clone())
    }
}

/// Engine lease table in the shape the oracle reports.
pub fn lease_views(state: &rentchain_core::WorldState) -> std::collections::BTreeMap<String, LeaseView> {
    state
        .contract
        .agreements
        .iter()
        .map(|(v, a)| {
            let view = LeaseView {
                client: a.client,
                deposit: a.deposit,
                charges: a.charges,
                accrued_revenue: a.accrued_revenue,
                days_elapsed: a.days_elapsed,
            };
            (v.clone(), view)
        })
        .collect()
}

/// What to compare after every step of [`run_checked`].
#[derive(Debug, Clone, Copy)]
pub struct Checks {
    /// Replay the whole log through the brute-force oracle and demand an exact match.
    pub oracle: bool,
}

/// Runs a random schedule and checks, after every transaction, that total
/// supply is unchanged, the escrow account backs every live lease, rejected
/// steps leave the state untouched and (optionally) the oracle agrees.
/// Returns the number of accepted steps.
pub fn run_checked<R: Rng>(
    rng: &mut R,
    params: WorkloadParams,
    prices: &[u64],
    fee: u64,
    client_balance: u64,
    checks: Checks,
) -> Result<usize, String> {
    let steps = random_schedule(rng, params);
    let mut h = Harness::new(params.clients, client_balance, fee, prices);
    let clients = h.client_addresses();
    let owner = h.actors.owner.address();
    let initial: std::collections::BTreeMap<_, _> =
        h.state.accounts.iter().map(|(a, acct)| (*a, acct.balance)).collect();
    let supply = h.state.total_supply();
    let mut log = Vec::new();
    let mut accepted = 0;
    for (i, step) in steps.iter().enumerate() {
        let before = h.state.clone();
        let result = h.run_step(step);
        accepted += usize::from(result.is_ok());
        if result.is_err() && h.state != before {
            return Err(format!("step {i}: rejected {step:?} mutated state"));
        }
        if h.state.total_supply() != supply {
            return Err(format!("step {i}: supply {} != {supply}", h.state.total_supply()));
        }
        if !h.state.escrow_backed() {
            return Err(format!("step {i}: escrow balance does not back live leases"));
        }
        if !checks.oracle {
            continue;
        }
        log.push(to_event(step, &clients));
        let expected = replay_log(&log, &h.prices, owner, fee, &initial);
        if result.is_ok() != *expected.accepted.last().expect("one entry per event") {
            return Err(format!("step {i}: engine {result:?} but oracle disagrees on {step:?}"));
        }
        if lease_views(&h.state) != expected.leases {
            return Err(format!("step {i}: leases differ from oracle"));
        }
        if h.state.contract.current_day != expected.day {
            return Err(format!(
                "step {i}: day {} != {}",
                h.state.contract.current_day, expected.day
            ));
        }
        for (addr, bal) in &expected.balances {
            if i128::from(h.state.balance(addr)) != *bal {
                return Err(format!(
                    "step {i}: balance of {addr} is {} not {bal}",
                    h.state.balance(addr)
                ));
            }
        }
    }
    Ok(accepted)
}

#[derive(Debug, Default)]
pub struct GuardReport {
    pub states: usize,
    pub transitions: usize,
    pub returns_ok: usize,
    pub returns_blocked: usize,
    pub violations: Vec<String>,
}

/// Breadth-first search over every reachable state of one vehicle (price 2,
/// surcharge 1) shared by `n_clients` clients, up to `days` ticks. Each client
/// may rent with a deposit of 2 or 4, fund 1 or 3, or return, in any order.
pub fn exhaust_guards(n_clients: usize, days: u64, client_balance: u64) -> GuardReport {
    use rentchain_core::codec::Encode;
    use rentchain_core::{ContractError, VehicleStatus, WorldState};
    use std::collections::{HashSet, VecDeque};

    let h = Harness::new(n_clients, client_balance, 1, &[2]);
    let clients = h.client_addresses();
    let admin = h.actors.admin.address();
    let supply = h.state.total_supply();
    let vehicle = plate(0);

    let mut actions: Vec<(Address, Payload)> = vec![(admin, Payload::AdvanceDay {})];
    for c in &clients {
        for deposit in [2, 4] {
            actions.push((
                *c,
                Payload::RentCar {
                    vehicle_id: vehicle.clone(),
                    license_id: LICENSE.into(),
                    deposit,
                },
            ));
        }
        for amount in [1, 3] {
            actions.push((
                *c,
                Payload::AddFunds {
                    vehicle_id: vehicle.clone(),
                    amount,
                },
            ));
        }
        actions.push((
            *c,
            Payload::ReturnCar {
                vehicle_id: vehicle.clone(),
            },
        ));
    }

    let biconditional = |s: &WorldState| {
        s.contract
            .fleet
            .iter()
            .all(|(id, v)| (v.status == VehicleStatus::Rented) == s.contract.agreements.contains_key(id))
    };

    let mut report = GuardReport::default();
    let mut seen: HashSet<Vec<u8>> = HashSet::new();
    let mut queue: VecDeque<WorldState> = VecDeque::new();
    seen.insert(h.state.to_canonical_bytes());
    queue.push_back(h.state);

    while let Some(state) = queue.pop_front() {
        report.states += 1;
        for (sender, payload) in &actions {
            if matches!(payload, Payload::AdvanceDay {}) && state.contract.current_day >= days {
                continue;
            }
            report.transitions += 1;
            let mut next = state.clone();
            let result = next.apply_payload(*sender, payload, 1);
            let pending = state.contract.agreements.get(&vehicle).map(|a| a.charges);

            if let Payload::ReturnCar { .. } = payload {
                match &result {
                    Ok(()) => {
                        report.returns_ok += 1;
                        if pending != Some(0) {
                            report
                                .violations
                                .push(format!("return succeeded with charges {pending:?}"));
                        }
                    }
                    Err(ContractError::PendingCharges(owed)) => {
                        report.returns_blocked += 1;
                        if pending != Some(*owed) || *owed == 0 {
                            report
                                .violations
                                .push(format!("PendingCharges({owed}) but state holds {pending:?}"));
                        }
                    }
                    Err(_) => {}
                }
            }
            if result.is_err() {
                if next != state {
                    report.violations.push(format!("failed {payload:?} mutated state"));
                }
                continue;
            }
            if !biconditional(&next) {
                report
                    .violations
                    .push(format!("Rented/agreement mismatch after {payload:?}"));
            }
            if !next.escrow_backed() || next.total_supply() != supply {
                report.violations.push(format!("accounting broken after {payload:?}"));
            }
            if seen.insert(next.to_canonical_bytes()) {
                queue.push_back(next);
            }
        }
    }
    report
}
