//! Reference models. Nothing here calls into the contract engine; the rental
//! model tracks a single signed balance per lease instead of the engine's
//! deposit/charges/revenue split and derives those three at the end.

use std::collections::BTreeMap;

use rentchain_core::Address;

const LETTERS: [char; 23] = [
    'T', 'R', 'W', 'A', 'G', 'M', 'Y', 'F', 'P', 'D', 'X', 'B', 'N', 'J', 'Z', 'S', 'Q', 'V', 'H', 'L', 'C', 'K', 'E',
];

/// Control letter by digit-wise long division with repeated subtraction.
pub fn dni_letter(digits: &str) -> char {
    let mut rem = 0u32;
    for c in digits.chars() {
        rem = rem * 10 + c.to_digit(10).expect("decimal digit");
        while rem >= 23 {
            rem -= 23;
        }
    }
    LETTERS[rem as usize]
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Rent {
        vehicle: String,
        client: Address,
        deposit: u64,
    },
    Fund {
        vehicle: String,
        client: Address,
        amount: u64,
    },
    Return {
        vehicle: String,
        client: Address,
    },
    Day,
}

/// Expected view of one live lease.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LeaseView {
    pub client: Address,
    pub deposit: u64,
    pub charges: u64,
    pub accrued_revenue: u64,
    pub days_elapsed: u64,
}

#[derive(Debug, Clone)]
struct Lease {
    client: Address,
    paid_in: i128,
    net: i128,
    days: u64,
}

/// Expected outcome of replaying an event log from scratch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expected {
    pub accepted: Vec<bool>,
    pub leases: BTreeMap<String, LeaseView>,
    pub balances: BTreeMap<Address, i128>,
    pub day: u64,
}

/// Replays `log` day by day from the initial balances.
///
/// Each lease keeps `net = paid in - cost so far`. A day costs the daily
/// price, plus the surcharge when the lease could not prepay the day
/// (`net < price`). Deposit and charges are the positive and negative parts
/// of `net`; owner revenue is everything paid in that is not deposit.
pub fn replay_log(
    log: &[Event],
    prices: &BTreeMap<String, u64>,
    owner: Address,
    surcharge_fee: u64,
    initial: &BTreeMap<Address, u64>,
) -> Expected {
    let mut balances: BTreeMap<Address, i128> = initial.iter().map(|(a, b)| (*a, i128::from(*b))).collect();
    let mut leases: BTreeMap<String, Lease> = BTreeMap::new();
    let mut accepted = Vec::with_capacity(log.len());
    let mut day = 0u64;
    let fee = i128::from(surcharge_fee);

    for event in log {
        let ok = match event {
            Event::Day => {
                day += 1;
                for (vehicle, lease) in leases.iter_mut() {
                    let price = i128::from(prices[vehicle]);
                    let cost = if lease.net < price { price + fee } else { price };
                    lease.net -= cost;
                    lease.days += 1;
                }
                true
            }
            Event::Rent {
                vehicle,
                client,
                deposit,
            } => {
                let bal = balances.get(client).copied().unwrap_or(0);
                let d = i128::from(*deposit);
                let ok = prices.contains_key(vehicle)
                    && !leases.contains_key(vehicle)
                    && *deposit >= prices[vehicle]
                    && bal >= d;
                if ok {
                    *balances.entry(*client).or_insert(0) -= d;
                    leases.insert(
                        vehicle.clone(),
                        Lease {
                            client: *client,
                            paid_in: d,
                            net: d,
                            days: 0,
                        },
                    );
                }
                ok
            }
            Event::Fund {
                vehicle,
                client,
                amount,
            } => {
                let bal = balances.get(client).copied().unwrap_or(0);
                let a = i128::from(*amount);
                let ok = leases.get(vehicle).is_some_and(|l| l.client == *client) && *amount > 0 && bal >= a;
                if ok {
                    *balances.entry(*client).or_insert(0) -= a;
                    let lease = leases.get_mut(vehicle).expect("checked");
                    lease.paid_in += a;
                    lease.net += a;
                }
                ok
            }
            Event::Return { vehicle, client } => {
                let ok = leases.get(vehicle).is_some_and(|l| l.client == *client && l.net >= 0);
                if ok {
                    let lease = leases.remove(vehicle).expect("checked");
                    *balances.entry(*client).or_insert(0) += lease.net;
                    *balances.entry(owner).or_insert(0) += lease.paid_in - lease.net;
                }
                ok
            }
        };
        accepted.push(ok);
    }

    let leases = leases
        .into_iter()
        .map(|(v, l)| {
            let deposit = l.net.max(0);
            let view = LeaseView {
                client: l.client,
                deposit: deposit as u64,
                charges: (-l.net).max(0) as u64,
                accrued_revenue: (l.paid_in - deposit) as u64,
                days_elapsed: l.days,
            };
            (v, view)
        })
        .collect();
    Expected {
        accepted,
        leases,
        balances,
        day,
    }
}
