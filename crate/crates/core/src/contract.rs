//! License registry and rental escrow.
//!
//! Every operation validates all of its preconditions before touching state,
//! so a returned error always leaves the world state as it was.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codec::{Encode, Writer};
use crate::crypto::Address;
use crate::license;
use crate::state::WorldState;

/// Label the escrow address is derived from. No key exists for it.
pub const ESCROW_LABEL: &str = "rentchain/contract/escrow";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractError {
    #[error("sender is not the registry admin")]
    NotAdmin,
    #[error("license id {0:?} is not 8 digits plus its control letter")]
    MalformedLicense(String),
    #[error("license {0} already registered")]
    DuplicateLicense(String),
    #[error("sender is not the fleet owner")]
    NotOwner,
    #[error("vehicle {0} already in the fleet")]
    DuplicateVehicle(String),
    #[error("daily price must be positive")]
    BadPrice,
    #[error("vehicle {0} does not exist")]
    UnknownVehicle(String),
    #[error("vehicle {0} is already rented")]
    VehicleUnavailable(String),
    #[error("license {0} is not registered")]
    UnknownLicense(String),
    #[error("deposit {offered} is below the minimum of {required}")]
    InsufficientDeposit { required: u64, offered: u64 },
    #[error("balance {available} cannot cover {needed}")]
    InsufficientBalance { needed: u64, available: u64 },
    #[error("sender is not the lessee of vehicle {0}")]
    NotLessee(String),
    #[error("amount must be positive")]
    ZeroAmount,
    #[error("{0} units of pending charges must be paid before returning")]
    PendingCharges(u64),
    #[error("escrow address cannot receive direct transfers")]
    ReservedAddress,
    #[error("arithmetic overflow")]
    Overflow,
}

impl ContractError {
    pub fn name(&self) -> &'static str {
        match self {
            ContractError::NotAdmin => "NotAdmin",
            ContractError::MalformedLicense(_) => "MalformedLicense",
            ContractError::DuplicateLicense(_) => "DuplicateLicense",
            ContractError::NotOwner => "NotOwner",
            ContractError::DuplicateVehicle(_) => "DuplicateVehicle",
            ContractError::BadPrice => "BadPrice",
            ContractError::UnknownVehicle(_) => "UnknownVehicle",
            ContractError::VehicleUnavailable(_) => "VehicleUnavailable",
            ContractError::UnknownLicense(_) => "UnknownLicense",
            ContractError::InsufficientDeposit { .. } => "InsufficientDeposit",
            ContractError::InsufficientBalance { .. } => "InsufficientBalance",
            ContractError::NotLessee(_) => "NotLessee",
            ContractError::ZeroAmount => "ZeroAmount",
            ContractError::PendingCharges(_) => "PendingCharges",
            ContractError::ReservedAddress => "ReservedAddress",
            ContractError::Overflow => "Overflow",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LicenseRecord {
    pub license_id: String,
    pub added_by: Address,
    pub added_at_height: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VehicleStatus {
    Available,
    Rented,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vehicle {
    pub vehicle_id: String,
    pub daily_price: u64,
    pub status: VehicleStatus,
    pub owner: Address,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RentalAgreement {
    pub vehicle_id: String,
    pub client: Address,
    pub license_id: String,
    /// Prepaid funds still held for future days.
    pub deposit: u64,
    /// Earned by the owner, held in escrow until return.
    pub accrued_revenue: u64,
    /// Debt the client must clear before returning.
    pub charges: u64,
    pub start_day: u64,
    pub days_elapsed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContractState {
    pub licenses: BTreeMap<String, LicenseRecord>,
    pub fleet: BTreeMap<String, Vehicle>,
    pub agreements: BTreeMap<String, RentalAgreement>,
    pub escrow_address: Address,
    pub admin: Address,
    pub fleet_owner: Address,
    pub current_day: u64,
    pub surcharge_fee: u64,
}

impl ContractState {
    pub fn new(admin: Address, fleet_owner: Address, surcharge_fee: u64) -> Self {
        ContractState {
            licenses: BTreeMap::new(),
            fleet: BTreeMap::new(),
            agreements: BTreeMap::new(),
            escrow_address: Address::derived(ESCROW_LABEL),
            admin,
            fleet_owner,
            current_day: 0,
            surcharge_fee,
        }
    }

    /// Registered license ids in lexicographic order.
    pub fn list_licenses(&self) -> Vec<String> {
        self.licenses.keys().cloned().collect()
    }

    /// What the escrow account owes: deposits plus revenue not yet paid out.
    pub fn escrow_liability(&self) -> u128 {
        self.agreements
            .values()
            .map(|a| u128::from(a.deposit) + u128::from(a.accrued_revenue))
            .sum()
    }
}

impl Encode for ContractState {
    fn encode_to(&self, w: &mut Writer) {
        w.u32(self.licenses.len() as u32);
        for rec in self.licenses.values() {
            w.str(&rec.license_id).fixed(&rec.added_by.0).u64(rec.added_at_height);
        }
        w.u32(self.fleet.len() as u32);
        for v in self.fleet.values() {
            let status = match v.status {
                VehicleStatus::Available => 0,
                VehicleStatus::Rented => 1,
            };
            w.str(&v.vehicle_id).u64(v.daily_price).u8(status).fixed(&v.owner.0);
        }
        w.u32(self.agreements.len() as u32);
        for a in self.agreements.values() {
            w.str(&a.vehicle_id)
                .fixed(&a.client.0)
                .str(&a.license_id)
                .u64(a.deposit)
                .u64(a.accrued_revenue)
                .u64(a.charges)
                .u64(a.start_day)
                .u64(a.days_elapsed);
        }
        w.fixed(&self.escrow_address.0)
            .fixed(&self.admin.0)
            .fixed(&self.fleet_owner.0)
            .u64(self.current_day)
            .u64(self.surcharge_fee);
    }
}

pub(crate) fn transfer(state: &mut WorldState, from: Address, to: Address, amount: u64) -> Result<(), ContractError> {
    if amount == 0 {
        return Err(ContractError::ZeroAmount);
    }
    if to == state.contract.escrow_address {
        return Err(ContractError::ReservedAddress);
    }
    state.transfer(from, to, amount)
}

pub(crate) fn add_license(
    state: &mut WorldState,
    sender: Address,
    license_id: &str,
    height: u64,
) -> Result<(), ContractError> {
    let c = &mut state.contract;
    if sender != c.admin {
        return Err(ContractError::NotAdmin);
    }
    if !license::is_well_formed(license_id) {
        return Err(ContractError::MalformedLicense(license_id.to_owned()));
    }
    if c.licenses.contains_key(license_id) {
        return Err(ContractError::DuplicateLicense(license_id.to_owned()));
    }
    c.licenses.insert(
        license_id.to_owned(),
        LicenseRecord {
            license_id: license_id.to_owned(),
            added_by: sender,
            added_at_height: height,
        },
    );
    Ok(())
}

pub(crate) fn add_vehicle(
    state: &mut WorldState,
    sender: Address,
    vehicle_id: &str,
    daily_price: u64,
) -> Result<(), ContractError> {
    let c = &mut state.contract;
    if sender != c.fleet_owner {
        return Err(ContractError::NotOwner);
    }
    if c.fleet.contains_key(vehicle_id) {
        return Err(ContractError::DuplicateVehicle(vehicle_id.to_owned()));
    }
    if daily_price == 0 {
        return Err(ContractError::BadPrice);
    }
    c.fleet.insert(
        vehicle_id.to_owned(),
        Vehicle {
            vehicle_id: vehicle_id.to_owned(),
            daily_price,
            status: VehicleStatus::Available,
            owner: sender,
        },
    );
    Ok(())
}

pub(crate) fn rent_car(
    state: &mut WorldState,
    sender: Address,
    vehicle_id: &str,
    license_id: &str,
    deposit: u64,
) -> Result<(), ContractError> {
    let c = &state.contract;
    let vehicle = c
        .fleet
        .get(vehicle_id)
        .ok_or_else(|| ContractError::UnknownVehicle(vehicle_id.to_owned()))?;
    if vehicle.status != VehicleStatus::Available {
        return Err(ContractError::VehicleUnavailable(vehicle_id.to_owned()));
    }
    if !c.licenses.contains_key(license_id) {
        return Err(ContractError::UnknownLicense(license_id.to_owned()));
    }
    if deposit < vehicle.daily_price {
        return Err(ContractError::InsufficientDeposit {
            required: vehicle.daily_price,
            offered: deposit,
        });
    }
    let escrow = c.escrow_address;
    let start_day = c.current_day;
    state.transfer(sender, escrow, deposit)?;

    let c = &mut state.contract;
    c.fleet.get_mut(vehicle_id).expect("checked above").status = VehicleStatus::Rented;
    c.agreements.insert(
        vehicle_id.to_owned(),
        RentalAgreement {
            vehicle_id: vehicle_id.to_owned(),
            client: sender,
            license_id: license_id.to_owned(),
            deposit,
            accrued_revenue: 0,
            charges: 0,
            start_day,
            days_elapsed: 0,
        },
    );
    Ok(())
}

/// One day's settlement for a single agreement, computed without mutation.
fn accrue_one_day(a: &RentalAgreement, daily_price: u64, surcharge_fee: u64) -> Result<RentalAgreement, ContractError> {
    let mut next = a.clone();
    next.days_elapsed = a.days_elapsed.checked_add(1).ok_or(ContractError::Overflow)?;
    if a.deposit >= daily_price {
        next.deposit = a.deposit - daily_price;
        next.accrued_revenue = a
            .accrued_revenue
            .checked_add(daily_price)
            .ok_or(ContractError::Overflow)?;
    } else {
        let shortfall = daily_price - a.deposit;
        next.charges = a
            .charges
            .checked_add(shortfall)
            .and_then(|c| c.checked_add(surcharge_fee))
            .ok_or(ContractError::Overflow)?;
        next.accrued_revenue = a
            .accrued_revenue
            .checked_add(a.deposit)
            .ok_or(ContractError::Overflow)?;
        next.deposit = 0;
    }
    Ok(next)
}

pub(crate) fn advance_day(state: &mut WorldState, sender: Address) -> Result<(), ContractError> {
    let c = &state.contract;
    if sender != c.admin {
        return Err(ContractError::NotAdmin);
    }
    let next_day = c.current_day.checked_add(1).ok_or(ContractError::Overflow)?;
    let mut updated = Vec::with_capacity(c.agreements.len());
    for (id, agreement) in &c.agreements {
        let price = c.fleet[id].daily_price;
        updated.push(accrue_one_day(agreement, price, c.surcharge_fee)?);
    }

    let c = &mut state.contract;
    c.current_day = next_day;
    for a in updated {
        c.agreements.insert(a.vehicle_id.clone(), a);
    }
    Ok(())
}

pub(crate) fn add_funds(
    state: &mut WorldState,
    sender: Address,
    vehicle_id: &str,
    amount: u64,
) -> Result<(), ContractError> {
    let c = &state.contract;
    if !c.fleet.contains_key(vehicle_id) {
        return Err(ContractError::UnknownVehicle(vehicle_id.to_owned()));
    }
    let agreement = c
        .agreements
        .get(vehicle_id)
        .filter(|a| a.client == sender)
        .ok_or_else(|| ContractError::NotLessee(vehicle_id.to_owned()))?;
    if amount == 0 {
        return Err(ContractError::ZeroAmount);
    }
    let to_charges = amount.min(agreement.charges);
    let to_deposit = amount - to_charges;
    let accrued = agreement
        .accrued_revenue
        .checked_add(to_charges)
        .ok_or(ContractError::Overflow)?;
    let deposit = agreement
        .deposit
        .checked_add(to_deposit)
        .ok_or(ContractError::Overflow)?;
    let escrow = c.escrow_address;
    state.transfer(sender, escrow, amount)?;

    let a = state.contract.agreements.get_mut(vehicle_id).expect("checked above");
    a.charges -= to_charges;
    a.accrued_revenue = accrued;
    a.deposit = deposit;
    Ok(())
}

pub(crate) fn return_car(state: &mut WorldState, sender: Address, vehicle_id: &str) -> Result<(), ContractError> {
    let c = &state.contract;
    let vehicle = c
        .fleet
        .get(vehicle_id)
        .ok_or_else(|| ContractError::UnknownVehicle(vehicle_id.to_owned()))?;
    let agreement = c
        .agreements
        .get(vehicle_id)
        .filter(|a| a.client == sender)
        .ok_or_else(|| ContractError::NotLessee(vehicle_id.to_owned()))?;
    if agreement.charges != 0 {
        return Err(ContractError::PendingCharges(agreement.charges));
    }
    let owner = vehicle.owner;
    let client = agreement.client;
    let (revenue, refund) = (agreement.accrued_revenue, agreement.deposit);
    let escrow = c.escrow_address;
    if state.balance(&escrow) < revenue.saturating_add(refund)
        || state.balance(&owner).checked_add(revenue).is_none()
        || state.balance(&client).checked_add(refund).is_none()
    {
        return Err(ContractError::Overflow);
    }

    if revenue > 0 {
        state.transfer(escrow, owner, revenue)?;
    }
    if refund > 0 {
        state.transfer(escrow, client, refund)?;
    }
    let c = &mut state.contract;
    c.agreements.remove(vehicle_id);
    c.fleet.get_mut(vehicle_id).expect("checked above").status = VehicleStatus::Available;
    Ok(())
}
