//! Shared-fund procurement: named accounts with monthly refills, a buy list,
//! and purchase approvals whose threshold grows with price. All money is in
//! integer cents.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{EngineError, Result};
use crate::ids::{AccountId, ItemId, ProposalId, ResidentId};
use crate::time::{Timestamp, YearMonth};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Cents(pub i64);

impl Cents {
    pub fn dollars(d: i64) -> Self {
        Cents(d * 100)
    }
}

impl fmt::Display for Cents {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        write!(f, "{sign}${}.{:02}", self.0.abs() / 100, self.0.abs() % 100)
    }
}

/// Upvotes needed to buy something at `price`: one per started
/// `step` above zero, plus the surcharge for items not on the buy list.
pub fn min_upvotes_for_price(price: Cents, step: Cents, free_form_surcharge: u32, free_form: bool) -> u32 {
    let steps = (price.0.max(0) / step.0.max(1)) as u32;
    1 + steps + if free_form { free_form_surcharge } else { 0 }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PurchaseAccount {
    pub id: AccountId,
    pub name: String,
    pub balance: Cents,
    pub monthly_refill: Cents,
    pub created_at: Timestamp,
    pub refilled: BTreeSet<YearMonth>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BuyListItem {
    pub id: ItemId,
    pub name: String,
    pub vendor_hint: String,
    pub typical_price: Cents,
    pub active: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "type")]
pub enum PurchaseItem {
    Listed { item: ItemId },
    FreeForm { name: String },
}

impl PurchaseItem {
    pub fn is_free_form(&self) -> bool {
        matches!(self, PurchaseItem::FreeForm { .. })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum PurchaseStatus {
    Pending,
    Settled,
    FailedInsufficient,
    Rejected,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PurchaseProposal {
    pub proposal: ProposalId,
    pub item: PurchaseItem,
    pub price: Cents,
    pub account: AccountId,
    pub proposer: ResidentId,
    pub opened_at: Timestamp,
    pub status: PurchaseStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum LedgerKind {
    Refill,
    Purchase,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LedgerEntry {
    pub at: Timestamp,
    pub account: AccountId,
    pub delta: Cents,
    pub kind: LedgerKind,
    pub buyer: Option<ResidentId>,
    /// Month funded, for refills.
    pub month: Option<YearMonth>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ThingsBook {
    accounts: BTreeMap<AccountId, PurchaseAccount>,
    items: BTreeMap<ItemId, BuyListItem>,
    purchases: BTreeMap<ProposalId, PurchaseProposal>,
    ledger: Vec<LedgerEntry>,
    next_account: u64,
    next_item: u64,
}

impl ThingsBook {
    pub fn next_account_id(&self) -> AccountId {
        AccountId(self.next_account)
    }

    pub fn next_item_id(&self) -> ItemId {
        ItemId(self.next_item)
    }

    pub fn accounts(&self) -> impl Iterator<Item = &PurchaseAccount> {
        self.accounts.values()
    }

    pub fn account(&self, id: AccountId) -> Result<&PurchaseAccount> {
        self.accounts.get(&id).ok_or(EngineError::UnknownAccount(id))
    }

    pub fn account_by_name(&self, name: &str) -> Option<&PurchaseAccount> {
        self.accounts.values().find(|a| a.name == name)
    }

    pub fn items(&self) -> impl Iterator<Item = &BuyListItem> {
        self.items.values()
    }

    pub fn active_item(&self, id: ItemId) -> Result<&BuyListItem> {
        self.items.get(&id).filter(|i| i.active).ok_or(EngineError::UnknownItem(id))
    }

    pub fn active_item_by_name(&self, name: &str) -> Option<&BuyListItem> {
        self.items.values().find(|i| i.active && i.name == name)
    }

    pub fn purchases(&self) -> impl Iterator<Item = &PurchaseProposal> {
        self.purchases.values()
    }

    pub fn purchase(&self, id: ProposalId) -> Option<&PurchaseProposal> {
        self.purchases.get(&id)
    }

    pub fn ledger(&self) -> &[LedgerEntry] {
        &self.ledger
    }

    pub fn check_account_name(&self, name: &str, except: Option<AccountId>) -> Result<()> {
        match self.account_by_name(name) {
            Some(a) if Some(a.id) != except => Err(EngineError::DuplicateAccountName(name.to_string())),
            _ => Ok(()),
        }
    }

    pub fn create_account(&mut self, id: AccountId, name: String, monthly_refill: Cents, at: Timestamp) -> Result<()> {
        if id != self.next_account_id() {
            return Err(EngineError::CorruptLog(format!("{id} out of sequence")));
        }
        self.check_account_name(&name, None)?;
        self.next_account += 1;
        self.accounts.insert(
            id,
            PurchaseAccount {
                id,
                name,
                balance: Cents(0),
                monthly_refill,
                created_at: at,
                refilled: BTreeSet::new(),
            },
        );
        Ok(())
    }

    pub fn rename_account(&mut self, id: AccountId, name: String) -> Result<()> {
        self.account(id)?;
        self.check_account_name(&name, Some(id))?;
        self.accounts.get_mut(&id).expect("checked").name = name;
        Ok(())
    }

    pub fn retarget_refill(&mut self, id: AccountId, monthly_refill: Cents) -> Result<()> {
        self.account(id)?;
        self.accounts.get_mut(&id).expect("checked").monthly_refill = monthly_refill;
        Ok(())
    }

    pub fn needs_refill(&self, id: AccountId, month: YearMonth) -> bool {
        self.accounts.get(&id).is_some_and(|a| !a.refilled.contains(&month))
    }

    /// Idempotent per account and month.
    pub fn refill(&mut self, id: AccountId, month: YearMonth, amount: Cents, at: Timestamp) -> Result<()> {
        let acct = self.accounts.get_mut(&id).ok_or(EngineError::UnknownAccount(id))?;
        if !acct.refilled.insert(month) {
            return Ok(());
        }
        acct.balance.0 += amount.0;
        self.ledger.push(LedgerEntry {
            at,
            account: id,
            delta: amount,
            kind: LedgerKind::Refill,
            buyer: None,
            month: Some(month),
        });
        Ok(())
    }

    pub fn add_item(&mut self, id: ItemId, name: String, vendor_hint: String, typical_price: Cents) -> Result<()> {
        if id != self.next_item_id() {
            return Err(EngineError::CorruptLog(format!("{id} out of sequence")));
        }
        if self.active_item_by_name(&name).is_some() {
            return Err(EngineError::DuplicateName(name));
        }
        self.next_item += 1;
        self.items.insert(
            id,
            BuyListItem {
                id,
                name,
                vendor_hint,
                typical_price,
                active: true,
            },
        );
        Ok(())
    }

    pub fn retire_item(&mut self, id: ItemId) -> Result<()> {
        self.active_item(id)?;
        self.items.get_mut(&id).expect("checked").active = false;
        Ok(())
    }

    pub fn open_purchase(&mut self, p: PurchaseProposal) {
        self.purchases.insert(p.proposal, p);
    }

    /// What settling a resolved purchase would do right now.
    pub fn settlement_for(&self, proposal: ProposalId, passed: bool) -> Result<PurchaseStatus> {
        let p = self
            .purchases
            .get(&proposal)
            .ok_or(EngineError::UnknownProposal(proposal))?;
        if !passed {
            return Ok(PurchaseStatus::Rejected);
        }
        let acct = self.account(p.account)?;
        Ok(if acct.balance >= p.price {
            PurchaseStatus::Settled
        } else {
            PurchaseStatus::FailedInsufficient
        })
    }

    /// At most one settlement per proposal.
    pub fn settle(&mut self, proposal: ProposalId, status: PurchaseStatus, at: Timestamp) -> Result<()> {
        let p = self
            .purchases
            .get_mut(&proposal)
            .ok_or(EngineError::UnknownProposal(proposal))?;
        if p.status != PurchaseStatus::Pending {
            return Err(EngineError::CorruptLog(format!("{proposal} settled twice")));
        }
        p.status = status;
        if status == PurchaseStatus::Settled {
            let acct = self
                .accounts
                .get_mut(&p.account)
                .ok_or(EngineError::UnknownAccount(p.account))?;
            if acct.balance < p.price {
                return Err(EngineError::CorruptLog(format!("{proposal} overdraws {}", acct.name)));
            }
            acct.balance.0 -= p.price.0;
            self.ledger.push(LedgerEntry {
                at,
                account: p.account,
                delta: Cents(-p.price.0),
                kind: LedgerKind::Purchase,
                buyer: Some(p.proposer.clone()),
                month: None,
            });
        }
        Ok(())
    }

    /// Ledger as CSV with columns `at,account,delta_cents,kind,buyer`.
    pub fn ledger_csv(&self) -> String {
        let mut out = String::from("at,account,delta_cents,kind,buyer\n");
        for e in &self.ledger {
            let account = self.accounts.get(&e.account).map_or("", |a| a.name.as_str());
            let kind = match e.kind {
                LedgerKind::Refill => "refill",
                LedgerKind::Purchase => "purchase",
            };
            let buyer = e.buyer.as_ref().map_or("", |b| b.as_str());
            out.push_str(&format!("{},{},{},{},{}\n", e.at, csv_field(account), e.delta.0, kind, csv_field(buyer)));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}
