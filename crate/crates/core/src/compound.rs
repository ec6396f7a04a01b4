//! Compound-style lending pool (cToken over an underlying ERC20).
//!
//! Interest accrues lazily: every state-changing entry point first calls
//! [`CTokenPool::accrue_interest`] for the current block and then runs its
//! "fresh" body, which reverts if accrual did not happen in this block.
//! All rates and indices are scaled by `scale`; every division floors.

use crate::kernel::{revert, ArrayId, CellId, ModelError, Schema, SchemaBuilder, Store, Tx, TxResult};
use crate::ledger::{Slot, Token};

/// Linear borrow-rate model: `base + multiplier * utilization / scale` per block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RateModel {
    pub base_rate_per_block: i64,
    pub multiplier_per_block: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MarketParams {
    pub scale: i64,
    pub rate_model: RateModel,
    pub reserve_factor: i64,
    pub initial_exchange_rate: i64,
    /// Redeem *adds* the redeemed tokens to the supply, breaking its invariant.
    pub literal_redeem_supply: bool,
}

/// The pool-level numbers interest accrual works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Market {
    pub cash: i64,
    pub total_borrows: i64,
    pub total_reserves: i64,
    pub borrow_index: i64,
    pub accrual_block: u64,
}

fn narrow(v: i128) -> Result<i64, ModelError> {
    i64::try_from(v).map_err(|_| ModelError::Overflow)
}

/// `borrows * scale / (cash + borrows)`, 0 for an empty pool.
pub fn utilization(cash: i64, borrows: i64, scale: i64) -> Result<i64, ModelError> {
    let denom = cash as i128 + borrows as i128;
    if denom == 0 {
        return Ok(0);
    }
    narrow(borrows as i128 * scale as i128 / denom)
}

pub fn borrow_rate(cash: i64, borrows: i64, model: &RateModel, scale: i64) -> Result<i64, ModelError> {
    let util = utilization(cash, borrows, scale)?;
    narrow(model.base_rate_per_block as i128 + model.multiplier_per_block as i128 * util as i128 / scale as i128)
}

/// Brings `market` forward to `current_block`.
pub fn accrue(market: Market, current_block: u64, params: &MarketParams) -> Result<Market, ModelError> {
    if current_block < market.accrual_block {
        return Err(ModelError::Numeric(format!(
            "accrual block {} is ahead of current block {current_block}",
            market.accrual_block
        )));
    }
    let delta = (current_block - market.accrual_block) as i128;
    let scale = params.scale as i128;
    let rate = borrow_rate(market.cash, market.total_borrows, &params.rate_model, params.scale)? as i128;
    let interest = rate * delta * market.total_borrows as i128 / scale;
    let index_growth = market.borrow_index as i128 * rate * delta / scale;
    let reserves_growth = params.reserve_factor as i128 * interest / scale;
    Ok(Market {
        cash: market.cash,
        total_borrows: narrow(market.total_borrows as i128 + interest)?,
        total_reserves: narrow(market.total_reserves as i128 + reserves_growth)?,
        borrow_index: narrow(market.borrow_index as i128 + index_growth)?,
        accrual_block: current_block,
    })
}

/// `(cash + borrows - reserves) * scale / supply`, or the initial rate for an empty supply.
pub fn exchange_rate(
    cash: i64,
    borrows: i64,
    reserves: i64,
    supply: i64,
    params: &MarketParams,
) -> Result<i64, ModelError> {
    if supply == 0 {
        return Ok(params.initial_exchange_rate);
    }
    let backing = cash as i128 + borrows as i128 - reserves as i128;
    narrow(backing * params.scale as i128 / supply as i128)
}

/// Store names for a market's bookkeeping cells.
#[derive(Debug, Clone)]
pub struct MarketNames {
    pub total_borrows: String,
    pub total_reserves: String,
    pub borrow_index: String,
    pub accrual_block: String,
    pub principal: String,
    pub interest_index: String,
}

impl MarketNames {
    pub fn for_ctoken(ctoken: &str) -> Self {
        Self {
            total_borrows: format!("{ctoken}_totalBorrows"),
            total_reserves: format!("{ctoken}_totalReserves"),
            borrow_index: format!("{ctoken}_borrowIndex"),
            accrual_block: format!("{ctoken}_accrualBlockNumber"),
            principal: format!("{ctoken}_accBorrows_principal"),
            interest_index: format!("{ctoken}_accBorrows_interestIndex"),
        }
    }

    pub fn declare(&self, builder: &mut SchemaBuilder, slots: usize, scale: i64) {
        builder
            .cell(self.total_borrows.clone(), 0)
            .cell(self.total_reserves.clone(), 0)
            .cell(self.borrow_index.clone(), scale)
            .cell(self.accrual_block.clone(), 0)
            .array(self.principal.clone(), vec![0; slots])
            .array(self.interest_index.clone(), vec![0; slots]);
    }
}

/// Ghost pair updated on every accrual: the previous and the fresh exchange rate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RateGhosts {
    pub prev: CellId,
    pub new: CellId,
}

#[derive(Debug, Clone)]
pub struct CTokenPool {
    pub underlying: Token,
    pub ctoken: Token,
    /// The pool contract's own user slot; its underlying balance is the cash.
    pub contract: Slot,
    pub total_borrows: CellId,
    pub total_reserves: CellId,
    pub borrow_index: CellId,
    pub accrual_block: CellId,
    pub principal: ArrayId,
    pub interest_index: ArrayId,
    pub params: MarketParams,
    pub rate_ghosts: Option<RateGhosts>,
}

impl CTokenPool {
    pub fn bind(
        schema: &Schema,
        underlying: Token,
        ctoken: Token,
        contract: Slot,
        params: MarketParams,
    ) -> Result<Self, ModelError> {
        let names = MarketNames::for_ctoken(&ctoken.name);
        Ok(Self {
            total_borrows: schema.cell(&names.total_borrows)?,
            total_reserves: schema.cell(&names.total_reserves)?,
            borrow_index: schema.cell(&names.borrow_index)?,
            accrual_block: schema.cell(&names.accrual_block)?,
            principal: schema.array(&names.principal)?,
            interest_index: schema.array(&names.interest_index)?,
            underlying,
            ctoken,
            contract,
            params,
            rate_ghosts: None,
        })
    }

    pub fn name(&self) -> &str {
        &self.ctoken.name
    }

    pub fn cash(&self, store: &Store) -> Result<i64, ModelError> {
        self.underlying.balance_of(store, self.contract)
    }

    pub fn market(&self, store: &Store) -> Result<Market, ModelError> {
        Ok(Market {
            cash: self.cash(store)?,
            total_borrows: store.get(self.total_borrows),
            total_reserves: store.get(self.total_reserves),
            borrow_index: store.get(self.borrow_index),
            accrual_block: store.get(self.accrual_block) as u64,
        })
    }

    pub fn utilization(&self, store: &Store) -> Result<i64, ModelError> {
        utilization(self.cash(store)?, store.get(self.total_borrows), self.params.scale)
    }

    pub fn exchange_rate_stored(&self, store: &Store) -> Result<i64, ModelError> {
        exchange_rate(
            self.cash(store)?,
            store.get(self.total_borrows),
            store.get(self.total_reserves),
            self.ctoken.total_supply(store),
            &self.params,
        )
    }

    pub fn borrow_balance_stored(&self, store: &Store, who: Slot) -> Result<i64, ModelError> {
        let principal = store.elem(self.principal, who)?;
        if principal == 0 {
            return Ok(0);
        }
        let index = store.elem(self.interest_index, who)?;
        if index == 0 {
            return Err(ModelError::DivisionByZero);
        }
        narrow(principal as i128 * store.get(self.borrow_index) as i128 / index as i128)
    }

    pub fn accrue_interest(&self, tx: &mut Tx<'_>) -> TxResult<()> {
        let before = self.market(&tx.store)?;
        let current = tx.store.block_number();
        let after = accrue(before, current, &self.params)?;
        tx.store.set(self.total_borrows, after.total_borrows);
        tx.store.set(self.total_reserves, after.total_reserves);
        tx.store.set(self.borrow_index, after.borrow_index);
        tx.store.set(self.accrual_block, current as i64);
        if current != before.accrual_block {
            tx.emit(
                format!("AccrueInterest.{}", self.name()),
                vec![after.total_borrows - before.total_borrows, after.borrow_index, after.total_borrows],
            );
        }
        if let Some(g) = self.rate_ghosts {
            let rate = self.exchange_rate_stored(&tx.store)?;
            let prev = tx.store.get(g.new);
            tx.store.set(g.prev, prev);
            tx.store.set(g.new, rate);
        }
        Ok(())
    }

    fn require_fresh(&self, tx: &Tx<'_>) -> TxResult<()> {
        if tx.store.get(self.accrual_block) as u64 != tx.store.block_number() {
            return revert(format!("{}: market not fresh", self.name()));
        }
        Ok(())
    }

    /// Deposits `amount` underlying and returns the cTokens minted.
    pub fn mint(&self, tx: &mut Tx<'_>, minter: Slot, amount: i64) -> TxResult<i64> {
        self.accrue_interest(tx)?;
        self.require_fresh(tx)?;
        if amount < 0 {
            return revert("negative amount");
        }
        let rate = self.exchange_rate_stored(&tx.store)?;
        let minted = narrow(amount as i128 * self.params.scale as i128 / rate as i128)?;
        self.underlying
            .transfer_from(tx, minter, self.contract, amount, self.contract)?;
        let supply = self.ctoken.total_supply(&tx.store);
        tx.store.set(self.ctoken.total_supply, supply + minted);
        let bal = self.ctoken.balance_of(&tx.store, minter)?;
        tx.store.set_elem(self.ctoken.balances, minter, bal + minted)?;
        tx.emit(format!("Mint.{}", self.name()), vec![]);
        tx.emit(format!("mint.{}", self.name()), vec![minter, amount, minted]);
        tx.emit(format!("transfer.{}", self.name()), vec![self.contract, minter, minted]);
        Ok(minted)
    }

    /// Burns `tokens` cTokens and pays out their underlying value.
    pub fn redeem(&self, tx: &mut Tx<'_>, redeemer: Slot, tokens: i64) -> TxResult<i64> {
        self.accrue_interest(tx)?;
        self.require_fresh(tx)?;
        let held = self.ctoken.balance_of(&tx.store, redeemer)?;
        if tokens < 0 || tokens > held {
            return revert(format!("{}: redeem exceeds balance", self.name()));
        }
        let rate = self.exchange_rate_stored(&tx.store)?;
        let amount = narrow(tokens as i128 * rate as i128 / self.params.scale as i128)?;
        if self.cash(&tx.store)? <= amount {
            return revert(format!("{}: insufficient cash", self.name()));
        }
        self.underlying.transfer(tx, self.contract, redeemer, amount)?;
        let supply = self.ctoken.total_supply(&tx.store);
        let supply = if self.params.literal_redeem_supply {
            supply + tokens
        } else {
            supply - tokens
        };
        tx.store.set(self.ctoken.total_supply, supply);
        tx.store.set_elem(self.ctoken.balances, redeemer, held - tokens)?;
        tx.emit(format!("transfer.{}", self.name()), vec![redeemer, self.contract, tokens]);
        tx.emit(format!("redeem.{}", self.name()), vec![redeemer, amount, tokens]);
        Ok(amount)
    }

    /// Uncollateralized borrow; reverts only when cash is short.
    pub fn borrow(&self, tx: &mut Tx<'_>, borrower: Slot, amount: i64) -> TxResult<()> {
        self.accrue_interest(tx)?;
        self.require_fresh(tx)?;
        if amount < 0 || self.cash(&tx.store)? < amount {
            return revert(format!("{}: insufficient cash to borrow", self.name()));
        }
        let owed = self.borrow_balance_stored(&tx.store, borrower)?;
        let borrows = tx.store.get(self.total_borrows);
        tx.store.set(self.total_borrows, borrows + amount);
        self.underlying.transfer(tx, self.contract, borrower, amount)?;
        tx.store.set_elem(self.principal, borrower, owed + amount)?;
        let index = tx.store.get(self.borrow_index);
        tx.store.set_elem(self.interest_index, borrower, index)?;
        tx.emit(format!("borrow.{}", self.name()), vec![borrower, amount]);
        Ok(())
    }

    /// Repays the payer's whole outstanding debt; returns the amount paid.
    pub fn repay_borrow(&self, tx: &mut Tx<'_>, payer: Slot) -> TxResult<i64> {
        self.accrue_interest(tx)?;
        self.require_fresh(tx)?;
        let repaid = self.borrow_balance_stored(&tx.store, payer)?;
        self.underlying.transfer(tx, payer, self.contract, repaid)?;
        let borrows = tx.store.get(self.total_borrows);
        tx.store.set(self.total_borrows, borrows - repaid.min(borrows));
        tx.store.set_elem(self.principal, payer, 0)?;
        let index = tx.store.get(self.borrow_index);
        tx.store.set_elem(self.interest_index, payer, index)?;
        tx.emit(format!("repayBorrow.{}", self.name()), vec![payer, repaid]);
        Ok(repaid)
    }
}
