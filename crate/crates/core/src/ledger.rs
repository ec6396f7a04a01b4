//! ERC20-style tokens over the global store.
//!
//! A token is a total-supply cell, one balance per user slot and an N×N
//! allowance grid. Contracts occupy user slots too, so a pool's holdings are
//! ordinary balances.

use crate::kernel::{revert, ArrayId, CellId, MatrixId, ModelError, Schema, SchemaBuilder, Store, Tx, TxResult};

/// User slot index in the balance vector.
pub type Slot = i64;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub name: String,
    pub total_supply: CellId,
    pub balances: ArrayId,
    pub allowed: MatrixId,
}

/// Store names used by a token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenNames {
    pub total_supply: String,
    pub balances: String,
    pub allowed: String,
}

impl TokenNames {
    /// `USDC_totalSupply`, `USDC_balances`, `USDC_allowed`. Compound pool
    /// tokens keep their contract's `accountTokens` name for the balances.
    pub fn for_token(name: &str, compound_style: bool) -> Self {
        let balances = if compound_style { "accountTokens" } else { "balances" };
        Self {
            total_supply: format!("{name}_totalSupply"),
            balances: format!("{name}_{balances}"),
            allowed: format!("{name}_allowed"),
        }
    }
}

fn add(a: i64, b: i64) -> Result<i64, ModelError> {
    a.checked_add(b).ok_or(ModelError::Overflow)
}

fn non_negative(value: i64) -> TxResult<()> {
    if value < 0 {
        return revert("negative amount");
    }
    Ok(())
}

impl Token {
    /// Declares the token's cells with the given opening balances; the total
    /// supply starts at their sum.
    pub fn declare(builder: &mut SchemaBuilder, names: &TokenNames, balances: Vec<i64>) {
        let n = balances.len();
        builder
            .cell(names.total_supply.clone(), balances.iter().sum())
            .array(names.balances.clone(), balances)
            .matrix(names.allowed.clone(), n, vec![0; n * n]);
    }

    pub fn bind(schema: &Schema, name: &str, names: &TokenNames) -> Result<Self, ModelError> {
        Ok(Self {
            name: name.to_string(),
            total_supply: schema.cell(&names.total_supply)?,
            balances: schema.array(&names.balances)?,
            allowed: schema.matrix(&names.allowed)?,
        })
    }

    pub fn balance_of(&self, store: &Store, who: Slot) -> Result<i64, ModelError> {
        store.elem(self.balances, who)
    }

    pub fn allowance(&self, store: &Store, owner: Slot, spender: Slot) -> Result<i64, ModelError> {
        store.matrix_elem(self.allowed, owner, spender)
    }

    pub fn total_supply(&self, store: &Store) -> i64 {
        store.get(self.total_supply)
    }

    /// Overwrites `A(owner, spender)`.
    pub fn approve(&self, tx: &mut Tx<'_>, owner: Slot, spender: Slot, value: i64) -> TxResult<()> {
        non_negative(value)?;
        tx.store.set_matrix_elem(self.allowed, owner, spender, value)?;
        tx.emit(format!("approve.{}", self.name), vec![owner, spender, value]);
        Ok(())
    }

    pub fn transfer(&self, tx: &mut Tx<'_>, from: Slot, to: Slot, value: i64) -> TxResult<()> {
        non_negative(value)?;
        let from_bal = tx.store.elem(self.balances, from)?;
        if value > from_bal {
            return revert(format!("{}: transfer exceeds balance", self.name));
        }
        tx.store.set_elem(self.balances, from, from_bal - value)?;
        let to_bal = tx.store.elem(self.balances, to)?;
        tx.store.set_elem(self.balances, to, add(to_bal, value)?)?;
        tx.emit(format!("transfer.{}", self.name), vec![from, to, value]);
        Ok(())
    }

    /// Moves `value` from `from` to `to` on behalf of `sender`, spending allowance.
    pub fn transfer_from(
        &self,
        tx: &mut Tx<'_>,
        from: Slot,
        to: Slot,
        value: i64,
        sender: Slot,
    ) -> TxResult<()> {
        non_negative(value)?;
        let allowed = tx.store.matrix_elem(self.allowed, from, sender)?;
        if value > allowed {
            return revert(format!("{}: transfer exceeds allowance", self.name));
        }
        self.transfer(tx, from, to, value)?;
        tx.store.set_matrix_elem(self.allowed, from, sender, allowed - value)?;
        Ok(())
    }

    pub fn mint(&self, tx: &mut Tx<'_>, to: Slot, value: i64) -> TxResult<()> {
        non_negative(value)?;
        let ts = add(tx.store.get(self.total_supply), value)?;
        tx.store.set(self.total_supply, ts);
        let bal = add(tx.store.elem(self.balances, to)?, value)?;
        tx.store.set_elem(self.balances, to, bal)?;
        tx.emit(format!("issue.{}", self.name), vec![to, value]);
        Ok(())
    }

    pub fn burn(&self, tx: &mut Tx<'_>, from: Slot, value: i64) -> TxResult<()> {
        non_negative(value)?;
        let bal = tx.store.elem(self.balances, from)?;
        if value > bal {
            return revert(format!("{}: burn exceeds balance", self.name));
        }
        tx.store.set_elem(self.balances, from, bal - value)?;
        let ts = tx.store.get(self.total_supply) - value;
        tx.store.set(self.total_supply, ts);
        tx.emit(format!("burn.{}", self.name), vec![from, value]);
        Ok(())
    }

    /// `TS == Σ B(u)`.
    pub fn supply_matches_balances(&self, store: &Store) -> Result<bool, ModelError> {
        Ok(store.sum(self.balances)? == self.total_supply(store))
    }

    /// Every balance, allowance and the supply are non-negative.
    pub fn non_negative(&self, store: &Store) -> bool {
        let n = self.allowed.dim() as i64;
        self.total_supply(store) >= 0
            && store.slice(self.balances).iter().all(|b| *b >= 0)
            && (0..n).all(|r| (0..n).all(|c| store.matrix_elem(self.allowed, r, c).is_ok_and(|v| v >= 0)))
    }
}
