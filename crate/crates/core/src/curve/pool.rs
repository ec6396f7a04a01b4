//! The two-coin swap contract. It prices raw cToken balances.

use super::math::{get_d, get_y, get_y_d, N_COINS};
use crate::kernel::{revert, ArrayId, ModelError, Schema, SchemaBuilder, Store, Tx, TxResult};
use crate::ledger::{Slot, Token};

pub const BALANCES: &str = "Curve_balances";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SwapParams {
    pub amp: i64,
    /// Swap fee, scaled by `scale`.
    pub fee: i64,
    pub scale: i64,
}

#[derive(Debug, Clone)]
pub struct SwapPool {
    pub coins: [Token; 2],
    pub lp: Token,
    pub contract: Slot,
    /// The contract's own record of its coin holdings.
    pub balances: ArrayId,
    pub params: SwapParams,
}

/// Quote for a single-coin withdrawal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Withdrawal {
    pub amount: i64,
    pub fee: i64,
}

fn narrow(v: i128) -> Result<i64, ModelError> {
    i64::try_from(v).map_err(|_| ModelError::Overflow)
}

fn coin_index(i: i64) -> TxResult<usize> {
    match i {
        0 | 1 => Ok(i as usize),
        _ => revert(format!("no coin {i}")),
    }
}

impl SwapPool {
    pub fn declare(builder: &mut SchemaBuilder, balances: [i64; 2]) {
        builder.array(BALANCES, balances.to_vec());
    }

    pub fn bind(
        schema: &Schema,
        coins: [Token; 2],
        lp: Token,
        contract: Slot,
        params: SwapParams,
    ) -> Result<Self, ModelError> {
        Ok(Self {
            balances: schema.array(BALANCES)?,
            coins,
            lp,
            contract,
            params,
        })
    }

    pub fn pool_balances(&self, store: &Store) -> [i64; 2] {
        let s = store.slice(self.balances);
        [s[0], s[1]]
    }

    fn set_balances(&self, tx: &mut Tx<'_>, bal: [i64; 2]) -> Result<(), ModelError> {
        tx.store.set_elem(self.balances, 0, bal[0])?;
        tx.store.set_elem(self.balances, 1, bal[1])
    }

    /// Output of trading `dx` of coin `i` for coin `j`, after fee.
    pub fn get_dy(&self, store: &Store, i: usize, j: usize, dx: i64) -> Result<i64, ModelError> {
        let bal = self.pool_balances(store);
        let x = bal[i].checked_add(dx).ok_or(ModelError::Overflow)?;
        let y = get_y(i, j, x, bal, self.params.amp)?;
        let raw = (bal[j] - y - 1).max(0);
        let fee = narrow(self.params.fee as i128 * raw as i128 / self.params.scale as i128)?;
        Ok(raw - fee)
    }

    /// Amount of coin `i` paid out for burning `amount` pool tokens.
    pub fn calc_withdraw_one_coin(&self, store: &Store, amount: i64, i: usize) -> Result<Withdrawal, ModelError> {
        let p = self.params;
        let xp = self.pool_balances(store);
        let supply = self.lp.total_supply(store);
        if supply == 0 || amount > supply {
            return Err(ModelError::Numeric("withdrawal exceeds pool token supply".into()));
        }
        let d0 = get_d(xp, p.amp)?;
        let d1 = d0 - narrow(amount as i128 * d0 as i128 / supply as i128)?;
        let new_y = get_y_d(i, xp, d1, p.amp)?;
        let fee_rate = p.fee as i128 * N_COINS / (4 * (N_COINS - 1));
        let mut reduced = xp;
        for j in 0..2 {
            let scaled = narrow(xp[j] as i128 * d1 as i128 / d0 as i128)?;
            let expected = if j == i { scaled - new_y } else { xp[j] - scaled };
            reduced[j] -= narrow(fee_rate * expected as i128 / p.scale as i128)?;
        }
        let dy = reduced[i] - get_y_d(i, reduced, d1, p.amp)?;
        let dy_no_fee = xp[i] - new_y;
        Ok(Withdrawal {
            amount: dy.max(0),
            fee: (dy_no_fee - dy).max(0),
        })
    }

    /// Pulls `amounts` from `provider` and mints pool tokens to them.
    pub fn add_liquidity(&self, tx: &mut Tx<'_>, amounts: [i64; 2], min_mint: i64, provider: Slot) -> TxResult<i64> {
        if amounts.iter().any(|a| *a < 0) {
            return revert("negative amount");
        }
        let amp = self.params.amp;
        let old = self.pool_balances(&tx.store);
        let supply = self.lp.total_supply(&tx.store);
        let d0 = if supply > 0 { get_d(old, amp)? } else { 0 };
        let new = [old[0] + amounts[0], old[1] + amounts[1]];
        let d1 = get_d(new, amp)?;
        if d1 <= d0 {
            return revert("invariant did not grow");
        }
        let minted = if supply == 0 {
            d1
        } else {
            narrow(supply as i128 * (d1 - d0) as i128 / d0 as i128)?
        };
        if minted < min_mint {
            return revert("slippage: too few pool tokens");
        }
        for (coin, amount) in self.coins.iter().zip(amounts) {
            if amount > 0 {
                coin.transfer_from(tx, provider, self.contract, amount, self.contract)?;
            }
        }
        self.set_balances(tx, new)?;
        self.lp.mint(tx, provider, minted)?;
        tx.emit("AddLiquidity", vec![provider, amounts[0], amounts[1], minted]);
        Ok(minted)
    }

    pub fn exchange(&self, tx: &mut Tx<'_>, i: i64, j: i64, dx: i64, min_dy: i64, trader: Slot) -> TxResult<i64> {
        let (i, j) = (coin_index(i)?, coin_index(j)?);
        if i == j || dx < 0 {
            return revert("bad exchange arguments");
        }
        let dy = self.get_dy(&tx.store, i, j, dx)?;
        if dy < min_dy {
            return revert("slippage: exchange below minimum");
        }
        self.coins[i].transfer_from(tx, trader, self.contract, dx, self.contract)?;
        self.coins[j].transfer(tx, self.contract, trader, dy)?;
        let mut bal = self.pool_balances(&tx.store);
        bal[i] += dx;
        bal[j] -= dy;
        self.set_balances(tx, bal)?;
        tx.emit("TokenExchange", vec![trader, i as i64, dx, j as i64, dy]);
        Ok(dy)
    }

    /// Burns `amount` of the provider's pool tokens and pays coin `i` to them.
    pub fn remove_liquidity_one_coin(
        &self,
        tx: &mut Tx<'_>,
        amount: i64,
        i: i64,
        min_amount: i64,
        provider: Slot,
    ) -> TxResult<i64> {
        let i = coin_index(i)?;
        if amount <= 0 {
            return revert("nothing to withdraw");
        }
        if amount > self.lp.balance_of(&tx.store, provider)? {
            return revert("pool token balance too low");
        }
        let quote = self.calc_withdraw_one_coin(&tx.store, amount, i)?;
        if quote.amount < min_amount {
            return revert("slippage: withdrawal below minimum");
        }
        self.lp.burn(tx, provider, amount)?;
        let mut bal = self.pool_balances(&tx.store);
        bal[i] -= quote.amount;
        self.set_balances(tx, bal)?;
        self.coins[i].transfer(tx, self.contract, provider, quote.amount)?;
        tx.emit("RemoveLiquidityOne", vec![provider, amount, quote.amount]);
        Ok(quote.amount)
    }
}
