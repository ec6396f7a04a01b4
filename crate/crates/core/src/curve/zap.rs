//! Deposit zap: wraps underlyings into cTokens before pooling, and unwraps
//! on the way out, all inside the caller's atomic block.

use super::pool::SwapPool;
use crate::compound::CTokenPool;
use crate::kernel::{revert, Tx, TxResult};
use crate::ledger::Slot;

#[derive(Debug, Clone)]
pub struct DepositZap {
    pub contract: Slot,
    /// Markets in swap coin order; each wraps one underlying.
    pub markets: [CTokenPool; 2],
    pub swap: SwapPool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ZapDeposit {
    pub c_amounts: [i64; 2],
    pub minted: i64,
}

impl DepositZap {
    pub fn add_liquidity(
        &self,
        tx: &mut Tx<'_>,
        uamounts: [i64; 2],
        min_mint: i64,
        sender: Slot,
    ) -> TxResult<ZapDeposit> {
        if uamounts.iter().any(|a| *a < 0) || uamounts.iter().all(|a| *a == 0) {
            return revert("zap: nothing to deposit");
        }
        let zap = self.contract;
        let mut c_amounts = [0; 2];
        for (k, market) in self.markets.iter().enumerate() {
            let amount = uamounts[k];
            if amount > 0 {
                market.underlying.transfer_from(tx, sender, zap, amount, zap)?;
                market.underlying.approve(tx, zap, market.contract, amount)?;
                market.mint(tx, zap, amount)?;
            }
            c_amounts[k] = market.ctoken.balance_of(&tx.store, zap)?;
            market.ctoken.approve(tx, zap, self.swap.contract, c_amounts[k])?;
        }
        let minted = self.swap.add_liquidity(tx, c_amounts, min_mint, zap)?;
        self.swap.lp.transfer(tx, zap, sender, minted)?;
        Ok(ZapDeposit { c_amounts, minted })
    }

    /// Burns `amount` pool tokens and pays the sender in underlying `i`.
    /// Dust is left in the swap whatever `_donate_dust` says.
    pub fn remove_liquidity_one_coin(
        &self,
        tx: &mut Tx<'_>,
        amount: i64,
        i: i64,
        sender: Slot,
        _donate_dust: bool,
    ) -> TxResult<i64> {
        let zap = self.contract;
        let market = match i {
            0 | 1 => &self.markets[i as usize],
            _ => return revert(format!("zap: no coin {i}")),
        };
        self.swap.lp.transfer_from(tx, sender, zap, amount, zap)?;
        let c_out = self.swap.remove_liquidity_one_coin(tx, amount, i, 0, zap)?;
        let out = market.redeem(tx, zap, c_out)?;
        market.underlying.transfer(tx, zap, sender, out)?;
        Ok(out)
    }
}
