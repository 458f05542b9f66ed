/// Number of ordinal risk levels in the discrete pricing task.
pub const DISCRETE_LEVELS: usize = 8;

/// Discrete pricing: assessing risk level `yhat` against true level `y`
/// earns `1 - beta (y - yhat)` if `y >= yhat`, else nothing.
pub fn profit_discrete(y: u8, yhat: u8, beta: f64) -> f64 {
    if y >= yhat {
        1.0 - beta * (y - yhat) as f64
    } else {
        0.0
    }
}

/// Posted-price sale: the item sells at `yhat` iff `yhat <= y`.
pub fn profit_price(y: f64, yhat: f64) -> f64 {
    if yhat <= y {
        yhat
    } else {
        0.0
    }
}

/// Allocating `yhat` against demand `y` at unit cost `beta`.
pub fn profit_inventory(y: f64, yhat: f64, beta: f64) -> f64 {
    y.min(yhat) - beta * yhat
}
