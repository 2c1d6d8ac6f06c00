//! Finite-difference verification of analytic gradients.

use crate::error::Result;
use crate::param::{ParamId, ParamStore};
use crate::tape::{Tape, Var};

/// Compare analytic parameter gradients against central differences.
///
/// `run` must build the computation on a fresh tape and return the scalar
/// loss; it is invoked twice per coefficient plus once for the analytic
/// pass, so keep the model small. Returns the worst relative error
/// |a - n| / max(|a|, |n|, 0.01) over every coefficient.
pub fn grad_check<F>(store: &mut ParamStore, run: F, h: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &ParamStore) -> Result<Var>,
{
    store.zero_grads();
    {
        let mut tape = Tape::new();
        let loss = run(&mut tape, store)?;
        tape.backward(loss, store)?;
    }
    let analytic: Vec<Vec<f64>> = store.iter().map(|p| p.grad.data().to_vec()).collect();

    let eval = |store: &mut ParamStore| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = run(&mut tape, store)?;
        Ok(tape.value(loss).item())
    };

    let mut worst: f64 = 0.0;
    for pi in 0..store.len() {
        for ci in 0..analytic[pi].len() {
            let id = ParamId(pi);
            let original = store.get(id).value.data()[ci];

            store.get_mut(id).value.data_mut()[ci] = original + h;
            let up = eval(store)?;
            store.get_mut(id).value.data_mut()[ci] = original - h;
            let down = eval(store)?;
            store.get_mut(id).value.data_mut()[ci] = original;

            let numeric = (up - down) / (2.0 * h);
            let a = analytic[pi][ci];
            let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-2);
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
