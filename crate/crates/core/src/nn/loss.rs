use super::{NnError, Tensor};

/// Mean batch loss together with its gradient w.r.t. the logits.
#[derive(Debug, Clone)]
pub struct LossValue {
    pub value: f64,
    pub gradient: Tensor,
}

/// Row-wise softmax of `[B,K]` logits, stabilised by the row max.
pub fn softmax(logits: &Tensor) -> Result<Tensor, NnError> {
    logits.expect_rank(2, "softmax logits")?;
    let k = logits.shape()[1];
    let mut out = logits.clone();
    for row in out.data_mut().chunks_exact_mut(k) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    Ok(out)
}

/// Mean of `-log softmax(logits)[label]` over a `[B,2]` batch. The
/// gradient is `(softmax - one_hot) / B`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[usize]) -> Result<LossValue, NnError> {
    logits.expect_rank(2, "cross-entropy logits")?;
    let (batch, classes) = (logits.shape()[0], logits.shape()[1]);
    if classes != 2 {
        return Err(NnError::ShapeMismatch(format!("expected 2 classes, got {classes}")));
    }
    if batch == 0 || labels.len() != batch {
        return Err(NnError::ShapeMismatch(format!(
            "{} labels for a batch of {batch}",
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(NnError::BadLabel(bad));
    }
    logits.check_finite("cross-entropy logits")?;
    let mut grad = Tensor::zeros(logits.shape());
    let mut total = 0.0;
    for ((row, g), &label) in logits
        .data()
        .chunks_exact(classes)
        .zip(grad.data_mut().chunks_exact_mut(classes))
        .zip(labels)
    {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum = row.iter().map(|v| (v - max).exp()).sum::<f64>().ln() + max;
        total += log_sum - row[label];
        for (j, (gj, &z)) in g.iter_mut().zip(row).enumerate() {
            let p = (z - log_sum).exp();
            *gj = (p - if j == label { 1.0 } else { 0.0 }) / batch as f64;
        }
    }
    Ok(LossValue {
        value: total / batch as f64,
        gradient: grad,
    })
}
