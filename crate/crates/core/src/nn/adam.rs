use super::{Layer, NnError, Tensor};

/// Adam optimiser state with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step_count: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl Default for AdamState {
    fn default() -> Self {
        Self::new(1e-4)
    }
}

impl AdamState {
    pub fn new(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn moments(&self) -> (&[Tensor], &[Tensor]) {
        (&self.first, &self.second)
    }

    /// Applies one update to every parameter. Moments are zero-initialised
    /// on the first call and must keep matching shapes afterwards.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[&Tensor]) -> Result<(), NnError> {
        if params.len() != grads.len() {
            return Err(NnError::ShapeMismatch(format!(
                "{} parameters but {} gradients",
                params.len(),
                grads.len()
            )));
        }
        for (p, g) in params.iter().zip(grads) {
            g.expect_shape(p.shape(), "adam gradient")?;
        }
        self.ensure_moments(params.iter().map(|p| p.shape()))?;
        self.step_count += 1;
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            self.update(i, p, g);
        }
        Ok(())
    }

    /// Updates every parameter of `layer` from its accumulated gradients.
    pub fn step_layer(&mut self, layer: &mut dyn Layer) -> Result<(), NnError> {
        let mut shapes = Vec::new();
        layer.visit_params(&mut |p| {
            shapes.push(p.value.shape().to_vec());
        });
        self.ensure_moments(shapes.iter().map(|s| s.as_slice()))?;
        self.step_count += 1;
        let mut i = 0;
        layer.visit_params_mut(&mut |p| {
            self.update(i, &mut p.value, &p.grad);
            i += 1;
        });
        Ok(())
    }

    fn ensure_moments<'a>(&mut self, shapes: impl Iterator<Item = &'a [usize]>) -> Result<(), NnError> {
        let shapes: Vec<&[usize]> = shapes.collect();
        if self.first.is_empty() && self.step_count == 0 {
            self.first = shapes.iter().map(|s| Tensor::zeros(s)).collect();
            self.second = self.first.clone();
            return Ok(());
        }
        if shapes.len() != self.first.len()
            || shapes.iter().zip(&self.first).any(|(s, m)| *s != m.shape())
        {
            return Err(NnError::ShapeMismatch(
                "parameter shapes changed since the first adam step".into(),
            ));
        }
        Ok(())
    }

    fn update(&mut self, index: usize, param: &mut Tensor, grad: &Tensor) {
        let t = self.step_count as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.learning_rate, self.epsilon);
        let m = self.first[index].data_mut();
        let v = self.second[index].data_mut();
        for (((w, &g), m), v) in param.data_mut().iter_mut().zip(grad.data()).zip(m).zip(v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *w -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> Tensor {
        Tensor::new(vec![1], vec![v]).unwrap()
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        // Exact value is -lr * g / (|g| + eps); within 1e-6 of -lr * sign(g)
        // whenever eps / |g| <= 1e-6.
        for g in [3.0, -0.02, 0.01] {
            let mut w = scalar(1.0);
            let mut adam = AdamState::new(1e-4);
            adam.step(&mut [&mut w], &[&scalar(g)]).unwrap();
            let delta = w.data()[0] - 1.0;
            let want = -1e-4 * g.signum();
            assert!(((delta - want) / want).abs() < 1e-6, "g={g}: {delta}");
            assert_eq!(adam.step_count(), 1);
        }
    }

    #[test]
    fn zero_gradient_never_moves() {
        let mut w = scalar(0.75);
        let mut adam = AdamState::new(1e-2);
        for _ in 0..50 {
            adam.step(&mut [&mut w], &[&scalar(0.0)]).unwrap();
        }
        assert_eq!(w.data()[0], 0.75);
        assert_eq!(adam.step_count(), 50);
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut w = Tensor::new(vec![3], vec![0.1, -2.0, 5.0]).unwrap();
        let before = w.clone();
        let mut adam = AdamState::new(0.0);
        let grad = Tensor::new(vec![3], vec![0.3, -1.0, 7.0]).unwrap();
        for _ in 0..10 {
            adam.step(&mut [&mut w], &[&grad]).unwrap();
        }
        assert_eq!(w, before);
    }

    #[test]
    fn descends_quadratic() {
        let mut w = scalar(1.0);
        let mut adam = AdamState::new(0.1);
        for _ in 0..100 {
            let grad = scalar(2.0 * w.data()[0]);
            adam.step(&mut [&mut w], &[&grad]).unwrap();
        }
        assert!(w.data()[0].abs() < 0.5);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut w = scalar(1.0);
        let g = Tensor::zeros(&[2]);
        let mut adam = AdamState::default();
        assert!(adam.step(&mut [&mut w], &[&g]).is_err());
        assert_eq!(adam.step_count(), 0);
    }
}
