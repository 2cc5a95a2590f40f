/// SGD with momentum and L2 weight decay folded into the gradient:
/// `g = grad + wd * w`, `v = momentum * v + lr * g`, `w -= v`.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub learning_rate: f32,
    pub momentum: f32,
    pub weight_decay: f32,
    velocity: Vec<f32>,
}

impl Sgd {
    pub fn new(params: usize, learning_rate: f64, momentum: f64, weight_decay: f64) -> Self {
        Self {
            learning_rate: learning_rate as f32,
            momentum: momentum as f32,
            weight_decay: weight_decay as f32,
            velocity: vec![0.0; params],
        }
    }

    pub fn velocity(&self) -> &[f32] {
        &self.velocity
    }

    pub fn step(&mut self, params: &mut [f32], grads: &[f32]) {
        assert_eq!(params.len(), grads.len());
        assert_eq!(params.len(), self.velocity.len());
        let (lr, mu, wd) = (self.learning_rate, self.momentum, self.weight_decay);
        for ((w, g), v) in params.iter_mut().zip(grads).zip(&mut self.velocity) {
            let g = g + wd * *w;
            *v = mu * *v + lr * g;
            *w -= *v;
        }
    }
}
