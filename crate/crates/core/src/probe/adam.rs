/// Adam with bias-corrected moments. `begin_step` advances the shared step
/// counter; `update` may then be called for any subset of parameters, which
/// gives the lazy (touched-rows-only) variant used for embedding tables.
#[derive(Debug, Clone)]
pub(crate) struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    c1: f64,
    c2: f64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub(crate) fn new(n: usize, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            c1: 1.0,
            c2: 1.0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    pub(crate) fn begin_step(&mut self) {
        self.t += 1;
        self.c1 = 1.0 - self.beta1.powi(self.t);
        self.c2 = 1.0 - self.beta2.powi(self.t);
    }

    #[inline]
    pub(crate) fn update(&mut self, i: usize, param: &mut f64, g: f64) {
        let m = &mut self.m[i];
        let v = &mut self.v[i];
        *m = self.beta1 * *m + (1.0 - self.beta1) * g;
        *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
        let mh = *m / self.c1;
        let vh = *v / self.c2;
        *param -= self.lr * mh / (vh.sqrt() + self.eps);
    }

    pub(crate) fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        self.begin_step();
        for (i, (p, &g)) in params.iter_mut().zip(grads).enumerate() {
            self.update(i, p, g);
        }
    }
}
