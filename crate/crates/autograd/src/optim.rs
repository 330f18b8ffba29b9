//! Adam with decoupled weight decay, global-norm clipping and linear
//! warm-up.

use crate::element::{el, Element};
use crate::params::{ParamId, ParamStore};
use crate::tape::{Gradients, Var};
use ndarray::Zip;

#[derive(Clone, Debug)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub clip_norm: Option<f64>,
    /// Linear warm-up from 0 over this many steps (0 = none).
    pub warmup_steps: u64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 3e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            clip_norm: Some(100.0),
            warmup_steps: 0,
        }
    }
}

pub struct Adam {
    pub cfg: AdamConfig,
    t: u64,
}

impl Adam {
    pub fn new(cfg: AdamConfig) -> Self {
        Adam { cfg, t: 0 }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn set_steps(&mut self, t: u64) {
        self.t = t;
    }

    /// Current learning-rate scale from warm-up (1.0 once past it).
    pub fn lr_scale(&self) -> f64 {
        if self.cfg.warmup_steps == 0 {
            1.0
        } else {
            ((self.t + 1) as f64 / self.cfg.warmup_steps as f64).min(1.0)
        }
    }

    /// Applies one update. `bindings` maps parameters to their leaf nodes on
    /// the tape that produced `grads`. Parameters without a gradient are
    /// skipped. Returns the pre-clip global gradient norm.
    pub fn step<E: Element>(
        &mut self,
        store: &mut ParamStore<E>,
        grads: &mut Gradients<E>,
        bindings: &[(ParamId, Var)],
    ) -> f64 {
        let mut taken: Vec<(ParamId, ndarray::ArrayD<E>)> = Vec::with_capacity(bindings.len());
        let mut sq_norm = 0.0f64;
        for &(pid, var) in bindings {
            if let Some(g) = grads.take(var) {
                sq_norm += g.iter().map(|&x| x.to_f64() * x.to_f64()).sum::<f64>();
                taken.push((pid, g));
            }
        }
        let norm = sq_norm.sqrt();
        let clip_scale = match self.cfg.clip_norm {
            Some(c) if norm > c => c / norm,
            _ => 1.0,
        };

        let lr = self.cfg.lr * self.lr_scale();
        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - self.cfg.beta1.powi(t);
        let bc2 = 1.0 - self.cfg.beta2.powi(t);
        let b1 = el::<E>(self.cfg.beta1);
        let b2 = el::<E>(self.cfg.beta2);
        let one_m_b1 = el::<E>(1.0 - self.cfg.beta1);
        let one_m_b2 = el::<E>(1.0 - self.cfg.beta2);
        let eps = el::<E>(self.cfg.eps);
        let lr_e = el::<E>(lr);
        let wd = el::<E>(self.cfg.weight_decay * lr);
        let cs = el::<E>(clip_scale);
        let inv_bc1 = el::<E>(1.0 / bc1);
        let inv_bc2 = el::<E>(1.0 / bc2);

        for (pid, mut g) in taken {
            g.mapv_inplace(|x| x * cs);
            let p = &mut store.params[pid.0];
            Zip::from(&mut p.m).and(&g).for_each(|m, &ge| *m = b1 * *m + one_m_b1 * ge);
            Zip::from(&mut p.v)
                .and(&g)
                .for_each(|v, &ge| *v = b2 * *v + one_m_b2 * ge * ge);
            Zip::from(&mut p.value)
                .and(&p.m)
                .and(&p.v)
                .for_each(|x, &m, &v| {
                    let mhat = m * inv_bc1;
                    let vhat = v * inv_bc2;
                    *x = *x - lr_e * (mhat / (vhat.sqrt() + eps)) - wd * *x;
                });
        }
        norm
    }
}
