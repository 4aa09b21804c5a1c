//! Fixed-step classical Runge-Kutta integration of first-order systems.

/// Scratch buffers for [`rk4_step`], sized once per system.
#[derive(Debug, Clone)]
pub struct Rk4Workspace {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Workspace {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.k1.len()
    }
}

/// Advance `y` from `t` to `t + dt` with one RK4 step.
///
/// `rhs(t, y, dydt)` must overwrite `dydt` completely. All stage evaluations
/// see a consistent state vector, so coupled components are updated
/// synchronously.
pub fn rk4_step<F>(y: &mut [f64], t: f64, dt: f64, ws: &mut Rk4Workspace, mut rhs: F)
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    debug_assert_eq!(y.len(), ws.dim());
    let half = 0.5 * dt;
    let Rk4Workspace {
        k1,
        k2,
        k3,
        k4,
        tmp,
    } = ws;

    rhs(t, y, k1);
    for i in 0..y.len() {
        tmp[i] = y[i] + half * k1[i];
    }
    rhs(t + half, tmp, k2);
    for i in 0..y.len() {
        tmp[i] = y[i] + half * k2[i];
    }
    rhs(t + half, tmp, k3);
    for i in 0..y.len() {
        tmp[i] = y[i] + dt * k3[i];
    }
    rhs(t + dt, tmp, k4);
    let sixth = dt / 6.0;
    for i in 0..y.len() {
        y[i] += sixth * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_is_fourth_order() {
        // y' = -y, y(0) = 1
        let run = |n: usize| {
            let dt = 1.0 / n as f64;
            let mut y = [1.0];
            let mut ws = Rk4Workspace::new(1);
            for s in 0..n {
                rk4_step(&mut y, s as f64 * dt, dt, &mut ws, |_, y, d| d[0] = -y[0]);
            }
            (y[0] - (-1.0f64).exp()).abs()
        };
        let e1 = run(10);
        let e2 = run(20);
        let order = (e1 / e2).log2();
        assert!((order - 4.0).abs() < 0.2, "observed order {order}");
    }

    #[test]
    fn harmonic_oscillator_conserves_energy() {
        let dt = 1e-3;
        let mut y = [1.0, 0.0];
        let mut ws = Rk4Workspace::new(2);
        for s in 0..10_000 {
            rk4_step(&mut y, s as f64 * dt, dt, &mut ws, |_, y, d| {
                d[0] = y[1];
                d[1] = -y[0];
            });
        }
        let energy = 0.5 * (y[0] * y[0] + y[1] * y[1]);
        assert!((energy - 0.5).abs() < 1e-10);
    }
}
