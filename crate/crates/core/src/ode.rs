//! Fixed-step classical Runge–Kutta.

/// One RK4 step for `y' = f(τ, y)`.
pub fn rk4_step<E>(
    f: &mut impl FnMut(f64, &[f64]) -> Result<Vec<f64>, E>,
    tau: f64,
    y: &[f64],
    h: f64,
) -> Result<Vec<f64>, E> {
    let k1 = f(tau, y)?;
    let y2: Vec<f64> = y.iter().zip(&k1).map(|(a, k)| a + 0.5 * h * k).collect();
    let k2 = f(tau + 0.5 * h, &y2)?;
    let y3: Vec<f64> = y.iter().zip(&k2).map(|(a, k)| a + 0.5 * h * k).collect();
    let k3 = f(tau + 0.5 * h, &y3)?;
    let y4: Vec<f64> = y.iter().zip(&k3).map(|(a, k)| a + h * k).collect();
    let k4 = f(tau + h, &y4)?;
    Ok((0..y.len())
        .map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator() {
        let mut f = |_: f64, y: &[f64]| -> Result<Vec<f64>, ()> { Ok(vec![y[1], -y[0]]) };
        let mut y = vec![1.0, 0.0];
        let n = 1000;
        let h = std::f64::consts::PI / n as f64;
        for k in 0..n {
            y = rk4_step(&mut f, k as f64 * h, &y, h).unwrap();
        }
        assert!((y[0] + 1.0).abs() < 1e-10 && y[1].abs() < 1e-10);
    }
}
