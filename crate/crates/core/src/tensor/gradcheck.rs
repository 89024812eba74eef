use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Matrix, Tape, Var};
use crate::error::Result;

/// Compares reverse-mode gradients of `op` against central differences.
///
/// `op` builds its output from the given inputs on a fresh tape. Non-scalar
/// outputs are reduced to a scalar by a fixed pseudo-random projection so that
/// every output entry contributes. Returns the maximum over all input entries
/// of `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
pub fn finite_diff_check<F>(op: F, inputs: &[Matrix], epsilon: f64) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let evaluate = |values: &[Matrix], backward: bool| -> Result<(f64, Vec<Option<Matrix>>)> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = values.iter().map(|v| tape.leaf(v.clone(), true)).collect();
        let out = op(&mut tape, &vars)?;
        let (r, c) = tape.value(out).shape();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let proj = Matrix::from_raw(r, c, (0..r * c).map(|_| rng.random_range(0.5..1.5)).collect());
        let scalar = if (r, c) == (1, 1) {
            out
        } else {
            let w = tape.constant(proj);
            let weighted = tape.mul(out, w)?;
            let ones = tape.constant(Matrix::filled(c, 1, 1.0));
            let rowsum = tape.matmul(weighted, ones)?;
            let ones_r = tape.constant(Matrix::filled(1, r, 1.0));
            tape.matmul(ones_r, rowsum)?
        };
        let value = tape.scalar(scalar);
        if !backward {
            return Ok((value, Vec::new()));
        }
        tape.backward(scalar)?;
        Ok((value, vars.iter().map(|v| tape.grad(*v).cloned()).collect()))
    };

    let (_, analytic) = evaluate(inputs, true)?;
    let mut worst = 0.0f64;
    let mut probe = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        for j in 0..input.len() {
            let orig = input.as_slice()[j];
            probe[i].as_mut_slice()[j] = orig + epsilon;
            let (plus, _) = evaluate(&probe, false)?;
            probe[i].as_mut_slice()[j] = orig - epsilon;
            let (minus, _) = evaluate(&probe, false)?;
            probe[i].as_mut_slice()[j] = orig;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let exact = analytic[i].as_ref().map_or(0.0, |g| g.as_slice()[j]);
            let denom = exact.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max((exact - numeric).abs() / denom);
        }
    }
    Ok(worst)
}

/// Worst relative error of one operation over a batch of random instances.
#[derive(Clone, Debug, PartialEq)]
pub struct OpCheck {
    pub op: &'static str,
    pub instances: usize,
    pub max_rel_error: f64,
}

type Builder = fn(&mut Tape, &[Var]) -> Result<Var>;
type Inputs = fn(&mut ChaCha8Rng) -> Vec<Matrix>;

fn dims<R: Rng>(rng: &mut R) -> (usize, usize) {
    (rng.random_range(1..=5), rng.random_range(1..=5))
}

/// Entries with magnitude in [0.1, 2] and random sign, away from the relu kink.
fn random_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| {
            let m = rng.random_range(0.1..2.0);
            if rng.random::<bool>() {
                m
            } else {
                -m
            }
        })
        .collect();
    Matrix::from_raw(rows, cols, data)
}

fn mask_for(rows: usize, cols: usize) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64((rows * 31 + cols) as u64);
    let mut m = Matrix::from_raw(rows, cols, (0..rows * cols).map(|_| f64::from(rng.random::<bool>())).collect());
    m.as_mut_slice()[0] = 1.0;
    m
}

fn lstm_cell(t: &mut Tape, v: &[Var]) -> Result<Var> {
    let (x, h, wx, wh) = (v[0], v[1], v[2], v[3]);
    let u = t.value(h).cols();
    let zx = t.matmul(x, wx)?;
    let zh = t.matmul(h, wh)?;
    let z = t.add(zx, zh)?;
    let gates: Vec<Var> = (0..4).map(|g| t.slice_columns(z, g * u, u)).collect::<Result<_>>()?;
    let i = t.sigmoid(gates[0]);
    let f = t.sigmoid(gates[1]);
    let g = t.tanh(gates[2]);
    let o = t.sigmoid(gates[3]);
    let keep = t.mul(f, h)?;
    let write = t.mul(i, g)?;
    let c = t.add(keep, write)?;
    let sq = t.tanh(c);
    t.mul(o, sq)
}

fn gcn_layer(t: &mut Tape, v: &[Var]) -> Result<Var> {
    let n = t.value(v[0]).rows();
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    let kernel = Matrix::from_raw(n, n, (0..n * n).map(|_| rng.random_range(0.0..1.0)).collect());
    let th = t.block_matmul(vec![kernel].into(), v[0])?;
    let cat = t.concat_columns(&[v[0], th])?;
    let z = t.matmul(cat, v[1])?;
    Ok(t.relu(z))
}

/// Random inputs and builder for every differentiable operation.
fn catalog() -> Vec<(&'static str, Builder, Inputs)> {
    vec![
        ("matmul", |t, v| t.matmul(v[0], v[1]), |r| {
            let (m, k) = dims(r);
            let n = r.random_range(1..=5);
            vec![random_matrix(m, k, r), random_matrix(k, n, r)]
        }),
        ("add", |t, v| t.add(v[0], v[1]), |r| {
            let (m, n) = dims(r);
            vec![random_matrix(m, n, r), random_matrix(m, n, r)]
        }),
        ("sub", |t, v| t.sub(v[0], v[1]), |r| {
            let (m, n) = dims(r);
            vec![random_matrix(m, n, r), random_matrix(m, n, r)]
        }),
        ("mul", |t, v| t.mul(v[0], v[1]), |r| {
            let (m, n) = dims(r);
            vec![random_matrix(m, n, r), random_matrix(m, n, r)]
        }),
        ("add_row", |t, v| t.add_row(v[0], v[1]), |r| {
            let (m, n) = dims(r);
            vec![random_matrix(m, n, r), random_matrix(1, n, r)]
        }),
        ("scalar_mul", |t, v| t.scalar_mul(v[0], -1.7), |r| {
            let (m, n) = dims(r);
            vec![random_matrix(m, n, r)]
        }),
        ("concat_columns", |t, v| t.concat_columns(v), |r| {
            let (m, p) = dims(r);
            let q = r.random_range(1..=5);
            vec![random_matrix(m, p, r), random_matrix(m, q, r), random_matrix(m, 2, r)]
        }),
        ("slice_columns", |t, v| {
            let c = t.value(v[0]).cols();
            t.slice_columns(v[0], c / 3, c - c / 3)
        }, |r| {
            let (m, n) = dims(r);
            vec![random_matrix(m, n, r)]
        }),
        ("relu", |t, v| Ok(t.relu(v[0])), |r| {
            let (m, n) = dims(r);
            vec![random_matrix(m, n, r)]
        }),
        ("sigmoid", |t, v| Ok(t.sigmoid(v[0])), |r| {
            let (m, n) = dims(r);
            vec![random_matrix(m, n, r)]
        }),
        ("tanh", |t, v| Ok(t.tanh(v[0])), |r| {
            let (m, n) = dims(r);
            vec![random_matrix(m, n, r)]
        }),
        ("dropout", |t, v| {
            let (m, n) = t.value(v[0]).shape();
            let mut rng = ChaCha8Rng::seed_from_u64((m * 7 + n) as u64);
            t.dropout(v[0], 0.5, true, &mut rng)
        }, |r| {
            let (m, n) = dims(r);
            vec![random_matrix(m, n, r)]
        }),
        ("block_matmul", |t, v| {
            let rows = t.value(v[0]).rows();
            let first = rows / 2;
            let blocks: Vec<Matrix> = [first, rows - first]
                .into_iter()
                .filter(|&b| b > 0)
                .map(|b| Matrix::from_raw(b, b, (0..b * b).map(|i| 0.3 + i as f64 * 0.1).collect()))
                .collect();
            t.block_matmul(blocks.into(), v[0])
        }, |r| {
            let (m, n) = dims(r);
            vec![random_matrix(m, n, r)]
        }),
        ("mse_loss", |t, v| t.mse_loss(v[0], v[1]), |r| {
            let (m, n) = dims(r);
            vec![random_matrix(m, n, r), random_matrix(m, n, r)]
        }),
        ("masked_mse_loss", |t, v| {
            let (m, n) = t.value(v[0]).shape();
            t.masked_mse_loss(v[0], v[1], &mask_for(m, n))
        }, |r| {
            let (m, n) = dims(r);
            vec![random_matrix(m, n, r), random_matrix(m, n, r)]
        }),
        ("lstm_cell", lstm_cell, |r| {
            let b = r.random_range(1..=3);
            let d = r.random_range(1..=4);
            let u = r.random_range(1..=3);
            let mut scaled = |rows, cols| random_matrix(rows, cols, r).map(|x| 0.5 * x);
            vec![scaled(b, d), scaled(b, u), scaled(d, 4 * u), scaled(u, 4 * u)]
        }),
        ("gcn_layer", gcn_layer, |r| {
            let (n, d) = dims(r);
            let out = r.random_range(1..=4);
            vec![random_matrix(n, d, r), random_matrix(2 * d, out, r)]
        }),
    ]
}

/// Finite-difference check of every operation on `instances` random inputs each.
pub fn check_all_ops(instances: usize, seed: u64) -> Result<Vec<OpCheck>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    catalog()
        .into_iter()
        .map(|(name, op, make)| {
            let mut worst = 0.0f64;
            for _ in 0..instances {
                let inputs = make(&mut rng);
                worst = worst.max(finite_diff_check(op, &inputs, 1e-5)?);
            }
            Ok(OpCheck {
                op: name,
                instances,
                max_rel_error: worst,
            })
        })
        .collect()
}
