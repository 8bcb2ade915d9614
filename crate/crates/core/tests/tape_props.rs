use phaselab_core::oracle::{central_difference, naive_hilbert, naive_matmul};
use phaselab_core::{Activation, Matrix, Tape};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0..2.0f64, rows * cols).prop_map(move |d| Matrix::new(rows, cols, d).unwrap())
}

fn matmul_pair() -> impl Strategy<Value = (Matrix, Matrix)> {
    (1usize..8, 1usize..8, 1usize..8).prop_flat_map(|(m, k, n)| (matrix(m, k), matrix(k, n)))
}

/// `sum(tanh(x B) A)` through a bce head, a LoRA-shaped graph.
fn lora_graph_loss(x: &Matrix, b: &Matrix, a: &Matrix, w: &Matrix, labels: &[f64]) -> (f64, Vec<Matrix>) {
    let mut t = Tape::new();
    let xv = t.constant(x.clone());
    let (bv, av, wv) = (t.param(b.clone()), t.param(a.clone()), t.param(w.clone()));
    let z = t.matmul(xv, bv).unwrap();
    let z = t.activation(Activation::Tanh, z);
    let up = t.matmul(z, av).unwrap();
    let s = t.constant(Matrix::scalar(0.5));
    let up = t.scalar_mul(s, up).unwrap();
    let logits = t.matmul(up, wv).unwrap();
    let loss = t.bce_with_logits(logits, labels).unwrap();
    let mut g = t.backward(loss).unwrap();
    let value = t.value(loss).data()[0];
    (
        value,
        vec![g.take(bv).unwrap(), g.take(av).unwrap(), g.take(wv).unwrap()],
    )
}

proptest! {
    #[test]
    fn matmul_matches_triple_loop((a, b) in matmul_pair()) {
        let fast = a.matmul(&b).unwrap();
        prop_assert!(fast.max_abs_diff(&naive_matmul(&a, &b)) < 1e-12);
        let tt = a.transpose().t_matmul(&b).unwrap();
        prop_assert!(tt.max_abs_diff(&fast) < 1e-12);
        let mt = a.matmul_t(&b.transpose()).unwrap();
        prop_assert!(mt.max_abs_diff(&fast) < 1e-12);
    }

    #[test]
    fn lora_graph_gradients_match_fd(
        x in matrix(3, 5),
        b in matrix(5, 2),
        a in matrix(2, 4),
        w in matrix(4, 1),
    ) {
        let labels = [1.0, 0.0, 1.0];
        let (_, grads) = lora_graph_loss(&x, &b, &a, &w, &labels);
        let params = [&b, &a, &w];
        for (k, p) in params.iter().enumerate() {
            let fd = central_difference(
                |v| {
                    let moved = Matrix::new(p.rows(), p.cols(), v.to_vec()).unwrap();
                    let mut set = [b.clone(), a.clone(), w.clone()];
                    set[k] = moved;
                    lora_graph_loss(&x, &set[0], &set[1], &set[2], &labels).0
                },
                p.data(),
                1e-5,
            );
            for (g, f) in grads[k].data().iter().zip(&fd) {
                let tol = (1e-4 * g.abs().max(f.abs())).max(1e-6);
                prop_assert!((g - f).abs() <= tol, "param {k}: {g} vs {f}");
            }
        }
    }

    /// `d/dX sum(H(X) * Y) = H^T Y = -H(Y)`, row by row.
    #[test]
    fn hilbert_adjoint_on_tape(rows in 1usize..4, cols in 2usize..12, seed in prop::collection::vec(-3.0..3.0f64, 96)) {
        let x = Matrix::new(rows, cols, seed[..rows * cols].to_vec()).unwrap();
        let y = Matrix::new(rows, cols, seed[48..48 + rows * cols].to_vec()).unwrap();
        let mut t = Tape::new();
        let xv = t.param(x.clone());
        let yv = t.constant(y.clone());
        let hx = t.hilbert_rows(xv).unwrap();
        let prod = t.hadamard(hx, yv).unwrap();
        let loss = t.sum(prod);
        let g = t.backward(loss).unwrap();
        let gx = g.get(xv).unwrap();
        for r in 0..rows {
            let hy = naive_hilbert(y.row(r));
            for (c, h) in hy.iter().enumerate() {
                prop_assert!((gx.get(r, c) + h).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn backward_is_deterministic(x in matrix(3, 5), b in matrix(5, 2), a in matrix(2, 4), w in matrix(4, 1)) {
        let labels = [0.0, 1.0, 1.0];
        let first = lora_graph_loss(&x, &b, &a, &w, &labels);
        let second = lora_graph_loss(&x, &b, &a, &w, &labels);
        prop_assert_eq!(first.0.to_bits(), second.0.to_bits());
        for (p, q) in first.1.iter().zip(&second.1) {
            prop_assert!(p.data().iter().zip(q.data()).all(|(u, v)| u.to_bits() == v.to_bits()));
        }
    }
}

#[test]
fn fixed_matmul_example() {
    let a = Matrix::from_fn(4, 6, |i, j| (i * 6 + j) as f64 * 0.37 - 3.0);
    let b = Matrix::from_fn(6, 2, |i, j| (i as f64 - j as f64).sin());
    assert!(a.matmul(&b).unwrap().max_abs_diff(&naive_matmul(&a, &b)) < 1e-12);
    assert!(a.matmul(&a).is_err());
}
