//! Convex-minus-convex splits for the eight monomial shapes that occur in
//! the cubic and quartic portfolio moments, with matching closed-form
//! gradients.
//!
//! Each monomial is written as g - h where both pieces are sums of squares
//! of convex polynomials (hence convex), except the odd diagonal cube,
//! whose trivial split is convex only on the nonnegative orthant. The
//! closed-form gradient builders are transcribed independently of the value
//! builders; the unit tests assert that they equal the formal derivatives
//! coefficient for coefficient, which all dyadic coefficients make exact in
//! floating point.

use crate::poly::SparsePolynomial;

fn mono(n: usize, pairs: &[(usize, u32)], c: f64) -> SparsePolynomial {
    SparsePolynomial::monomial(n, pairs, c).expect("variable index in range")
}

/// x_i + c
fn affine(n: usize, i: usize, c: f64) -> SparsePolynomial {
    mono(n, &[(i, 1)], 1.0)
        .add(&SparsePolynomial::constant(n, c))
        .expect("same nvars")
}

/// x_i + s * x_j
fn pair_lin(n: usize, i: usize, j: usize, s: f64) -> SparsePolynomial {
    mono(n, &[(i, 1)], 1.0)
        .add(&mono(n, &[(j, 1)], s))
        .expect("same nvars")
}

fn add(a: SparsePolynomial, b: SparsePolynomial) -> SparsePolynomial {
    a.add(&b).expect("same nvars")
}

/// Gradient vector with the listed nonzero components.
fn grad_vec(n: usize, parts: Vec<(usize, SparsePolynomial)>) -> Vec<SparsePolynomial> {
    let mut g: Vec<SparsePolynomial> = (0..n).map(|_| SparsePolynomial::zero(n)).collect();
    for (v, p) in parts {
        g[v] = p;
    }
    g
}

// x_i^3: trivial split, convex on the nonnegative orthant only.

pub fn cube_value(n: usize, i: usize) -> SparsePolynomial {
    mono(n, &[(i, 3)], 1.0)
}

pub fn cube_grad(n: usize, i: usize) -> Vec<SparsePolynomial> {
    grad_vec(n, vec![(i, mono(n, &[(i, 2)], 3.0))])
}

// x_i^2 x_k (i != k): both pieces convex everywhere.
//   g = 1/8 [ (x_i^2 + (x_k+1)^2)^2 + (x_k-1)^4 ]
//   h = 1/8 [ (x_k+1)^4 + (x_i^2 + (x_k-1)^2)^2 ]

pub fn square_lin_g(n: usize, i: usize, k: usize) -> SparsePolynomial {
    let a = add(mono(n, &[(i, 2)], 1.0), affine(n, k, 1.0).square()).square();
    let b = affine(n, k, -1.0).square().square();
    add(a, b).scale(0.125)
}

pub fn square_lin_h(n: usize, i: usize, k: usize) -> SparsePolynomial {
    let a = affine(n, k, 1.0).square().square();
    let b = add(mono(n, &[(i, 2)], 1.0), affine(n, k, -1.0).square()).square();
    add(a, b).scale(0.125)
}

pub fn square_lin_grad_g(n: usize, i: usize, k: usize) -> Vec<SparsePolynomial> {
    // e_i: (1/2) x_i (x_k^2 + 2 x_k + x_i^2 + 1)
    let gi = add(
        add(mono(n, &[(i, 1), (k, 2)], 0.5), mono(n, &[(i, 1), (k, 1)], 1.0)),
        add(mono(n, &[(i, 3)], 0.5), mono(n, &[(i, 1)], 0.5)),
    );
    // e_k: (1/2) (2 x_k^3 + x_i^2 x_k + 6 x_k + x_i^2)
    let gk = add(
        add(mono(n, &[(k, 3)], 1.0), mono(n, &[(i, 2), (k, 1)], 0.5)),
        add(mono(n, &[(k, 1)], 3.0), mono(n, &[(i, 2)], 0.5)),
    );
    grad_vec(n, vec![(i, gi), (k, gk)])
}

pub fn square_lin_grad_h(n: usize, i: usize, k: usize) -> Vec<SparsePolynomial> {
    // e_i: (1/2) x_i (x_k^2 - 2 x_k + x_i^2 + 1)
    let gi = add(
        add(mono(n, &[(i, 1), (k, 2)], 0.5), mono(n, &[(i, 1), (k, 1)], -1.0)),
        add(mono(n, &[(i, 3)], 0.5), mono(n, &[(i, 1)], 0.5)),
    );
    // e_k: (1/2) (2 x_k^3 + x_i^2 x_k + 6 x_k - x_i^2)
    let gk = add(
        add(mono(n, &[(k, 3)], 1.0), mono(n, &[(i, 2), (k, 1)], 0.5)),
        add(mono(n, &[(k, 1)], 3.0), mono(n, &[(i, 2)], -0.5)),
    );
    grad_vec(n, vec![(i, gi), (k, gk)])
}

// x_i x_j x_k (i < j < k): both pieces convex everywhere.
//   g = 1/32 [ ((x_i+x_j)^2 + (x_k+1)^2)^2 + ((x_i-x_j)^2 + (x_k-1)^2)^2 ]
//   h = 1/32 [ ((x_i+x_j)^2 + (x_k-1)^2)^2 + ((x_i-x_j)^2 + (x_k+1)^2)^2 ]

pub fn triple_g(n: usize, i: usize, j: usize, k: usize) -> SparsePolynomial {
    let a = add(pair_lin(n, i, j, 1.0).square(), affine(n, k, 1.0).square()).square();
    let b = add(pair_lin(n, i, j, -1.0).square(), affine(n, k, -1.0).square()).square();
    add(a, b).scale(1.0 / 32.0)
}

pub fn triple_h(n: usize, i: usize, j: usize, k: usize) -> SparsePolynomial {
    let a = add(pair_lin(n, i, j, 1.0).square(), affine(n, k, -1.0).square()).square();
    let b = add(pair_lin(n, i, j, -1.0).square(), affine(n, k, 1.0).square()).square();
    add(a, b).scale(1.0 / 32.0)
}

/// Shared shape of the triple-product gradients; `s` = +1 selects the g
/// piece, -1 the h piece (the sign of every cross term with two factors).
fn triple_grad(n: usize, i: usize, j: usize, k: usize, s: f64) -> Vec<SparsePolynomial> {
    // e_i: (1/4) (x_i x_k^2 + s 2 x_j x_k + 3 x_i x_j^2 + x_i^3 + x_i)
    let gi = add(
        add(
            mono(n, &[(i, 1), (k, 2)], 0.25),
            mono(n, &[(j, 1), (k, 1)], s * 0.5),
        ),
        add(
            add(mono(n, &[(i, 1), (j, 2)], 0.75), mono(n, &[(i, 3)], 0.25)),
            mono(n, &[(i, 1)], 0.25),
        ),
    );
    // e_j: (1/4) (x_j x_k^2 + s 2 x_i x_k + x_j^3 + 3 x_i^2 x_j + x_j)
    let gj = add(
        add(
            mono(n, &[(j, 1), (k, 2)], 0.25),
            mono(n, &[(i, 1), (k, 1)], s * 0.5),
        ),
        add(
            add(mono(n, &[(j, 3)], 0.25), mono(n, &[(i, 2), (j, 1)], 0.75)),
            mono(n, &[(j, 1)], 0.25),
        ),
    );
    // e_k: (1/4) (x_k^3 + x_j^2 x_k + x_i^2 x_k + 3 x_k + s 2 x_i x_j)
    let gk = add(
        add(
            mono(n, &[(k, 3)], 0.25),
            mono(n, &[(j, 2), (k, 1)], 0.25),
        ),
        add(
            add(mono(n, &[(i, 2), (k, 1)], 0.25), mono(n, &[(k, 1)], 0.75)),
            mono(n, &[(i, 1), (j, 1)], s * 0.5),
        ),
    );
    grad_vec(n, vec![(i, gi), (j, gj), (k, gk)])
}

pub fn triple_grad_g(n: usize, i: usize, j: usize, k: usize) -> Vec<SparsePolynomial> {
    triple_grad(n, i, j, k, 1.0)
}

pub fn triple_grad_h(n: usize, i: usize, j: usize, k: usize) -> Vec<SparsePolynomial> {
    triple_grad(n, i, j, k, -1.0)
}

// x_i^4: trivial split, convex everywhere.

pub fn quartic_value(n: usize, i: usize) -> SparsePolynomial {
    mono(n, &[(i, 4)], 1.0)
}

pub fn quartic_grad(n: usize, i: usize) -> Vec<SparsePolynomial> {
    grad_vec(n, vec![(i, mono(n, &[(i, 3)], 4.0))])
}

// x_i^2 x_k^2 (i < k):
//   g = 1/2 (x_i^2 + x_k^2)^2
//   h = 1/2 (x_i^4 + x_k^4)

pub fn square_square_g(n: usize, i: usize, k: usize) -> SparsePolynomial {
    add(mono(n, &[(i, 2)], 1.0), mono(n, &[(k, 2)], 1.0))
        .square()
        .scale(0.5)
}

pub fn square_square_h(n: usize, i: usize, k: usize) -> SparsePolynomial {
    add(mono(n, &[(i, 4)], 0.5), mono(n, &[(k, 4)], 0.5))
}

pub fn square_square_grad_g(n: usize, i: usize, k: usize) -> Vec<SparsePolynomial> {
    // 2 (x_k^2 + x_i^2) (x_i e_i + x_k e_k)
    let gi = add(
        mono(n, &[(i, 1), (k, 2)], 2.0),
        mono(n, &[(i, 3)], 2.0),
    );
    let gk = add(
        mono(n, &[(k, 3)], 2.0),
        mono(n, &[(i, 2), (k, 1)], 2.0),
    );
    grad_vec(n, vec![(i, gi), (k, gk)])
}

pub fn square_square_grad_h(n: usize, i: usize, k: usize) -> Vec<SparsePolynomial> {
    grad_vec(
        n,
        vec![
            (i, mono(n, &[(i, 3)], 2.0)),
            (k, mono(n, &[(k, 3)], 2.0)),
        ],
    )
}

// x_i^3 x_k (i != k):
//   g = 1/8 [ (x_i^2 + (x_i+x_k)^2)^2 + (x_i-x_k)^4 ]
//   h = 1/8 [ (x_i+x_k)^4 + (x_i^2 + (x_i-x_k)^2)^2 ]

pub fn cube_lin_g(n: usize, i: usize, k: usize) -> SparsePolynomial {
    let a = add(mono(n, &[(i, 2)], 1.0), pair_lin(n, i, k, 1.0).square()).square();
    let b = pair_lin(n, i, k, -1.0).square().square();
    add(a, b).scale(0.125)
}

pub fn cube_lin_h(n: usize, i: usize, k: usize) -> SparsePolynomial {
    let a = pair_lin(n, i, k, 1.0).square().square();
    let b = add(mono(n, &[(i, 2)], 1.0), pair_lin(n, i, k, -1.0).square()).square();
    add(a, b).scale(0.125)
}

fn cube_lin_grad(n: usize, i: usize, k: usize, s: f64) -> Vec<SparsePolynomial> {
    // e_i: (1/2) x_i (7 x_k^2 + s 3 x_i x_k + 5 x_i^2)
    let gi = add(
        add(
            mono(n, &[(i, 1), (k, 2)], 3.5),
            mono(n, &[(i, 2), (k, 1)], s * 1.5),
        ),
        mono(n, &[(i, 3)], 2.5),
    );
    // e_k: (1/2) (2 x_k^3 + 7 x_i^2 x_k + s x_i^3)
    let gk = add(
        add(
            mono(n, &[(k, 3)], 1.0),
            mono(n, &[(i, 2), (k, 1)], 3.5),
        ),
        mono(n, &[(i, 3)], s * 0.5),
    );
    grad_vec(n, vec![(i, gi), (k, gk)])
}

pub fn cube_lin_grad_g(n: usize, i: usize, k: usize) -> Vec<SparsePolynomial> {
    cube_lin_grad(n, i, k, 1.0)
}

pub fn cube_lin_grad_h(n: usize, i: usize, k: usize) -> Vec<SparsePolynomial> {
    cube_lin_grad(n, i, k, -1.0)
}

// x_i^2 x_j x_k (j < k, both != i):
//   g = 1/8 [ (x_i^2 + (x_j+x_k)^2)^2 + (x_j-x_k)^4 ]
//   h = 1/8 [ (x_j+x_k)^4 + (x_i^2 + (x_j-x_k)^2)^2 ]

pub fn square_bilin_g(n: usize, i: usize, j: usize, k: usize) -> SparsePolynomial {
    let a = add(mono(n, &[(i, 2)], 1.0), pair_lin(n, j, k, 1.0).square()).square();
    let b = pair_lin(n, j, k, -1.0).square().square();
    add(a, b).scale(0.125)
}

pub fn square_bilin_h(n: usize, i: usize, j: usize, k: usize) -> SparsePolynomial {
    let a = pair_lin(n, j, k, 1.0).square().square();
    let b = add(mono(n, &[(i, 2)], 1.0), pair_lin(n, j, k, -1.0).square()).square();
    add(a, b).scale(0.125)
}

fn square_bilin_grad(n: usize, i: usize, j: usize, k: usize, s: f64) -> Vec<SparsePolynomial> {
    // e_i: (1/2) x_i (x_k^2 + s 2 x_j x_k + x_j^2 + x_i^2)
    let gi = add(
        add(
            mono(n, &[(i, 1), (k, 2)], 0.5),
            mono(n, &[(i, 1), (j, 1), (k, 1)], s * 1.0),
        ),
        add(
            mono(n, &[(i, 1), (j, 2)], 0.5),
            mono(n, &[(i, 3)], 0.5),
        ),
    );
    // e_j: (1/2) (6 x_j x_k^2 + s x_i^2 x_k + 2 x_j^3 + x_i^2 x_j)
    let gj = add(
        add(
            mono(n, &[(j, 1), (k, 2)], 3.0),
            mono(n, &[(i, 2), (k, 1)], s * 0.5),
        ),
        add(
            mono(n, &[(j, 3)], 1.0),
            mono(n, &[(i, 2), (j, 1)], 0.5),
        ),
    );
    // e_k: (1/2) (2 x_k^3 + 6 x_j^2 x_k + x_i^2 x_k + s x_i^2 x_j)
    let gk = add(
        add(
            mono(n, &[(k, 3)], 1.0),
            mono(n, &[(j, 2), (k, 1)], 3.0),
        ),
        add(
            mono(n, &[(i, 2), (k, 1)], 0.5),
            mono(n, &[(i, 2), (j, 1)], s * 0.5),
        ),
    );
    grad_vec(n, vec![(i, gi), (j, gj), (k, gk)])
}

pub fn square_bilin_grad_g(n: usize, i: usize, j: usize, k: usize) -> Vec<SparsePolynomial> {
    square_bilin_grad(n, i, j, k, 1.0)
}

pub fn square_bilin_grad_h(n: usize, i: usize, j: usize, k: usize) -> Vec<SparsePolynomial> {
    square_bilin_grad(n, i, j, k, -1.0)
}

// x_i x_j x_k x_l (i < j < k < l):
//   g = 1/32 [ ((x_i+x_j)^2 + (x_k+x_l)^2)^2 + ((x_i-x_j)^2 + (x_k-x_l)^2)^2 ]
//   h = 1/32 [ ((x_i+x_j)^2 + (x_k-x_l)^2)^2 + ((x_i-x_j)^2 + (x_k+x_l)^2)^2 ]

pub fn quad_g(n: usize, i: usize, j: usize, k: usize, l: usize) -> SparsePolynomial {
    let a = add(pair_lin(n, i, j, 1.0).square(), pair_lin(n, k, l, 1.0).square()).square();
    let b = add(pair_lin(n, i, j, -1.0).square(), pair_lin(n, k, l, -1.0).square()).square();
    add(a, b).scale(1.0 / 32.0)
}

pub fn quad_h(n: usize, i: usize, j: usize, k: usize, l: usize) -> SparsePolynomial {
    let a = add(pair_lin(n, i, j, 1.0).square(), pair_lin(n, k, l, -1.0).square()).square();
    let b = add(pair_lin(n, i, j, -1.0).square(), pair_lin(n, k, l, 1.0).square()).square();
    add(a, b).scale(1.0 / 32.0)
}

fn quad_grad(n: usize, i: usize, j: usize, k: usize, l: usize, s: f64) -> Vec<SparsePolynomial> {
    // e_i: (1/4) (x_i x_l^2 + s 2 x_j x_k x_l + x_i x_k^2 + 3 x_i x_j^2 + x_i^3)
    let gi = add(
        add(
            mono(n, &[(i, 1), (l, 2)], 0.25),
            mono(n, &[(j, 1), (k, 1), (l, 1)], s * 0.5),
        ),
        add(
            add(
                mono(n, &[(i, 1), (k, 2)], 0.25),
                mono(n, &[(i, 1), (j, 2)], 0.75),
            ),
            mono(n, &[(i, 3)], 0.25),
        ),
    );
    // e_j: (1/4) (x_j x_l^2 + s 2 x_i x_k x_l + x_j x_k^2 + x_j^3 + 3 x_i^2 x_j)
    let gj = add(
        add(
            mono(n, &[(j, 1), (l, 2)], 0.25),
            mono(n, &[(i, 1), (k, 1), (l, 1)], s * 0.5),
        ),
        add(
            add(
                mono(n, &[(j, 1), (k, 2)], 0.25),
                mono(n, &[(j, 3)], 0.25),
            ),
            mono(n, &[(i, 2), (j, 1)], 0.75),
        ),
    );
    // e_k: (1/4) (3 x_k x_l^2 + s 2 x_i x_j x_l + x_k^3 + x_j^2 x_k + x_i^2 x_k)
    let gk = add(
        add(
            mono(n, &[(k, 1), (l, 2)], 0.75),
            mono(n, &[(i, 1), (j, 1), (l, 1)], s * 0.5),
        ),
        add(
            add(
                mono(n, &[(k, 3)], 0.25),
                mono(n, &[(j, 2), (k, 1)], 0.25),
            ),
            mono(n, &[(i, 2), (k, 1)], 0.25),
        ),
    );
    // e_l: (1/4) (x_l^3 + 3 x_k^2 x_l + x_j^2 x_l + x_i^2 x_l + s 2 x_i x_j x_k)
    let gl = add(
        add(
            mono(n, &[(l, 3)], 0.25),
            mono(n, &[(k, 2), (l, 1)], 0.75),
        ),
        add(
            add(
                mono(n, &[(j, 2), (l, 1)], 0.25),
                mono(n, &[(i, 2), (l, 1)], 0.25),
            ),
            mono(n, &[(i, 1), (j, 1), (k, 1)], s * 0.5),
        ),
    );
    grad_vec(n, vec![(i, gi), (j, gj), (k, gk), (l, gl)])
}

pub fn quad_grad_g(n: usize, i: usize, j: usize, k: usize, l: usize) -> Vec<SparsePolynomial> {
    quad_grad(n, i, j, k, l, 1.0)
}

pub fn quad_grad_h(n: usize, i: usize, j: usize, k: usize, l: usize) -> Vec<SparsePolynomial> {
    quad_grad(n, i, j, k, l, -1.0)
}
