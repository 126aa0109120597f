use super::{DiffError, GradientVector};

/// Handle to a value recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId(u32);

#[derive(Debug, Clone)]
enum Op {
    Param,
    Constant,
    Affine { w: NodeId, x: NodeId, b: NodeId, rows: usize, cols: usize },
    Add(NodeId, NodeId),
    Sub(NodeId, NodeId),
    Mul(NodeId, NodeId),
    Div(NodeId, NodeId),
    Scale(NodeId, f64),
    /// a + c * b
    AddScaled(NodeId, NodeId, f64),
    Offset(NodeId),
    Relu(NodeId),
    /// x with a broadcast scalar slope node for the negative branch.
    PRelu { x: NodeId, alpha: NodeId },
    Sqrt(NodeId),
    /// |x|^r elementwise, with subgradient 0 at x = 0.
    PowAbs(NodeId, f64),
    Concat2(NodeId, NodeId),
    Concat3(NodeId, NodeId, NodeId),
    Slice { x: NodeId, start: usize },
    /// Elementwise mean over a list of equal-length nodes.
    MeanMany(Vec<NodeId>),
    SumAll(NodeId),
}

/// Records a forward computation over vector values and replays it in reverse
/// to accumulate parameter gradients. Values are evaluated eagerly at node
/// creation and cached in a flat arena, so replaying the forward pass is
/// bit-exact by construction.
///
/// Tapes are single-owner during construction; independent tapes may be
/// evaluated in parallel.
#[derive(Debug, Default)]
pub struct Tape {
    ops: Vec<Op>,
    /// Prefix offsets into `vals`; node i occupies `vals[bounds[i]..bounds[i+1]]`.
    bounds: Vec<usize>,
    vals: Vec<f64>,
    /// Node ids of parameter nodes in registration order.
    param_nodes: Vec<NodeId>,
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            ops: Vec::new(),
            bounds: vec![0],
            vals: Vec::new(),
            param_nodes: Vec::new(),
        }
    }

    /// Clears all nodes but keeps allocated capacity.
    pub fn reset(&mut self) {
        self.ops.clear();
        self.bounds.clear();
        self.bounds.push(0);
        self.vals.clear();
        self.param_nodes.clear();
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    pub fn value(&self, id: NodeId) -> &[f64] {
        let i = id.0 as usize;
        &self.vals[self.bounds[i]..self.bounds[i + 1]]
    }

    pub fn value_len(&self, id: NodeId) -> usize {
        let i = id.0 as usize;
        self.bounds[i + 1] - self.bounds[i]
    }

    fn push(&mut self, op: Op, out_len: usize) -> NodeId {
        let id = NodeId(self.ops.len() as u32);
        self.ops.push(op);
        self.vals.resize(self.vals.len() + out_len, 0.0);
        self.bounds.push(self.vals.len());
        id
    }

    fn out_mut(&mut self, id: NodeId) -> &mut [f64] {
        let i = id.0 as usize;
        let (lo, hi) = (self.bounds[i], self.bounds[i + 1]);
        &mut self.vals[lo..hi]
    }

    /// Registers a parameter vector; each call appends a new slot.
    pub fn param(&mut self, values: &[f64]) -> NodeId {
        let id = self.push(Op::Param, values.len());
        self.out_mut(id).copy_from_slice(values);
        self.param_nodes.push(id);
        id
    }

    pub fn constant(&mut self, values: &[f64]) -> NodeId {
        let id = self.push(Op::Constant, values.len());
        self.out_mut(id).copy_from_slice(values);
        id
    }

    pub fn scalar(&mut self, v: f64) -> NodeId {
        self.constant(&[v])
    }

    /// `W x + b` where `w` holds a row-major `rows x cols` matrix.
    pub fn affine(&mut self, w: NodeId, rows: usize, cols: usize, x: NodeId, b: NodeId) -> NodeId {
        assert_eq!(self.value_len(w), rows * cols, "affine: weight length");
        assert_eq!(self.value_len(x), cols, "affine: input length");
        assert_eq!(self.value_len(b), rows, "affine: bias length");
        let id = self.push(Op::Affine { w, x, b, rows, cols }, rows);
        let i = id.0 as usize;
        let (wlo, xlo, blo) = (
            self.bounds[w.0 as usize],
            self.bounds[x.0 as usize],
            self.bounds[b.0 as usize],
        );
        let olo = self.bounds[i];
        for r in 0..rows {
            let mut acc = self.vals[blo + r];
            let wrow = wlo + r * cols;
            for c in 0..cols {
                acc += self.vals[wrow + c] * self.vals[xlo + c];
            }
            self.vals[olo + r] = acc;
        }
        id
    }

    fn binary(&mut self, op: Op, a: NodeId, b: NodeId, f: impl Fn(f64, f64) -> f64) -> NodeId {
        let n = self.value_len(a);
        assert_eq!(n, self.value_len(b), "elementwise op: length mismatch");
        let id = self.push(op, n);
        let (alo, blo, olo) = (
            self.bounds[a.0 as usize],
            self.bounds[b.0 as usize],
            self.bounds[id.0 as usize],
        );
        for i in 0..n {
            self.vals[olo + i] = f(self.vals[alo + i], self.vals[blo + i]);
        }
        id
    }

    pub fn add(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(Op::Add(a, b), a, b, |x, y| x + y)
    }

    pub fn sub(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(Op::Sub(a, b), a, b, |x, y| x - y)
    }

    pub fn mul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(Op::Mul(a, b), a, b, |x, y| x * y)
    }

    pub fn div(&mut self, a: NodeId, b: NodeId) -> NodeId {
        self.binary(Op::Div(a, b), a, b, |x, y| x / y)
    }

    /// `a + c * b`.
    pub fn add_scaled(&mut self, a: NodeId, b: NodeId, c: f64) -> NodeId {
        self.binary(Op::AddScaled(a, b, c), a, b, move |x, y| x + c * y)
    }

    fn unary(&mut self, op: Op, a: NodeId, f: impl Fn(f64) -> f64) -> NodeId {
        let n = self.value_len(a);
        let id = self.push(op, n);
        let (alo, olo) = (self.bounds[a.0 as usize], self.bounds[id.0 as usize]);
        for i in 0..n {
            self.vals[olo + i] = f(self.vals[alo + i]);
        }
        id
    }

    pub fn scale(&mut self, a: NodeId, c: f64) -> NodeId {
        self.unary(Op::Scale(a, c), a, move |x| c * x)
    }

    pub fn offset(&mut self, a: NodeId, c: f64) -> NodeId {
        self.unary(Op::Offset(a), a, move |x| x + c)
    }

    pub fn relu(&mut self, a: NodeId) -> NodeId {
        self.unary(Op::Relu(a), a, |x| x.max(0.0))
    }

    pub fn sqrt(&mut self, a: NodeId) -> NodeId {
        self.unary(Op::Sqrt(a), a, f64::sqrt)
    }

    pub fn pow_abs(&mut self, a: NodeId, r: f64) -> NodeId {
        self.unary(Op::PowAbs(a, r), a, move |x| x.abs().powf(r))
    }

    pub fn prelu(&mut self, x: NodeId, alpha: NodeId) -> NodeId {
        assert_eq!(self.value_len(alpha), 1, "prelu: slope must be scalar");
        let n = self.value_len(x);
        let a = self.value(alpha)[0];
        let id = self.push(Op::PRelu { x, alpha }, n);
        let (xlo, olo) = (self.bounds[x.0 as usize], self.bounds[id.0 as usize]);
        for i in 0..n {
            let v = self.vals[xlo + i];
            self.vals[olo + i] = if v > 0.0 { v } else { a * v };
        }
        id
    }

    pub fn concat2(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let (na, nb) = (self.value_len(a), self.value_len(b));
        let id = self.push(Op::Concat2(a, b), na + nb);
        let (alo, blo, olo) = (
            self.bounds[a.0 as usize],
            self.bounds[b.0 as usize],
            self.bounds[id.0 as usize],
        );
        self.vals.copy_within(alo..alo + na, olo);
        self.vals.copy_within(blo..blo + nb, olo + na);
        id
    }

    pub fn concat3(&mut self, a: NodeId, b: NodeId, c: NodeId) -> NodeId {
        let (na, nb, nc) = (self.value_len(a), self.value_len(b), self.value_len(c));
        let id = self.push(Op::Concat3(a, b, c), na + nb + nc);
        let (alo, blo, clo, olo) = (
            self.bounds[a.0 as usize],
            self.bounds[b.0 as usize],
            self.bounds[c.0 as usize],
            self.bounds[id.0 as usize],
        );
        self.vals.copy_within(alo..alo + na, olo);
        self.vals.copy_within(blo..blo + nb, olo + na);
        self.vals.copy_within(clo..clo + nc, olo + na + nb);
        id
    }

    pub fn slice(&mut self, x: NodeId, start: usize, len: usize) -> NodeId {
        assert!(start + len <= self.value_len(x), "slice out of range");
        let id = self.push(Op::Slice { x, start }, len);
        let (xlo, olo) = (self.bounds[x.0 as usize], self.bounds[id.0 as usize]);
        self.vals.copy_within(xlo + start..xlo + start + len, olo);
        id
    }

    pub fn mean_many(&mut self, xs: &[NodeId]) -> NodeId {
        assert!(!xs.is_empty(), "mean_many: empty input list");
        let n = self.value_len(xs[0]);
        for &x in xs {
            assert_eq!(self.value_len(x), n, "mean_many: length mismatch");
        }
        let id = self.push(Op::MeanMany(xs.to_vec()), n);
        let olo = self.bounds[id.0 as usize];
        let inv = 1.0 / xs.len() as f64;
        for &x in xs {
            let xlo = self.bounds[x.0 as usize];
            for i in 0..n {
                self.vals[olo + i] += self.vals[xlo + i];
            }
        }
        for i in 0..n {
            self.vals[olo + i] *= inv;
        }
        id
    }

    pub fn sum_all(&mut self, a: NodeId) -> NodeId {
        let n = self.value_len(a);
        let id = self.push(Op::SumAll(a), 1);
        let (alo, olo) = (self.bounds[a.0 as usize], self.bounds[id.0 as usize]);
        self.vals[olo] = self.vals[alo..alo + n].iter().sum();
        id
    }

    /// Reverse accumulation from a scalar root; returns the gradient with
    /// respect to every parameter slot, flattened in registration order.
    pub fn backward(&self, root: NodeId) -> Result<GradientVector, DiffError> {
        self.backward_seeded(root, 1.0)
    }

    pub fn backward_seeded(&self, root: NodeId, seed: f64) -> Result<GradientVector, DiffError> {
        if self.value_len(root) != 1 {
            return Err(DiffError::NonScalarRoot {
                len: self.value_len(root),
            });
        }
        let mut grads = vec![0.0; self.vals.len()];
        grads[self.bounds[root.0 as usize]] = seed;

        for i in (0..=root.0 as usize).rev() {
            let (glo, ghi) = (self.bounds[i], self.bounds[i + 1]);
            if grads[glo..ghi].iter().any(|g| g.is_nan()) {
                return Err(DiffError::NanInBackward { node: i });
            }
            // Split so the current node's grad chunk can be read while
            // earlier chunks are written.
            let (head, tail) = grads.split_at_mut(glo);
            let gout = &tail[..ghi - glo];
            match &self.ops[i] {
                Op::Param | Op::Constant => {}
                Op::Affine { w, x, b, rows, cols } => {
                    let (wlo, xlo, blo) = (
                        self.bounds[w.0 as usize],
                        self.bounds[x.0 as usize],
                        self.bounds[b.0 as usize],
                    );
                    for r in 0..*rows {
                        let g = gout[r];
                        if g == 0.0 {
                            continue;
                        }
                        head[blo + r] += g;
                        let wrow = wlo + r * cols;
                        let xv = self.bounds[x.0 as usize];
                        for c in 0..*cols {
                            head[wrow + c] += g * self.vals[xv + c];
                            head[xlo + c] += g * self.vals[wrow + c];
                        }
                    }
                }
                Op::Add(a, b) => {
                    accumulate(head, self.bounds[a.0 as usize], gout, 1.0);
                    accumulate(head, self.bounds[b.0 as usize], gout, 1.0);
                }
                Op::Sub(a, b) => {
                    accumulate(head, self.bounds[a.0 as usize], gout, 1.0);
                    accumulate(head, self.bounds[b.0 as usize], gout, -1.0);
                }
                Op::Mul(a, b) => {
                    let (alo, blo) = (self.bounds[a.0 as usize], self.bounds[b.0 as usize]);
                    for (j, g) in gout.iter().enumerate() {
                        head[alo + j] += g * self.vals[blo + j];
                        head[blo + j] += g * self.vals[alo + j];
                    }
                }
                Op::Div(a, b) => {
                    let (alo, blo) = (self.bounds[a.0 as usize], self.bounds[b.0 as usize]);
                    for (j, g) in gout.iter().enumerate() {
                        let bv = self.vals[blo + j];
                        head[alo + j] += g / bv;
                        head[blo + j] -= g * self.vals[alo + j] / (bv * bv);
                    }
                }
                Op::Scale(a, c) => accumulate(head, self.bounds[a.0 as usize], gout, *c),
                Op::AddScaled(a, b, c) => {
                    accumulate(head, self.bounds[a.0 as usize], gout, 1.0);
                    accumulate(head, self.bounds[b.0 as usize], gout, *c);
                }
                Op::Offset(a) => accumulate(head, self.bounds[a.0 as usize], gout, 1.0),
                Op::Relu(a) => {
                    let alo = self.bounds[a.0 as usize];
                    for (j, g) in gout.iter().enumerate() {
                        if self.vals[alo + j] > 0.0 {
                            head[alo + j] += g;
                        }
                    }
                }
                Op::PRelu { x, alpha } => {
                    let (xlo, plo) = (self.bounds[x.0 as usize], self.bounds[alpha.0 as usize]);
                    let a = self.vals[plo];
                    for (j, g) in gout.iter().enumerate() {
                        let v = self.vals[xlo + j];
                        if v > 0.0 {
                            head[xlo + j] += g;
                        } else {
                            head[xlo + j] += g * a;
                            head[plo] += g * v;
                        }
                    }
                }
                Op::Sqrt(a) => {
                    let alo = self.bounds[a.0 as usize];
                    let olo = self.bounds[i];
                    for (j, g) in gout.iter().enumerate() {
                        head[alo + j] += g * 0.5 / self.vals[olo + j];
                    }
                }
                Op::PowAbs(a, r) => {
                    let alo = self.bounds[a.0 as usize];
                    for (j, g) in gout.iter().enumerate() {
                        let v = self.vals[alo + j];
                        if v != 0.0 {
                            head[alo + j] += g * r * v.abs().powf(r - 1.0) * v.signum();
                        }
                    }
                }
                Op::Concat2(a, b) => {
                    let na = self.bounds[a.0 as usize + 1] - self.bounds[a.0 as usize];
                    accumulate(head, self.bounds[a.0 as usize], &gout[..na], 1.0);
                    accumulate(head, self.bounds[b.0 as usize], &gout[na..], 1.0);
                }
                Op::Concat3(a, b, c) => {
                    let na = self.bounds[a.0 as usize + 1] - self.bounds[a.0 as usize];
                    let nb = self.bounds[b.0 as usize + 1] - self.bounds[b.0 as usize];
                    accumulate(head, self.bounds[a.0 as usize], &gout[..na], 1.0);
                    accumulate(head, self.bounds[b.0 as usize], &gout[na..na + nb], 1.0);
                    accumulate(head, self.bounds[c.0 as usize], &gout[na + nb..], 1.0);
                }
                Op::Slice { x, start } => {
                    accumulate(head, self.bounds[x.0 as usize] + start, gout, 1.0);
                }
                Op::MeanMany(xs) => {
                    let inv = 1.0 / xs.len() as f64;
                    for &x in xs {
                        accumulate(head, self.bounds[x.0 as usize], gout, inv);
                    }
                }
                Op::SumAll(a) => {
                    let (alo, ahi) = (self.bounds[a.0 as usize], self.bounds[a.0 as usize + 1]);
                    let g = gout[0];
                    for slot in &mut head[alo..ahi] {
                        *slot += g;
                    }
                }
            }
        }

        let total: usize = self
            .param_nodes
            .iter()
            .map(|&p| self.value_len(p))
            .sum();
        let mut out = Vec::with_capacity(total);
        for &p in &self.param_nodes {
            let (lo, hi) = (self.bounds[p.0 as usize], self.bounds[p.0 as usize + 1]);
            out.extend_from_slice(&grads[lo..hi]);
        }
        Ok(GradientVector(out))
    }
}

#[inline]
fn accumulate(grads: &mut [f64], lo: usize, gout: &[f64], scale: f64) {
    for (j, g) in gout.iter().enumerate() {
        grads[lo + j] += scale * g;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_gradient() {
        // f(w) = w^2 at w = 3 -> df/dw = 6
        let mut t = Tape::new();
        let w = t.param(&[3.0]);
        let sq = t.mul(w, w);
        let g = t.backward(sq).unwrap();
        assert_eq!(g.0, vec![6.0]);
    }

    #[test]
    fn constant_gradient_is_zero() {
        let mut t = Tape::new();
        let w = t.param(&[5.0]);
        let c = t.constant(&[2.0]);
        let s = t.sum_all(c);
        let g = t.backward(s).unwrap();
        assert_eq!(g.0, vec![0.0]);
        let _ = w;
    }

    #[test]
    fn non_scalar_root_rejected() {
        let mut t = Tape::new();
        let w = t.param(&[1.0, 2.0]);
        assert!(matches!(
            t.backward(w),
            Err(DiffError::NonScalarRoot { len: 2 })
        ));
    }

    #[test]
    fn backward_deterministic() {
        let mut t = Tape::new();
        let w = t.param(&[0.3, -0.7, 1.1]);
        let r = t.relu(w);
        let s = t.sum_all(r);
        let p = t.pow_abs(s, 3.0);
        let g1 = t.backward(p).unwrap();
        let g2 = t.backward(p).unwrap();
        assert_eq!(g1, g2);
    }

    #[test]
    fn nan_reported_with_node_index() {
        let mut t = Tape::new();
        let w = t.param(&[0.0]);
        let z = t.constant(&[0.0]);
        let d = t.div(w, z); // 0/0 = NaN forward; backward hits NaN grads
        let s = t.sum_all(d);
        let err = t.backward(s).unwrap_err();
        assert!(matches!(err, DiffError::NanInBackward { .. }));
    }

    #[test]
    fn replay_reproduces_values_bit_exactly() {
        let mut t = Tape::new();
        let w = t.param(&[0.25, -0.5]);
        let c = t.constant(&[1.5, 2.5]);
        let m = t.mul(w, c);
        let v1 = t.value(m).to_vec();
        // Same construction on a fresh tape must reproduce values exactly.
        let mut t2 = Tape::new();
        let w2 = t2.param(&[0.25, -0.5]);
        let c2 = t2.constant(&[1.5, 2.5]);
        let m2 = t2.mul(w2, c2);
        assert_eq!(v1, t2.value(m2));
    }
}
