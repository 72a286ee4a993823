//! Truncated multivariate Taylor polynomials ("jets") for forward-mode
//! differentiation.
//!
//! A jet of order `K` over `m` variables stores every Taylor coefficient of
//! total degree `≤ K`. Differentiating with respect to one variable yields a
//! jet of order `K - 1`, which is what the backstepping recursion needs: each
//! virtual control depends on partial derivatives of the previous one.
//!
//! Monomials are laid out in graded order, so the coefficients of an order
//! `K'` jet are a prefix of the order `K ≥ K'` layout. Binary operations on
//! jets of different orders truncate to the lower order.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::{Arc, Mutex, OnceLock};

pub struct JetSpace {
    nvars: usize,
    order: usize,
    exponents: Vec<Vec<u8>>,
    /// `(a, b, a·b)` index triples for every product that stays within `order`.
    products: Vec<(u32, u32, u32)>,
    /// Per variable: `(target index in lower space, source index, factor)`.
    derivatives: Vec<Vec<(u32, u32, f64)>>,
    lower: Option<Arc<JetSpace>>,
}

impl fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JetSpace")
            .field("nvars", &self.nvars)
            .field("order", &self.order)
            .finish()
    }
}

fn graded_exponents(nvars: usize, order: usize) -> Vec<Vec<u8>> {
    fn fill(var: usize, remaining: usize, cur: &mut Vec<u8>, out: &mut Vec<Vec<u8>>) {
        if var + 1 == cur.len() {
            cur[var] = remaining as u8;
            out.push(cur.clone());
            return;
        }
        for e in (0..=remaining).rev() {
            cur[var] = e as u8;
            fill(var + 1, remaining - e, cur, out);
        }
        cur[var] = 0;
    }
    let mut out = vec![vec![0u8; nvars]];
    if nvars == 0 {
        return out;
    }
    let mut cur = vec![0u8; nvars];
    for degree in 1..=order {
        fill(0, degree, &mut cur, &mut out);
    }
    out
}

impl JetSpace {
    fn build(nvars: usize, order: usize, lower: Option<Arc<JetSpace>>) -> Self {
        let exponents = graded_exponents(nvars, order);
        let lookup: HashMap<&[u8], usize> = exponents
            .iter()
            .enumerate()
            .map(|(i, e)| (e.as_slice(), i))
            .collect();
        let degree = |e: &[u8]| e.iter().map(|&d| d as usize).sum::<usize>();

        let mut products = Vec::new();
        for (a, ea) in exponents.iter().enumerate() {
            let da = degree(ea);
            for (b, eb) in exponents.iter().enumerate() {
                if da + degree(eb) > order {
                    continue;
                }
                let sum: Vec<u8> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
                products.push((a as u32, b as u32, lookup[sum.as_slice()] as u32));
            }
        }

        let mut derivatives = vec![Vec::new(); nvars];
        if let Some(low) = &lower {
            for (v, list) in derivatives.iter_mut().enumerate() {
                for (t, e) in low.exponents.iter().enumerate() {
                    let mut up = e.clone();
                    up[v] += 1;
                    let src = lookup[up.as_slice()];
                    list.push((t as u32, src as u32, up[v] as f64));
                }
            }
        }

        JetSpace {
            nvars,
            order,
            exponents,
            products,
            derivatives,
            lower,
        }
    }

    /// Shared space for `nvars` variables truncated at `order`.
    pub fn get(nvars: usize, order: usize) -> Arc<JetSpace> {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<JetSpace>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().expect("jet space cache poisoned");
        let mut prev: Option<Arc<JetSpace>> = None;
        for k in 0..=order {
            let space = map
                .entry((nvars, k))
                .or_insert_with(|| Arc::new(JetSpace::build(nvars, k, prev.clone())))
                .clone();
            prev = Some(space);
        }
        prev.expect("order range is non-empty")
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }
}

#[derive(Clone)]
pub struct Jet {
    space: Arc<JetSpace>,
    coef: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("order", &self.space.order)
            .field("coef", &self.coef)
            .finish()
    }
}

impl Jet {
    pub fn constant(space: &Arc<JetSpace>, value: f64) -> Self {
        let mut coef = vec![0.0; space.len()];
        coef[0] = value;
        Jet {
            space: space.clone(),
            coef,
        }
    }

    /// The independent variable `index` evaluated at `value`.
    pub fn variable(space: &Arc<JetSpace>, index: usize, value: f64) -> Self {
        assert!(index < space.nvars, "variable index out of range");
        let mut jet = Jet::constant(space, value);
        if space.order >= 1 {
            jet.coef[1 + index] = 1.0;
        }
        jet
    }

    /// A bare number, usable with any jet.
    pub fn scalar(value: f64) -> Self {
        Jet::constant(&JetSpace::get(0, 0), value)
    }

    /// A constant living in the same space as `self`.
    pub fn lift(&self, value: f64) -> Self {
        Jet::constant(&self.space, value)
    }

    pub fn value(&self) -> f64 {
        self.coef[0]
    }

    pub fn order(&self) -> usize {
        self.space.order
    }

    pub fn space(&self) -> &Arc<JetSpace> {
        &self.space
    }

    /// First-order partial with respect to variable `var`, evaluated at the
    /// expansion point.
    pub fn gradient_entry(&self, var: usize) -> f64 {
        if self.space.order == 0 || self.space.nvars == 0 {
            0.0
        } else {
            self.coef[1 + var]
        }
    }

    /// `∂/∂var` as a jet one order lower.
    pub fn partial(&self, var: usize) -> Jet {
        match &self.space.lower {
            None => self.lift(0.0),
            Some(low) => {
                let mut coef = vec![0.0; low.len()];
                for &(t, s, f) in &self.space.derivatives[var] {
                    coef[t as usize] = f * self.coef[s as usize];
                }
                Jet {
                    space: low.clone(),
                    coef,
                }
            }
        }
    }

    /// Drops coefficients above `order`.
    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.space.order {
            return self.clone();
        }
        let space = JetSpace::get(self.space.nvars, order);
        Jet {
            coef: self.coef[..space.len()].to_vec(),
            space,
        }
    }

    fn aligned<'a>(
        a: &'a Jet,
        b: &'a Jet,
    ) -> (std::borrow::Cow<'a, Jet>, std::borrow::Cow<'a, Jet>) {
        use std::borrow::Cow;
        if Arc::ptr_eq(&a.space, &b.space) {
            return (Cow::Borrowed(a), Cow::Borrowed(b));
        }
        // Nullary scalars adopt the other operand's space.
        if a.space.nvars == 0 {
            return (Cow::Owned(b.lift(a.value())), Cow::Borrowed(b));
        }
        if b.space.nvars == 0 {
            return (Cow::Borrowed(a), Cow::Owned(a.lift(b.value())));
        }
        assert_eq!(
            a.space.nvars, b.space.nvars,
            "jets over different variable sets"
        );
        let order = a.space.order.min(b.space.order);
        (Cow::Owned(a.truncate(order)), Cow::Owned(b.truncate(order)))
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        let (a, b) = Jet::aligned(self, other);
        Jet {
            space: a.space.clone(),
            coef: a.coef.iter().zip(&b.coef).map(|(&x, &y)| f(x, y)).collect(),
        }
    }

    fn product(&self, other: &Jet) -> Jet {
        let (a, b) = Jet::aligned(self, other);
        let mut coef = vec![0.0; a.coef.len()];
        for &(i, j, k) in &a.space.products {
            coef[k as usize] += a.coef[i as usize] * b.coef[j as usize];
        }
        Jet {
            space: a.space.clone(),
            coef,
        }
    }

    /// Composes a univariate function given its derivatives at the expansion
    /// point: `derivs[k] = f⁽ᵏ⁾(value)` for `k = 0..=order`.
    fn compose(&self, derivs: &[f64]) -> Jet {
        let order = self.space.order;
        let mut h = self.clone();
        h.coef[0] = 0.0;
        let mut factorial = (1..=order).map(|k| k as f64).product::<f64>();
        let mut acc = self.lift(derivs[order] / factorial);
        for k in (0..order).rev() {
            factorial /= (k + 1) as f64;
            acc = &(&acc * &h) + derivs[k] / factorial;
        }
        acc
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [s, c, -s, -c];
        let derivs: Vec<f64> = (0..=self.order()).map(|k| cycle[k % 4]).collect();
        self.compose(&derivs)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        let cycle = [c, -s, -c, s];
        let derivs: Vec<f64> = (0..=self.order()).map(|k| cycle[k % 4]).collect();
        self.compose(&derivs)
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        self.compose(&vec![e; self.order() + 1])
    }

    pub fn recip(&self) -> Jet {
        let v = self.value();
        let mut derivs = Vec::with_capacity(self.order() + 1);
        let mut d = 1.0 / v;
        for k in 0..=self.order() {
            derivs.push(d);
            d *= -((k + 1) as f64) / v;
        }
        self.compose(&derivs)
    }

    pub fn powi(&self, n: u32) -> Jet {
        (0..n).fold(self.lift(1.0), |acc, _| &acc * self)
    }

    pub fn is_finite(&self) -> bool {
        self.coef.iter().all(|c| c.is_finite())
    }
}

macro_rules! jet_binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl $trait<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                let f: fn(&Jet, &Jet) -> Jet = $body;
                f(self, rhs)
            }
        }
        impl $trait<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $trait<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

jet_binop!(Add, add, |a, b| a.zip_with(b, |x, y| x + y));
jet_binop!(Sub, sub, |a, b| a.zip_with(b, |x, y| x - y));
jet_binop!(Mul, mul, |a, b| a.product(b));

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let mut out = self.clone();
        out.coef[0] += rhs;
        out
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.coef[0] += rhs;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: f64) -> Jet {
        self.coef[0] -= rhs;
        self
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        Jet {
            space: self.space.clone(),
            coef: self.coef.iter().map(|c| c * rhs).collect(),
        }
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, rhs: f64) -> Jet {
        self.coef.iter_mut().for_each(|c| *c *= rhs);
        self
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * -1.0
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * -1.0
    }
}

/// `Σ a_k · b_k`.
pub fn dot(a: &[Jet], b: &[Jet]) -> Jet {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| x * y)
        .reduce(|acc, t| acc + t)
        .unwrap_or_else(|| Jet::scalar(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn graded_layout_is_prefix_stable() {
        let lo = graded_exponents(3, 1);
        let hi = graded_exponents(3, 3);
        assert_eq!(&hi[..lo.len()], &lo[..]);
        // C(3 + 3, 3)
        assert_eq!(hi.len(), 20);
    }

    #[test]
    fn polynomial_partials_are_exact() {
        // f(x, y) = x² y + 3 y at (2, 5)
        let space = JetSpace::get(2, 2);
        let x = Jet::variable(&space, 0, 2.0);
        let y = Jet::variable(&space, 1, 5.0);
        let f = &(&x * &x) * &y + &y * 3.0;
        assert_eq!(f.value(), 35.0);
        assert_eq!(f.gradient_entry(0), 20.0);
        assert_eq!(f.gradient_entry(1), 7.0);
        let fx = f.partial(0);
        assert_eq!(fx.value(), 20.0);
        assert_eq!(fx.gradient_entry(0), 10.0);
        assert_eq!(fx.gradient_entry(1), 4.0);
        let fxy = fx.partial(1);
        assert_eq!(fxy.order(), 0);
        assert_eq!(fxy.value(), 4.0);
    }

    #[test]
    fn transcendental_second_derivatives() {
        let space = JetSpace::get(1, 3);
        let x = Jet::variable(&space, 0, 0.7);
        let s = x.sin();
        let d2 = s.partial(0).partial(0);
        assert!((d2.value() + 0.7f64.sin()).abs() < 1e-15);
        let d3 = s.partial(0).partial(0).partial(0);
        assert!((d3.value() + 0.7f64.cos()).abs() < 1e-15);
        let r = x.recip().partial(0).partial(0);
        assert!((r.value() - 2.0 / 0.7f64.powi(3)).abs() < 1e-12);
        let e = x.exp().partial(0);
        assert!((e.value() - 0.7f64.exp()).abs() < 1e-15);
        let c = x.cos().partial(0);
        assert!((c.value() + 0.7f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn mixed_orders_truncate() {
        let hi = JetSpace::get(2, 2);
        let x = Jet::variable(&hi, 0, 1.0);
        let dx = (&x * &x).partial(0);
        let sum = &x + &dx;
        assert_eq!(sum.order(), 1);
        assert_eq!(sum.value(), 3.0);
        assert_eq!(sum.gradient_entry(0), 3.0);
        assert_eq!((Jet::scalar(2.0) * &x).gradient_entry(0), 2.0);
    }
}
