//! Exact polynomial algebra for phase-space symbols of the curved strip.
//!
//! Symbols are polynomials in the small parameter `eps = 1/beta`, the
//! scaled normal coordinate `U`, the momentum `k` and the curvature
//! derivatives `κ, κ', …, κ''''`, with complex rational coefficients.
//! Operator products use the left (Kohn-Nirenberg) composition rule.

use num_complex::{Complex, Complex64};
use num_rational::Ratio;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::BTreeMap;
use std::fmt;

pub type Coeff = Complex<Ratio<i64>>;

pub const KAPPA_DERIVS: usize = 5;
const EPS: usize = 0;
const U: usize = 1;
const K: usize = 2;
const KAPPA0: usize = 3;
const SLOTS: usize = 3 + KAPPA_DERIVS;

/// Exponents of `eps, U, k, κ, κ', …`.
pub type Monomial = [u8; SLOTS];

fn rational(num: i64, den: i64) -> Coeff {
    Complex::new(Ratio::new(num, den), Ratio::zero())
}

fn imaginary(num: i64, den: i64) -> Coeff {
    Complex::new(Ratio::zero(), Ratio::new(num, den))
}

#[derive(Clone, PartialEq, Eq, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, Coeff>,
}

impl Poly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Coeff) -> Self {
        Self::term(c, [0; SLOTS])
    }

    pub fn term(c: Coeff, mono: Monomial) -> Self {
        let mut p = Self::zero();
        if !c.is_zero() {
            p.terms.insert(mono, c);
        }
        p
    }

    fn var(slot: usize) -> Self {
        let mut m = [0; SLOTS];
        m[slot] = 1;
        Self::term(Coeff::one(), m)
    }

    pub fn eps() -> Self {
        Self::var(EPS)
    }

    pub fn u() -> Self {
        Self::var(U)
    }

    pub fn k() -> Self {
        Self::var(K)
    }

    /// `d^order κ / ds^order`.
    pub fn kappa(order: usize) -> Self {
        assert!(order < KAPPA_DERIVS, "curvature derivative order {order} not tracked");
        Self::var(KAPPA0 + order)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Coeff)> {
        self.terms.iter()
    }

    fn accumulate(&mut self, mono: Monomial, c: Coeff) {
        let entry = self.terms.entry(mono).or_insert_with(Coeff::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&mono);
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.accumulate(*m, *c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(rational(-1, 1)))
    }

    pub fn scale(&self, c: Coeff) -> Self {
        let mut out = Self::zero();
        for (m, v) in &self.terms {
            out.accumulate(*m, *v * c);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let mut m = *ma;
                for i in 0..SLOTS {
                    m[i] += mb[i];
                }
                out.accumulate(m, *ca * *cb);
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Self {
        (0..e).fold(Self::constant(Coeff::one()), |acc, _| acc.mul(self))
    }

    /// Drops every term of order above `eps^order`.
    pub fn truncate(&self, order: u8) -> Self {
        Self {
            terms: self.terms.iter().filter(|(m, _)| m[EPS] <= order).map(|(m, c)| (*m, *c)).collect(),
        }
    }

    pub fn max_eps_order(&self) -> u8 {
        self.terms.keys().map(|m| m[EPS]).max().unwrap_or(0)
    }

    /// Coefficient of `eps^order`, as a polynomial free of `eps`.
    pub fn eps_coefficient(&self, order: u8) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            if m[EPS] == order {
                let mut m = *m;
                m[EPS] = 0;
                out.accumulate(m, *c);
            }
        }
        out
    }

    fn partial(&self, slot: usize) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            if m[slot] > 0 {
                let mut d = *m;
                d[slot] -= 1;
                out.accumulate(d, *c * rational(m[slot] as i64, 1));
            }
        }
        out
    }

    pub fn d_dk(&self) -> Self {
        self.partial(K)
    }

    pub fn d_du(&self) -> Self {
        self.partial(U)
    }

    /// Total derivative along the boundary: `κ^(i) -> κ^(i+1)`.
    pub fn d_ds(&self) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            for i in 0..KAPPA_DERIVS {
                let e = m[KAPPA0 + i];
                if e == 0 {
                    continue;
                }
                assert!(i + 1 < KAPPA_DERIVS, "curvature derivative order overflow");
                let mut d = *m;
                d[KAPPA0 + i] -= 1;
                d[KAPPA0 + i + 1] += 1;
                out.accumulate(d, *c * rational(e as i64, 1));
            }
        }
        out
    }

    fn repeat(&self, times: usize, f: impl Fn(&Self) -> Self) -> Self {
        (0..times).fold(self.clone(), |acc, _| f(&acc))
    }

    /// Symbol of `op(self) op(other)` through `eps^order`.
    pub fn compose(&self, other: &Self, order: u8) -> Self {
        let mut out = Self::zero();
        let mut factorial = 1i64;
        for l in 0..=order as usize {
            if l > 0 {
                factorial *= l as i64;
            }
            // eps^l / (i^l l!)
            let phase = match l % 4 {
                0 => rational(1, factorial),
                1 => imaginary(-1, factorial),
                2 => rational(-1, factorial),
                _ => imaginary(1, factorial),
            };
            let left = self.repeat(l, Poly::d_dk);
            if left.is_zero() {
                break;
            }
            let right = other.repeat(l, Poly::d_ds);
            let term = left.mul(&right).mul(&Self::eps().pow(l as u32)).scale(phase);
            out = out.add(&term.truncate(order));
        }
        out.truncate(order)
    }

    /// Weyl symbol of the operator whose left symbol is `self`.
    pub fn left_to_weyl(&self, order: u8) -> Self {
        let mut out = Self::zero();
        let mut term = self.clone();
        let mut factorial = 1i64;
        for l in 0..=order as usize {
            if l > 0 {
                factorial *= l as i64;
                term = term.d_dk().d_ds();
            }
            if term.is_zero() {
                break;
            }
            // (i eps / 2)^l / l!
            let den = factorial * (1i64 << l);
            let phase = match l % 4 {
                0 => rational(1, den),
                1 => imaginary(1, den),
                2 => rational(-1, den),
                _ => imaginary(-1, den),
            };
            out = out.add(&term.mul(&Self::eps().pow(l as u32)).scale(phase).truncate(order));
        }
        out
    }

    /// Splits an `eps`-free polynomial by powers of `k`.
    pub fn k_coefficients(&self) -> Vec<Self> {
        let top = self.terms.keys().map(|m| m[K]).max().unwrap_or(0) as usize;
        let mut out = vec![Self::zero(); top + 1];
        for (m, c) in &self.terms {
            let mut r = *m;
            r[K] = 0;
            out[m[K] as usize].accumulate(r, *c);
        }
        out
    }

    /// Numeric value; `kappa[i]` is the `i`-th curvature derivative, missing
    /// entries count as zero.
    pub fn evaluate(&self, eps: f64, u: f64, k: f64, kappa: &[f64]) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (m, c) in &self.terms {
            let mut v = powi(eps, m[EPS]) * powi(u, m[U]) * powi(k, m[K]);
            for i in 0..KAPPA_DERIVS {
                if m[KAPPA0 + i] > 0 {
                    v *= powi(kappa.get(i).copied().unwrap_or(0.0), m[KAPPA0 + i]);
                }
            }
            acc += to_complex(c) * v;
        }
        acc
    }

    /// Groups terms by their curvature factor `κ^a κ'^b …`, returning the
    /// cofactor polynomials.
    pub fn kappa_sectors(&self) -> BTreeMap<[u8; KAPPA_DERIVS], Poly> {
        let mut out: BTreeMap<[u8; KAPPA_DERIVS], Poly> = BTreeMap::new();
        for (m, c) in &self.terms {
            let key = Self::kappa_exponents(m);
            let mut r = *m;
            r[KAPPA0..].iter_mut().for_each(|e| *e = 0);
            out.entry(key).or_default().accumulate(r, *c);
        }
        out
    }

    /// Scaling weight of a monomial: one per power of `κ` plus one per
    /// `s`-derivative carried by it.
    pub fn curvature_weight(mono: &Monomial) -> u32 {
        (0..KAPPA_DERIVS).map(|i| (i as u32 + 1) * mono[KAPPA0 + i] as u32).sum()
    }

    pub fn eps_power(mono: &Monomial) -> u8 {
        mono[EPS]
    }

    pub fn kappa_exponents(mono: &Monomial) -> [u8; KAPPA_DERIVS] {
        let mut e = [0; KAPPA_DERIVS];
        e.copy_from_slice(&mono[KAPPA0..]);
        e
    }

    pub fn u_power(mono: &Monomial) -> u8 {
        mono[U]
    }

    pub fn k_power(mono: &Monomial) -> u8 {
        mono[K]
    }
}

fn powi(x: f64, e: u8) -> f64 {
    x.powi(e as i32)
}

pub fn to_complex(c: &Coeff) -> Complex64 {
    Complex64::new(
        c.re.to_f64().expect("finite coefficient"),
        c.im.to_f64().expect("finite coefficient"),
    )
}

impl fmt::Debug for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for Poly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let names = ["eps", "U", "k", "κ", "κ'", "κ''", "κ'''", "κ''''"];
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({}", c.re)?;
            if !c.im.is_zero() {
                write!(f, "{:+}i", c.im)?;
            }
            write!(f, ")")?;
            for (slot, name) in names.iter().enumerate() {
                match m[slot] {
                    0 => {}
                    1 => write!(f, "·{name}")?,
                    e => write!(f, "·{name}^{e}")?,
                }
            }
        }
        Ok(())
    }
}

/// `(1 - x)^(-power)` through `eps^order`; `x` must be at least first order.
fn inverse_power(x: &Poly, power: i64, order: u8) -> Poly {
    let mut out = Poly::constant(Coeff::one());
    let mut x_m = Poly::constant(Coeff::one());
    // binomial(power + m - 1, m)
    let mut binom = Ratio::from_integer(1i64);
    for m in 1..=order as i64 {
        x_m = x_m.mul(x).truncate(order);
        binom *= Ratio::new(power + m - 1, m);
        out = out.add(&x_m.scale(Complex::new(binom, Ratio::zero())));
    }
    out
}

/// Left symbol of the curved-strip Hamiltonian in scaled coordinates, minus
/// the transverse kinetic term `-d²/dU²`, through `eps^order`.
///
/// The operator is `D g⁻¹ D + eps² V` with `D = -i eps d/ds + U - eps U² κ/2`,
/// `g = (1 - eps U κ)²` and the curvature potential
/// `V = -(u κ'')/(2 g^{3/2}) - 5 u² κ'²/(4 g²) - κ²/(4 g)` at `u = eps U`.
pub fn strip_symbol(order: u8) -> Poly {
    let eps = Poly::eps();
    let u = Poly::u();
    let x = eps.mul(&u).mul(&Poly::kappa(0));
    let half = |p: &Poly, num: i64, den: i64| p.scale(rational(num, den));
    let d = Poly::k()
        .add(&u)
        .sub(&half(&eps.mul(&u.pow(2)).mul(&Poly::kappa(0)), 1, 2));
    let metric_inv = inverse_power(&x, 2, order);
    let kinetic = d.compose(&metric_inv, order).compose(&d, order);
    let phys_u = eps.mul(&u);
    let v_ddot = inverse_power(&x, 3, order)
        .mul(&phys_u)
        .mul(&Poly::kappa(2))
        .scale(rational(-1, 2));
    let v_dot = inverse_power(&x, 4, order)
        .mul(&phys_u.pow(2))
        .mul(&Poly::kappa(1).pow(2))
        .scale(rational(-5, 4));
    let v_norm = inverse_power(&x, 2, order)
        .mul(&Poly::kappa(0).pow(2))
        .scale(rational(-1, 4));
    let potential = v_ddot.add(&v_dot).add(&v_norm).mul(&eps.pow(2)).truncate(order);
    kinetic.add(&potential).truncate(order)
}

/// Order-by-order symbols `[σ0, σ1, σ2, …]` (each free of `eps`).
pub fn strip_symbol_orders(order: u8, weyl: bool) -> Vec<Poly> {
    let left = strip_symbol(order);
    let sym = if weyl { left.left_to_weyl(order) } else { left };
    (0..=order).map(|j| sym.eps_coefficient(j)).collect()
}

/// Left and Weyl symbols through third order, expanded once.
pub struct SymbolSet {
    pub left: Vec<Poly>,
    pub weyl: Vec<Poly>,
}

pub const CACHED_ORDER: u8 = 3;

pub fn symbols() -> &'static SymbolSet {
    static SET: std::sync::OnceLock<SymbolSet> = std::sync::OnceLock::new();
    SET.get_or_init(|| SymbolSet {
        left: strip_symbol_orders(CACHED_ORDER, false),
        weyl: strip_symbol_orders(CACHED_ORDER, true),
    })
}
