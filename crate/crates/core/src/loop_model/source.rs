//! Where the loop model reads its randomness from.

use crate::error::Result;
use crate::rng::{tag, BernoulliThreshold, StreamKey};
use crate::torus::{Site, TorusGeometry};
use crate::walk::{walk_excursion, DEFAULT_WALK_CAP};

/// The three stacks `I(x, h)`, `J(x, ℓ)` and `Γ(x, ℓ, j)`.
///
/// A step at `x` calls [`StepSource::instruction`] once; when it reports a
/// loop, [`StepSource::colour`] and then [`StepSource::excursion`] are called
/// for that same step.
pub trait StepSource {
    /// `true` for a sleep.
    fn instruction(&mut self, x: Site, h: u64) -> Result<bool>;

    fn colour(&mut self, x: Site, l: u64) -> u32;

    /// Walks the loop `Γ(x, l, j)`, reporting visited sites other than `x`
    /// (possibly repeated). With `needed == false` the caller ignores the
    /// visits and the source may skip the walk.
    fn excursion(
        &mut self,
        x: Site,
        l: u64,
        j: u32,
        needed: bool,
        visit: &mut dyn FnMut(Site),
    ) -> Result<()>;
}

/// Independent counter-based stacks.
#[derive(Clone, Debug)]
pub struct IndependentStacks {
    geometry: TorusGeometry,
    sleep: BernoulliThreshold,
    key_i: StreamKey,
    key_j: StreamKey,
    key_g: StreamKey,
    walk_cap: u64,
    walks: u64,
}

impl IndependentStacks {
    pub fn new(geometry: TorusGeometry, lambda: f64, seed: u64) -> Self {
        let root = StreamKey::new(seed);
        IndependentStacks {
            geometry,
            sleep: BernoulliThreshold::new(lambda / (1.0 + lambda)),
            key_i: root.child(tag::SLEEP),
            key_j: root.child(tag::COLOUR),
            key_g: root.child(tag::LOOP),
            walk_cap: DEFAULT_WALK_CAP,
            walks: 0,
        }
    }

    pub fn with_walk_cap(mut self, cap: u64) -> Self {
        self.walk_cap = cap;
        self
    }

    /// Number of excursions actually simulated.
    pub fn walks(&self) -> u64 {
        self.walks
    }
}

/// `1 + J` is geometric with parameter 1/2: the number of trailing zeros of
/// a uniform word.
#[inline]
pub fn colour_from_word(u: u64) -> u32 {
    u.trailing_zeros()
}

impl StepSource for IndependentStacks {
    #[inline]
    fn instruction(&mut self, x: Site, h: u64) -> Result<bool> {
        Ok(self.sleep.test(self.key_i.child(x.0 as u64).at(h)))
    }

    #[inline]
    fn colour(&mut self, x: Site, l: u64) -> u32 {
        colour_from_word(self.key_j.child(x.0 as u64).at(l))
    }

    fn excursion(
        &mut self,
        x: Site,
        l: u64,
        j: u32,
        needed: bool,
        visit: &mut dyn FnMut(Site),
    ) -> Result<()> {
        if !needed {
            return Ok(());
        }
        self.walks += 1;
        let mut rng = self.key_g.child(x.0 as u64).child(l).child(j as u64).rng();
        walk_excursion(&self.geometry, x, &mut rng, self.walk_cap, visit)?;
        Ok(())
    }
}
