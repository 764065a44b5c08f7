pub mod bimodule;
pub mod exact;
pub mod cells;
pub mod coxeter;
pub mod hecke;
pub mod laurent;
pub mod perverse;
pub mod realization;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/coxeter.md")]
    mod coxeter {}
    #[doc = include_str!("../../../book/src/hecke.md")]
    mod hecke {}
    #[doc = include_str!("../../../book/src/cells.md")]
    mod cells {}
    #[doc = include_str!("../../../book/src/realization.md")]
    mod realization {}
    #[doc = include_str!("../../../book/src/bimodule.md")]
    mod bimodule {}
    #[doc = include_str!("../../../book/src/perverse.md")]
    mod perverse {}
}
