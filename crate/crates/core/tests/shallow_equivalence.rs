mod common;

use common::*;
use hidecheck::bench::Library;
use hidecheck::engine::Mode;

#[test]
fn corpus_drivers_agree() {
    let mut r = rng(31);
    for lib in Library::ALL {
        let pair = ShallowPair::new(library(lib));
        let discharge = lib.discharge();
        for _ in 0..150 {
            let text = driver(&mut r, lib, true);
            for mode in Mode::ALL {
                pair.compare(&text, "user", mode, &discharge).unwrap();
            }
        }
    }
}

#[test]
fn library_context_queries_agree() {
    let mut r = rng(32);
    for lib in Library::ALL {
        let pair = ShallowPair::new(library(lib));
        for _ in 0..40 {
            let text = driver(&mut r, lib, false);
            for mode in Mode::ALL {
                pair.compare(&text, lib.module(), mode, &lib.discharge()).unwrap();
            }
        }
    }
}

#[test]
fn tiny_programs_agree() {
    let mut r = rng(33);
    let none = Default::default();
    for _ in 0..80 {
        let texts = tiny_program(&mut r);
        let pair = ShallowPair::new(load_texts(&texts));
        for (text, ctx) in tiny_queries(&mut r, &pair.base, 6) {
            if compile(&pair.base, &text, ctx).is_none() {
                continue;
            }
            for mode in Mode::ALL {
                if let Err(e) = pair.compare(&text, ctx, mode, &none) {
                    panic!("{e}\n{}", texts.join("\n"));
                }
            }
        }
    }
}
