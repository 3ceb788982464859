mod common;

use common::*;
use hidecheck::bench::Library;
use hidecheck::engine::Mode;

#[test]
fn corpus_runs_correspond() {
    let progs: Vec<_> = Library::ALL.iter().map(|l| (library(*l), l.discharge())).collect();
    let mut r = rng(11);
    for i in 0..200 {
        let lib = Library::ALL[i % 3];
        let (p, discharge) = &progs[i % 3];
        let text = driver(&mut r, lib, true);
        let q = compile(p, &text, "user").unwrap();
        for mode in Mode::ALL {
            if let Err(e) = check_correspondence(p, &q, config(mode, discharge)) {
                panic!("{text} under {mode}: {e}");
            }
        }
    }
}

#[test]
fn tiny_programs_correspond() {
    let mut r = rng(12);
    let none = Default::default();
    for _ in 0..60 {
        let texts = tiny_program(&mut r);
        let p = load_texts(&texts);
        for (text, ctx) in tiny_queries(&mut r, &p, 6) {
            let Some(q) = compile(&p, &text, ctx) else { continue };
            for mode in Mode::ALL {
                if let Err(e) = check_correspondence(&p, &q, config(mode, &none)) {
                    panic!("{text} in {ctx} under {mode}: {e}\n{}", texts.join("\n"));
                }
            }
        }
    }
}
