#![allow(dead_code)]

use std::sync::{Arc, Condvar, Mutex};

use serde_json::{json, Value};
use sitblend::backend::{
    ClientError, GenerationRequest, GenerationResult, Generator, MockGenerator,
};
use sitblend::gallery::fixtures;
use sitblend::png_io::encode_png;
use sitblend::spec_format::serialize_spec;

/// Spec text and background PNG of a gallery fixture.
pub fn inputs(name: &str) -> (String, Vec<u8>) {
    let f = fixtures().into_iter().find(|f| f.name == name).unwrap();
    (serialize_spec(&f.spec), encode_png(&f.background))
}

/// Session params that keep runs quick.
pub fn quick_params() -> Value {
    json!({"seed": 42, "upscale": {"enabled": false}})
}

/// Mock generator that blocks every call until opened.
#[derive(Default)]
pub struct Gate {
    open: Mutex<bool>,
    cv: Condvar,
    entered: Mutex<usize>,
    entered_cv: Condvar,
}

impl Gate {
    pub fn new() -> Arc<Gate> {
        Arc::new(Gate::default())
    }

    pub fn open(&self) {
        *self.open.lock().unwrap() = true;
        self.cv.notify_all();
    }

    /// Blocks until `n` calls have reached the gate.
    pub fn wait_entered(&self, n: usize) {
        let mut e = self.entered.lock().unwrap();
        while *e < n {
            e = self.entered_cv.wait(e).unwrap();
        }
    }
}

impl Generator for Gate {
    fn generate(&self, request: &GenerationRequest) -> Result<GenerationResult, ClientError> {
        *self.entered.lock().unwrap() += 1;
        self.entered_cv.notify_all();
        let mut open = self.open.lock().unwrap();
        while !*open {
            open = self.cv.wait(open).unwrap();
        }
        drop(open);
        MockGenerator.generate(request)
    }

    fn describe(&self) -> String {
        "gated mock".into()
    }
}
