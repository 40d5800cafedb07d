#![no_main]

use bob_url::model_io::{from_str, to_string, LoadOptions};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|text: &str| {
    let options = LoadOptions { allow_any_dims: true };
    if let Ok(model) = from_str(text, options) {
        assert_eq!(from_str(&to_string(&model), options).unwrap(), model);
    }
});
