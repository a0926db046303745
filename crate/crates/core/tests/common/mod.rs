#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use selshot::corpus::{CodeSample, Corpus, Intent, Language, Split};
use selshot::harness::{RunSpec, RunStrategy};
use selshot::prompting::TemplateFamily;

pub const FIGURE_ONE: [(&str, &str, &str); 4] = [
    ("listdir", "print(os.listdir(dname))", "print the files in directory dname"),
    ("scipy", "x=scipy.matrix([1,2,3]).transpose()", "transpose a scipy matrix"),
    (
        "endswith",
        "r+=[e for e in os.listdir(folder) if e.endswith('.c')]",
        "collect the c files of folder",
    ),
    ("json", "data = json.loads(text)", "parse json text"),
];

pub fn figure_one_corpus() -> Corpus {
    Corpus::from_samples(
        FIGURE_ONE
            .iter()
            .map(|(id, code, expl)| CodeSample::new(*id, *code, *expl, Language::Python, Split::Train))
            .collect(),
    )
    .unwrap()
}

const LIBS: [&str; 8] = ["os", "re", "json", "math", "numpy", "pandas", "random", "shutil"];
const FUNCS: [&str; 12] = [
    "listdir", "loads", "dumps", "sqrt", "findall", "copy", "choice", "mean", "read_csv", "split", "join", "sub",
];
const VARS: [&str; 10] = ["path", "text", "data", "items", "df", "name", "value", "folder", "line", "x"];

/// A python snippet built from `lib.func(var)` calls, with a matching
/// one-line explanation.
pub fn snippet(rng: &mut impl Rng) -> (String, String) {
    let calls = rng.gen_range(1..=3);
    let mut code = Vec::new();
    let mut expl = Vec::new();
    for _ in 0..calls {
        let lib = LIBS.choose(rng).unwrap();
        let func = FUNCS.choose(rng).unwrap();
        let var = VARS.choose(rng).unwrap();
        code.push(format!("{lib}.{func}({var})"));
        expl.push(format!("{func} {var} with {lib}"));
    }
    let code = if rng.gen_bool(0.3) {
        format!("result = {}", code.join(" + "))
    } else {
        code.join("; ")
    };
    (code, expl.join(" then "))
}

pub fn synthetic_samples(seed: u64, train: usize, test: usize) -> Vec<CodeSample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for i in 0..train + test {
        let (code, expl) = snippet(&mut rng);
        let (id, split) = if i < train {
            (format!("tr{i:03}"), Split::Train)
        } else {
            (format!("te{:03}", i - train), Split::Test)
        };
        out.push(CodeSample::new(id, code, expl, Language::Python, split));
    }
    out
}

pub fn synthetic_corpus(seed: u64, train: usize, test: usize) -> Corpus {
    Corpus::from_samples(synthetic_samples(seed, train, test)).unwrap()
}

pub fn write_corpus(dir: &Path, name: &str, corpus: &Corpus) -> PathBuf {
    let path = dir.join(name);
    corpus.save(&path).unwrap();
    path
}

/// Intent-labelled java corpus with the given (intent, train, test) counts.
pub fn java_intent_corpus(counts: &[(Intent, usize, usize)]) -> Corpus {
    let mut samples = Vec::new();
    for &(intent, train, test) in counts {
        for (split, n) in [(Split::Train, train), (Split::Test, test)] {
            for i in 0..n {
                let id = format!("{}-{}-{i}", intent.as_str(), split.as_str());
                let code = format!("public int get{i}() {{ return this.value{i}; }}");
                let expl = format!("returns value {i}");
                samples.push(CodeSample::new(id, code, expl, Language::Java, split).with_intent(intent));
            }
        }
    }
    Corpus::from_samples(samples).unwrap()
}

pub fn spec(corpus: &Path, endpoint: &str, out: &Path, strategy: RunStrategy) -> RunSpec {
    RunSpec {
        corpus: corpus.to_path_buf(),
        strategy,
        k: 3,
        model: "stub-coder".into(),
        endpoint: endpoint.into(),
        family: Some(TemplateFamily::InstWrapped),
        output_dir: out.join("run"),
        cache_dir: out.join("cache"),
        retry_base_delay_ms: 1,
        timeout_secs: 10,
        ..RunSpec::default()
    }
}
