// The command-line workflow end to end, driven in-process:
// synth -> train -> evaluate -> compare -> project.

use textshift::cli::run;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();

    let steps: Vec<Vec<String>> = vec![
        vec!["synth", "--seed", "4", "--classes", "3", "--src-per-class", "40", "--tgt-per-class", "10"]
            .into_iter()
            .map(String::from)
            .chain(["--out-src", &p("src.jsonl"), "--out-tgt", &p("tgt.jsonl"), "--out-labels", &p("labels.txt")].map(String::from))
            .collect(),
        ["train", "--model", "fasttext", "--train", &p("src.jsonl"), "--val", &p("src.jsonl")]
            .into_iter()
            .chain(["--labels", &p("labels.txt"), "--out", &p("ft.ckpt"), "--epochs", "8", "--log", &p("run.log")])
            .map(String::from)
            .collect(),
        ["evaluate", "--model", &p("ft.ckpt"), "--data", &p("tgt.jsonl"), "--confusion", &p("confusion.csv")]
            .map(String::from)
            .to_vec(),
        ["compare", "--a", &p("src.jsonl"), "--b", &p("tgt.jsonl"), "--top", "3"].map(String::from).to_vec(),
    ];
    for args in steps {
        println!("$ textshift {}", args.join(" "));
        let code = run(std::iter::once("textshift".to_string()).chain(args));
        assert_eq!(code, 0);
    }
    println!("{}", std::fs::read_to_string(p("confusion.csv"))?);
    println!("log lines: {}", std::fs::read_to_string(p("run.log"))?.lines().count());
    Ok(())
}

fn main() {
    run_example().unwrap();
}
