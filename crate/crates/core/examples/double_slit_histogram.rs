//! Detector histograms of the bundled two-slit model with the which-path
//! detector off and on, through the same entry point as the binary.

use causalkit::cli::main_with;

fn main() {
    for detector in ["off", "on"] {
        let args: Vec<String> = [
            "causalkit", "histogram", "builtin:double_slit", "--param", &format!("detector={detector}"),
            "--trials", "20000", "--seed", "3",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = main_with(&args, &mut out, &mut err);
        assert_eq!(code, 0, "{}", String::from_utf8_lossy(&err));
        println!("# detector={detector}");
        // Bar chart of the central bins.
        for line in String::from_utf8(out).unwrap().lines().skip(1).skip(22).take(20) {
            let cols: Vec<&str> = line.split(',').collect();
            let freq: f64 = cols[4].parse().unwrap();
            println!("{:>3} {}", cols[0], "#".repeat((freq * 800.0) as usize));
        }
    }
}
