fn main() {
    let code = bayesmooth_cli::run(
        std::env::args_os().collect(),
        &mut std::io::stdout(),
        &mut std::io::stderr().lock(),
    );
    std::process::exit(code);
}
